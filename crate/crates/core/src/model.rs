//! Trial, prior and hyperprior types shared by every design, together with the
//! logit-offset transform that puts each arm on a common effect scale.

use crate::error::{Error, Result};
use crate::partition::enumerate_partitions;

/// One tumor type (arm) of a basket trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    /// Null response rate deemed futile.
    pub p0: f64,
    /// Target response rate deemed promising.
    pub p1: f64,
    /// Maximum sample size.
    pub max_n: u32,
    /// Cumulative sample sizes at which the arm is analyzed; ends at `max_n`.
    pub interim_ns: Vec<u32>,
}

impl ArmSpec {
    pub fn new(p0: f64, p1: f64, max_n: u32, interim_ns: Vec<u32>) -> Result<Self> {
        check_open_unit("p0", p0)?;
        check_open_unit("p1", p1)?;
        if p0 >= p1 {
            return Err(Error::InvalidTrial(format!(
                "null rate {p0} must be below target rate {p1}"
            )));
        }
        if max_n == 0 {
            return Err(Error::InvalidTrial("max_n must be positive".into()));
        }
        if interim_ns.is_empty() {
            return Err(Error::InvalidTrial("interim schedule is empty".into()));
        }
        if interim_ns[0] == 0 || interim_ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTrial(format!(
                "interim sample sizes {interim_ns:?} must be positive and strictly increasing"
            )));
        }
        if *interim_ns.last().unwrap() != max_n {
            return Err(Error::InvalidTrial(format!(
                "last interim {} must equal max_n {max_n}",
                interim_ns.last().unwrap()
            )));
        }
        Ok(Self {
            p0,
            p1,
            max_n,
            interim_ns,
        })
    }

    pub fn n_looks(&self) -> usize {
        self.interim_ns.len()
    }

    /// Arms are exchangeable for partition counting when they share `(p0, p1)`.
    pub(crate) fn rate_key(&self) -> (u64, u64) {
        (self.p0.to_bits(), self.p1.to_bits())
    }
}

/// The arms of a basket trial, in reporting order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub arms: Vec<ArmSpec>,
}

impl TrialSpec {
    pub fn new(arms: Vec<ArmSpec>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::InvalidTrial(format!(
                "a hierarchical trial needs at least two arms, got {}",
                arms.len()
            )));
        }
        Ok(Self { arms })
    }

    /// Arms sharing every rate and the same per-arm size and schedule.
    pub fn uniform(j: usize, p0: f64, p1: f64, max_n: u32, interim_ns: Vec<u32>) -> Result<Self> {
        let arm = ArmSpec::new(p0, p1, max_n, interim_ns)?;
        Self::new(vec![arm; j])
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn p0s(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.p0).collect()
    }

    pub fn p1s(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.p1).collect()
    }

    pub fn max_looks(&self) -> usize {
        self.arms.iter().map(ArmSpec::n_looks).max().unwrap_or(0)
    }
}

/// Prior on the between-arm variance σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    /// Scaled inverse-χ²(v0, σ0²), identical to inverse-gamma(v0/2, v0·σ0²/2).
    ScaledInvChiSq { v0: f64, sigma0_sq: f64 },
    /// Half-Cauchy prior on σ with scale `scale_a`.
    HalfCauchy { scale_a: f64 },
}

impl PriorSpec {
    pub fn scaled_inv_chi_sq(v0: f64, sigma0_sq: f64) -> Result<Self> {
        if !(v0 > 0.0 && v0.is_finite()) || !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "scaled inverse-chi-square needs v0 > 0 and sigma0_sq > 0, got ({v0}, {sigma0_sq})"
            )));
        }
        Ok(Self::ScaledInvChiSq { v0, sigma0_sq })
    }

    pub fn inverse_gamma(a0: f64, b0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) || !(b0 > 0.0 && b0.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "inverse-gamma needs a0 > 0 and b0 > 0, got ({a0}, {b0})"
            )));
        }
        Self::scaled_inv_chi_sq(2.0 * a0, b0 / a0)
    }

    pub fn half_cauchy(scale_a: f64) -> Result<Self> {
        if !(scale_a > 0.0 && scale_a.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "half-Cauchy scale must be positive, got {scale_a}"
            )));
        }
        Ok(Self::HalfCauchy { scale_a })
    }

    /// `(a0, b0)` of the equivalent inverse-gamma, if this is a scaled inverse-χ².
    pub fn to_inverse_gamma(&self) -> Option<(f64, f64)> {
        match *self {
            Self::ScaledInvChiSq { v0, sigma0_sq } => Some((v0 / 2.0, v0 * sigma0_sq / 2.0)),
            Self::HalfCauchy { .. } => None,
        }
    }

    /// Bit-level identity, used for memoization keys.
    pub(crate) fn key(&self) -> [u64; 3] {
        match *self {
            Self::ScaledInvChiSq { v0, sigma0_sq } => [1, v0.to_bits(), sigma0_sq.to_bits()],
            Self::HalfCauchy { scale_a } => [2, scale_a.to_bits(), 0],
        }
    }
}

impl std::fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ScaledInvChiSq { .. } => {
                let (a0, b0) = self.to_inverse_gamma().unwrap();
                write!(f, "IG({a0}, {b0})")
            }
            Self::HalfCauchy { scale_a } => write!(f, "HalfCauchy({scale_a})"),
        }
    }
}

/// Normal prior on the common mean θ of the arm effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPrior {
    pub alpha0: f64,
    pub tau0_sq: f64,
}

impl HyperPrior {
    pub fn new(alpha0: f64, tau0_sq: f64) -> Result<Self> {
        if !alpha0.is_finite() || !(tau0_sq > 0.0 && tau0_sq.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "hyperprior needs finite alpha0 and tau0_sq > 0, got ({alpha0}, {tau0_sq})"
            )));
        }
        Ok(Self { alpha0, tau0_sq })
    }
}

impl Default for HyperPrior {
    fn default() -> Self {
        Self {
            alpha0: 0.0,
            tau0_sq: 100.0,
        }
    }
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

#[inline]
pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub(crate) fn inv_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of `p` relative to the null rate `p0`.
pub fn theta_offset(p: f64, p0: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    check_open_unit("p0", p0)?;
    Ok(logit(p) - logit(p0))
}

/// Response rate whose log-odds exceed those of `p0` by `theta`.
pub fn inv_theta_offset(theta: f64, p0: f64) -> Result<f64> {
    check_open_unit("p0", p0)?;
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("theta must be finite, got {theta}")));
    }
    Ok(inv_logit(theta + logit(p0)))
}

/// Largest sample variance (divisor J−1) of the arm effects over all partitions,
/// with sensitive arms at their target rate and insensitive arms at their null rate.
pub fn empirical_sigma_max(spec: &TrialSpec) -> f64 {
    let effects: Vec<f64> = spec
        .arms
        .iter()
        .map(|a| logit(a.p1) - logit(a.p0))
        .collect();
    enumerate_partitions(spec)
        .iter()
        .map(|part| {
            let theta: Vec<f64> = part
                .sensitive
                .iter()
                .zip(&effects)
                .map(|(&s, &e)| if s { e } else { 0.0 })
                .collect();
            sample_variance(&theta)
        })
        .fold(0.0, f64::max)
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::testutil::four_arm;
    use proptest::prelude::*;

    #[test]
    fn arm_validation() {
        assert!(ArmSpec::new(0.2, 0.1, 20, vec![10, 20]).is_err());
        assert!(ArmSpec::new(0.0, 0.1, 20, vec![10, 20]).is_err());
        assert!(ArmSpec::new(0.1, 1.0, 20, vec![10, 20]).is_err());
        assert!(ArmSpec::new(0.1, 0.2, 20, vec![10, 19]).is_err());
        assert!(ArmSpec::new(0.1, 0.2, 20, vec![10, 10, 20]).is_err());
        assert!(ArmSpec::new(0.1, 0.2, 20, vec![0, 20]).is_err());
        assert!(ArmSpec::new(0.1, 0.2, 20, vec![]).is_err());
        assert!(ArmSpec::new(0.1, 0.2, 20, vec![20]).is_ok());
    }

    #[test]
    fn trial_needs_two_arms() {
        let arm = ArmSpec::new(0.05, 0.2, 20, vec![10, 20]).unwrap();
        assert!(TrialSpec::new(vec![arm.clone()]).is_err());
        assert!(TrialSpec::new(vec![arm.clone(), arm]).is_ok());
    }

    #[test]
    fn theta_offset_examples() {
        assert_eq!(theta_offset(0.05, 0.05).unwrap(), 0.0);
        let expected = 0.25f64.ln() - (1.0f64 / 19.0).ln();
        assert_abs_diff_eq!(theta_offset(0.20, 0.05).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_offset(0.20, 0.05).unwrap(), 1.55815, epsilon = 1e-5);
        assert_abs_diff_eq!(inv_theta_offset(0.0, 0.15).unwrap(), 0.15, epsilon = 1e-15);
        assert!(theta_offset(0.0, 0.05).is_err());
        assert!(theta_offset(0.5, 1.0).is_err());
    }

    #[test]
    fn prior_reparameterization() {
        let ig = PriorSpec::inverse_gamma(2.0, 8.0).unwrap();
        assert_eq!(
            ig,
            PriorSpec::ScaledInvChiSq {
                v0: 4.0,
                sigma0_sq: 4.0
            }
        );
        let cobhm = PriorSpec::inverse_gamma(1.0, 1.44).unwrap();
        let PriorSpec::ScaledInvChiSq { v0, sigma0_sq } = cobhm else {
            unreachable!()
        };
        assert_eq!(v0, 2.0);
        assert_abs_diff_eq!(sigma0_sq, 1.44, epsilon = 1e-12);
        let (a0, b0) = cobhm.to_inverse_gamma().unwrap();
        assert_abs_diff_eq!(a0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b0, 1.44, epsilon = 1e-12);
        assert!(PriorSpec::inverse_gamma(0.0, 1.0).is_err());
        assert!(PriorSpec::half_cauchy(-1.0).is_err());
        assert_eq!(PriorSpec::half_cauchy(1.0).unwrap().to_inverse_gamma(), None);
    }

    #[test]
    fn sigma_max_partition_contributions() {
        // Partition (S,S,S,I) of the four-arm setting.
        let t = theta_offset(0.2, 0.05).unwrap();
        assert_abs_diff_eq!(sample_variance(&[t, t, t, 0.0]), 0.60696, epsilon = 1e-5);
        assert_eq!(sample_variance(&[0.0; 4]), 0.0);
    }

    #[test]
    fn sigma_max_matches_brute_force() {
        let spec = four_arm();
        // Brute force over every one of the 16 sensitivity assignments.
        let mut best = 0.0f64;
        for mask in 0..16u32 {
            let theta: Vec<f64> = spec
                .arms
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let p = if mask >> j & 1 == 1 { a.p1 } else { a.p0 };
                    (p / (1.0 - p)).ln() - (a.p0 / (1.0 - a.p0)).ln()
                })
                .collect();
            let m = theta.iter().sum::<f64>() / 4.0;
            let v = theta.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0;
            best = best.max(v);
        }
        assert_abs_diff_eq!(empirical_sigma_max(&spec), best, epsilon = 1e-14);
        assert!(best > 0.6);
    }

    proptest! {
        #[test]
        fn theta_offset_round_trip(p in 1e-6f64..0.999_999, p0 in 1e-4f64..0.9999) {
            let theta = theta_offset(p, p0).unwrap();
            prop_assert!((inv_theta_offset(theta, p0).unwrap() - p).abs() < 1e-12);
        }

        #[test]
        fn theta_offset_positive_above_null(p0 in 0.001f64..0.9, gap in 1e-6f64..0.09) {
            prop_assert!(theta_offset(p0 + gap, p0).unwrap() > 0.0);
        }

        #[test]
        fn prior_round_trip(v0 in 1e-3f64..100.0, s in 1e-6f64..1e4) {
            let prior = PriorSpec::scaled_inv_chi_sq(v0, s).unwrap();
            let (a0, b0) = prior.to_inverse_gamma().unwrap();
            let back = PriorSpec::inverse_gamma(a0, b0).unwrap();
            let PriorSpec::ScaledInvChiSq { v0: v1, sigma0_sq: s1 } = back else { unreachable!() };
            prop_assert!((v1 - v0).abs() <= 1e-12 * v0.max(1.0));
            prop_assert!((s1 - s).abs() <= 1e-12 * s.max(1.0));
        }
    }
}
