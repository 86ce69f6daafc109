//! Posterior computation: exact beta-binomial updates and a
//! Metropolis-within-Gibbs sampler for the hierarchical logit model
//!
//! ```text
//! x_j | p_j      ~ Binomial(n_j, p_j)
//! θ_j            = logit(p_j) − logit(p0_j)
//! θ_j | θ, σ²    ~ N(θ, σ²)
//! θ              ~ N(α0, τ0²)
//! σ²             ~ scaled-Inv-χ²(v0, σ0²)   or   σ ~ half-Cauchy(A)
//! ```

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{inv_logit, logit, HyperPrior, PriorSpec, TrialSpec};
use crate::seed::StreamRng;
use rand::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ArmData {
    /// Patients enrolled.
    pub n: u32,
    /// Responders among them.
    pub x: u32,
}

impl ArmData {
    pub fn new(n: u32, x: u32) -> Result<Self> {
        if x > n {
            return Err(Error::InvalidData(format!("{x} responders out of {n} patients")));
        }
        Ok(Self { n, x })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ObservedData {
    pub arms: Vec<ArmData>,
}

impl ObservedData {
    pub fn new(arms: Vec<ArmData>) -> Result<Self> {
        for a in &arms {
            ArmData::new(a.n, a.x)?;
        }
        Ok(Self { arms })
    }

    /// Builds from parallel `(n, x)` slices.
    pub fn from_counts(n: &[u32], x: &[u32]) -> Result<Self> {
        if n.len() != x.len() {
            return Err(Error::LengthMismatch {
                what: "responder counts",
                expected: n.len(),
                got: x.len(),
            });
        }
        Self::new(n.iter().zip(x).map(|(&n, &x)| ArmData { n, x }).collect())
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcControl {
    pub burn_in: usize,
    pub kept_draws: usize,
    pub thin: usize,
    pub seed: u64,
    /// Random-walk scale. A θ_j proposal has standard deviation
    /// `2.4 · step_scale` times the arm's approximate conditional posterior
    /// standard deviation; under a half-Cauchy prior the log σ step is
    /// `step_scale` itself.
    pub step_scale: f64,
}

impl Default for McmcControl {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            kept_draws: 10_000,
            thin: 1,
            seed: 0,
            step_scale: 0.8,
        }
    }
}

impl McmcControl {
    /// Smallest number of kept draws accepted for go/no-go decisions.
    pub const DECISION_FLOOR: usize = 1000;

    pub fn validate(&self) -> Result<()> {
        if self.kept_draws == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument(
                "kept_draws and thin must be positive".into(),
            ));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step_scale must be positive, got {}",
                self.step_scale
            )));
        }
        Ok(())
    }

    pub fn validate_for_decisions(&self) -> Result<()> {
        self.validate()?;
        if self.kept_draws < Self::DECISION_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "kept_draws {} is below the decision floor {}",
                self.kept_draws,
                Self::DECISION_FLOOR
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Kept posterior samples, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    n_arms: usize,
    /// Row-major `kept × J` response rates.
    p: Vec<f64>,
    /// Row-major `kept × J` arm effects θ_j.
    theta_arms: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Metropolis acceptance rate of each θ_j update over the whole chain.
    pub acceptance: Vec<f64>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.theta.len()
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Response-rate draws for one arm.
    pub fn arm(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.p.iter().skip(j).step_by(self.n_arms).copied()
    }

    pub fn arm_effects(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.theta_arms.iter().skip(j).step_by(self.n_arms).copied()
    }

    pub fn row(&self, draw: usize) -> &[f64] {
        &self.p[draw * self.n_arms..(draw + 1) * self.n_arms]
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.arm(j).sum::<f64>() / self.n_draws() as f64
    }

    /// Builds a draw set directly from response-rate rows (θ, σ² are left at zero
    /// and one respectively); useful for decision-rule tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_arms = rows.first().map_or(0, Vec::len);
        let mut p = Vec::with_capacity(rows.len() * n_arms);
        for r in rows {
            if r.len() != n_arms {
                return Err(Error::LengthMismatch {
                    what: "draw row",
                    expected: n_arms,
                    got: r.len(),
                });
            }
            if r.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::InvalidData("response-rate draws must lie in (0, 1)".into()));
            }
            p.extend_from_slice(r);
        }
        Ok(Self {
            n_arms,
            theta_arms: p.iter().map(|&v| logit(v)).collect(),
            p,
            theta: vec![0.0; rows.len()],
            sigma2: vec![1.0; rows.len()],
            acceptance: vec![0.0; n_arms],
        })
    }

    /// Writes `iteration,theta_1..theta_J,theta,sigma2`, one row per kept draw.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string()];
        header.extend((1..=self.n_arms).map(|k| format!("theta_{k}")));
        header.push("theta".into());
        header.push("sigma2".into());
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n_draws() {
            let mut row = vec![(i + 1).to_string()];
            row.extend(
                self.theta_arms[i * self.n_arms..(i + 1) * self.n_arms]
                    .iter()
                    .map(|t| t.to_string()),
            );
            row.push(self.theta[i].to_string());
            row.push(self.sigma2[i].to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidPrior(format!("beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Pr(p > t)
    Greater,
    /// Pr(p ≤ t)
    Leq,
}

/// Conjugate update of a `Beta(a1, b1)` prior with `x` responders out of `n`.
pub fn beta_binomial_posterior(x: u32, n: u32, a1: f64, b1: f64) -> Result<BetaParams> {
    if x > n {
        return Err(Error::InvalidData(format!("{x} responders out of {n} patients")));
    }
    BetaParams::new(x as f64 + a1, (n - x) as f64 + b1)
}

/// Tail probability of a beta distribution via the regularized incomplete beta.
pub fn beta_tail_prob(params: BetaParams, t: f64, tail: Tail) -> f64 {
    let leq = if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(params.a, params.b, t)
    };
    match tail {
        Tail::Leq => leq,
        Tail::Greater if t <= 0.0 => 1.0,
        Tail::Greater if t >= 1.0 => 0.0,
        // Evaluate the upper tail through the reflected function to keep
        // precision when the lower tail is close to one.
        Tail::Greater => statrs::function::beta::beta_reg(params.b, params.a, 1.0 - t),
    }
}

/// Monte Carlo Pr(p_j ≤ p0 | D).
pub fn posterior_futility_prob(draws: &PosteriorDraws, arm: usize, p0: f64) -> f64 {
    let hits = draws.arm(arm).filter(|&p| p <= p0).count();
    hits as f64 / draws.n_draws() as f64
}

/// Monte Carlo Pr(p_j ≥ p1 | D).
pub fn posterior_efficacy_prob(draws: &PosteriorDraws, arm: usize, p1: f64) -> f64 {
    let hits = draws.arm(arm).filter(|&p| p >= p1).count();
    hits as f64 / draws.n_draws() as f64
}

/// One arm as seen by the sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierArm {
    pub p0: f64,
    pub data: ArmData,
}

/// Runs the hierarchical sampler on every arm of `spec`.
pub fn bhm_sample(
    data: &ObservedData,
    spec: &TrialSpec,
    prior: &PriorSpec,
    hyper: &HyperPrior,
    control: &McmcControl,
) -> Result<PosteriorDraws> {
    let arms = align(data, spec)?;
    sample_hierarchy(&arms, prior, hyper, control)
}

pub(crate) fn align(data: &ObservedData, spec: &TrialSpec) -> Result<Vec<HierArm>> {
    if data.n_arms() != spec.n_arms() {
        return Err(Error::LengthMismatch {
            what: "observed arms",
            expected: spec.n_arms(),
            got: data.n_arms(),
        });
    }
    Ok(spec
        .arms
        .iter()
        .zip(&data.arms)
        .map(|(a, d)| HierArm { p0: a.p0, data: *d })
        .collect())
}

/// Collects the kept draws of a chain over an arbitrary subset of arms.
pub fn sample_hierarchy(
    arms: &[HierArm],
    prior: &PriorSpec,
    hyper: &HyperPrior,
    control: &McmcControl,
) -> Result<PosteriorDraws> {
    let j = arms.len();
    let mut out = PosteriorDraws {
        n_arms: j,
        p: Vec::with_capacity(control.kept_draws * j),
        theta_arms: Vec::with_capacity(control.kept_draws * j),
        theta: Vec::with_capacity(control.kept_draws),
        sigma2: Vec::with_capacity(control.kept_draws),
        acceptance: Vec::new(),
    };
    let acceptance = run_chain(arms, prior, hyper, control, |state| {
        for (k, &t) in state.theta_arms.iter().enumerate() {
            out.theta_arms.push(t);
            out.p.push(rate_from_effect(t, state.offsets[k]));
        }
        out.theta.push(state.theta);
        out.sigma2.push(state.sigma2);
    })?;
    out.acceptance = acceptance;
    Ok(out)
}

/// Per-arm `(Pr(p_j ≤ p0_j | D), Pr(p_j ≥ p1_j | D))` without storing draws.
pub fn hierarchy_tail_probs(
    arms: &[HierArm],
    p1s: &[f64],
    prior: &PriorSpec,
    hyper: &HyperPrior,
    control: &McmcControl,
) -> Result<Vec<(f64, f64)>> {
    let j = arms.len();
    let mut below = vec![0usize; j];
    let mut above = vec![0usize; j];
    let mut kept = 0usize;
    run_chain(arms, prior, hyper, control, |state| {
        kept += 1;
        for k in 0..j {
            let p = rate_from_effect(state.theta_arms[k], state.offsets[k]);
            if p <= arms[k].p0 {
                below[k] += 1;
            }
            if p >= p1s[k] {
                above[k] += 1;
            }
        }
    })?;
    let kept = kept as f64;
    Ok(below
        .into_iter()
        .zip(above)
        .map(|(b, a)| (b as f64 / kept, a as f64 / kept))
        .collect())
}

#[inline]
fn rate_from_effect(theta_j: f64, offset: f64) -> f64 {
    let p = inv_logit(theta_j + offset);
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub(crate) struct ChainState<'a> {
    pub theta_arms: &'a [f64],
    pub offsets: &'a [f64],
    pub theta: f64,
    pub sigma2: f64,
}

/// log(1 + e^η) without overflow.
#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[inline]
fn arm_log_lik(t: f64, offset: f64, d: ArmData) -> f64 {
    let eta = t + offset;
    d.x as f64 * eta - d.n as f64 * softplus(eta)
}

/// Drives the chain and hands every kept state to `keep`. Returns the θ_j
/// acceptance rates.
pub(crate) fn run_chain<F>(
    arms: &[HierArm],
    prior: &PriorSpec,
    hyper: &HyperPrior,
    control: &McmcControl,
    mut keep: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&ChainState<'_>),
{
    control.validate()?;
    let j = arms.len();
    if j == 0 {
        return Err(Error::InvalidData("sampler needs at least one arm".into()));
    }
    for a in arms {
        ArmData::new(a.data.n, a.data.x)?;
        if !(a.p0 > 0.0 && a.p0 < 1.0) {
            return Err(Error::InvalidProbability { name: "p0", value: a.p0 });
        }
    }
    let mut rng = StreamRng::seed_from_u64(control.seed);
    let offsets: Vec<f64> = arms.iter().map(|a| logit(a.p0)).collect();

    // Start from the empirical log-odds offsets with a half-count correction.
    let mut theta_arms: Vec<f64> = arms
        .iter()
        .zip(&offsets)
        .map(|(a, &c)| logit((a.data.x as f64 + 0.5) / (a.data.n as f64 + 1.0)) - c)
        .collect();
    let mut log_lik: Vec<f64> = theta_arms
        .iter()
        .zip(arms.iter().zip(&offsets))
        .map(|(&t, (a, &c))| arm_log_lik(t, c, a.data))
        .collect();
    let mut theta = theta_arms.iter().sum::<f64>() / j as f64;
    let mut sigma2 = 1.0;

    let step = control.step_scale;
    // Binomial information of each arm at its starting value; zero for arms
    // without patients.
    let info: Vec<f64> = arms
        .iter()
        .map(|a| {
            let p = (a.data.x as f64 + 0.5) / (a.data.n as f64 + 1.0);
            a.data.n as f64 * p * (1.0 - p)
        })
        .collect();
    let sigma_update = conjugate_sigma2(prior, j)?;

    let mut accepted = vec![0u64; j];
    let total = control.burn_in + control.kept_draws * control.thin;
    for iter in 0..total {
        // Arm effects: random walk sized to the conditional posterior (data
        // information plus the current σ²), so the chain keeps moving both
        // when the hierarchy pools strongly and when it barely pools.
        let half_prec = 0.5 / sigma2;
        for k in 0..j {
            let prop_sd = 2.4 * step / (info[k] + 1.0 / sigma2).sqrt();
            let cur = theta_arms[k];
            let z: f64 = rng.sample(StandardNormal);
            let cand = cur + prop_sd * z;
            let cand_lik = arm_log_lik(cand, offsets[k], arms[k].data);
            let (dc, dp) = (cand - theta, cur - theta);
            let log_ratio = cand_lik - log_lik[k] - half_prec * (dc * dc - dp * dp);
            if log_ratio.is_nan() {
                return Err(Error::NonFinite(format!(
                    "log acceptance ratio for arm {k} at iteration {iter} (theta={theta}, sigma2={sigma2})"
                )));
            }
            if log_ratio >= 0.0 || -rng.sample::<f64, _>(Exp1) < log_ratio {
                theta_arms[k] = cand;
                log_lik[k] = cand_lik;
                accepted[k] += 1;
            }
        }

        theta = draw_common_mean(&mut rng, &theta_arms, sigma2, hyper);
        let ss: f64 = theta_arms.iter().map(|t| (t - theta) * (t - theta)).sum();
        sigma2 = draw_sigma2(&mut rng, ss, j, prior, sigma_update.as_ref(), sigma2, step);
        if !(sigma2 > 0.0 && sigma2.is_finite() && theta.is_finite()) {
            return Err(Error::NonFinite(format!(
                "state at iteration {iter}: theta={theta}, sigma2={sigma2}"
            )));
        }

        if iter >= control.burn_in && (iter - control.burn_in).is_multiple_of(control.thin) {
            keep(&ChainState {
                theta_arms: &theta_arms,
                offsets: &offsets,
                theta,
                sigma2,
            });
        }
    }
    let rates: Vec<f64> = accepted.iter().map(|&a| a as f64 / total as f64).collect();
    log::trace!("theta_j acceptance rates {rates:?}");
    Ok(rates)
}

/// Conjugate θ | θ_1..θ_J, σ² draw.
pub(crate) fn draw_common_mean<R: Rng>(rng: &mut R, theta_arms: &[f64], sigma2: f64, hyper: &HyperPrior) -> f64 {
    let prior_prec = 1.0 / hyper.tau0_sq;
    let sum: f64 = theta_arms.iter().sum();
    let post_prec = prior_prec + theta_arms.len() as f64 / sigma2;
    let post_mean = (hyper.alpha0 * prior_prec + sum / sigma2) / post_prec;
    let z: f64 = rng.sample(StandardNormal);
    post_mean + z / post_prec.sqrt()
}

/// Posterior shape sampler and prior rate `b0` for the inverse-gamma family.
pub(crate) struct ConjugateSigma2 {
    shape: Gamma<f64>,
    b0: f64,
}

pub(crate) fn conjugate_sigma2(prior: &PriorSpec, j: usize) -> Result<Option<ConjugateSigma2>> {
    let Some((a0, b0)) = prior.to_inverse_gamma() else {
        return Ok(None);
    };
    let shape = Gamma::new(a0 + j as f64 / 2.0, 1.0)
        .map_err(|e| Error::InvalidPrior(format!("posterior shape: {e}")))?;
    Ok(Some(ConjugateSigma2 { shape, b0 }))
}

/// σ² | θ_1..θ_J, θ given the sum of squares `ss`: a conjugate draw under the
/// inverse-gamma family, one random-walk step on log σ under the half-Cauchy.
pub(crate) fn draw_sigma2<R: Rng>(
    rng: &mut R,
    ss: f64,
    j: usize,
    prior: &PriorSpec,
    conjugate: Option<&ConjugateSigma2>,
    current: f64,
    step: f64,
) -> f64 {
    match (prior, conjugate) {
        (_, Some(c)) => {
            let draw: f64 = c.shape.sample(rng);
            (c.b0 + ss / 2.0) / draw
        }
        (PriorSpec::HalfCauchy { scale_a }, None) => {
            let jf = j as f64;
            let log_target = |u: f64| {
                let s2 = (2.0 * u).exp();
                -jf * u - ss / (2.0 * s2) - (s2 / (scale_a * scale_a)).ln_1p() + u
            };
            let cur = 0.5 * current.ln();
            let z: f64 = rng.sample(StandardNormal);
            let cand = cur + step * z;
            let log_ratio = log_target(cand) - log_target(cur);
            if log_ratio >= 0.0 || -rng.sample::<f64, _>(Exp1) < log_ratio {
                (2.0 * cand).exp()
            } else {
                current
            }
        }
        (PriorSpec::ScaledInvChiSq { .. }, None) => unreachable!("conjugate update built for every inverse-gamma prior"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn beta_binomial_examples() {
        assert_eq!(
            beta_binomial_posterior(3, 10, 0.1, 0.1).unwrap(),
            BetaParams { a: 3.1, b: 7.1 }
        );
        assert_eq!(
            beta_binomial_posterior(0, 0, 0.1, 0.1).unwrap(),
            BetaParams { a: 0.1, b: 0.1 }
        );
        assert_eq!(
            beta_binomial_posterior(10, 10, 1.0, 1.0).unwrap(),
            BetaParams { a: 11.0, b: 1.0 }
        );
        assert!(beta_binomial_posterior(11, 10, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_tail_simple_cases() {
        let uniform = BetaParams::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(beta_tail_prob(uniform, 0.5, Tail::Greater), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(beta_tail_prob(uniform, 0.3, Tail::Leq), 0.3, epsilon = 1e-15);
        let b = BetaParams::new(3.1, 7.1).unwrap();
        assert_eq!(beta_tail_prob(b, 0.0, Tail::Greater), 1.0);
        assert_abs_diff_eq!(beta_tail_prob(b, 1e-12, Tail::Greater), 1.0, epsilon = 1e-12);
        assert_eq!(beta_tail_prob(b, 1.0, Tail::Leq), 1.0);
        let g = beta_tail_prob(b, 0.3, Tail::Greater);
        let l = beta_tail_prob(b, 0.3, Tail::Leq);
        assert_abs_diff_eq!(g + l, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn data_validation() {
        assert!(ArmData::new(5, 6).is_err());
        assert!(ObservedData::from_counts(&[10, 10], &[2]).is_err());
        assert!(ObservedData::from_counts(&[10, 10], &[2, 11]).is_err());
    }

    #[test]
    fn futility_and_efficacy_from_draws() {
        let high = PosteriorDraws::from_rows(&[vec![0.5, 0.01], vec![0.6, 0.02]]).unwrap();
        assert_eq!(posterior_futility_prob(&high, 0, 0.2), 0.0);
        assert_eq!(posterior_futility_prob(&high, 1, 0.2), 1.0);
        assert_eq!(posterior_efficacy_prob(&high, 0, 0.3), 1.0);
        assert_eq!(posterior_efficacy_prob(&high, 1, 0.3), 0.0);
        // Complementary events overlap at equality.
        let mixed =
            PosteriorDraws::from_rows(&[vec![0.1], vec![0.2], vec![0.3], vec![0.2]]).unwrap();
        for t in [0.1, 0.2, 0.25, 0.3] {
            assert!(posterior_futility_prob(&mixed, 0, t) + posterior_efficacy_prob(&mixed, 0, t) >= 1.0);
        }
    }

    fn ig(a: f64, b: f64) -> PriorSpec {
        PriorSpec::inverse_gamma(a, b).unwrap()
    }

    #[test]
    fn sampler_is_deterministic() {
        let spec = TrialSpec::uniform(3, 0.05, 0.2, 20, vec![10, 20]).unwrap();
        let data = ObservedData::from_counts(&[10, 20, 0], &[1, 5, 0]).unwrap();
        let control = McmcControl {
            burn_in: 200,
            kept_draws: 1000,
            ..McmcControl::default()
        }
        .with_seed(42);
        let hyper = HyperPrior::default();
        let a = bhm_sample(&data, &spec, &ig(2.0, 8.0), &hyper, &control).unwrap();
        let b = bhm_sample(&data, &spec, &ig(2.0, 8.0), &hyper, &control).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_draws(), 1000);
        assert!(a.sigma2.iter().all(|&s| s > 0.0));
        assert!((0..3).all(|j| a.arm(j).all(|p| p > 0.0 && p < 1.0)));
        let c = bhm_sample(&data, &spec, &ig(2.0, 8.0), &hyper, &control.with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn thinning_keeps_requested_count() {
        let spec = TrialSpec::uniform(2, 0.05, 0.2, 20, vec![20]).unwrap();
        let data = ObservedData::from_counts(&[20, 20], &[3, 4]).unwrap();
        let control = McmcControl {
            burn_in: 10,
            kept_draws: 50,
            thin: 3,
            ..McmcControl::default()
        };
        let draws =
            bhm_sample(&data, &spec, &ig(1.0, 1.0), &HyperPrior::default(), &control).unwrap();
        assert_eq!(draws.n_draws(), 50);
        assert!(bhm_sample(
            &data,
            &spec,
            &ig(1.0, 1.0),
            &HyperPrior::default(),
            &McmcControl { thin: 0, ..control }
        )
        .is_err());
    }

    #[test]
    fn streaming_tails_match_stored_draws() {
        let spec = TrialSpec::uniform(3, 0.05, 0.2, 20, vec![10, 20]).unwrap();
        let data = ObservedData::from_counts(&[10, 20, 10], &[0, 4, 2]).unwrap();
        let control = McmcControl {
            burn_in: 300,
            kept_draws: 2000,
            ..McmcControl::default()
        }
        .with_seed(5);
        let prior = PriorSpec::half_cauchy(1.0).unwrap();
        let hyper = HyperPrior::default();
        let draws = bhm_sample(&data, &spec, &prior, &hyper, &control).unwrap();
        let arms = align(&data, &spec).unwrap();
        let tails = hierarchy_tail_probs(&arms, &spec.p1s(), &prior, &hyper, &control).unwrap();
        for j in 0..3 {
            assert_eq!(tails[j].0, posterior_futility_prob(&draws, j, 0.05));
            assert_eq!(tails[j].1, posterior_efficacy_prob(&draws, j, 0.2));
        }
    }

    /// Sample mean, variance and the standard errors of both.
    fn moments(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, var, (var / n).sqrt(), ((m4 - var * var) / n).sqrt())
    }

    #[test]
    fn common_mean_update_matches_normal_posterior() {
        let theta_arms = [0.5, 1.0, -0.2];
        let sigma2 = 0.7;
        let hyper = HyperPrior::new(0.3, 4.0).unwrap();
        let mut rng = StreamRng::seed_from_u64(17);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| draw_common_mean(&mut rng, &theta_arms, sigma2, &hyper))
            .collect();
        let prec = 1.0 / 4.0 + 3.0 / sigma2;
        let want_mean = (0.3 / 4.0 + 1.3 / sigma2) / prec;
        let (mean, var, se_mean, se_var) = moments(&draws);
        assert!((mean - want_mean).abs() < 3.0 * se_mean, "{mean} vs {want_mean}");
        assert!((var - 1.0 / prec).abs() < 3.0 * se_var, "{var} vs {}", 1.0 / prec);
    }

    #[test]
    fn sigma2_update_matches_inverse_gamma_posterior() {
        let (a0, b0) = (3.0, 2.0);
        let prior = ig(a0, b0);
        let theta_arms = [0.5, 1.0, -0.2, 0.1];
        let theta = 0.25;
        let ss: f64 = theta_arms.iter().map(|t: &f64| (t - theta).powi(2)).sum();
        let conj = conjugate_sigma2(&prior, 4).unwrap().unwrap();
        let mut rng = StreamRng::seed_from_u64(23);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| draw_sigma2(&mut rng, ss, 4, &prior, Some(&conj), 1.0, 0.8))
            .collect();
        let (a, b) = (a0 + 2.0, b0 + ss / 2.0);
        let want_mean = b / (a - 1.0);
        let want_var = b * b / ((a - 1.0).powi(2) * (a - 2.0));
        let (mean, var, se_mean, se_var) = moments(&draws);
        assert!((mean - want_mean).abs() < 3.0 * se_mean, "{mean} vs {want_mean}");
        assert!((var - want_var).abs() < 3.0 * se_var, "{var} vs {want_var}");
    }

    #[test]
    fn half_cauchy_step_targets_its_posterior() {
        // With θ_j and θ held fixed the log-σ chain must settle on
        // p(σ | ss) ∝ σ^-J exp(-ss / 2σ²) / (1 + σ²/A²); compare Pr(σ² ≤ 1)
        // with a direct numerical integral.
        let prior = PriorSpec::half_cauchy(1.5).unwrap();
        let (j, ss) = (3, 1.2);
        let density = |u: f64| {
            let s2 = (2.0 * u).exp();
            (-(j as f64) * u - ss / (2.0 * s2) - (s2 / 2.25).ln_1p() + u).exp()
        };
        let grid: Vec<f64> = (0..=40_000).map(|i| -12.0 + i as f64 * 0.0005).collect();
        let total: f64 = grid.iter().map(|&u| density(u)).sum();
        let below: f64 = grid.iter().filter(|&&u| u <= 0.0).map(|&u| density(u)).sum();
        let want = below / total;

        let mut rng = StreamRng::seed_from_u64(29);
        let mut s2 = 1.0;
        let mut hits = 0usize;
        let n = 400_000;
        for i in 0..n + 1000 {
            s2 = draw_sigma2(&mut rng, ss, j, &prior, None, s2, 0.8);
            if i >= 1000 && s2 <= 1.0 {
                hits += 1;
            }
        }
        let got = hits as f64 / n as f64;
        assert!((got - want).abs() < 0.01, "{got} vs {want}");
    }
}
