//! Power versus type I error tradeoff utilities.

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Finite stand-in for an "infinite" penalty that forbids type I error above a level.
pub const STRICT_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    /// One change point: penalty `lambda1` per unit of type I error, plus
    /// `lambda2` per unit above `eta`.
    TwoRegion { lambda1: f64, lambda2: f64, eta: f64 },
    /// Two change points `eta1 < eta2` with incremental penalties.
    ThreeRegion {
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
        eta1: f64,
        eta2: f64,
    },
    /// Per-arm gains `gains[j]` for power; losses `f1`, `f2` for type I error.
    CostBenefit {
        gains: Vec<f64>,
        f1: f64,
        f2: f64,
        eta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    /// One weight per canonical partition, in `enumerate_partitions` order.
    pub weights: Vec<f64>,
}

impl UtilitySpec {
    pub fn new(kind: UtilityKind, weights: Vec<f64>) -> Result<Self> {
        validate_kind(&kind)?;
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidUtility(
                "partition weights must be nonnegative and nonempty".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::WeightSum(total));
        }
        Ok(Self { kind, weights })
    }

    pub fn equal_weights(kind: UtilityKind, n_partitions: usize) -> Result<Self> {
        Self::new(kind, vec![1.0 / n_partitions as f64; n_partitions])
    }

    /// All weight on partition `g`.
    pub fn with_single_partition(&self, g: usize) -> Self {
        let mut weights = vec![0.0; self.weights.len()];
        weights[g] = 1.0;
        Self {
            kind: self.kind.clone(),
            weights,
        }
    }
}

fn validate_kind(kind: &UtilityKind) -> Result<()> {
    let nonneg = |name: &str, v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidUtility(format!("{name} must be a finite nonnegative value, got {v}")))
        }
    };
    let level = |name: &str, v: f64| {
        if v > 0.0 && v < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidUtility(format!("{name} must lie in (0, 1), got {v}")))
        }
    };
    match kind {
        UtilityKind::TwoRegion { lambda1, lambda2, eta } => {
            nonneg("lambda1", *lambda1)?;
            nonneg("lambda2", *lambda2)?;
            level("eta", *eta)
        }
        UtilityKind::ThreeRegion {
            lambda1,
            lambda2,
            lambda3,
            eta1,
            eta2,
        } => {
            nonneg("lambda1", *lambda1)?;
            nonneg("lambda2", *lambda2)?;
            nonneg("lambda3", *lambda3)?;
            level("eta1", *eta1)?;
            level("eta2", *eta2)?;
            if eta1 >= eta2 {
                return Err(Error::InvalidUtility(format!(
                    "eta1 ({eta1}) must be below eta2 ({eta2})"
                )));
            }
            Ok(())
        }
        UtilityKind::CostBenefit { gains, f1, f2, eta } => {
            for g in gains {
                nonneg("gain", *g)?;
            }
            nonneg("f1", *f1)?;
            nonneg("f2", *f2)?;
            level("eta", *eta)
        }
    }
}

#[inline]
fn excess(gamma: f64, level: f64) -> f64 {
    if gamma > level {
        gamma - level
    } else {
        0.0
    }
}

/// Utility of one partition given the powers of its sensitive arms and the
/// type I error rates of its insensitive arms, both in arm order.
pub fn utility(partition: &Partition, powers: &[f64], type1s: &[f64], spec: &UtilitySpec) -> Result<f64> {
    let sensitive = partition.sensitive_arms();
    let insensitive = partition.insensitive_arms();
    if powers.len() != sensitive.len() {
        return Err(Error::LengthMismatch {
            what: "powers",
            expected: sensitive.len(),
            got: powers.len(),
        });
    }
    if type1s.len() != insensitive.len() {
        return Err(Error::LengthMismatch {
            what: "type I error rates",
            expected: insensitive.len(),
            got: type1s.len(),
        });
    }
    if powers.iter().chain(type1s).any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidArgument("rates must lie in [0, 1]".into()));
    }
    let u = match &spec.kind {
        UtilityKind::TwoRegion { lambda1, lambda2, eta } => {
            powers.iter().sum::<f64>()
                - type1s
                    .iter()
                    .map(|&g| lambda1 * g + lambda2 * excess(g, *eta))
                    .sum::<f64>()
        }
        UtilityKind::ThreeRegion {
            lambda1,
            lambda2,
            lambda3,
            eta1,
            eta2,
        } => {
            powers.iter().sum::<f64>()
                - type1s
                    .iter()
                    .map(|&g| lambda1 * g + lambda2 * excess(g, *eta1) + lambda3 * excess(g, *eta2))
                    .sum::<f64>()
        }
        UtilityKind::CostBenefit { gains, f1, f2, eta } => {
            if gains.len() != partition.n_arms() {
                return Err(Error::LengthMismatch {
                    what: "per-arm gains",
                    expected: partition.n_arms(),
                    got: gains.len(),
                });
            }
            sensitive
                .iter()
                .zip(powers)
                .map(|(&i, &rho)| gains[i] * rho)
                .sum::<f64>()
                - type1s
                    .iter()
                    .map(|&g| f1 * g + f2 * excess(g, *eta))
                    .sum::<f64>()
        }
    };
    Ok(u)
}

/// Weighted average of per-partition utilities.
pub fn mean_utility(utilities: &[f64], weights: &[f64]) -> Result<f64> {
    if utilities.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "partition weights",
            expected: utilities.len(),
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSum(total));
    }
    Ok(utilities.iter().zip(weights).map(|(u, w)| u * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_region() -> UtilitySpec {
        UtilitySpec::equal_weights(
            UtilityKind::TwoRegion {
                lambda1: 1.0,
                lambda2: 2.0,
                eta: 0.2,
            },
            8,
        )
        .unwrap()
    }

    #[test]
    fn two_region_examples() {
        let spec = two_region();
        let null = Partition::global_null(4);
        assert_abs_diff_eq!(
            utility(&null, &[], &[0.1; 4], &spec).unwrap(),
            -0.4,
            epsilon = 1e-12
        );
        let mixed = Partition::new(vec![true, false]);
        assert_abs_diff_eq!(
            utility(&mixed, &[0.8], &[0.3], &spec).unwrap(),
            0.3,
            epsilon = 1e-12
        );
        let alt = Partition::global_alternative(4);
        assert_eq!(utility(&alt, &[0.0; 4], &[], &spec).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let spec = two_region();
        let p = Partition::new(vec![true, false, false]);
        assert!(matches!(
            utility(&p, &[0.5, 0.5], &[0.1], &spec),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(utility(&p, &[0.5], &[0.1], &spec).is_err());
        assert!(utility(&p, &[1.5], &[0.1, 0.1], &spec).is_err());
    }

    #[test]
    fn three_region_and_cost_benefit() {
        let three = UtilitySpec::new(
            UtilityKind::ThreeRegion {
                lambda1: 1.0,
                lambda2: 2.0,
                lambda3: 4.0,
                eta1: 0.1,
                eta2: 0.2,
            },
            vec![1.0],
        )
        .unwrap();
        let p = Partition::new(vec![true, false]);
        // 0.9 - (0.3 + 2*0.2 + 4*0.1)
        assert_abs_diff_eq!(utility(&p, &[0.9], &[0.3], &three).unwrap(), -0.2, epsilon = 1e-12);

        let cb = UtilitySpec::new(
            UtilityKind::CostBenefit {
                gains: vec![3.0, 5.0],
                f1: 1.0,
                f2: 2.0,
                eta: 0.2,
            },
            vec![1.0],
        )
        .unwrap();
        let p = Partition::new(vec![false, true]);
        // 5*0.5 - (0.25 + 2*0.05)
        assert_abs_diff_eq!(utility(&p, &[0.5], &[0.25], &cb).unwrap(), 2.15, epsilon = 1e-12);
    }

    #[test]
    fn spec_validation() {
        let bad = UtilityKind::ThreeRegion {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            eta1: 0.2,
            eta2: 0.1,
        };
        assert!(UtilitySpec::new(bad, vec![1.0]).is_err());
        let neg = UtilityKind::TwoRegion {
            lambda1: -1.0,
            lambda2: 1.0,
            eta: 0.2,
        };
        assert!(UtilitySpec::new(neg, vec![1.0]).is_err());
        let ok = UtilityKind::TwoRegion {
            lambda1: 1.0,
            lambda2: STRICT_PENALTY,
            eta: 0.1,
        };
        assert!(matches!(
            UtilitySpec::new(ok.clone(), vec![0.5, 0.4]),
            Err(Error::WeightSum(_))
        ));
        assert!(UtilitySpec::new(ok, vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn mean_utility_examples() {
        assert_abs_diff_eq!(mean_utility(&[1.0; 5], &[0.2; 5]).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(mean_utility(&[2.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
        let us = [0.3, -0.1, 1.2, 0.4, 0.9, 2.0, 1.1, 3.0];
        let mean = us.iter().sum::<f64>() / 8.0;
        assert_abs_diff_eq!(mean_utility(&us, &[0.125; 8]).unwrap(), mean, epsilon = 1e-12);
        assert!(matches!(mean_utility(&[1.0, 1.0], &[0.5, 0.6]), Err(Error::WeightSum(_))));
        assert!(mean_utility(&[1.0], &[0.5, 0.5]).is_err());
    }

    fn kinds() -> Vec<UtilitySpec> {
        vec![
            two_region(),
            UtilitySpec::new(
                UtilityKind::ThreeRegion {
                    lambda1: 0.5,
                    lambda2: 1.0,
                    lambda3: 3.0,
                    eta1: 0.1,
                    eta2: 0.25,
                },
                vec![1.0],
            )
            .unwrap(),
            UtilitySpec::new(
                UtilityKind::CostBenefit {
                    gains: vec![1.0, 2.0, 0.5, 3.0],
                    f1: 1.0,
                    f2: 2.0,
                    eta: 0.15,
                },
                vec![1.0],
            )
            .unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn utility_is_monotone(
            mask in 0u8..16,
            rates in proptest::collection::vec(0.0f64..1.0, 4),
            arm in 0usize..4,
            bump in 0.0f64..0.5,
        ) {
            let part = Partition::new((0..4).map(|i| mask >> i & 1 == 1).collect());
            for spec in kinds() {
                let split = |r: &[f64]| {
                    let rho: Vec<f64> = part.sensitive_arms().iter().map(|&i| r[i]).collect();
                    let gam: Vec<f64> = part.insensitive_arms().iter().map(|&i| r[i]).collect();
                    (rho, gam)
                };
                let (rho, gam) = split(&rates);
                let base = utility(&part, &rho, &gam, &spec).unwrap();
                let mut bumped = rates.clone();
                bumped[arm] = (bumped[arm] + bump).min(1.0);
                let (rho2, gam2) = split(&bumped);
                let moved = utility(&part, &rho2, &gam2, &spec).unwrap();
                if part.sensitive[arm] {
                    prop_assert!(moved >= base - 1e-12);
                } else {
                    prop_assert!(moved <= base + 1e-12);
                }
            }
        }

        #[test]
        fn two_region_continuous_at_change_point(eps in 1e-9f64..1e-6) {
            let spec = two_region();
            let part = Partition::new(vec![false]);
            let at = utility(&part, &[], &[0.2], &spec).unwrap();
            let above = utility(&part, &[], &[0.2 + eps], &spec).unwrap();
            let below = utility(&part, &[], &[0.2 - eps], &spec).unwrap();
            prop_assert!((at - above).abs() < 4.0 * eps);
            prop_assert!((at - below).abs() < 4.0 * eps);
        }
    }
}
