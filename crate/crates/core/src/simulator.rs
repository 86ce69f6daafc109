//! Monte Carlo operating characteristics.
//!
//! Patient outcomes of replicate `r` in arm `j` come from a uniform stream keyed
//! by `(base_seed, r, j)`: patient `i` responds iff `u_i < p_j`. Two designs or
//! two truths evaluated with the same seed therefore see coupled data, and the
//! result does not depend on the number of worker threads.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::designs::{ArmDecision, ArmStatus, DesignEngine};
use crate::error::{Error, Result};
use crate::inference::{ArmData, ObservedData};
use crate::model::TrialSpec;
use crate::partition::Partition;
use crate::seed::{mix_seed, stream};

/// True response rates of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub true_p: Vec<f64>,
}

impl ScenarioTruth {
    /// Rates may sit on the boundary 0 or 1 (degenerate stress scenarios).
    pub fn new(true_p: Vec<f64>) -> Result<Self> {
        for &p in &true_p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidData(format!("true response rate {p} outside [0, 1]")));
            }
        }
        Ok(Self { true_p })
    }

    /// p1 on the sensitive arms and p0 elsewhere.
    pub fn from_partition(spec: &TrialSpec, partition: &Partition) -> Self {
        Self {
            true_p: spec
                .arms
                .iter()
                .zip(&partition.sensitive)
                .map(|(a, &s)| if s { a.p1 } else { a.p0 })
                .collect(),
        }
    }

    pub fn global_null(spec: &TrialSpec) -> Self {
        Self::from_partition(spec, &Partition::global_null(spec.n_arms()))
    }
}

/// Per-arm summary over replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmOc {
    /// Probability of declaring the treatment effective.
    pub claim_prob: f64,
    pub mean_n: f64,
    pub early_stop_prob: f64,
    /// Binomial Monte Carlo standard error of `claim_prob`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingCharacteristics {
    pub arms: Vec<ArmOc>,
    pub n_reps: usize,
    pub seed: u64,
}

impl OperatingCharacteristics {
    pub fn claim_probs(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.claim_prob).collect()
    }

    /// Type I error of the insensitive arms and power of the sensitive arms.
    pub fn split(&self, partition: &Partition) -> (Vec<f64>, Vec<f64>) {
        let mut power = Vec::new();
        let mut type1 = Vec::new();
        for (a, &s) in self.arms.iter().zip(&partition.sensitive) {
            if s {
                power.push(a.claim_prob);
            } else {
                type1.push(a.claim_prob);
            }
        }
        (power, type1)
    }
}

fn check_truth(truth: &ScenarioTruth, spec: &TrialSpec) -> Result<()> {
    if truth.true_p.len() != spec.n_arms() {
        return Err(Error::LengthMismatch {
            what: "true response rates",
            expected: spec.n_arms(),
            got: truth.true_p.len(),
        });
    }
    ScenarioTruth::new(truth.true_p.clone()).map(|_| ())
}

/// Cumulative responder counts `cum[i]` after `i` patients of one arm.
fn responders(p: f64, max_n: u32, seed: u64, arm: usize) -> Vec<u32> {
    let mut rng = stream(&[seed, arm as u64]);
    let mut cum = Vec::with_capacity(max_n as usize + 1);
    let mut total = 0;
    cum.push(0);
    for _ in 0..max_n {
        let u: f64 = rng.random();
        if u < p {
            total += 1;
        }
        cum.push(total);
    }
    cum
}

/// Runs one trial with replicate seed `seed`; returns the final decision of every arm.
///
/// An arm is analyzed at each of its looks until it stops; a stopped arm keeps
/// its data frozen and still contributes to the other arms' hierarchical fits.
pub fn simulate_trial(truth: &ScenarioTruth, engine: &DesignEngine, seed: u64) -> Result<Vec<ArmDecision>> {
    let spec = engine.spec();
    check_truth(truth, spec)?;
    let j = spec.n_arms();
    let cum: Vec<Vec<u32>> = (0..j)
        .map(|k| responders(truth.true_p[k], spec.arms[k].max_n, seed, k))
        .collect();
    let mut decisions = vec![
        ArmDecision {
            status: ArmStatus::Continue,
            futility_prob: 0.0,
            n_at_decision: 0,
        };
        j
    ];
    let mut n = vec![0u32; j];
    for look in 0..spec.max_looks() {
        let active: Vec<bool> = (0..j)
            .map(|k| !decisions[k].status.is_terminal() && look < spec.arms[k].n_looks())
            .collect();
        if !active.iter().any(|&a| a) {
            break;
        }
        for k in 0..j {
            if active[k] {
                n[k] = spec.arms[k].interim_ns[look];
            }
        }
        let data = ObservedData {
            arms: (0..j)
                .map(|k| ArmData {
                    n: n[k],
                    x: cum[k][n[k] as usize],
                })
                .collect(),
        };
        decisions = engine.decide(&data, &active, &decisions, seed)?;
    }
    Ok(decisions)
}

/// Data of replicate seed `seed` with every arm followed to its maximum size.
pub fn complete_data(truth: &ScenarioTruth, spec: &TrialSpec, seed: u64) -> Result<ObservedData> {
    check_truth(truth, spec)?;
    Ok(ObservedData {
        arms: spec
            .arms
            .iter()
            .enumerate()
            .map(|(k, arm)| ArmData {
                n: arm.max_n,
                x: responders(truth.true_p[k], arm.max_n, seed, k)[arm.max_n as usize],
            })
            .collect(),
    })
}

/// Seed of replicate `rep` under `base_seed`.
pub fn replicate_seed(base_seed: u64, rep: usize) -> u64 {
    mix_seed(&[base_seed, rep as u64])
}

/// Operating characteristics over `n_reps` replicates, evaluated in parallel.
pub fn operating_characteristics(
    truth: &ScenarioTruth,
    engine: &DesignEngine,
    n_reps: usize,
    base_seed: u64,
) -> Result<OperatingCharacteristics> {
    if n_reps == 0 {
        return Err(Error::InvalidArgument("n_reps must be positive".into()));
    }
    check_truth(truth, engine.spec())?;
    let runs: Vec<Vec<ArmDecision>> = (0..n_reps)
        .into_par_iter()
        .map(|r| simulate_trial(truth, engine, replicate_seed(base_seed, r)))
        .collect::<Result<_>>()?;
    let reps = n_reps as f64;
    let arms = (0..engine.spec().n_arms())
        .map(|k| {
            let mut claims = 0usize;
            let mut early = 0usize;
            let mut total_n = 0u64;
            for run in &runs {
                let d = run[k];
                claims += d.status.is_claimed() as usize;
                early += d.status.is_early_stop() as usize;
                total_n += d.n_at_decision as u64;
            }
            let claim_prob = claims as f64 / reps;
            ArmOc {
                claim_prob,
                mean_n: total_n as f64 / reps,
                early_stop_prob: early as f64 / reps,
                mc_se: (claim_prob * (1.0 - claim_prob) / reps).sqrt(),
            }
        })
        .collect();
    Ok(OperatingCharacteristics {
        arms,
        n_reps,
        seed: base_seed,
    })
}

/// Operating characteristics when the sensitive arms of `partition` respond at p1.
pub fn oc_under_partition(
    partition: &Partition,
    engine: &DesignEngine,
    n_reps: usize,
    base_seed: u64,
) -> Result<OperatingCharacteristics> {
    let truth = ScenarioTruth::from_partition(engine.spec(), partition);
    operating_characteristics(&truth, engine, n_reps, base_seed)
}

/// One labelled result for CSV export.
#[derive(Debug, Clone)]
pub struct OcRecord<'a> {
    pub scenario: &'a str,
    pub design: &'a str,
    pub oc: &'a OperatingCharacteristics,
}

/// Writes `scenario,design,arm,claim_prob,mc_se,mean_n,early_stop_prob,n_reps,seed` rows.
pub fn write_oc_csv<W: Write>(out: W, records: &[OcRecord<'_>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "scenario",
        "design",
        "arm",
        "claim_prob",
        "mc_se",
        "mean_n",
        "early_stop_prob",
        "n_reps",
        "seed",
    ])
    .map_err(io)?;
    for rec in records {
        for (k, a) in rec.oc.arms.iter().enumerate() {
            w.write_record([
                rec.scenario.to_string(),
                rec.design.to_string(),
                (k + 1).to_string(),
                format!("{:.6}", a.claim_prob),
                format!("{:.6}", a.mc_se),
                format!("{:.4}", a.mean_n),
                format!("{:.6}", a.early_stop_prob),
                rec.oc.n_reps.to_string(),
                rec.oc.seed.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}
