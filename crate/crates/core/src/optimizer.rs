//! Utility-maximizing shrinkage priors and ζ calibration.
//!
//! A candidate prior is scored by plugging it into a template design and
//! simulating every canonical partition: sensitive arms at p1, the rest at p0.
//! The powers and type I errors give one utility per partition, and their
//! weighted mean is the score. All candidates share the same replicate seeds.

use std::io::Write;

use crate::designs::{DesignEngine, DesignKind, DesignSpec, StoppingPolicy};
use crate::error::{Error, Result};
use crate::model::{empirical_sigma_max, PriorSpec, TrialSpec};
use crate::partition::{enumerate_partitions, Partition};
use crate::simulator::{oc_under_partition, operating_characteristics, OperatingCharacteristics, ScenarioTruth};
use crate::utility::{mean_utility, utility, UtilitySpec};

/// Candidate values of the prior search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub v0: Vec<f64>,
    pub sigma0_sq: Vec<f64>,
    /// Half-Cauchy scales, used by [`optimize_half_cauchy`].
    pub half_cauchy_a: Vec<f64>,
    pub reps_per_point: usize,
    /// Number of best coarse candidates re-evaluated with `refine_reps`.
    pub refine_top: usize,
    pub refine_reps: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `k·hi/n` for `k = 1..=n`: an evenly spaced grid on `(0, hi]`.
fn open_grid(hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| hi * k as f64 / n as f64).collect()
}

impl GridSpec {
    /// Grid over v0 ∈ [0.1, J] and σ0² ∈ (0, 5σ̂²max]; the half-Cauchy scale
    /// runs over (0, 2·sqrt(5σ̂²max)] with `n_a` points.
    pub fn for_trial(spec: &TrialSpec, n_v0: usize, n_sigma: usize, n_a: usize) -> Self {
        let upper = 5.0 * empirical_sigma_max(spec);
        Self {
            v0: linspace(0.1, spec.n_arms() as f64, n_v0),
            sigma0_sq: open_grid(upper, n_sigma),
            half_cauchy_a: open_grid(2.0 * upper.sqrt(), n_a),
            reps_per_point: 1000,
            refine_top: 3,
            refine_reps: 5000,
        }
    }

    /// 8 × 10 inverse-gamma grid, 10 half-Cauchy scales, 1000 reps per point,
    /// top 3 refined at 5000 reps.
    pub fn default_for(spec: &TrialSpec) -> Self {
        Self::for_trial(spec, 8, 10, 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps_per_point == 0 {
            return Err(Error::InvalidArgument("reps_per_point must be positive".into()));
        }
        if self.refine_top > 0 && self.refine_reps == 0 {
            return Err(Error::InvalidArgument("refine_reps must be positive".into()));
        }
        Ok(())
    }

    /// Scaled inverse-χ² candidates, σ0² varying fastest.
    pub fn inverse_gamma_candidates(&self) -> Result<Vec<PriorSpec>> {
        let mut out = Vec::with_capacity(self.v0.len() * self.sigma0_sq.len());
        for &v0 in &self.v0 {
            for &s in &self.sigma0_sq {
                out.push(PriorSpec::scaled_inv_chi_sq(v0, s)?);
            }
        }
        Ok(out)
    }

    pub fn half_cauchy_candidates(&self) -> Result<Vec<PriorSpec>> {
        self.half_cauchy_a.iter().map(|&a| PriorSpec::half_cauchy(a)).collect()
    }
}

/// Prior family searched by [`per_partition_priors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorFamily {
    InverseGamma,
    HalfCauchy,
}

/// Powers and type I errors of one partition at one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionScore {
    pub partition: Partition,
    /// Claim probabilities of the sensitive arms, in arm order.
    pub rho: Vec<f64>,
    /// Claim probabilities of the insensitive arms, in arm order.
    pub gamma: Vec<f64>,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub prior: PriorSpec,
    pub n_reps: usize,
    pub partitions: Vec<PartitionScore>,
    pub mean_utility: f64,
}

impl GridPoint {
    pub fn utilities(&self) -> Vec<f64> {
        self.partitions.iter().map(|p| p.utility).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_prior: PriorSpec,
    pub best_mean_utility: f64,
    /// Coarse evaluation of every candidate, in candidate order.
    pub grid_trace: Vec<GridPoint>,
    /// Re-evaluations of the top candidates; empty without refinement.
    pub refined: Vec<GridPoint>,
}

/// Deterministic preference at equal utility: smaller σ0² (or A), then smaller v0.
fn tie_key(p: &PriorSpec) -> (f64, f64) {
    match *p {
        PriorSpec::ScaledInvChiSq { v0, sigma0_sq } => (sigma0_sq, v0),
        PriorSpec::HalfCauchy { scale_a } => (scale_a, 0.0),
    }
}

/// True when `a` beats `b`.
fn better(a: (f64, &PriorSpec), b: (f64, &PriorSpec)) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    tie_key(a.1) < tie_key(b.1)
}

/// Index of the best candidate under `score`.
fn best_index<F: Fn(&GridPoint) -> f64>(points: &[GridPoint], score: F) -> usize {
    let mut best = 0;
    for i in 1..points.len() {
        if better((score(&points[i]), &points[i].prior), (score(&points[best]), &points[best].prior)) {
            best = i;
        }
    }
    best
}

/// Indices of the `k` best candidates, best first.
fn top_indices<F: Fn(&GridPoint) -> f64>(points: &[GridPoint], k: usize, score: F) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = ((score(&points[i]), &points[i].prior), (score(&points[j]), &points[j].prior));
        if better(a, b) {
            std::cmp::Ordering::Less
        } else if better(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    idx.truncate(k);
    idx
}

fn check_template(template: &DesignSpec) -> Result<()> {
    template.kind.with_prior(PriorSpec::half_cauchy(1.0)?).map(|_| ())
}

/// Scores one prior over the partitions with nonzero utility weight.
pub fn evaluate_prior(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    prior: PriorSpec,
    n_reps: usize,
    base_seed: u64,
) -> Result<GridPoint> {
    let partitions = enumerate_partitions(spec);
    if utility_spec.weights.len() != partitions.len() {
        return Err(Error::LengthMismatch {
            what: "utility weights",
            expected: partitions.len(),
            got: utility_spec.weights.len(),
        });
    }
    let design = DesignSpec {
        kind: template.kind.with_prior(prior)?,
        ..template.clone()
    };
    let engine = DesignEngine::new(spec, &design)?;
    let mut scores = Vec::with_capacity(partitions.len());
    for (g, part) in partitions.into_iter().enumerate() {
        if utility_spec.weights[g] == 0.0 {
            scores.push(PartitionScore {
                partition: part,
                rho: Vec::new(),
                gamma: Vec::new(),
                utility: f64::NAN,
            });
            continue;
        }
        let oc = oc_under_partition(&part, &engine, n_reps, base_seed)?;
        let (rho, gamma) = oc.split(&part);
        let u = utility(&part, &rho, &gamma, utility_spec)?;
        scores.push(PartitionScore {
            partition: part,
            rho,
            gamma,
            utility: u,
        });
    }
    let mean = weighted_mean(&scores, &utility_spec.weights)?;
    Ok(GridPoint {
        prior,
        n_reps,
        partitions: scores,
        mean_utility: mean,
    })
}

/// Mean utility over the weighted partitions; unevaluated (zero-weight) entries are skipped.
fn weighted_mean(scores: &[PartitionScore], weights: &[f64]) -> Result<f64> {
    let (u, w): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, &w)| (s.utility, w))
        .unzip();
    mean_utility(&u, &w)
}

fn search(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    candidates: Vec<PriorSpec>,
    grid: &GridSpec,
    base_seed: u64,
) -> Result<OptimizationResult> {
    grid.validate()?;
    check_template(template)?;
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let trace = candidates
        .into_iter()
        .map(|prior| {
            let point = evaluate_prior(spec, utility_spec, template, prior, grid.reps_per_point, base_seed)?;
            log::info!("{prior}: mean utility {:.4}", point.mean_utility);
            Ok(point)
        })
        .collect::<Result<Vec<_>>>()?;
    let refined = top_indices(&trace, grid.refine_top, |p| p.mean_utility)
        .into_iter()
        .map(|i| evaluate_prior(spec, utility_spec, template, trace[i].prior, grid.refine_reps, base_seed))
        .collect::<Result<Vec<_>>>()?;
    let pool = if refined.is_empty() { &trace } else { &refined };
    let best = &pool[best_index(pool, |p| p.mean_utility)];
    Ok(OptimizationResult {
        best_prior: best.prior,
        best_mean_utility: best.mean_utility,
        grid_trace: trace.clone(),
        refined: refined.clone(),
    })
}

/// Grid search over scaled inverse-χ²(v0, σ0²) priors for the hierarchical
/// design in `template` (its own prior is replaced by each candidate).
pub fn grid_search_prior(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    grid: &GridSpec,
    base_seed: u64,
) -> Result<OptimizationResult> {
    search(spec, utility_spec, template, grid.inverse_gamma_candidates()?, grid, base_seed)
}

/// One-dimensional search over the half-Cauchy scale A.
pub fn optimize_half_cauchy(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    grid: &GridSpec,
    base_seed: u64,
) -> Result<OptimizationResult> {
    search(spec, utility_spec, template, grid.half_cauchy_candidates()?, grid, base_seed)
}

/// Optimal prior of every partition taken alone (weight 1 on partition g).
///
/// The coarse grid is simulated once; each partition then picks its own
/// argmax from that shared trace, which is what G separate searches with
/// common random numbers would return. Refinement is per partition.
pub fn per_partition_priors(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    grid: &GridSpec,
    family: PriorFamily,
    base_seed: u64,
) -> Result<Vec<PriorSpec>> {
    per_partition_search(spec, utility_spec, template, grid, family, base_seed).map(|r| {
        r.into_iter().map(|res| res.best_prior).collect()
    })
}

/// As [`per_partition_priors`], with the full result of every partition.
pub fn per_partition_search(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    grid: &GridSpec,
    family: PriorFamily,
    base_seed: u64,
) -> Result<Vec<OptimizationResult>> {
    grid.validate()?;
    check_template(template)?;
    let candidates = match family {
        PriorFamily::InverseGamma => grid.inverse_gamma_candidates()?,
        PriorFamily::HalfCauchy => grid.half_cauchy_candidates()?,
    };
    let trace = evaluate_all_partitions(spec, utility_spec, template, &candidates, grid.reps_per_point, base_seed)?;
    per_partition_from_trace(spec, utility_spec, template, grid, &trace, base_seed)
}

/// Scores every candidate on every partition (equal weights in `mean_utility`).
pub fn evaluate_all_partitions(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    candidates: &[PriorSpec],
    n_reps: usize,
    base_seed: u64,
) -> Result<Vec<GridPoint>> {
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let g_count = enumerate_partitions(spec).len();
    let all = UtilitySpec::equal_weights(utility_spec.kind.clone(), g_count)?;
    candidates
        .iter()
        .map(|&prior| evaluate_prior(spec, &all, template, prior, n_reps, base_seed))
        .collect()
}

/// Per-partition optima from a trace produced by [`evaluate_all_partitions`]
/// with the same template, grid and seed.
pub fn per_partition_from_trace(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    grid: &GridSpec,
    trace: &[GridPoint],
    base_seed: u64,
) -> Result<Vec<OptimizationResult>> {
    if trace.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let g_count = enumerate_partitions(spec).len();
    let all = UtilitySpec::equal_weights(utility_spec.kind.clone(), g_count)?;
    (0..g_count)
        .map(|g| {
            let single = all.with_single_partition(g);
            let own: Vec<GridPoint> = trace
                .iter()
                .map(|p| GridPoint {
                    mean_utility: p.partitions[g].utility,
                    ..p.clone()
                })
                .collect();
            let refined = top_indices(&own, grid.refine_top, |p| p.mean_utility)
                .into_iter()
                .map(|i| evaluate_prior(spec, &single, template, own[i].prior, grid.refine_reps, base_seed))
                .collect::<Result<Vec<_>>>()?;
            let pool = if refined.is_empty() { &own } else { &refined };
            let best = &pool[best_index(pool, |p| p.mean_utility)];
            Ok(OptimizationResult {
                best_prior: best.prior,
                best_mean_utility: best.mean_utility,
                grid_trace: own.clone(),
                refined: refined.clone(),
            })
        })
        .collect()
}

/// Optimum under `utility_spec`'s weights from a trace of
/// [`evaluate_all_partitions`], refining the top candidates.
pub fn search_from_trace(
    spec: &TrialSpec,
    utility_spec: &UtilitySpec,
    template: &DesignSpec,
    grid: &GridSpec,
    trace: &[GridPoint],
    base_seed: u64,
) -> Result<OptimizationResult> {
    if trace.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let rescored = trace
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.mean_utility = weighted_mean(&p.partitions, &utility_spec.weights)?;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let refined = top_indices(&rescored, grid.refine_top, |p| p.mean_utility)
        .into_iter()
        .map(|i| evaluate_prior(spec, utility_spec, template, rescored[i].prior, grid.refine_reps, base_seed))
        .collect::<Result<Vec<_>>>()?;
    let pool = if refined.is_empty() { &rescored } else { &refined };
    let best = &pool[best_index(pool, |p| p.mean_utility)];
    Ok(OptimizationResult {
        best_prior: best.prior,
        best_mean_utility: best.mean_utility,
        grid_trace: rescored.clone(),
        refined: refined.clone(),
    })
}

/// Writes the audit trail of a search, one row per (candidate, partition).
///
/// Columns: `stage,n_reps,prior,v0,sigma0_sq,scale_a,partition_id,partition,
/// rho_1..rho_J,gamma_1..gamma_J,U_g,mean_utility`. A rate column is empty
/// when the arm is not on that side of the partition.
pub fn write_trace_csv<W: Write>(out: W, result: &OptimizationResult, n_arms: usize) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "stage",
        "n_reps",
        "prior",
        "v0",
        "sigma0_sq",
        "scale_a",
        "partition_id",
        "partition",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=n_arms).map(|k| format!("rho_{k}")));
    header.extend((1..=n_arms).map(|k| format!("gamma_{k}")));
    header.push("U_g".into());
    header.push("mean_utility".into());
    w.write_record(&header).map_err(io)?;
    let stages = [("coarse", &result.grid_trace), ("refined", &result.refined)];
    for (stage, points) in stages {
        for p in points.iter() {
            let (v0, s2, a) = match p.prior {
                PriorSpec::ScaledInvChiSq { v0, sigma0_sq } => (v0.to_string(), sigma0_sq.to_string(), String::new()),
                PriorSpec::HalfCauchy { scale_a } => (String::new(), String::new(), scale_a.to_string()),
            };
            for (g, score) in p.partitions.iter().enumerate() {
                if score.utility.is_nan() {
                    continue;
                }
                let mut row = vec![
                    stage.to_string(),
                    p.n_reps.to_string(),
                    p.prior.to_string(),
                    v0.clone(),
                    s2.clone(),
                    a.clone(),
                    (g + 1).to_string(),
                    score.partition.to_string(),
                ];
                let mut rho = vec![String::new(); n_arms];
                let mut gamma = vec![String::new(); n_arms];
                for (k, r) in score.partition.sensitive_arms().into_iter().zip(&score.rho) {
                    rho[k] = format!("{r:.6}");
                }
                for (k, r) in score.partition.insensitive_arms().into_iter().zip(&score.gamma) {
                    gamma[k] = format!("{r:.6}");
                }
                row.extend(rho);
                row.extend(gamma);
                row.push(format!("{:.6}", score.utility));
                row.push(format!("{:.6}", p.mean_utility));
                w.write_record(&row).map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Calibration tolerance on the claim probability.
pub const CALIBRATION_TOLERANCE: f64 = 0.005;
/// Bisection stops once the group level is this close to the target. Half the
/// tolerance, so that arms spread around the group level stay near the target.
const CALIBRATION_AIM: f64 = 0.5 * CALIBRATION_TOLERANCE;
pub const MAX_BISECTION_STEPS: usize = 30;
/// Search interval for ζ.
pub const ZETA_BOUNDS: (f64, f64) = (1e-3, 1.0 - 1e-3);
const MAX_PASSES: usize = 3;

/// Outcome for one group of interchangeable arms.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCalibration {
    pub arms: Vec<usize>,
    pub zeta: f64,
    /// Midrange of the group's global-null claim probabilities at `zeta`.
    pub claim_prob: f64,
    pub within_tolerance: bool,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub policy: StoppingPolicy,
    pub groups: Vec<GroupCalibration>,
    /// Global-null operating characteristics under `policy`.
    pub null_oc: OperatingCharacteristics,
}

/// `(p0, p1)` bits, N, interim sizes and δ bits.
type GroupKey = ((u64, u64), u32, Vec<u32>, u64);

/// Arms sharing `(p0, p1, N, interims, δ)`, in first-appearance order.
fn calibration_groups(spec: &TrialSpec, policy: &StoppingPolicy) -> Vec<Vec<usize>> {
    let mut keys: Vec<GroupKey> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, arm) in spec.arms.iter().enumerate() {
        let key = (
            arm.rate_key(),
            arm.max_n,
            arm.interim_ns.clone(),
            policy.arms[k].delta.to_bits(),
        );
        match keys.iter().position(|x| *x == key) {
            Some(i) => groups[i].push(k),
            None => {
                keys.push(key);
                groups.push(vec![k]);
            }
        }
    }
    groups
}

/// Midpoint of the smallest and largest claim probability among `members`.
fn group_level(oc: &OperatingCharacteristics, members: &[usize]) -> f64 {
    let claims = members.iter().map(|&k| oc.arms[k].claim_prob);
    let lo = claims.clone().fold(f64::INFINITY, f64::min);
    let hi = claims.fold(f64::NEG_INFINITY, f64::max);
    0.5 * (lo + hi)
}

/// Calibrates ζ per group of interchangeable arms so that the group's claim
/// probability under the global null is within ±0.5 percentage points of
/// `target_alpha`.
///
/// A group's claim probability is the midrange of its arms' values: centring
/// the extremes on the target minimizes the worst arm's error when Monte Carlo
/// noise spreads arms that share a ζ. Claim probability decreases in ζ, so
/// each group is bisected on [`ZETA_BOUNDS`] while the other groups hold their
/// current ζ; passes over the groups repeat (at most three) until all are
/// within tolerance. When the
/// target cannot be met the ζ whose claim probability is closest to it is kept
/// (ties go to the lower claim probability) and a diagnostic is attached.
pub fn calibrate_zeta(
    spec: &TrialSpec,
    design: &DesignSpec,
    target_alpha: f64,
    n_reps: usize,
    base_seed: u64,
) -> Result<Calibration> {
    if !(target_alpha > 0.0 && target_alpha <= 1.0) {
        return Err(Error::InvalidProbability {
            name: "target_alpha",
            value: target_alpha,
        });
    }
    let engine = DesignEngine::new(spec, design)?;
    let truth = ScenarioTruth::global_null(spec);
    let groups = calibration_groups(spec, &design.policy);
    let mut policy = design.policy.clone();

    let group_claim = |policy: &StoppingPolicy, members: &[usize]| -> Result<(f64, OperatingCharacteristics)> {
        let oc = operating_characteristics(&truth, &engine.with_policy(policy.clone())?, n_reps, base_seed)?;
        Ok((group_level(&oc, members), oc))
    };
    let set = |policy: &mut StoppingPolicy, members: &[usize], zeta: f64| {
        for &k in members {
            policy.arms[k].zeta = zeta;
        }
    };

    let mut results: Vec<GroupCalibration> = Vec::new();
    for pass in 0..MAX_PASSES {
        results.clear();
        let mut all_ok = true;
        for members in &groups {
            let (lo_z, hi_z) = ZETA_BOUNDS;
            // (distance to target, claim, zeta) of the best evaluation so far.
            let mut best: Option<(f64, f64, f64)> = None;
            let mut consider = |claim: f64, zeta: f64| {
                let cand = ((claim - target_alpha).abs(), claim, zeta);
                let replace = match best {
                    None => true,
                    Some(b) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
                };
                if replace {
                    best = Some(cand);
                }
            };

            // Keep the current value if it already meets the target.
            let current = policy.arms[members[0]].zeta;
            let (claim_now, _) = group_claim(&policy, members)?;
            consider(claim_now, current);
            let mut diagnostic = None;
            if (claim_now - target_alpha).abs() > CALIBRATION_AIM {
                let mut trial = policy.clone();
                set(&mut trial, members, hi_z);
                let (claim_hi, _) = group_claim(&trial, members)?;
                consider(claim_hi, hi_z);
                set(&mut trial, members, lo_z);
                let (claim_lo, _) = group_claim(&trial, members)?;
                consider(claim_lo, lo_z);
                if claim_hi > target_alpha + CALIBRATION_TOLERANCE {
                    diagnostic = Some(format!(
                        "target {target_alpha} unattainable: claim probability is {claim_hi:.4} even at zeta = {hi_z}"
                    ));
                } else if claim_lo < target_alpha - CALIBRATION_TOLERANCE {
                    diagnostic = Some(format!(
                        "target {target_alpha} unattainable: claim probability is only {claim_lo:.4} at zeta = {lo_z}"
                    ));
                } else {
                    let (mut lo, mut hi) = (lo_z, hi_z);
                    let mut hit = false;
                    for _ in 0..MAX_BISECTION_STEPS {
                        let mid = 0.5 * (lo + hi);
                        set(&mut trial, members, mid);
                        let (claim, _) = group_claim(&trial, members)?;
                        consider(claim, mid);
                        if (claim - target_alpha).abs() <= CALIBRATION_AIM {
                            hit = true;
                            break;
                        }
                        if claim > target_alpha {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let (dist, claim, _) = best.expect("evaluated");
                    if !hit && dist > CALIBRATION_TOLERANCE {
                        diagnostic = Some(format!(
                            "no zeta within tolerance after {MAX_BISECTION_STEPS} steps; closest claim probability {claim:.4} (off by {dist:.4})"
                        ));
                    }
                }
            }
            let (dist, claim, zeta) = best.expect("evaluated");
            if diagnostic.is_none() && (zeta == lo_z || zeta == hi_z) {
                diagnostic = Some(format!("zeta = {zeta} sits on the search boundary"));
            }
            set(&mut policy, members, zeta);
            let ok = dist <= CALIBRATION_TOLERANCE;
            all_ok &= ok;
            if let Some(d) = &diagnostic {
                log::warn!("calibration of arms {members:?}: {d}");
            }
            results.push(GroupCalibration {
                arms: members.clone(),
                zeta,
                claim_prob: claim,
                within_tolerance: ok,
                diagnostic,
            });
        }
        // A later group's ζ can move an earlier group's claim probability.
        let oc = operating_characteristics(&truth, &engine.with_policy(policy.clone())?, n_reps, base_seed)?;
        let mut stable = true;
        for r in results.iter_mut() {
            let claim = group_level(&oc, &r.arms);
            r.claim_prob = claim;
            let ok = (claim - target_alpha).abs() <= CALIBRATION_TOLERANCE;
            stable &= ok || r.diagnostic.is_some();
            r.within_tolerance = ok;
        }
        if (all_ok && stable) || groups.len() == 1 || pass + 1 == MAX_PASSES {
            return Ok(Calibration {
                policy,
                groups: results,
                null_oc: oc,
            });
        }
        if results.iter().all(|r| r.diagnostic.is_some()) {
            return Ok(Calibration {
                policy,
                groups: results,
                null_oc: oc,
            });
        }
    }
    unreachable!("the last pass always returns")
}

/// Template design with provisional ζ, used while searching for a prior.
pub fn template_with_prior(template: &DesignSpec, prior: PriorSpec) -> Result<DesignSpec> {
    Ok(DesignSpec {
        kind: template.kind.with_prior(prior)?,
        ..template.clone()
    })
}

/// AOBHM design from per-partition priors and a model prior.
pub fn aobhm_from_priors(
    template: &DesignSpec,
    priors: Vec<PriorSpec>,
    model_prior: Vec<f64>,
    mode: crate::designs::DecisionMode,
) -> DesignSpec {
    DesignSpec {
        kind: DesignKind::Aobhm {
            priors,
            model_prior,
            mode,
        },
        ..template.clone()
    }
}
