//! Go/no-go decision engines.
//!
//! Every design reduces the interim data to a per-arm futility probability
//! Pr(p_j ≤ p0_j | D) and compares it with the sample-size-adaptive cutoff
//! `1 − ζ (n/N)^δ`. The designs differ only in how that probability is computed:
//!
//! * Independent: exact beta-binomial posterior per arm.
//! * VagueBhm / Obhm: one hierarchical fit over all arms.
//! * Cobhm: arms are first split into a sensitive and an insensitive cluster,
//!   then a hierarchical fit runs inside each cluster of two or more arms.
//! * Aobhm: hierarchical fits under one prior per partition, averaged with the
//!   posterior model probabilities (or the single most probable model).
//!
//! Hierarchical fits are memoized in a [`PosteriorCache`]. The sampler seed is
//! derived from the fitted data and a caller-supplied salt, so a fit is a pure
//! function of `(salt, prior, data, control)`. With the replicate seed as salt
//! the memo is reused across calibration rounds and across scenarios that
//! produce the same data, while each replicate keeps its own Monte Carlo error.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::inference::{
    beta_binomial_posterior, beta_tail_prob, hierarchy_tail_probs, BetaParams, HierArm, McmcControl,
    ObservedData, Tail,
};
use crate::model::{HyperPrior, PriorSpec, TrialSpec};
use crate::partition::{enumerate_partitions, Partition};
use crate::seed::mix_seed;

/// Cutoff parameters of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPolicy {
    pub zeta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingPolicy {
    pub arms: Vec<ArmPolicy>,
    /// Superiority cutoff C₂; `None` disables early efficacy stopping.
    pub superiority_cutoff: Option<f64>,
}

impl StoppingPolicy {
    pub fn new(zetas: &[f64], deltas: &[f64]) -> Result<Self> {
        if zetas.len() != deltas.len() {
            return Err(Error::LengthMismatch {
                what: "delta values",
                expected: zetas.len(),
                got: deltas.len(),
            });
        }
        let arms = zetas
            .iter()
            .zip(deltas)
            .map(|(&zeta, &delta)| ArmPolicy { zeta, delta })
            .collect();
        let policy = Self {
            arms,
            superiority_cutoff: None,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_superiority(mut self, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(Error::InvalidProbability {
                name: "superiority cutoff",
                value: cutoff,
            });
        }
        self.superiority_cutoff = Some(cutoff);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.arms {
            if !(a.zeta > 0.0 && a.zeta < 1.0) {
                return Err(Error::InvalidProbability {
                    name: "zeta",
                    value: a.zeta,
                });
            }
            if !(a.delta >= 0.0 && a.delta.is_finite()) {
                return Err(Error::InvalidDesign(format!(
                    "delta must be nonnegative, got {}",
                    a.delta
                )));
            }
        }
        Ok(())
    }

    pub fn zetas(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.zeta).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionMode {
    ModelAverage,
    ModelSelect,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    Independent,
    VagueBhm {
        prior: PriorSpec,
    },
    Obhm {
        prior: PriorSpec,
    },
    Cobhm {
        prior: PriorSpec,
        omega: f64,
    },
    Aobhm {
        /// One prior per canonical partition, in `enumerate_partitions` order.
        priors: Vec<PriorSpec>,
        model_prior: Vec<f64>,
        mode: DecisionMode,
    },
}

impl DesignKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Independent => "Independent",
            Self::VagueBhm { .. } => "BHM",
            Self::Obhm { .. } => "OBHM",
            Self::Cobhm { .. } => "COBHM",
            Self::Aobhm { .. } => "AOBHM",
        }
    }

    /// Vague inverse-gamma prior IG(0.0005, 0.000005).
    pub fn vague_bhm() -> Self {
        Self::VagueBhm {
            prior: PriorSpec::inverse_gamma(0.0005, 0.000005).expect("valid constant prior"),
        }
    }

    /// The same prior substituted into a single-prior hierarchical design.
    pub fn with_prior(&self, prior: PriorSpec) -> Result<Self> {
        match self {
            Self::VagueBhm { .. } => Ok(Self::VagueBhm { prior }),
            Self::Obhm { .. } => Ok(Self::Obhm { prior }),
            Self::Cobhm { omega, .. } => Ok(Self::Cobhm {
                prior,
                omega: *omega,
            }),
            other => Err(Error::InvalidDesign(format!(
                "{} does not take a single shrinkage prior",
                other.label()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    /// Beta(a1, b1) prior of the independent analysis and singleton clusters.
    pub beta_prior: BetaParams,
    pub policy: StoppingPolicy,
    pub hyper: HyperPrior,
    pub mcmc: McmcControl,
}

impl DesignSpec {
    pub fn new(kind: DesignKind, policy: StoppingPolicy) -> Self {
        Self {
            kind,
            beta_prior: BetaParams { a: 0.1, b: 0.1 },
            policy,
            hyper: HyperPrior::default(),
            mcmc: McmcControl::default(),
        }
    }

    pub fn with_policy(&self, policy: StoppingPolicy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }

    pub fn validate(&self, spec: &TrialSpec) -> Result<()> {
        if self.policy.arms.len() != spec.n_arms() {
            return Err(Error::LengthMismatch {
                what: "stopping policy arms",
                expected: spec.n_arms(),
                got: self.policy.arms.len(),
            });
        }
        self.policy.validate()?;
        BetaParams::new(self.beta_prior.a, self.beta_prior.b)?;
        match &self.kind {
            DesignKind::Independent => {}
            DesignKind::VagueBhm { .. } | DesignKind::Obhm { .. } => {
                self.mcmc.validate_for_decisions()?
            }
            DesignKind::Cobhm { omega, .. } => {
                self.mcmc.validate_for_decisions()?;
                if !(*omega > 0.0 && omega.is_finite()) {
                    return Err(Error::InvalidDesign(format!("omega must be positive, got {omega}")));
                }
            }
            DesignKind::Aobhm {
                priors,
                model_prior,
                ..
            } => {
                self.mcmc.validate_for_decisions()?;
                let g = enumerate_partitions(spec).len();
                if priors.len() != g {
                    return Err(Error::LengthMismatch {
                        what: "per-partition priors",
                        expected: g,
                        got: priors.len(),
                    });
                }
                if model_prior.len() != g {
                    return Err(Error::LengthMismatch {
                        what: "model prior",
                        expected: g,
                        got: model_prior.len(),
                    });
                }
                let total: f64 = model_prior.iter().sum();
                if model_prior.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::WeightSum(total));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArmStatus {
    Continue,
    StoppedFutile,
    StoppedSuperior,
    FinalEffective,
    FinalNotEffective,
}

impl ArmStatus {
    /// Treatment declared effective for the arm.
    pub fn is_claimed(self) -> bool {
        matches!(self, Self::FinalEffective | Self::StoppedSuperior)
    }

    pub fn is_terminal(self) -> bool {
        self != Self::Continue
    }

    pub fn is_early_stop(self) -> bool {
        matches!(self, Self::StoppedFutile | Self::StoppedSuperior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmDecision {
    pub status: ArmStatus,
    pub futility_prob: f64,
    pub n_at_decision: u32,
}

/// Posterior tail probabilities used by the stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTails {
    /// Pr(p_j ≤ p0_j | D)
    pub futility: f64,
    /// Pr(p_j ≥ p1_j | D)
    pub efficacy: f64,
}

/// Models below this posterior weight are left out of the average. The skipped
/// mass bounds the resulting error in any averaged probability.
pub const NEGLIGIBLE_MODEL_WEIGHT: f64 = 1e-6;

/// BOP2-style futility cutoff `1 − ζ (n/N)^δ`.
pub fn bop2_cutoff(n: u32, max_n: u32, zeta: f64, delta: f64) -> f64 {
    1.0 - zeta * (n as f64 / max_n as f64).powf(delta)
}

/// Applies the futility (and optional superiority) rule to one arm at sample size `n ≥ 1`.
pub fn apply_rule(
    n: u32,
    max_n: u32,
    policy: &ArmPolicy,
    superiority_cutoff: Option<f64>,
    tails: ArmTails,
) -> ArmStatus {
    let is_final = n >= max_n;
    if tails.futility > bop2_cutoff(n, max_n, policy.zeta, policy.delta) {
        return if is_final {
            ArmStatus::FinalNotEffective
        } else {
            ArmStatus::StoppedFutile
        };
    }
    if is_final {
        return ArmStatus::FinalEffective;
    }
    match superiority_cutoff {
        Some(c2) if tails.efficacy > c2 => ArmStatus::StoppedSuperior,
        _ => ArmStatus::Continue,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct FitKey {
    salt: u64,
    prior: [u64; 3],
    hyper: [u64; 2],
    control: [u64; 5],
    /// `(p0 bits, p1 bits, n, x)` per arm.
    arms: Vec<(u64, u64, u32, u32)>,
}

impl FitKey {
    fn seed(&self) -> u64 {
        let mut words: Vec<u64> = Vec::with_capacity(11 + 4 * self.arms.len());
        words.push(self.salt);
        words.extend_from_slice(&self.prior);
        words.extend_from_slice(&self.hyper);
        words.extend_from_slice(&self.control);
        for &(p0, p1, n, x) in &self.arms {
            words.extend_from_slice(&[p0, p1, n as u64, x as u64]);
        }
        mix_seed(&words)
    }
}

/// Memo table of hierarchical fits, safe to share between threads and engines.
#[derive(Debug, Default)]
pub struct PosteriorCache {
    fits: Mutex<HashMap<FitKey, Arc<Vec<ArmTails>>>>,
}

impl PosteriorCache {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn len(&self) -> usize {
        self.fits.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tail probabilities of a hierarchical fit over `arms` (`(p0, p1, data)` each).
    fn hierarchy(
        &self,
        arms: &[(f64, f64, crate::inference::ArmData)],
        prior: &PriorSpec,
        hyper: &HyperPrior,
        control: &McmcControl,
        salt: u64,
    ) -> Result<Arc<Vec<ArmTails>>> {
        let key = FitKey {
            salt,
            prior: prior.key(),
            hyper: [hyper.alpha0.to_bits(), hyper.tau0_sq.to_bits()],
            control: [
                control.burn_in as u64,
                control.kept_draws as u64,
                control.thin as u64,
                control.seed,
                control.step_scale.to_bits(),
            ],
            arms: arms
                .iter()
                .map(|(p0, p1, d)| (p0.to_bits(), p1.to_bits(), d.n, d.x))
                .collect(),
        };
        if let Some(hit) = self.fits.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let hier: Vec<HierArm> = arms
            .iter()
            .map(|&(p0, _, data)| HierArm { p0, data })
            .collect();
        let p1s: Vec<f64> = arms.iter().map(|a| a.1).collect();
        let fit_control = control.with_seed(key.seed());
        let tails = hierarchy_tail_probs(&hier, &p1s, prior, hyper, &fit_control)?;
        let tails = Arc::new(
            tails
                .into_iter()
                .map(|(futility, efficacy)| ArmTails { futility, efficacy })
                .collect::<Vec<_>>(),
        );
        self.fits
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&tails));
        Ok(tails)
    }
}

/// A design bound to a trial, with its memo table.
#[derive(Debug, Clone)]
pub struct DesignEngine {
    spec: TrialSpec,
    design: DesignSpec,
    partitions: Vec<Partition>,
    cache: Arc<PosteriorCache>,
}

impl DesignEngine {
    pub fn new(spec: &TrialSpec, design: &DesignSpec) -> Result<Self> {
        Self::with_cache(spec, design, PosteriorCache::new())
    }

    pub fn with_cache(spec: &TrialSpec, design: &DesignSpec, cache: Arc<PosteriorCache>) -> Result<Self> {
        design.validate(spec)?;
        Ok(Self {
            spec: spec.clone(),
            design: design.clone(),
            partitions: enumerate_partitions(spec),
            cache,
        })
    }

    /// Same design and memo table under a different stopping policy.
    pub fn with_policy(&self, policy: StoppingPolicy) -> Result<Self> {
        Self::with_cache(&self.spec, &self.design.with_policy(policy), Arc::clone(&self.cache))
    }

    pub fn spec(&self) -> &TrialSpec {
        &self.spec
    }

    pub fn design(&self) -> &DesignSpec {
        &self.design
    }

    pub fn cache(&self) -> &Arc<PosteriorCache> {
        &self.cache
    }

    /// Posterior futility and efficacy probabilities of every arm.
    pub fn tails(&self, data: &ObservedData) -> Result<Vec<ArmTails>> {
        self.tails_salted(data, 0)
    }

    /// As [`tails`](Self::tails), with `salt` mixed into every sampler seed.
    ///
    /// The simulator salts with the replicate seed so that each replicate sees
    /// its own Monte Carlo error, as an independent analysis would.
    pub fn tails_salted(&self, data: &ObservedData, salt: u64) -> Result<Vec<ArmTails>> {
        let j = self.spec.n_arms();
        if data.n_arms() != j {
            return Err(Error::LengthMismatch {
                what: "observed arms",
                expected: j,
                got: data.n_arms(),
            });
        }
        let d = &self.design;
        match &d.kind {
            DesignKind::Independent => independent_tails(data, &self.spec, d.beta_prior),
            DesignKind::VagueBhm { prior } | DesignKind::Obhm { prior } => {
                self.hierarchy_over(&(0..j).collect::<Vec<_>>(), data, prior, salt)
            }
            DesignKind::Cobhm { prior, omega } => {
                let clusters = cluster_arms(data, &self.spec, *omega, d.beta_prior)?;
                let mut out = vec![
                    ArmTails {
                        futility: 0.0,
                        efficacy: 0.0
                    };
                    j
                ];
                for members in [clusters.sensitive_arms(), clusters.insensitive_arms()] {
                    match members.len() {
                        0 => {}
                        1 => {
                            let k = members[0];
                            out[k] = beta_tails(data, &self.spec, k, d.beta_prior)?;
                        }
                        _ => {
                            let fit = self.hierarchy_over(&members, data, prior, salt)?;
                            for (&k, t) in members.iter().zip(fit) {
                                out[k] = t;
                            }
                        }
                    }
                }
                Ok(out)
            }
            DesignKind::Aobhm {
                priors,
                model_prior,
                mode,
            } => {
                let weights = bma_weights(data, &self.spec, &self.partitions, model_prior)?;
                let all: Vec<usize> = (0..j).collect();
                let chosen: Vec<usize> = match mode {
                    DecisionMode::ModelAverage => (0..priors.len())
                        .filter(|&g| weights[g] >= NEGLIGIBLE_MODEL_WEIGHT)
                        .collect(),
                    DecisionMode::ModelSelect => vec![argmax(&weights)],
                };
                let mut out = vec![
                    ArmTails {
                        futility: 0.0,
                        efficacy: 0.0
                    };
                    j
                ];
                for g in chosen {
                    let w = match mode {
                        DecisionMode::ModelAverage => weights[g],
                        DecisionMode::ModelSelect => 1.0,
                    };
                    let fit = self.hierarchy_over(&all, data, &priors[g], salt)?;
                    for (o, t) in out.iter_mut().zip(fit) {
                        o.futility += w * t.futility;
                        o.efficacy += w * t.efficacy;
                    }
                }
                for o in &mut out {
                    o.futility = o.futility.clamp(0.0, 1.0);
                    o.efficacy = o.efficacy.clamp(0.0, 1.0);
                }
                Ok(out)
            }
        }
    }

    fn hierarchy_over(
        &self,
        members: &[usize],
        data: &ObservedData,
        prior: &PriorSpec,
        salt: u64,
    ) -> Result<Vec<ArmTails>> {
        let arms: Vec<_> = members
            .iter()
            .map(|&k| (self.spec.arms[k].p0, self.spec.arms[k].p1, data.arms[k]))
            .collect();
        let fit = self
            .cache
            .hierarchy(&arms, prior, &self.design.hyper, &self.design.mcmc, salt)?;
        Ok(fit.as_ref().clone())
    }

    /// Decisions for the arms flagged in `analyze`; other arms keep `previous`.
    pub fn decide(
        &self,
        data: &ObservedData,
        analyze: &[bool],
        previous: &[ArmDecision],
        salt: u64,
    ) -> Result<Vec<ArmDecision>> {
        let tails = self.tails_salted(data, salt)?;
        let policy = &self.design.policy;
        Ok((0..self.spec.n_arms())
            .map(|k| {
                if !analyze[k] {
                    return previous[k];
                }
                let n = data.arms[k].n;
                let status = if n == 0 {
                    ArmStatus::Continue
                } else {
                    apply_rule(
                        n,
                        self.spec.arms[k].max_n,
                        &policy.arms[k],
                        policy.superiority_cutoff,
                        tails[k],
                    )
                };
                ArmDecision {
                    status,
                    futility_prob: tails[k].futility,
                    n_at_decision: n,
                }
            })
            .collect())
    }

    /// Decisions for every arm at its current sample size.
    pub fn analyze(&self, data: &ObservedData) -> Result<Vec<ArmDecision>> {
        let j = self.spec.n_arms();
        let placeholder = ArmDecision {
            status: ArmStatus::Continue,
            futility_prob: 0.0,
            n_at_decision: 0,
        };
        self.decide(data, &vec![true; j], &vec![placeholder; j], 0)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn beta_tails(data: &ObservedData, spec: &TrialSpec, k: usize, prior: BetaParams) -> Result<ArmTails> {
    let d = data.arms[k];
    let post = beta_binomial_posterior(d.x, d.n, prior.a, prior.b)?;
    let arm = &spec.arms[k];
    Ok(ArmTails {
        futility: beta_tail_prob(post, arm.p0, Tail::Leq),
        efficacy: beta_tail_prob(post, arm.p1, Tail::Greater),
    })
}

fn independent_tails(data: &ObservedData, spec: &TrialSpec, prior: BetaParams) -> Result<Vec<ArmTails>> {
    (0..spec.n_arms())
        .map(|k| beta_tails(data, spec, k, prior))
        .collect()
}

fn analyze_as(data: &ObservedData, spec: &TrialSpec, design: &DesignSpec, ok: bool, expected: &str) -> Result<Vec<ArmDecision>> {
    if !ok {
        return Err(Error::InvalidDesign(format!(
            "expected a {expected} design, got {}",
            design.kind.label()
        )));
    }
    DesignEngine::new(spec, design)?.analyze(data)
}

/// Decisions of the independent beta-binomial design.
pub fn independent_analyze(data: &ObservedData, spec: &TrialSpec, design: &DesignSpec) -> Result<Vec<ArmDecision>> {
    let ok = matches!(design.kind, DesignKind::Independent);
    analyze_as(data, spec, design, ok, "independent")
}

/// Decisions of a single-prior hierarchical design (vague BHM or OBHM).
pub fn bhm_analyze(data: &ObservedData, spec: &TrialSpec, design: &DesignSpec) -> Result<Vec<ArmDecision>> {
    let ok = matches!(design.kind, DesignKind::VagueBhm { .. } | DesignKind::Obhm { .. });
    analyze_as(data, spec, design, ok, "hierarchical")
}

pub fn cobhm_analyze(data: &ObservedData, spec: &TrialSpec, design: &DesignSpec) -> Result<Vec<ArmDecision>> {
    let ok = matches!(design.kind, DesignKind::Cobhm { .. });
    analyze_as(data, spec, design, ok, "clustered")
}

pub fn aobhm_analyze(data: &ObservedData, spec: &TrialSpec, design: &DesignSpec) -> Result<Vec<ArmDecision>> {
    let ok = matches!(design.kind, DesignKind::Aobhm { .. });
    analyze_as(data, spec, design, ok, "model-averaged")
}

/// Sensitive-cluster threshold `0.5 (n/N)^ω`.
pub fn cluster_threshold(n: u32, max_n: u32, omega: f64) -> f64 {
    0.5 * (n as f64 / max_n as f64).powf(omega)
}

/// Splits arms into a sensitive and an insensitive cluster: arm j is sensitive
/// when Pr(p_j > (p0_j + p1_j)/2 | D) under its beta-binomial posterior exceeds
/// `0.5 (n_j/N_j)^ω`.
pub fn cluster_arms(data: &ObservedData, spec: &TrialSpec, omega: f64, beta_prior: BetaParams) -> Result<Partition> {
    if data.n_arms() != spec.n_arms() {
        return Err(Error::LengthMismatch {
            what: "observed arms",
            expected: spec.n_arms(),
            got: data.n_arms(),
        });
    }
    let sensitive = spec
        .arms
        .iter()
        .zip(&data.arms)
        .map(|(arm, d)| {
            let post = beta_binomial_posterior(d.x, d.n, beta_prior.a, beta_prior.b)?;
            let mid = 0.5 * (arm.p0 + arm.p1);
            let prob = beta_tail_prob(post, mid, Tail::Greater);
            Ok(prob > cluster_threshold(d.n, arm.max_n, omega))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Partition::new(sensitive))
}

/// Log of the binomial likelihood of the data when every sensitive arm responds
/// at its target rate and every other arm at its null rate.
pub fn log_model_likelihood(data: &ObservedData, partition: &Partition, spec: &TrialSpec) -> Result<f64> {
    if data.n_arms() != spec.n_arms() || partition.n_arms() != spec.n_arms() {
        return Err(Error::LengthMismatch {
            what: "partition arms",
            expected: spec.n_arms(),
            got: partition.n_arms().min(data.n_arms()),
        });
    }
    Ok(spec
        .arms
        .iter()
        .zip(&data.arms)
        .zip(&partition.sensitive)
        .map(|((arm, d), &s)| {
            let p = if s { arm.p1 } else { arm.p0 };
            log_binomial_pmf(d.x, d.n, p)
        })
        .sum())
}

pub fn model_likelihood(data: &ObservedData, partition: &Partition, spec: &TrialSpec) -> Result<f64> {
    log_model_likelihood(data, partition, spec).map(f64::exp)
}

fn log_binomial_pmf(x: u32, n: u32, p: f64) -> f64 {
    let (x, n) = (x as f64, n as f64);
    let log_choose = statrs::function::factorial::ln_binomial(n as u64, x as u64);
    log_choose + x * p.ln() + (n - x) * (-p).ln_1p()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior model probabilities Pr(M_g | D) ∝ L(D | M_g) Pr(M_g).
///
/// `L(D | M_g)` is the likelihood of partition g's canonical assignment, which
/// lists sensitive arms first within each exchangeable group. The weights are
/// therefore not symmetric in exchangeable arms: a weak result in a later arm
/// shifts weight to a partition that excludes it, one in an earlier arm does not.
pub fn bma_weights(
    data: &ObservedData,
    spec: &TrialSpec,
    partitions: &[Partition],
    model_prior: &[f64],
) -> Result<Vec<f64>> {
    if partitions.len() != model_prior.len() {
        return Err(Error::LengthMismatch {
            what: "model prior",
            expected: partitions.len(),
            got: model_prior.len(),
        });
    }
    let total: f64 = model_prior.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSum(total));
    }
    let log_post: Vec<f64> = partitions
        .iter()
        .zip(model_prior)
        .map(|(part, &prior)| Ok(log_model_likelihood(data, part, spec)? + prior.ln()))
        .collect::<Result<Vec<f64>>>()?;
    let norm = log_sum_exp(&log_post);
    if !norm.is_finite() {
        return Err(Error::NonFinite("all model likelihoods vanish".into()));
    }
    Ok(log_post.iter().map(|lp| (lp - norm).exp()).collect())
}
