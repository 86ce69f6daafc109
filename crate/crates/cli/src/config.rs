//! Run configuration: TOML schema, embedded presets and validation.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use basket_core::designs::{DecisionMode, DesignKind, StoppingPolicy};
use basket_core::inference::{BetaParams, McmcControl};
use basket_core::model::{ArmSpec, PriorSpec, TrialSpec};
use basket_core::optimizer::{GridSpec, PriorFamily};
use basket_core::partition::enumerate_partitions;
use basket_core::simulator::ScenarioTruth;
use basket_core::utility::{UtilityKind, UtilitySpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const PAPER_4ARM: &str = include_str!("../presets/paper-4arm.toml");
const PAPER_3ARM: &str = include_str!("../presets/paper-3arm.toml");

pub const PRESETS: [&str; 2] = ["paper-4arm", "paper-3arm"];

const REQUIRED_KEYS: [&str; 3] = ["trial", "design", "scenario"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub trial: TrialToml,
    #[serde(default)]
    pub mcmc: McmcToml,
    #[serde(default)]
    pub utility: UtilityToml,
    #[serde(default)]
    pub grid: GridToml,
    #[serde(default)]
    pub run: RunToml,
    pub design: Vec<DesignToml>,
    pub scenario: Vec<ScenarioToml>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialToml {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub max_n: u32,
    pub interims: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcToml {
    pub burn_in: usize,
    pub kept_draws: usize,
    pub thin: usize,
    pub seed: u64,
    pub step_scale: f64,
}

impl Default for McmcToml {
    fn default() -> Self {
        let d = McmcControl::default();
        Self {
            burn_in: d.burn_in,
            kept_draws: d.kept_draws,
            thin: d.thin,
            seed: d.seed,
            step_scale: d.step_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKindToml {
    TwoRegion,
    ThreeRegion,
    CostBenefit,
}

/// Flat utility table; which fields are required depends on `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityToml {
    pub kind: UtilityKindToml,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub eta: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub gains: Option<Vec<f64>>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    /// Partition weights; equal when omitted.
    pub weights: Option<Vec<f64>>,
}

impl Default for UtilityToml {
    fn default() -> Self {
        Self {
            kind: UtilityKindToml::TwoRegion,
            lambda1: Some(1.0),
            lambda2: Some(2.0),
            lambda3: None,
            eta: Some(0.2),
            eta1: None,
            eta2: None,
            gains: None,
            f1: None,
            f2: None,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridToml {
    pub v0_points: usize,
    pub sigma0_sq_points: usize,
    pub half_cauchy_points: usize,
    pub reps_per_point: usize,
    pub refine_top: usize,
    pub refine_reps: usize,
    /// Sampler draws used while searching; the `[mcmc]` values when omitted.
    pub search_burn_in: Option<usize>,
    pub search_kept_draws: Option<usize>,
}

impl Default for GridToml {
    fn default() -> Self {
        Self {
            v0_points: 8,
            sigma0_sq_points: 10,
            half_cauchy_points: 10,
            reps_per_point: 1000,
            refine_top: 3,
            refine_reps: 5000,
            search_burn_in: None,
            search_kept_draws: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunToml {
    pub n_reps: usize,
    pub base_seed: u64,
    pub target_alpha: f64,
    pub calibrate: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunToml {
    fn default() -> Self {
        Self {
            n_reps: 5000,
            base_seed: 2024,
            target_alpha: 0.10,
            calibrate: true,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKindToml {
    Independent,
    Bhm,
    Obhm,
    Cobhm,
    Aobhm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorToml {
    InverseGamma { a0: f64, b0: f64 },
    ScaledInvChiSq { v0: f64, sigma0_sq: f64 },
    HalfCauchy { scale: f64 },
}

impl PriorToml {
    pub fn to_spec(self) -> basket_core::Result<PriorSpec> {
        match self {
            Self::InverseGamma { a0, b0 } => PriorSpec::inverse_gamma(a0, b0),
            Self::ScaledInvChiSq { v0, sigma0_sq } => PriorSpec::scaled_inv_chi_sq(v0, sigma0_sq),
            Self::HalfCauchy { scale } => PriorSpec::half_cauchy(scale),
        }
    }

    pub fn from_spec(p: &PriorSpec) -> Self {
        match *p {
            PriorSpec::ScaledInvChiSq { v0, sigma0_sq } => Self::ScaledInvChiSq { v0, sigma0_sq },
            PriorSpec::HalfCauchy { scale_a } => Self::HalfCauchy { scale: scale_a },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyToml {
    InverseGamma,
    HalfCauchy,
}

impl From<FamilyToml> for PriorFamily {
    fn from(f: FamilyToml) -> Self {
        match f {
            FamilyToml::InverseGamma => PriorFamily::InverseGamma,
            FamilyToml::HalfCauchy => PriorFamily::HalfCauchy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeToml {
    Average,
    Select,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignToml {
    pub name: String,
    pub kind: DesignKindToml,
    pub zeta: Vec<f64>,
    pub delta: Vec<f64>,
    pub prior: Option<PriorToml>,
    /// AOBHM: one prior per canonical partition.
    pub priors: Option<Vec<PriorToml>>,
    /// Search for the prior(s) instead of fixing them.
    pub optimize: Option<FamilyToml>,
    pub omega: Option<f64>,
    pub beta_prior: Option<[f64; 2]>,
    pub superiority_cutoff: Option<f64>,
    pub mode: Option<ModeToml>,
    pub model_prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioToml {
    pub name: String,
    pub true_p: Vec<f64>,
}

/// Where a design's prior comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSource {
    None,
    Fixed(PriorSpec),
    FixedPerPartition(Vec<PriorSpec>),
    Optimize(PriorFamily),
}

/// A design before its priors are resolved.
#[derive(Debug, Clone)]
pub struct DesignPlan {
    pub name: String,
    pub kind: DesignKindToml,
    pub policy: StoppingPolicy,
    pub source: PriorSource,
    pub omega: f64,
    pub beta_prior: BetaParams,
    pub mode: DecisionMode,
    pub model_prior: Vec<f64>,
}

impl DesignPlan {
    /// Design kind with `prior` filled in (AOBHM uses `per_partition`).
    pub fn kind_with(&self, prior: Option<PriorSpec>, per_partition: Option<Vec<PriorSpec>>) -> Result<DesignKind> {
        let need = |p: Option<PriorSpec>| p.ok_or_else(|| anyhow!("design {}: prior unresolved", self.name));
        Ok(match self.kind {
            DesignKindToml::Independent => DesignKind::Independent,
            DesignKindToml::Bhm => DesignKind::VagueBhm { prior: need(prior)? },
            DesignKindToml::Obhm => DesignKind::Obhm { prior: need(prior)? },
            DesignKindToml::Cobhm => DesignKind::Cobhm {
                prior: need(prior)?,
                omega: self.omega,
            },
            DesignKindToml::Aobhm => DesignKind::Aobhm {
                priors: per_partition.ok_or_else(|| anyhow!("design {}: priors unresolved", self.name))?,
                model_prior: self.model_prior.clone(),
                mode: self.mode,
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub trial: TrialSpec,
    pub designs: Vec<DesignPlan>,
    pub utility: UtilitySpec,
    pub scenarios: Vec<(String, ScenarioTruth)>,
    pub mcmc: McmcControl,
    pub search_mcmc: McmcControl,
    pub grid: GridSpec,
    pub n_reps: usize,
    pub base_seed: u64,
    pub target_alpha: f64,
    pub calibrate: bool,
    pub output_dir: Option<PathBuf>,
    /// SHA-256 of the effective configuration (after command-line overrides).
    pub hash: String,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    match name {
        "paper-4arm" => Ok(PAPER_4ARM),
        "paper-3arm" => Ok(PAPER_3ARM),
        other => bail!("unknown preset {other:?}; available: {}", PRESETS.join(", ")),
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text, overrides).with_context(|| format!("invalid configuration {}", path.display()))
}

pub fn load_preset(name: &str, overrides: &Overrides) -> Result<RunConfig> {
    parse_config(preset_text(name)?, overrides).with_context(|| format!("invalid preset {name}"))
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| anyhow!("{e}"))?;
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !table.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        bail!(
            "missing required keys: {} (required: {})",
            missing.join(", "),
            REQUIRED_KEYS.join(", ")
        );
    }
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    if let Some(seed) = overrides.seed {
        raw.run.base_seed = seed;
    }
    if let Some(reps) = overrides.reps {
        raw.run.n_reps = reps;
    }
    build(raw)
}

fn hash_of(raw: &RawConfig) -> Result<String> {
    let canonical = toml::to_string(raw).context("cannot serialize configuration")?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn utility_spec(u: &UtilityToml, n_partitions: usize) -> Result<UtilitySpec> {
    let req = |v: Option<f64>, field: &str| v.ok_or_else(|| anyhow!("utility.{field} is required for this kind"));
    let kind = match u.kind {
        UtilityKindToml::TwoRegion => UtilityKind::TwoRegion {
            lambda1: req(u.lambda1, "lambda1")?,
            lambda2: req(u.lambda2, "lambda2")?,
            eta: req(u.eta, "eta")?,
        },
        UtilityKindToml::ThreeRegion => UtilityKind::ThreeRegion {
            lambda1: req(u.lambda1, "lambda1")?,
            lambda2: req(u.lambda2, "lambda2")?,
            lambda3: req(u.lambda3, "lambda3")?,
            eta1: req(u.eta1, "eta1")?,
            eta2: req(u.eta2, "eta2")?,
        },
        UtilityKindToml::CostBenefit => UtilityKind::CostBenefit {
            gains: u
                .gains
                .clone()
                .ok_or_else(|| anyhow!("utility.gains is required for this kind"))?,
            f1: req(u.f1, "f1")?,
            f2: req(u.f2, "f2")?,
            eta: req(u.eta, "eta")?,
        },
    };
    let spec = match &u.weights {
        Some(w) => {
            if w.len() != n_partitions {
                bail!("utility.weights has {} entries, expected {n_partitions} (one per partition)", w.len());
            }
            UtilitySpec::new(kind, w.clone())
        }
        None => UtilitySpec::equal_weights(kind, n_partitions),
    };
    spec.context("utility")
}

fn design_plan(d: &DesignToml, j: usize, n_partitions: usize) -> Result<DesignPlan> {
    let ctx = || format!("design {:?}", d.name);
    if d.zeta.len() != j || d.delta.len() != j {
        bail!(
            "{}: zeta and delta need {j} entries each, got {} and {}",
            ctx(),
            d.zeta.len(),
            d.delta.len()
        );
    }
    let mut policy = StoppingPolicy::new(&d.zeta, &d.delta).with_context(ctx)?;
    if let Some(c2) = d.superiority_cutoff {
        policy = policy.with_superiority(c2).with_context(ctx)?;
    }
    let source = match (d.kind, d.prior, &d.priors, d.optimize) {
        (DesignKindToml::Independent, None, None, None) => PriorSource::None,
        (DesignKindToml::Independent, ..) => bail!("{}: the independent design takes no prior", ctx()),
        (DesignKindToml::Aobhm, None, Some(ps), None) => {
            if ps.len() != n_partitions {
                bail!("{}: priors needs {n_partitions} entries, got {}", ctx(), ps.len());
            }
            PriorSource::FixedPerPartition(
                ps.iter()
                    .map(|p| p.to_spec())
                    .collect::<basket_core::Result<_>>()
                    .with_context(ctx)?,
            )
        }
        (DesignKindToml::Aobhm, None, None, Some(f)) => PriorSource::Optimize(f.into()),
        (DesignKindToml::Aobhm, ..) => bail!("{}: give exactly one of `priors` or `optimize`", ctx()),
        (_, Some(p), None, None) => PriorSource::Fixed(p.to_spec().with_context(ctx)?),
        (_, None, None, Some(f)) => PriorSource::Optimize(f.into()),
        _ => bail!("{}: give exactly one of `prior` or `optimize`", ctx()),
    };
    if d.kind == DesignKindToml::Bhm && matches!(source, PriorSource::Optimize(_)) {
        bail!("{}: the vague BHM uses a fixed prior; use kind = \"obhm\" to optimize", ctx());
    }
    if d.omega.is_some() && d.kind != DesignKindToml::Cobhm {
        bail!("{}: omega applies to cobhm only", ctx());
    }
    if (d.mode.is_some() || d.model_prior.is_some()) && d.kind != DesignKindToml::Aobhm {
        bail!("{}: mode and model_prior apply to aobhm only", ctx());
    }
    let model_prior = match &d.model_prior {
        Some(w) if w.len() != n_partitions => {
            bail!("{}: model_prior needs {n_partitions} entries, got {}", ctx(), w.len())
        }
        Some(w) => w.clone(),
        None => vec![1.0 / n_partitions as f64; n_partitions],
    };
    let [a, b] = d.beta_prior.unwrap_or([0.1, 0.1]);
    Ok(DesignPlan {
        name: d.name.clone(),
        kind: d.kind,
        policy,
        source,
        omega: d.omega.unwrap_or(2.0),
        beta_prior: BetaParams::new(a, b).with_context(ctx)?,
        mode: match d.mode.unwrap_or(ModeToml::Average) {
            ModeToml::Average => DecisionMode::ModelAverage,
            ModeToml::Select => DecisionMode::ModelSelect,
        },
        model_prior,
    })
}

fn build(raw: RawConfig) -> Result<RunConfig> {
    let hash = hash_of(&raw)?;
    let t = &raw.trial;
    if t.p0.len() != t.p1.len() {
        bail!(
            "trial: p0 has {} entries but p1 has {}",
            t.p0.len(),
            t.p1.len()
        );
    }
    let arms = t
        .p0
        .iter()
        .zip(&t.p1)
        .map(|(&p0, &p1)| ArmSpec::new(p0, p1, t.max_n, t.interims.clone()))
        .collect::<basket_core::Result<Vec<_>>>()
        .context("trial")?;
    let trial = TrialSpec::new(arms).context("trial")?;
    let j = trial.n_arms();
    let n_partitions = enumerate_partitions(&trial).len();

    let m = &raw.mcmc;
    let mcmc = McmcControl {
        burn_in: m.burn_in,
        kept_draws: m.kept_draws,
        thin: m.thin,
        seed: m.seed,
        step_scale: m.step_scale,
    };
    mcmc.validate().context("mcmc")?;
    let search_mcmc = McmcControl {
        burn_in: raw.grid.search_burn_in.unwrap_or(m.burn_in),
        kept_draws: raw.grid.search_kept_draws.unwrap_or(m.kept_draws),
        ..mcmc
    };
    search_mcmc.validate().context("grid search sampler")?;

    let utility = utility_spec(&raw.utility, n_partitions)?;
    let g = &raw.grid;
    let grid = GridSpec {
        reps_per_point: g.reps_per_point,
        refine_top: g.refine_top,
        refine_reps: g.refine_reps,
        ..GridSpec::for_trial(&trial, g.v0_points, g.sigma0_sq_points, g.half_cauchy_points)
    };
    grid.validate().context("grid")?;

    if raw.design.is_empty() {
        bail!("at least one [[design]] is required");
    }
    let mut designs = Vec::with_capacity(raw.design.len());
    for d in &raw.design {
        if designs.iter().any(|p: &DesignPlan| p.name == d.name) {
            bail!("duplicate design name {:?}", d.name);
        }
        designs.push(design_plan(d, j, n_partitions)?);
    }
    if raw.scenario.is_empty() {
        bail!("at least one [[scenario]] is required");
    }
    let scenarios = raw
        .scenario
        .iter()
        .map(|s| {
            if s.true_p.len() != j {
                bail!(
                    "scenario {:?}: true_p has {} entries, expected {j}",
                    s.name,
                    s.true_p.len()
                );
            }
            let truth = ScenarioTruth::new(s.true_p.clone()).with_context(|| format!("scenario {:?}", s.name))?;
            Ok((s.name.clone(), truth))
        })
        .collect::<Result<Vec<_>>>()?;

    let r = &raw.run;
    if r.n_reps == 0 {
        bail!("run.n_reps must be positive");
    }
    if !(r.target_alpha > 0.0 && r.target_alpha < 1.0) {
        bail!("run.target_alpha must lie in (0, 1), got {}", r.target_alpha);
    }
    Ok(RunConfig {
        trial,
        designs,
        utility,
        scenarios,
        mcmc,
        search_mcmc,
        grid,
        n_reps: r.n_reps,
        base_seed: r.base_seed,
        target_alpha: r.target_alpha,
        calibrate: r.calibrate,
        output_dir: r.output_dir.clone(),
        hash,
    })
}
