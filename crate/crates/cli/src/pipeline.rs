//! Optimize → calibrate → simulate orchestration.

use anyhow::{Context, Result};
use basket_core::designs::{DesignKind, DesignSpec, StoppingPolicy};
use basket_core::inference::bhm_sample;
use basket_core::model::{HyperPrior, PriorSpec};
use basket_core::optimizer::{
    calibrate_zeta, evaluate_all_partitions, per_partition_from_trace, search_from_trace, Calibration, GridPoint,
    OptimizationResult, PriorFamily,
};
use basket_core::designs::DesignEngine;
use basket_core::simulator::{complete_data, operating_characteristics, replicate_seed, OperatingCharacteristics};

use crate::config::{DesignKindToml, DesignPlan, PriorSource, RunConfig};

/// A design with every prior fixed, plus the searches that produced them.
#[derive(Debug, Clone)]
pub struct ResolvedDesign {
    pub name: String,
    pub spec: DesignSpec,
    /// `(label, result)` per search; AOBHM has one per partition.
    pub searches: Vec<(String, OptimizationResult)>,
}

/// Template used while searching: the plan's provisional policy with the
/// search sampler settings, as an OBHM (AOBHM) or the plan's own kind.
fn search_template(cfg: &RunConfig, plan: &DesignPlan) -> Result<DesignSpec> {
    let placeholder = PriorSpec::half_cauchy(1.0)?;
    let kind = match plan.kind {
        DesignKindToml::Cobhm => DesignKind::Cobhm {
            prior: placeholder,
            omega: plan.omega,
        },
        _ => DesignKind::Obhm { prior: placeholder },
    };
    Ok(DesignSpec {
        kind,
        beta_prior: plan.beta_prior,
        policy: plan.policy.clone(),
        hyper: HyperPrior::default(),
        mcmc: cfg.search_mcmc,
    })
}

/// Resolves every design's priors, running the grid searches it asks for.
/// Searches with identical templates share one grid evaluation.
pub fn resolve_designs(cfg: &RunConfig) -> Result<Vec<ResolvedDesign>> {
    let mut traces: Vec<(DesignSpec, PriorFamily, Vec<GridPoint>)> = Vec::new();
    let mut out = Vec::with_capacity(cfg.designs.len());
    for plan in &cfg.designs {
        let ctx = || format!("design {}", plan.name);
        let base = |kind: DesignKind| DesignSpec {
            kind,
            beta_prior: plan.beta_prior,
            policy: plan.policy.clone(),
            hyper: HyperPrior::default(),
            mcmc: cfg.mcmc,
        };
        let resolved = match &plan.source {
            PriorSource::None => ResolvedDesign {
                name: plan.name.clone(),
                spec: base(plan.kind_with(None, None)?),
                searches: Vec::new(),
            },
            PriorSource::Fixed(p) => ResolvedDesign {
                name: plan.name.clone(),
                spec: base(plan.kind_with(Some(*p), None)?),
                searches: Vec::new(),
            },
            PriorSource::FixedPerPartition(ps) => ResolvedDesign {
                name: plan.name.clone(),
                spec: base(plan.kind_with(None, Some(ps.clone()))?),
                searches: Vec::new(),
            },
            PriorSource::Optimize(family) => {
                let template = search_template(cfg, plan)?;
                let idx = match traces
                    .iter()
                    .position(|(t, f, _)| *t == template && f == family)
                {
                    Some(i) => i,
                    None => {
                        log::info!("{}: evaluating the prior grid", plan.name);
                        let candidates = match family {
                            PriorFamily::InverseGamma => cfg.grid.inverse_gamma_candidates()?,
                            PriorFamily::HalfCauchy => cfg.grid.half_cauchy_candidates()?,
                        };
                        let trace = evaluate_all_partitions(
                            &cfg.trial,
                            &cfg.utility,
                            &template,
                            &candidates,
                            cfg.grid.reps_per_point,
                            cfg.base_seed,
                        )
                        .with_context(ctx)?;
                        traces.push((template.clone(), *family, trace));
                        traces.len() - 1
                    }
                };
                let trace = &traces[idx].2;
                if plan.kind == DesignKindToml::Aobhm {
                    let per = per_partition_from_trace(
                        &cfg.trial,
                        &cfg.utility,
                        &template,
                        &cfg.grid,
                        trace,
                        cfg.base_seed,
                    )
                    .with_context(ctx)?;
                    let priors = per.iter().map(|r| r.best_prior).collect();
                    ResolvedDesign {
                        name: plan.name.clone(),
                        spec: base(plan.kind_with(None, Some(priors))?),
                        searches: per
                            .into_iter()
                            .enumerate()
                            .map(|(g, r)| (format!("partition{}", g + 1), r))
                            .collect(),
                    }
                } else {
                    let res = search_from_trace(&cfg.trial, &cfg.utility, &template, &cfg.grid, trace, cfg.base_seed)
                        .with_context(ctx)?;
                    ResolvedDesign {
                        name: plan.name.clone(),
                        spec: base(plan.kind_with(Some(res.best_prior), None)?),
                        searches: vec![("all".into(), res)],
                    }
                }
            }
        };
        out.push(resolved);
    }
    Ok(out)
}

/// Calibrated ζ per design (or the configured values when calibration is off).
pub fn calibrate_designs(cfg: &RunConfig, designs: &mut [ResolvedDesign]) -> Result<Vec<Option<Calibration>>> {
    designs
        .iter_mut()
        .map(|d| {
            if !cfg.calibrate {
                return Ok(None);
            }
            log::info!("{}: calibrating zeta", d.name);
            let cal = calibrate_zeta(&cfg.trial, &d.spec, cfg.target_alpha, cfg.n_reps, cfg.base_seed)
                .with_context(|| format!("calibrating design {}", d.name))?;
            d.spec = d.spec.with_policy(cal.policy.clone());
            Ok(Some(cal))
        })
        .collect()
}

/// Operating characteristics of every (scenario, design) pair, scenario-major.
pub fn simulate_all(
    cfg: &RunConfig,
    designs: &[ResolvedDesign],
) -> Result<Vec<(String, String, OperatingCharacteristics)>> {
    let engines = designs
        .iter()
        .map(|d| DesignEngine::new(&cfg.trial, &d.spec).with_context(|| format!("design {}", d.name)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (scenario, truth) in &cfg.scenarios {
        for (d, engine) in designs.iter().zip(&engines) {
            log::info!("scenario {scenario}, design {}", d.name);
            let oc = operating_characteristics(truth, engine, cfg.n_reps, cfg.base_seed)
                .with_context(|| format!("scenario {scenario}, design {}", d.name))?;
            out.push((scenario.clone(), d.name.clone(), oc));
        }
    }
    Ok(out)
}

/// Chains of each hierarchical prior of `design`, fitted to the final-look
/// data of replicate 0 of `truth` (every arm followed to its maximum size).
pub fn diagnostic_chains(
    cfg: &RunConfig,
    design: &ResolvedDesign,
    truth: &basket_core::simulator::ScenarioTruth,
) -> Result<Vec<(String, basket_core::inference::PosteriorDraws)>> {
    let priors: Vec<(String, PriorSpec)> = match &design.spec.kind {
        DesignKind::Independent => return Ok(Vec::new()),
        DesignKind::VagueBhm { prior } | DesignKind::Obhm { prior } | DesignKind::Cobhm { prior, .. } => {
            vec![("".into(), *prior)]
        }
        DesignKind::Aobhm { priors, .. } => priors
            .iter()
            .enumerate()
            .map(|(g, p)| (format!("_partition{}", g + 1), *p))
            .collect(),
    };
    let data = complete_data(truth, &cfg.trial, replicate_seed(cfg.base_seed, 0))?;
    priors
        .into_iter()
        .map(|(suffix, prior)| {
            let draws = bhm_sample(&data, &cfg.trial, &prior, &design.spec.hyper, &design.spec.mcmc)?;
            Ok((suffix, draws))
        })
        .collect()
}

pub fn policy_summary(policy: &StoppingPolicy) -> String {
    policy
        .arms
        .iter()
        .map(|a| format!("({:.4}, {})", a.zeta, a.delta))
        .collect::<Vec<_>>()
        .join(" ")
}
