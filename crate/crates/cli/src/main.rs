//! `basket`: optimize shrinkage priors, calibrate stopping rules and simulate
//! operating characteristics of basket trial designs.

mod config;
mod output;
mod pipeline;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use basket_core::optimizer::write_trace_csv;
use basket_core::simulator::{write_oc_csv, OcRecord};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{Overrides, PriorToml, RunConfig};
use pipeline::ResolvedDesign;

#[derive(Debug, Parser)]
#[command(name = "basket", version, about = "Utility-optimized Bayesian hierarchical basket trial designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Embedded configuration: paper-4arm or paper-3arm.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Base seed (overrides run.base_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo replicates per scenario (overrides run.n_reps).
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "BASKET_THREADS")]
    threads: Option<usize>,

    /// Output directory (overrides run.output_dir; default ./basket-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also write sampler chains for one replicate of every scenario.
    #[arg(long, global = true)]
    dump_chains: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search the shrinkage prior(s) of designs marked `optimize`.
    OptimizePrior,
    /// Resolve priors and calibrate ζ under the global null.
    Calibrate,
    /// Resolve, calibrate and simulate every scenario; writes oc.csv.
    Simulate,
    /// As `simulate`, then render the operating-characteristic table.
    OcTable,
}

#[derive(Serialize)]
struct PriorsFile {
    design: Vec<PriorEntry>,
}

#[derive(Serialize)]
struct PriorEntry {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<PriorToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    priors: Option<Vec<PriorToml>>,
}

#[derive(Serialize)]
struct PolicyFile {
    design: Vec<PolicyEntry>,
}

#[derive(Serialize)]
struct PolicyEntry {
    name: String,
    zeta: Vec<f64>,
    delta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    null_claim_prob: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        reps: cli.reps,
    };
    if cli.reps == Some(0) {
        bail!("--reps must be positive");
    }
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => config::load_config(path, &overrides)?,
        (None, Some(name)) => config::load_preset(name, &overrides)?,
        (None, None) => bail!("one of --config or --preset is required"),
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("basket-out"));

    let mut designs = pipeline::resolve_designs(&cfg)?;
    write_searches(&cfg, &designs, &out_dir)?;
    write_priors(&cfg, &designs, &out_dir)?;
    if matches!(cli.command, Command::OptimizePrior) {
        for d in &designs {
            println!("{}: {}", d.name, describe_priors(d));
        }
        return Ok(());
    }

    let calibrations = pipeline::calibrate_designs(&cfg, &mut designs)?;
    write_policy(&cfg, &designs, &calibrations, &out_dir)?;
    for d in &designs {
        println!("{}: zeta/delta {}", d.name, pipeline::policy_summary(&d.spec.policy));
    }
    if matches!(cli.command, Command::Calibrate) {
        return Ok(());
    }

    let results = pipeline::simulate_all(&cfg, &designs)?;
    let records: Vec<OcRecord<'_>> = results
        .iter()
        .map(|(s, d, oc)| OcRecord {
            scenario: s,
            design: d,
            oc,
        })
        .collect();
    output::write_with_header(&out_dir.join("oc.csv"), &cfg.hash, cfg.base_seed, |buf| {
        write_oc_csv(buf, &records)
    })?;
    if cli.dump_chains {
        dump_chains(&cfg, &designs, &out_dir)?;
    }
    if matches!(cli.command, Command::OcTable) {
        let names: Vec<String> = designs.iter().map(|d| d.name.clone()).collect();
        let text = table::render(&cfg.trial, &cfg.scenarios, &names, &results);
        let mut file = output::header(&cfg.hash, cfg.base_seed);
        file.push_str(&text);
        output::write_atomic(&out_dir.join("oc_table.txt"), file.as_bytes())?;
        print!("{text}");
    }
    Ok(())
}

fn describe_priors(d: &ResolvedDesign) -> String {
    use basket_core::designs::DesignKind;
    match &d.spec.kind {
        DesignKind::Independent => "beta-binomial (no shrinkage prior)".into(),
        DesignKind::VagueBhm { prior } | DesignKind::Obhm { prior } | DesignKind::Cobhm { prior, .. } => prior.to_string(),
        DesignKind::Aobhm { priors, .. } => priors.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "),
    }
}

fn write_searches(cfg: &RunConfig, designs: &[ResolvedDesign], out: &Path) -> Result<()> {
    for d in designs {
        for (label, res) in &d.searches {
            let path = out.join(format!("search_{}_{label}.csv", file_stem(&d.name)));
            output::write_with_header(&path, &cfg.hash, cfg.base_seed, |buf| {
                write_trace_csv(buf, res, cfg.trial.n_arms())
            })?;
        }
    }
    Ok(())
}

fn write_priors(cfg: &RunConfig, designs: &[ResolvedDesign], out: &Path) -> Result<()> {
    use basket_core::designs::DesignKind;
    let design = designs
        .iter()
        .filter_map(|d| match &d.spec.kind {
            DesignKind::Independent => None,
            DesignKind::VagueBhm { prior } | DesignKind::Obhm { prior } | DesignKind::Cobhm { prior, .. } => {
                Some(PriorEntry {
                    name: d.name.clone(),
                    prior: Some(PriorToml::from_spec(prior)),
                    priors: None,
                })
            }
            DesignKind::Aobhm { priors, .. } => Some(PriorEntry {
                name: d.name.clone(),
                prior: None,
                priors: Some(priors.iter().map(PriorToml::from_spec).collect()),
            }),
        })
        .collect();
    let text = toml::to_string(&PriorsFile { design }).context("cannot render priors")?;
    let mut file = output::header(&cfg.hash, cfg.base_seed);
    file.push_str(&text);
    output::write_atomic(&out.join("priors.toml"), file.as_bytes())
}

fn write_policy(
    cfg: &RunConfig,
    designs: &[ResolvedDesign],
    calibrations: &[Option<basket_core::optimizer::Calibration>],
    out: &Path,
) -> Result<()> {
    let design = designs
        .iter()
        .zip(calibrations)
        .map(|(d, cal)| PolicyEntry {
            name: d.name.clone(),
            zeta: d.spec.policy.arms.iter().map(|a| a.zeta).collect(),
            delta: d.spec.policy.arms.iter().map(|a| a.delta).collect(),
            null_claim_prob: cal.as_ref().map(|c| c.null_oc.claim_probs()),
            diagnostics: cal
                .as_ref()
                .map(|c| c.groups.iter().filter_map(|g| g.diagnostic.clone()).collect())
                .unwrap_or_default(),
        })
        .collect();
    let text = toml::to_string(&PolicyFile { design }).context("cannot render policy")?;
    let mut file = output::header(&cfg.hash, cfg.base_seed);
    file.push_str(&text);
    output::write_atomic(&out.join("policy.toml"), file.as_bytes())
}

fn dump_chains(cfg: &RunConfig, designs: &[ResolvedDesign], out: &Path) -> Result<()> {
    for (scenario, truth) in &cfg.scenarios {
        for d in designs {
            for (suffix, draws) in pipeline::diagnostic_chains(cfg, d, truth)? {
                let path = out
                    .join("chains")
                    .join(format!("{}_{}{suffix}.csv", file_stem(&d.name), file_stem(scenario)));
                output::write_with_header(&path, &cfg.hash, cfg.base_seed, |buf| draws.write_csv(buf))?;
            }
        }
    }
    Ok(())
}

/// File-name-safe version of a design or scenario name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
