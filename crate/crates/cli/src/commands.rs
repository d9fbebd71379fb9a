//! Subcommand implementations. Each returns the process exit code.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use flockcert::experiments::{contour_extract, generate_ic, rescale_ic, run_sweep};
use flockcert::monitor::decay_monitor;
use flockcert::{
    extended_certificate, simulate, CertificateFamily, CertificateQuery, FlockState, KernelSpec,
    Verdict,
};
use log::info;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML run configuration.
    pub config: PathBuf,
    /// Override a config field, e.g. `--set sim.dt=0.005` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Record full states and write snapshots.csv.
    #[arg(long)]
    pub snapshots: bool,
    /// Evaluate the spread-decay estimate along the run (implies --snapshots).
    #[arg(long)]
    pub monitor: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Also write the level curve of the probability field at LEVEL in (0, 1).
    #[arg(long, value_name = "LEVEL")]
    pub contour: Option<f64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    None,
    ChiRadius,
    PsiRTheta,
    PsiPowerLaw,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long = "n", short = 'N')]
    pub n: usize,
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub v0: f64,
    /// Power-law kernel exponent.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::None)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Upper bound on the neighbor normalizer (default N).
    #[arg(long)]
    pub eta_bound: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IcGenArgs {
    #[arg(long = "n", short = 'N')]
    pub n: usize,
    #[arg(long, short = 'd', default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target position spread; requires --v0.
    #[arg(long, requires = "v0")]
    pub x0: Option<f64>,
    #[arg(long, requires = "x0")]
    pub v0: Option<f64>,
    /// Write here instead of standard output.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

fn initial_state(cfg: &RunConfig) -> Result<FlockState, CliError> {
    let m = &cfg.model;
    if let Some(path) = &m.initial.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let s = output::parse_state_csv(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if (s.agents(), s.dim()) != (m.n, m.d) {
            return Err(CliError::Usage(format!(
                "{}: holds {} agents in {} dimensions, config says N = {}, d = {}",
                path.display(),
                s.agents(),
                s.dim(),
                m.n,
                m.d
            )));
        }
        return Ok(s);
    }
    let raw = generate_ic(m.n, m.d, m.initial.seed)?;
    match (m.initial.x0, m.initial.v0) {
        (Some(x0), Some(v0)) => Ok(rescale_ic(&raw, x0, v0)?),
        _ => Ok(raw),
    }
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<i32, CliError> {
    let mut cfg = RunConfig::load(&args.config, &args.overrides)?;
    if args.snapshots || args.monitor {
        cfg.sim.record_snapshots = true;
    }
    let dir = cfg.output_dir(args.output_dir.as_deref());
    let ic = initial_state(&cfg)?;

    let tr = simulate(&ic, &cfg.model.kernel, &cfg.controller, &cfg.sim)?;
    let summary = output::summary_json(&tr);

    let out = &cfg.output;
    let mut files = vec![("config.toml".to_string(), cfg.to_toml())];
    if out.wants(Format::Csv) {
        files.push(("trajectory.csv".into(), output::trajectory_csv(&tr)));
        if let Some(s) = output::snapshots_csv(&tr) {
            files.push(("snapshots.csv".into(), s));
        }
    }
    if out.wants(Format::Json) {
        files.push((
            "summary.json".into(),
            serde_json::to_string_pretty(&summary).expect("summary serializes"),
        ));
    }
    if args.monitor {
        let rep = decay_monitor(&tr, &cfg.model.kernel, &cfg.controller)?;
        files.push(("monitor.csv".into(), output::monitor_csv(&rep)));
    }
    output::write_all(&dir, &files)?;
    info!("wrote {} files to {}", files.len(), dir.display());
    println!("{summary}");
    Ok(0)
}

fn family(args: &CertifyArgs) -> Result<CertificateFamily, CliError> {
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| CliError::Usage(format!("--family needs --{name}")))
    };
    Ok(match args.family {
        FamilyArg::None => CertificateFamily::NoControl,
        FamilyArg::ChiRadius => CertificateFamily::ChiRadius {
            radius: need("radius", args.radius)?,
        },
        FamilyArg::PsiRTheta => CertificateFamily::PsiRTheta {
            radius: need("radius", args.radius)?,
            theta: need("theta", args.theta)?,
        },
        FamilyArg::PsiPowerLaw => CertificateFamily::PsiPowerLaw {
            epsilon: need("epsilon", args.epsilon)?,
        },
    })
}

pub fn cmd_certify(args: CertifyArgs) -> Result<i32, CliError> {
    let query = CertificateQuery {
        n: args.n,
        x0: args.x0,
        v0: args.v0,
        kernel: KernelSpec::power_law(args.delta)?,
        gamma: args.gamma,
        family: family(&args)?,
        eta_bound: args.eta_bound,
    };
    let r = extended_certificate(&query)?;
    let record = json!({
        "query": query,
        "verdict": r.verdict,
        "lhs": r.lhs,
        "rhs": r.rhs,
        "margin": r.margin,
        "certified_v0": r.lhs.map(|l| l * l),
    });
    println!("{record}");
    Ok(if r.verdict == Verdict::Fails { 1 } else { 0 })
}

pub fn cmd_sweep(args: SweepArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::load(&args.config, &args.overrides)?;
    let sweep = cfg.sweep_config().ok_or_else(|| {
        CliError::Usage(format!(
            "{}: sweep needs an [experiment] section",
            args.config.display()
        ))
    })?;
    if let Some(level) = args.contour {
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::Usage(format!(
                "--contour must lie in (0, 1), got {level}"
            )));
        }
    }
    let dir = cfg.output_dir(args.output_dir.as_deref());

    let start = Instant::now();
    let outcome = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?
            .install(|| run_sweep(&sweep))?,
        None => run_sweep(&sweep)?,
    };
    let runtime = start.elapsed().as_secs_f64();

    let contours = args
        .contour
        .map(|level| (level, contour_extract(&outcome.grid, level)));
    let out = &cfg.output;
    let mut files = vec![("config.toml".to_string(), cfg.to_toml())];
    if out.wants(Format::Csv) {
        files.push(("grid.csv".into(), output::grid_csv(&outcome.grid)));
        if let Some((_, lines)) = &contours {
            files.push(("contour.csv".into(), output::contour_csv(lines)));
        }
    }
    if out.wants(Format::Json) {
        let manifest = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "seed_scheme": "h = splitmix64(master_seed); h = splitmix64(h ^ k) for k in [x_index, v_index, sample, attempt]; ChaCha8 seed_from_u64(h)",
            "certificate": sweep.certificate().map(|(family, gamma, eta_bound)| json!({
                "family": family, "gamma": gamma, "eta_bound": eta_bound,
            })),
            "simulations": outcome.simulations,
            "samples_per_cell": sweep.samples_per_cell,
            "blowups": outcome.blowups,
            "resamples": outcome.resamples,
            "runtime_seconds": runtime,
            "contour": contours.as_ref().map(|(level, lines)| json!({
                "level": level, "polylines": lines.len(),
            })),
            "cells": outcome.cells,
        });
        files.push((
            "manifest.json".into(),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        ));
    }
    if out.wants(Format::Gnuplot) {
        let c = contours
            .as_ref()
            .map(|(level, lines)| ("contour.csv", lines.len(), *level));
        files.push(("plot.gp".into(), output::gnuplot_script("grid.csv", c)));
    }
    output::write_all(&dir, &files)?;
    println!(
        "{} simulations in {runtime:.2}s; mean consensus probability {:.4}; outputs in {}",
        outcome.simulations,
        outcome.grid.mean_probability(),
        dir.display()
    );
    Ok(0)
}

pub fn cmd_ic_gen(args: IcGenArgs) -> Result<i32, CliError> {
    let raw = generate_ic(args.n, args.d, args.seed)?;
    let s = match (args.x0, args.v0) {
        (Some(x0), Some(v0)) => rescale_ic(&raw, x0, v0)?,
        _ => raw,
    };
    let csv = output::state_csv(&s);
    match args.output {
        Some(path) => std::fs::write(&path, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}
