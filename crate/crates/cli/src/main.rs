//! Experiment runner for giant-atom waveguide simulations.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O failure.

mod output;
mod run;
mod scan;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use giant_atom::presets;
use serde::Serialize;

use crate::output::OutDir;
use crate::scan::{IntRange, Range, ScanSpec};
use crate::spec::{ConfigFile, ExperimentSpec, Kind, Overrides};

/// Invalid input: bad config file, unknown preset, inconsistent options.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// A computation finished without a trustworthy result.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NumericError(pub String);

#[derive(Parser)]
#[command(name = "giant-atom", version, about = "Simulate giant atoms in front of a mirror and export figure-ready data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its data plus a manifest.
    Run(RunArgs),
    /// Classify bound states over a grid of parameters.
    Scan(ScanArgs),
    /// List the built-in presets.
    Presets {
        /// Print the table as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// dynamics, ensemble, field-map, snapshot, poles, multi-atom or preset;
    /// a preset name is shorthand for `preset --preset NAME`.
    target: String,
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with the system parameters (frequencies in units of pi).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `out/<preset or kind>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps_per_tau0: Option<usize>,
    /// Run length as `Gamma t`.
    #[arg(long)]
    horizon_gamma_t: Option<f64>,
    #[arg(long)]
    ntraj: Option<usize>,
    /// Write every `stride`-th time step.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct ScanArgs {
    /// Number of coupling points, `N` or `LO:HI`.
    #[arg(long, default_value = "3")]
    n: IntRange,
    /// `omega0 tau0 / pi`, `VALUE` or `LO:HI:COUNT`.
    #[arg(long)]
    omega_pi: Range,
    /// `Gamma tau0 / pi`, `VALUE` or `LO:HI:COUNT`.
    #[arg(long)]
    gamma_pi: Range,
    #[arg(long, default_value_t = 1.0)]
    reflectivity: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_ext_ratio: f64,
    #[arg(long, default_value_t = 256)]
    chunk_size: usize,
    #[arg(long, default_value = "out/scan")]
    out: PathBuf,
    /// Reuse chunks left by an earlier run of the same scan.
    #[arg(long)]
    resume: bool,
}

fn kind_of(name: &str) -> Option<Kind> {
    Some(match name {
        "dynamics" => Kind::Dynamics,
        "ensemble" => Kind::Ensemble,
        "field-map" => Kind::FieldMap,
        "snapshot" => Kind::Snapshot,
        "poles" => Kind::Poles,
        "multi-atom" => Kind::MultiAtom,
        _ => return None,
    })
}

fn run_experiment(args: RunArgs) -> Result<()> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let (kind, preset_name) = match (kind_of(&args.target), args.target.as_str()) {
        (Some(kind), _) => (Some(kind), args.preset.clone()),
        (None, "preset") => match &args.preset {
            Some(name) => (None, Some(name.clone())),
            None => anyhow::bail!(ConfigError("`run preset` needs --preset NAME".into())),
        },
        (None, name) => {
            if args.preset.is_some() {
                anyhow::bail!(ConfigError(format!("{name:?} is not an experiment kind")));
            }
            (None, Some(name.to_string()))
        }
    };
    let preset = preset_name.as_deref().map(spec::lookup_preset).transpose()?;
    let file = args.config.as_deref().map(ConfigFile::load).transpose()?;
    let overrides = Overrides {
        seed: args.seed,
        steps_per_tau0: args.steps_per_tau0,
        horizon_gamma_t: args.horizon_gamma_t,
        n_traj: args.ntraj,
        stride: args.stride,
    };
    let spec = ExperimentSpec::resolve(kind, preset.as_ref(), file, &overrides)?;
    let default_out = PathBuf::from("out").join(preset_name.clone().unwrap_or_else(|| args.target.clone()));
    let mut out = OutDir::create(&args.out.unwrap_or(default_out))?;

    log::info!("running {:?} into {}", spec.kind, out.root().display());
    let line = run::execute(&spec, &mut out)?;
    let seed = matches!(spec.kind, Kind::Ensemble).then_some(spec.seed);
    let root = out.root().to_path_buf();
    out.finish("run", spec.preset.as_deref(), seed, &spec, started, clock.elapsed())?;
    println!("{line}");
    println!("wrote {}", root.display());
    Ok(())
}

fn run_scan(args: ScanArgs) -> Result<()> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let spec = ScanSpec {
        n_points: args.n,
        omega0_tau0_pi: args.omega_pi,
        gamma_tau0_pi: args.gamma_pi,
        reflectivity: args.reflectivity,
        gamma_ext_ratio: args.gamma_ext_ratio,
        chunk_size: args.chunk_size,
    };
    let mut out = OutDir::create(&args.out)?;
    let report = scan::run(&spec, &mut out, args.resume)?;
    let table = out.path("scan.csv");
    out.finish("scan", None, None, &spec, started, clock.elapsed())?;
    println!(
        "classified {} points in {} chunks ({} reused)",
        report.points, report.chunks, report.reused
    );
    println!("wrote {}", table.display());
    Ok(())
}

#[derive(Serialize)]
struct PresetRow<'a> {
    name: &'a str,
    kind: presets::PresetKind,
    n_points: usize,
    omega0_tau0_pi: f64,
    gamma_tau0_pi: f64,
    reflectivity: f64,
    gamma_ext_ratio: f64,
    dephasing_ratio: f64,
    horizon_gamma_t: f64,
    summary: &'a str,
}

fn list_presets(json: bool) -> Result<()> {
    let all = presets::all();
    let rows: Vec<PresetRow> = all
        .iter()
        .map(|p| PresetRow {
            name: &p.name,
            kind: p.kind,
            n_points: p.config.n_points(),
            omega0_tau0_pi: p.config.omega0_tau0() / std::f64::consts::PI,
            gamma_tau0_pi: p.config.gamma_tau0() / std::f64::consts::PI,
            reflectivity: p.config.reflectivity(),
            gamma_ext_ratio: p.config.gamma_ext_ratio(),
            dephasing_ratio: p.config.dephasing_ratio(),
            horizon_gamma_t: p.horizon_gamma_t,
            summary: &p.summary,
        })
        .collect();
    if json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    println!("{:<12} {:<9} {:>3} {:>10} {:>9} {:>5} {:>5} {:>5}  summary", "name", "kind", "N", "w0/pi", "G/pi", "R", "ext", "deph");
    for r in rows {
        println!(
            "{:<12} {:<9} {:>3} {:>10.4} {:>9.4} {:>5} {:>5} {:>5}  {}",
            r.name,
            format!("{:?}", r.kind),
            r.n_points,
            r.omega0_tau0_pi,
            r.gamma_tau0_pi,
            r.reflectivity,
            r.gamma_ext_ratio,
            r.dephasing_ratio,
            r.summary
        );
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if cause.is::<NumericError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<giant_atom::Error>() {
            return match e {
                giant_atom::Error::ConditionNotMet(_) => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_experiment(args),
        Command::Scan(args) => run_scan(args),
        Command::Presets { json } => list_presets(json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
