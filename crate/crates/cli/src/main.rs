//! `xyres`: sweeps, dynamics traces and self-checks for driven XY chains.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid
//! configuration, 3 numerical failure.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use xy_resonance::evolve::{Freeze, PropagationSettings};
use xy_resonance::experiments::{dynamics_trace, j0_sweep, sweep, Axis, Engine, SweepOptions, SweepPoint};
use xy_resonance::model::{duality_transform, PureState};
use xy_resonance::verify::{run_checks, VerifyOptions};
use xy_resonance::{ChainConfig, Error};

use config::{parse_grid, RunFile};
use output::{write_dynamics, write_sweep, RunManifest, SettingsRecord};

/// A run that did not succeed, with its exit code.
#[derive(Debug)]
pub enum Failure {
    Verify(String),
    Invalid(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verify(m) | Failure::Invalid(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Invalid(m),
            e @ (Error::Capacity { .. } | Error::Input(_)) => Failure::Invalid(e.to_string()),
            e @ (Error::Integration { .. } | Error::Numerical(_)) => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "xyres", version, about = "End-to-end entanglement in driven anisotropic XY chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximum concurrence in the observation window across a parameter grid.
    Sweep(SweepArgs),
    /// Time trace of concurrence, FEF, norm and parity.
    Dynamics(DynamicsArgs),
    /// Cross-check the engines against each other.
    Verify(VerifyArgs),
}

/// Physical parameters are in units of B.
#[derive(Args, Debug, Clone, Default)]
struct ChainArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    j0: Option<f64>,
    #[arg(long)]
    j1: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Divide output time columns by this field strength.
    #[arg(long)]
    b: Option<f64>,
    /// auto, dense, rwa or fermion.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent points (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Flat key = value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sample_dt: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// omega, j0 or length.
    #[arg(long)]
    axis: Option<String>,
    /// start:stop:count.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug)]
struct DynamicsArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Defaults to the observation window 4N / max(J0, J1).
    #[arg(long)]
    t_end: Option<f64>,
    /// none, off or shift:<omega>.
    #[arg(long)]
    freeze: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    quick: bool,
    /// Replace the odd-site flip by a deliberately wrong map.
    #[arg(long, hide = true)]
    inject_duality_sign_error: bool,
}

/// Everything a run needs after merging flags and file.
struct Resolved {
    config: ChainConfig,
    n_given: bool,
    engine: Option<Engine>,
    settings: PropagationSettings,
    out: PathBuf,
    workers: usize,
    b: f64,
    file: RunFile,
}

fn resolve(args: &ChainArgs) -> Result<Resolved, Failure> {
    let file = match &args.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let n = file.pick(args.n, "n")?;
    let mut config = ChainConfig::new(n.unwrap_or(2));
    if let Some(g) = file.pick(args.gamma, "gamma")? {
        config = config.with_gamma(g);
    }
    if let Some(v) = file.pick(args.j0, "j0")? {
        config = config.with_j0(v);
    }
    if let Some(v) = file.pick(args.j1, "j1")? {
        config = config.with_j1(v);
    }
    if let Some(v) = file.pick(args.omega, "omega")? {
        config = config.with_omega(v);
    }
    config.validate()?;

    let engine = match file.pick(args.engine.clone(), "engine")?.as_deref() {
        None | Some("auto") => None,
        Some(other) => Some(other.parse::<Engine>()?),
    };
    let mut settings = PropagationSettings::default();
    if let Some(dt) = file.pick(args.sample_dt, "sample-dt")? {
        settings.sample_dt = dt;
    }
    if let Some(tol) = file.pick(args.rel_tol, "rel-tol")? {
        settings.rel_tol = tol;
    }
    settings.validate()?;
    let b = file.pick(args.b, "b")?.unwrap_or(1.0);
    if !(b.is_finite() && b > 0.0) {
        return Err(Failure::Invalid(format!("b must be positive, got {b}")));
    }
    Ok(Resolved {
        config,
        n_given: n.is_some(),
        engine,
        settings,
        out: file.pick(args.out.clone(), "out")?.unwrap_or_else(|| PathBuf::from("results")),
        workers: file.pick(args.workers, "workers")?.unwrap_or(0),
        b,
        file,
    })
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Invalid(format!("cannot create {}: {e}", dir.display())))
}

fn manifest(command: &str, r: &Resolved, engine: String, started: Instant, outputs: Vec<PathBuf>) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config: r.config.clone(),
        settings: SettingsRecord::from(&r.settings),
        engine,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs,
        b: r.b,
        workers: r.workers,
        axis: None,
        grid: None,
        t_end: None,
        freeze: None,
        warnings: Vec::new(),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let r = resolve(&args.chain)?;
    let axis: Axis = r
        .file
        .pick(args.axis.clone(), "axis")?
        .ok_or_else(|| Failure::Invalid("--axis is required (omega, j0 or length)".into()))?
        .parse()?;
    if axis != Axis::Length && !r.n_given {
        return Err(Failure::Invalid(format!("--n is required for --axis {}", axis.name())));
    }
    let grid = match r.file.pick(args.grid.clone(), "grid")? {
        Some(g) => parse_grid(&g)?,
        None => match axis {
            Axis::Omega => xy_resonance::experiments::default_omega_grid(1.0),
            _ => return Err(Failure::Invalid(format!("--grid is required for --axis {}", axis.name()))),
        },
    };
    if axis == Axis::J0 || axis == Axis::Length {
        r.config.clone().with_j0(grid[0]).validate()?;
    }
    let options = SweepOptions {
        settings: PropagationSettings { execution: xy_resonance::Execution::Sequential, ..r.settings.clone() },
        workers: r.workers,
        ..SweepOptions::default()
    };

    let points: Vec<SweepPoint> = match (axis, r.engine) {
        (Axis::J0, None) => {
            let both = j0_sweep(&r.config, &grid, &options)?;
            both.exact.points.into_iter().chain(both.rwa.points).collect()
        }
        (Axis::Omega, Some(Engine::Fermion)) => {
            return Err(Failure::Invalid("the fermion engine has no drive frequency to sweep".into()));
        }
        (_, engine) => sweep(&r.config, axis, &grid, engine, &options)?.points,
    };

    prepare_out(&r.out)?;
    let csv_path = r.out.join("sweep.csv");
    write_sweep(&csv_path, &points, r.b)?;
    let mut engines: Vec<&str> = points.iter().map(|p| p.engine.label()).collect();
    engines.dedup();
    let mut m = manifest("sweep", &r, engines.join("+"), started, vec![csv_path]);
    m.axis = Some(axis.name().to_string());
    m.grid = Some(grid);

    let mut numerical = Vec::new();
    for p in points.iter().filter(|p| p.is_flagged()) {
        let err = p.error.clone().expect("flagged point carries its error");
        let line = format!("{} = {}: {err}", axis.name(), p.axis_value);
        if matches!(err, Error::Integration { .. } | Error::Numerical(_)) {
            numerical.push(line.clone());
        }
        eprintln!("warning: {line}");
        m.warnings.push(line);
    }
    let manifest_path = r.out.join("manifest.json");
    m.outputs.push(manifest_path.clone());
    m.write(&manifest_path)?;
    if !numerical.is_empty() {
        return Err(Failure::Numerical(format!("numerical failure at {} point(s): {}", numerical.len(), numerical.join("; "))));
    }
    Ok(())
}

fn parse_freeze(text: &str) -> Result<Option<Freeze>, Failure> {
    match text {
        "none" => Ok(None),
        "off" => Ok(Some(Freeze::SwitchOff)),
        other => match other.strip_prefix("shift:").map(str::parse::<f64>) {
            Some(Ok(w)) if w > 0.0 && w.is_finite() => Ok(Some(Freeze::shift(w))),
            _ => Err(Failure::Invalid(format!("--freeze must be none, off or shift:<omega>, got '{other}'"))),
        },
    }
}

fn cmd_dynamics(args: &DynamicsArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let r = resolve(&args.chain)?;
    if !r.n_given {
        return Err(Failure::Invalid("--n is required".into()));
    }
    r.config.validate_dynamic()?;
    let engine = r.engine.unwrap_or(Engine::Dense);
    if engine == Engine::Fermion && r.config.j0 != 0.0 {
        return Err(Failure::Invalid("fermion engine requires J0=0".into()));
    }
    let freeze_text = r.file.pick(args.freeze.clone(), "freeze")?.unwrap_or_else(|| "none".into());
    let freeze = parse_freeze(&freeze_text)?;
    let t_end = match r.file.pick(args.t_end, "t-end")? {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Failure::Invalid(format!("--t-end must be positive, got {t}"))),
        None => r.config.window()?,
    };
    let series = xy_resonance::parallel::with_workers(r.workers, || {
        dynamics_trace(&r.config, engine, freeze, &r.settings, t_end)
    })?;

    prepare_out(&r.out)?;
    let csv_path = r.out.join("dynamics.csv");
    write_dynamics(&csv_path, &series, r.b)?;
    let manifest_path = r.out.join("manifest.json");
    let mut m = manifest("dynamics", &r, engine.label().to_string(), started, vec![csv_path, manifest_path.clone()]);
    m.t_end = Some(t_end);
    m.freeze = Some(freeze_text);
    m.write(&manifest_path)
}

/// Odd-site flip followed by a stray sign on every state with spin 1 up.
fn broken_duality(psi: &PureState) -> PureState {
    let mut s = duality_transform(psi);
    for (i, a) in s.amplitudes_mut().iter_mut().enumerate() {
        if i & 1 == 1 {
            *a = -*a;
        }
    }
    s
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let mut options = VerifyOptions { quick: args.quick, ..VerifyOptions::default() };
    if args.inject_duality_sign_error {
        options.duality_map = broken_duality;
    }
    let report = run_checks(&options);
    print!("{}", report.table());
    let failed: Vec<&str> = report.failed().iter().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Dynamics(a) => cmd_dynamics(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
