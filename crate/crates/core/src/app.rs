//! Command-line front end: config loading, runs, the Picard oracle and inequality sweeps.

mod config;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{preset, preset_config, DensityKind, Output, Physics, Preset, RunConfig, VelocityKind, PRESETS};
pub use output::{read_snapshot, snapshot_path, write_snapshot, RunRecorder, SeriesWriter};

use crate::elliptic::PoissonVariant;
use crate::error::{Error, Result};
use crate::evolve::{Stepper, TimeStep};
use crate::inequalities::{reports_to_csv, run_suite, Suite};
use crate::mild::{picard_iterate, PicardConfig};
use crate::spectral::{ScalarField, VectorField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Stepper steps per horizon used as the oracle's reference run.
pub const ORACLE_STEPS: usize = 256;

#[derive(Parser, Debug)]
#[command(name = "pksns", version, about = "Keller-Segel-Navier-Stokes simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a configuration and write the diagnostics series and snapshots.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Compare Picard iterates of the mild formulation with the stepper.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Horizon; defaults to the configured end time.
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long, default_value_t = crate::mild::DEFAULT_ITERATIONS)]
        iters: usize,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded sweeps of the functional inequalities.
    Check {
        /// loghls, nagai, entropy, bm or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; defaults to check_<suite>_<seed>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the built-in presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    /// One line per preset.
    List,
    /// Print a preset as a config file.
    Show { name: String },
}

/// Exit code for an error: numerical aborts 2, I/O 3, everything else 1.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else if matches!(e, Error::Io(_)) {
        EXIT_IO
    } else {
        EXIT_USAGE
    }
}

/// Builds the global worker pool from `PKSNS_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PKSNS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("PKSNS_THREADS must be a positive integer, got `{v}`")))?;
    // a pool that already exists (tests, repeated calls) is left as is
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let result = configure_threads().and_then(|_| dispatch(parsed.command, &mut stdout.lock()));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Run { config, preset } => {
            let cfg = load_config(config.as_deref(), preset.as_deref())?;
            let summary = run(&cfg)?;
            write!(out, "{summary}")?;
        }
        Command::Oracle { config, preset, horizon, iters, out: path } => {
            let cfg = load_config(config.as_deref(), preset.as_deref())?;
            let report = oracle(&cfg, horizon.unwrap_or(cfg.t_end), iters)?;
            let text = report.to_string();
            if let Some(p) = path {
                std::fs::write(p, &text)?;
            }
            write!(out, "{text}")?;
        }
        Command::Check { suite, count, seed, out: path } => {
            let suite: Suite = suite.parse()?;
            let reports = run_suite(suite, count, seed)?;
            let path = path.unwrap_or_else(|| PathBuf::from(format!("check_{suite}_{seed}.csv")));
            std::fs::write(&path, reports_to_csv(&reports))?;
            let failures = reports.iter().filter(|r| !r.pass).count();
            writeln!(out, "suite={suite} instances={count} checks={} failures={failures}", reports.len())?;
            writeln!(out, "report={}", path.display())?;
        }
        Command::Preset { action: PresetAction::List } => {
            for p in PRESETS {
                writeln!(out, "{:<22}{}", p.name, p.summary)?;
            }
        }
        Command::Preset { action: PresetAction::Show { name } } => {
            write!(out, "{}", preset_config(&name)?.to_text())?;
        }
    }
    Ok(())
}

/// Reads and parses a config file on top of `preset`; one of the two is required.
pub fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<RunConfig> {
    match (path, preset) {
        (None, None) => Err(Error::Config("need --config or --preset".into())),
        (None, Some(name)) => preset_config(name),
        (Some(p), _) => RunConfig::parse(&std::fs::read_to_string(p)?, preset),
    }
}

/// Outcome of a completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub t: f64,
    pub steps: usize,
    pub rows: usize,
    pub mass0: f64,
    pub mass: f64,
    pub min_n: f64,
    pub clipped_mass: f64,
    pub max_tail_fraction: f64,
    pub snapshots: Vec<PathBuf>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let drift = if self.mass0 > 0.0 { (self.mass - self.mass0).abs() / self.mass0 } else { (self.mass - self.mass0).abs() };
        writeln!(f, "status=ok")?;
        writeln!(f, "t={}", self.t)?;
        writeln!(f, "steps={}", self.steps)?;
        writeln!(f, "rows={}", self.rows)?;
        writeln!(f, "mass_drift={drift:.3e}")?;
        writeln!(f, "min_n={:.6e}", self.min_n)?;
        writeln!(f, "clipped_mass={:.3e}", self.clipped_mass)?;
        writeln!(f, "max_tail_fraction={:.3e}", self.max_tail_fraction)?;
        writeln!(f, "snapshots={}", self.snapshots.len())
    }
}

/// Integrates `cfg`, streaming rows and snapshots to the configured paths.
///
/// On a numerical abort the rows written so far stay on disk.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut stepper = Stepper::new(&grid, cfg.stepper.clone())?;
    let s0 = stepper.state(0.0, cfg.initial_density(&grid)?, cfg.initial_velocity(&grid)?)?;
    let o = &cfg.output;
    let mut rec = RunRecorder::new(o.series_path.as_deref(), o.snapshot_dir.as_deref(), o.snapshot_every)?;
    match stepper.run(&s0, cfg.t_end, o.cadence, &mut rec) {
        Ok(done) => Ok(RunSummary {
            t: done.state.t,
            steps: done.stats.steps,
            rows: done.series.len(),
            mass0: s0.n().field().integral(),
            mass: done.state.n().field().integral(),
            min_n: done.stats.min_n,
            clipped_mass: done.stats.clipped_mass,
            max_tail_fraction: done.stats.max_tail_fraction,
            snapshots: rec.written,
        }),
        Err(failure) => {
            log::error!("run stopped after {} steps with {} rows recorded", failure.stats.steps, failure.series.len());
            Err(failure.error)
        }
    }
}

/// Picard iterates against a fine stepper run at the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub horizon: f64,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub heat_norm: f64,
    pub stepper_dt: f64,
    pub rel_l2_n: f64,
    pub rel_l2_u: f64,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",");
        writeln!(f, "T={}", self.horizon)?;
        writeln!(f, "iterations={}", self.iterations)?;
        writeln!(f, "heat_norm={:.6e}", self.heat_norm)?;
        writeln!(f, "distances={}", list(&self.distances))?;
        writeln!(f, "ratios={}", list(&self.ratios))?;
        writeln!(f, "stepper_dt={:e}", self.stepper_dt)?;
        writeln!(f, "rel_l2_n={:.6e}", self.rel_l2_n)?;
        writeln!(f, "rel_l2_u={:.6e}", self.rel_l2_u)
    }
}

fn relative_l2(a: &[&ScalarField], b: &[&ScalarField]) -> f64 {
    let (mut diff, mut norm) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let d = x.sub(y);
        diff += d.dot(&d);
        norm += y.dot(y);
    }
    if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    }
}

/// Runs the mild-solution oracle on the configured initial data.
///
/// The mild formulation is periodic, so the reference stepper uses the
/// periodic Poisson solve and a fixed step of `horizon / ORACLE_STEPS`.
pub fn oracle(cfg: &RunConfig, horizon: f64, iterations: usize) -> Result<OracleReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("oracle horizon must be positive, got {horizon}")));
    }
    if iterations == 0 {
        return Err(Error::Config("oracle needs at least one iteration".into()));
    }
    let grid = cfg.grid()?;
    let n0 = cfg.initial_density(&grid)?.into_field();
    let u0 = cfg.initial_velocity(&grid)?.into_field();
    let picard = picard_iterate(&n0, &u0, horizon, &PicardConfig { iterations, ..Default::default() })?;

    let dt = horizon / ORACLE_STEPS as f64;
    let mut sc = cfg.stepper.clone();
    sc.dt = TimeStep::Fixed(dt);
    sc.poisson = PoissonVariant::Periodic;
    sc.chemotaxis = true;
    sc.resolution_threshold = None;
    let mut stepper = Stepper::new(&grid, sc)?;
    let s0 = stepper.state(0.0, cfg.initial_density(&grid)?, cfg.initial_velocity(&grid)?)?;
    let done = stepper.run(&s0, horizon, horizon, &mut ()).map_err(|f| f.error)?;

    let pn: &ScalarField = picard.trajectory.final_density();
    let pu: &VectorField = picard.trajectory.final_velocity();
    let su = done.state.u().field();
    Ok(OracleReport {
        horizon,
        iterations,
        ratios: picard.contraction_ratios(),
        distances: picard.distances,
        heat_norm: picard.heat_norm,
        stepper_dt: dt,
        rel_l2_n: relative_l2(&[pn], &[done.state.n().field()]),
        rel_l2_u: relative_l2(&[pu.first(), pu.second()], &[su.first(), su.second()]),
    })
}
