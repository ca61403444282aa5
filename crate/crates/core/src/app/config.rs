//! Flat `key = value` run configuration and the named presets.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::elliptic::PoissonVariant;
use crate::error::{Error, Result};
use crate::evolve::{Positivity, Scheme, StepperConfig, TimeStep};
use crate::spectral::{Grid, ScalarField};
use crate::state::{critical_profile, gaussian_density, random_solenoidal, taylor_green, DensityField, VelocityField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    Gaussian,
    /// Stationary profile `8 lambda^2/(1 + lambda^2 |x|^2)^2` rescaled to the configured mass.
    Critical,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityKind {
    Zero,
    TaylorGreen,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Physics {
    pub mass: f64,
    pub density: DensityKind,
    pub sigma: f64,
    pub center: (f64, f64),
    pub lambda: f64,
    pub velocity: VelocityKind,
    pub u_amplitude: f64,
    pub u_energy: f64,
    pub u_band: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub cadence: f64,
    pub series_path: Option<PathBuf>,
    /// Write a snapshot at every k-th sample; 0 disables snapshots.
    pub snapshot_every: usize,
    pub snapshot_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub length: f64,
    pub physics: Physics,
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub output: Output,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 128,
            length: 40.0,
            physics: Physics {
                mass: 4.0 * PI,
                density: DensityKind::Gaussian,
                sigma: 1.0,
                center: (0.0, 0.0),
                lambda: 1.0,
                velocity: VelocityKind::Zero,
                u_amplitude: 1.0,
                u_energy: 0.5,
                u_band: 10,
            },
            stepper: StepperConfig::default(),
            t_end: 0.5,
            output: Output { cadence: 0.05, series_path: None, snapshot_every: 0, snapshot_dir: None },
            seed: 0,
        }
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(line, format!("`{key}` expects a number, got `{v}`")))
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

/// Splits a config text into `(line, key, value)` triples, dropping comments and blanks.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(i + 1, format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(bad(i + 1, "empty key"));
        }
        if out.iter().any(|(_, prev, _): &(usize, String, String)| prev == k) {
            return Err(bad(i + 1, format!("duplicate key `{k}`")));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Parses a config text. The base is the `preset` argument, else a
    /// `preset = name` line in the text, else the defaults; every other key
    /// overrides the base.
    pub fn parse(text: &str, preset: Option<&str>) -> Result<Self> {
        let items = entries(text)?;
        let named = items.iter().find(|(_, k, _)| k == "preset").map(|(_, _, v)| v.as_str());
        let mut cfg = match preset.or(named) {
            Some(name) => preset_config(name)?,
            None => RunConfig::default(),
        };
        for (line, key, value) in &items {
            cfg.set(*line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let p = &mut self.physics;
        let s = &mut self.stepper;
        let o = &mut self.output;
        match key {
            "preset" => {}
            "grid.N" => self.n = num(line, key, v)?,
            "grid.L" => self.length = num(line, key, v)?,
            "physics.M" => p.mass = num(line, key, v)?,
            "physics.init_n" => {
                p.density = match v {
                    "gaussian" => DensityKind::Gaussian,
                    "critical" => DensityKind::Critical,
                    "zero" => DensityKind::Zero,
                    _ => return Err(bad(line, format!("unknown density generator `{v}`"))),
                }
            }
            "physics.sigma" => p.sigma = num(line, key, v)?,
            "physics.center_x" => p.center.0 = num(line, key, v)?,
            "physics.center_y" => p.center.1 = num(line, key, v)?,
            "physics.lambda" => p.lambda = num(line, key, v)?,
            "physics.init_u" => {
                p.velocity = match v {
                    "zero" => VelocityKind::Zero,
                    "taylor_green" => VelocityKind::TaylorGreen,
                    "random" => VelocityKind::Random,
                    _ => return Err(bad(line, format!("unknown velocity generator `{v}`"))),
                }
            }
            "physics.u_amplitude" => p.u_amplitude = num(line, key, v)?,
            "physics.u_energy" => p.u_energy = num(line, key, v)?,
            "physics.u_band" => p.u_band = num(line, key, v)?,
            "physics.poisson" => {
                s.poisson = match v {
                    "periodic" => PoissonVariant::Periodic,
                    "freespace" => PoissonVariant::default(),
                    _ => return Err(bad(line, format!("unknown poisson variant `{v}`"))),
                }
            }
            "physics.pad" => match s.poisson {
                PoissonVariant::FreeSpace { .. } => s.poisson = PoissonVariant::FreeSpace { pad: num(line, key, v)? },
                PoissonVariant::Periodic => return Err(bad(line, "`physics.pad` needs `physics.poisson = freespace`")),
            },
            "physics.chemotaxis" => {
                s.chemotaxis = v.parse().map_err(|_| bad(line, format!("`{key}` expects true or false, got `{v}`")))?
            }
            "stepper.scheme" => {
                s.scheme = match v {
                    "etdrk2" => Scheme::Etdrk2,
                    "imex_euler" => Scheme::ImexEuler,
                    _ => return Err(bad(line, format!("unknown scheme `{v}`"))),
                }
            }
            "stepper.dt" => s.dt = if v == "auto" { TimeStep::Auto } else { TimeStep::Fixed(num(line, key, v)?) },
            "stepper.dt_max" => s.dt_max = num(line, key, v)?,
            "stepper.cfl_safety" => s.cfl_safety = num(line, key, v)?,
            "stepper.positivity" => {
                s.positivity = match v {
                    "off" => Positivity::Off,
                    "clip_report" => Positivity::ClipReport,
                    _ => return Err(bad(line, format!("unknown positivity mode `{v}`"))),
                }
            }
            "stepper.resolution_threshold" => {
                s.resolution_threshold = if v == "off" { None } else { Some(num(line, key, v)?) }
            }
            "stepper.t_end" => self.t_end = num(line, key, v)?,
            "output.cadence" => o.cadence = num(line, key, v)?,
            "output.series_path" => o.series_path = path(v),
            "output.snapshot_every" => o.snapshot_every = num(line, key, v)?,
            "output.snapshot_dir" => o.snapshot_dir = path(v),
            "seed" => self.seed = num(line, key, v)?,
            _ => return Err(bad(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfgerr = |m: String| Err(Error::Config(m));
        self.grid()?;
        self.stepper.validate()?;
        let p = &self.physics;
        if !(p.mass >= 0.0 && p.mass.is_finite()) {
            return cfgerr(format!("physics.M must be >= 0, got {}", p.mass));
        }
        if p.density == DensityKind::Gaussian && !(p.sigma > 0.0) {
            return cfgerr(format!("physics.sigma must be positive, got {}", p.sigma));
        }
        if p.density == DensityKind::Critical && !(p.lambda > 0.0) {
            return cfgerr(format!("physics.lambda must be positive, got {}", p.lambda));
        }
        if p.velocity == VelocityKind::Random && (p.u_band == 0 || !(p.u_energy >= 0.0)) {
            return cfgerr("random velocity needs u_band >= 1 and u_energy >= 0".into());
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return cfgerr(format!("stepper.t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.output.cadence > 0.0) {
            return cfgerr(format!("output.cadence must be positive, got {}", self.output.cadence));
        }
        if self.output.snapshot_every > 0 && self.output.snapshot_dir.is_none() {
            return cfgerr("output.snapshot_every needs output.snapshot_dir".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length)
    }

    pub fn initial_density(&self, g: &Grid) -> Result<DensityField> {
        let p = &self.physics;
        match p.density {
            DensityKind::Gaussian => gaussian_density(p.mass, p.sigma, p.center, g),
            DensityKind::Critical => {
                let base = critical_profile(p.lambda, g)?.into_field();
                DensityField::new(base.scaled(p.mass / (8.0 * PI)))
            }
            DensityKind::Zero => Ok(DensityField::new(ScalarField::zeros(g))?),
        }
    }

    pub fn initial_velocity(&self, g: &Grid) -> Result<VelocityField> {
        let p = &self.physics;
        match p.velocity {
            VelocityKind::Zero => Ok(VelocityField::zeros(g)),
            VelocityKind::TaylorGreen => Ok(taylor_green(p.u_amplitude, g)),
            VelocityKind::Random => random_solenoidal(p.u_energy, self.seed, p.u_band, g),
        }
    }

    /// Full config text; parsing it back gives an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.physics;
        let s = &self.stepper;
        let o = &self.output;
        let mut t = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(t, "{k} = {v}");
        };
        kv("grid.N", self.n.to_string());
        kv("grid.L", self.length.to_string());
        kv("physics.M", p.mass.to_string());
        kv(
            "physics.init_n",
            match p.density {
                DensityKind::Gaussian => "gaussian",
                DensityKind::Critical => "critical",
                DensityKind::Zero => "zero",
            }
            .into(),
        );
        kv("physics.sigma", p.sigma.to_string());
        kv("physics.center_x", p.center.0.to_string());
        kv("physics.center_y", p.center.1.to_string());
        kv("physics.lambda", p.lambda.to_string());
        kv(
            "physics.init_u",
            match p.velocity {
                VelocityKind::Zero => "zero",
                VelocityKind::TaylorGreen => "taylor_green",
                VelocityKind::Random => "random",
            }
            .into(),
        );
        kv("physics.u_amplitude", p.u_amplitude.to_string());
        kv("physics.u_energy", p.u_energy.to_string());
        kv("physics.u_band", p.u_band.to_string());
        kv("physics.poisson", s.poisson.name().into());
        if let PoissonVariant::FreeSpace { pad } = s.poisson {
            kv("physics.pad", pad.to_string());
        }
        kv("physics.chemotaxis", s.chemotaxis.to_string());
        kv(
            "stepper.scheme",
            match s.scheme {
                Scheme::Etdrk2 => "etdrk2",
                Scheme::ImexEuler => "imex_euler",
            }
            .into(),
        );
        kv(
            "stepper.dt",
            match s.dt {
                TimeStep::Auto => "auto".into(),
                TimeStep::Fixed(dt) => dt.to_string(),
            },
        );
        kv("stepper.dt_max", s.dt_max.to_string());
        kv("stepper.cfl_safety", s.cfl_safety.to_string());
        kv(
            "stepper.positivity",
            match s.positivity {
                Positivity::Off => "off",
                Positivity::ClipReport => "clip_report",
            }
            .into(),
        );
        kv("stepper.resolution_threshold", s.resolution_threshold.map_or("off".into(), |v| v.to_string()));
        kv("stepper.t_end", self.t_end.to_string());
        kv("output.cadence", o.cadence.to_string());
        let show = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        kv("output.series_path", show(&o.series_path));
        kv("output.snapshot_every", o.snapshot_every.to_string());
        kv("output.snapshot_dir", show(&o.snapshot_dir));
        kv("seed", self.seed.to_string());
        t
    }
}

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> RunConfig,
}

impl Preset {
    pub fn config(&self) -> RunConfig {
        (self.build)()
    }
}

fn subcritical_radial() -> RunConfig {
    RunConfig::default()
}

fn subcritical_coupled() -> RunConfig {
    let mut c = RunConfig::default();
    c.physics.sigma = 2.0;
    c.physics.velocity = VelocityKind::Random;
    c.physics.u_energy = 0.5;
    c.physics.u_band = 10;
    c.seed = 3;
    c.stepper.dt = TimeStep::Fixed(0.01);
    c.output.cadence = 0.01;
    c
}

fn critical_radial() -> RunConfig {
    let mut c = RunConfig { n: 512, length: 80.0, t_end: 1.0, ..Default::default() };
    c.physics.mass = 8.0 * PI;
    c.physics.density = DensityKind::Critical;
    c
}

fn critical_coupled() -> RunConfig {
    let mut c = RunConfig { t_end: 1.0, ..Default::default() };
    c.physics.mass = 8.0 * PI;
    c.physics.sigma = 2.0;
    c.physics.velocity = VelocityKind::Random;
    c.seed = 1;
    c.stepper.poisson = PoissonVariant::Periodic;
    c
}

fn supercritical_radial() -> RunConfig {
    let mut c = RunConfig { n: 256, t_end: 1.0, ..Default::default() };
    c.physics.mass = 10.0 * PI;
    c.stepper.resolution_threshold = Some(1e-6);
    c.output.cadence = 0.01;
    c
}

fn heat_sanity() -> RunConfig {
    let mut c = RunConfig { n: 256, t_end: 10.0, ..Default::default() };
    c.physics.mass = 1.0;
    c.physics.sigma = 0.1;
    c.stepper.chemotaxis = false;
    c.stepper.poisson = PoissonVariant::Periodic;
    c.stepper.dt = TimeStep::Fixed(0.05);
    c.output.cadence = 0.5;
    c
}

fn ns_sanity() -> RunConfig {
    let mut c = RunConfig { n: 32, length: 2.0 * PI, t_end: 1.0, ..Default::default() };
    c.physics.mass = 0.0;
    c.physics.density = DensityKind::Zero;
    c.physics.velocity = VelocityKind::TaylorGreen;
    c.stepper.poisson = PoissonVariant::Periodic;
    c.stepper.dt = TimeStep::Fixed(0.01);
    c.output.cadence = 0.1;
    c
}

fn small_data() -> RunConfig {
    let mut c = RunConfig { n: 64, length: 20.0, t_end: 0.01, ..Default::default() };
    c.physics.mass = 0.1 * 8.0 * PI;
    c.physics.velocity = VelocityKind::Random;
    c.physics.u_energy = 0.01;
    c.physics.u_band = 6;
    c.seed = 11;
    c.stepper.poisson = PoissonVariant::Periodic;
    c.stepper.dt = TimeStep::Fixed(0.01 / 256.0);
    c.output.cadence = 0.0025;
    c
}

pub static PRESETS: &[Preset] = &[
    Preset { name: "subcritical_radial", summary: "M = 4pi Gaussian at rest, free-space c; m2 grows at 8pi", build: subcritical_radial },
    Preset {
        name: "subcritical_coupled",
        summary: "M = 4pi wide Gaussian in a random solenoidal flow; free-energy identity run",
        build: subcritical_coupled,
    },
    Preset { name: "critical_radial", summary: "M = 8pi stationary profile at rest on a wide box; m2 conserved", build: critical_radial },
    Preset { name: "critical_coupled", summary: "M = 8pi Gaussian in a random solenoidal flow, periodic c", build: critical_coupled },
    Preset {
        name: "supercritical_radial",
        summary: "M = 10pi Gaussian at rest; aggregates until the resolution monitor stops it",
        build: supercritical_radial,
    },
    Preset { name: "heat_sanity", summary: "narrow unit-mass Gaussian, chemotaxis off: pure heat flow", build: heat_sanity },
    Preset { name: "ns_sanity", summary: "no cells, Taylor-Green vortex: pure Navier-Stokes decay", build: ns_sanity },
    Preset { name: "small_data", summary: "M = 0.8pi Gaussian with a weak random flow; Picard oracle data", build: small_data },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_config(name: &str) -> Result<RunConfig> {
    preset(name).map(Preset::config).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset `{name}` (known: {})", names.join(", ")))
    })
}
