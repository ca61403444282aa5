//! Time integration: exponential (ETDRK2) and IMEX Euler steppers, CFL control,
//! and the cadence-driven run loop.

use rustfft::num_complex::Complex64;

use crate::elliptic::{PoissonSolver, PoissonVariant};
use crate::error::{invalid, Error, Result};
use crate::functionals::{diagnostics, DiagnosticsRow, DiagnosticsSeries};
use crate::spectral::{
    forward_pair, inverse_pair, leray_in_place, spectral_divergence, Grid, ScalarField, SpectralField, VectorField,
};
use crate::state::{DensityField, SimState, VelocityField};

/// Lower bound on the transport speed used by [`cfl_dt`].
pub const CFL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Etdrk2,
    ImexEuler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Positivity {
    Off,
    ClipReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: TimeStep,
    /// Cap on automatic steps.
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub scheme: Scheme,
    pub positivity: Positivity,
    pub poisson: PoissonVariant,
    /// When false, `grad c` is dropped from both equations.
    pub chemotaxis: bool,
    /// Abort once the density's outer-band spectral fraction exceeds this.
    pub resolution_threshold: Option<f64>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: TimeStep::Auto,
            dt_max: 1e-2,
            cfl_safety: 0.5,
            scheme: Scheme::Etdrk2,
            positivity: Positivity::Off,
            poisson: PoissonVariant::default(),
            chemotaxis: true,
            resolution_threshold: None,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(invalid("cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("dt", format!("fixed step must be positive, got {dt}")));
            }
        }
        if !(self.dt_max > 0.0) {
            return Err(invalid("dt_max", format!("must be positive, got {}", self.dt_max)));
        }
        if let Some(t) = self.resolution_threshold {
            if !(t > 0.0) {
                return Err(invalid("resolution_threshold", format!("must be positive, got {t}")));
            }
        }
        self.poisson.validate()
    }
}

/// `exp(z)`, `(exp(z) - 1)/z` and `(exp(z) - 1 - z)/z^2`.
fn phi(z: f64) -> (f64, f64, f64) {
    let e = z.exp();
    if z.abs() < 0.1 {
        // z^j / (j+1)! and z^j / (j+2)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let (mut t1, mut t2) = (1.0, 0.5);
        for j in 0..12 {
            p1 += t1;
            p2 += t2;
            t1 *= z / (j as f64 + 2.0);
            t2 *= z / (j as f64 + 3.0);
        }
        (e, p1, p2)
    } else {
        (e, (e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

struct Propagator {
    dt: f64,
    decay: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

impl Propagator {
    fn new(grid: &Grid, dt: f64) -> Self {
        let len = grid.len();
        let (mut decay, mut phi1, mut phi2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for i in 0..len {
            let (e, p1, p2) = phi(-grid.k_squared(i) * dt);
            decay[i] = e;
            phi1[i] = dt * p1;
            phi2[i] = dt * p2;
        }
        Self { dt, decay, phi1, phi2 }
    }
}

/// Spectral working state.
#[derive(Clone)]
struct Modes {
    n: SpectralField,
    u1: SpectralField,
    u2: SpectralField,
}

impl Modes {
    fn of(state: &SimState) -> Self {
        let n = state.n().field().to_spectral();
        let (u1, u2) = state.u().field().to_spectral();
        Self { n, u1, u2 }
    }

    fn zip(&self, other: &Modes, f: impl Fn(usize, Complex64, Complex64) -> Complex64) -> Modes {
        let go = |a: &SpectralField, b: &SpectralField| {
            let c = a.coeffs().iter().zip(b.coeffs()).enumerate().map(|(i, (&x, &y))| f(i, x, y)).collect();
            SpectralField::from_coeffs(a.grid(), c).expect("same grid")
        };
        Modes { n: go(&self.n, &other.n), u1: go(&self.u1, &other.u1), u2: go(&self.u2, &other.u2) }
    }
}

/// Per-step bookkeeping handed to observers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub index: usize,
    pub t: f64,
    pub dt: f64,
    pub min_n: f64,
    pub clipped_mass: f64,
    pub tail_fraction: f64,
}

/// Hooks invoked by [`Stepper::run`].
pub trait Observer {
    /// Called at every cadence point with the state and its diagnostics row.
    fn sample(&mut self, _state: &SimState, _row: &DiagnosticsRow) -> Result<()> {
        Ok(())
    }

    fn step(&mut self, _report: &StepReport) {}
}

impl Observer for () {}

/// Aggregate statistics of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub min_n: f64,
    pub clipped_mass: f64,
    pub max_tail_fraction: f64,
    pub last_dt: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub state: SimState,
    pub series: DiagnosticsSeries,
    pub stats: RunStats,
}

/// A run that stopped early; the series recorded so far is kept.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub series: DiagnosticsSeries,
    pub stats: RunStats,
    /// Last state that passed the step checks.
    pub last_state: Option<SimState>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} rows recorded)", self.error, self.series.rows.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// Integrator bound to a grid and configuration.
pub struct Stepper {
    grid: Grid,
    cfg: StepperConfig,
    solver: PoissonSolver,
    prop: Option<Propagator>,
}

impl Stepper {
    pub fn new(grid: &Grid, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let solver = PoissonSolver::new(grid, cfg.poisson)?;
        Ok(Self { grid: grid.clone(), cfg, solver, prop: None })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn solver(&self) -> &PoissonSolver {
        &self.solver
    }

    /// Builds a state at time `t` with `c` from this stepper's Poisson variant.
    pub fn state(&self, t: f64, n: DensityField, u: VelocityField) -> Result<SimState> {
        SimState::new(t, n, u, &self.solver)
    }

    /// `cfl_safety * h / max(|u|_inf + |grad c|_inf, floor)`, capped by `dt_max`.
    pub fn cfl_dt(&self, state: &SimState) -> f64 {
        let speed = state.u().field().sup_norm() + if self.cfg.chemotaxis { state.grad_c().sup_norm() } else { 0.0 };
        (self.cfg.cfl_safety * self.grid.spacing() / speed.max(CFL_FLOOR)).min(self.cfg.dt_max)
    }

    fn target_dt(&self, state: &SimState) -> f64 {
        match self.cfg.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto => self.cfl_dt(state),
        }
    }

    /// Nonlinear tendencies with dealiased inputs and outputs.
    fn nonlinear(&self, m: &Modes) -> Result<Modes> {
        let nm = m.n.dealias();
        let a = m.u1.dealias();
        let b = m.u2.dealias();
        let (n, u1) = inverse_pair(&nm, &a);
        let (u2, d11) = inverse_pair(&b, &a.derivative(0));
        let (d12, d21) = inverse_pair(&a.derivative(1), &b.derivative(0));
        let d22 = b.derivative(1).to_real();
        if !n.is_finite() {
            return Err(Error::NonFinite("density".into()));
        }
        if !(u1.is_finite() && u2.is_finite()) {
            return Err(Error::NonFinite("velocity".into()));
        }
        let gc = if self.cfg.chemotaxis {
            let gc = self.solver.gradient_with_spectrum(&n, &nm)?;
            if !gc.is_finite() {
                return Err(Error::NonFinite("chemoattractant gradient".into()));
            }
            Some(gc)
        } else {
            None
        };
        let len = self.grid.len();
        let (nv, u1v, u2v) = (n.as_slice(), u1.as_slice(), u2.as_slice());
        let mut f1 = vec![0.0; len];
        let mut f2 = vec![0.0; len];
        let mut g1 = vec![0.0; len];
        let mut g2 = vec![0.0; len];
        let (a11, a12, a21, a22) = (d11.as_slice(), d12.as_slice(), d21.as_slice(), d22.as_slice());
        for i in 0..len {
            let (c1, c2) = match &gc {
                Some(g) => (g.first().as_slice()[i], g.second().as_slice()[i]),
                None => (0.0, 0.0),
            };
            f1[i] = nv[i] * (c1 + u1v[i]);
            f2[i] = nv[i] * (c2 + u2v[i]);
            g1[i] = nv[i] * c1 - (u1v[i] * a11[i] + u2v[i] * a12[i]);
            g2[i] = nv[i] * c2 - (u1v[i] * a21[i] + u2v[i] * a22[i]);
        }
        let g = &self.grid;
        let (mut s1, mut s2) = forward_pair(&ScalarField::from_vec(g, f1)?, &ScalarField::from_vec(g, f2)?);
        s1.dealias_in_place();
        s2.dealias_in_place();
        let dn = spectral_divergence(&s1, &s2).scaled(-1.0);
        let (mut v1, mut v2) = forward_pair(&ScalarField::from_vec(g, g1)?, &ScalarField::from_vec(g, g2)?);
        v1.dealias_in_place();
        v2.dealias_in_place();
        leray_in_place(&mut v1, &mut v2);
        Ok(Modes { n: dn, u1: v1, u2: v2 })
    }

    /// Full tendencies `(dn/dt, du/dt)` at `state`.
    pub fn rhs(&self, state: &SimState) -> Result<(ScalarField, VectorField)> {
        if !state.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let m = Modes::of(state);
        let nl = self.nonlinear(&m)?;
        let dn = nl.n.add(&m.n.laplacian()).to_real();
        let du = VectorField::from_spectral(&nl.u1.add(&m.u1.laplacian()), &nl.u2.add(&m.u2.laplacian()));
        Ok((dn, du))
    }

    fn advance(&mut self, m: &Modes, dt: f64) -> Result<Modes> {
        let g = self.grid.clone();
        match self.cfg.scheme {
            Scheme::ImexEuler => {
                let nl = self.nonlinear(m)?;
                Ok(m.zip(&nl, |i, x, y| (x + y * dt) / (1.0 + dt * g.k_squared(i))))
            }
            Scheme::Etdrk2 => {
                if self.prop.as_ref().map(|p| p.dt) != Some(dt) {
                    self.prop = Some(Propagator::new(&g, dt));
                }
                let nl0 = self.nonlinear(m)?;
                let p = self.prop.as_ref().expect("propagator");
                let a = m.zip(&nl0, |i, x, y| x * p.decay[i] + y * p.phi1[i]);
                let nl1 = self.nonlinear(&a)?;
                let diff = nl1.zip(&nl0, |_, x, y| x - y);
                let p = self.prop.as_ref().expect("propagator");
                Ok(a.zip(&diff, |i, x, y| x + y * p.phi2[i]))
            }
        }
    }

    fn to_state(&self, t: f64, m: &Modes) -> Result<SimState> {
        let (n, u1) = inverse_pair(&m.n, &m.u1);
        let u2 = m.u2.to_real();
        let u = VectorField::new(u1, u2)?;
        let n = DensityField::from_evolution(n);
        let u = VelocityField::from_evolution(u);
        SimState::new(t, n, u, &self.solver)
    }

    /// One step of size `dt`.
    pub fn step_by(&mut self, state: &SimState, dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if !state.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let m = self.advance(&Modes::of(state), dt)?;
        let next = self.to_state(state.t + dt, &m)?;
        if !(next.n().field().is_finite() && next.u().field().is_finite()) {
            return Err(Error::Numerical { step: 1, t: next.t, reason: "non-finite field".into() });
        }
        Ok(next)
    }

    /// One step with the configured (fixed or CFL) step size.
    pub fn step(&mut self, state: &SimState) -> Result<SimState> {
        let dt = self.target_dt(state);
        self.step_by(state, dt)
    }

    /// Integrates to `t_end`, sampling diagnostics every `cadence`.
    ///
    /// Each cadence interval is split into equal steps no longer than the
    /// target step. With `t_end == 0` no rows are produced.
    #[allow(clippy::result_large_err)]
    pub fn run(
        &mut self,
        state0: &SimState,
        t_end: f64,
        cadence: f64,
        observer: &mut dyn Observer,
    ) -> std::result::Result<RunOutcome, RunFailure> {
        let mut series = DiagnosticsSeries::default();
        let mut stats = RunStats { min_n: state0.n().field().min(), ..Default::default() };
        let fail = |error, series, stats, last| Err(RunFailure { error, series, stats, last_state: last });
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return fail(invalid("t_end", format!("must be >= 0, got {t_end}")), series, stats, None);
        }
        if !(cadence > 0.0) {
            return fail(invalid("cadence", format!("must be positive, got {cadence}")), series, stats, None);
        }
        if !state0.grid().same_as(&self.grid) {
            return fail(Error::GridMismatch, series, stats, None);
        }
        if t_end == 0.0 {
            return Ok(RunOutcome { state: state0.clone(), series, stats });
        }
        let mut state = state0.clone();
        if let Err(e) = self.record(&state, &mut series, observer) {
            return fail(e, series, stats, Some(state));
        }
        let intervals = (t_end / cadence - 1e-9).ceil().max(1.0) as usize;
        let mut modes = Modes::of(&state);
        let mass0 = modes.n.mean();
        for k in 0..intervals {
            let t0 = state.t;
            let t1 = if k + 1 == intervals { t_end } else { (k + 1) as f64 * cadence };
            let span = t1 - t0;
            if span <= 0.0 {
                continue;
            }
            let target = self.target_dt(&state);
            let m = (span / target - 1e-9).ceil().max(1.0) as usize;
            let dt = span / m as f64;
            stats.last_dt = dt;
            for j in 0..m {
                let t = if j + 1 == m { t1 } else { t0 + (j + 1) as f64 * dt };
                match self.advance(&modes, dt) {
                    Ok(next) => modes = next,
                    Err(e) => {
                        let e = Error::Numerical { step: stats.steps + 1, t, reason: e.to_string() };
                        return fail(e, series, stats, Some(state));
                    }
                }
                stats.steps += 1;
                let n_real = modes.n.to_real();
                if !n_real.is_finite() || !modes.u1.coeffs().iter().chain(modes.u2.coeffs()).all(|c| c.re.is_finite() && c.im.is_finite()) {
                    let e = Error::Numerical { step: stats.steps, t, reason: "non-finite field after step".into() };
                    return fail(e, series, stats, Some(state));
                }
                let min_n = n_real.min();
                stats.min_n = stats.min_n.min(min_n);
                let mut clipped = 0.0;
                if self.cfg.positivity == Positivity::ClipReport && min_n < 0.0 {
                    let (fixed, removed) = clip(&n_real, mass0);
                    clipped = removed;
                    stats.clipped_mass += removed;
                    modes.n = fixed.to_spectral();
                    log::info!("step {}: clipped mass {removed:.3e}", stats.steps);
                }
                let tail = resolution_tail(&modes.n);
                stats.max_tail_fraction = stats.max_tail_fraction.max(tail);
                observer.step(&StepReport { index: stats.steps, t, dt, min_n, clipped_mass: clipped, tail_fraction: tail });
                if let Some(th) = self.cfg.resolution_threshold {
                    if tail > th {
                        let e = Error::UnderResolved { step: stats.steps, t, fraction: tail };
                        return fail(e, series, stats, Some(state));
                    }
                }
            }
            state = match self.to_state(t1, &modes) {
                Ok(s) => s,
                Err(e) => return fail(e, series, stats, Some(state)),
            };
            if let Err(e) = self.record(&state, &mut series, observer) {
                return fail(e, series, stats, Some(state));
            }
        }
        Ok(RunOutcome { state, series, stats })
    }

    fn record(&self, state: &SimState, series: &mut DiagnosticsSeries, observer: &mut dyn Observer) -> Result<()> {
        let row = diagnostics(state)?;
        observer.sample(state, &row)?;
        series.rows.push(row);
        Ok(())
    }
}

/// Zeroes negative samples and rescales to `mass0` (the cell mean); returns the removed mass.
fn clip(n: &ScalarField, mean0: f64) -> (ScalarField, f64) {
    let area = n.grid().cell_area();
    let neg: f64 = n.as_slice().iter().filter(|&&v| v < 0.0).map(|v| -v).sum::<f64>() * area;
    let pos = n.map(|v| v.max(0.0));
    let target = mean0 * n.grid().length() * n.grid().length();
    let total = pos.integral();
    let fixed = if total > 0.0 { pos.scaled(target / total) } else { pos };
    (fixed, neg)
}

/// Fraction of the non-mean spectral energy of `n` in the outer band
/// `N/4 < max(|m1|, |m2|)`.
pub fn resolution_tail(n: &SpectralField) -> f64 {
    let g = n.grid();
    let nn = g.n();
    let quarter = (nn / 4) as i64;
    let modes = g.modes();
    let (mut total, mut tail) = (0.0, 0.0);
    for (i, c) in n.coeffs().iter().enumerate().skip(1) {
        let e = c.norm_sqr();
        total += e;
        if modes[i / nn].abs().max(modes[i % nn].abs()) > quarter {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Tendencies at `state` under `cfg`.
pub fn rhs(state: &SimState, cfg: &StepperConfig) -> Result<(ScalarField, VectorField)> {
    Stepper::new(state.grid(), cfg.clone())?.rhs(state)
}

/// One step under `cfg`.
pub fn step(state: &SimState, cfg: &StepperConfig) -> Result<SimState> {
    Stepper::new(state.grid(), cfg.clone())?.step(state)
}

/// CFL step for `state` under `cfg`.
pub fn cfl_dt(state: &SimState, cfg: &StepperConfig) -> Result<f64> {
    Ok(Stepper::new(state.grid(), cfg.clone())?.cfl_dt(state))
}

/// Integrates `state0` to `t_end` with samples every `cadence`.
#[allow(clippy::result_large_err)]
pub fn run(
    state0: &SimState,
    t_end: f64,
    cfg: &StepperConfig,
    cadence: f64,
    observer: &mut dyn Observer,
) -> std::result::Result<RunOutcome, RunFailure> {
    match Stepper::new(state0.grid(), cfg.clone()) {
        Ok(mut s) => s.run(state0, t_end, cadence, observer),
        Err(error) => Err(RunFailure { error, series: DiagnosticsSeries::default(), stats: RunStats::default(), last_state: None }),
    }
}
