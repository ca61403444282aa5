//! Density and velocity containers, initial data, and the simulation state.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::elliptic::{PoissonSolver, PoissonVariant};
use crate::error::{invalid, Error, Result};
use crate::spectral::{divergence, Grid, ScalarField, SpectralField, VectorField};

/// Allowed undershoot of a density relative to its peak.
pub const POSITIVITY_SLACK: f64 = 1e-12;
/// Allowed spectral divergence of a velocity relative to its L2 norm.
pub const DIVERGENCE_SLACK: f64 = 1e-10;

/// Nonnegative (up to roundoff) cell density.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField(ScalarField);

impl DensityField {
    pub fn new(f: ScalarField) -> Result<Self> {
        f.ensure_finite("density")?;
        let (lo, hi) = (f.min(), f.max());
        if lo < -POSITIVITY_SLACK * hi.max(0.0) {
            return Err(invalid("density", format!("minimum {lo:e} below roundoff of peak {hi:e}")));
        }
        Ok(Self(f))
    }

    /// Wraps a field produced by time stepping, where undershoot is a
    /// diagnostic rather than an input error.
    pub fn from_evolution(f: ScalarField) -> Self {
        Self(f)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self(ScalarField::zeros(grid))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    pub fn mass(&self) -> f64 {
        self.0.integral()
    }
}

/// Divergence-free velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField(VectorField);

impl VelocityField {
    pub fn new(v: VectorField) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite("velocity".into()));
        }
        let d = divergence(&v).l2_norm();
        if d > DIVERGENCE_SLACK * v.l2_norm() {
            return Err(invalid("velocity", format!("divergence {d:e} exceeds {DIVERGENCE_SLACK:e} of the L2 norm")));
        }
        Ok(Self(v))
    }

    /// Leray-projects an arbitrary field.
    pub fn projected(v: &VectorField) -> Self {
        Self(crate::spectral::leray_project(v))
    }

    pub(crate) fn from_evolution(v: VectorField) -> Self {
        Self(v)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self(VectorField::zeros(grid))
    }

    pub fn field(&self) -> &VectorField {
        &self.0
    }

    pub fn into_field(self) -> VectorField {
        self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    /// `1/2 ||u||_2^2`.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.0.dot(&self.0)
    }
}

/// Time-stamped `(n, u)` with the potential it induces.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    n: DensityField,
    u: VelocityField,
    c: ScalarField,
    grad_c: VectorField,
    variant: PoissonVariant,
    pressure: Option<ScalarField>,
}

impl SimState {
    pub fn new(t: f64, n: DensityField, u: VelocityField, solver: &PoissonSolver) -> Result<Self> {
        if !n.grid().same_as(u.grid()) || !n.grid().same_as(solver.grid()) {
            return Err(Error::GridMismatch);
        }
        let p = solver.solve(n.field())?;
        Ok(Self { t, n, u, c: p.c, grad_c: p.grad, variant: solver.variant(), pressure: None })
    }

    pub fn grid(&self) -> &Grid {
        self.n.grid()
    }

    pub fn n(&self) -> &DensityField {
        &self.n
    }

    pub fn u(&self) -> &VelocityField {
        &self.u
    }

    pub fn c(&self) -> &ScalarField {
        &self.c
    }

    pub fn grad_c(&self) -> &VectorField {
        &self.grad_c
    }

    pub fn variant(&self) -> PoissonVariant {
        self.variant
    }

    pub fn pressure(&self) -> Option<&ScalarField> {
        self.pressure.as_ref()
    }

    /// Computes and caches the pressure.
    pub fn with_pressure(mut self) -> Result<Self> {
        let p = crate::elliptic::recover_pressure(self.u.field(), self.n.field(), &self.grad_c)?;
        self.pressure = Some(p);
        Ok(self)
    }

    /// `max |c - c(n)|` against a fresh solve, relative to `max |c|`.
    pub fn potential_mismatch(&self, solver: &PoissonSolver) -> Result<f64> {
        let c = solver.potential(self.n.field())?;
        Ok(c.sub(&self.c).sup_norm() / c.sup_norm().max(f64::MIN_POSITIVE))
    }
}

/// Sampled Gaussian with variance `sigma^2` per axis, rescaled to mass `mass` exactly.
pub fn gaussian_density(mass: f64, sigma: f64, center: (f64, f64), grid: &Grid) -> Result<DensityField> {
    if !(mass.is_finite() && mass >= 0.0) {
        return Err(invalid("mass", format!("must be finite and >= 0, got {mass}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    if sigma > grid.length() / 6.0 {
        return Err(invalid("sigma", format!("{sigma} too wide for a box of side {}", grid.length())));
    }
    let half = 0.5 * grid.length();
    if center.0.abs() >= half || center.1.abs() >= half {
        return Err(invalid("center", "outside the box"));
    }
    if mass == 0.0 {
        return Ok(DensityField::zeros(grid));
    }
    let s2 = 2.0 * sigma * sigma;
    let raw = ScalarField::from_fn(grid, |x, y| {
        let (a, b) = (x - center.0, y - center.1);
        (-(a * a + b * b) / s2).exp()
    });
    DensityField::new(renormalized(&raw, mass))
}

fn renormalized(f: &ScalarField, mass: f64) -> ScalarField {
    f.scaled(mass / f.integral())
}

/// The stationary profile `8 l^2 / (l^2 + |x|^2)^2` sampled as is; its mass on
/// the plane is exactly `8 pi`, the box loses the tail.
pub fn critical_profile_raw(lambda: f64, grid: &Grid) -> Result<DensityField> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if lambda >= grid.length() / 4.0 {
        return Err(invalid("lambda", format!("{lambda} not small against the box")));
    }
    let l2 = lambda * lambda;
    DensityField::new(ScalarField::from_fn(grid, |x, y| {
        let d = l2 + x * x + y * y;
        8.0 * l2 / (d * d)
    }))
}

/// [`critical_profile_raw`] rescaled to grid mass exactly `8 pi`.
pub fn critical_profile(lambda: f64, grid: &Grid) -> Result<DensityField> {
    let raw = critical_profile_raw(lambda, grid)?;
    DensityField::new(renormalized(raw.field(), 8.0 * PI))
}

/// `A (sin(k x1) cos(k x2), -cos(k x1) sin(k x2))` with `k = 2 pi / L`.
pub fn taylor_green(amplitude: f64, grid: &Grid) -> VelocityField {
    let k = grid.dk();
    VelocityField(VectorField::from_fn(grid, |x, y| {
        (amplitude * (k * x).sin() * (k * y).cos(), -amplitude * (k * x).cos() * (k * y).sin())
    }))
}

/// Random band-limited divergence-free velocity with `1/2 ||u||^2 = energy`.
///
/// Built as the perpendicular gradient of a stream function whose modes with
/// `1 <= max(|m1|, |m2|) <= band` carry Gaussian amplitudes decaying like `1/(1+|m|^2)`.
pub fn random_solenoidal(energy: f64, seed: u64, band: usize, grid: &Grid) -> Result<VelocityField> {
    if !(energy.is_finite() && energy >= 0.0) {
        return Err(invalid("energy", format!("must be finite and >= 0, got {energy}")));
    }
    let n = grid.n();
    if band == 0 || 3 * band > n {
        return Err(invalid("band", format!("must satisfy 1 <= band <= N/3, got {band} for N = {n}")));
    }
    if energy == 0.0 {
        return Ok(VelocityField::zeros(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    let b = band as i64;
    let wrap = |m: i64| ((m + n as i64) % n as i64) as usize;
    for m1 in 0..=b {
        for m2 in -b..=b {
            if m1 == 0 && m2 <= 0 {
                continue;
            }
            let w = 1.0 / (1.0 + (m1 * m1 + m2 * m2) as f64);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let z = Complex64::new(re, im) * w;
            psi[wrap(m1) * n + wrap(m2)] = z;
            psi[wrap(-m1) * n + wrap(-m2)] = z.conj();
        }
    }
    let psi = SpectralField::from_coeffs(grid, psi)?;
    // perpendicular gradient (-d2 psi, d1 psi)
    let a = psi.derivative(1).scaled(-1.0);
    let bb = psi.derivative(0);
    let v = VectorField::from_spectral(&a, &bb);
    let e = 0.5 * v.dot(&v);
    Ok(VelocityField(v.scaled((energy / e).sqrt())))
}

/// Field snapshot in the on-disk layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub length: f64,
    pub t: f64,
    pub density: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub c: Vec<f64>,
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"PKNS";
pub const SNAPSHOT_VERSION: u32 = 1;

impl Snapshot {
    pub fn of(state: &SimState) -> Self {
        let g = state.grid();
        Self {
            n: g.n(),
            length: g.length(),
            t: state.t,
            density: state.n().field().as_slice().to_vec(),
            u1: state.u().field().first().as_slice().to_vec(),
            u2: state.u().field().second().as_slice().to_vec(),
            c: state.c().as_slice().to_vec(),
        }
    }

    /// Little-endian encoding: magic, version, N, L, t, then n, u1, u2, c.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + 32 * self.density.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for arr in [&self.density, &self.u1, &self.u2, &self.c] {
            for v in arr.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 28 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Format("missing PKNS header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32_at(8) as usize;
        let (length, t) = (f64_at(12), f64_at(20));
        let count = n * n;
        if bytes.len() != 28 + 32 * count {
            return Err(Error::Format(format!("expected {} bytes for N = {n}, got {}", 28 + 32 * count, bytes.len())));
        }
        let read = |k: usize| (0..count).map(|i| f64_at(28 + 8 * (k * count + i))).collect::<Vec<f64>>();
        Ok(Self { n, length, t, density: read(0), u1: read(1), u2: read(2), c: read(3) })
    }

    /// Rebuilds `(n, u)` on a fresh grid; `c` is recomputed by the caller's solver.
    pub fn fields(&self) -> Result<(Grid, DensityField, VelocityField)> {
        let g = Grid::new(self.n, self.length)?;
        let n = DensityField::from_evolution(ScalarField::from_vec(&g, self.density.clone())?);
        let u = VelocityField::from_evolution(VectorField::new(
            ScalarField::from_vec(&g, self.u1.clone())?,
            ScalarField::from_vec(&g, self.u2.clone())?,
        )?);
        Ok((g, n, u))
    }
}
