//! Scalar functionals of a state, time-series identities and windowed diagnostics.

use std::f64::consts::PI;

use crate::elliptic::{edge_fraction, mean_shifted_potential, PoissonVariant, TRUNCATION_THRESHOLD};
use crate::error::{invalid, Result};
use crate::spectral::{inverse_pair, ScalarField, VectorField};
use crate::state::SimState;

/// Densities below this contribute nothing to `n log n`.
pub const ENTROPY_FLOOR: f64 = 1e-300;
/// `grad log n` is evaluated as `grad n / max(n, LOG_FLOOR * max n)`.
pub const LOG_FLOOR: f64 = 1e-12;

/// CSV header of the time series, in column order.
pub const CSV_HEADER: &str = "t,mass,m1x,m1y,m2,coupling,entropy,mod_entropy,free_energy,mod_free_energy,kinetic,dissipation_n,dissipation_u,enstrophy,linf_n,linf_u,min_n,l43_n,l2_n,l3_n,l4_n,log_moment";

/// One time sample of every tracked functional.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub m1: [f64; 2],
    pub m2: f64,
    pub coupling: f64,
    pub entropy: f64,
    pub mod_entropy: f64,
    pub free_energy: f64,
    pub mod_free_energy: f64,
    pub kinetic: f64,
    pub dissipation_n: f64,
    pub dissipation_u: f64,
    pub enstrophy: f64,
    pub linf_n: f64,
    pub linf_u: f64,
    pub min_n: f64,
    pub l43_n: f64,
    pub l2_n: f64,
    pub l3_n: f64,
    pub l4_n: f64,
    pub log_moment: f64,
    /// `integral n u`.
    pub drift: [f64; 2],
    /// `||grad omega||_2^2`.
    pub palinstrophy: f64,
    /// `-integral (n grad c) . perp-grad omega`.
    pub vorticity_forcing: f64,
    /// `integral |grad c|^2` over the box.
    pub grad_c_sq: f64,
    /// Instantaneous `dH/dt` from the dissipation identity.
    pub mod_free_energy_rate: f64,
    /// The same rate with `+1/2 integral |grad c|^2` and no viscous term.
    pub mod_free_energy_rate_short: f64,
    pub variant: PoissonVariant,
}

impl DiagnosticsRow {
    pub fn values(&self) -> [f64; 22] {
        [
            self.t,
            self.mass,
            self.m1[0],
            self.m1[1],
            self.m2,
            self.coupling,
            self.entropy,
            self.mod_entropy,
            self.free_energy,
            self.mod_free_energy,
            self.kinetic,
            self.dissipation_n,
            self.dissipation_u,
            self.enstrophy,
            self.linf_n,
            self.linf_u,
            self.min_n,
            self.l43_n,
            self.l2_n,
            self.l3_n,
            self.l4_n,
            self.log_moment,
        ]
    }

    /// Comma-separated values at round-trip precision, no newline.
    pub fn to_csv(&self) -> String {
        self.values().iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }
}

pub fn mass(n: &ScalarField) -> f64 {
    n.integral()
}

pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    f.lp_norm(p)
}

fn entropy_density(v: f64) -> f64 {
    if v < ENTROPY_FLOOR {
        0.0
    } else {
        v * v.ln()
    }
}

/// `integral n log n`, with `0 log 0 = 0` and negative undershoot ignored.
pub fn entropy(n: &ScalarField) -> f64 {
    n.as_slice().iter().map(|&v| entropy_density(v)).sum::<f64>() * n.grid().cell_area()
}

fn orlicz(v: f64) -> f64 {
    let v = v.max(0.0);
    (1.0 + v) * v.ln_1p()
}

/// `integral (1+n) log(1+n)`.
pub fn modified_entropy(n: &ScalarField) -> f64 {
    n.as_slice().iter().map(|&v| orlicz(v)).sum::<f64>() * n.grid().cell_area()
}

/// `1/2 integral n c`.
fn interaction(n: &ScalarField, c: &ScalarField) -> f64 {
    0.5 * n.dot(c)
}

/// `F = integral n (log n - c/2) + 1/2 |u|^2`.
pub fn free_energy(n: &ScalarField, u: &VectorField, c: &ScalarField) -> f64 {
    entropy(n) - interaction(n, c) + 0.5 * u.dot(u)
}

/// `H = integral (1+n) log(1+n) - n c/2 + |u|^2/2`.
pub fn modified_free_energy(n: &ScalarField, u: &VectorField, c: &ScalarField) -> f64 {
    modified_entropy(n) - interaction(n, c) + 0.5 * u.dot(u)
}

pub fn kinetic(u: &VectorField) -> f64 {
    0.5 * u.dot(u)
}

/// `grad log n` with the floor `LOG_FLOOR * max n`.
fn grad_log(n: &ScalarField, grad_n: &VectorField) -> (Vec<f64>, Vec<f64>) {
    let floor = LOG_FLOOR * n.max().max(0.0);
    let nv = n.as_slice();
    let (a, b) = (grad_n.first().as_slice(), grad_n.second().as_slice());
    let mut g1 = vec![0.0; nv.len()];
    let mut g2 = vec![0.0; nv.len()];
    for i in 0..nv.len() {
        let d = nv[i].max(floor);
        if d > 0.0 {
            g1[i] = a[i] / d;
            g2[i] = b[i] / d;
        }
    }
    (g1, g2)
}

/// `D_n = integral n |grad(log n - c)|^2` given `grad c`.
pub fn density_dissipation(n: &ScalarField, grad_c: &VectorField) -> Result<f64> {
    let grad_n = crate::spectral::gradient(n)?;
    Ok(density_dissipation_with(n, &grad_n, grad_c))
}

fn density_dissipation_with(n: &ScalarField, grad_n: &VectorField, grad_c: &VectorField) -> f64 {
    let (l1, l2) = grad_log(n, grad_n);
    let nv = n.as_slice();
    let (c1, c2) = (grad_c.first().as_slice(), grad_c.second().as_slice());
    let s: f64 = (0..nv.len())
        .map(|i| {
            let (a, b) = (l1[i] - c1[i], l2[i] - c2[i]);
            nv[i].max(0.0) * (a * a + b * b)
        })
        .sum();
    s * n.grid().cell_area()
}

/// `||grad u||_2^2`.
pub fn velocity_dissipation(u: &VectorField) -> f64 {
    let (a, b) = u.to_spectral();
    let (d11, d12) = inverse_pair(&a.derivative(0), &a.derivative(1));
    let (d21, d22) = inverse_pair(&b.derivative(0), &b.derivative(1));
    d11.dot(&d11) + d12.dot(&d12) + d21.dot(&d21) + d22.dot(&d22)
}

/// `(D_n, D_u)`.
pub fn dissipation(n: &ScalarField, u: &VectorField, grad_c: &VectorField) -> Result<(f64, f64)> {
    Ok((density_dissipation(n, grad_c)?, velocity_dissipation(u)))
}

/// Scalar vorticity `d1 u2 - d2 u1`.
pub fn vorticity(u: &VectorField) -> ScalarField {
    crate::spectral::curl(u)
}

/// `||omega||_2^2`.
pub fn enstrophy(u: &VectorField) -> f64 {
    let w = vorticity(u);
    w.dot(&w)
}

/// Vorticity forcing evaluated as `-integral (n grad c) . perp-grad omega`
/// and as `integral omega curl(n grad c)`.
pub fn vorticity_forcing(n: &ScalarField, grad_c: &VectorField, u: &VectorField) -> Result<(f64, f64)> {
    let w = vorticity(u);
    let gw = crate::spectral::gradient(&w)?;
    let f = grad_c.times(n);
    let by_parts = -(f.second().dot(gw.first()) - f.first().dot(gw.second()));
    let curl_form = w.dot(&crate::spectral::curl(&f));
    Ok((by_parts, curl_form))
}

/// Coordinates for moments: the unpaired edge sample `-L/2` is given
/// `x = 0` in odd moments so that the sample set stays symmetric.
fn odd_coord(grid: &crate::spectral::Grid, i: usize) -> f64 {
    if i == 0 {
        0.0
    } else {
        grid.coord(i)
    }
}

/// Second-moment growth rate on the plane, `4M - M^2 / (2 pi)`.
pub fn theory_rate(mass: f64) -> f64 {
    4.0 * mass - mass * mass / (2.0 * PI)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub m1: [f64; 2],
    pub m2: f64,
    /// `2 integral n u . x`.
    pub coupling: f64,
    pub theory_rate: f64,
    pub boundary_fraction: f64,
}

impl MomentReport {
    pub fn truncated(&self) -> bool {
        self.boundary_fraction > TRUNCATION_THRESHOLD
    }
}

pub fn moment_report(n: &ScalarField, u: &VectorField) -> MomentReport {
    let g = n.grid();
    let nn = g.n();
    let nv = n.as_slice();
    let (u1, u2) = (u.first().as_slice(), u.second().as_slice());
    let (mut m1x, mut m1y, mut m2, mut cp) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..nn {
        let (xo, xe) = (odd_coord(g, i), g.coord(i));
        for j in 0..nn {
            let (yo, ye) = (odd_coord(g, j), g.coord(j));
            let k = i * nn + j;
            m1x += nv[k] * xo;
            m1y += nv[k] * yo;
            m2 += nv[k] * (xe * xe + ye * ye);
            cp += nv[k] * (u1[k] * xo + u2[k] * yo);
        }
    }
    let a = g.cell_area();
    let fraction = edge_fraction(n);
    if fraction > TRUNCATION_THRESHOLD {
        log::warn!("moment report: boundary density fraction {fraction:.3e}");
    }
    MomentReport {
        m1: [m1x * a, m1y * a],
        m2: m2 * a,
        coupling: 2.0 * cp * a,
        theory_rate: theory_rate(n.integral()),
        boundary_fraction: fraction,
    }
}

/// `integral n log(1 + |x|^2)`.
pub fn log_moment(n: &ScalarField) -> f64 {
    let g = n.grid();
    let s: f64 = n
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (x, y) = g.position(k);
            v * (x * x + y * y).ln_1p()
        })
        .sum();
    s * g.cell_area()
}

/// Every tracked functional of `state`.
pub fn diagnostics(state: &SimState) -> Result<DiagnosticsRow> {
    let n = state.n().field();
    let u = state.u().field();
    let c = state.c();
    let gc = state.grad_c();
    let grid = state.grid();
    let grad_n = crate::spectral::gradient(n)?;
    let (a, b) = u.to_spectral();
    let (d11, d12) = inverse_pair(&a.derivative(0), &a.derivative(1));
    let (d21, d22) = inverse_pair(&b.derivative(0), &b.derivative(1));
    let dissipation_u = d11.dot(&d11) + d12.dot(&d12) + d21.dot(&d21) + d22.dot(&d22);
    let w = d21.sub(&d12);
    let gw = crate::spectral::gradient(&w)?;
    let f = gc.times(n);
    let vorticity_forcing = -(f.second().dot(gw.first()) - f.first().dot(gw.second()));
    let moments = moment_report(n, u);
    let ent = entropy(n);
    let ment = modified_entropy(n);
    let inter = interaction(n, c);
    let kin = kinetic(u);
    let dn = density_dissipation_with(n, &grad_n, gc);

    // rate of H: -|grad L - grad c/2|^2 + |grad c|^2/4 - n|grad L - grad c|^2 - |grad u|^2, L = log(1+n)
    let nv = n.as_slice();
    let (gn1, gn2) = (grad_n.first().as_slice(), grad_n.second().as_slice());
    let (c1, c2) = (gc.first().as_slice(), gc.second().as_slice());
    let (mut half_term, mut full_term, mut gcsq) = (0.0, 0.0, 0.0);
    for i in 0..nv.len() {
        let p = 1.0 + nv[i].max(0.0);
        let (l1, l2) = (gn1[i] / p, gn2[i] / p);
        let (h1, h2) = (l1 - 0.5 * c1[i], l2 - 0.5 * c2[i]);
        let (f1, f2) = (l1 - c1[i], l2 - c2[i]);
        half_term += h1 * h1 + h2 * h2;
        full_term += nv[i].max(0.0) * (f1 * f1 + f2 * f2);
        gcsq += c1[i] * c1[i] + c2[i] * c2[i];
    }
    let area = grid.cell_area();
    let (half_term, full_term, gcsq) = (half_term * area, full_term * area, gcsq * area);
    let rate = -half_term + 0.25 * gcsq - full_term - dissipation_u;
    let rate_short = -half_term - full_term + 0.5 * gcsq;

    Ok(DiagnosticsRow {
        t: state.t,
        mass: n.integral(),
        m1: moments.m1,
        m2: moments.m2,
        coupling: moments.coupling,
        entropy: ent,
        mod_entropy: ment,
        free_energy: ent - inter + kin,
        mod_free_energy: ment - inter + kin,
        kinetic: kin,
        dissipation_n: dn,
        dissipation_u,
        enstrophy: w.dot(&w),
        linf_n: n.sup_norm(),
        linf_u: u.sup_norm(),
        min_n: n.min(),
        l43_n: n.lp_norm(4.0 / 3.0)?,
        l2_n: n.lp_norm(2.0)?,
        l3_n: n.lp_norm(3.0)?,
        l4_n: n.lp_norm(4.0)?,
        log_moment: log_moment(n),
        drift: [n.dot(u.first()), n.dot(u.second())],
        palinstrophy: gw.dot(&gw),
        vorticity_forcing,
        grad_c_sq: gcsq,
        mod_free_energy_rate: rate,
        mod_free_energy_rate_short: rate_short,
        variant: state.variant(),
    })
}

/// Residuals of the free-energy dissipation identity along a series.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyIdentity {
    /// `(F_{k+1} - F_k)/dt + (D_k + D_{k+1})/2` with `D = D_n + D_u`.
    pub residuals: Vec<f64>,
    /// `F(t_k) + integral_0^{t_k} (D_n + D_u/2) - F(0)`, trapezoidal in time.
    pub excess: Vec<f64>,
}

impl EnergyIdentity {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Largest violation of the integrated inequality; `<= 0` means it holds exactly.
    pub fn max_excess(&self) -> f64 {
        self.excess.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn free_energy_identity_residual(series: &DiagnosticsSeries) -> EnergyIdentity {
    let rows = &series.rows;
    let mut residuals = Vec::new();
    let mut excess = Vec::new();
    let mut integral = 0.0;
    if let Some(first) = rows.first() {
        excess.push(0.0);
        for w in rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.t - a.t;
            let d = 0.5 * (a.dissipation_n + a.dissipation_u + b.dissipation_n + b.dissipation_u);
            residuals.push((b.free_energy - a.free_energy) / dt + d);
            integral += 0.5 * dt * (a.dissipation_n + 0.5 * a.dissipation_u + b.dissipation_n + 0.5 * b.dissipation_u);
            excess.push(b.free_energy + integral - first.free_energy);
        }
    }
    EnergyIdentity { residuals, excess }
}

/// Per-interval residual of `1/2 d/dt ||omega||^2 + ||grad omega||^2 = forcing`.
pub fn vorticity_balance_residual(series: &DiagnosticsSeries) -> Vec<f64> {
    series
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.t - a.t;
            0.5 * (b.enstrophy - a.enstrophy) / dt + 0.5 * (a.palinstrophy + b.palinstrophy)
                - 0.5 * (a.vorticity_forcing + b.vorticity_forcing)
        })
        .collect()
}

/// Per-interval residual of `dH/dt` against the rate recorded in each row,
/// using `rate` to select which formula.
pub fn mod_free_energy_rate_residual(series: &DiagnosticsSeries, rate: impl Fn(&DiagnosticsRow) -> f64) -> Vec<f64> {
    series
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            (b.mod_free_energy - a.mod_free_energy) / (b.t - a.t) - 0.5 * (rate(a) + rate(b))
        })
        .collect()
}

/// Per-interval first- and second-moment identity residuals:
/// `d m1/dt - integral n u` (both components) and `d m2/dt - (theory + coupling)`.
pub fn moment_identity_residuals(series: &DiagnosticsSeries) -> Vec<([f64; 2], f64)> {
    series
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.t - a.t;
            let r1 = [
                (b.m1[0] - a.m1[0]) / dt - 0.5 * (a.drift[0] + b.drift[0]),
                (b.m1[1] - a.m1[1]) / dt - 0.5 * (a.drift[1] + b.drift[1]),
            ];
            let target = 0.5 * (theory_rate(a.mass) + theory_rate(b.mass) + a.coupling + b.coupling);
            (r1, (b.m2 - a.m2) / dt - target)
        })
        .collect()
}

/// Radial window `Psi_R` or its complement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CutoffKind {
    /// 1 on `|x| <= R`, 0 on `|x| >= 2R`, quintic smoothstep between.
    Ball,
    /// `1 - Ball`.
    Exterior,
    /// Indicator of `|x| >= R`.
    SharpExterior,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub kind: CutoffKind,
    pub radius: f64,
}

impl Cutoff {
    pub fn new(kind: CutoffKind, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { kind, radius })
    }

    pub fn value(&self, r: f64) -> f64 {
        let s = ((r - self.radius) / self.radius).clamp(0.0, 1.0);
        let ball = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        match self.kind {
            CutoffKind::Ball => ball,
            CutoffKind::Exterior => 1.0 - ball,
            CutoffKind::SharpExterior => {
                if r >= self.radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(&self, grid: &crate::spectral::Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.value(x.hypot(y)))
    }
}

/// `integral (1+n) log(1+n) * cutoff`.
pub fn windowed_modified_entropy(n: &ScalarField, cutoff: &Cutoff) -> f64 {
    let w = cutoff.sample(n.grid());
    n.as_slice().iter().zip(w.as_slice()).map(|(&v, &p)| orlicz(v) * p).sum::<f64>() * n.grid().cell_area()
}

/// `integral_{|x| >= R} (1+n) log(1+n) - n`.
pub fn exterior_entropy(n: &ScalarField, radius: f64) -> Result<f64> {
    let w = Cutoff::new(CutoffKind::SharpExterior, radius)?.sample(n.grid());
    Ok(n.as_slice().iter().zip(w.as_slice()).map(|(&v, &p)| (orlicz(v) - v.max(0.0)) * p).sum::<f64>()
        * n.grid().cell_area())
}

/// `integral [(1+n) log(1+n) - n] Psi_R - 1/2 integral n c_m Psi_R + 1/2 integral |u|^2 Psi_R`
/// with `c_m` shifted to zero average on `B_{2R}`.
pub fn windowed_interior_energy(n: &ScalarField, u: &VectorField, c: &ScalarField, radius: f64) -> Result<f64> {
    let cut = Cutoff::new(CutoffKind::Ball, radius)?;
    let cm = mean_shifted_potential(c, (0.0, 0.0), 2.0 * radius)?;
    let w = cut.sample(n.grid());
    let (nv, cv, wv) = (n.as_slice(), cm.as_slice(), w.as_slice());
    let (u1, u2) = (u.first().as_slice(), u.second().as_slice());
    let s: f64 = (0..nv.len())
        .map(|i| {
            let v = nv[i];
            (orlicz(v) - v.max(0.0) - 0.5 * v * cv[i] + 0.5 * (u1[i] * u1[i] + u2[i] * u2[i])) * wv[i]
        })
        .sum();
    Ok(s * n.grid().cell_area())
}
