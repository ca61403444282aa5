//! Chemoattractant potential `-Laplacian c = n`, pressure recovery and ball averages.

use std::f64::consts::PI;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::spectral::{
    forward_pair, inverse_pair, spectral_gradient, Grid, ScalarField, SpectralField, VectorField,
};

/// Relative boundary density above which the free-space solve is flagged as truncated.
pub const TRUNCATION_THRESHOLD: f64 = 1e-8;

/// Half the derivative at zero of the square-lattice zeta sum `sum' |j|^(-2s)`.
const LATTICE_ORIGIN: f64 = -1.310_532_925_911_509_3;
/// One eighth of the same derivative at `s = -1`; weights the five-point correction.
const LATTICE_NEIGHBOUR: f64 = -0.194_373_936_020_545_84 / 8.0;

/// How `c` is recovered from `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoissonVariant {
    /// `c_hat = n_hat / |k|^2`, zero mean; solves `-Laplacian c = n - mean(n)`.
    Periodic,
    /// Linear convolution with `-(1/2 pi) log|x|` on a grid padded by `pad`.
    FreeSpace { pad: usize },
}

impl PoissonVariant {
    pub fn free_space(pad: usize) -> Result<Self> {
        let v = PoissonVariant::FreeSpace { pad };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PoissonVariant::FreeSpace { pad } if pad < 2 => {
                Err(invalid("pad", format!("free-space padding must be >= 2, got {pad}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PoissonVariant::Periodic => "periodic",
            PoissonVariant::FreeSpace { .. } => "freespace",
        }
    }
}

impl Default for PoissonVariant {
    fn default() -> Self {
        PoissonVariant::FreeSpace { pad: 2 }
    }
}

impl fmt::Display for PoissonVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoissonVariant::Periodic => write!(f, "periodic"),
            PoissonVariant::FreeSpace { pad } => write!(f, "freespace(pad={pad})"),
        }
    }
}

/// Output of a Poisson solve.
#[derive(Clone, Debug)]
pub struct Potential {
    pub c: ScalarField,
    pub grad: VectorField,
    /// Largest `|n|` on the box edge relative to the peak; zero for the periodic variant.
    pub boundary_fraction: f64,
}

impl Potential {
    pub fn truncated(&self) -> bool {
        self.boundary_fraction > TRUNCATION_THRESHOLD
    }
}

/// Reusable solver holding the padded kernel spectrum.
pub struct PoissonSolver {
    grid: Grid,
    variant: PoissonVariant,
    free: Option<FreeKernel>,
    warned: AtomicBool,
}

struct FreeKernel {
    padded: Grid,
    spectrum: Vec<Complex64>,
}

impl Clone for PoissonSolver {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            variant: self.variant,
            free: self.free.as_ref().map(|k| FreeKernel { padded: k.padded.clone(), spectrum: k.spectrum.clone() }),
            warned: AtomicBool::new(self.warned.load(Ordering::Relaxed)),
        }
    }
}

impl fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonSolver").field("grid", &self.grid).field("variant", &self.variant).finish()
    }
}

/// Quadrature weight of `log|x|` per unit cell area at lattice offset `(d1, d2)`.
///
/// Away from the origin this is the sampled kernel; the origin and its four
/// neighbours carry the lattice-sum corrections that make the rule fourth order
/// for smooth integrands.
pub fn log_kernel_weight(d1: i64, d2: i64, h: f64) -> f64 {
    match d1 * d1 + d2 * d2 {
        0 => h.ln() + LATTICE_ORIGIN - 4.0 * LATTICE_NEIGHBOUR,
        1 => h.ln() + LATTICE_NEIGHBOUR,
        r2 => h.ln() + 0.5 * (r2 as f64).ln(),
    }
}

impl PoissonSolver {
    pub fn new(grid: &Grid, variant: PoissonVariant) -> Result<Self> {
        variant.validate()?;
        let free = match variant {
            PoissonVariant::Periodic => None,
            PoissonVariant::FreeSpace { pad } => Some(FreeKernel::new(grid, pad)?),
        };
        Ok(Self { grid: grid.clone(), variant, free, warned: AtomicBool::new(false) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn variant(&self) -> PoissonVariant {
        self.variant
    }

    /// Potential and its gradient.
    pub fn solve(&self, n: &ScalarField) -> Result<Potential> {
        self.check(n)?;
        let boundary_fraction = self.boundary_fraction(n);
        let (c, grad) = match &self.free {
            None => {
                let ch = periodic_potential(&n.to_spectral());
                (ch.to_real(), spectral_gradient(&ch))
            }
            Some(k) => {
                let ch = k.convolve(n);
                let c = k.crop(&ch.to_real(), &self.grid);
                let (g1, g2) = inverse_pair(&ch.derivative(0), &ch.derivative(1));
                let grad = VectorField::new(k.crop(&g1, &self.grid), k.crop(&g2, &self.grid))?;
                (c, grad)
            }
        };
        Ok(Potential { c, grad, boundary_fraction })
    }

    pub fn potential(&self, n: &ScalarField) -> Result<ScalarField> {
        self.check(n)?;
        self.boundary_fraction(n);
        Ok(match &self.free {
            None => periodic_potential(&n.to_spectral()).to_real(),
            Some(k) => k.crop(&k.convolve(n).to_real(), &self.grid),
        })
    }

    pub fn gradient(&self, n: &ScalarField) -> Result<VectorField> {
        self.check(n)?;
        self.boundary_fraction(n);
        Ok(match &self.free {
            None => spectral_gradient(&periodic_potential(&n.to_spectral())),
            Some(k) => {
                let ch = k.convolve(n);
                let (g1, g2) = inverse_pair(&ch.derivative(0), &ch.derivative(1));
                VectorField::new(k.crop(&g1, &self.grid), k.crop(&g2, &self.grid))?
            }
        })
    }

    /// Gradient when the spectrum of `n` is already at hand (used by the stepper).
    pub(crate) fn gradient_with_spectrum(&self, n: &ScalarField, n_hat: &SpectralField) -> Result<VectorField> {
        match self.free {
            None => {
                self.check(n)?;
                Ok(spectral_gradient(&periodic_potential(n_hat)))
            }
            Some(_) => self.gradient(n),
        }
    }

    fn check(&self, n: &ScalarField) -> Result<()> {
        if !n.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        n.ensure_finite("density passed to the Poisson solver")
    }

    fn boundary_fraction(&self, n: &ScalarField) -> f64 {
        if self.free.is_none() {
            return 0.0;
        }
        let f = edge_fraction(n);
        if f > TRUNCATION_THRESHOLD && !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("free-space Poisson solve: boundary density fraction {f:.3e} exceeds {TRUNCATION_THRESHOLD:e}");
        }
        f
    }
}

/// Largest `|f|` on the outer ring of samples relative to `max |f|`.
pub fn edge_fraction(f: &ScalarField) -> f64 {
    let peak = f.sup_norm();
    if peak == 0.0 {
        return 0.0;
    }
    let n = f.grid().n();
    let v = f.as_slice();
    let mut edge = 0.0f64;
    for i in 0..n {
        for idx in [i, (n - 1) * n + i, i * n, i * n + n - 1] {
            edge = edge.max(v[idx].abs());
        }
    }
    edge / peak
}

pub(crate) fn periodic_potential(n_hat: &SpectralField) -> SpectralField {
    let g = n_hat.grid().clone();
    n_hat.apply_real(|i| {
        let kk = g.k_squared(i);
        if kk == 0.0 {
            0.0
        } else {
            1.0 / kk
        }
    })
}

impl FreeKernel {
    fn new(grid: &Grid, pad: usize) -> Result<Self> {
        let p = pad * grid.n();
        let padded = Grid::new(p, pad as f64 * grid.length())?;
        let h = grid.spacing();
        let half = (p / 2) as i64;
        let signed = |i: usize| if (i as i64) < half { i as i64 } else { i as i64 - p as i64 };
        let samples: Vec<f64> = (0..p * p)
            .map(|idx| -log_kernel_weight(signed(idx / p), signed(idx % p), h) / (2.0 * PI))
            .collect();
        let k = ScalarField::from_vec(&padded, samples)?.to_spectral();
        let area = padded.length() * padded.length();
        let spectrum = k.coeffs().iter().map(|c| c * area).collect();
        Ok(Self { padded, spectrum })
    }

    fn convolve(&self, n: &ScalarField) -> SpectralField {
        let nb = n.grid().n();
        let p = self.padded.n();
        let mut data = vec![0.0; p * p];
        for i in 0..nb {
            data[i * p..i * p + nb].copy_from_slice(&n.as_slice()[i * nb..(i + 1) * nb]);
        }
        let s = ScalarField::from_vec(&self.padded, data).expect("padded size").to_spectral();
        s.apply(|i| self.spectrum[i])
    }

    fn crop(&self, f: &ScalarField, grid: &Grid) -> ScalarField {
        let nb = grid.n();
        let p = self.padded.n();
        let mut out = Vec::with_capacity(nb * nb);
        for i in 0..nb {
            out.extend_from_slice(&f.as_slice()[i * p..i * p + nb]);
        }
        ScalarField::from_vec(grid, out).expect("box size")
    }
}

/// `c` for density `n`.
pub fn solve_chemo(n: &ScalarField, variant: PoissonVariant) -> Result<ScalarField> {
    PoissonSolver::new(n.grid(), variant)?.potential(n)
}

/// `grad c` for density `n`.
pub fn grad_chemo(n: &ScalarField, variant: PoissonVariant) -> Result<VectorField> {
    PoissonSolver::new(n.grid(), variant)?.gradient(n)
}

fn ball_cells(grid: &Grid, center: (f64, f64), radius: f64) -> Result<Vec<usize>> {
    let half = 0.5 * grid.length();
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    if center.0 - radius < -half || center.0 + radius > half || center.1 - radius < -half || center.1 + radius > half {
        return Err(invalid(
            "ball",
            format!("B(({}, {}), {radius}) leaves the box [-{half}, {half})^2", center.0, center.1),
        ));
    }
    let r2 = radius * radius;
    let cells: Vec<usize> = (0..grid.len())
        .filter(|&idx| {
            let (x1, x2) = grid.position(idx);
            let (d1, d2) = (x1 - center.0, x2 - center.1);
            d1 * d1 + d2 * d2 < r2
        })
        .collect();
    if cells.is_empty() {
        return Err(invalid("radius", "ball contains no grid points"));
    }
    Ok(cells)
}

/// Cell-quadrature average of `f` over the open ball `B(center, radius)`.
pub fn ball_average(f: &ScalarField, center: (f64, f64), radius: f64) -> Result<f64> {
    let cells = ball_cells(f.grid(), center, radius)?;
    let v = f.as_slice();
    Ok(cells.iter().map(|&i| v[i]).sum::<f64>() / cells.len() as f64)
}

/// `c - [c]_B`, the potential shifted to zero average on the ball.
pub fn mean_shifted_potential(c: &ScalarField, center: (f64, f64), radius: f64) -> Result<ScalarField> {
    let avg = ball_average(c, center, radius)?;
    Ok(c.map(|v| v - avg))
}

/// Pressure from `Laplacian P = div(-(u.grad)u + n grad c)`, zero mean.
///
/// Takes `grad c` directly so that a free-space potential, which is not
/// periodic on the box, is never differentiated spectrally.
pub fn recover_pressure(u: &VectorField, n: &ScalarField, grad_c: &VectorField) -> Result<ScalarField> {
    let g = u.grid().clone();
    if !n.grid().same_as(&g) || !grad_c.grid().same_as(&g) {
        return Err(Error::GridMismatch);
    }
    let (a, b) = u.to_spectral();
    let (a, b) = (a.dealias(), b.dealias());
    let (u1, u2) = inverse_pair(&a, &b);
    let (d11, d12) = inverse_pair(&a.derivative(0), &a.derivative(1));
    let (d21, d22) = inverse_pair(&b.derivative(0), &b.derivative(1));
    let adv1 = u1.mul(&d11).add(&u2.mul(&d12));
    let adv2 = u1.mul(&d21).add(&u2.mul(&d22));
    let f1 = grad_c.first().mul(n).sub(&adv1);
    let f2 = grad_c.second().mul(n).sub(&adv2);
    let (mut s1, mut s2) = forward_pair(&f1, &f2);
    s1.dealias_in_place();
    s2.dealias_in_place();
    let n = g.n();
    let kd = g.derivative_wavenumbers();
    let p = s1.apply(|i| {
        let kk = kd[i / n] * kd[i / n] + kd[i % n] * kd[i % n];
        if kk == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -kd[i / n] / kk)
        }
    });
    let q = s2.apply(|i| {
        let kk = kd[i / n] * kd[i / n] + kd[i % n] * kd[i % n];
        if kk == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -kd[i % n] / kk)
        }
    });
    let ph = p.add(&q);
    Ok(ph.to_real())
}

/// Sampled BMO seminorm: the largest mean oscillation
/// `|B|^-1 integral_B |f - [f]_B|` over balls of the given radii whose centres
/// lie on a lattice of spacing `stride` and which fit in the box.
pub fn sampled_bmo(f: &ScalarField, radii: &[f64], stride: f64) -> Result<f64> {
    if !(stride > 0.0) {
        return Err(invalid("stride", "must be positive"));
    }
    let g = f.grid();
    let half = 0.5 * g.length();
    let h = g.spacing();
    let n = g.n();
    let v = f.as_slice();
    let mut best = 0.0f64;
    for &r in radii {
        if !(r > 0.0) || r >= half {
            return Err(invalid("radius", format!("{r} does not fit in the box")));
        }
        let m = ((half - r) / stride).floor() as i64;
        let reach = (r / h).ceil() as i64 + 1;
        for a in -m..=m {
            for b in -m..=m {
                let (c1, c2) = (a as f64 * stride, b as f64 * stride);
                let i0 = ((c1 + half) / h).round() as i64;
                let j0 = ((c2 + half) / h).round() as i64;
                let mut vals = Vec::new();
                for i in (i0 - reach).max(0)..=(i0 + reach).min(n as i64 - 1) {
                    for j in (j0 - reach).max(0)..=(j0 + reach).min(n as i64 - 1) {
                        let (x1, x2) = (g.coord(i as usize) - c1, g.coord(j as usize) - c2);
                        if x1 * x1 + x2 * x2 < r * r {
                            vals.push(v[i as usize * n + j as usize]);
                        }
                    }
                }
                if vals.is_empty() {
                    continue;
                }
                let avg = vals.iter().sum::<f64>() / vals.len() as f64;
                let osc = vals.iter().map(|x| (x - avg).abs()).sum::<f64>() / vals.len() as f64;
                best = best.max(osc);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
