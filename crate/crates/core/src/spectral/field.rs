use rustfft::num_complex::Complex64;

use super::grid::{Direction, Grid};
use crate::error::{invalid, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Real samples of a scalar on a [`Grid`], flat row-major with `idx = i1 * N + i2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

/// Two-component real field on a shared [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    first: ScalarField,
    second: ScalarField,
}

/// Fourier coefficients of a real field, normalised so that
/// `f(x) = sum_k c_k exp(i k.(x + L/2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { grid: grid.clone(), data: vec![value; grid.len()] }
    }

    /// Samples `f(x1, x2)` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.position(idx);
                f(x1, x2)
            })
            .collect();
        Self { grid: grid.clone(), data }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(invalid("data", format!("expected {} samples, got {}", grid.len(), data.len())));
        }
        Ok(Self { grid: grid.clone(), data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Cell-quadrature integral.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    /// `(integral |f|^p)^(1/p)`; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid("p", format!("Lp norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        let s: f64 = self.data.iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * self.grid.cell_area()).powf(1.0 / p))
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        assert_same(&self.grid, &other.grid);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination with a field on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_same(&self.grid, &other.grid);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid.clone(), data }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        assert_same(&self.grid, &x.grid);
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut buf: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.fft2(&mut buf, Direction::Forward);
        let s = 1.0 / self.grid.len() as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        SpectralField { grid: self.grid.clone(), coeffs: buf }
    }
}

impl VectorField {
    pub fn new(first: ScalarField, second: ScalarField) -> Result<Self> {
        if !first.grid.same_as(&second.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { first, second })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { first: ScalarField::zeros(grid), second: ScalarField::zeros(grid) }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let pairs: Vec<(f64, f64)> = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.position(idx);
                f(x1, x2)
            })
            .collect();
        Self {
            first: ScalarField { grid: grid.clone(), data: pairs.iter().map(|p| p.0).collect() },
            second: ScalarField { grid: grid.clone(), data: pairs.iter().map(|p| p.1).collect() },
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.first.grid
    }

    pub fn first(&self) -> &ScalarField {
        &self.first
    }

    pub fn second(&self) -> &ScalarField {
        &self.second
    }

    pub fn components_mut(&mut self) -> (&mut ScalarField, &mut ScalarField) {
        (&mut self.first, &mut self.second)
    }

    pub fn into_components(self) -> (ScalarField, ScalarField) {
        (self.first, self.second)
    }

    pub fn is_finite(&self) -> bool {
        self.first.is_finite() && self.second.is_finite()
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        self.first.zip_map(&self.second, f64::hypot)
    }

    pub fn sup_norm(&self) -> f64 {
        self.first.data.iter().zip(&self.second.data).fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `(integral |u|^p)^(1/p)` with the Euclidean pointwise magnitude.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        self.magnitude().lp_norm(p)
    }

    pub fn dot(&self, other: &VectorField) -> f64 {
        self.first.dot(&other.first) + self.second.dot(&other.second)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { first: self.first.scaled(a), second: self.second.scaled(a) }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        Self { first: self.first.add(&other.first), second: self.second.add(&other.second) }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        Self { first: self.first.sub(&other.first), second: self.second.sub(&other.second) }
    }

    /// Multiplies both components by a scalar field.
    pub fn times(&self, s: &ScalarField) -> Self {
        Self { first: self.first.mul(s), second: self.second.mul(s) }
    }

    pub fn axpy(&mut self, a: f64, x: &VectorField) {
        self.first.axpy(a, &x.first);
        self.second.axpy(a, &x.second);
    }

    /// Both components transformed with a single complex FFT.
    pub fn to_spectral(&self) -> (SpectralField, SpectralField) {
        forward_pair(&self.first, &self.second)
    }

    pub fn from_spectral(a: &SpectralField, b: &SpectralField) -> Self {
        let (first, second) = inverse_pair(a, b);
        Self { first, second }
    }
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), coeffs: vec![ZERO; grid.len()] }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(invalid("coeffs", format!("expected {} coefficients, got {}", grid.len(), coeffs.len())));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Cell mean of the represented field.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// L2 norm over the box via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        self.grid.length() * s.sqrt()
    }

    /// `max |c_k - conj(c_-k)|` relative to `max |c_k|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let d = (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.mirror(i)].conj()).norm())
            .fold(0.0f64, f64::max);
        d / scale
    }

    /// Multiplies every coefficient by `f(idx)`.
    pub fn apply(&self, f: impl Fn(usize) -> Complex64) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, &c)| c * f(i)).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn apply_real(&self, f: impl Fn(usize) -> f64) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, &c)| c * f(i)).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.apply_real(|_| a)
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        assert_same(&self.grid, &other.grid);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        assert_same(&self.grid, &other.grid);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert_same(&self.grid, &x.grid);
        for (s, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += v * a;
        }
    }

    /// Spectral derivative along axis 0 or 1.
    pub fn derivative(&self, axis: usize) -> Self {
        let n = self.grid.n();
        let kd = self.grid.derivative_wavenumbers();
        match axis {
            0 => self.apply(|i| Complex64::new(0.0, kd[i / n])),
            _ => self.apply(|i| Complex64::new(0.0, kd[i % n])),
        }
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid.clone();
        self.apply_real(|i| -g.k_squared(i))
    }

    /// Multiplies by `exp(-|k|^2 t)`; caller guarantees `t >= 0`.
    pub(crate) fn heat_unchecked(&self, t: f64) -> Self {
        if t == 0.0 {
            return self.clone();
        }
        let g = self.grid.clone();
        self.apply_real(|i| (-g.k_squared(i) * t).exp())
    }

    pub fn heat(&self, t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(self.heat_unchecked(t))
    }

    /// Zeroes every mode removed by the 2/3 rule.
    pub fn dealias(&self) -> Self {
        let g = self.grid.clone();
        self.apply_real(|i| if g.keeps(i) { 1.0 } else { 0.0 })
    }

    pub fn dealias_in_place(&mut self) {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if !self.grid.keeps(i) {
                *c = ZERO;
            }
        }
    }

    /// Energy in modes removed by the 2/3 rule, relative to the total.
    pub fn tail_fraction(&self) -> f64 {
        let mut total = 0.0;
        let mut tail = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if !self.grid.keeps(i) {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    pub fn to_real(&self) -> ScalarField {
        let mut buf = self.coeffs.clone();
        self.grid.fft2(&mut buf, Direction::Inverse);
        ScalarField { grid: self.grid.clone(), data: buf.iter().map(|c| c.re).collect() }
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(invalid("t", format!("semigroup time must be >= 0, got {t}")))
    } else {
        Ok(())
    }
}

/// Forward transform of two real fields packed into one complex FFT.
pub fn forward_pair(a: &ScalarField, b: &ScalarField) -> (SpectralField, SpectralField) {
    assert_same(&a.grid, &b.grid);
    let g = &a.grid;
    let mut z: Vec<Complex64> = a.data.iter().zip(&b.data).map(|(&x, &y)| Complex64::new(x, y)).collect();
    g.fft2(&mut z, Direction::Forward);
    let s = 0.5 / g.len() as f64;
    let mut ca = vec![ZERO; g.len()];
    let mut cb = vec![ZERO; g.len()];
    for i in 0..g.len() {
        let zm = z[g.mirror(i)].conj();
        ca[i] = (z[i] + zm) * s;
        // (z - zm) / 2i
        let d = (z[i] - zm) * s;
        cb[i] = Complex64::new(d.im, -d.re);
    }
    (SpectralField { grid: g.clone(), coeffs: ca }, SpectralField { grid: g.clone(), coeffs: cb })
}

/// Inverse transform of two conjugate-symmetric spectra through one complex FFT.
pub fn inverse_pair(a: &SpectralField, b: &SpectralField) -> (ScalarField, ScalarField) {
    assert_same(&a.grid, &b.grid);
    let g = &a.grid;
    let mut z: Vec<Complex64> = a.coeffs.iter().zip(&b.coeffs).map(|(&x, &y)| x + Complex64::new(-y.im, y.re)).collect();
    g.fft2(&mut z, Direction::Inverse);
    (
        ScalarField { grid: g.clone(), data: z.iter().map(|c| c.re).collect() },
        ScalarField { grid: g.clone(), data: z.iter().map(|c| c.im).collect() },
    )
}

fn assert_same(a: &Grid, b: &Grid) {
    assert!(a.same_as(b), "fields live on different grids: {a:?} vs {b:?}");
}
