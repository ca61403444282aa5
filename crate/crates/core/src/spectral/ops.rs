use rustfft::num_complex::Complex64;

use super::field::{ScalarField, SpectralField, VectorField};
use crate::error::Result;

/// Spectral gradient; exact for band-limited fields.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    f.ensure_finite("gradient input")?;
    let s = f.to_spectral();
    Ok(spectral_gradient(&s))
}

pub(crate) fn spectral_gradient(s: &SpectralField) -> VectorField {
    let (a, b) = (s.derivative(0), s.derivative(1));
    VectorField::from_spectral(&a, &b)
}

/// Spectral divergence.
pub fn divergence(u: &VectorField) -> ScalarField {
    let (a, b) = u.to_spectral();
    spectral_divergence(&a, &b).to_real()
}

pub(crate) fn spectral_divergence(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let mut d = a.derivative(0);
    d.axpy(1.0, &b.derivative(1));
    d
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.to_spectral().laplacian().to_real()
}

/// Scalar vorticity `d1 u2 - d2 u1`.
pub fn curl(u: &VectorField) -> ScalarField {
    let (a, b) = u.to_spectral();
    b.derivative(0).sub(&a.derivative(1)).to_real()
}

/// `exp(t Laplacian) f`; rejects negative `t`.
pub fn heat_semigroup(f: &ScalarField, t: f64) -> Result<ScalarField> {
    super::field::check_time(t)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.to_spectral().heat_unchecked(t).to_real())
}

pub fn heat_semigroup_vector(u: &VectorField, t: f64) -> Result<VectorField> {
    super::field::check_time(t)?;
    if t == 0.0 {
        return Ok(u.clone());
    }
    let (a, b) = u.to_spectral();
    Ok(VectorField::from_spectral(&a.heat_unchecked(t), &b.heat_unchecked(t)))
}

/// Projection onto divergence-free fields; the mean mode is left alone.
pub fn leray_project(u: &VectorField) -> VectorField {
    let (mut a, mut b) = u.to_spectral();
    leray_in_place(&mut a, &mut b);
    VectorField::from_spectral(&a, &b)
}

/// Mode-wise `u <- u - k (k.u) / |k|^2` using derivative wavenumbers, so the
/// output is annihilated by the spectral divergence.
pub(crate) fn leray_in_place(a: &mut SpectralField, b: &mut SpectralField) {
    let g = a.grid().clone();
    let n = g.n();
    let kd = g.derivative_wavenumbers();
    let (ca, cb) = (a.coeffs_mut(), b.coeffs_mut());
    for i in 0..ca.len() {
        let (k1, k2) = (kd[i / n], kd[i % n]);
        let kk = k1 * k1 + k2 * k2;
        if kk == 0.0 {
            continue;
        }
        let p: Complex64 = (ca[i] * k1 + cb[i] * k2) / kk;
        ca[i] -= p * k1;
        cb[i] -= p * k2;
    }
}

/// Applies the 2/3 rule.
pub fn dealias(f: &SpectralField) -> SpectralField {
    f.dealias()
}
