//! Mild-solution oracle: Duhamel bilinear forms, Picard iteration and the
//! weighted norms used to measure it.
//!
//! The density and velocity satisfy
//! `n(t) = e^{tΔ}n0 - B1((n,u),(n,u))(t)` and `u(t) = e^{tΔ}u0 - B2((n,u),(n,u))(t)`
//! with the chemical potential taken from the periodic mean-free solve.

use rayon::prelude::*;

use crate::elliptic::periodic_potential;
use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre;
use crate::spectral::{
    check_time, forward_pair, inverse_pair, leray_in_place, spectral_divergence, spectral_gradient, Grid, ScalarField,
    SpectralField, VectorField,
};

pub const DEFAULT_PANELS: usize = 8;
pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_NODES: usize = 17;
pub const DEFAULT_ITERATIONS: usize = 8;

/// Distances below this fraction of the heat-flow norm are treated as roundoff
/// when looking for divergence.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Composite Gauss-Legendre rule on the graded panels `t (i/Q)^4`.
#[derive(Debug, Clone)]
pub struct TimeQuadrature {
    horizon: f64,
    panels: usize,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeQuadrature {
    pub fn graded(horizon: f64, panels: usize, order: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(invalid("horizon", "must be finite and non-negative"));
        }
        if panels == 0 || order == 0 {
            return Err(invalid("panels", "panel count and order must be positive"));
        }
        let (x, w) = gauss_legendre(order);
        let edge = |i: usize| horizon * (i as f64 / panels as f64).powi(4);
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        if horizon > 0.0 {
            for i in 0..panels {
                let (a, b) = (edge(i), edge(i + 1));
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for (xj, wj) in x.iter().zip(&w) {
                    nodes.push(mid + half * xj);
                    weights.push(half * wj);
                }
            }
        }
        Ok(Self { horizon, panels, order, nodes, weights })
    }

    pub fn standard(horizon: f64) -> Result<Self> {
        Self::graded(horizon, DEFAULT_PANELS, DEFAULT_ORDER)
    }

    /// Same rule on `[0, t]`.
    pub fn rescaled(&self, t: f64) -> Result<Self> {
        Self::graded(t, self.panels, self.order)
    }

    /// `factor` times as many panels.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::graded(self.horizon, self.panels * factor.max(1), self.order)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }
}

/// Chebyshev-Lobatto times on `[0, horizon]`, increasing, endpoints included.
pub fn lobatto_times(count: usize, horizon: f64) -> Vec<f64> {
    if count < 2 {
        return vec![horizon];
    }
    let m = (count - 1) as f64;
    (0..count).map(|j| 0.5 * horizon * (1.0 - (std::f64::consts::PI * j as f64 / m).cos())).collect()
}

/// Density and velocity sampled at a set of times, interpolated in between.
#[derive(Debug, Clone)]
pub struct MildTrajectory {
    grid: Grid,
    times: Vec<f64>,
    bary: Vec<f64>,
    n: Vec<ScalarField>,
    u: Vec<VectorField>,
}

impl MildTrajectory {
    pub fn from_samples(grid: &Grid, times: Vec<f64>, n: Vec<ScalarField>, u: Vec<VectorField>) -> Result<Self> {
        if times.is_empty() || times.len() != n.len() || times.len() != u.len() {
            return Err(invalid("trajectory", "need one density and velocity per time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || !times.iter().all(|t| t.is_finite()) {
            return Err(invalid("trajectory", "times must be finite and strictly increasing"));
        }
        for (nj, uj) in n.iter().zip(&u) {
            if !nj.grid().same_as(grid) || !uj.grid().same_as(grid) {
                return Err(Error::GridMismatch);
            }
            nj.ensure_finite("trajectory density")?;
            if !uj.is_finite() {
                return Err(Error::NonFinite("trajectory velocity".into()));
            }
        }
        let bary = barycentric_weights(&times);
        Ok(Self { grid: grid.clone(), times, bary, n, u })
    }

    /// `(e^{tΔ}n0, e^{tΔ}u0)` at the Lobatto times of `[0, horizon]`.
    pub fn heat_flow(n0: &ScalarField, u0: &VectorField, horizon: f64, count: usize) -> Result<Self> {
        check_time(horizon)?;
        let grid = n0.grid().clone();
        let times = lobatto_times(count.max(2), horizon);
        let nh = n0.to_spectral();
        let (a, b) = u0.to_spectral();
        let mut n = Vec::with_capacity(times.len());
        let mut u = Vec::with_capacity(times.len());
        for &t in &times {
            n.push(nh.heat_unchecked(t).to_real());
            u.push(VectorField::from_spectral(&a.heat_unchecked(t), &b.heat_unchecked(t)));
        }
        Self::from_samples(&grid, times, n, u)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn density(&self, i: usize) -> &ScalarField {
        &self.n[i]
    }

    pub fn velocity(&self, i: usize) -> &VectorField {
        &self.u[i]
    }

    pub fn final_density(&self) -> &ScalarField {
        self.n.last().expect("non-empty")
    }

    pub fn final_velocity(&self) -> &VectorField {
        self.u.last().expect("non-empty")
    }

    /// Barycentric interpolation in time.
    pub fn at(&self, s: f64) -> (ScalarField, VectorField) {
        if let Some(j) = self.times.iter().position(|&t| t == s) {
            return (self.n[j].clone(), self.u[j].clone());
        }
        let raw: Vec<f64> = self.times.iter().zip(&self.bary).map(|(&t, &w)| w / (s - t)).collect();
        let total: f64 = raw.iter().sum();
        let mut n = ScalarField::zeros(&self.grid);
        let mut u = VectorField::zeros(&self.grid);
        for (j, r) in raw.iter().enumerate() {
            n.axpy(r / total, &self.n[j]);
            u.axpy(r / total, &self.u[j]);
        }
        (n, u)
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map_pairs(|n, u| (n.scaled(a), u.scaled(a)))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_pairs(other, |a, b, x, y| (a.add(x), b.add(y)))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_pairs(other, |a, b, x, y| (a.sub(x), b.sub(y)))
    }

    fn map_pairs(&self, f: impl Fn(&ScalarField, &VectorField) -> (ScalarField, VectorField)) -> Self {
        let (n, u) = self.n.iter().zip(&self.u).map(|(a, b)| f(a, b)).unzip();
        Self { grid: self.grid.clone(), times: self.times.clone(), bary: self.bary.clone(), n, u }
    }

    /// Panics unless both trajectories share their sample times.
    fn zip_pairs(
        &self,
        other: &Self,
        f: impl Fn(&ScalarField, &VectorField, &ScalarField, &VectorField) -> (ScalarField, VectorField),
    ) -> Self {
        assert_eq!(self.times, other.times, "trajectories sampled at different times");
        let (n, u) = (0..self.len()).map(|j| f(&self.n[j], &self.u[j], &other.n[j], &other.u[j])).unzip();
        Self { grid: self.grid.clone(), times: self.times.clone(), bary: self.bary.clone(), n, u }
    }
}

fn barycentric_weights(times: &[f64]) -> Vec<f64> {
    let scale = times.last().unwrap() - times[0];
    let scale = if scale > 0.0 { scale } else { 1.0 };
    (0..times.len())
        .map(|j| {
            let p: f64 = (0..times.len()).filter(|&k| k != j).map(|k| (times[j] - times[k]) / scale).product();
            1.0 / p
        })
        .collect()
}

fn chem_gradient(n_hat: &SpectralField) -> VectorField {
    spectral_gradient(&periodic_potential(n_hat))
}

/// Spectrum of `∇·(m∇c[n] + m u)`.
fn density_flux_divergence(m: &ScalarField, n: &ScalarField, u: &VectorField) -> SpectralField {
    let flux = chem_gradient(&n.to_spectral()).add(u).times(m);
    let (a, b) = flux.to_spectral();
    spectral_divergence(&a, &b).dealias()
}

/// Spectrum of `P∇·(∇c[b]⊗∇c[n] + v⊗u)` with `(a⊗b)_ij = a_i b_j`.
fn velocity_flux_divergence(b: &ScalarField, v: &VectorField, n: &ScalarField, u: &VectorField) -> (SpectralField, SpectralField) {
    let (gb, gn) = if std::ptr::eq(b, n) {
        let g = chem_gradient(&n.to_spectral());
        (g.clone(), g)
    } else {
        (chem_gradient(&b.to_spectral()), chem_gradient(&n.to_spectral()))
    };
    let row = |p: &ScalarField, q: &ScalarField| {
        let t1 = p.mul(gn.first()).add(&q.mul(u.first()));
        let t2 = p.mul(gn.second()).add(&q.mul(u.second()));
        let (a, c) = forward_pair(&t1, &t2);
        spectral_divergence(&a, &c)
    };
    let mut r1 = row(gb.first(), v.first());
    let mut r2 = row(gb.second(), v.second());
    leray_in_place(&mut r1, &mut r2);
    (r1.dealias(), r2.dealias())
}

fn check_pair(p1: &MildTrajectory, p2: &MildTrajectory, t: f64, quad: &TimeQuadrature) -> Result<()> {
    if !p1.grid.same_as(&p2.grid) {
        return Err(Error::GridMismatch);
    }
    check_time(t)?;
    if (quad.horizon() - t).abs() > 1e-12 * t.max(1.0) {
        return Err(invalid("quadrature", "rule horizon must equal the evaluation time"));
    }
    Ok(())
}

fn sum_spectra(grid: &Grid, parts: impl ParallelIterator<Item = SpectralField>) -> SpectralField {
    parts.reduce(|| SpectralField::zeros(grid), |a, b| a.add(&b))
}

/// `∫_0^t e^{(t-s)Δ}∇·(m∇c + m u) ds` for `(m, v) = p1` and `(n, u) = p2`.
pub fn b1(p1: &MildTrajectory, p2: &MildTrajectory, t: f64, quad: &TimeQuadrature) -> Result<ScalarField> {
    check_pair(p1, p2, t, quad)?;
    let grid = p1.grid.clone();
    let total = sum_spectra(
        &grid,
        quad.nodes().par_iter().zip(quad.weights().par_iter()).map(|(&s, &w)| {
            let (m, v) = p1.at(s);
            let div = if std::ptr::eq(p1, p2) {
                density_flux_divergence(&m, &m, &v)
            } else {
                let (n, u) = p2.at(s);
                density_flux_divergence(&m, &n, &u)
            };
            div.heat_unchecked(t - s).scaled(w)
        }),
    );
    let out = total.to_real();
    out.ensure_finite("B1")?;
    Ok(out)
}

/// `∫_0^t e^{(t-s)Δ}P∇·(∇c[b]⊗∇c[n] + v⊗u) ds` for `(b, v) = p1` and `(n, u) = p2`.
pub fn b2(p1: &MildTrajectory, p2: &MildTrajectory, t: f64, quad: &TimeQuadrature) -> Result<VectorField> {
    check_pair(p1, p2, t, quad)?;
    let grid = p1.grid.clone();
    let (s1, s2) = quad
        .nodes()
        .par_iter()
        .zip(quad.weights().par_iter())
        .map(|(&s, &w)| {
            let (b, v) = p1.at(s);
            let (r1, r2) = if std::ptr::eq(p1, p2) {
                velocity_flux_divergence(&b, &v, &b, &v)
            } else {
                let (n, u) = p2.at(s);
                velocity_flux_divergence(&b, &v, &n, &u)
            };
            let e = t - s;
            (r1.heat_unchecked(e).scaled(w), r2.heat_unchecked(e).scaled(w))
        })
        .reduce(|| (SpectralField::zeros(&grid), SpectralField::zeros(&grid)), |a, b| (a.0.add(&b.0), a.1.add(&b.1)));
    let (a, b) = inverse_pair(&s1, &s2);
    let out = VectorField::new(a, b)?;
    if !out.is_finite() {
        return Err(Error::NonFinite("B2".into()));
    }
    Ok(out)
}

/// `sup_t t^{1/4}(‖n‖_{4/3} + ‖u‖_4) + sup_t (‖n‖_1 + ‖u‖_2)` over the samples.
pub fn et_norm(traj: &MildTrajectory) -> f64 {
    let mut weighted = 0.0f64;
    let mut plain = 0.0f64;
    for j in 0..traj.len() {
        let (n, u) = (&traj.n[j], &traj.u[j]);
        let w = traj.times[j].max(0.0).powf(0.25)
            * (n.lp_norm(4.0 / 3.0).expect("valid exponent") + u.lp_norm(4.0).expect("valid exponent"));
        weighted = weighted.max(w);
        plain = plain.max(n.lp_norm(1.0).expect("valid exponent") + u.l2_norm());
    }
    weighted + plain
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub iterations: usize,
    pub nodes: usize,
    pub panels: usize,
    pub order: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS, nodes: DEFAULT_NODES, panels: DEFAULT_PANELS, order: DEFAULT_ORDER }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: MildTrajectory,
    /// `d_j = ‖x_{j+1} - x_j‖_{E_T}` for `j = 0..K`.
    pub distances: Vec<f64>,
    pub heat_norm: f64,
}

impl PicardOutcome {
    /// `d_{j+1}/d_j`, cut off once the distances reach roundoff.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        let floor = ROUNDOFF_FLOOR * self.heat_norm.max(f64::MIN_POSITIVE);
        self.distances.windows(2).take_while(|w| w[1] > floor).map(|w| w[1] / w[0]).collect()
    }
}

/// One application of the Picard map `x -> heat - B(x, x)`.
pub fn picard_map(heat: &MildTrajectory, x: &MildTrajectory, cfg: &PicardConfig) -> Result<MildTrajectory> {
    let mut n = Vec::with_capacity(heat.len());
    let mut u = Vec::with_capacity(heat.len());
    for (j, &t) in heat.times.iter().enumerate() {
        let quad = TimeQuadrature::graded(t, cfg.panels, cfg.order)?;
        n.push(heat.n[j].sub(&b1(x, x, t, &quad)?));
        u.push(heat.u[j].sub(&b2(x, x, t, &quad)?));
    }
    MildTrajectory::from_samples(&heat.grid, heat.times.clone(), n, u)
}

/// Picard iteration from the heat flow of the data.
///
/// Fails with [`Error::PicardDivergence`] when the distances grow three times in
/// a row above the roundoff floor.
pub fn picard_iterate(n0: &ScalarField, u0: &VectorField, horizon: f64, cfg: &PicardConfig) -> Result<PicardOutcome> {
    if cfg.nodes < 2 || cfg.panels == 0 || cfg.order == 0 {
        return Err(invalid("picard", "needs at least two time nodes and a non-empty quadrature"));
    }
    if !n0.grid().same_as(u0.grid()) {
        return Err(Error::GridMismatch);
    }
    let heat = MildTrajectory::heat_flow(n0, u0, horizon, cfg.nodes)?;
    let heat_norm = et_norm(&heat);
    let floor = ROUNDOFF_FLOOR * heat_norm;
    let mut x = heat.clone();
    let mut distances = Vec::with_capacity(cfg.iterations);
    for j in 0..cfg.iterations {
        let next = picard_map(&heat, &x, cfg)?;
        let d = et_norm(&next.sub(&x));
        distances.push(d);
        x = next;
        if diverging(&distances, floor) {
            return Err(Error::PicardDivergence(j + 1));
        }
        log::debug!("picard iterate {}: distance {d:.3e}", j + 1);
    }
    Ok(PicardOutcome { trajectory: x, distances, heat_norm })
}

/// True when the last three distances each grew and sit above `floor`.
pub fn diverging(distances: &[f64], floor: f64) -> bool {
    distances.len() >= 4 && distances[distances.len() - 4..].windows(2).all(|w| w[1] > w[0] && w[1] > floor)
}

/// `‖x - (heat - B(x, x))‖_{E_T}` for a trajectory and the data it started from.
pub fn fixed_point_residual(x: &MildTrajectory, n0: &ScalarField, u0: &VectorField, cfg: &PicardConfig) -> Result<f64> {
    let heat = MildTrajectory::heat_flow(n0, u0, x.horizon(), x.len())?;
    if heat.times != x.times {
        return Err(invalid("trajectory", "must be sampled at the Lobatto times"));
    }
    Ok(et_norm(&x.sub(&picard_map(&heat, x, cfg)?)))
}

/// `sup_t t^{1-1/p}‖n(t)‖_p` and, for `p < 2`, `sup_t t^{1-1/p}‖u(t)‖_{2p/(2-p)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingRate {
    pub p: f64,
    pub density: f64,
    pub velocity: Option<f64>,
}

pub fn smoothing_rates(traj: &MildTrajectory, exponents: &[f64]) -> Result<Vec<SmoothingRate>> {
    exponents
        .iter()
        .map(|&p| {
            if !(p >= 1.0) {
                return Err(invalid("p", "smoothing exponent must be at least 1"));
            }
            let power = if p.is_infinite() { 1.0 } else { 1.0 - 1.0 / p };
            let q = if p < 2.0 { Some(2.0 * p / (2.0 - p)) } else { None };
            let mut density = 0.0f64;
            let mut velocity = q.map(|_| 0.0f64);
            for (j, &t) in traj.times.iter().enumerate() {
                if t <= 0.0 && power > 0.0 {
                    continue;
                }
                let w = if power == 0.0 { 1.0 } else { t.powf(power) };
                density = density.max(w * traj.n[j].lp_norm(p)?);
                if let (Some(q), Some(v)) = (q, velocity.as_mut()) {
                    *v = v.max(w * traj.u[j].lp_norm(q)?);
                }
            }
            Ok(SmoothingRate { p, density, velocity })
        })
        .collect()
}

/// Exponents whose weighted sup grows by more than `rel_tol` from `coarse` to `fine`.
pub fn refinement_flags(coarse: &[SmoothingRate], fine: &[SmoothingRate], rel_tol: f64) -> Vec<f64> {
    coarse
        .iter()
        .zip(fine)
        .filter(|(c, f)| {
            let grows = |a: f64, b: f64| b > a * (1.0 + rel_tol) + f64::MIN_POSITIVE;
            grows(c.density, f.density) || matches!((c.velocity, f.velocity), (Some(a), Some(b)) if grows(a, b))
        })
        .map(|(c, _)| c.p)
        .collect()
}

#[cfg(test)]
mod tests;
