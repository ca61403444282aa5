use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Side length at or above which row transforms are spread over the rayon pool.
const PARALLEL_MIN_N: usize = 128;

/// Periodic square box `[-L/2, L/2)^2` sampled on `N x N` points.
///
/// Cheap to clone; the wavenumber tables and FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Inner>,
}

struct Inner {
    n: usize,
    length: f64,
    modes: Vec<i64>,
    k: Vec<f64>,
    k_deriv: Vec<f64>,
    keep: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("N must be even and >= 16, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("L must be positive, got {length}")));
        }
        let half = (n / 2) as i64;
        let modes: Vec<i64> = (0..n as i64).map(|i| if i < half { i } else { i - n as i64 }).collect();
        let dk = 2.0 * PI / length;
        let k: Vec<f64> = modes.iter().map(|&m| m as f64 * dk).collect();
        let k_deriv = modes
            .iter()
            .map(|&m| if m == -half { 0.0 } else { m as f64 * dk })
            .collect();
        let keep = modes.iter().map(|&m| 3 * m.unsigned_abs() as usize <= n).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(Inner { n, length, modes, k, k_deriv, keep, forward, inverse }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Number of samples, `N^2`.
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Wavenumber spacing `2 pi / L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.inner.length
    }

    /// Coordinate of sample `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.inner.length + i as f64 * self.spacing()
    }

    /// Position of flat index `idx = i1 * N + i2`.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let n = self.inner.n;
        (self.coord(idx / n), self.coord(idx % n))
    }

    /// Signed integer mode numbers in FFT order, `0..N/2-1, -N/2..-1`.
    pub fn modes(&self) -> &[i64] {
        &self.inner.modes
    }

    /// Wavenumbers `2 pi m / L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.k
    }

    /// Wavenumbers used for first derivatives; the Nyquist entry is zero.
    pub fn derivative_wavenumbers(&self) -> &[f64] {
        &self.inner.k_deriv
    }

    pub fn k_squared(&self, idx: usize) -> f64 {
        let n = self.inner.n;
        let (a, b) = (self.inner.k[idx / n], self.inner.k[idx % n]);
        a * a + b * b
    }

    /// Whether mode `idx` survives the 2/3 rule.
    pub fn keeps(&self, idx: usize) -> bool {
        let n = self.inner.n;
        self.inner.keep[idx / n] && self.inner.keep[idx % n]
    }

    /// Full dealiasing table in flat FFT order.
    pub fn dealias_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.keeps(i)).collect()
    }

    /// Flat index of the mode `-k` for the mode at `idx`.
    pub fn mirror(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let (i1, i2) = (idx / n, idx % n);
        ((n - i1) % n) * n + (n - i2) % n
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.length == other.inner.length)
    }

    /// Unnormalised 2D transform in place.
    pub(crate) fn fft2(&self, data: &mut [Complex64], dir: Direction) {
        let n = self.inner.n;
        debug_assert_eq!(data.len(), n * n);
        let plan = match dir {
            Direction::Forward => &self.inner.forward,
            Direction::Inverse => &self.inner.inverse,
        };
        let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
        rows(plan.as_ref(), data, n);
        transpose(data, &mut tmp, n);
        rows(plan.as_ref(), &mut tmp, n);
        transpose(&tmp, data, n);
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.inner.n).field("length", &self.inner.length).finish()
    }
}

fn rows(plan: &dyn Fft<f64>, data: &mut [Complex64], n: usize) {
    let scratch_len = plan.get_inplace_scratch_len();
    if n >= PARALLEL_MIN_N {
        let rows_per_task = (n / 16).max(1);
        data.par_chunks_mut(n * rows_per_task).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, chunk| plan.process_with_scratch(chunk, scratch),
        );
    } else {
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        plan.process_with_scratch(data, &mut scratch);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 32;
    let body = |(bi, band): (usize, &mut [Complex64])| {
        let r0 = bi * B;
        let rows = band.len() / n;
        for c0 in (0..n).step_by(B) {
            for r in r0..r0 + rows {
                for c in c0..(c0 + B).min(n) {
                    band[(r - r0) * n + c] = src[c * n + r];
                }
            }
        }
    };
    if n >= PARALLEL_MIN_N {
        dst.par_chunks_mut(B * n).enumerate().for_each(body);
    } else {
        dst.chunks_mut(B * n).enumerate().for_each(body);
    }
}
