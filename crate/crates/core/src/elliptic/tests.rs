use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::spectral::{laplacian, leray_project};

fn gaussian(grid: &Grid, mass: f64, sigma: f64) -> ScalarField {
    let s2 = sigma * sigma;
    ScalarField::from_fn(grid, |x, y| mass / (2.0 * PI * s2) * (-(x * x + y * y) / (2.0 * s2)).exp())
}

/// Radial potential `-(1/2pi) integral log|x-y| n(y) dy` by 1D quadrature:
/// `-(1/2pi)[log r * m(r) + integral_r^inf log s * n(s) 2 pi s ds]`.
fn radial_potential(profile: impl Fn(f64) -> f64 + Copy, r: f64) -> f64 {
    let inner = if r > 0.0 {
        integrate(|s| profile(s) * 2.0 * PI * s, 0.0, r, 1e-15, 1e-14).unwrap()
    } else {
        0.0
    };
    let outer = integrate(|s| s.ln() * profile(s) * 2.0 * PI * s, r, r + 12.0, 1e-15, 1e-14).unwrap()
        + integrate_to_infinity(|s| s.ln() * profile(s) * 2.0 * PI * s, r + 12.0, 1e-16, 1e-14).unwrap();
    let log_r = if r > 0.0 { r.ln() } else { 0.0 };
    -(log_r * inner + outer) / (2.0 * PI)
}

fn noise(grid: &Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::from_vec(grid, data).unwrap()
}

#[test]
fn pad_must_be_at_least_two() {
    assert!(PoissonVariant::free_space(1).is_err());
    assert!(PoissonVariant::free_space(2).is_ok());
    let g = Grid::new(16, 1.0).unwrap();
    assert!(PoissonSolver::new(&g, PoissonVariant::FreeSpace { pad: 0 }).is_err());
}

#[test]
fn periodic_single_mode() {
    let g = Grid::new(32, 40.0).unwrap();
    let w = 2.0 * PI / 40.0;
    let n = ScalarField::from_fn(&g, |x, _| (w * x).cos());
    let c = solve_chemo(&n, PoissonVariant::Periodic).unwrap();
    let want = n.scaled(1.0 / (w * w));
    assert!(c.sub(&want).sup_norm() < 1e-11);
}

#[test]
fn zero_density_gives_zero_potential() {
    let g = Grid::new(32, 10.0).unwrap();
    for v in [PoissonVariant::Periodic, PoissonVariant::FreeSpace { pad: 2 }] {
        let p = PoissonSolver::new(&g, v).unwrap().solve(&ScalarField::zeros(&g)).unwrap();
        assert_eq!(p.c.sup_norm(), 0.0);
        assert_eq!(p.grad.sup_norm(), 0.0);
    }
}

#[test]
fn rejects_non_finite_density() {
    let g = Grid::new(16, 10.0).unwrap();
    let mut n = ScalarField::zeros(&g);
    n.as_mut_slice()[0] = f64::INFINITY;
    assert!(solve_chemo(&n, PoissonVariant::Periodic).is_err());
    assert!(grad_chemo(&n, PoissonVariant::default()).is_err());
}

#[test]
fn periodic_residual() {
    let g = Grid::new(64, 13.0).unwrap();
    let n = noise(&g, 3);
    let c = solve_chemo(&n, PoissonVariant::Periodic).unwrap();
    let r = laplacian(&c).add(&n).map(|v| v - n.mean());
    assert!(r.l2_norm() <= 1e-10 * n.l2_norm());
    assert!(c.mean().abs() < 1e-12);
}

#[test]
fn freespace_center_value_matches_radial_quadrature() {
    let g = Grid::new(256, 40.0).unwrap();
    let n = gaussian(&g, 1.0, 1.0);
    let c = solve_chemo(&n, PoissonVariant::default()).unwrap();
    let profile = |r: f64| (-(r * r) / 2.0).exp() / (2.0 * PI);
    let want = radial_potential(profile, 0.0);
    // closed form: -(ln 2 - gamma) / (4 pi)
    assert!((want + (2f64.ln() - 0.577_215_664_901_532_9) / (4.0 * PI)).abs() < 1e-12);
    let idx = g.n() / 2 * g.n() + g.n() / 2;
    assert!((c.as_slice()[idx] - want).abs() < 1e-6, "{} vs {want}", c.as_slice()[idx]);
}

#[test]
fn freespace_agrees_with_radial_oracle_at_64_radii() {
    let g = Grid::new(256, 40.0).unwrap();
    let sigma = 1.3;
    let n = gaussian(&g, 2.0, sigma);
    let c = solve_chemo(&n, PoissonVariant::default()).unwrap();
    let profile = move |r: f64| 2.0 / (2.0 * PI * sigma * sigma) * (-(r * r) / (2.0 * sigma * sigma)).exp();
    let mid = g.n() / 2;
    let mut worst = 0.0f64;
    for k in 0..64 {
        let i = mid + k;
        let r = g.coord(i);
        let got = c.as_slice()[i * g.n() + mid];
        worst = worst.max((got - radial_potential(profile, r)).abs());
    }
    assert!(worst < 1e-6, "worst deviation {worst:e}");
}

#[test]
fn freespace_far_field_gradient() {
    let g = Grid::new(256, 40.0).unwrap();
    let n = gaussian(&g, 1.0, 1.0);
    let grad = grad_chemo(&n, PoissonVariant::default()).unwrap();
    let mid = g.n() / 2;
    let i = mid + (10.0 / g.spacing()).round() as usize;
    let r = g.coord(i);
    let got = grad.magnitude().as_slice()[i * g.n() + mid];
    let want = 1.0 / (2.0 * PI * r);
    assert!((got / want - 1.0).abs() < 1e-2, "{got} vs {want}");
    // points inward
    assert!(grad.first().as_slice()[i * g.n() + mid] < 0.0);
}

#[test]
fn truncation_is_flagged() {
    let g = Grid::new(64, 10.0).unwrap();
    let solver = PoissonSolver::new(&g, PoissonVariant::default()).unwrap();
    assert!(!solver.solve(&gaussian(&g, 1.0, 0.5)).unwrap().truncated());
    assert!(solver.solve(&gaussian(&g, 1.0, 2.0)).unwrap().truncated());
}

#[test]
fn mean_shift_of_constant_is_zero() {
    let g = Grid::new(32, 10.0).unwrap();
    let c = ScalarField::constant(&g, 3.5);
    let cm = mean_shifted_potential(&c, (0.0, 0.0), 2.0).unwrap();
    assert!(cm.sup_norm() < 1e-14);
}

#[test]
fn mean_shift_of_odd_function_is_identity() {
    let g = Grid::new(32, 10.0).unwrap();
    let c = ScalarField::from_fn(&g, |x, _| 2.0 * x);
    let cm = mean_shifted_potential(&c, (0.0, 0.0), 3.0).unwrap();
    assert!(cm.sub(&c).sup_norm() < 1e-13);
}

#[test]
fn mean_shift_rejects_escaping_ball() {
    let g = Grid::new(32, 10.0).unwrap();
    let c = ScalarField::zeros(&g);
    assert!(mean_shifted_potential(&c, (4.0, 0.0), 2.0).is_err());
    assert!(mean_shifted_potential(&c, (0.0, 0.0), 5.5).is_err());
    assert!(mean_shifted_potential(&c, (0.0, 0.0), -1.0).is_err());
}

#[test]
fn pressure_of_zero_inputs() {
    let g = Grid::new(32, 10.0).unwrap();
    let p = recover_pressure(&VectorField::zeros(&g), &ScalarField::zeros(&g), &VectorField::zeros(&g)).unwrap();
    assert_eq!(p.sup_norm(), 0.0);
}

#[test]
fn taylor_green_pressure() {
    let g = Grid::new(32, 2.0 * PI).unwrap();
    let a = 1.5;
    let u = VectorField::from_fn(&g, |x, y| (a * x.sin() * y.cos(), -a * x.cos() * y.sin()));
    let p = recover_pressure(&u, &ScalarField::zeros(&g), &VectorField::zeros(&g)).unwrap();
    let want = ScalarField::from_fn(&g, |x, y| a * a / 4.0 * ((2.0 * x).cos() + (2.0 * y).cos()));
    assert!(p.sub(&want).sup_norm() < 1e-10);
}

#[test]
fn radial_drift_is_a_pressure_gradient() {
    let g = Grid::new(256, 40.0).unwrap();
    let n = gaussian(&g, 4.0 * PI, 1.0);
    let grad_c = grad_chemo(&n, PoissonVariant::default()).unwrap();
    let force = grad_c.times(&n);
    let p = recover_pressure(&VectorField::zeros(&g), &n, &grad_c).unwrap();
    let gp = crate::spectral::gradient(&p).unwrap();
    assert!(gp.sub(&force).l2_norm() <= 1e-8 * force.l2_norm());
    assert!(leray_project(&force).l2_norm() <= 1e-8 * force.l2_norm());
}

#[test]
fn sampled_bmo_of_constant_vanishes() {
    let g = Grid::new(32, 10.0).unwrap();
    let v = sampled_bmo(&ScalarField::constant(&g, 1.0), &[1.0, 2.0], 1.0).unwrap();
    assert!(v < 1e-14);
    assert!(sampled_bmo(&ScalarField::zeros(&g), &[6.0], 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solve_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, free in any::<bool>()) {
        let g = Grid::new(32, 8.0).unwrap();
        let v = if free { PoissonVariant::default() } else { PoissonVariant::Periodic };
        let (n1, n2) = (noise(&g, seed), noise(&g, seed.wrapping_add(1)));
        let s = PoissonSolver::new(&g, v).unwrap();
        let lhs = s.potential(&n1.scaled(a).add(&n2.scaled(b))).unwrap();
        let rhs = s.potential(&n1).unwrap().scaled(a).add(&s.potential(&n2).unwrap().scaled(b));
        prop_assert!(lhs.sub(&rhs).sup_norm() <= 1e-12 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn ball_average_of_shift_vanishes(seed in any::<u64>(), cx in -2.0f64..2.0, cy in -2.0f64..2.0, r in 0.5f64..2.5) {
        let g = Grid::new(32, 10.0).unwrap();
        let c = noise(&g, seed);
        let cm = mean_shifted_potential(&c, (cx, cy), r).unwrap();
        prop_assert!(ball_average(&cm, (cx, cy), r).unwrap().abs() <= 1e-12 * c.sup_norm());
    }
}
