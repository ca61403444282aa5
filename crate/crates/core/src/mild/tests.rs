use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::state::{gaussian_density, random_solenoidal};

fn small_grid() -> Grid {
    Grid::new(32, 16.0).unwrap()
}

fn gaussian(mass: f64, sigma: f64, g: &Grid) -> ScalarField {
    gaussian_density(mass, sigma, (0.0, 0.0), g).unwrap().into_field()
}

fn frozen(n: &ScalarField, u: &VectorField, horizon: f64) -> MildTrajectory {
    let times = lobatto_times(5, horizon);
    let k = times.len();
    MildTrajectory::from_samples(n.grid(), times, vec![n.clone(); k], vec![u.clone(); k]).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn quadrature_invariants() {
    for &(t, q, o) in &[(0.01, 8, 8), (1.0, 3, 5), (7.5, 16, 4)] {
        let quad = TimeQuadrature::graded(t, q, o).unwrap();
        assert!(quad.weights().iter().all(|&w| w > 0.0));
        assert!(quad.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(quad.nodes()[0] > 0.0 && *quad.nodes().last().unwrap() < t);
        assert!((quad.weights().iter().sum::<f64>() - t).abs() < 1e-10);
    }
}

#[test]
fn quadrature_is_exact_for_low_degree_polynomials() {
    let quad = TimeQuadrature::graded(2.0, 5, 4).unwrap();
    assert!((quad.integrate(|s| s.powi(7)) - 2f64.powi(8) / 8.0).abs() < 1e-12);
}

#[test]
fn quadrature_converges_on_inverse_root_singularity() {
    // ∫_0^1 s^{-3/4} ds = 4
    let coarse = TimeQuadrature::graded(1.0, 8, 8).unwrap().integrate(|s| s.powf(-0.75));
    let fine = TimeQuadrature::graded(1.0, 32, 8).unwrap().integrate(|s| s.powf(-0.75));
    assert!((fine - 4.0).abs() < (coarse - 4.0).abs());
}

#[test]
fn quadrature_rejects_bad_input() {
    assert!(TimeQuadrature::graded(-1.0, 4, 4).is_err());
    assert!(TimeQuadrature::graded(1.0, 0, 4).is_err());
    assert!(TimeQuadrature::graded(f64::NAN, 4, 4).is_err());
    assert!(TimeQuadrature::graded(0.0, 4, 4).unwrap().is_empty());
}

#[test]
fn lobatto_times_cover_the_interval() {
    let t = lobatto_times(9, 0.5);
    assert_eq!(t[0], 0.0);
    assert!((t[8] - 0.5).abs() < 1e-15);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn interpolation_reproduces_quadratics_in_time() {
    let g = small_grid();
    let a = gaussian(1.0, 1.0, &g);
    let b = ScalarField::from_fn(&g, |x, y| (x * 0.3).sin() * y.cos());
    let f = |s: f64| a.add(&b.scaled(s)).add(&a.scaled(s * s));
    let times = lobatto_times(7, 2.0);
    let n: Vec<_> = times.iter().map(|&s| f(s)).collect();
    let u = vec![VectorField::zeros(&g); times.len()];
    let traj = MildTrajectory::from_samples(&g, times, n, u).unwrap();
    for &s in &[0.1, 0.77, 1.93] {
        let (ns, _) = traj.at(s);
        assert!(ns.sub(&f(s)).sup_norm() < 1e-12);
    }
}

#[test]
fn trajectory_rejects_bad_samples() {
    let g = small_grid();
    let z = ScalarField::zeros(&g);
    let v = VectorField::zeros(&g);
    assert!(MildTrajectory::from_samples(&g, vec![0.0, 0.0], vec![z.clone(); 2], vec![v.clone(); 2]).is_err());
    assert!(MildTrajectory::from_samples(&g, vec![0.0, 1.0], vec![z.clone(); 1], vec![v.clone(); 2]).is_err());
    let bad = z.map(|_| f64::NAN);
    assert!(MildTrajectory::from_samples(&g, vec![0.0], vec![bad], vec![v]).is_err());
}

#[test]
fn heat_flow_starts_at_the_data() {
    let g = small_grid();
    let n0 = gaussian(2.0, 1.0, &g);
    let u0 = random_solenoidal(0.1, 3, 4, &g).unwrap().into_field();
    let traj = MildTrajectory::heat_flow(&n0, &u0, 0.1, 9).unwrap();
    assert_eq!(traj.times()[0], 0.0);
    assert!(traj.density(0).sub(&n0).sup_norm() < 1e-14);
    assert!(traj.velocity(0).sub(&u0).sup_norm() < 1e-14);
}

#[test]
fn bilinear_forms_vanish_on_zero() {
    let g = small_grid();
    let zero = frozen(&ScalarField::zeros(&g), &VectorField::zeros(&g), 0.01);
    let other = frozen(&gaussian(1.0, 1.0, &g), &random_solenoidal(0.1, 1, 4, &g).unwrap().into_field(), 0.01);
    let quad = TimeQuadrature::standard(0.01).unwrap();
    assert_eq!(b1(&zero, &other, 0.01, &quad).unwrap().sup_norm(), 0.0);
    assert_eq!(b1(&other, &zero, 0.01, &quad).unwrap().sup_norm(), 0.0);
    assert_eq!(b2(&zero, &other, 0.01, &quad).unwrap().sup_norm(), 0.0);
    assert_eq!(b2(&other, &zero, 0.01, &quad).unwrap().sup_norm(), 0.0);
}

#[test]
fn bilinear_forms_at_time_zero_vanish() {
    let g = small_grid();
    let p = frozen(&gaussian(1.0, 1.0, &g), &VectorField::zeros(&g), 0.01);
    let quad = TimeQuadrature::standard(0.0).unwrap();
    assert_eq!(b1(&p, &p, 0.0, &quad).unwrap().sup_norm(), 0.0);
}

#[test]
fn bilinear_forms_need_matching_rule() {
    let g = small_grid();
    let p = frozen(&gaussian(1.0, 1.0, &g), &VectorField::zeros(&g), 0.01);
    let quad = TimeQuadrature::standard(0.02).unwrap();
    assert!(b1(&p, &p, 0.01, &quad).is_err());
}

#[test]
fn bilinearity() {
    let g = small_grid();
    let t = 0.01;
    let quad = TimeQuadrature::standard(t).unwrap();
    let p = MildTrajectory::heat_flow(&gaussian(1.0, 1.0, &g), &random_solenoidal(0.1, 5, 4, &g).unwrap().into_field(), t, 5)
        .unwrap();
    let q = MildTrajectory::heat_flow(&gaussian(0.5, 1.5, &g), &random_solenoidal(0.2, 6, 4, &g).unwrap().into_field(), t, 5)
        .unwrap();
    let r = MildTrajectory::heat_flow(&gaussian(0.3, 0.8, &g), &random_solenoidal(0.1, 7, 4, &g).unwrap().into_field(), t, 5)
        .unwrap();
    let a = 2.5;

    let base1 = b1(&p, &q, t, &quad).unwrap();
    let scale1 = base1.sup_norm();
    assert!(b1(&p.scaled(a), &q, t, &quad).unwrap().sub(&base1.scaled(a)).sup_norm() <= 1e-12 * a * scale1);
    let split1 = b1(&p, &q, t, &quad).unwrap().add(&b1(&p, &r, t, &quad).unwrap());
    assert!(b1(&p, &q.add(&r), t, &quad).unwrap().sub(&split1).sup_norm() <= 1e-12 * split1.sup_norm());

    let base2 = b2(&p, &q, t, &quad).unwrap();
    let scale2 = base2.sup_norm();
    assert!(b2(&p.scaled(a), &q, t, &quad).unwrap().sub(&base2.scaled(a)).sup_norm() <= 1e-12 * a * scale2);
    let split2 = b2(&p, &q, t, &quad).unwrap().add(&b2(&p, &r, t, &quad).unwrap());
    assert!(b2(&p, &q.add(&r), t, &quad).unwrap().sub(&split2).sup_norm() <= 1e-12 * split2.sup_norm());
}

#[test]
fn bilinear_forms_self_converge() {
    let g = small_grid();
    let t = 0.05;
    let m = frozen(&gaussian(1.0, 1.0, &g), &VectorField::zeros(&g), t);
    let n = frozen(&gaussian(2.0, 1.5, &g), &VectorField::zeros(&g), t);
    let quad = TimeQuadrature::standard(t).unwrap();
    let fine = quad.refined(4).unwrap();
    let half = quad.refined(2).unwrap();

    let (c1, f1, h1) = (b1(&m, &n, t, &quad).unwrap(), b1(&m, &n, t, &fine).unwrap(), b1(&m, &n, t, &half).unwrap());
    assert!(c1.sub(&f1).l2_norm() <= 1e-6 * f1.l2_norm());
    assert!(c1.sub(&h1).l2_norm() <= 1e-5 * h1.l2_norm());

    let (c2, f2, h2) = (b2(&m, &n, t, &quad).unwrap(), b2(&m, &n, t, &fine).unwrap(), b2(&m, &n, t, &half).unwrap());
    assert!(c2.sub(&f2).l2_norm() <= 1e-6 * f2.l2_norm());
    assert!(c2.sub(&h2).l2_norm() <= 1e-5 * h2.l2_norm());
}

#[test]
fn frozen_chemotaxis_term_matches_closed_form_in_time() {
    // For time-constant inputs B1(t) = ∫_0^t e^{(t-s)Δ}F ds = (1 - e^{tΔ})/(-Δ) F mode by mode.
    let g = small_grid();
    let t = 0.05;
    let m = gaussian(1.0, 1.0, &g);
    let p = frozen(&m, &VectorField::zeros(&g), t);
    let quad = TimeQuadrature::standard(t).unwrap();
    let got = b1(&p, &p, t, &quad).unwrap();
    let f = density_flux_divergence(&m, &m, &VectorField::zeros(&g));
    let gg = g.clone();
    let want = f
        .apply_real(|i| {
            let k = gg.k_squared(i);
            if k == 0.0 {
                t
            } else {
                -(-k * t).exp_m1() / k
            }
        })
        .to_real();
    assert!(got.sub(&want).sup_norm() <= 1e-12 * want.sup_norm());
}

#[test]
fn picard_on_zero_data_stays_zero() {
    let g = small_grid();
    let cfg = PicardConfig { iterations: 3, nodes: 5, ..Default::default() };
    let out = picard_iterate(&ScalarField::zeros(&g), &VectorField::zeros(&g), 0.01, &cfg).unwrap();
    assert!(out.distances.iter().all(|&d| d == 0.0));
    assert_eq!(et_norm(&out.trajectory), 0.0);
}

#[test]
fn picard_contracts_for_small_data() {
    let g = small_grid();
    let cfg = PicardConfig { iterations: 4, nodes: 9, ..Default::default() };
    let out = picard_iterate(&gaussian(0.1, 1.0, &g), &VectorField::zeros(&g), 0.01, &cfg).unwrap();
    let ratios = out.contraction_ratios();
    assert!(!ratios.is_empty(), "{:?}", out.distances);
    assert!(ratios.iter().all(|&r| r <= 0.5), "{ratios:?}");
}

#[test]
fn picard_limit_is_a_fixed_point() {
    let g = small_grid();
    let n0 = gaussian(0.8 * PI, 1.0, &g);
    let u0 = random_solenoidal(0.01, 9, 4, &g).unwrap().into_field();
    let cfg = PicardConfig { iterations: 3, nodes: 9, ..Default::default() };
    let out = picard_iterate(&n0, &u0, 0.01, &cfg).unwrap();
    let d_k = *out.distances.last().unwrap();
    let residual = fixed_point_residual(&out.trajectory, &n0, &u0, &cfg).unwrap();
    assert!(residual <= 2.0 * d_k, "{residual:e} vs {d_k:e}");
}

#[test]
fn divergence_heuristic() {
    assert!(!diverging(&[1.0, 2.0, 3.0], 0.0));
    assert!(diverging(&[1.0, 2.0, 3.0, 4.0], 0.0));
    assert!(!diverging(&[1.0, 2.0, 1.5, 4.0], 0.0));
    assert!(!diverging(&[1e-18, 2e-18, 3e-18, 4e-18], 1e-12));
    assert!(diverging(&[0.5, 0.1, 0.2, 0.3, 0.4], 1e-12));
}

#[test]
fn et_norm_of_zero_and_constant_trajectories() {
    let g = small_grid();
    let z = frozen(&ScalarField::zeros(&g), &VectorField::zeros(&g), 0.3);
    assert_eq!(et_norm(&z), 0.0);

    let n = gaussian(1.5, 1.0, &g);
    let u = random_solenoidal(0.2, 2, 4, &g).unwrap().into_field();
    let t = 0.3f64;
    let c = frozen(&n, &u, t);
    let want = t.powf(0.25) * (n.lp_norm(4.0 / 3.0).unwrap() + u.lp_norm(4.0).unwrap()) + n.lp_norm(1.0).unwrap() + u.l2_norm();
    assert!(rel(et_norm(&c), want) < 1e-14);
}

#[test]
fn et_norm_of_gaussian_heat_flow() {
    let g = Grid::new(128, 40.0).unwrap();
    let (mass, sigma, horizon) = (2.0, 1.0, 1.0f64);
    let traj = MildTrajectory::heat_flow(&gaussian(mass, sigma, &g), &VectorField::zeros(&g), horizon, 9).unwrap();
    let weighted: Vec<f64> =
        (0..traj.len()).map(|j| traj.times()[j].powf(0.25) * traj.density(j).lp_norm(4.0 / 3.0).unwrap()).collect();
    assert!(weighted.windows(2).all(|w| w[1] >= w[0]));
    // ‖G_s‖_p = M (2π s²)^{1/p - 1} p^{-1/p} for a Gaussian of variance s²
    let s2 = sigma * sigma + 2.0 * horizon;
    let p = 4.0 / 3.0;
    let closed = mass * (2.0 * PI * s2).powf(1.0 / p - 1.0) * p.powf(-1.0 / p);
    assert!(rel(*weighted.last().unwrap(), closed) < 1e-6);
    assert!(rel(et_norm(&traj), closed + mass) < 1e-6);
}

#[test]
fn smoothing_rates_of_heat_flow() {
    let g = Grid::new(128, 40.0).unwrap();
    let (mass, sigma, horizon) = (3.0, 1.0, 2.0f64);
    let traj = MildTrajectory::heat_flow(&gaussian(mass, sigma, &g), &VectorField::zeros(&g), horizon, 9).unwrap();
    let rates = smoothing_rates(&traj, &[1.0, 2.0, f64::INFINITY]).unwrap();
    assert!(rel(rates[0].density, mass) < 1e-12);
    assert_eq!(rates[0].velocity, Some(0.0));
    assert!(rates[1].velocity.is_none());
    let sup = mass * horizon / (2.0 * PI * (sigma * sigma + 2.0 * horizon));
    assert!(rel(rates[2].density, sup) < 1e-8);
    assert!(smoothing_rates(&traj, &[0.5]).is_err());
}

#[test]
fn refinement_flags_pick_growing_exponents() {
    let r = |p: f64, d: f64| SmoothingRate { p, density: d, velocity: None };
    let coarse = [r(1.0, 1.0), r(2.0, 1.0)];
    let fine = [r(1.0, 1.001), r(2.0, 1.5)];
    assert_eq!(refinement_flags(&coarse, &fine, 0.02), vec![2.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quadrature_weights_sum_to_horizon(t in 1e-4f64..10.0, q in 1usize..20, o in 1usize..10) {
        let quad = TimeQuadrature::graded(t, q, o).unwrap();
        prop_assert!((quad.weights().iter().sum::<f64>() - t).abs() < 1e-10 * t.max(1.0));
        prop_assert!(quad.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn b1_scales_linearly(a in -3.0f64..3.0) {
        let g = Grid::new(16, 16.0).unwrap();
        let t = 0.01;
        let quad = TimeQuadrature::graded(t, 4, 4).unwrap();
        let p = frozen(&gaussian(1.0, 1.0, &g), &random_solenoidal(0.1, 1, 3, &g).unwrap().into_field(), t);
        let base = b1(&p, &p.scaled(0.5), t, &quad).unwrap();
        let scaled = b1(&p.scaled(a), &p.scaled(0.5), t, &quad).unwrap();
        prop_assert!(scaled.sub(&base.scaled(a)).sup_norm() <= 1e-12 * (1.0 + a.abs()) * base.sup_norm());
    }
}
