//! Identity residuals evaluated along short runs.

use std::f64::consts::PI;

use pksns_core::elliptic::PoissonVariant;
use pksns_core::evolve::{Stepper, StepperConfig, TimeStep};
use pksns_core::functionals::{
    free_energy_identity_residual, mod_free_energy_rate_residual, moment_identity_residuals, theory_rate,
    vorticity_balance_residual, DiagnosticsSeries,
};
use pksns_core::spectral::Grid;
use pksns_core::state::{gaussian_density, random_solenoidal, DensityField};

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn coupled_series() -> DiagnosticsSeries {
    let g = Grid::new(128, 40.0).unwrap();
    let cfg = StepperConfig { dt: TimeStep::Fixed(0.005), ..Default::default() };
    let mut s = Stepper::new(&g, cfg).unwrap();
    let n = gaussian_density(4.0 * PI, 2.0, (0.0, 0.0), &g).unwrap();
    let u = random_solenoidal(0.5, 3, 10, &g).unwrap();
    let s0 = s.state(0.0, n, u).unwrap();
    s.run(&s0, 0.2, 0.01, &mut ()).unwrap().series
}

#[test]
fn navier_stokes_energy_balance() {
    let g = Grid::new(64, 40.0).unwrap();
    let cfg = StepperConfig { dt: TimeStep::Fixed(1e-4), ..Default::default() };
    let mut s = Stepper::new(&g, cfg).unwrap();
    let s0 = s.state(0.0, DensityField::zeros(&g), random_solenoidal(0.5, 8, 8, &g).unwrap()).unwrap();
    let series = s.run(&s0, 0.01, 1e-4, &mut ()).unwrap().series;
    let f0 = series.rows[0].free_energy;
    assert!((f0 - series.rows[0].kinetic).abs() == 0.0);
    let id = free_energy_identity_residual(&series);
    assert_eq!(id.residuals.len(), 100);
    assert!(id.max_residual() <= 1e-8 * (1.0 + f0.abs()), "{:e}", id.max_residual());
}

#[test]
fn moment_identities_on_a_coupled_run() {
    let series = coupled_series();
    let m = series.rows[0].mass;
    let umax = series.rows.iter().map(|r| r.linf_u).fold(0.0, f64::max);
    let res = moment_identity_residuals(&series);
    let first = max_abs(res.iter().flat_map(|(r1, _)| *r1));
    let second = max_abs(res.iter().map(|(_, r2)| *r2));
    assert!(first <= 5e-3 * m * umax, "{first:e}");
    assert!(second <= 0.01 * theory_rate(m).abs().max(4.0 * m), "{second:e}");
    assert!(series.rows.iter().all(|r| r.coupling.abs() > 0.0));
}

#[test]
fn vorticity_balance_on_a_coupled_run() {
    let series = coupled_series();
    let scale = series.rows.iter().map(|r| r.palinstrophy.abs() + r.vorticity_forcing.abs()).fold(0.0, f64::max);
    let res = max_abs(vorticity_balance_residual(&series));
    assert!(res <= 5e-3 * scale, "{res:e} vs {scale:e}");
}

#[test]
fn modified_free_energy_rate_on_a_coupled_run() {
    let series = coupled_series();
    let scale = 1.0 + series.rows.iter().map(|r| r.mod_free_energy_rate.abs()).fold(0.0, f64::max);
    let direct = max_abs(mod_free_energy_rate_residual(&series, |r| r.mod_free_energy_rate));
    let short = max_abs(mod_free_energy_rate_residual(&series, |r| r.mod_free_energy_rate_short));
    assert!(direct <= 5e-3 * scale, "{direct:e}");
    // the short form misses 1/4 |grad c|^2 + |grad u|^2
    assert!(short > 100.0 * direct, "{short:e} vs {direct:e}");
}

#[test]
fn periodic_and_free_space_runs_share_mass_bookkeeping() {
    let g = Grid::new(64, 20.0).unwrap();
    for poisson in [PoissonVariant::Periodic, PoissonVariant::default()] {
        let cfg = StepperConfig { poisson, dt: TimeStep::Fixed(0.01), ..Default::default() };
        let mut s = Stepper::new(&g, cfg).unwrap();
        let s0 = s.state(0.0, gaussian_density(6.0, 1.2, (1.0, 0.5), &g).unwrap(), random_solenoidal(0.3, 1, 6, &g).unwrap()).unwrap();
        let series = s.run(&s0, 0.3, 0.05, &mut ()).unwrap().series;
        let m0 = series.rows[0].mass;
        assert!(series.rows.iter().all(|r| (r.mass - m0).abs() <= 1e-13 * m0), "{poisson}");
    }
}
