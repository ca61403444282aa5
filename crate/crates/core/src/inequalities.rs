//! Numerical checks of the functional inequalities with explicit constants,
//! evaluated on generated density families.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elliptic::{PoissonSolver, PoissonVariant};
use crate::error::{invalid, Error, Result};
use crate::functionals::{entropy, ENTROPY_FLOOR};
use crate::quadrature::integrate;
use crate::spectral::{Grid, ScalarField};

/// Slack for the log-HLS check, relative to `1 + |C(M)|`.
pub const LOG_HLS_TOL: f64 = 1e-6;
/// Slack for the gradient bound, relative to its right side.
pub const NAGAI_TOL: f64 = 1e-6;
/// Slack for the entropy comparisons.
pub const ENTROPY_TOL: f64 = 1e-8;
/// Slack for the radial Brezis-Merle check, relative to its right side.
pub const BREZIS_MERLE_TOL: f64 = 1e-8;

pub const NAGAI_EXPONENTS: [f64; 3] = [3.0, 4.0, 8.0];

/// How a checked field was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub generator: String,
    pub seed: u64,
}

impl FieldDescriptor {
    pub fn new(generator: impl Into<String>, seed: u64) -> Self {
        Self { generator: generator.into(), seed }
    }
}

/// One evaluated inequality. For upper bounds `lhs <= rhs` and
/// `margin = rhs - lhs`; for the lower bound of log-HLS `rhs` holds the bound and
/// `margin = lhs - rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub margin: f64,
    pub tol: f64,
    pub pass: bool,
    pub field: FieldDescriptor,
}

pub const REPORT_HEADER: &str = "name,seed,lhs,rhs,constant,margin,pass";

impl InequalityReport {
    fn upper(name: &'static str, lhs: f64, rhs: f64, constant: f64, tol: f64) -> Result<Self> {
        Self::build(name, lhs, rhs, constant, rhs - lhs, tol)
    }

    fn lower(name: &'static str, lhs: f64, bound: f64, constant: f64, tol: f64) -> Result<Self> {
        Self::build(name, lhs, bound, constant, lhs - bound, tol)
    }

    fn build(name: &'static str, lhs: f64, rhs: f64, constant: f64, margin: f64, tol: f64) -> Result<Self> {
        if ![lhs, rhs, constant, margin].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("{name} report")));
        }
        Ok(Self { name, lhs, rhs, constant, margin, tol, pass: margin >= -tol, field: FieldDescriptor::new("unspecified", 0) })
    }

    pub fn describe(mut self, field: FieldDescriptor) -> Self {
        self.field = field;
        self
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.name, self.field.seed, self.lhs, self.rhs, self.constant, self.margin, self.pass
        )
    }
}

pub fn reports_to_csv(reports: &[InequalityReport]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// `C(M) = M (1 + log pi - log M)`.
pub fn log_hls_constant(mass: f64) -> f64 {
    mass * (1.0 + PI.ln() - mass.ln())
}

/// `∫ n log n + (2/M) ∬ n(x) n(y) log|x-y| >= -C(M)`.
///
/// The double integral is `-2 pi ∫ n c` with `c` from the free-space solver.
pub fn check_log_hls(n: &ScalarField, solver: &PoissonSolver) -> Result<InequalityReport> {
    if !matches!(solver.variant(), PoissonVariant::FreeSpace { .. }) {
        return Err(invalid("solver", "log-HLS needs the free-space potential"));
    }
    let mass = n.integral();
    if !(mass > 0.0) {
        return Err(invalid("mass", "log-HLS needs positive mass"));
    }
    let c = solver.potential(n)?;
    let double = -2.0 * PI * n.dot(&c);
    let lhs = entropy(n) + 2.0 / mass * double;
    let constant = log_hls_constant(mass);
    InequalityReport::lower("log_hls", lhs, -constant, constant, LOG_HLS_TOL * (1.0 + constant.abs()))
}

/// Constant of the sup bound on the Newtonian gradient; `q = inf` allowed.
pub fn nagai_constant(q: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(invalid("q", format!("must exceed 2, got {q}")));
    }
    if q.is_infinite() {
        return Ok(2.0 * (2.0 * PI).sqrt());
    }
    let r = q / (q - 1.0);
    Ok((2.0 * PI).sqrt()
        * ((q - 1.0) / (q - 2.0)).sqrt()
        * (r.powf((q - 2.0) / (2.0 * (q - 1.0))) + r.powf(-q / (2.0 * (q - 1.0)))))
}

/// `sup |∇c| <= C_q ||n||_1^{(q-2)/(2(q-1))} ||n||_q^{q/(2(q-1))}`.
pub fn nagai_gradc_bound(n: &ScalarField, q: f64, solver: &PoissonSolver) -> Result<InequalityReport> {
    let constant = nagai_constant(q)?;
    if !matches!(solver.variant(), PoissonVariant::FreeSpace { .. }) {
        return Err(invalid("solver", "the gradient bound needs the free-space potential"));
    }
    let lhs = solver.gradient(n)?.magnitude().sup_norm();
    let (a, b) = if q.is_infinite() { (0.5, 0.5) } else { ((q - 2.0) / (2.0 * (q - 1.0)), q / (2.0 * (q - 1.0))) };
    let rhs = constant * n.lp_norm(1.0)?.powf(a) * n.lp_norm(q)?.powf(b);
    let name = if q == 3.0 {
        "nagai_q3"
    } else if q == 4.0 {
        "nagai_q4"
    } else if q == 8.0 {
        "nagai_q8"
    } else {
        "nagai"
    };
    InequalityReport::upper(name, lhs, rhs, constant, NAGAI_TOL * rhs)
}

/// Empirical constants implied by the L2 and L3 interpolation bounds at one `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedConstant {
    pub eps: f64,
    pub l2: f64,
    pub l3: f64,
}

/// `(||f||_p - eps A^{1/p} ||∇f||_2^{(p-1)/p}) / ||f||_1^{1/p}` for `p = 2, 3`,
/// with `A = ∫(1+f)log(1+f)`. Zero for the zero field.
pub fn implied_constants(f: &ScalarField, eps: &[f64]) -> Result<Vec<ImpliedConstant>> {
    let l1 = f.lp_norm(1.0)?;
    let a = f.map(|v| {
        let v = v.max(0.0);
        (1.0 + v) * v.ln_1p()
    })
    .integral();
    let grad = crate::spectral::gradient(f)?.l2_norm();
    let (l2, l3) = (f.lp_norm(2.0)?, f.lp_norm(3.0)?);
    eps.iter()
        .map(|&e| {
            if !(e > 0.0) {
                return Err(invalid("eps", "must be positive"));
            }
            if l1 == 0.0 {
                return Ok(ImpliedConstant { eps: e, l2: 0.0, l3: 0.0 });
            }
            Ok(ImpliedConstant {
                eps: e,
                l2: (l2 - e * a.sqrt() * grad.sqrt()) / l1.sqrt(),
                l3: (l3 - e * a.cbrt() * grad.powf(2.0 / 3.0)) / l1.cbrt(),
            })
        })
        .collect()
}

/// Largest implied constant per `eps` over a family.
pub fn interpolation_l2_l3(family: &[ScalarField], eps: &[f64]) -> Result<Vec<ImpliedConstant>> {
    let per_field = family.par_iter().map(|f| implied_constants(f, eps)).collect::<Result<Vec<_>>>()?;
    Ok(eps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            per_field.iter().fold(ImpliedConstant { eps: e, l2: f64::NEG_INFINITY, l3: f64::NEG_INFINITY }, |m, c| {
                ImpliedConstant { eps: e, l2: m.l2.max(c[i].l2), l3: m.l3.max(c[i].l3) }
            })
        })
        .collect())
}

/// The two comparisons between `∫ f|log f|` and `∫ (1+f)log(1+f)`, with weight
/// exponent `alpha > 2`. All integrals are grid sums over the box.
pub fn entropy_equivalence(f: &ScalarField, alpha: f64) -> Result<[InequalityReport; 2]> {
    if !(alpha > 2.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must exceed the dimension 2, got {alpha}")));
    }
    if f.min() < 0.0 {
        return Err(invalid("f", "must be non-negative"));
    }
    let grid = f.grid();
    let mod_ent = f.map(|v| (1.0 + v) * v.ln_1p()).integral();
    let abs_ent = f.map(|v| if v > ENTROPY_FLOOR { v * v.ln().abs() } else { 0.0 }).integral();
    let mass = f.integral();
    let radial = ScalarField::from_fn(grid, |x, y| (2.0 + x.hypot(y)).ln());
    let log_moment = f.dot(&radial);
    let weight = ScalarField::from_fn(grid, |x, y| (2.0 + x.hypot(y)).powf(-alpha)).integral();

    let first = InequalityReport::upper("entropy_upper", mod_ent, 2.0 * abs_ent + 2.0 * 2f64.ln() * mass, 2.0, ENTROPY_TOL)?;
    let second = InequalityReport::upper(
        "entropy_lower",
        abs_ent,
        mod_ent + 2.0 * alpha * log_moment + weight / E,
        2.0 * alpha,
        ENTROPY_TOL,
    )?;
    Ok([first, second])
}

/// Radial Brezis-Merle on the unit disk: `-Δv = g`, `v = 0` on the circle,
/// `∫ exp|v| <= 4 pi^2 d^2 / (4 pi - ||g||_1)` with `d = 2`.
pub fn brezis_merle_radial(g: impl Fn(f64) -> f64 + Sync) -> Result<InequalityReport> {
    const TOL: f64 = 1e-12;
    let norm = 2.0 * PI * integrate(|r| g(r).abs() * r, 0.0, 1.0, TOL, TOL)?;
    if !(norm < 4.0 * PI) {
        return Err(invalid("g", format!("||g||_1 = {norm} must be below 4 pi")));
    }
    // v(r) = -log r ∫_0^r g ρ dρ - ∫_r^1 g ρ log ρ dρ
    let v = |r: f64| -> f64 {
        let inner = if r > 0.0 { -r.ln() * integrate(|p| g(p) * p, 0.0, r, TOL, TOL).unwrap_or(f64::NAN) } else { 0.0 };
        inner - integrate(|p| if p > 0.0 { g(p) * p * p.ln() } else { 0.0 }, r, 1.0, TOL, TOL).unwrap_or(f64::NAN)
    };
    let lhs = 2.0 * PI * integrate(|r| v(r).abs().exp() * r, 0.0, 1.0, 1e-10, 1e-10)?;
    let diameter = 2.0;
    let constant = 4.0 * PI * PI * diameter * diameter;
    let rhs = constant / (4.0 * PI - norm);
    InequalityReport::upper("brezis_merle", lhs, rhs, constant, BREZIS_MERLE_TOL * rhs)
}

/// Which sweep to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    LogHls,
    Nagai,
    Entropy,
    BrezisMerle,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "loghls" => Suite::LogHls,
            "nagai" => Suite::Nagai,
            "entropy" => Suite::Entropy,
            "bm" => Suite::BrezisMerle,
            "all" => Suite::All,
            other => return Err(invalid("suite", format!("unknown suite `{other}`"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::LogHls => "loghls",
            Suite::Nagai => "nagai",
            Suite::Entropy => "entropy",
            Suite::BrezisMerle => "bm",
            Suite::All => "all",
        })
    }
}

/// Seed of instance `index` in a sweep seeded with `seed`.
pub fn instance_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Sum of 1 to 4 Gaussian bumps, widths in `[1, 2.5]`, centres within `L/10`
/// of the origin, total mass `mass` (drawn in `[0.5, 40]` when `None`).
pub fn gaussian_mixture(grid: &Grid, seed: u64, mass: Option<f64>) -> (ScalarField, FieldDescriptor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=4usize);
    let reach = grid.length() / 10.0;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(1.0..2.5),
                rng.random_range(-reach..reach),
                rng.random_range(-reach..reach),
            )
        })
        .collect();
    let mass = mass.unwrap_or_else(|| rng.random_range(0.5..40.0));
    let raw = ScalarField::from_fn(grid, |x, y| {
        bumps
            .iter()
            .map(|&(w, s, cx, cy)| {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                w / (2.0 * PI * s * s) * (-r2 / (2.0 * s * s)).exp()
            })
            .sum()
    });
    let f = raw.scaled(mass / raw.integral());
    (f, FieldDescriptor::new(format!("gaussian_mixture(k={k})"), seed))
}

/// Radial source on the unit disk with `||g||_1` drawn in `(0, 3.9 pi]`; may change sign.
pub fn radial_source(seed: u64) -> (impl Fn(f64) -> f64 + Sync, FieldDescriptor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width: f64 = rng.random_range(0.1..1.0);
    let ring: f64 = rng.random_range(0.0..0.8);
    let wobble: f64 = rng.random_range(-0.9..0.9);
    let target: f64 = rng.random_range(0.05..3.9) * PI;
    let shape = move |r: f64| (-((r - ring) / width).powi(2)).exp() * (1.0 + wobble * (3.0 * PI * r).cos());
    let raw = 2.0 * PI * integrate(|r| shape(r).abs() * r, 0.0, 1.0, 1e-13, 1e-13).expect("smooth integrand");
    let scale = target / raw;
    (move |r: f64| scale * shape(r), FieldDescriptor::new("radial_source", seed))
}

/// Default sweep grid: well resolved for the mixture widths.
pub fn sweep_grid() -> Grid {
    Grid::new(128, 40.0).expect("valid grid")
}

/// Run `count` seeded instances of a suite; output order is deterministic.
pub fn run_suite(suite: Suite, count: usize, seed: u64) -> Result<Vec<InequalityReport>> {
    if suite == Suite::All {
        let mut out = Vec::new();
        for s in [Suite::LogHls, Suite::Nagai, Suite::Entropy, Suite::BrezisMerle] {
            out.extend(run_suite(s, count, seed)?);
        }
        return Ok(out);
    }
    let grid = sweep_grid();
    let solver = PoissonSolver::new(&grid, PoissonVariant::default())?;
    let per_instance = (0..count)
        .into_par_iter()
        .map(|i| -> Result<Vec<InequalityReport>> {
            let s = instance_seed(seed, i);
            match suite {
                Suite::LogHls => {
                    let (f, d) = gaussian_mixture(&grid, s, None);
                    Ok(vec![check_log_hls(&f, &solver)?.describe(d)])
                }
                Suite::Nagai => {
                    let (f, d) = gaussian_mixture(&grid, s, None);
                    NAGAI_EXPONENTS.iter().map(|&q| Ok(nagai_gradc_bound(&f, q, &solver)?.describe(d.clone()))).collect()
                }
                Suite::Entropy => {
                    let (f, d) = gaussian_mixture(&grid, s, None);
                    Ok(entropy_equivalence(&f, 3.0)?.into_iter().map(|r| r.describe(d.clone())).collect())
                }
                Suite::BrezisMerle => {
                    let (g, d) = radial_source(s);
                    Ok(vec![brezis_merle_radial(g)?.describe(d)])
                }
                Suite::All => unreachable!(),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}
