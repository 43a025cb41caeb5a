//! Fuzz loops and solver batteries shared by the property tests and the
//! acceptance harness. Each returns counts instead of asserting so callers
//! decide how to report.

use std::f64::consts::{FRAC_PI_2, PI};

use barricade::dsat::{Formula, Rel};
use barricade::symexpr::{Expr, IntervalBox};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_box, random_expr, random_point_in, random_sub_box};

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub trials: usize,
    /// Trials where both sides evaluated; the rest hit a domain error.
    pub checked: usize,
    pub violations: Vec<String>,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.checked > self.trials * 9 / 10
    }
}

/// Point value at an interior point lies in the enclosure over the box.
pub fn enclosure_fuzz(seed: u64, trials: usize) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = FuzzReport { trials, ..FuzzReport::default() };
    for trial in 0..trials {
        let e = random_expr(&mut rng, 6, 3, true);
        let b = random_box(&mut rng, 3);
        let p = random_point_in(&mut rng, &b);
        let (Ok(v), Ok(enc)) = (e.eval(&p), e.interval_eval(&b)) else {
            continue;
        };
        r.checked += 1;
        if !enc.contains(v) {
            r.violations.push(format!("trial {trial}: {e} on {b:?} at {p:?}: {v} not in {enc}"));
        }
    }
    r
}

/// Enclosure over a sub-box lies inside the enclosure over the box.
pub fn isotonicity_fuzz(seed: u64, trials: usize) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = FuzzReport { trials, ..FuzzReport::default() };
    for trial in 0..trials {
        let e = random_expr(&mut rng, 6, 3, true);
        let outer = random_box(&mut rng, 3);
        let inner = random_sub_box(&mut rng, &outer);
        let (Ok(a), Ok(b)) = (e.interval_eval(&inner), e.interval_eval(&outer)) else {
            continue;
        };
        r.checked += 1;
        if !inner.is_subset_of(&outer) || !a.is_subset_of(&b) {
            r.violations.push(format!("trial {trial}: {e}: {a} not in {b}"));
        }
    }
    r
}

fn x() -> Expr {
    Expr::var(0)
}

fn y() -> Expr {
    Expr::var(1)
}

/// Instances whose UNSAT status follows from a closed-form argument.
pub fn unsat_battery() -> Vec<(&'static str, Formula, IntervalBox)> {
    let sq = |e: Expr| e.powi(2);
    vec![
        (
            "x^2 + 1 <= 0",
            Formula::atom(sq(x()) + Expr::one(), Rel::Le, 0.0),
            IntervalBox::from_bounds(&[(-10.0, 10.0)]),
        ),
        (
            "x >= 1 and x <= 0",
            Formula::And(vec![Formula::atom(x(), Rel::Ge, 1.0), Formula::atom(x(), Rel::Le, 0.0)]),
            IntervalBox::from_bounds(&[(-5.0, 5.0)]),
        ),
        (
            // -2d² - 2θ² ≥ -1e-6 only within radius ~7e-4 of the origin, far inside X0
            "decrease of d^2 + t^2 under (-d, -t), outside X0",
            Formula::And(vec![
                Formula::Or(vec![
                    Formula::atom(x(), Rel::Lt, -0.1),
                    Formula::atom(x(), Rel::Gt, 0.1),
                    Formula::atom(y(), Rel::Lt, -0.1),
                    Formula::atom(y(), Rel::Gt, 0.1),
                ]),
                Formula::atom(-(Expr::constant(2.0) * sq(x())) - Expr::constant(2.0) * sq(y()), Rel::Ge, -1e-6),
            ]),
            IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]),
        ),
        (
            "d^2 + t^2 > 0.51 on X0",
            Formula::atom(sq(x()) + sq(y()) - Expr::constant(0.51), Rel::Gt, 0.0),
            IntervalBox::from_bounds(&[(-0.1, 0.1), (-0.1, 0.1)]),
        ),
        (
            "d^2 + t^2 <= 0.51 and d >= 1",
            Formula::And(vec![
                Formula::atom(sq(x()) + sq(y()) - Expr::constant(0.51), Rel::Le, 0.0),
                Formula::atom(x(), Rel::Ge, 1.0),
            ]),
            IntervalBox::from_bounds(&[(-3.0, 3.0), (-3.0, 3.0)]),
        ),
        (
            "sin(x) >= 1.01",
            Formula::atom(x().sin(), Rel::Ge, 1.01),
            IntervalBox::from_bounds(&[(-10.0, 10.0)]),
        ),
        (
            "tanh(x) * tanh(y) > 1",
            Formula::atom(x().tanh() * y().tanh(), Rel::Gt, 1.0),
            IntervalBox::from_bounds(&[(-4.0, 4.0), (-4.0, 4.0)]),
        ),
    ]
}

/// A satisfiable instance with the point its witness must lie near.
pub struct SatCase {
    pub name: &'static str,
    pub formula: Formula,
    pub domain: IntervalBox,
    pub delta: f64,
    pub near: Vec<f64>,
    pub radius: f64,
}

pub fn delta_sat_battery() -> Vec<SatCase> {
    vec![
        SatCase {
            name: "sin peak",
            formula: Formula::atom(x().sin(), Rel::Ge, 0.999999),
            domain: IntervalBox::from_bounds(&[(0.0, PI)]),
            delta: 1e-4,
            near: vec![FRAC_PI_2],
            // sin ≥ 0.999999 holds only within ~1.42e-3 of π/2
            radius: 1.5e-3,
        },
        SatCase {
            name: "ellipse crosses d = 1",
            formula: Formula::And(vec![
                Formula::atom(x().powi(2) + y().powi(2) - Expr::constant(1.5), Rel::Le, 0.0),
                Formula::atom(x(), Rel::Ge, 1.0),
            ]),
            domain: IntervalBox::from_bounds(&[(-3.0, 3.0), (-3.0, 3.0)]),
            delta: 1e-3,
            near: vec![1.0, 0.0],
            radius: 0.71,
        },
    ]
}

/// No point of a 10⁶-point grid over `dom` satisfies `phi` exactly.
pub fn grid_has_no_model(phi: &Formula, dom: &IntervalBox) -> bool {
    let per_dim = match dom.arity() {
        1 => 1_000_000usize,
        2 => 1_000,
        n => panic!("grid for arity {n}"),
    };
    let coord = |k: usize, i: usize| {
        let d = dom.dims[k];
        d.lo + d.width() * i as f64 / (per_dim - 1) as f64
    };
    let total = per_dim.pow(dom.arity() as u32);
    (0..total).all(|idx| {
        let p: Vec<f64> = (0..dom.arity()).map(|k| coord(k, (idx / per_dim.pow(k as u32)) % per_dim)).collect();
        !phi.holds_at(&p)
    })
}
