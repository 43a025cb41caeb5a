//! Sampling audit of an emitted certificate, independent of the δ-SAT
//! checker: it only evaluates the field and the generator at points.

use barricade::certify::{Certificate, EllipsoidCenter};
use barricade::plant::VectorField;

#[derive(Debug, Default)]
pub struct Audit {
    pub boundary_samples: usize,
    pub boundary_violations: usize,
    pub initial_samples: usize,
    pub initial_violations: usize,
    pub unsafe_samples: usize,
    pub unsafe_violations: usize,
}

impl Audit {
    pub fn clean(&self) -> bool {
        self.boundary_violations + self.initial_violations + self.unsafe_violations == 0
    }
}

/// (a) the Lie derivative is negative at `boundary` points spread around
/// `{v = ℓ}`, (b) `v ≤ ℓ` on a grid over X0 (corners and edges included),
/// (c) `v > ℓ` on a grid over the unsafe part of the enclosing box.
pub fn audit(cert: &Certificate, f: &VectorField, boundary: usize, grid: usize) -> Audit {
    let cand = cert.generator().expect("stored coefficients rebuild");
    let level = cert.level;
    let spec = &cert.spec;
    let mut a = Audit::default();

    let center = EllipsoidCenter::of(&cand).expect("certified generator is an ellipsoid");
    for p in center.boundary_points(level, boundary) {
        a.boundary_samples += 1;
        let g = cand.gradient_at(&p);
        let fx = f.eval(&p).expect("field defined on the boundary");
        let rate: f64 = g.iter().zip(&fx).map(|(g, f)| g * f).sum();
        if !(rate < 0.0) {
            a.boundary_violations += 1;
        }
    }

    let lerp = |lo: f64, hi: f64, i: usize, n: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let x0 = &spec.initial.dims;
    for i in 0..grid {
        for j in 0..grid {
            let p = [lerp(x0[0].lo, x0[0].hi, i, grid), lerp(x0[1].lo, x0[1].hi, j, grid)];
            a.initial_samples += 1;
            if !(cand.value(&p) <= level) {
                a.initial_violations += 1;
            }
        }
    }

    let enc = spec.enclosing_box();
    let n = 4 * grid;
    for i in 0..n {
        for j in 0..n {
            let p = [lerp(enc.dims[0].lo, enc.dims[0].hi, i, n), lerp(enc.dims[1].lo, enc.dims[1].hi, j, n)];
            if spec.safe.contains(&p) && !on_boundary(&spec.safe, &p) {
                continue;
            }
            a.unsafe_samples += 1;
            if !(cand.value(&p) > level) {
                a.unsafe_violations += 1;
            }
        }
    }
    a
}

fn on_boundary(b: &barricade::symexpr::IntervalBox, p: &[f64]) -> bool {
    b.dims.iter().zip(p).any(|(d, &x)| x == d.lo || x == d.hi)
}
