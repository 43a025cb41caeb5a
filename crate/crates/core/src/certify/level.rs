//! Closed-form bounds on a quadratic generator over the initial box and the
//! unsafe halfspaces, used to bracket the level `ℓ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::lpgen::GeneratorCandidate;
use crate::symexpr::{Expr, IntervalBox};

/// Closed halfspace `a · x ≥ b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn contains(&self, x: &[f64]) -> bool {
        dot(&self.a, x) >= self.b
    }

    pub fn lhs_expr(&self) -> Expr {
        let mut e = Expr::zero();
        for (i, &ai) in self.a.iter().enumerate() {
            if ai != 0.0 {
                e = e + Expr::constant(ai) * Expr::var(i);
            }
        }
        e
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer `x* = -½ P⁻¹ q`, its value `m`, and the factored `P`.
pub struct EllipsoidCenter {
    pub center: Vec<f64>,
    pub min_value: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl EllipsoidCenter {
    pub fn of(cand: &GeneratorCandidate) -> Result<Self, CertifyError> {
        let n = cand.template.arity;
        let p = DMatrix::from_fn(n, n, |i, j| cand.p[i][j]);
        let chol = p.cholesky().ok_or(CertifyError::NotEllipsoid)?;
        let q = DVector::from_column_slice(&cand.q);
        let center: Vec<f64> = (chol.solve(&q) * -0.5).iter().copied().collect();
        let min_value = cand.value(&center);
        Ok(EllipsoidCenter {
            center,
            min_value,
            chol,
        })
    }

    /// `aᵀ P⁻¹ a`.
    pub fn inverse_form(&self, a: &[f64]) -> f64 {
        let av = DVector::from_column_slice(a);
        av.dot(&self.chol.solve(&av))
    }

    /// Half-widths of the axis-aligned bounding box of `{v ≤ level}`.
    pub fn half_widths(&self, level: f64) -> Vec<f64> {
        let n = self.center.len();
        let r = (level - self.min_value).max(0.0);
        (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                (r * self.inverse_form(&e)).sqrt()
            })
            .collect()
    }

    /// `count` points of the planar level curve `{v = level}`, evenly spaced
    /// in angle: `x = center + r L⁻ᵀ (cos φ, sin φ)` with `P = L Lᵀ` and
    /// `r² = level - min_value`. Empty unless the arity is 2 and the level
    /// exceeds the minimum.
    pub fn boundary_points(&self, level: f64, count: usize) -> Vec<[f64; 2]> {
        let r2 = level - self.min_value;
        if self.center.len() != 2 || !(r2 > 0.0) {
            return Vec::new();
        }
        let r = r2.sqrt();
        let lt = self.chol.l().transpose();
        (0..count)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                let u = DVector::from_column_slice(&[r * phi.cos(), r * phi.sin()]);
                let y = lt.solve_upper_triangular(&u).expect("Cholesky factor has a positive diagonal");
                [self.center[0] + y[0], self.center[1] + y[1]]
            })
            .collect()
    }
}

/// Exact minimum of `v` over `a · x ≥ b` for positive definite `P`.
pub fn halfspace_min(cand: &GeneratorCandidate, h: &Halfspace) -> Result<f64, CertifyError> {
    let e = EllipsoidCenter::of(cand)?;
    let gap = h.b - dot(&h.a, &e.center);
    if gap <= 0.0 {
        return Ok(e.min_value);
    }
    // minimum on the hyperplane a·x = b
    Ok(e.min_value + gap * gap / e.inverse_form(&h.a))
}

/// Largest value of `v` at a vertex of `b`.
pub fn vertex_max(cand: &GeneratorCandidate, b: &IntervalBox) -> f64 {
    b.vertices()
        .iter()
        .map(|x| cand.value(x))
        .fold(f64::NEG_INFINITY, f64::max)
}
