//! Linear constraints that make a quadratic generator function positive and
//! decreasing on sampled trajectory points, and the LP that picks its
//! coefficients.
//!
//! The generator is `v(x) = xᵀPx + qᵀx + c` with symmetric `P`. It is linear
//! in its coefficients, so every sample point contributes linear rows.

mod simplex;

pub use simplex::{LpOutcome, LpProblem, Relation, Row, PIVOT_TOL};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::Trace;
use crate::symexpr::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("LP is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("row width does not match the unknown count")]
    Shape,
    #[error("coefficient vector has {got} entries, template needs {expected}")]
    CoeffCount { expected: usize, got: usize },
}

/// Full quadratic template in `arity` variables.
///
/// Unknown layout: upper triangle of `P` row by row, then `q`, then `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticTemplate {
    pub arity: usize,
}

impl QuadraticTemplate {
    pub fn new(arity: usize) -> Self {
        QuadraticTemplate { arity }
    }

    pub fn quad_slots(&self) -> usize {
        self.arity * (self.arity + 1) / 2
    }

    pub fn unknowns(&self) -> usize {
        self.quad_slots() + self.arity + 1
    }

    /// `(i, j)` with `i <= j` for each quadratic slot.
    pub fn slot_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.arity;
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    }

    /// Monomial values at `x`; `v(x) = coeffs · monomials(x)`.
    pub fn monomials(&self, x: &[f64]) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .slot_pairs()
            .into_iter()
            .map(|(i, j)| if i == j { x[i] * x[i] } else { 2.0 * x[i] * x[j] })
            .collect();
        m.extend_from_slice(&x[..self.arity]);
        m.push(1.0);
        m
    }

    /// Row such that `coeffs · row = ∇v(x) · dx`.
    pub fn directional_monomials(&self, x: &[f64], dx: &[f64]) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .slot_pairs()
            .into_iter()
            .map(|(i, j)| {
                if i == j {
                    2.0 * x[i] * dx[i]
                } else {
                    2.0 * (x[j] * dx[i] + x[i] * dx[j])
                }
            })
            .collect();
        m.extend_from_slice(&dx[..self.arity]);
        m.push(0.0);
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecreaseForm {
    /// `∇v(x_k) · ẋ_k ≤ -eps - s`, using the stored field value.
    Derivative,
    /// `v(x_{k+1}) - v(x_k) ≤ -eps - s` between consecutive kept samples.
    Difference,
}

/// How the shared margin `s` enters each point's rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginScale {
    /// Same margin `s` at every point.
    Uniform,
    /// Margin `s·|x|²`, so points far from the origin must clear a larger gap.
    SquaredNorm,
}

impl MarginScale {
    pub fn weight(self, x: &[f64]) -> f64 {
        match self {
            MarginScale::Uniform => 1.0,
            MarginScale::SquaredNorm => x.iter().map(|v| v * v).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub eps_pos: f64,
    pub eps_dec: f64,
    /// Keep every `subsample`-th trace point.
    pub subsample: usize,
    pub form: DecreaseForm,
    #[serde(default = "default_margin")]
    pub margin: MarginScale,
}

fn default_margin() -> MarginScale {
    LpOptions::default().margin
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            eps_pos: 1e-3,
            eps_dec: 1e-5,
            subsample: 10,
            form: DecreaseForm::Derivative,
            margin: MarginScale::SquaredNorm,
        }
    }
}

/// Builds the margin-maximizing LP.
///
/// Unknowns are the template coefficients followed by the shared margin
/// `s`, scaled per point by `opts.margin`. Rows: per kept point one
/// positivity and one decrease row, then
/// `|coeff| ≤ 1` for every template unknown, then `0 ≤ s ≤ 1`. Points for
/// which `keep` is false are skipped.
pub fn build_constraints(
    traces: &[Trace],
    tmpl: &QuadraticTemplate,
    opts: &LpOptions,
    keep: impl Fn(&[f64]) -> bool,
) -> LpProblem {
    let k = tmpl.unknowns();
    let mut lp = LpProblem::new(k + 1);
    lp.objective[k] = 1.0;
    let with_margin = |mut row: Vec<f64>, s: f64| {
        row.push(s);
        row
    };
    let step = opts.subsample.max(1);
    for tr in traces {
        let mut prev: Option<&[f64]> = None;
        for idx in (0..tr.len()).step_by(step) {
            let x = &tr.states[idx];
            if !keep(x) {
                prev = None;
                continue;
            }
            let w = opts.margin.weight(x);
            lp.push(Row::ge(with_margin(tmpl.monomials(x), -w), opts.eps_pos));
            match opts.form {
                DecreaseForm::Derivative => {
                    let d = tmpl.directional_monomials(x, &tr.derivs[idx]);
                    lp.push(Row::le(with_margin(d, w), -opts.eps_dec));
                }
                DecreaseForm::Difference => {
                    if let Some(p) = prev {
                        let a = tmpl.monomials(p);
                        let b = tmpl.monomials(x);
                        let d = b.iter().zip(&a).map(|(b, a)| b - a).collect();
                        lp.push(Row::le(with_margin(d, w), -opts.eps_dec));
                    }
                }
            }
            prev = Some(x);
        }
    }
    for j in 0..k {
        let mut e = vec![0.0; k + 1];
        e[j] = 1.0;
        lp.push(Row::le(e.clone(), 1.0));
        lp.push(Row::ge(e, -1.0));
    }
    let mut s = vec![0.0; k + 1];
    s[k] = 1.0;
    lp.push(Row::ge(s.clone(), 0.0));
    lp.push(Row::le(s, 1.0));
    lp
}

/// Solves the LP; `None` means infeasible.
pub fn solve_lp(lp: &LpProblem) -> Result<Option<Vec<f64>>, LpError> {
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } => Ok(Some(x)),
        LpOutcome::Infeasible => Ok(None),
    }
}

/// Concrete generator function with its symbolic value and gradient.
#[derive(Clone, Debug)]
pub struct GeneratorCandidate {
    pub template: QuadraticTemplate,
    pub coeffs: Vec<f64>,
    /// Symmetric `P`.
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub c: f64,
    pub expr: Expr,
    pub grad: Vec<Expr>,
}

impl GeneratorCandidate {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.template
            .monomials(x)
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| m * c)
            .sum()
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let n = self.template.arity;
        (0..n)
            .map(|i| 2.0 * (0..n).map(|j| self.p[i][j] * x[j]).sum::<f64>() + self.q[i])
            .collect()
    }
}

/// Builds `v` and `∇v` from a coefficient vector (the LP margin, if
/// present as a trailing entry, is ignored).
pub fn candidate_from(
    coeffs: &[f64],
    tmpl: &QuadraticTemplate,
) -> Result<GeneratorCandidate, LpError> {
    let k = tmpl.unknowns();
    if coeffs.len() != k && coeffs.len() != k + 1 {
        return Err(LpError::CoeffCount {
            expected: k,
            got: coeffs.len(),
        });
    }
    let coeffs = coeffs[..k].to_vec();
    let n = tmpl.arity;
    let mut p = vec![vec![0.0; n]; n];
    let mut expr = Expr::zero();
    for (s, (i, j)) in tmpl.slot_pairs().into_iter().enumerate() {
        let w = coeffs[s];
        p[i][j] = w;
        p[j][i] = w;
        let term = if i == j {
            Expr::constant(w) * Expr::var(i).powi(2)
        } else {
            Expr::constant(2.0 * w) * Expr::var(i) * Expr::var(j)
        };
        expr = expr + term;
    }
    let qs = tmpl.quad_slots();
    let q = coeffs[qs..qs + n].to_vec();
    for (i, &qi) in q.iter().enumerate() {
        expr = expr + Expr::constant(qi) * Expr::var(i);
    }
    let c = coeffs[k - 1];
    expr = expr + Expr::constant(c);
    let grad = expr.gradient(n);
    Ok(GeneratorCandidate {
        template: *tmpl,
        coeffs,
        p,
        q,
        c,
        expr,
        grad,
    })
}
