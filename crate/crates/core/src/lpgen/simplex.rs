//! Simplex solver for LPs with few free unknowns and many rows.
//!
//! The primal `max c·x, A x ≤ b` is solved through its dual, whose basis has
//! one row per unknown. Pricing is Dantzig's rule, with a permanent switch to
//! Bland's rule once the objective stalls, which rules out cycling.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use super::LpError;

pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Row {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Row {
            coeffs,
            relation: Relation::Ge,
            rhs,
        }
    }

    /// Signed slack at `x`; nonnegative iff the row holds.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.relation {
            Relation::Le => self.rhs - lhs,
            Relation::Ge => lhs - self.rhs,
        }
    }
}

/// `maximize objective·x` subject to `rows`, with `x` free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub unknowns: usize,
    pub rows: Vec<Row>,
    pub objective: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
}

impl LpProblem {
    pub fn new(unknowns: usize) -> Self {
        LpProblem {
            unknowns,
            rows: Vec::new(),
            objective: vec![0.0; unknowns],
        }
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.coeffs.len(), self.unknowns);
        self.rows.push(row);
    }

    /// Smallest signed slack over all rows.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.slack(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Plain-text dump: one line per row, `c0 c1 ... <= rhs`.
    pub fn to_tableau_text(&self) -> String {
        let mut s = String::new();
        let obj: Vec<String> = self.objective.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "# unknowns {} rows {}", self.unknowns, self.rows.len());
        let _ = writeln!(s, "max {}", obj.join(" "));
        for r in &self.rows {
            let c: Vec<String> = r.coeffs.iter().map(|v| format!("{v:?}")).collect();
            let rel = match r.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, "{} {rel} {:?}", c.join(" "), r.rhs);
        }
        s
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        if self.objective.len() != self.unknowns
            || self.rows.iter().any(|r| r.coeffs.len() != self.unknowns)
        {
            return Err(LpError::Shape);
        }
        // every row as a·x ≤ b
        let (a, b): (Vec<Vec<f64>>, Vec<f64>) = self
            .rows
            .iter()
            .map(|r| match r.relation {
                Relation::Le => (r.coeffs.clone(), r.rhs),
                Relation::Ge => (r.coeffs.iter().map(|v| -v).collect(), -r.rhs),
            })
            .unzip();
        match solve_dual(&a, &b, &self.objective)? {
            DualOutcome::Optimal(x) => {
                let value = self.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
                Ok(LpOutcome::Optimal { x, value })
            }
            DualOutcome::Unbounded => Ok(LpOutcome::Infeasible),
            DualOutcome::Infeasible => {
                // the primal is unbounded or infeasible; a zero objective tells which
                match solve_dual(&a, &b, &vec![0.0; self.unknowns])? {
                    DualOutcome::Optimal(_) => Err(LpError::Unbounded),
                    _ => Ok(LpOutcome::Infeasible),
                }
            }
        }
    }
}

/// Reduced-cost threshold; a row of the returned point is violated by at
/// most this much.
const PRICE_TOL: f64 = 1e-11;
/// Consecutive non-improving Dantzig pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

enum DualOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

/// Revised simplex on `min b·y  s.t.  Σ_j y_j a_j = c, y ≥ 0`, the dual of
/// `max c·x  s.t.  a_j·x ≤ b_j` with free `x`. Its basis is `n × n`, so it is
/// refactored at every pivot. The simplex multipliers of an optimal basis
/// are an optimal primal point.
fn solve_dual(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<DualOutcome, LpError> {
    let n = c.len();
    let m = a.len();
    // columns 0..m structural, m + k the artificial `sign(c_k)·e_k`
    let sign: Vec<f64> = c.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let column = |id: usize| -> DVector<f64> {
        if id < m {
            DVector::from_column_slice(&a[id])
        } else {
            let mut e = DVector::zeros(n);
            e[id - m] = sign[id - m];
            e
        }
    };
    let mut basis: Vec<usize> = (m..m + n).collect();
    let cv = DVector::from_column_slice(c);

    let phase_one_cost = |id: usize| if id < m { 0.0 } else { 1.0 };
    let end = run(&mut basis, m, n, &column, &cv, &phase_one_cost, a, true)?;
    debug_assert!(matches!(end, Phase::Optimal));
    let y = factor(&basis, &column, n)?.solve(&cv).ok_or(LpError::Shape)?;
    let infeasibility: f64 = basis
        .iter()
        .zip(y.iter())
        .filter(|(id, _)| **id >= m)
        .map(|(_, v)| v.abs())
        .sum();
    if infeasibility > 1e-9 * (1.0 + cv.amax()) {
        return Ok(DualOutcome::Infeasible);
    }
    // pivot zero-level artificials out where some structural column allows
    for r in 0..n {
        if basis[r] < m {
            continue;
        }
        let lu = factor(&basis, &column, n)?;
        let entering = (0..m).filter(|j| !basis.contains(j)).find(|&j| {
            lu.solve(&column(j)).is_some_and(|w| w[r].abs() > PIVOT_TOL)
        });
        if let Some(j) = entering {
            basis[r] = j;
        }
    }

    let phase_two_cost = |id: usize| if id < m { b[id] } else { 0.0 };
    match run(&mut basis, m, n, &column, &cv, &phase_two_cost, a, false)? {
        Phase::Unbounded => Ok(DualOutcome::Unbounded),
        Phase::Optimal => {
            let lu = factor(&basis, &column, n)?;
            let cb = DVector::from_iterator(n, basis.iter().map(|&id| phase_two_cost(id)));
            let pi = lu.transpose_solve(&cb)?;
            Ok(DualOutcome::Optimal(pi.iter().copied().collect()))
        }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Factored(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

impl Factored {
    fn solve(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.0.solve(v)
    }

    fn transpose_solve(&self, v: &DVector<f64>) -> Result<DVector<f64>, LpError> {
        // Bᵀ π = v  via  π = (B⁻¹)ᵀ v
        let inv = self.0.try_inverse().ok_or(LpError::Shape)?;
        Ok(inv.transpose() * v)
    }
}

fn factor(
    basis: &[usize],
    column: &impl Fn(usize) -> DVector<f64>,
    n: usize,
) -> Result<Factored, LpError> {
    let mut bm = DMatrix::zeros(n, n);
    for (k, &id) in basis.iter().enumerate() {
        bm.set_column(k, &column(id));
    }
    Ok(Factored(bm.lu()))
}

#[allow(clippy::too_many_arguments)]
fn run(
    basis: &mut [usize],
    m: usize,
    n: usize,
    column: &impl Fn(usize) -> DVector<f64>,
    c: &DVector<f64>,
    cost: &impl Fn(usize) -> f64,
    a: &[Vec<f64>],
    phase_one: bool,
) -> Result<Phase, LpError> {
    let cap = 10_000 + 50 * (m + n);
    let mut bland = false;
    let mut stall = 0;
    let mut last_obj = f64::INFINITY;
    for _ in 0..cap {
        let lu = factor(basis, column, n)?;
        let y = lu.solve(c).ok_or(LpError::Shape)?;
        let obj: f64 = basis.iter().zip(y.iter()).map(|(&id, v)| cost(id) * v).sum();
        if obj < last_obj - 1e-12 * (1.0 + obj.abs()) {
            stall = 0;
        } else {
            stall += 1;
            if stall > STALL_LIMIT {
                bland = true;
            }
        }
        last_obj = last_obj.min(obj);
        let cb = DVector::from_iterator(n, basis.iter().map(|&id| cost(id)));
        let pi = lu.transpose_solve(&cb)?;
        // price structural columns; artificials never re-enter
        let mut entering: Option<(usize, f64)> = None;
        for (j, aj) in a.iter().enumerate() {
            let d = cost(j) - aj.iter().zip(pi.iter()).map(|(x, p)| x * p).sum::<f64>();
            if d < -PRICE_TOL && !basis.contains(&j) {
                let better = match entering {
                    None => true,
                    Some((_, bd)) => !bland && d < bd,
                };
                if better {
                    entering = Some((j, d));
                }
                if bland {
                    break;
                }
            }
        }
        let Some((e, _)) = entering else {
            return Ok(Phase::Optimal);
        };
        let w = lu.solve(&column(e)).ok_or(LpError::Shape)?;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..n {
            let ratio = if !phase_one && basis[i] >= m && w[i].abs() > PIVOT_TOL {
                // a zero-level artificial must leave before it can move
                0.0
            } else if w[i] > PIVOT_TOL {
                y[i].max(0.0) / w[i]
            } else {
                continue;
            };
            leave = match leave {
                None => Some((i, ratio)),
                Some((li, lr)) => {
                    if ratio < lr - PIVOT_TOL
                        || (ratio <= lr + PIVOT_TOL && basis[i] < basis[li])
                    {
                        Some((i, ratio))
                    } else {
                        Some((li, lr))
                    }
                }
            };
        }
        let Some((r, _)) = leave else {
            return Ok(Phase::Unbounded);
        };
        basis[r] = e;
    }
    Err(LpError::IterationLimit)
}
