//! δ-decision procedure for And/Or combinations of nonlinear inequalities
//! over a box, by interval branch-and-prune.
//!
//! `Unsat` is sound: interval enclosures refuted the formula on every piece
//! of the domain. `DeltaSat` only says that a box no wider than δ could not
//! be refuted; the formula may hold there only in a δ-weakened sense.
//! Strict relations are refuted through their closed relaxations.
//!
//! Each atom is pruned by HC4 propagation over its expression tape, then
//! tested against a mean-value enclosure `g(m) + ∇g(X)·(X − m)`, which is
//! much tighter than the natural one on small boxes.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symexpr::{format_real, Expr, Interval, IntervalBox, Tape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DsatError {
    #[error("box budget of {0} exhausted before a verdict")]
    Budget(u64),
    #[error("formula uses {formula} variables but the domain has {domain}")]
    Arity { formula: usize, domain: usize },
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
}

impl Rel {
    fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
        }
    }

    /// Closed set of admissible lhs values.
    fn target(self, rhs: f64) -> Interval {
        match self {
            Rel::Le | Rel::Lt => Interval::new(f64::NEG_INFINITY, rhs),
            Rel::Ge | Rel::Gt => Interval::new(rhs, f64::INFINITY),
            Rel::Eq => Interval::point(rhs),
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Rel::Le => lhs <= rhs,
            Rel::Lt => lhs < rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
            Rel::Eq => lhs == rhs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub lhs: Expr,
    pub rel: Rel,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(lhs: Expr, rel: Rel, rhs: f64) -> Self {
        Constraint { lhs, rel, rhs }
    }
}

#[derive(Clone, Debug)]
pub enum Formula {
    Atom(Constraint),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn atom(lhs: Expr, rel: Rel, rhs: f64) -> Self {
        Formula::Atom(Constraint::new(lhs, rel, rhs))
    }

    pub fn arity(&self) -> usize {
        match self {
            Formula::Atom(c) => c.lhs.arity(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::arity).max().unwrap_or(0),
        }
    }

    /// Exact truth value at a point; evaluation errors count as false.
    pub fn holds_at(&self, p: &[f64]) -> bool {
        match self {
            Formula::Atom(c) => c.lhs.eval(p).is_ok_and(|v| c.rel.holds(v, c.rhs)),
            Formula::And(fs) => fs.iter().all(|f| f.holds_at(p)),
            Formula::Or(fs) => fs.iter().any(|f| f.holds_at(p)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(c) => write!(f, "({} {} {})", c.rel.symbol(), c.lhs, format_real(c.rhs)),
            Formula::And(fs) | Formula::Or(fs) => {
                let head = if matches!(self, Formula::And(_)) { "and" } else { "or" };
                write!(f, "({head}")?;
                for x in fs {
                    write!(f, " {x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Formula with every atom compiled to a tape.
enum Compiled {
    Atom {
        tape: Tape,
        grads: Vec<Tape>,
        target: Interval,
    },
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
}

impl Compiled {
    fn new(f: &Formula) -> Compiled {
        match f {
            Formula::Atom(c) => Compiled::Atom {
                tape: Tape::compile(&c.lhs),
                grads: mean_value_gradient(&c.lhs),
                target: c.rel.target(c.rhs),
            },
            Formula::And(fs) => Compiled::And(fs.iter().map(Compiled::new).collect()),
            Formula::Or(fs) => Compiled::Or(fs.iter().map(Compiled::new).collect()),
        }
    }

    fn prune(&self, b: &mut IntervalBox, buf: &mut Vec<Interval>) -> bool {
        match self {
            Compiled::Atom {
                tape,
                grads,
                target,
            } => {
                // an enclosure we cannot compute refutes nothing
                tape.revise(b, *target, buf).unwrap_or(true)
                    && (grads.is_empty() || !mean_value_refutes(tape, grads, b, target, buf))
            }
            Compiled::And(cs) => {
                for _ in 0..AND_SWEEPS {
                    let before = b.clone();
                    for c in cs {
                        if !c.prune(b, buf) {
                            return false;
                        }
                    }
                    if !shrank_enough(&before, b) {
                        break;
                    }
                }
                true
            }
            Compiled::Or(cs) => {
                let mut hull: Option<IntervalBox> = None;
                for c in cs {
                    let mut nb = b.clone();
                    if c.prune(&mut nb, buf) {
                        hull = Some(match hull {
                            None => nb,
                            Some(h) => box_hull(&h, &nb),
                        });
                    }
                }
                match hull {
                    Some(h) => {
                        *b = h;
                        true
                    }
                    None => false,
                }
            }
        }
    }
}

const AND_SWEEPS: usize = 4;

/// Gradient tapes for the mean-value test; empty for affine expressions,
/// whose natural enclosure is already exact up to rounding.
fn mean_value_gradient(e: &Expr) -> Vec<Tape> {
    let n = e.arity();
    let grads = e.gradient(n);
    if grads.iter().all(|g| g.as_const().is_some()) {
        return Vec::new();
    }
    grads.iter().map(Tape::compile).collect()
}

fn mean_value_refutes(
    tape: &Tape,
    grads: &[Tape],
    b: &IntervalBox,
    target: &Interval,
    buf: &mut Vec<Interval>,
) -> bool {
    let m = b.midpoint();
    let center = IntervalBox::new(m.iter().map(|&v| Interval::point(v)).collect());
    let Ok(mut acc) = tape.interval_eval(&center, buf) else {
        return false;
    };
    for (i, g) in grads.iter().enumerate() {
        let Ok(gi) = g.interval_eval(b, buf) else {
            return false;
        };
        let dx = b.dims[i].sub(Interval::point(m[i]));
        acc = acc.add(gi.mul(dx));
    }
    acc.intersect(target).is_none()
}

fn shrank_enough(before: &IntervalBox, after: &IntervalBox) -> bool {
    before
        .dims
        .iter()
        .zip(&after.dims)
        .any(|(a, b)| b.width() < 0.9 * a.width())
}

fn box_hull(a: &IntervalBox, b: &IntervalBox) -> IntervalBox {
    IntervalBox::new(a.dims.iter().zip(&b.dims).map(|(x, y)| x.hull(y)).collect())
}

/// Contracts `b` to a sub-box holding every solution of `phi` in `b`;
/// `None` when interval reasoning proves there is none.
pub fn prune(phi: &Formula, b: &IntervalBox) -> Option<IntervalBox> {
    let c = Compiled::new(phi);
    let mut nb = b.clone();
    c.prune(&mut nb, &mut Vec::new()).then_some(nb)
}

/// Bisects the widest dimension at its midpoint.
pub fn branch(b: &IntervalBox) -> (IntervalBox, IntervalBox) {
    let k = b.widest_dim();
    let d = b.dims[k];
    let m = d.mid();
    let mut left = b.clone();
    let mut right = b.clone();
    left.dims[k] = Interval::new(d.lo, m);
    right.dims[k] = Interval::new(m, d.hi);
    (left, right)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "UNSAT")]
    Unsat,
    #[serde(rename = "DELTA_SAT")]
    DeltaSat,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unsat => "UNSAT",
            Verdict::DeltaSat => "DELTA_SAT",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsatResult {
    pub verdict: Verdict,
    pub witness: Option<IntervalBox>,
    pub boxes_explored: u64,
    /// Seconds.
    pub wall_time: f64,
}

impl DsatResult {
    pub fn is_unsat(&self) -> bool {
        self.verdict == Verdict::Unsat
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsatConfig {
    pub delta: f64,
    pub max_boxes: u64,
}

impl Default for DsatConfig {
    fn default() -> Self {
        DsatConfig {
            delta: 1e-3,
            max_boxes: 10_000_000,
        }
    }
}

/// Depth-first branch-and-prune over `domain`.
pub fn check(phi: &Formula, domain: &IntervalBox, cfg: &DsatConfig) -> Result<DsatResult, DsatError> {
    if !(cfg.delta > 0.0) {
        return Err(DsatError::BadDelta(cfg.delta));
    }
    let arity = phi.arity();
    if arity > domain.arity() {
        return Err(DsatError::Arity {
            formula: arity,
            domain: domain.arity(),
        });
    }
    let start = Instant::now();
    let compiled = Compiled::new(phi);
    let mut buf = Vec::new();
    let mut stack = vec![domain.clone()];
    let mut explored = 0u64;
    while let Some(mut b) = stack.pop() {
        explored += 1;
        if explored > cfg.max_boxes {
            return Err(DsatError::Budget(cfg.max_boxes));
        }
        if !compiled.prune(&mut b, &mut buf) {
            continue;
        }
        if b.max_width() <= cfg.delta {
            return Ok(DsatResult {
                verdict: Verdict::DeltaSat,
                witness: Some(b),
                boxes_explored: explored,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        let (l, r) = branch(&b);
        stack.push(r);
        stack.push(l);
    }
    Ok(DsatResult {
        verdict: Verdict::Unsat,
        witness: None,
        boxes_explored: explored,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Checks independent sub-problems concurrently.
///
/// Returns one result per sub-problem, in input order. Each sub-search is
/// deterministic, so the merged outcome does not depend on scheduling.
pub fn check_each(
    problems: &[(Formula, IntervalBox)],
    cfg: &DsatConfig,
) -> Result<Vec<DsatResult>, DsatError> {
    problems
        .par_iter()
        .map(|(phi, dom)| check(phi, dom, cfg))
        .collect()
}

/// UNSAT iff every part is UNSAT; the witness comes from the first
/// DELTA_SAT part in input order.
pub fn merge(parts: &[DsatResult]) -> DsatResult {
    let first_sat = parts.iter().find(|r| r.verdict == Verdict::DeltaSat);
    DsatResult {
        verdict: if first_sat.is_some() {
            Verdict::DeltaSat
        } else {
            Verdict::Unsat
        },
        witness: first_sat.and_then(|r| r.witness.clone()),
        boxes_explored: parts.iter().map(|r| r.boxes_explored).sum(),
        wall_time: parts.iter().map(|r| r.wall_time).sum(),
    }
}

/// `outer \ inner` as at most `2n` closed boxes (slab decomposition).
/// Slabs of zero width are dropped; they lie inside `inner`'s closure.
pub fn box_minus(outer: &IntervalBox, inner: &IntervalBox) -> Vec<IntervalBox> {
    let mut out = Vec::new();
    let mut rest = outer.clone();
    for k in 0..outer.arity() {
        let (o, i) = (rest.dims[k], inner.dims[k]);
        if i.lo > o.lo {
            let mut s = rest.clone();
            s.dims[k] = Interval::new(o.lo, i.lo.min(o.hi));
            out.push(s);
        }
        if i.hi < o.hi {
            let mut s = rest.clone();
            s.dims[k] = Interval::new(i.hi.max(o.lo), o.hi);
            out.push(s);
        }
        match o.intersect(&i) {
            Some(c) => rest.dims[k] = c,
            None => break,
        }
    }
    out
}
