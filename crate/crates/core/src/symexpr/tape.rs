//! Flat instruction list compiled from an [`Expr`] DAG.
//!
//! Shared subtrees compile to a single slot. Slots are in topological order
//! (operands before users), which makes the reverse sweep of the HC4
//! contractor a plain backwards loop.

use std::collections::HashMap;

use super::expr::{Expr, Node};
use super::interval::{Interval, IntervalBox};
use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Const(f64),
    Var(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Pow(usize, u32),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Tanh(usize),
}

#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    arity: usize,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut ops = Vec::new();
        let mut slots = HashMap::new();
        let mut consts: HashMap<u64, usize> = HashMap::new();
        emit(e, &mut ops, &mut slots, &mut consts);
        Tape {
            ops,
            arity: e.arity(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Point evaluation; same primitive sequence as [`Expr::eval`].
    pub fn eval(&self, point: &[f64], buf: &mut Vec<f64>) -> Result<f64, EvalError> {
        if point.len() < self.arity {
            return Err(EvalError::Arity {
                needed: self.arity,
                got: point.len(),
            });
        }
        buf.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => point[i],
                Op::Add(a, b) => buf[a] + buf[b],
                Op::Sub(a, b) => buf[a] - buf[b],
                Op::Mul(a, b) => buf[a] * buf[b],
                Op::Div(a, b) => {
                    if buf[b] == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    buf[a] / buf[b]
                }
                Op::Neg(a) => -buf[a],
                Op::Pow(a, k) => buf[a].powi(k as i32),
                Op::Sin(a) => buf[a].sin(),
                Op::Cos(a) => buf[a].cos(),
                Op::Exp(a) => buf[a].exp(),
                Op::Tanh(a) => buf[a].tanh(),
            };
            if v.is_nan() {
                return Err(EvalError::NotANumber);
            }
            buf.push(v);
        }
        Ok(*buf.last().expect("empty tape"))
    }

    /// Forward interval sweep; `buf` receives one enclosure per slot.
    pub fn interval_eval(
        &self,
        b: &IntervalBox,
        buf: &mut Vec<Interval>,
    ) -> Result<Interval, EvalError> {
        if b.arity() < self.arity {
            return Err(EvalError::Arity {
                needed: self.arity,
                got: b.arity(),
            });
        }
        buf.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => Interval::point(c),
                Op::Var(i) => b.dims[i],
                Op::Add(x, y) => buf[x].add(buf[y]),
                Op::Sub(x, y) => buf[x].sub(buf[y]),
                Op::Mul(x, y) => buf[x].mul(buf[y]),
                Op::Div(x, y) => buf[x].div(buf[y]),
                Op::Neg(x) => buf[x].neg(),
                Op::Pow(x, k) => buf[x].powi(k),
                Op::Sin(x) => buf[x].sin()?,
                Op::Cos(x) => buf[x].cos()?,
                Op::Exp(x) => buf[x].exp(),
                Op::Tanh(x) => buf[x].tanh(),
            };
            buf.push(v);
        }
        Ok(*buf.last().expect("empty tape"))
    }

    /// HC4-revise: narrows `b` to the part that can map into `target`.
    ///
    /// Runs a forward sweep, intersects the root with `target`, then
    /// projects back through `Add`, `Sub`, `Mul` and `Neg`. Other nodes are
    /// not inverted. Returns `false` when some slot becomes empty, i.e. the box holds no solution.
    pub fn revise(
        &self,
        b: &mut IntervalBox,
        target: Interval,
        buf: &mut Vec<Interval>,
    ) -> Result<bool, EvalError> {
        let root = self.interval_eval(b, buf)?;
        let Some(r) = root.intersect(&target) else {
            return Ok(false);
        };
        let n = buf.len();
        buf[n - 1] = r;
        for i in (0..n).rev() {
            let v = buf[i];
            match self.ops[i] {
                Op::Const(c) => {
                    if !v.contains(c) {
                        return Ok(false);
                    }
                }
                Op::Var(k) => match b.dims[k].intersect(&v) {
                    Some(nv) => b.dims[k] = nv,
                    None => return Ok(false),
                },
                Op::Add(x, y) => {
                    let nx = v.sub(buf[y]);
                    if !narrow(buf, x, nx) {
                        return Ok(false);
                    }
                    let ny = v.sub(buf[x]);
                    if !narrow(buf, y, ny) {
                        return Ok(false);
                    }
                }
                Op::Sub(x, y) => {
                    let nx = v.add(buf[y]);
                    if !narrow(buf, x, nx) {
                        return Ok(false);
                    }
                    let ny = buf[x].sub(v);
                    if !narrow(buf, y, ny) {
                        return Ok(false);
                    }
                }
                Op::Mul(x, y) => {
                    if !buf[y].contains_zero() {
                        let nx = v.div(buf[y]);
                        if !narrow(buf, x, nx) {
                            return Ok(false);
                        }
                    }
                    if !buf[x].contains_zero() {
                        let ny = v.div(buf[x]);
                        if !narrow(buf, y, ny) {
                            return Ok(false);
                        }
                    }
                }
                Op::Neg(x) => {
                    if !narrow(buf, x, v.neg()) {
                        return Ok(false);
                    }
                }
                _ => {}
            }
        }
        Ok(true)
    }
}

fn narrow(buf: &mut [Interval], slot: usize, with: Interval) -> bool {
    match buf[slot].intersect(&with) {
        Some(nv) => {
            buf[slot] = nv;
            true
        }
        None => false,
    }
}

fn emit(
    e: &Expr,
    ops: &mut Vec<Op>,
    slots: &mut HashMap<usize, usize>,
    consts: &mut HashMap<u64, usize>,
) -> usize {
    if let Some(&s) = slots.get(&e.ptr_id()) {
        return s;
    }
    let op = match e.node() {
        Node::Const(c) => {
            if let Some(&s) = consts.get(&c.to_bits()) {
                return s;
            }
            Op::Const(*c)
        }
        Node::Var(i) => Op::Var(*i),
        Node::Add(a, b) => Op::Add(emit(a, ops, slots, consts), emit(b, ops, slots, consts)),
        Node::Sub(a, b) => Op::Sub(emit(a, ops, slots, consts), emit(b, ops, slots, consts)),
        Node::Mul(a, b) => Op::Mul(emit(a, ops, slots, consts), emit(b, ops, slots, consts)),
        Node::Div(a, b) => Op::Div(emit(a, ops, slots, consts), emit(b, ops, slots, consts)),
        Node::Neg(a) => Op::Neg(emit(a, ops, slots, consts)),
        Node::Pow(a, k) => Op::Pow(emit(a, ops, slots, consts), *k),
        Node::Sin(a) => Op::Sin(emit(a, ops, slots, consts)),
        Node::Cos(a) => Op::Cos(emit(a, ops, slots, consts)),
        Node::Exp(a) => Op::Exp(emit(a, ops, slots, consts)),
        Node::Tanh(a) => Op::Tanh(emit(a, ops, slots, consts)),
    };
    ops.push(op);
    let s = ops.len() - 1;
    if let Op::Const(c) = op {
        consts.insert(c.to_bits(), s);
    }
    slots.insert(e.ptr_id(), s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_subtrees_compile_once() {
        let t = Expr::var(0).tanh();
        let e = t.clone() * t.clone() + t;
        // var, tanh, mul, add
        assert_eq!(Tape::compile(&e).len(), 4);
    }

    #[test]
    fn revise_sum_empty() {
        let e = Expr::var(0) + Expr::var(1);
        let tape = Tape::compile(&e);
        let mut b = IntervalBox::from_bounds(&[(1.0, 2.0), (5.0, 6.0)]);
        let ok = tape
            .revise(&mut b, Interval::point(0.0), &mut Vec::new())
            .unwrap();
        assert!(!ok);
    }

    #[test]
    fn revise_upper_bound() {
        let tape = Tape::compile(&Expr::var(0));
        let mut b = IntervalBox::from_bounds(&[(0.0, 1.0)]);
        let ok = tape
            .revise(&mut b, Interval::new(f64::NEG_INFINITY, 0.5), &mut Vec::new())
            .unwrap();
        assert!(ok);
        assert_eq!(b.dims[0], Interval::new(0.0, 0.5));
    }

    #[test]
    fn revise_linear_combination() {
        // 2x - y <= -3 on x in [0, 4], y in [0, 5]  =>  x <= 1
        let e = Expr::constant(2.0) * Expr::var(0) - Expr::var(1);
        let tape = Tape::compile(&e);
        let mut b = IntervalBox::from_bounds(&[(0.0, 4.0), (0.0, 5.0)]);
        tape.revise(&mut b, Interval::new(f64::NEG_INFINITY, -3.0), &mut Vec::new())
            .unwrap();
        assert!(b.dims[0].hi <= 1.0 + 1e-12);
        assert!(b.dims[1].lo >= 3.0 - 1e-12);
    }
}
