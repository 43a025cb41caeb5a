use std::collections::HashMap;
use std::fmt;
use std::ops;
use std::sync::Arc;

use super::interval::{Interval, IntervalBox};
use super::EvalError;

/// Expression node. Children are reference counted so subtrees can be shared
/// between a function and its derivatives without copying.
#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, u32),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Tanh(Expr),
}

/// Immutable symbolic expression over real variables `x0, x1, ...`.
///
/// Constructors fold constants and the identities `x+0`, `x*1`, `x*0`.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn wrap(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    /// Builds a node verbatim, bypassing constant folding.
    pub(crate) fn from_node(n: Node) -> Expr {
        Expr::wrap(n)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::wrap(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(i: usize) -> Expr {
        Expr::wrap(Node::Var(i))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(v)
    }

    fn fold_unary(a: &Expr, f: fn(f64) -> f64, build: fn(Expr) -> Node) -> Expr {
        if let Some(c) = a.as_const() {
            let v = f(c);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::wrap(build(a.clone()))
    }

    pub fn sin(&self) -> Expr {
        Expr::fold_unary(self, f64::sin, Node::Sin)
    }

    pub fn cos(&self) -> Expr {
        Expr::fold_unary(self, f64::cos, Node::Cos)
    }

    pub fn exp(&self) -> Expr {
        Expr::fold_unary(self, f64::exp, Node::Exp)
    }

    pub fn tanh(&self) -> Expr {
        Expr::fold_unary(self, f64::tanh, Node::Tanh)
    }

    /// Logistic sigmoid lowered to `1 / (1 + exp(-v))`.
    pub fn sigmoid(&self) -> Expr {
        Expr::one() / (Expr::one() + (-self).exp())
    }

    pub fn powi(&self, k: u32) -> Expr {
        match k {
            0 => Expr::one(),
            1 => self.clone(),
            _ => match self.as_const() {
                Some(c) if c.powi(k as i32).is_finite() => Expr::constant(c.powi(k as i32)),
                _ => Expr::wrap(Node::Pow(self.clone(), k)),
            },
        }
    }

    /// One past the largest variable index, or 0 for a closed expression.
    pub fn arity(&self) -> usize {
        fn walk(e: &Expr, memo: &mut HashMap<usize, usize>) -> usize {
            if let Some(&a) = memo.get(&e.ptr_id()) {
                return a;
            }
            let a = match e.node() {
                Node::Const(_) => 0,
                Node::Var(i) => i + 1,
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, memo).max(walk(b, memo))
                }
                Node::Neg(a)
                | Node::Pow(a, _)
                | Node::Sin(a)
                | Node::Cos(a)
                | Node::Exp(a)
                | Node::Tanh(a) => walk(a, memo),
            };
            memo.insert(e.ptr_id(), a);
            a
        }
        walk(self, &mut HashMap::new())
    }

    /// Number of distinct nodes (shared subtrees counted once).
    pub fn node_count(&self) -> usize {
        fn walk(e: &Expr, seen: &mut std::collections::HashSet<usize>) {
            if !seen.insert(e.ptr_id()) {
                return;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                Node::Neg(a)
                | Node::Pow(a, _)
                | Node::Sin(a)
                | Node::Cos(a)
                | Node::Exp(a)
                | Node::Tanh(a) => walk(a, seen),
            }
        }
        let mut seen = Default::default();
        walk(self, &mut seen);
        seen.len()
    }

    /// Point evaluation with real semantics.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = match self.node() {
            Node::Const(c) => *c,
            Node::Var(i) => *point.get(*i).ok_or(EvalError::Arity {
                needed: i + 1,
                got: point.len(),
            })?,
            Node::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Node::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Node::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Node::Div(a, b) => {
                let num = a.eval(point)?;
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Node::Neg(a) => -a.eval(point)?,
            Node::Pow(a, k) => a.eval(point)?.powi(*k as i32),
            Node::Sin(a) => a.eval(point)?.sin(),
            Node::Cos(a) => a.eval(point)?.cos(),
            Node::Exp(a) => a.eval(point)?.exp(),
            Node::Tanh(a) => a.eval(point)?.tanh(),
        };
        if v.is_nan() {
            return Err(EvalError::NotANumber);
        }
        Ok(v)
    }

    /// Natural interval extension. The result encloses `eval(p)` for every
    /// `p` in the box.
    pub fn interval_eval(&self, b: &IntervalBox) -> Result<Interval, EvalError> {
        Ok(match self.node() {
            Node::Const(c) => Interval::point(*c),
            Node::Var(i) => *b.dims.get(*i).ok_or(EvalError::Arity {
                needed: i + 1,
                got: b.arity(),
            })?,
            Node::Add(x, y) => x.interval_eval(b)?.add(y.interval_eval(b)?),
            Node::Sub(x, y) => x.interval_eval(b)?.sub(y.interval_eval(b)?),
            Node::Mul(x, y) => x.interval_eval(b)?.mul(y.interval_eval(b)?),
            Node::Div(x, y) => x.interval_eval(b)?.div(y.interval_eval(b)?),
            Node::Neg(x) => x.interval_eval(b)?.neg(),
            Node::Pow(x, k) => x.interval_eval(b)?.powi(*k),
            Node::Sin(x) => x.interval_eval(b)?.sin()?,
            Node::Cos(x) => x.interval_eval(b)?.cos()?,
            Node::Exp(x) => x.interval_eval(b)?.exp(),
            Node::Tanh(x) => x.interval_eval(b)?.tanh(),
        })
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(var, &mut memo)
    }

    fn diff_memo(&self, var: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.ptr_id()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => a.diff_memo(var, memo) + b.diff_memo(var, memo),
            Node::Sub(a, b) => a.diff_memo(var, memo) - b.diff_memo(var, memo),
            Node::Mul(a, b) => {
                a.diff_memo(var, memo) * b.clone() + a.clone() * b.diff_memo(var, memo)
            }
            Node::Div(a, b) => {
                (a.diff_memo(var, memo) * b.clone() - a.clone() * b.diff_memo(var, memo))
                    / b.powi(2)
            }
            Node::Neg(a) => -a.diff_memo(var, memo),
            Node::Pow(a, k) => {
                Expr::constant(*k as f64) * a.powi(k - 1) * a.diff_memo(var, memo)
            }
            Node::Sin(a) => a.cos() * a.diff_memo(var, memo),
            Node::Cos(a) => -(a.sin()) * a.diff_memo(var, memo),
            Node::Exp(a) => self.clone() * a.diff_memo(var, memo),
            Node::Tanh(a) => (Expr::one() - self.powi(2)) * a.diff_memo(var, memo),
        };
        memo.insert(self.ptr_id(), d.clone());
        d
    }

    pub fn gradient(&self, arity: usize) -> Vec<Expr> {
        (0..arity).map(|i| self.diff(i)).collect()
    }

    /// Replaces every `Var(i)` with `subst[i]`, re-folding on the way up.
    pub fn substitute(&self, subst: &[Expr]) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(subst, &mut memo)
    }

    fn subst_memo(&self, s: &[Expr], memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr_id()) {
            return e.clone();
        }
        let e = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => s[*i].clone(),
            Node::Add(a, b) => a.subst_memo(s, memo) + b.subst_memo(s, memo),
            Node::Sub(a, b) => a.subst_memo(s, memo) - b.subst_memo(s, memo),
            Node::Mul(a, b) => a.subst_memo(s, memo) * b.subst_memo(s, memo),
            Node::Div(a, b) => a.subst_memo(s, memo) / b.subst_memo(s, memo),
            Node::Neg(a) => -a.subst_memo(s, memo),
            Node::Pow(a, k) => a.subst_memo(s, memo).powi(*k),
            Node::Sin(a) => a.subst_memo(s, memo).sin(),
            Node::Cos(a) => a.subst_memo(s, memo).cos(),
            Node::Exp(a) => a.subst_memo(s, memo).exp(),
            Node::Tanh(a) => a.subst_memo(s, memo).tanh(),
        };
        memo.insert(self.ptr_id(), e.clone());
        e
    }

    /// `Σ a_i * b_i`, folded left to right.
    pub fn dot(a: &[Expr], b: &[Expr]) -> Expr {
        a.iter()
            .zip(b)
            .fold(Expr::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
    }
}

impl std::str::FromStr for Expr {
    type Err = super::ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        super::sexpr::parse(s)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

fn finite_or(v: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::constant(v)
    } else {
        fallback()
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => finite_or(a + b, || Expr::wrap(Node::Add(self, rhs))),
            _ if rhs.is_const(0.0) => self,
            _ if self.is_const(0.0) => rhs,
            _ => Expr::wrap(Node::Add(self, rhs)),
        }
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => finite_or(a - b, || Expr::wrap(Node::Sub(self, rhs))),
            _ if rhs.is_const(0.0) => self,
            _ if self.is_const(0.0) => -rhs,
            _ => Expr::wrap(Node::Sub(self, rhs)),
        }
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => finite_or(a * b, || Expr::wrap(Node::Mul(self, rhs))),
            _ if self.is_const(0.0) || rhs.is_const(0.0) => Expr::zero(),
            _ if rhs.is_const(1.0) => self,
            _ if self.is_const(1.0) => rhs,
            _ => Expr::wrap(Node::Mul(self, rhs)),
        }
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => {
                finite_or(a / b, || Expr::wrap(Node::Div(self, rhs)))
            }
            _ if rhs.is_const(1.0) => self,
            _ => Expr::wrap(Node::Div(self, rhs)),
        }
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(-c),
            None => Expr::wrap(Node::Neg(self)),
        }
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}
