//! Random expressions and boxes shared by the property tests.
#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use barricade::symexpr::{Expr, Interval, IntervalBox, Node};
use proptest::prelude::*;
use rand::Rng;

/// Random expression of depth at most `depth` over `arity` variables.
/// Constants stay in `[-2, 2]` so nested `exp` and powers remain finite on
/// the boxes drawn by [`random_box`].
pub fn random_expr<R: Rng>(rng: &mut R, depth: u32, arity: usize, with_div: bool) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            Expr::var(rng.random_range(0..arity))
        } else {
            Expr::constant(rng.random_range(-2.0..2.0))
        };
    }
    let sub = |rng: &mut R| random_expr(rng, depth - 1, arity, with_div);
    match rng.random_range(0..11) {
        0 => sub(rng) + sub(rng),
        1 => sub(rng) - sub(rng),
        2 => sub(rng) * sub(rng),
        3 if with_div => sub(rng) / sub(rng),
        3 | 4 => -sub(rng),
        5 => sub(rng).powi(rng.random_range(0..4)),
        6 => sub(rng).sin(),
        7 => sub(rng).cos(),
        8 => sub(rng).tanh(),
        9 => (Expr::constant(0.3) * sub(rng)).exp(),
        _ => sub(rng).tanh() * sub(rng),
    }
}

/// Box inside `[-2, 2]^arity` with widths up to 1, occasionally degenerate.
pub fn random_box<R: Rng>(rng: &mut R, arity: usize) -> IntervalBox {
    IntervalBox::new(
        (0..arity)
            .map(|_| {
                let lo = rng.random_range(-2.0..1.5);
                let w = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..1.0) };
                Interval::new(lo, lo + w)
            })
            .collect(),
    )
}

pub fn random_point_in<R: Rng>(rng: &mut R, b: &IntervalBox) -> Vec<f64> {
    b.dims
        .iter()
        .map(|d| if d.width() > 0.0 { rng.random_range(d.lo..=d.hi) } else { d.lo })
        .collect()
}

/// Random sub-box of `b`.
pub fn random_sub_box<R: Rng>(rng: &mut R, b: &IntervalBox) -> IntervalBox {
    IntervalBox::new(
        b.dims
            .iter()
            .map(|d| {
                let (mut x, mut y) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
                if x > y {
                    std::mem::swap(&mut x, &mut y);
                }
                let lo = d.lo + x * d.width();
                let hi = (d.lo + y * d.width()).min(d.hi);
                Interval::new(lo.min(hi), hi)
            })
            .collect(),
    )
}

/// Proptest strategy for division-free expressions over `arity` variables.
pub fn expr_strategy(arity: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..arity).prop_map(Expr::var),
        (-2.0f64..2.0).prop_map(Expr::constant),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| -a),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| a.powi(k)),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.clone().prop_map(|a| a.tanh()),
            inner.prop_map(|a| (Expr::constant(0.3) * a).exp()),
        ]
    })
}

/// Value and partial derivative by forward-mode dual numbers, walking the
/// tree independently of the symbolic differentiator.
pub fn dual_eval(e: &Expr, x: &[f64], var: usize) -> (f64, f64) {
    match e.node() {
        Node::Const(c) => (*c, 0.0),
        Node::Var(i) => (x[*i], if *i == var { 1.0 } else { 0.0 }),
        Node::Add(a, b) => {
            let ((u, du), (v, dv)) = (dual_eval(a, x, var), dual_eval(b, x, var));
            (u + v, du + dv)
        }
        Node::Sub(a, b) => {
            let ((u, du), (v, dv)) = (dual_eval(a, x, var), dual_eval(b, x, var));
            (u - v, du - dv)
        }
        Node::Mul(a, b) => {
            let ((u, du), (v, dv)) = (dual_eval(a, x, var), dual_eval(b, x, var));
            (u * v, du * v + u * dv)
        }
        Node::Div(a, b) => {
            let ((u, du), (v, dv)) = (dual_eval(a, x, var), dual_eval(b, x, var));
            (u / v, (du * v - u * dv) / (v * v))
        }
        Node::Neg(a) => {
            let (u, du) = dual_eval(a, x, var);
            (-u, -du)
        }
        Node::Pow(a, k) => {
            let (u, du) = dual_eval(a, x, var);
            let k = *k as i32;
            let d = if k == 0 { 0.0 } else { k as f64 * u.powi(k - 1) * du };
            (u.powi(k), d)
        }
        Node::Sin(a) => {
            let (u, du) = dual_eval(a, x, var);
            (u.sin(), u.cos() * du)
        }
        Node::Cos(a) => {
            let (u, du) = dual_eval(a, x, var);
            (u.cos(), -u.sin() * du)
        }
        Node::Exp(a) => {
            let (u, du) = dual_eval(a, x, var);
            (u.exp(), u.exp() * du)
        }
        Node::Tanh(a) => {
            let (u, du) = dual_eval(a, x, var);
            let t = u.tanh();
            (t, (1.0 - t * t) * du)
        }
    }
}
