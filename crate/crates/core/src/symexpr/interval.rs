//! Closed real intervals with outward-widened arithmetic.
//!
//! Every primitive rounds to nearest and then steps each endpoint one ulp
//! outward, so the result encloses the exact real result. Transcendentals
//! come from the platform libm and are widened by [`LIBM_ULPS`] instead.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Extra ulps granted to libm results (sin, cos, exp, tanh).
pub const LIBM_ULPS: u32 = 4;

/// Largest magnitude accepted by the trigonometric enclosures.
pub const TRIG_ARG_LIMIT: f64 = 1e6;

#[inline]
pub(crate) fn down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        x
    } else {
        x.next_down()
    }
}

#[inline]
pub(crate) fn up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        x
    } else {
        x.next_up()
    }
}

fn down_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = down(x);
    }
    x
}

fn up_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = up(x);
    }
    x
}

/// Product where `0 * inf` is taken as 0, the convention for interval bounds.
#[inline]
fn mul_bound(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Panics if `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            let m = 0.5 * self.lo + 0.5 * self.hi;
            m.clamp(self.lo, self.hi)
        } else if self.lo.is_finite() {
            self.lo
        } else if self.hi.is_finite() {
            self.hi
        } else {
            0.0
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    fn widened(lo: f64, hi: f64) -> Interval {
        Interval {
            lo: down(lo),
            hi: up(hi),
        }
    }

    fn widened_libm(lo: f64, hi: f64) -> Interval {
        Interval {
            lo: down_n(lo, LIBM_ULPS),
            hi: up_n(hi, LIBM_ULPS),
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        Self::widened(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Interval) -> Interval {
        Self::widened(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(self, o: Interval) -> Interval {
        let p = [
            mul_bound(self.lo, o.lo),
            mul_bound(self.lo, o.hi),
            mul_bound(self.hi, o.lo),
            mul_bound(self.hi, o.hi),
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::widened(lo, hi)
    }

    /// Division; a denominator containing zero yields [`Interval::ENTIRE`].
    pub fn div(self, o: Interval) -> Interval {
        if o.contains_zero() {
            return Interval::ENTIRE;
        }
        let q = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        if q.iter().any(|v| v.is_nan()) {
            return Interval::ENTIRE;
        }
        let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::widened(lo, hi)
    }

    /// Integer power by repeated outward multiplication.
    pub fn powi(self, k: u32) -> Interval {
        match k {
            0 => Interval::point(1.0),
            1 => self,
            _ => {
                if k % 2 == 1 || self.lo >= 0.0 {
                    let lo = pow_bound(self.lo, k, false);
                    let hi = pow_bound(self.hi, k, true);
                    Interval { lo, hi }
                } else if self.hi <= 0.0 {
                    // even power, nonpositive base
                    let lo = pow_bound(-self.hi, k, false);
                    let hi = pow_bound(-self.lo, k, true);
                    Interval { lo, hi }
                } else {
                    let m = (-self.lo).max(self.hi);
                    Interval {
                        lo: 0.0,
                        hi: pow_bound(m, k, true),
                    }
                }
            }
        }
    }

    pub fn exp(self) -> Interval {
        let lo = down_n(self.lo.exp(), LIBM_ULPS).max(0.0);
        let hi = up_n(self.hi.exp(), LIBM_ULPS);
        Interval { lo, hi }
    }

    pub fn tanh(self) -> Interval {
        let r = Self::widened_libm(self.lo.tanh(), self.hi.tanh());
        Interval {
            lo: r.lo.max(-1.0),
            hi: r.hi.min(1.0),
        }
    }

    pub fn sin(self) -> Result<Interval, EvalError> {
        trig_enclosure(self, f64::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    pub fn cos(self) -> Result<Interval, EvalError> {
        trig_enclosure(self, f64::cos, 0.0, PI)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

/// Signed power bound for a single endpoint, rounded in the requested direction.
fn pow_bound(x: f64, k: u32, upward: bool) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 || k % 2 == 0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    let neg = x < 0.0 && k % 2 == 1;
    // bound |x|^k in the direction that matches the requested sign direction
    let mag_up = upward != neg;
    let a = x.abs();
    let mut acc = a;
    for _ in 1..k {
        acc *= a;
        acc = if mag_up { up(acc) } else { down(acc).max(0.0) };
    }
    if neg {
        -acc
    } else {
        acc
    }
}

/// Range enclosure for sin/cos: endpoint values plus any interior extremum.
///
/// `max_at`/`min_at` are the phases (mod 2π) where the function hits 1 / -1.
/// Critical points are located with a tolerance so rounding in the phase
/// computation can only add extrema, never drop them.
fn trig_enclosure(
    x: Interval,
    f: fn(f64) -> f64,
    max_at: f64,
    min_at: f64,
) -> Result<Interval, EvalError> {
    if x.lo.abs() > TRIG_ARG_LIMIT || x.hi.abs() > TRIG_ARG_LIMIT {
        return Err(EvalError::TrigArgument(x.lo.abs().max(x.hi.abs())));
    }
    if x.width() >= TAU {
        return Ok(Interval::new(-1.0, 1.0));
    }
    let tol = 1e-9 * x.lo.abs().max(x.hi.abs()).max(1.0);
    let hits = |phase: f64| {
        let k = ((x.lo - tol - phase) / TAU).ceil();
        let c = phase + k * TAU;
        c <= x.hi + tol
    };
    let (a, b) = (f(x.lo), f(x.hi));
    let mut r = Interval::widened_libm(a.min(b), a.max(b));
    if hits(max_at) {
        r.hi = 1.0;
    }
    if hits(min_at) {
        r.lo = -1.0;
    }
    r.lo = r.lo.max(-1.0);
    r.hi = r.hi.min(1.0);
    Ok(r)
}

/// Axis-aligned box: one interval per variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    pub dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Self {
        IntervalBox { dims }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Self {
        IntervalBox {
            dims: bounds.iter().map(|&(l, h)| Interval::new(l, h)).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    /// Index of the widest dimension; ties go to the lowest index.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for (i, d) in self.dims.iter().enumerate() {
            if d.width() > self.dims[best].width() {
                best = i;
            }
        }
        best
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(d, &x)| d.contains(x))
    }

    pub fn is_subset_of(&self, other: &IntervalBox) -> bool {
        self.dims.len() == other.dims.len()
            && self.dims.iter().zip(&other.dims).all(|(a, b)| a.is_subset_of(b))
    }

    /// All 2^n corner points, enumerated with dimension 0 varying fastest.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dims.len();
        (0..1usize << n)
            .map(|mask| {
                self.dims
                    .iter()
                    .enumerate()
                    .map(|(i, d)| if mask >> i & 1 == 1 { d.hi } else { d.lo })
                    .collect()
            })
            .collect()
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(" x "))
    }
}
