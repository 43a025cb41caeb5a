//! Symbolic expressions shared by the simulator, the LP builder and the
//! δ-decision procedure: exact point evaluation, symbolic differentiation
//! and conservative interval evaluation.

mod expr;
mod interval;
mod sexpr;
mod tape;

pub use expr::{Expr, Node};
pub use interval::{Interval, IntervalBox, LIBM_ULPS, TRIG_ARG_LIMIT};
pub use sexpr::{format_real, parse};
pub use tape::{Op, Tape};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("evaluation produced NaN")]
    NotANumber,
    #[error("point has {got} coordinates, expression needs {needed}")]
    Arity { needed: usize, got: usize },
    #[error("trigonometric argument {0} exceeds the supported range")]
    TrigArgument(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("s-expression parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}
