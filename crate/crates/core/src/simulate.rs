//! Fixed-step RK4 integration of closed-loop vector fields.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::VectorField;
use crate::symexpr::{EvalError, IntervalBox, Tape};

/// Trajectories abort once any state component exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("step must be positive and not exceed the horizon (h = {h}, T = {t})")]
    BadStep { h: f64, t: f64 },
    #[error("state diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("initial state has {got} entries, field has {expected}")]
    Arity { expected: usize, got: usize },
    #[error("cannot sample from an empty region")]
    EmptyRegion,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Field evaluated at each stored state.
    pub derivs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("dx{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:?}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v:?}")));
            row.extend(self.derivs[k].iter().map(|v| format!("{v:?}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Compiled field for repeated evaluation.
pub struct FieldEvaluator {
    tapes: Vec<Tape>,
    buf: Vec<f64>,
}

impl FieldEvaluator {
    pub fn new(f: &VectorField) -> Self {
        FieldEvaluator {
            tapes: f.components.iter().map(Tape::compile).collect(),
            buf: Vec::new(),
        }
    }

    pub fn eval_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, t) in out.iter_mut().zip(&self.tapes) {
            *o = t.eval(x, &mut self.buf)?;
        }
        Ok(())
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.tapes.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

fn rk4_with(ev: &mut FieldEvaluator, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
    let k1 = ev.eval(x)?;
    let k2 = ev.eval(&axpy(x, 0.5 * h, &k1))?;
    let k3 = ev.eval(&axpy(x, 0.5 * h, &k2))?;
    let k4 = ev.eval(&axpy(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(f: &VectorField, x: &[f64], h: f64) -> Result<Vec<f64>, SimError> {
    if !(h > 0.0) {
        return Err(SimError::BadStep { h, t: h });
    }
    if x.len() != f.arity {
        return Err(SimError::Arity {
            expected: f.arity,
            got: x.len(),
        });
    }
    Ok(rk4_with(&mut FieldEvaluator::new(f), x, h)?)
}

/// Integrates for `⌊T/h⌋` steps from `x0`.
pub fn simulate(f: &VectorField, x0: &[f64], duration: f64, h: f64) -> Result<Trace, SimError> {
    if !(h > 0.0) || !(duration >= h) {
        return Err(SimError::BadStep { h, t: duration });
    }
    if x0.len() != f.arity {
        return Err(SimError::Arity {
            expected: f.arity,
            got: x0.len(),
        });
    }
    // tolerate T/h landing a hair below an integer
    let steps = (duration / h + 1e-9).floor() as usize;
    let mut ev = FieldEvaluator::new(f);
    let mut trace = Trace {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        derivs: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = k as f64 * h;
        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(SimError::Diverged { time: t });
        }
        let dx = ev.eval(&x)?;
        trace.times.push(t);
        trace.states.push(x.clone());
        trace.derivs.push(dx);
        if k < steps {
            x = rk4_with(&mut ev, &x, h)?;
        }
    }
    Ok(trace)
}

/// Region initial states are drawn from: a box with an optional excluded
/// inner box (used for the domain between the initial and unsafe sets).
#[derive(Clone, Debug)]
pub struct SamplingRegion {
    pub outer: IntervalBox,
    pub exclude: Option<IntervalBox>,
}

impl SamplingRegion {
    pub fn contains(&self, p: &[f64]) -> bool {
        self.outer.contains(p) && !self.exclude.as_ref().is_some_and(|e| e.contains(p))
    }

    /// Uniform draw by rejection from the outer box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>, SimError> {
        for _ in 0..100_000 {
            let p: Vec<f64> = self
                .outer
                .dims
                .iter()
                .map(|d| if d.width() > 0.0 { rng.random_range(d.lo..=d.hi) } else { d.lo })
                .collect();
            if self.contains(&p) {
                return Ok(p);
            }
        }
        Err(SimError::EmptyRegion)
    }
}

/// Simulates `count` trajectories from uniformly drawn initial states.
/// Initial states are drawn sequentially from one seeded stream, then the
/// simulations run in parallel; the result is independent of thread count.
pub fn seed_traces(
    f: &VectorField,
    region: &SamplingRegion,
    count: usize,
    duration: f64,
    h: f64,
    rng_seed: u64,
) -> Result<Vec<Trace>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let starts: Vec<Vec<f64>> = (0..count)
        .map(|_| region.sample(&mut rng))
        .collect::<Result<_, _>>()?;
    starts
        .par_iter()
        .map(|x0| simulate(f, x0, duration, h))
        .collect()
}
