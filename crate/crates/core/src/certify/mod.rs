//! Barrier certificate search for a closed-loop vector field.
//!
//! A quadratic generator `v` is fitted to simulation traces by LP and its
//! decrease condition is checked with the δ-decision procedure; any
//! counterexample seeds a new trace and the LP is solved again. Once the
//! decrease query is UNSAT a level `ℓ` is chosen so that the initial box lies
//! inside `{v ≤ ℓ}` and every unsafe halfspace lies outside it. The barrier
//! is then `B = v - ℓ`.

mod level;

pub use level::{halfspace_min, vertex_max, EllipsoidCenter, Halfspace};

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsat::{self, DsatConfig, DsatError, DsatResult, Formula, Rel, Verdict};
use crate::lpgen::{
    build_constraints, candidate_from, solve_lp, GeneratorCandidate, LpError, LpOptions,
    QuadraticTemplate,
};
use crate::plant::VectorField;
use crate::simulate::{seed_traces, simulate, SamplingRegion, SimError, Trace};
use crate::symexpr::{parse, Expr, Interval, IntervalBox};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("invalid safety spec: {0}")]
    Spec(String),
    #[error("spec has {spec} dimensions, vector field has {field}")]
    Arity { spec: usize, field: usize },
    #[error(transparent)]
    Dsat(#[from] DsatError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("generator is not positive definite; its level sets are unbounded")]
    NotEllipsoid,
    #[error("no level separates the initial set from the unsafe set")]
    NoLevel,
    #[error("no generator candidate after {iterations} iterations")]
    NoCandidate { iterations: usize },
    #[error("gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("sublevel set is not contained in the enclosing search box")]
    NotEnclosed,
}

/// Initial box `X0` inside the safe rectangle; the unsafe set is everything
/// outside the rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetySpec {
    pub initial: IntervalBox,
    pub safe: IntervalBox,
}

impl Default for SafetySpec {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        SafetySpec {
            initial: IntervalBox::from_bounds(&[(-0.1, 0.1), (-0.1, 0.1)]),
            safe: IntervalBox::from_bounds(&[(-1.0, 1.0), (-FRAC_PI_2, FRAC_PI_2)]),
        }
    }
}

/// Inflation factor of the safe rectangle that bounds the unsafe-set query.
pub const ENCLOSING_FACTOR: f64 = 3.0;

impl SafetySpec {
    pub fn validate(&self) -> Result<(), CertifyError> {
        if self.initial.arity() != self.safe.arity() || self.safe.arity() == 0 {
            return Err(CertifyError::Spec("initial and safe boxes differ in dimension".into()));
        }
        for (k, (i, s)) in self.initial.dims.iter().zip(&self.safe.dims).enumerate() {
            if !(s.is_bounded() && s.lo < i.lo && i.hi < s.hi) {
                return Err(CertifyError::Spec(format!(
                    "initial box not strictly inside the safe box in dimension {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.safe.arity()
    }

    /// `x ∈ 𝒟 \ X0`: inside the safe box and outside the initial box.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.safe.contains(x) && !self.initial.contains(x)
    }

    /// `𝒟 \ X0` as closed slabs.
    pub fn domain_slabs(&self) -> Vec<IntervalBox> {
        dsat::box_minus(&self.safe, &self.initial)
    }

    /// The unsafe set as a union of closed halfspaces, two per dimension:
    /// `x_k ≥ hi_k`, then `-x_k ≥ -lo_k`.
    pub fn unsafe_halfspaces(&self) -> Vec<Halfspace> {
        let n = self.arity();
        let unit = |k: usize, s: f64| {
            let mut a = vec![0.0; n];
            a[k] = s;
            a
        };
        self.safe
            .dims
            .iter()
            .enumerate()
            .flat_map(|(k, d)| {
                [
                    Halfspace { a: unit(k, 1.0), b: d.hi },
                    Halfspace { a: unit(k, -1.0), b: -d.lo },
                ]
            })
            .collect()
    }

    pub fn enclosing_box(&self) -> IntervalBox {
        IntervalBox::new(
            self.safe
                .dims
                .iter()
                .map(|d| {
                    let (m, r) = (d.mid(), 0.5 * d.width() * ENCLOSING_FACTOR);
                    Interval::new(m - r, m + r)
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub gamma: f64,
    pub dsat: DsatConfig,
    pub lp: LpOptions,
    pub seed_traces: usize,
    /// Simulation horizon in seconds, for seed and counterexample traces.
    pub horizon: f64,
    pub step: f64,
    pub max_iterations: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            gamma: 1e-6,
            dsat: DsatConfig::default(),
            lp: LpOptions::default(),
            seed_traces: 20,
            horizon: 10.0,
            step: 0.01,
            max_iterations: 20,
            bisection_steps: 30,
            seed: 0,
        }
    }
}

/// One δ-decision sub-problem and its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubqueryRecord {
    pub formula: String,
    pub domain: IntervalBox,
    pub verdict: Verdict,
    pub witness: Option<IntervalBox>,
    pub boxes_explored: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryTranscript {
    pub name: String,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub level: Option<f64>,
    pub verdict: Verdict,
    pub witness: Option<IntervalBox>,
    pub boxes_explored: u64,
    pub wall_time_s: f64,
    pub subqueries: Vec<SubqueryRecord>,
}

impl QueryTranscript {
    pub fn is_unsat(&self) -> bool {
        self.verdict == Verdict::Unsat
    }

    fn run(
        name: &str,
        problems: Vec<(Formula, IntervalBox)>,
        cfg: &DsatConfig,
    ) -> Result<QueryTranscript, DsatError> {
        let start = Instant::now();
        let parts = dsat::check_each(&problems, cfg)?;
        let merged: DsatResult = dsat::merge(&parts);
        Ok(QueryTranscript {
            name: name.to_string(),
            delta: cfg.delta,
            gamma: None,
            level: None,
            verdict: merged.verdict,
            witness: merged.witness,
            boxes_explored: merged.boxes_explored,
            wall_time_s: start.elapsed().as_secs_f64(),
            subqueries: problems
                .iter()
                .zip(&parts)
                .map(|((phi, dom), r)| SubqueryRecord {
                    formula: phi.to_string(),
                    domain: dom.clone(),
                    verdict: r.verdict,
                    witness: r.witness.clone(),
                    boxes_explored: r.boxes_explored,
                })
                .collect(),
        })
    }
}

/// `x ∉ X0` as a disjunction of strict bound violations.
fn outside(b: &IntervalBox) -> Formula {
    Formula::Or(
        b.dims
            .iter()
            .enumerate()
            .flat_map(|(k, d)| {
                [
                    Formula::atom(Expr::var(k), Rel::Lt, d.lo),
                    Formula::atom(Expr::var(k), Rel::Gt, d.hi),
                ]
            })
            .collect(),
    )
}

/// Lie derivative `∇v · f`.
pub fn lie_derivative(cand: &GeneratorCandidate, f: &VectorField) -> Expr {
    Expr::dot(&cand.grad, &f.components)
}

/// Is there `x ∈ 𝒟 \ X0` with `∇v · f(x) ≥ -γ`?
pub fn query_decrease(
    cand: &GeneratorCandidate,
    f: &VectorField,
    spec: &SafetySpec,
    gamma: f64,
    cfg: &DsatConfig,
) -> Result<QueryTranscript, CertifyError> {
    if !(gamma > 0.0) {
        return Err(CertifyError::BadGamma(gamma));
    }
    let phi = Formula::And(vec![
        outside(&spec.initial),
        Formula::atom(lie_derivative(cand, f), Rel::Ge, -gamma),
    ]);
    let problems = spec.domain_slabs().into_iter().map(|s| (phi.clone(), s)).collect();
    let mut t = QueryTranscript::run("decrease", problems, cfg)?;
    t.gamma = Some(gamma);
    Ok(t)
}

/// Is there `x ∈ X0` with `v(x) - ℓ > 0`?
pub fn query_init_containment(
    cand: &GeneratorCandidate,
    level: f64,
    initial: &IntervalBox,
    cfg: &DsatConfig,
) -> Result<QueryTranscript, CertifyError> {
    let phi = Formula::atom(cand.expr.clone() - Expr::constant(level), Rel::Gt, 0.0);
    let mut t = QueryTranscript::run("init_containment", vec![(phi, initial.clone())], cfg)?;
    t.level = Some(level);
    Ok(t)
}

/// Is there `x` with `v(x) - ℓ ≤ 0` in some unsafe halfspace? Each halfspace
/// is searched within the enclosing box.
pub fn query_unsafe_disjoint(
    cand: &GeneratorCandidate,
    level: f64,
    spec: &SafetySpec,
    cfg: &DsatConfig,
) -> Result<QueryTranscript, CertifyError> {
    let sub = cand.expr.clone() - Expr::constant(level);
    let dom = spec.enclosing_box();
    let problems = spec
        .unsafe_halfspaces()
        .iter()
        .map(|h| {
            let phi = Formula::And(vec![
                Formula::atom(sub.clone(), Rel::Le, 0.0),
                Formula::atom(h.lhs_expr(), Rel::Ge, h.b),
            ]);
            (phi, dom.clone())
        })
        .collect();
    let mut t = QueryTranscript::run("unsafe_disjoint", problems, cfg)?;
    t.level = Some(level);
    Ok(t)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub lp_s: f64,
    pub query_s: f64,
    pub other_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug)]
pub struct GeneratorSearch {
    pub candidate: GeneratorCandidate,
    /// Number of LP solves, each followed by one decrease query.
    pub iterations: usize,
    pub decrease: QueryTranscript,
    /// Witness-box midpoints that seeded refinement traces.
    pub counterexamples: Vec<Vec<f64>>,
}

/// Why a stage failed, with whatever was established before it did.
#[derive(Debug)]
pub struct StageFailure {
    pub error: CertifyError,
    pub iterations: usize,
    pub transcripts: Vec<QueryTranscript>,
}

impl<E: Into<CertifyError>> From<E> for StageFailure {
    fn from(e: E) -> Self {
        StageFailure {
            error: e.into(),
            iterations: 0,
            transcripts: Vec::new(),
        }
    }
}

/// CEGIS loop: LP candidate, decrease query, counterexample trace, repeat.
pub fn find_generator(
    spec: &SafetySpec,
    f: &VectorField,
    cfg: &CertifyConfig,
    timings: &mut Timings,
) -> Result<GeneratorSearch, StageFailure> {
    let tmpl = QuadraticTemplate::new(spec.arity());
    let mut transcripts = Vec::new();
    let fail = |error, iterations, transcripts| StageFailure {
        error,
        iterations,
        transcripts,
    };
    if cfg.max_iterations == 0 {
        return Err(fail(CertifyError::NoCandidate { iterations: 0 }, 0, transcripts));
    }
    let region = SamplingRegion {
        outer: spec.safe.clone(),
        exclude: Some(spec.initial.clone()),
    };
    let mut traces: Vec<Trace> =
        seed_traces(f, &region, cfg.seed_traces, cfg.horizon, cfg.step, cfg.seed)?;
    let mut counterexamples = Vec::new();
    for it in 1..=cfg.max_iterations {
        let t0 = Instant::now();
        let lp = build_constraints(&traces, &tmpl, &cfg.lp, |x| spec.in_domain(x));
        let sol = solve_lp(&lp);
        timings.lp_s += t0.elapsed().as_secs_f64();
        let coeffs = match sol {
            Ok(Some(c)) => c,
            Ok(None) => {
                log::info!("iteration {it}: LP infeasible");
                return Err(fail(CertifyError::NoCandidate { iterations: it }, it, transcripts));
            }
            Err(e) => return Err(fail(e.into(), it, transcripts)),
        };
        let cand = candidate_from(&coeffs, &tmpl).map_err(|e| fail(e.into(), it, Vec::new()))?;
        log::debug!("iteration {it}: candidate {}", cand.expr);
        let t1 = Instant::now();
        let q = query_decrease(&cand, f, spec, cfg.gamma, &cfg.dsat);
        timings.query_s += t1.elapsed().as_secs_f64();
        let q = q.map_err(|e| fail(e, it, transcripts.clone()))?;
        if q.is_unsat() {
            return Ok(GeneratorSearch {
                candidate: cand,
                iterations: it,
                decrease: q,
                counterexamples,
            });
        }
        let witness = q.witness.clone().expect("DELTA_SAT carries a witness");
        let cex = witness.midpoint();
        log::info!("iteration {it}: counterexample near {cex:?}");
        transcripts.push(q);
        let mut starts = vec![cex.clone()];
        // A midpoint that already decreases adds no binding row; the LP would
        // return the same candidate. Also refine from the worst box corner.
        let ld = lie_derivative(&cand, f);
        let value = |x: &[f64]| ld.eval(x).unwrap_or(f64::INFINITY);
        if value(&cex) < -cfg.gamma {
            let worst = witness
                .vertices()
                .into_iter()
                .max_by(|a, b| value(a).total_cmp(&value(b)))
                .expect("a box has at least one corner");
            starts.push(worst);
        }
        for x0 in &starts {
            let tr = simulate(f, x0, cfg.horizon, cfg.step)
                .map_err(|e| fail(e.into(), it, transcripts.clone()))?;
            traces.push(tr);
        }
        counterexamples.push(cex);
    }
    Err(fail(
        CertifyError::NoCandidate {
            iterations: cfg.max_iterations,
        },
        cfg.max_iterations,
        transcripts,
    ))
}

#[derive(Clone, Debug)]
pub struct LevelChoice {
    pub level: f64,
    /// Analytic bracket `(vertex_max, min halfspace_min)`.
    pub bracket: (f64, f64),
    pub probes: usize,
    pub init: QueryTranscript,
    pub unsafe_set: QueryTranscript,
}

/// Bisects `ℓ` within the analytic bracket until both containment queries
/// are UNSAT.
pub fn select_level(
    cand: &GeneratorCandidate,
    spec: &SafetySpec,
    cfg: &CertifyConfig,
) -> Result<LevelChoice, StageFailure> {
    let center = EllipsoidCenter::of(cand)?;
    let mut hi = f64::INFINITY;
    for h in spec.unsafe_halfspaces() {
        hi = hi.min(halfspace_min(cand, &h)?);
    }
    let mut lo = vertex_max(cand, &spec.initial);
    let bracket = (lo, hi);
    if !(lo < hi) {
        return Err(CertifyError::NoLevel.into());
    }
    let mut transcripts = Vec::new();
    for probe in 1..=cfg.bisection_steps {
        let level = 0.5 * (lo + hi);
        if !(lo < level && level < hi) {
            break;
        }
        let enc = spec.enclosing_box();
        let hw = center.half_widths(level);
        let enclosed = enc.dims.iter().zip(&center.center).zip(&hw).all(|((d, c), r)| {
            d.lo < c - r && c + r < d.hi
        });
        if !enclosed {
            return Err(CertifyError::NotEnclosed.into());
        }
        let fail = |e: CertifyError, ts: &Vec<QueryTranscript>| StageFailure {
            error: e,
            iterations: 0,
            transcripts: ts.clone(),
        };
        let (init, unsafe_set) = rayon::join(
            || query_init_containment(cand, level, &spec.initial, &cfg.dsat),
            || query_unsafe_disjoint(cand, level, spec, &cfg.dsat),
        );
        let init = init.map_err(|e| fail(e, &transcripts))?;
        let unsafe_set = unsafe_set.map_err(|e| fail(e, &transcripts))?;
        log::debug!("level probe {probe}: ℓ = {level}, init {}, unsafe {}", init.verdict, unsafe_set.verdict);
        match (init.is_unsat(), unsafe_set.is_unsat()) {
            (true, true) => {
                return Ok(LevelChoice {
                    level,
                    bracket,
                    probes: probe,
                    init,
                    unsafe_set,
                })
            }
            (false, false) => {
                transcripts.extend([init, unsafe_set]);
                break;
            }
            (false, true) => lo = level,
            (true, false) => hi = level,
        }
        transcripts.extend([init, unsafe_set]);
    }
    Err(StageFailure {
        error: CertifyError::NoLevel,
        iterations: 0,
        transcripts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    /// Template coefficients: upper triangle of `P` row by row, `q`, `c`.
    pub coefficients: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub c: f64,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateQueries {
    pub decrease: QueryTranscript,
    pub init_containment: QueryTranscript,
    pub unsafe_disjoint: QueryTranscript,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub generator: GeneratorRecord,
    pub level: f64,
    /// `v - ℓ`.
    pub barrier: String,
    pub gamma: f64,
    pub delta: f64,
    pub queries: CertificateQueries,
    pub spec: SafetySpec,
    pub controller_digest: Option<String>,
    pub tool_version: String,
    pub iterations: usize,
    pub counterexamples: Vec<Vec<f64>>,
    pub timings: Timings,
}

impl Certificate {
    pub fn generator(&self) -> Result<GeneratorCandidate, LpError> {
        candidate_from(&self.generator.coefficients, &QuadraticTemplate::new(self.spec.arity()))
    }

    pub fn barrier_expr(&self) -> Result<Expr, crate::symexpr::ParseError> {
        parse(&self.barrier)
    }

    pub fn all_unsat(&self) -> bool {
        let q = &self.queries;
        q.decrease.is_unsat() && q.init_containment.is_unsat() && q.unsafe_disjoint.is_unsat()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generator,
    Level,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Generator => "generator",
            Stage::Level => "level",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inconclusive {
    pub stage: Stage,
    pub reason: String,
    pub iterations: usize,
    pub transcripts: Vec<QueryTranscript>,
    pub timings: Timings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum VerifyOutcome {
    Certified(Box<Certificate>),
    Inconclusive(Inconclusive),
}

impl VerifyOutcome {
    pub fn iterations(&self) -> usize {
        match self {
            VerifyOutcome::Certified(c) => c.iterations,
            VerifyOutcome::Inconclusive(i) => i.iterations,
        }
    }

    pub fn timings(&self) -> &Timings {
        match self {
            VerifyOutcome::Certified(c) => &c.timings,
            VerifyOutcome::Inconclusive(i) => &i.timings,
        }
    }
}

/// Runs the whole pipeline. Only malformed inputs are errors; every failure
/// to find a certificate is reported as [`VerifyOutcome::Inconclusive`].
pub fn verify(
    spec: &SafetySpec,
    f: &VectorField,
    cfg: &CertifyConfig,
) -> Result<VerifyOutcome, CertifyError> {
    spec.validate()?;
    if f.arity != spec.arity() || f.components.len() != spec.arity() {
        return Err(CertifyError::Arity {
            spec: spec.arity(),
            field: f.arity,
        });
    }
    if !(cfg.gamma > 0.0) {
        return Err(CertifyError::BadGamma(cfg.gamma));
    }
    let start = Instant::now();
    let mut timings = Timings::default();
    let finish = |mut t: Timings| {
        t.total_s = start.elapsed().as_secs_f64();
        t.other_s = (t.total_s - t.lp_s - t.query_s).max(0.0);
        t
    };
    let search = match find_generator(spec, f, cfg, &mut timings) {
        Ok(s) => s,
        Err(fail) => {
            return Ok(VerifyOutcome::Inconclusive(Inconclusive {
                stage: Stage::Generator,
                reason: fail.error.to_string(),
                iterations: fail.iterations,
                transcripts: fail.transcripts,
                timings: finish(timings),
            }))
        }
    };
    let t0 = Instant::now();
    let chosen = select_level(&search.candidate, spec, cfg);
    timings.query_s += t0.elapsed().as_secs_f64();
    let chosen = match chosen {
        Ok(c) => c,
        Err(fail) => {
            let mut transcripts = vec![search.decrease];
            transcripts.extend(fail.transcripts);
            return Ok(VerifyOutcome::Inconclusive(Inconclusive {
                stage: Stage::Level,
                reason: fail.error.to_string(),
                iterations: search.iterations,
                transcripts,
                timings: finish(timings),
            }));
        }
    };
    let cand = &search.candidate;
    let barrier = cand.expr.clone() - Expr::constant(chosen.level);
    Ok(VerifyOutcome::Certified(Box::new(Certificate {
        generator: GeneratorRecord {
            coefficients: cand.coeffs.clone(),
            p: cand.p.clone(),
            q: cand.q.clone(),
            c: cand.c,
            expr: cand.expr.to_string(),
        },
        level: chosen.level,
        barrier: barrier.to_string(),
        gamma: cfg.gamma,
        delta: cfg.dsat.delta,
        queries: CertificateQueries {
            decrease: search.decrease,
            init_containment: chosen.init,
            unsafe_disjoint: chosen.unsafe_set,
        },
        spec: spec.clone(),
        controller_digest: None,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        iterations: search.iterations,
        counterexamples: search.counterexamples,
        timings: finish(timings),
    })))
}
