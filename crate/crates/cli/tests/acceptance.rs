//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are never
//! captured.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use barricade::certify::{halfspace_min, select_level, verify, vertex_max, CertifyConfig, SafetySpec, VerifyOutcome};
use barricade::dsat::{check, DsatConfig, Verdict};
use barricade::lpgen::{build_constraints, candidate_from, solve_lp, LpOptions, LpOutcome, LpProblem, QuadraticTemplate, Row};
use barricade::network::{shallow_parameter_count, Network};
use barricade::plant::{dubins_error_field, DubinsParams, VectorField};
use barricade::simulate::simulate;
use barricade::symexpr::{Expr, IntervalBox};
use barricade::train::{cmaes_minimize, straight_scenarios, train_on, CmaesConfig, STRAIGHT_STARTS};
use barricade_cli::config::System;
use common::checks::{delta_sat_battery, enclosure_fuzz, grid_has_no_model, isotonicity_fuzz, unsat_battery};
use common::oracle::audit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const BUNDLED: [usize; 3] = [10, 50, 100];
const TRIALS: u64 = 3;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn barricade(args: &[&str]) -> (u8, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_barricade")).args(args).output().expect("binary runs");
    (
        o.status.code().map_or(255, |c| c as u8),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn end_to_end(tmp: &Path) -> Outcome {
    let out = tmp.join("nn_10.certificate.json");
    let system = data_dir().join("system.json");
    let start = Instant::now();
    let (code, stdout, stderr) = barricade(&["verify", "--system", p(&system), "--gamma", "1e-6", "--delta", "1e-3", "--out", p(&out)]);
    let wall = start.elapsed();
    ensure(code == 0, || format!("exit {code}: {}{}", stdout.trim(), stderr.trim()))?;
    let text = fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let Ok(VerifyOutcome::Certified(cert)) = serde_json::from_str::<VerifyOutcome>(&text) else {
        return Err("outcome file holds no certificate".into());
    };
    ensure(cert.all_unsat(), || "a query transcript is not UNSAT".into())?;
    ensure(cert.gamma == 1e-6 && cert.delta == 1e-3, || format!("gamma {} delta {}", cert.gamma, cert.delta))?;
    ensure(cert.spec == SafetySpec::default(), || "certificate is for a non-default spec".into())?;
    ensure(cert.iterations <= 5, || format!("{} iterations", cert.iterations))?;
    ensure(wall <= Duration::from_secs(600), || format!("wall time {wall:?}"))?;
    Ok(format!("{} iteration(s), level {:.6}, {:.2} s", cert.iterations, cert.level, wall.as_secs_f64()))
}

/// Audits the end-to-end certificate and every certificate the sweep emits.
fn soundness_oracle(tmp: &Path) -> Outcome {
    let mut audited = 0;
    let cli_cert = barricade_cli::load_certificate(&tmp.join("nn_10.certificate.json")).map_err(|e| format!("{e:#}"))?;
    let system = data_dir().join("system.json");
    let sys10 = System::load(Some(&system), None).map_err(|e| format!("{e:#}"))?;
    let mut jobs = vec![(cli_cert, sys10.field().map_err(|e| e.to_string())?)];
    for n in BUNDLED {
        let sys = System::load(Some(&system), Some(&data_dir().join(format!("nn_{n}.json")))).map_err(|e| format!("{e:#}"))?;
        let f = sys.field().map_err(|e| e.to_string())?;
        for seed in 0..TRIALS {
            let cfg = CertifyConfig { seed, ..sys.config.certify.clone() };
            match verify(&sys.config.spec, &f, &cfg).map_err(|e| e.to_string())? {
                VerifyOutcome::Certified(c) => jobs.push((*c, f.clone())),
                VerifyOutcome::Inconclusive(_) => {}
            }
        }
    }
    for (cert, f) in &jobs {
        let a = audit(cert, f, 10_000, 101);
        ensure(a.boundary_samples == 10_000, || format!("{} boundary samples", a.boundary_samples))?;
        ensure(a.clean(), || format!("violations: {a:?}"))?;
        audited += 1;
    }
    Ok(format!("{audited} certificates, zero violations"))
}

fn scaling_sweep(tmp: &Path) -> Outcome {
    let out = tmp.join("bench.csv");
    let sizes = BUNDLED.map(|n| n.to_string()).join(",");
    let trials = TRIALS.to_string();
    let (code, _, stderr) = barricade(&["bench", "--neurons", &sizes, "--trials", &trials, "--data-dir", p(&data_dir()), "--out", p(&out)]);
    let csv = fs::read_to_string(&out).map_err(|e| format!("exit {code}, no CSV: {e}; {}", stderr.trim()))?;
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    ensure(code == 0, || format!("exit {code}: {}", stderr.trim().replace('\n', "; ")))?;
    ensure(rows.len() == BUNDLED.len(), || format!("{} rows", rows.len()))?;
    let mut iters = Vec::new();
    for r in &rows {
        ensure(r.len() == 6, || format!("row {r:?}"))?;
        let it: f64 = r[1].parse().map_err(|_| format!("row {r:?}"))?;
        ensure(it <= 5.0, || format!("{} neurons averaged {it} iterations", r[0]))?;
        iters.push(format!("{}:{}", r[0], it));
    }
    Ok(format!("all trials certified; average iterations {}", iters.join(" ")))
}

fn dynamics_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pi = std::f64::consts::PI;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let speed = rng.random_range(f64::EPSILON..=2.0);
        let path_angle = rng.random_range(-pi..=pi);
        let theta = rng.random_range(-pi..=pi);
        let f = dubins_error_field(DubinsParams { speed, path_angle });
        let got = f[0].eval(&[rng.random_range(-1.0..1.0), theta, 0.0]).map_err(|e| e.to_string())?;
        worst = worst.max((got - speed * theta.sin()).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("10^4 samples, max deviation {worst:e}"))
}

fn parameter_law(tmp: &Path) -> Outcome {
    let mut seen = Vec::new();
    for n in [10usize, 100, 1000] {
        let out = tmp.join(format!("law_{n}.json"));
        let (code, _, stderr) = barricade(&["train", "--neurons", &n.to_string(), "--iters", "1", "--out", p(&out)]);
        ensure(code == 0, || format!("train {n}: exit {code}: {}", stderr.trim()))?;
        let net = Network::load(&out).map_err(|e| e.to_string())?;
        let count = net.parameter_count();
        ensure(count == 4 * n + 1 && count == shallow_parameter_count(2, n, 1), || format!("{n} neurons: {count} parameters"))?;
        seen.push(format!("{n}→{count}"));
    }
    Ok(seen.join(" "))
}

fn interval_fuzz() -> Outcome {
    let enc = enclosure_fuzz(11, 100_000);
    let iso = isotonicity_fuzz(12, 100_000);
    ensure(enc.ok(), || format!("enclosure: {} violations, {} checked, first {:?}", enc.violations.len(), enc.checked, enc.violations.first()))?;
    ensure(iso.ok(), || format!("isotonicity: {} violations, {} checked, first {:?}", iso.violations.len(), iso.checked, iso.violations.first()))?;
    Ok(format!("enclosure {} / isotonicity {} trials evaluated, zero violations", enc.checked, iso.checked))
}

fn dsat_battery() -> Outcome {
    let battery = unsat_battery();
    for (name, phi, dom) in &battery {
        let r = check(phi, dom, &DsatConfig::default()).map_err(|e| e.to_string())?;
        ensure(r.verdict == Verdict::Unsat, || format!("{name}: {:?}", r.verdict))?;
        ensure(grid_has_no_model(phi, dom), || format!("grid found a model of {name}"))?;
    }
    let sat = delta_sat_battery();
    for c in &sat {
        let r = check(&c.formula, &c.domain, &DsatConfig { delta: c.delta, ..Default::default() }).map_err(|e| e.to_string())?;
        ensure(r.verdict == Verdict::DeltaSat, || format!("{}: {:?}", c.name, r.verdict))?;
        let mid = r.witness.ok_or("no witness")?.midpoint();
        let dist = mid.iter().zip(&c.near).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        ensure(dist <= c.radius, || format!("{}: witness {mid:?}", c.name))?;
    }
    Ok(format!("{} UNSAT (each grid-refuted over 10^6 points), {} DELTA_SAT", battery.len(), sat.len()))
}

fn cmaes_benchmark() -> Outcome {
    let sphere = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>();
    let cfg = CmaesConfig { max_evaluations: Some(2000), ..CmaesConfig::for_dimension(10, 10_000, 1) };
    let r = cmaes_minimize(sphere, &[1.0; 10], &cfg).map_err(|e| e.to_string())?;
    ensure(r.evaluations <= 2000 && r.best_value < 1e-6, || format!("sphere {} after {} evaluations", r.best_value, r.evaluations))?;

    let scen = straight_scenarios(&STRAIGHT_STARTS[..4], 60, 0.05, 1.0);
    let cm = CmaesConfig { population: 12, iterations: 8, sigma: 0.5, seed: 9, max_evaluations: None, bound: Some(3.0) };
    let a = train_on(3, &scen, &cm).map_err(|e| e.to_string())?;
    let b = train_on(3, &scen, &cm).map_err(|e| e.to_string())?;
    ensure(a.history.windows(2).all(|w| w[1] <= w[0]), || "training history increases".into())?;
    let bits = |n: &Network| n.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&a.network) == bits(&b.network) && a.history == b.history, || "same seed, different networks".into())?;
    Ok(format!("sphere {:.2e} in {} evaluations; training monotone and bit-reproducible", r.best_value, r.evaluations))
}

fn lp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut solved = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let mut lp = LpProblem::new(n);
        lp.objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lp.push(Row::le(e.clone(), 5.0));
            lp.push(Row::ge(e, -5.0));
        }
        for _ in 0..rng.random_range(1..10) {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = rng.random_range(-3.0..2.0);
            lp.push(if rng.random_bool(0.5) { Row::le(a, b) } else { Row::ge(a, b) });
        }
        if let LpOutcome::Optimal { x, .. } = lp.solve().map_err(|e| e.to_string())? {
            solved += 1;
            worst = worst.min(lp.min_slack(&x));
        }
    }
    // a CEGIS-shaped instance from simulated decay
    let f = VectorField::new(vec![-Expr::var(0) + Expr::var(1), -Expr::var(0) - Expr::var(1)]).map_err(|e| e.to_string())?;
    let traces: Vec<_> = [[0.8, 0.3], [-0.5, 0.9], [0.2, -0.7]]
        .iter()
        .map(|x0| simulate(&f, x0, 3.0, 0.01))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let lp = build_constraints(&traces, &QuadraticTemplate::new(2), &LpOptions::default(), |_| true);
    let x = solve_lp(&lp).map_err(|e| e.to_string())?.ok_or("CEGIS LP infeasible")?;
    worst = worst.min(lp.min_slack(&x));
    ensure(worst >= -1e-9, || format!("min slack {worst:e}"))?;

    let mut bad = LpProblem::new(1);
    bad.push(Row::ge(vec![1.0], 1.0));
    bad.push(Row::le(vec![1.0], 0.0));
    ensure(solve_lp(&bad).map_err(|e| e.to_string())?.is_none(), || "contradiction reported feasible".into())?;
    Ok(format!("{} solutions, min slack {worst:e}; contradiction infeasible", solved + 1))
}

fn level_analytics() -> Outcome {
    let cand = candidate_from(&[1.0, 0.0, 1.0, 0.0, 0.0, 0.0], &QuadraticTemplate::new(2)).map_err(|e| e.to_string())?;
    let spec = SafetySpec {
        initial: IntervalBox::from_bounds(&[(-0.1, 0.1), (-0.1, 0.1)]),
        safe: IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]),
    };
    let vmax = vertex_max(&cand, &spec.initial);
    // 0.02 as the corners evaluate it in binary floating point
    ensure(vmax == 0.1f64 * 0.1 + 0.1 * 0.1, || format!("vertex_max {vmax}"))?;
    for h in spec.unsafe_halfspaces() {
        let m = halfspace_min(&cand, &h).map_err(|e| e.to_string())?;
        ensure(m == 1.0, || format!("halfspace {h:?}: min {m}"))?;
    }
    let choice = select_level(&cand, &spec, &CertifyConfig::default()).map_err(|e| format!("{e:?}"))?;
    ensure(0.02 < choice.level && choice.level < 1.0, || format!("level {}", choice.level))?;
    ensure(choice.init.is_unsat() && choice.unsafe_set.is_unsat(), || "final level queries not UNSAT".into())?;
    Ok(format!("vertex_max {vmax}, halfspace minima 1, level {:.6}", choice.level))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("end-to-end certification", Box::new(|| end_to_end(dir))),
        ("certificate soundness oracle", Box::new(|| soundness_oracle(dir))),
        ("scaling sweep", Box::new(|| scaling_sweep(dir))),
        ("dynamics identity", Box::new(dynamics_identity)),
        ("parameter law", Box::new(|| parameter_law(dir))),
        ("interval soundness fuzz", Box::new(interval_fuzz)),
        ("delta-SAT sanity battery", Box::new(dsat_battery)),
        ("CMA-ES benchmark", Box::new(cmaes_benchmark)),
        ("LP correctness", Box::new(lp_correctness)),
        ("level-set analytics", Box::new(level_analytics)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
