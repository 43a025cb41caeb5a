//! `bench`: repeated verification per controller size, averaged into one CSV
//! row per size.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use barricade::certify::{verify, VerifyOutcome};

use crate::config::System;
use crate::{EXIT_CERTIFIED, EXIT_INCONCLUSIVE};

pub const HEADER: &str = "neurons,avg_iterations,lp_time_s,query_time_s,other_time_s,total_time_s";

#[derive(clap::Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated hidden-layer widths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub neurons: Vec<usize>,
    /// Verifier seeds per size, `seed..seed + trials`.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory with `system.json` and `nn_<N>.json` per size.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

/// Outcome of one verifier run.
#[derive(Clone, Debug, PartialEq)]
pub enum Trial {
    Certified { iterations: usize, lp: f64, query: f64, other: f64, total: f64 },
    Inconclusive { iterations: usize, reason: String },
    Failed(String),
}

/// Averages over the certified trials; `NaN` columns when none certified.
pub fn summarize(neurons: usize, trials: &[Trial]) -> String {
    let mut n = 0usize;
    let mut sums = [0.0f64; 5];
    for t in trials {
        if let Trial::Certified { iterations, lp, query, other, total } = t {
            n += 1;
            for (s, v) in sums.iter_mut().zip([*iterations as f64, *lp, *query, *other, *total]) {
                *s += v;
            }
        }
    }
    if n == 0 {
        return format!("{neurons},NaN,NaN,NaN,NaN,NaN");
    }
    let avg: Vec<String> = sums.iter().map(|s| format!("{:?}", s / n as f64)).collect();
    format!("{neurons},{}", avg.join(","))
}

fn run_trial(sys: &System, seed: u64) -> Trial {
    let mut cfg = sys.config.certify.clone();
    cfg.seed = seed;
    let out = sys.field().map_err(|e| e.to_string()).and_then(|f| {
        verify(&sys.config.spec, &f, &cfg).map_err(|e| e.to_string())
    });
    match out {
        Ok(VerifyOutcome::Certified(c)) => Trial::Certified {
            iterations: c.iterations,
            lp: c.timings.lp_s,
            query: c.timings.query_s,
            other: c.timings.other_s,
            total: c.timings.total_s,
        },
        Ok(VerifyOutcome::Inconclusive(i)) => Trial::Inconclusive {
            iterations: i.iterations,
            reason: i.reason,
        },
        Err(e) => Trial::Failed(e),
    }
}

/// Trials run one after another so their wall times do not compete. A
/// missing or malformed input aborts before any trial runs. Every trial that
/// does not certify is reported on stderr and turns the exit
/// status into [`EXIT_INCONCLUSIVE`]; the CSV is still written.
pub fn cmd_bench(a: &BenchArgs) -> Result<u8> {
    let system = a.data_dir.join("system.json");
    let systems = a
        .neurons
        .iter()
        .map(|&n| Ok((n, System::load(Some(&system), Some(&a.data_dir.join(format!("nn_{n}.json"))))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![HEADER.to_string()];
    let mut all_certified = true;
    for (n, sys) in systems {
        let trials: Vec<Trial> = (0..a.trials as u64).map(|k| run_trial(&sys, a.seed + k)).collect();
        for (k, t) in trials.iter().enumerate() {
            match t {
                Trial::Certified { iterations, total, .. } => {
                    eprintln!("neurons {n} trial {k}: certified in {iterations} iteration(s), {total:.3} s")
                }
                Trial::Inconclusive { iterations, reason } => {
                    all_certified = false;
                    eprintln!("neurons {n} trial {k}: inconclusive after {iterations} iteration(s): {reason}")
                }
                Trial::Failed(e) => {
                    all_certified = false;
                    eprintln!("neurons {n} trial {k}: error: {e}")
                }
            }
        }
        rows.push(summarize(n, &trials));
    }
    let csv = rows.join("\n") + "\n";
    fs::write(&a.out, &csv).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{csv}");
    Ok(if all_certified { EXIT_CERTIFIED } else { EXIT_INCONCLUSIVE })
}
