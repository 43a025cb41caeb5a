//! Command-line front end: train controllers, certify closed loops, and
//! render or benchmark the results.

pub mod bench;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use barricade::certify::{verify, VerifyOutcome};
use barricade::network::shallow_parameter_count;
use barricade::simulate::{seed_traces, SamplingRegion, Trace};
use barricade::train::{scenarios, train_on_with, Objective};
use clap::{Parser, Subcommand, ValueEnum};

use config::{System, TrainConfig};

/// Exit status of `verify`: certificate found.
pub const EXIT_CERTIFIED: u8 = 0;
/// Malformed input or I/O failure, including usage errors.
pub const EXIT_ERROR: u8 = 1;
/// Verifier ran but found no certificate.
pub const EXIT_INCONCLUSIVE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "barricade", version, about = "Barrier certificates for neural-network path-following controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a 2 → N → 1 tanh controller with CMA-ES.
    Train(TrainArgs),
    /// Search for a barrier certificate of the closed loop.
    Verify(VerifyArgs),
    /// Simulate closed-loop trajectories from random initial states.
    Simulate(SimulateArgs),
    /// Draw the phase portrait as SVG.
    Plot(PlotArgs),
    /// Time `verify` across controller sizes and seeds.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Path,
    Straight,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Path => Objective::Path,
            ObjectiveArg::Straight => Objective::Straight,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    /// Hidden-layer width.
    #[arg(long)]
    pub neurons: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Network JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// CMA-ES generations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// CMA-ES population size.
    #[arg(long)]
    pub popsize: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Box bound on every weight and bias.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Set the output bias of every candidate so that u(0, 0) = 0.
    #[arg(long)]
    pub pin_equilibrium: bool,
    /// JSON with `objective`, `rollout`, `cmaes` and `pin_equilibrium` fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Best-cost history CSV; defaults to the output path with extension `history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    /// System JSON (plant, spec, verifier settings, controller path).
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Controller JSON; overrides the system file's entry.
    #[arg(long)]
    pub nn: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Seed for the initial simulation traces.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value = "certificate.json")]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub nn: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds per trajectory.
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value = "traces.csv")]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct PlotArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub nn: Option<PathBuf>,
    /// Certificate (or verify outcome) JSON whose level curve is drawn.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub traces: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value = "plot.svg")]
    pub out: PathBuf,
}

/// Parses `args` and runs the command; the return value is the process
/// exit status.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_CERTIFIED });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ERROR);
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a).map(|()| EXIT_CERTIFIED),
        Command::Verify(a) => cmd_verify(&a),
        Command::Simulate(a) => cmd_simulate(&a).map(|()| EXIT_CERTIFIED),
        Command::Plot(a) => cmd_plot(&a).map(|()| EXIT_CERTIFIED),
        Command::Bench(a) => bench::cmd_bench(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Honors `BARRICADE_THREADS` by sizing the global worker pool.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("BARRICADE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("BARRICADE_THREADS must be a positive integer, got {v:?}"))?;
    // a pool built earlier in this process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn history_path(out: &Path) -> PathBuf {
    out.with_extension("history.csv")
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    if a.neurons == 0 {
        bail!("--neurons must be at least 1");
    }
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    cfg.cmaes.seed = a.seed;
    if let Some(v) = a.iters {
        cfg.cmaes.iterations = v;
    }
    if let Some(v) = a.popsize {
        cfg.cmaes.population = v;
    }
    if let Some(v) = a.sigma {
        cfg.cmaes.sigma = v;
    }
    if a.bound.is_some() {
        cfg.cmaes.bound = a.bound;
    }
    if let Some(o) = a.objective {
        cfg.objective = o.into();
    }
    cfg.pin_equilibrium |= a.pin_equilibrium;
    let cases = scenarios(cfg.objective, &cfg.rollout, a.seed)?;
    log::info!(
        "training {} parameters on {} rollout(s), population {}, {} generations",
        shallow_parameter_count(2, a.neurons, 1),
        cases.len(),
        cfg.cmaes.population,
        cfg.cmaes.iterations
    );
    let r = train_on_with(a.neurons, &cases, &cfg.cmaes, cfg.pin_equilibrium)?;
    write_file(&a.out, r.network.to_json().as_bytes())?;
    let mut csv = String::from("iteration,best_cost\n");
    for (i, v) in r.history.iter().enumerate() {
        csv.push_str(&format!("{},{v:?}\n", i + 1));
    }
    let hist = a.history.clone().unwrap_or_else(|| history_path(&a.out));
    write_file(&hist, csv.as_bytes())?;
    println!(
        "trained {} parameters: best cost {:.6e} after {} evaluations; wrote {} and {}",
        r.network.parameter_count(),
        r.best_cost,
        r.evaluations,
        a.out.display(),
        hist.display()
    );
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<u8> {
    let sys = System::load(a.system.as_deref(), a.nn.as_deref())?;
    let mut cfg = sys.config.certify.clone();
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = a.delta {
        cfg.dsat.delta = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iterations = v;
    }
    let f = sys.field()?;
    let mut outcome = verify(&sys.config.spec, &f, &cfg)?;
    let code = match &mut outcome {
        VerifyOutcome::Certified(c) => {
            c.controller_digest = Some(sys.network.digest());
            println!(
                "certified: level {} after {} iteration(s) in {:.3} s",
                c.level, c.iterations, c.timings.total_s
            );
            EXIT_CERTIFIED
        }
        VerifyOutcome::Inconclusive(i) => {
            println!(
                "inconclusive at the {} stage after {} iteration(s): {}",
                i.stage, i.iterations, i.reason
            );
            EXIT_INCONCLUSIVE
        }
    };
    write_file(&a.out, serde_json::to_string_pretty(&outcome)?.as_bytes())?;
    Ok(code)
}

fn domain_traces(sys: &System, count: usize, horizon: f64, step: f64, seed: u64) -> Result<Vec<Trace>> {
    if !(horizon >= step && step > 0.0) {
        bail!("need horizon ≥ step > 0, got horizon {horizon} and step {step}");
    }
    sys.config.spec.validate()?;
    let region = SamplingRegion {
        outer: sys.config.spec.safe.clone(),
        exclude: Some(sys.config.spec.initial.clone()),
    };
    Ok(seed_traces(&sys.field()?, &region, count, horizon, step, seed)?)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let sys = System::load(a.system.as_deref(), a.nn.as_deref())?;
    let traces = domain_traces(&sys, a.count, a.horizon, a.step, a.seed)?;
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = BufWriter::new(file);
    write_traces_csv(&mut w, &traces)?;
    w.flush()?;
    println!("wrote {} trajectories to {}", traces.len(), a.out.display());
    Ok(())
}

/// Stacked trace CSV: `trace,t,x0,…,dx0,…`.
pub fn write_traces_csv<W: Write>(w: &mut W, traces: &[Trace]) -> Result<()> {
    let n = traces
        .first()
        .and_then(|t| t.states.first())
        .map_or(0, Vec::len);
    let mut header = vec!["trace".to_string(), "t".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..n).map(|i| format!("dx{i}")));
    writeln!(w, "{}", header.join(","))?;
    for (k, tr) in traces.iter().enumerate() {
        for i in 0..tr.len() {
            let mut row = vec![k.to_string(), format!("{:?}", tr.times[i])];
            row.extend(tr.states[i].iter().map(|v| format!("{v:?}")));
            row.extend(tr.derivs[i].iter().map(|v| format!("{v:?}")));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Reads a certificate from either a bare certificate or a verify outcome.
pub fn load_certificate(path: &Path) -> Result<barricade::certify::Certificate> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(VerifyOutcome::Certified(c)) = serde_json::from_str::<VerifyOutcome>(&text) {
        return Ok(*c);
    }
    if let Ok(VerifyOutcome::Inconclusive(_)) = serde_json::from_str::<VerifyOutcome>(&text) {
        bail!("{} records an inconclusive run, not a certificate", path.display());
    }
    serde_json::from_str(&text).with_context(|| format!("parsing certificate {}", path.display()))
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let sys = System::load(a.system.as_deref(), a.nn.as_deref())?;
    let cert = a.certificate.as_deref().map(load_certificate).transpose()?;
    let traces = domain_traces(&sys, a.traces, a.horizon, 0.01, a.seed)?;
    let svg = plot::render(&sys.config.spec, &traces, cert.as_ref())?;
    write_file(&a.out, svg.as_bytes())?;
    println!("wrote {}", a.out.display());
    Ok(())
}
