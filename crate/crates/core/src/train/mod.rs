//! Direct policy search for path-following controllers: CMA-ES over the
//! flat parameter vector of a `2 → N_h → 1` tanh network, scored by a
//! pose-space rollout.

mod cmaes;
mod rollout;

pub use cmaes::{cmaes_minimize, CmaesConfig, CmaesResult};
pub use rollout::{
    path_errors, path_length, rollout, rollout_cost, segment_angle, trace_cost, wrap_angle, Pose,
    RolloutConfig, RolloutStep, WEIGHT_CONTROL, WEIGHT_DISTANCE, WEIGHT_ENDPOINT, WEIGHT_HEADING,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{shallow_parameter_count, Activation, Network, NetworkError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Largest start-pose perturbation: lateral offset and heading offset.
pub const START_JITTER: (f64, f64) = (0.1, 0.1);

/// Nominal start shifted sideways and rotated by amounts drawn from `seed`.
pub fn perturbed_start(cfg: &RolloutConfig, seed: u64) -> Pose {
    let nominal = cfg.nominal_start();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let lateral = rng.random_range(-START_JITTER.0..=START_JITTER.0);
    let turn = rng.random_range(-START_JITTER.1..=START_JITTER.1);
    // left normal of heading h is (-cos h, sin h)
    Pose {
        x: nominal.x - lateral * nominal.heading.cos(),
        y: nominal.y + lateral * nominal.heading.sin(),
        heading: nominal.heading + turn,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub network: Network,
    pub best_cost: f64,
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Lateral and heading offsets `(d, θ_e)` of the straight-line scenarios:
/// the corners of the default initial set, then wider symmetric pairs.
pub const STRAIGHT_STARTS: [(f64, f64); 10] = [
    (0.1, 0.1),
    (-0.1, -0.1),
    (0.1, -0.1),
    (-0.1, 0.1),
    (0.5, 0.0),
    (-0.5, 0.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 0.5),
    (0.0, -0.5),
];

/// Horizon of each straight-line scenario.
pub const STRAIGHT_STEPS: usize = 600;

/// Which rollouts make up the training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// One rollout along the configured polyline.
    #[default]
    Path,
    /// One rollout per entry of [`STRAIGHT_STARTS`] along a straight segment
    /// whose length equals the distance driven, so the endpoint term sees
    /// the final lateral error.
    Straight,
}

/// Straight segment along `+y` starting at the origin, one config per
/// `(d, θ_e)` offset.
pub fn straight_scenarios(offsets: &[(f64, f64)], steps: usize, dt: f64, speed: f64) -> Vec<RolloutConfig> {
    let len = steps as f64 * dt * speed;
    offsets
        .iter()
        .map(|&(d, e)| RolloutConfig {
            waypoints: vec![(0.0, 0.0), (0.0, len)],
            steps,
            dt,
            speed,
            // left of +y is -x; θ_e = path angle - heading
            start: Some(Pose { x: -d, y: 0.0, heading: -e }),
        })
        .collect()
}

/// Rollouts for `objective`. For [`Objective::Path`] a missing start pose is
/// perturbed from the nominal one using `seed`; for [`Objective::Straight`]
/// only `dt` and `speed` of `base` are used.
pub fn scenarios(objective: Objective, base: &RolloutConfig, seed: u64) -> Result<Vec<RolloutConfig>, TrainError> {
    base.validate()?;
    Ok(match objective {
        Objective::Path => vec![RolloutConfig {
            start: Some(base.start.unwrap_or_else(|| perturbed_start(base, seed))),
            ..base.clone()
        }],
        Objective::Straight => straight_scenarios(&STRAIGHT_STARTS, STRAIGHT_STEPS, base.dt, base.speed),
    })
}

/// Trains a `2 → hidden → 1` tanh controller on the single path rollout of
/// [`Objective::Path`].
pub fn train_controller(
    hidden: usize,
    rollout_cfg: &RolloutConfig,
    cmaes_cfg: &CmaesConfig,
) -> Result<TrainResult, TrainError> {
    let cfgs = scenarios(Objective::Path, rollout_cfg, cmaes_cfg.seed)?;
    train_on(hidden, &cfgs, cmaes_cfg)
}

/// Trains a `2 → hidden → 1` tanh controller minimizing the summed cost of
/// `scenarios`, starting CMA-ES from the all-zero parameter vector.
pub fn train_on(hidden: usize, scenarios: &[RolloutConfig], cmaes_cfg: &CmaesConfig) -> Result<TrainResult, TrainError> {
    train_on_with(hidden, scenarios, cmaes_cfg, false)
}

/// Sets the output bias of a single-output tanh network so that `u(0, 0) = 0`,
/// making the path (zero lateral and heading error) an equilibrium.
pub fn pin_origin_equilibrium(net: &mut Network) {
    let Some((out, hidden)) = net.layers.split_last_mut() else { return };
    let mut h = vec![0.0, 0.0];
    for l in hidden.iter() {
        h = l.weights.iter().zip(&l.bias).map(|(w, b)| l.activation.apply(b + dot(w, &h))).collect();
    }
    for (w, b) in out.weights.iter().zip(out.bias.iter_mut()) {
        *b = -dot(w, &h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// [`train_on`], optionally scoring every candidate after
/// [`pin_origin_equilibrium`]. The pinned search keeps the full parameter
/// vector; its output-bias coordinate is simply overwritten.
pub fn train_on_with(
    hidden: usize,
    scenarios: &[RolloutConfig],
    cmaes_cfg: &CmaesConfig,
    pin_equilibrium: bool,
) -> Result<TrainResult, TrainError> {
    if hidden == 0 {
        return Err(TrainError::Config("at least one hidden neuron is required".into()));
    }
    if scenarios.is_empty() {
        return Err(TrainError::Config("no training scenarios".into()));
    }
    for c in scenarios {
        c.validate()?;
    }
    let dim = shallow_parameter_count(2, hidden, 1);
    let build = |p: &[f64]| {
        let mut net = Network::from_flat(2, hidden, 1, Activation::Tanh, p)?;
        if pin_equilibrium {
            pin_origin_equilibrium(&mut net);
        }
        Ok::<_, NetworkError>(net)
    };
    let objective = |p: &[f64]| {
        let Ok(net) = build(p) else {
            return f64::INFINITY;
        };
        scenarios
            .iter()
            .map(|c| rollout_cost(&net, c).unwrap_or(f64::INFINITY))
            .sum()
    };
    let r = cmaes_minimize(objective, &vec![0.0; dim], cmaes_cfg)?;
    Ok(TrainResult {
        network: build(&r.best)?,
        best_cost: r.best_value,
        history: r.history,
        evaluations: r.evaluations,
    })
}
