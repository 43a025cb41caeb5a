//! Discrete-time pose rollout of a path-following controller and its cost.
//!
//! Heading `θ` is measured clockwise from the `+y` axis:
//! `ẋ = V sin θ`, `ẏ = V cos θ`, `θ̇ = u`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::network::Network;

pub const WEIGHT_DISTANCE: f64 = 100.0;
pub const WEIGHT_HEADING: f64 = 1e5;
pub const WEIGHT_CONTROL: f64 = 100.0;
pub const WEIGHT_ENDPOINT: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub waypoints: Vec<(f64, f64)>,
    pub steps: usize,
    pub dt: f64,
    pub speed: f64,
    /// Initial pose; defaults to the first waypoint facing along the first segment.
    pub start: Option<Pose>,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        let waypoints = vec![(0.0, 0.0), (2.0, 2.0), (4.0, 2.5), (6.0, 4.0)];
        let (dt, speed) = (0.05, 1.0);
        let steps = (path_length(&waypoints) / (speed * dt)).round() as usize;
        RolloutConfig {
            waypoints,
            steps,
            dt,
            speed,
            start: None,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.waypoints.len() < 2 {
            return Err(TrainError::Config("path needs at least 2 waypoints".into()));
        }
        if self.steps == 0 || !(self.dt > 0.0) || !(self.speed > 0.0) {
            return Err(TrainError::Config("steps, dt and speed must be positive".into()));
        }
        if self.waypoints.windows(2).any(|s| s[0] == s[1]) {
            return Err(TrainError::Config("repeated waypoint".into()));
        }
        Ok(())
    }

    pub fn nominal_start(&self) -> Pose {
        let (a, b) = (self.waypoints[0], self.waypoints[1]);
        Pose {
            x: a.0,
            y: a.1,
            heading: segment_angle(a, b),
        }
    }

    pub fn start_pose(&self) -> Pose {
        self.start.unwrap_or_else(|| self.nominal_start())
    }
}

pub fn path_length(waypoints: &[(f64, f64)]) -> f64 {
    waypoints
        .windows(2)
        .map(|s| (s[1].0 - s[0].0).hypot(s[1].1 - s[0].1))
        .sum()
}

/// Heading of the direction `a → b`, clockwise from `+y`.
pub fn segment_angle(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.0).atan2(b.1 - a.1)
}

/// Wraps to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed distance and heading error of `pose` relative to the nearest
/// segment of the polyline. Ties go to the lower segment index. The sign is
/// positive to the left of the path direction.
pub fn path_errors(waypoints: &[(f64, f64)], pose: &Pose) -> (f64, f64) {
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in waypoints.windows(2).enumerate() {
        let (a, b) = (s[0], s[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let t = (((pose.x - a.0) * dx + (pose.y - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let dist = (pose.x - (a.0 + t * dx)).hypot(pose.y - (a.1 + t * dy));
        if best.is_none_or(|(bd, _)| dist < bd) {
            best = Some((dist, i));
        }
    }
    let (dist, i) = best.expect("at least one segment");
    let (a, b) = (waypoints[i], waypoints[i + 1]);
    let p = segment_angle(a, b);
    let side = -(pose.x - a.0) * p.cos() + (pose.y - a.1) * p.sin();
    let d = if side < 0.0 { -dist } else { dist };
    (d, wrap_angle(p - pose.heading))
}

/// Per-step record of a rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub pose: Pose,
    pub distance_error: f64,
    pub heading_error: f64,
    pub control: f64,
}

/// Forward-Euler rollout of `steps` steps; `steps + 1` records.
pub fn rollout(net: &Network, cfg: &RolloutConfig) -> Result<Vec<RolloutStep>, TrainError> {
    cfg.validate()?;
    let mut pose = cfg.start_pose();
    let mut out = Vec::with_capacity(cfg.steps + 1);
    for k in 0..=cfg.steps {
        let (d, e) = path_errors(&cfg.waypoints, &pose);
        let u = net.forward(&[d, e])?[0];
        out.push(RolloutStep {
            pose,
            distance_error: d,
            heading_error: e,
            control: u,
        });
        if k < cfg.steps {
            pose = Pose {
                x: pose.x + cfg.dt * cfg.speed * pose.heading.sin(),
                y: pose.y + cfg.dt * cfg.speed * pose.heading.cos(),
                heading: pose.heading + cfg.dt * u,
            };
        }
    }
    Ok(out)
}

/// Quadratic tracking cost of a recorded rollout.
pub fn trace_cost(steps: &[RolloutStep], end: (f64, f64)) -> f64 {
    let running: f64 = steps
        .iter()
        .map(|s| {
            WEIGHT_DISTANCE * s.distance_error.powi(2)
                + WEIGHT_HEADING * s.heading_error.powi(2)
                + WEIGHT_CONTROL * s.control.powi(2)
        })
        .sum();
    let last = steps.last().map_or(Pose { x: 0.0, y: 0.0, heading: 0.0 }, |s| s.pose);
    running + WEIGHT_ENDPOINT * ((end.0 - last.x).powi(2) + (end.1 - last.y).powi(2))
}

/// Cost of a single rollout with `net`.
pub fn rollout_cost(net: &Network, cfg: &RolloutConfig) -> Result<f64, TrainError> {
    let steps = rollout(net, cfg)?;
    Ok(trace_cost(&steps, *cfg.waypoints.last().expect("validated")))
}
