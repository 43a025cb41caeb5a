//! Plant models and closed-loop composition `ẋ = f_p(x, h(g(x)))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::symexpr::{EvalError, Expr};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Autonomous vector field over `arity` state variables.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub arity: usize,
    pub components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Result<Self, PlantError> {
        let arity = components.len();
        if let Some((i, c)) = components.iter().enumerate().find(|(_, c)| c.arity() > arity) {
            return Err(PlantError::Arity(format!(
                "component {i} uses variable {} in a {arity}-dimensional field",
                c.arity() - 1
            )));
        }
        Ok(VectorField { arity, components })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }
}

/// Constant-speed Dubins vehicle following a straight path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DubinsParams {
    /// Forward speed `V`, must be positive.
    pub speed: f64,
    /// Path orientation `P`, radians clockwise from the +y axis.
    pub path_angle: f64,
}

impl Default for DubinsParams {
    fn default() -> Self {
        DubinsParams {
            speed: 1.0,
            path_angle: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Error dynamics in the variables `(d_err, θ_e, u)`:
///
/// ```text
/// ḋ_err = -V sin(P - θ_e) cos P + V cos(P - θ_e) sin P
/// θ̇_e   = -u
/// ```
///
/// Built term by term without trigonometric simplification.
pub fn dubins_error_field(p: DubinsParams) -> Vec<Expr> {
    let v = Expr::constant(p.speed);
    let path = Expr::constant(p.path_angle);
    let theta_e = Expr::var(1);
    let u = Expr::var(2);
    let heading = path.clone() - theta_e;
    let d_dot = -(v.clone() * heading.sin()) * path.cos() + v * heading.cos() * path.sin();
    vec![d_dot, -u]
}

/// Signed distance from `(x, y)` to the straight path through the origin
/// with orientation `path_angle`; positive on the left of the path.
pub fn distance_error(x: f64, y: f64, path_angle: f64) -> f64 {
    let a = std::f64::consts::FRAC_PI_2 - path_angle;
    -x * a.sin() + y * a.cos()
}

/// Substitutes the controller into the plant.
///
/// `plant_f` is over `(x_0..x_{n-1}, u_0..u_{m-1})`, `output_g` maps the state
/// to the controller inputs, and the controller outputs are optionally
/// scaled by `gain` before reaching the plant.
pub fn close_loop_with_gain(
    plant_f: &[Expr],
    output_g: &[Expr],
    controller: &Network,
    gain: f64,
) -> Result<VectorField, PlantError> {
    let n = plant_f.len();
    if output_g.len() != controller.input_dim() {
        return Err(PlantError::Arity(format!(
            "output map has {} components, controller takes {}",
            output_g.len(),
            controller.input_dim()
        )));
    }
    if let Some(g) = output_g.iter().find(|g| g.arity() > n) {
        return Err(PlantError::Arity(format!(
            "output map uses variable {} of a {n}-state plant",
            g.arity() - 1
        )));
    }
    let m = controller.output_dim();
    if let Some(f) = plant_f.iter().find(|f| f.arity() > n + m) {
        return Err(PlantError::Arity(format!(
            "plant uses variable {} but only {} states + inputs exist",
            f.arity() - 1,
            n + m
        )));
    }
    let u = controller.to_expr_with(output_g);
    let mut subst: Vec<Expr> = (0..n).map(Expr::var).collect();
    subst.extend(u.into_iter().map(|ui| Expr::constant(gain) * ui));
    VectorField::new(plant_f.iter().map(|f| f.substitute(&subst)).collect())
}

pub fn close_loop(
    plant_f: &[Expr],
    output_g: &[Expr],
    controller: &Network,
) -> Result<VectorField, PlantError> {
    close_loop_with_gain(plant_f, output_g, controller, 1.0)
}

/// Identity output map over `n` states.
pub fn identity_output(n: usize) -> Vec<Expr> {
    (0..n).map(Expr::var).collect()
}

/// Affine output map `g(x) = M x + c`.
pub fn affine_output(matrix: &[Vec<f64>], offset: &[f64]) -> Vec<Expr> {
    matrix
        .iter()
        .zip(offset)
        .map(|(row, &c)| {
            let lin = row
                .iter()
                .enumerate()
                .fold(Expr::zero(), |acc, (j, &w)| acc + Expr::constant(w) * Expr::var(j));
            lin + Expr::constant(c)
        })
        .collect()
}

/// Closed-loop Dubins error dynamics with the given controller.
pub fn dubins_closed_loop(p: DubinsParams, controller: &Network) -> Result<VectorField, PlantError> {
    close_loop(&dubins_error_field(p), &identity_output(2), controller)
}
