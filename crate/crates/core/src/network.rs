//! Feedforward neural-network controllers.
//!
//! Each layer computes `act(W · v + b)`. The numeric forward pass and the
//! symbolic lowering in [`Network::to_expr`] perform the same primitive
//! operations in the same order, so the two agree exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::symexpr::Expr;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("input has {got} entries, network expects {expected}")]
    InputArity { expected: usize, got: usize },
    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },
    #[error("network has no layers")]
    Empty,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed network file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Hyperbolic tangent (a.k.a. tansig).
    #[serde(alias = "tansig")]
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Identity => v,
        }
    }

    pub fn apply_expr(self, e: &Expr) -> Expr {
        match self {
            Activation::Tanh => e.tanh(),
            Activation::Sigmoid => e.sigmoid(),
            Activation::Identity => e.clone(),
        }
    }

    /// Upper bound on |act'(v)|.
    pub fn slope_bound(self) -> f64 {
        match self {
            Activation::Tanh | Activation::Identity => 1.0,
            Activation::Sigmoid => 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `d_out × d_in`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    /// Validates the dimension chain: every row of layer `l` must have as
    /// many columns as layer `l-1` has outputs.
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetworkError> {
        let net = Network { layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.layers.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut prev = self.layers[0].inputs();
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.bias.len() {
                return Err(NetworkError::Shape {
                    layer: i,
                    message: format!("{} weight rows but {} biases", l.weights.len(), l.bias.len()),
                });
            }
            if l.weights.is_empty() {
                return Err(NetworkError::Shape {
                    layer: i,
                    message: "no neurons".into(),
                });
            }
            for (r, row) in l.weights.iter().enumerate() {
                if row.len() != prev {
                    return Err(NetworkError::Shape {
                        layer: i,
                        message: format!("row {r} has {} columns, expected {prev}", row.len()),
                    });
                }
            }
            if l.weights.iter().flatten().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(NetworkError::Shape {
                    layer: i,
                    message: "non-finite parameter".into(),
                });
            }
            prev = l.outputs();
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.outputs() * l.inputs() + l.outputs())
            .sum()
    }

    /// Single-hidden-layer shape used for path following: `inputs → hidden → outputs`,
    /// with parameters laid out layer by layer, weights row-major then biases.
    pub fn from_flat(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        activation: Activation,
        params: &[f64],
    ) -> Result<Self, NetworkError> {
        let need = shallow_parameter_count(inputs, hidden, outputs);
        if params.len() != need {
            return Err(NetworkError::Shape {
                layer: 0,
                message: format!("{} parameters supplied, shape needs {need}", params.len()),
            });
        }
        let mut it = params.iter().copied();
        let mut take_layer = |d_in: usize, d_out: usize| Layer {
            weights: (0..d_out)
                .map(|_| it.by_ref().take(d_in).collect())
                .collect(),
            bias: it.by_ref().take(d_out).collect(),
            activation,
        };
        let l1 = take_layer(inputs, hidden);
        let l2 = take_layer(hidden, outputs);
        Network::new(vec![l1, l2])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().flatten().chain(&l.bias).copied())
            .collect()
    }

    /// Network whose every weight and bias is zero.
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize, activation: Activation) -> Self {
        let n = shallow_parameter_count(inputs, hidden, outputs);
        Network::from_flat(inputs, hidden, outputs, activation, &vec![0.0; n])
            .expect("consistent shape")
    }

    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if y.len() != self.input_dim() {
            return Err(NetworkError::InputArity {
                expected: self.input_dim(),
                got: y.len(),
            });
        }
        let mut v = y.to_vec();
        for l in &self.layers {
            v = l
                .weights
                .iter()
                .zip(&l.bias)
                .map(|(row, &b)| {
                    let mut acc = 0.0;
                    for (k, (&w, &x)) in row.iter().zip(&v).enumerate() {
                        acc = if k == 0 { w * x } else { acc + w * x };
                    }
                    l.activation.apply(acc + b)
                })
                .collect();
        }
        Ok(v)
    }

    /// Symbolic form over input variables `0..input_dim`.
    pub fn to_expr(&self) -> Vec<Expr> {
        let inputs: Vec<Expr> = (0..self.input_dim()).map(Expr::var).collect();
        self.to_expr_with(&inputs)
    }

    /// Symbolic form applied to arbitrary input expressions.
    pub fn to_expr_with(&self, inputs: &[Expr]) -> Vec<Expr> {
        let mut v = inputs.to_vec();
        for l in &self.layers {
            v = l
                .weights
                .iter()
                .zip(&l.bias)
                .map(|(row, &b)| {
                    let mut acc: Option<Expr> = None;
                    for (&w, x) in row.iter().zip(&v) {
                        let term = Expr::constant(w) * x.clone();
                        acc = Some(match acc {
                            None => term,
                            Some(a) => a + term,
                        });
                    }
                    let pre = acc.unwrap_or_else(Expr::zero) + Expr::constant(b);
                    l.activation.apply_expr(&pre)
                })
                .collect();
        }
        v
    }

    /// Global Lipschitz bound (Euclidean norms) from Frobenius norms of the
    /// weight matrices times activation slope bounds.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                let fro = l.weights.iter().flatten().map(|w| w * w).sum::<f64>().sqrt();
                fro * l.activation.slope_bound()
            })
            .product()
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("network serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, NetworkError> {
        let net: Network = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        Network::from_json(&fs::read_to_string(path)?)
    }
}

/// Parameter count of `inputs → hidden → outputs` with biases on every neuron.
/// For the 2-input, 1-output path-following controller this is `4·hidden + 1`.
pub fn shallow_parameter_count(inputs: usize, hidden: usize, outputs: usize) -> usize {
    hidden * inputs + hidden + outputs * hidden + outputs
}
