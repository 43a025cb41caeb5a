//! `system.json`: plant parameters, safety spec, verifier settings and the
//! controller file, all optional.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use barricade::certify::{CertifyConfig, SafetySpec};
use barricade::network::Network;
use barricade::plant::{dubins_closed_loop, DubinsParams, VectorField};
use barricade::train::{CmaesConfig, Objective, RolloutConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Controller file, relative to the directory holding the config.
    pub controller: Option<PathBuf>,
    pub plant: DubinsParams,
    pub spec: SafetySpec,
    pub certify: CertifyConfig,
}

/// A loaded system: config plus the controller it names.
pub struct System {
    pub config: SystemConfig,
    pub network: Network,
    pub controller_path: PathBuf,
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

impl System {
    /// Loads `system` (defaults when `None`) and the controller, preferring
    /// `nn_override` over the config's `controller` entry.
    pub fn load(system: Option<&Path>, nn_override: Option<&Path>) -> Result<Self> {
        let config = match system {
            Some(p) => SystemConfig::load(p)?,
            None => SystemConfig::default(),
        };
        let controller_path = match (nn_override, &config.controller) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(rel)) => system
                .and_then(Path::parent)
                .map_or_else(|| rel.clone(), |dir| dir.join(rel)),
            (None, None) => bail!("no controller given: pass --nn or set \"controller\" in the system file"),
        };
        let network = Network::load(&controller_path)
            .with_context(|| format!("loading controller {}", controller_path.display()))?;
        if network.input_dim() != config.spec.arity() || network.output_dim() != 1 {
            bail!(
                "controller maps {} inputs to {} outputs; the plant needs {} → 1",
                network.input_dim(),
                network.output_dim(),
                config.spec.arity()
            );
        }
        Ok(System {
            config,
            network,
            controller_path,
        })
    }

    pub fn field(&self) -> Result<VectorField> {
        Ok(dubins_closed_loop(self.config.plant, &self.network)?)
    }
}

/// Optional JSON for `train`; flags override its fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub rollout: RolloutConfig,
    pub cmaes: CmaesConfig,
    /// Force `u(0, 0) = 0` on every candidate so the path is an equilibrium.
    pub pin_equilibrium: bool,
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
