//! TOML configuration shared by all commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cycles::CycleConfig;
use crate::error::{Error, Result};
use crate::phase::{KinematicsConfig, PhaseConfig};
use crate::pose::DEFAULT_S_REF;
use crate::saliency::SaliencyConfig;
use crate::stability::{MatchParams, RELAXED_TH_MATCH};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifyConfig {
    pub th_match: f64,
    /// Ratios above this suggest different athletes.
    pub decision_threshold: f64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            th_match: RELAXED_TH_MATCH,
            decision_threshold: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// IoU threshold for event matching.
    pub tau: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { tau: 0.5 }
    }
}

/// Effective configuration. The top-level `s_ref` and `seed` override the
/// values inside the sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub s_ref: f64,
    pub seed: u64,
    /// Frame rate override for pose files.
    pub fps: Option<f64>,
    pub cycles: CycleConfig,
    pub saliency: SaliencyConfig,
    pub stability: MatchParams,
    pub identify: IdentifyConfig,
    pub phase: PhaseConfig,
    pub kinematics: KinematicsConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            s_ref: DEFAULT_S_REF,
            seed: 0,
            fps: None,
            cycles: CycleConfig::default(),
            saliency: SaliencyConfig::default(),
            stability: MatchParams::default(),
            identify: IdentifyConfig::default(),
            phase: PhaseConfig::default(),
            kinematics: KinematicsConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Pushes the global values into every section.
    pub fn propagate(&mut self) {
        self.cycles.s_ref = self.s_ref;
        self.saliency.s_ref = self.s_ref;
        self.stability.dist.s_ref = self.s_ref;
        self.phase.s_ref = self.s_ref;
        self.phase.seed = self.seed;
    }
}
