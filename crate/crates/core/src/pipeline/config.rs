//! Protocol configuration: one structured document, lossless round trip.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::device::{LhvComponent, LhvDeviceModel, QuantumDeviceModel};
use crate::entropy::{EtaStrategy, SecurityParams};
use crate::error::{Error, Result};
use crate::source::{SvModel, SvStrategy};

fn default_block_size() -> u64 {
    1 << 26
}

fn default_series_chunk() -> u64 {
    1 << 22
}

fn default_grid_steps() -> u64 {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorMode {
    Naive,
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizingMode {
    /// Quantize the observed violation on a grid and size there.
    Adaptive,
    /// Size at a violation level committed before the run.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSection {
    pub n: u64,
    #[serde(default = "default_block_size")]
    pub block_size: u64,
    #[serde(default = "default_series_chunk")]
    pub series_chunk: u64,
    pub mu: f64,
    pub seed: u64,
    /// 0 = library default thread count.
    #[serde(default)]
    pub threads: usize,
    pub extractor: ExtractorMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceConfig {
    IidBias {
        #[serde(default)]
        delta: f64,
    },
    AdaptiveAdversary,
    FileBacked {
        path: PathBuf,
    },
}

impl SourceConfig {
    pub fn build(&self, mu: f64, seed: u64) -> SvModel<f64> {
        let strategy = match self {
            SourceConfig::IidBias { delta } => SvStrategy::IidBias { delta: *delta },
            SourceConfig::AdaptiveAdversary => SvStrategy::AdaptiveAdversary,
            SourceConfig::FileBacked { path } => SvStrategy::FileBacked { path: path.clone() },
        };
        SvModel { mu, strategy, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeviceConfig {
    Quantum {
        visibility: f64,
        /// Measurement angles; symmetric CHSH-optimal defaults when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_a: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_b: Option<[f64; 2]>,
        #[serde(default)]
        flip_a: f64,
        #[serde(default)]
        flip_b: f64,
        /// Visibility shift applied per acquisition block (drift hook).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        visibility_drift_per_block: Option<f64>,
    },
    Lhv {
        components: Vec<LhvComponent<f64>>,
    },
}

impl DeviceConfig {
    pub fn quantum_model(&self, seed: u64) -> Option<QuantumDeviceModel<f64>> {
        match self {
            DeviceConfig::Quantum { visibility, theta_a, theta_b, flip_a, flip_b, .. } => {
                let mut model = QuantumDeviceModel::symmetric(*visibility).with_seed(seed);
                if let Some(t) = theta_a {
                    model.theta_a = *t;
                }
                if let Some(t) = theta_b {
                    model.theta_b = *t;
                }
                model.flip_a = *flip_a;
                model.flip_b = *flip_b;
                Some(model)
            }
            DeviceConfig::Lhv { .. } => None,
        }
    }

    pub fn lhv_model(&self, seed: u64) -> Option<LhvDeviceModel<f64>> {
        match self {
            DeviceConfig::Lhv { components } => Some(LhvDeviceModel {
                components: components.clone(),
                seed,
            }),
            DeviceConfig::Quantum { .. } => None,
        }
    }

    pub fn drift_per_block(&self) -> Option<f64> {
        match self {
            DeviceConfig::Quantum { visibility_drift_per_block, .. } => {
                *visibility_drift_per_block
            }
            DeviceConfig::Lhv { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecuritySection {
    pub epsilon: f64,
    /// Defaults to epsilon/12 so that epsilon - 6*epsilon_s = epsilon/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_s: Option<f64>,
    /// Defaults to epsilon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_ea: Option<f64>,
    pub sizing: SizingMode,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: u64,
    /// Violation cap for adaptive sizing; defaults to the device model's
    /// analytic expectation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_mu_max: Option<f64>,
    /// Violation level for fixed sizing; defaults to `s_mu_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_mu_fixed: Option<f64>,
}

impl SecuritySection {
    pub fn params(&self, mu: f64, n: u64) -> SecurityParams<f64> {
        let mut p = SecurityParams::with_default_smoothing(self.epsilon, mu, n);
        if let Some(es) = self.epsilon_s {
            p.epsilon_s = es;
        }
        if let Some(ea) = self.epsilon_ea {
            p.epsilon_ea = ea;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub write_trials: bool,
    #[serde(default = "default_true")]
    pub write_series: bool,
    #[serde(default = "default_true")]
    pub run_battery: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: ProtocolSection,
    pub source: SourceConfig,
    pub device: DeviceConfig,
    pub security: SecuritySection,
    pub eta: EtaStrategy<f64>,
    pub output: OutputSection,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.protocol.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if self.protocol.block_size == 0 {
            return Err(Error::config("block_size must be at least 1"));
        }
        if self.protocol.series_chunk == 0 {
            return Err(Error::config("series_chunk must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.protocol.mu) {
            return Err(Error::config(format!(
                "mu = {} outside [0, 0.5)",
                self.protocol.mu
            )));
        }
        self.security
            .params(self.protocol.mu, self.protocol.n)
            .validate()?;
        if let Some(model) = self.device.quantum_model(self.protocol.seed) {
            model.validate()?;
        }
        if let Some(model) = self.device.lhv_model(self.protocol.seed) {
            model.validate()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Desk-scale baseline: symmetric quantum device at the given
    /// visibility, unbiased honest source, adaptive sizing.
    pub fn desk_default(n: u64, visibility: f64, mu: f64, seed: u64, dir: PathBuf) -> Self {
        ProtocolConfig {
            protocol: ProtocolSection {
                n,
                block_size: default_block_size(),
                series_chunk: default_series_chunk(),
                mu,
                seed,
                threads: 0,
                extractor: ExtractorMode::Fast,
            },
            source: SourceConfig::IidBias { delta: 0.0 },
            device: DeviceConfig::Quantum {
                visibility,
                theta_a: None,
                theta_b: None,
                flip_a: 0.0,
                flip_b: 0.0,
                visibility_drift_per_block: None,
            },
            security: SecuritySection {
                epsilon: 1e-12,
                epsilon_s: None,
                epsilon_ea: None,
                sizing: SizingMode::Adaptive,
                grid_steps: default_grid_steps(),
                s_mu_max: None,
                s_mu_fixed: None,
            },
            eta: EtaStrategy::Constant { rate: 0.134294 },
            output: OutputSection {
                dir,
                write_trials: true,
                write_series: true,
                run_battery: true,
            },
        }
    }
}
