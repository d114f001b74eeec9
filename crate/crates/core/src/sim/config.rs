use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::energy::EnergyModel;
use super::sweep::SweepGrid;
use crate::crypto::{CryptoSuite, DhkeParams};
use crate::protocol::{ProtocolParams, Variant};
use crate::radio::RadioParams;
use crate::trust::{ClassThresholds, KindCoefficients};

/// Validation failure, always naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct TrustConfig {
    pub thresholds: ClassThresholds,
    pub coefficients: KindCoefficients,
    /// Optional social graph file; when absent SRFs are sampled.
    pub social_graph: Option<PathBuf>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoConfig {
    pub suite: CryptoSuite,
    pub dhke: DhkeParams,
}

impl Default for CryptoConfig {
    fn default() -> Self {
        Self {
            suite: CryptoSuite::default(),
            dhke: DhkeParams::desk64(),
        }
    }
}

/// Everything a run depends on. Serialized verbatim next to every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub devices: u32,
    pub cell_radius_m: f64,
    /// Inner radius of the device annulus as a fraction of the cell radius.
    pub edge_inner_fraction: f64,
    pub malicious_fraction: f64,
    pub tamper_prob: f64,
    pub file_bits: u64,
    pub variant: Variant,
    pub seed: u64,
    /// DRX cycles in TTIs; each device draws one uniformly.
    pub drx_cycles_tti: Vec<u64>,
    pub trust: TrustConfig,
    pub radio: RadioParams,
    pub protocol: ProtocolParams,
    pub energy: EnergyModel,
    pub crypto: CryptoConfig,
    pub sweep: SweepGrid,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            devices: 1000,
            cell_radius_m: 1000.0,
            edge_inner_fraction: 0.7,
            malicious_fraction: 0.0,
            tamper_prob: 1.0,
            file_bits: 500_000,
            variant: Variant::Std2d,
            seed: 1,
            drx_cycles_tti: vec![1280],
            trust: TrustConfig::default(),
            radio: RadioParams::default(),
            protocol: ProtocolParams::default(),
            energy: EnergyModel::default(),
            crypto: CryptoConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

fn unit_interval(field: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.devices == 0 {
            return Err(ConfigError::new("devices", "must be at least 1"));
        }
        if !(self.cell_radius_m > 0.0 && self.cell_radius_m.is_finite()) {
            return Err(ConfigError::new("cell_radius_m", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.edge_inner_fraction) {
            return Err(ConfigError::new("edge_inner_fraction", "must lie in [0, 1)"));
        }
        unit_interval("malicious_fraction", self.malicious_fraction)?;
        unit_interval("tamper_prob", self.tamper_prob)?;
        if self.drx_cycles_tti.is_empty() || self.drx_cycles_tti.contains(&0) {
            return Err(ConfigError::new("drx_cycles_tti", "needs at least one positive cycle"));
        }
        self.trust
            .thresholds
            .validate()
            .map_err(|e| ConfigError::new("trust.thresholds", e.to_string()))?;
        self.trust
            .coefficients
            .validate()
            .map_err(|e| ConfigError::new("trust.coefficients", e.to_string()))?;
        self.radio.validate().map_err(|e| ConfigError::new("radio", e.to_string()))?;
        self.protocol
            .validate()
            .map_err(|e| ConfigError::new("protocol", e.to_string()))?;
        self.energy.validate().map_err(|e| ConfigError::new("energy", e))?;
        self.sweep.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_string();
            ConfigError::new(field, e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&d[..8])
    }

    pub fn malicious_count(&self) -> u32 {
        (self.malicious_fraction * f64::from(self.devices)).round() as u32
    }
}
