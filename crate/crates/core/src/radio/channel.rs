use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{RadioError, MAX_CQI};
use crate::ids::{DeviceId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self {
            x: radius * angle.cos(),
            y: radius * angle.sin(),
        }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn radius(&self) -> f64 {
        self.distance(&Position::ORIGIN)
    }
}

/// Standard 4-bit CQI SNR switching points (dB) for CQI 1..=15.
pub const DEFAULT_CQI_THRESHOLDS_DB: [f64; 15] = [
    -6.7, -4.7, -2.3, 0.2, 2.4, 4.3, 5.9, 8.1, 10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7,
];

/// Log-distance path loss with optional lognormal shadowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    /// Path loss at the 1 m reference distance.
    pub pl0_db: f64,
    pub exponent: f64,
    pub shadowing_sigma_db: f64,
    /// SNR switching points for CQI 1..=15, ascending.
    pub cqi_thresholds_db: Vec<f64>,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            pl0_db: 40.0,
            exponent: 3.5,
            shadowing_sigma_db: 0.0,
            cqi_thresholds_db: DEFAULT_CQI_THRESHOLDS_DB.to_vec(),
        }
    }
}

/// Transmit power and receiver noise floor of one link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), RadioError> {
        if self.cqi_thresholds_db.len() != MAX_CQI as usize {
            return Err(RadioError::Table(format!(
                "cqi_thresholds_db needs {} entries, got {}",
                MAX_CQI,
                self.cqi_thresholds_db.len()
            )));
        }
        if self.cqi_thresholds_db.iter().any(|t| !t.is_finite())
            || self.cqi_thresholds_db.windows(2).any(|w| w[0] > w[1])
        {
            return Err(RadioError::Table(
                "cqi_thresholds_db must be finite and ascending".into(),
            ));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(RadioError::Param(format!("path loss exponent {}", self.exponent)));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(RadioError::Param(format!(
                "shadowing sigma {}",
                self.shadowing_sigma_db
            )));
        }
        if !self.pl0_db.is_finite() {
            return Err(RadioError::Param("pl0_db".into()));
        }
        Ok(())
    }

    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        self.pl0_db + 10.0 * self.exponent * d.log10()
    }

    pub fn snr_db(&self, distance_m: f64, link: &LinkBudget, shadow_db: f64) -> f64 {
        link.tx_power_dbm - self.path_loss_db(distance_m) - shadow_db - link.noise_dbm
    }

    pub fn cqi_from_snr(&self, snr_db: f64) -> u8 {
        self.cqi_thresholds_db.iter().take_while(|&&t| snr_db >= t).count() as u8
    }

    /// Per-link shadowing term, symmetric in the endpoints and fixed by seed.
    pub fn shadowing_db(&self, seed: u64, a: NodeId, b: NodeId) -> f64 {
        if self.shadowing_sigma_db == 0.0 {
            return 0.0;
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let key = |n: NodeId| match n {
            NodeId::Henb => 0u64,
            NodeId::Device(d) => u64::from(d.0) + 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ key(lo).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ key(hi).rotate_left(32),
        );
        Normal::new(0.0, self.shadowing_sigma_db)
            .expect("sigma validated")
            .sample(&mut rng)
    }
}

/// CQI of a link between two positions. Coincident points are treated as
/// 1 m apart.
pub fn cqi_from_geometry(
    tx: &Position,
    rx: &Position,
    model: &ChannelModel,
    link: &LinkBudget,
    shadow_db: f64,
) -> u8 {
    model.cqi_from_snr(model.snr_db(tx.distance(rx), link, shadow_db))
}

/// Channel state a device reports during random access.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqiReport {
    pub device: DeviceId,
    pub downlink_cqi: u8,
    pub d2d_cqi: BTreeMap<DeviceId, u8>,
}

impl CqiReport {
    pub fn new(device: DeviceId, downlink_cqi: u8) -> Result<Self, RadioError> {
        if downlink_cqi > MAX_CQI {
            return Err(RadioError::CqiOutOfRange(downlink_cqi));
        }
        Ok(Self {
            device,
            downlink_cqi,
            d2d_cqi: BTreeMap::new(),
        })
    }

    pub fn with_peer(mut self, peer: DeviceId, cqi: u8) -> Result<Self, RadioError> {
        if cqi > MAX_CQI {
            return Err(RadioError::CqiOutOfRange(cqi));
        }
        self.d2d_cqi.insert(peer, cqi);
        Ok(self)
    }

    pub fn sidelink_cqi(&self, peer: DeviceId) -> u8 {
        self.d2d_cqi.get(&peer).copied().unwrap_or(0)
    }
}
