use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{RadioError, MAX_CQI};
use crate::ids::DeviceId;

pub const NB_IOT_BANDWIDTH_HZ: f64 = 180_000.0;
pub const RB_BANDWIDTH_HZ: f64 = 180_000.0;
pub const SIDELINK_RBS: u32 = 100;

/// Bits/s/Hz for CQI 0..=15 (4-bit table, QPSK to 64QAM).
pub const DEFAULT_SPECTRAL_EFFICIENCY: [f64; 16] = [
    0.0, 0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223,
    3.9023, 4.5234, 5.1152, 5.5547,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralTable(Vec<f64>);

impl Default for SpectralTable {
    fn default() -> Self {
        Self(DEFAULT_SPECTRAL_EFFICIENCY.to_vec())
    }
}

impl SpectralTable {
    pub fn new(values: Vec<f64>) -> Result<Self, RadioError> {
        let t = Self(values);
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RadioError> {
        if self.0.len() != MAX_CQI as usize + 1 {
            return Err(RadioError::Table(format!(
                "spectral_efficiency needs {} entries, got {}",
                MAX_CQI + 1,
                self.0.len()
            )));
        }
        if self.0[0] != 0.0 {
            return Err(RadioError::Table("spectral efficiency of CQI 0 must be 0".into()));
        }
        if self.0.iter().any(|v| !v.is_finite() || *v < 0.0) || self.0.windows(2).any(|w| w[0] > w[1]) {
            return Err(RadioError::Table(
                "spectral_efficiency must be non-negative and non-decreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn efficiency(&self, cqi: u8) -> f64 {
        self.0[usize::from(cqi.min(MAX_CQI))]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Rate of the 180 kHz NB-IoT carrier at one CQI.
    pub fn carrier_rate(&self, cqi: u8) -> f64 {
        NB_IOT_BANDWIDTH_HZ * self.efficiency(cqi)
    }
}

/// Multicast rate pinned to the worst member.
pub fn cms_rate(group_cqis: &[u8], table: &SpectralTable) -> Result<f64, RadioError> {
    let worst = group_cqis.iter().copied().min().ok_or(RadioError::EmptyGroup)?;
    Ok(table.carrier_rate(worst))
}

pub fn d2d_rate(cqi: u8, rbs: u32, table: &SpectralTable) -> Result<f64, RadioError> {
    if rbs > SIDELINK_RBS {
        return Err(RadioError::RbsOutOfRange(rbs));
    }
    Ok(f64::from(rbs) * RB_BANDWIDTH_HZ * table.efficiency(cqi))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePlan {
    pub cms_rate: f64,
    /// Keyed by (relay, receiver).
    pub d2d_rates: BTreeMap<(DeviceId, DeviceId), f64>,
}
