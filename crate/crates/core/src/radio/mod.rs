//! Channel model, link rates and TDD airtime accounting.

mod channel;
mod frame;
mod rates;
mod sidelink;

pub use channel::{
    cqi_from_geometry, ChannelModel, CqiReport, LinkBudget, Position, DEFAULT_CQI_THRESHOLDS_DB,
};
pub use frame::{Direction, FrameConfig, Occupancy, SubframeKind, SUBFRAMES_PER_FRAME};
pub use rates::{
    cms_rate, d2d_rate, RatePlan, SpectralTable, DEFAULT_SPECTRAL_EFFICIENCY, NB_IOT_BANDWIDTH_HZ,
    RB_BANDWIDTH_HZ, SIDELINK_RBS,
};
pub use sidelink::SidelinkScheduler;

use serde::{Deserialize, Serialize};

pub const MAX_CQI: u8 = 15;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("cqi {0} outside 0..=15")]
    CqiOutOfRange(u8),
    #[error("resource blocks {0} outside 0..=100")]
    RbsOutOfRange(u32),
    #[error("multicast group is empty")]
    EmptyGroup,
    #[error("destination unreachable at zero rate")]
    Unreachable,
    #[error("table: {0}")]
    Table(String),
    #[error("frame: {0}")]
    Frame(String),
    #[error("radio parameter: {0}")]
    Param(String),
}

/// Everything the radio layer needs from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub channel: ChannelModel,
    pub downlink: LinkBudget,
    pub sidelink: LinkBudget,
    /// Peers farther apart than this are not reported as sidelink candidates.
    pub d2d_range_m: f64,
    pub spectral_efficiency: SpectralTable,
    pub frame: FrameConfig,
    pub sidelink_rbs: u32,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            channel: ChannelModel::default(),
            downlink: LinkBudget {
                tx_power_dbm: 28.1,
                noise_dbm: -114.4,
            },
            sidelink: LinkBudget {
                tx_power_dbm: 23.0,
                noise_dbm: -114.4,
            },
            d2d_range_m: 500.0,
            spectral_efficiency: SpectralTable::default(),
            frame: FrameConfig::tdd_config3(),
            sidelink_rbs: SIDELINK_RBS,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        self.channel.validate()?;
        self.spectral_efficiency.validate()?;
        for (name, l) in [("downlink", &self.downlink), ("sidelink", &self.sidelink)] {
            if !l.tx_power_dbm.is_finite() || !l.noise_dbm.is_finite() {
                return Err(RadioError::Param(format!("{name} link budget must be finite")));
            }
        }
        if !(self.d2d_range_m >= 0.0) || !self.d2d_range_m.is_finite() {
            return Err(RadioError::Param(format!("d2d_range_m {}", self.d2d_range_m)));
        }
        if self.sidelink_rbs == 0 || self.sidelink_rbs > SIDELINK_RBS {
            return Err(RadioError::RbsOutOfRange(self.sidelink_rbs));
        }
        Ok(())
    }

    pub fn downlink_cqi(&self, at: &Position, shadow_db: f64) -> u8 {
        cqi_from_geometry(&Position::ORIGIN, at, &self.channel, &self.downlink, shadow_db)
    }

    pub fn sidelink_cqi(&self, a: &Position, b: &Position, shadow_db: f64) -> u8 {
        cqi_from_geometry(a, b, &self.channel, &self.sidelink, shadow_db)
    }

    /// NB-IoT carrier rate at `cqi`.
    pub fn carrier_rate(&self, cqi: u8) -> f64 {
        self.spectral_efficiency.carrier_rate(cqi)
    }
}
