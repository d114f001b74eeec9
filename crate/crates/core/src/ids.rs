use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Identifier of a subscriber device inside one femtocell scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dev{}", self.0)
    }
}

impl FromStr for DeviceId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("dev").unwrap_or(s);
        digits.trim().parse().map(DeviceId)
    }
}

/// Radio-visible endpoints. Core-network nodes never appear on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Henb,
    Device(DeviceId),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Henb => f.write_str("henb"),
            NodeId::Device(d) => d.fmt(f),
        }
    }
}

impl From<DeviceId> for NodeId {
    fn from(d: DeviceId) -> Self {
        NodeId::Device(d)
    }
}

/// Simulation time in 1 ms transmission time intervals.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Tti(pub u64);

impl Tti {
    pub const ZERO: Tti = Tti(0);

    pub fn plus(self, ttis: u64) -> Tti {
        Tti(self.0 + ttis)
    }

    /// First frame boundary at or after `self`.
    pub fn next_frame_boundary(self) -> Tti {
        Tti(self.0.div_ceil(10) * 10)
    }
}

impl fmt::Display for Tti {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
