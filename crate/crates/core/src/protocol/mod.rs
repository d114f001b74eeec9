//! Session state machines for secure multicast with relayed delivery to
//! cell-edge devices.

mod context;
mod core_net;
mod device;
mod henb;
mod message;
mod phase;
mod selection;
pub mod trace;

pub use context::{AlarmOutcome, AuditEvent, Context, CryptoOp, DeliveryError, RejectReason, Timer};
pub use core_net::{page, CoreNetwork, Subgroup, Subscription};
pub use device::{Device, DeviceSetup, Role};
pub use henb::{Henb, HenbSetup};
pub use message::{
    Auth, MessageKind, MessageSizes, ProtocolMessage, SidelinkData, SignedPayload, WireBits,
};
pub use phase::{sub_procedure_of, PhaseTracker, PhaseViolation, Procedure, SessionPhase, SubProcedure};
pub use selection::{select_d2d_pairs, PairAssignment, SelectionParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::DeviceId;
use crate::trust::NrvMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Cms,
    Unicast,
    D2d,
    Sd2d,
    Std2d,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Cms,
        Variant::Unicast,
        Variant::D2d,
        Variant::Sd2d,
        Variant::Std2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cms => "cms",
            Variant::Unicast => "unicast",
            Variant::D2d => "d2d",
            Variant::Sd2d => "sd2d",
            Variant::Std2d => "std2d",
        }
    }

    pub fn uses_sidelink(self) -> bool {
        matches!(self, Variant::D2d | Variant::Sd2d | Variant::Std2d)
    }

    pub fn is_secure(self) -> bool {
        matches!(self, Variant::Sd2d | Variant::Std2d)
    }

    pub fn nrv_mode(self) -> NrvMode {
        match self {
            Variant::Std2d => NrvMode::Social,
            _ => NrvMode::CounterOnly,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| ProtocolError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub selection: SelectionParams,
    /// Alarm window after a public key response, in TTIs.
    pub delta_t: u64,
    /// Random-access window after paging, in TTIs.
    pub rach_window: u64,
    /// Time after the random-access window for service requests, in TTIs.
    pub join_window: u64,
    pub session_start: u64,
    pub message_sizes: MessageSizes,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            selection: SelectionParams::default(),
            delta_t: 100,
            rach_window: 400,
            join_window: 200,
            session_start: 1,
            message_sizes: MessageSizes::default(),
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let sel = &self.selection;
        if sel.serve_direct_cqi > 15 || sel.cqi_threshold > 15 {
            return Err(ProtocolError::Param("cqi thresholds must be within 0..=15".into()));
        }
        if sel.r_max == 0 {
            return Err(ProtocolError::Param("r_max must be at least 1".into()));
        }
        for (name, v) in [
            ("delta_t", self.delta_t),
            ("rach_window", self.rach_window),
            ("join_window", self.join_window),
        ] {
            if v == 0 {
                return Err(ProtocolError::Param(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// How a device ended the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeliveryStatus {
    Pending,
    /// Payload accepted; `relayed` when it came over the sidelink.
    Accepted { relayed: bool },
    /// Verification failed and an alarm was raised.
    Alarmed,
    /// Sidelink packet discarded before key exchange.
    Dropped,
    Unserved,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("device {0} is not registered")]
    Unregistered(DeviceId),
    #[error("no active subscription")]
    NoSubscription,
    #[error("device {0} has no DRX cycle")]
    NoDrxCycle(DeviceId),
    #[error("payload of {0} bytes is too short to carry a signature")]
    MalformedPayload(usize),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("protocol parameter: {0}")]
    Param(String),
}
