use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::message::{MessageKind, ProtocolMessage, SidelinkData};
use crate::ids::{DeviceId, NodeId, Tti};

/// Operations whose energy is charged to a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CryptoOp {
    DhExp,
    Encrypt { bits: u64 },
    Decrypt { bits: u64 },
    Sign,
    Verify,
    Tag,
    VerifyTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Timer {
    RachClose,
    JoinClose,
    StartMulticast,
    SendServiceRequest,
    PublicKeyDefer(DeviceId),
    ReceiverTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    Unregistered,
    BadTag,
    Replay,
    NotPaged,
    LateReport,
    NotAssigned,
    OutOfPhase,
    BadPublicKey,
    Unsolicited,
    IdentityMismatch,
    BadRelaySignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlarmOutcome {
    /// Evidence proved tampering by the relay; its counter was raised.
    Confirmed,
    FalseAlarm,
    Unattributable,
    BadSecret,
    Late,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AuditEvent {
    Rejected {
        at: NodeId,
        from: NodeId,
        kind: MessageKind,
        reason: RejectReason,
    },
    /// Ground truth from the adversary model, invisible to the protocol.
    Tampered { relay: DeviceId, receiver: DeviceId },
    Alarm {
        relay: DeviceId,
        receiver: DeviceId,
        outcome: AlarmOutcome,
    },
    MdcIncrement { relay: DeviceId, mdc: u32 },
    KeyUsed {
        device: DeviceId,
        peer: DeviceId,
        fingerprint: String,
    },
    PairingFallback { subgroup: u32 },
    MulticastUnserved { subgroup: u32 },
    PublicKeyTimeout { receiver: DeviceId },
    ReceiverTimeout { receiver: DeviceId },
    MissingPeerKey { relay: DeviceId, receiver: DeviceId },
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DeliveryError {
    #[error("no usable rate towards {0}")]
    Unreachable(NodeId),
}

/// What a protocol entity can ask of the network it lives in. Every
/// interaction between entities goes through here.
pub trait Context {
    fn now(&self) -> Tti;

    /// Control message over the NB-IoT carrier at the device's CQI rate.
    fn send(&mut self, from: NodeId, to: NodeId, msg: ProtocolMessage) -> Result<Tti, DeliveryError>;

    /// HeNB data transmission on downlink subframes; starts once the
    /// downlink is free.
    fn downlink_data(
        &mut self,
        to: &[DeviceId],
        msg: ProtocolMessage,
        rate: f64,
    ) -> Result<Tti, DeliveryError>;

    /// Sidelink transfer on uplink subframes. Completion is signalled back to
    /// the sender through `Device::on_sidelink_sent`.
    fn send_sidelink(
        &mut self,
        from: DeviceId,
        to: DeviceId,
        data: Arc<SidelinkData>,
        cqi: u8,
    ) -> Result<(), DeliveryError>;

    fn set_timer(&mut self, node: NodeId, at: Tti, timer: Timer);

    fn meter(&mut self, device: DeviceId, op: CryptoOp);

    fn audit(&mut self, event: AuditEvent);
}
