use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::message::MessageKind;
use crate::ids::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Procedure {
    Subscription,
    Initialization,
    Joining,
    DataTransfer,
    SessionStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubProcedure {
    Paging,
    RandomAccess,
    PairSelection,
    ServiceRequest,
    PairAnnouncement,
    Multicast,
    Sd2dCommunication,
    Report,
    PublicKeyExchange,
    AlarmBeacon,
}

impl SubProcedure {
    pub fn procedure(self) -> Procedure {
        match self {
            SubProcedure::Paging
            | SubProcedure::RandomAccess
            | SubProcedure::PairSelection
            | SubProcedure::ServiceRequest
            | SubProcedure::PairAnnouncement => Procedure::Joining,
            _ => Procedure::DataTransfer,
        }
    }

    /// Position in the per-device ordering. Report and key exchange involve
    /// different devices of a pair and may interleave, so they sit apart.
    pub fn rank(self) -> u8 {
        self as u8
    }
}

/// Session phase: a procedure plus, inside Joining and DataTransfer, the
/// furthest sub-procedure reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPhase {
    pub procedure: Procedure,
    pub sub: Option<SubProcedure>,
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sub {
            Some(s) => write!(f, "{:?}/{:?}", self.procedure, s),
            None => write!(f, "{:?}", self.procedure),
        }
    }
}

pub fn sub_procedure_of(kind: MessageKind) -> SubProcedure {
    match kind {
        MessageKind::Page => SubProcedure::Paging,
        MessageKind::RachReport => SubProcedure::RandomAccess,
        MessageKind::ServiceRequest => SubProcedure::ServiceRequest,
        MessageKind::PairAnnouncement => SubProcedure::PairAnnouncement,
        MessageKind::MulticastData => SubProcedure::Multicast,
        MessageKind::SidelinkData => SubProcedure::Sd2dCommunication,
        MessageKind::RelayReport => SubProcedure::Report,
        MessageKind::PublicKeyRequest | MessageKind::PublicKeyResponse => {
            SubProcedure::PublicKeyExchange
        }
        MessageKind::AlarmBeacon => SubProcedure::AlarmBeacon,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseViolation {
    pub kind: MessageKind,
    pub device: Option<DeviceId>,
    pub expected: Procedure,
    pub found: SubProcedure,
}

/// Enforces procedure order at session level and sub-procedure order per
/// device.
#[derive(Debug, Clone)]
pub struct PhaseTracker {
    procedure: Procedure,
    sub: Option<SubProcedure>,
    per_device: BTreeMap<DeviceId, SubProcedure>,
    violations: Vec<PhaseViolation>,
    joins: u32,
}

impl Default for PhaseTracker {
    fn default() -> Self {
        Self {
            procedure: Procedure::Subscription,
            sub: None,
            per_device: BTreeMap::new(),
            violations: Vec::new(),
            joins: 0,
        }
    }
}

impl PhaseTracker {
    pub fn phase(&self) -> SessionPhase {
        SessionPhase {
            procedure: self.procedure,
            sub: self.sub,
        }
    }

    /// Moves to `next`. Joining may re-open after DataTransfer (next
    /// subgroup); any other backward move is refused.
    pub fn enter(&mut self, next: Procedure) -> bool {
        let ok = next >= self.procedure
            || (next == Procedure::Joining && self.procedure == Procedure::DataTransfer);
        if ok {
            if next == Procedure::Joining {
                self.joins += 1;
            }
            self.procedure = next;
            self.sub = None;
        }
        ok
    }

    pub fn subgroups_opened(&self) -> u32 {
        self.joins
    }

    pub fn mark(&mut self, sub: SubProcedure) {
        if sub.procedure() == self.procedure && self.sub.is_none_or(|s| sub > s) {
            self.sub = Some(sub);
        }
    }

    /// Checks one message against the current procedure and the device's own
    /// progress; records and returns false on a violation.
    pub fn admit(&mut self, kind: MessageKind, device: Option<DeviceId>) -> bool {
        let sub = sub_procedure_of(kind);
        let mut ok = sub.procedure() == self.procedure;
        if let Some(d) = device {
            if let Some(prev) = self.per_device.get(&d) {
                ok &= sub.rank() >= prev.rank();
            }
            if ok {
                self.per_device.insert(d, sub);
            }
        }
        if ok {
            self.mark(sub);
        } else {
            self.violations.push(PhaseViolation {
                kind,
                device,
                expected: self.procedure,
                found: sub,
            });
        }
        ok
    }

    pub fn violations(&self) -> &[PhaseViolation] {
        &self.violations
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedures_advance_in_order() {
        let mut p = PhaseTracker::default();
        assert!(p.enter(Procedure::Initialization));
        assert!(!p.enter(Procedure::Subscription));
        assert!(p.enter(Procedure::Joining));
        assert!(p.admit(MessageKind::RachReport, Some(DeviceId(1))));
        assert!(!p.admit(MessageKind::RelayReport, Some(DeviceId(1))));
        assert!(p.enter(Procedure::DataTransfer));
        assert!(!p.admit(MessageKind::ServiceRequest, Some(DeviceId(2))));
        assert!(p.admit(MessageKind::PublicKeyRequest, Some(DeviceId(1))));
        assert!(!p.admit(MessageKind::SidelinkData, Some(DeviceId(1))));
        assert!(p.enter(Procedure::Joining));
        assert_eq!(p.subgroups_opened(), 2);
        assert_eq!(p.violations().len(), 3);
    }

    #[test]
    fn sub_procedures_map_to_their_procedure() {
        for k in MessageKind::ALL {
            let s = sub_procedure_of(k);
            let joining = matches!(
                k,
                MessageKind::Page
                    | MessageKind::RachReport
                    | MessageKind::ServiceRequest
                    | MessageKind::PairAnnouncement
            );
            assert_eq!(s.procedure() == Procedure::Joining, joining);
        }
    }
}
