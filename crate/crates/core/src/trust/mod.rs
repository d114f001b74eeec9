//! Social reputation, reliability values and the malicious-transmission ledger.

mod graph;
mod ledger;
mod reliability;

pub use graph::{compute_srf, KindCoefficients, RelationshipKind, SocialEdge, SocialGraph};
pub use ledger::{record_malicious, NrvMode, TrustLedger};
pub use reliability::{
    classify, compute_nrv, sample_srf, ClassThresholds, ReliabilityClass, TrustProfile,
    MALICIOUS_SRF_MAX,
};

use crate::ids::DeviceId;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrustError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("self edge on {0}")]
    SelfEdge(DeviceId),
    #[error("edge weight {0} outside [0,1]")]
    WeightOutOfRange(f64),
    #[error("srf {0} outside [0,1]")]
    SrfOutOfRange(f64),
    #[error("unknown relationship kind {0:?}")]
    UnknownRelationship(String),
    #[error("class thresholds must satisfy 0 <= medium_lower ({medium_lower}) <= high_lower ({high_lower}) <= 1")]
    BadThresholds { high_lower: f64, medium_lower: f64 },
    #[error("social graph record {record}: {reason}")]
    GraphFormat { record: usize, reason: String },
}
