use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::crypto::{
    digest, AuthTag, MessageDigest, Signature, SignerId, CIPHERTEXT_OVERHEAD, SIGNATURE_LEN,
    TAG_LEN,
};
use crate::ids::DeviceId;

/// Service data as it leaves the gateway, with its digest computed at most once.
pub struct SignedPayload {
    data: Vec<u8>,
    signature: Option<Signature>,
    digest: OnceLock<MessageDigest>,
}

impl SignedPayload {
    pub fn new(data: Vec<u8>, signature: Option<Signature>) -> Self {
        Self {
            data,
            signature,
            digest: OnceLock::new(),
        }
    }

    /// Attaches a signature, keeping an already computed digest.
    pub fn with_digest(unsigned: SignedPayload, signature: Signature) -> Self {
        Self {
            signature: Some(signature),
            ..unsigned
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn signature(&self) -> Option<&Signature> {
        self.signature.as_ref()
    }

    pub fn bits(&self) -> u64 {
        self.data.len() as u64 * 8
    }

    pub fn digest(&self) -> &MessageDigest {
        self.digest.get_or_init(|| digest(&self.data))
    }

    /// `data || signature`, or just `data` when unsigned.
    pub fn to_plaintext(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + SIGNATURE_LEN);
        out.extend_from_slice(&self.data);
        if let Some(sig) = &self.signature {
            out.extend_from_slice(&sig.bytes);
        }
        out
    }

    /// Inverse of [`to_plaintext`](Self::to_plaintext) for a signed payload.
    pub fn from_signed_plaintext(mut bytes: Vec<u8>) -> Result<Self, ProtocolError> {
        if bytes.len() < SIGNATURE_LEN {
            return Err(ProtocolError::MalformedPayload(bytes.len()));
        }
        let split = bytes.len() - SIGNATURE_LEN;
        let mut sig = [0u8; SIGNATURE_LEN];
        sig.copy_from_slice(&bytes[split..]);
        bytes.truncate(split);
        Ok(Self::new(
            bytes,
            Some(Signature {
                signer: SignerId::Gateway,
                bytes: sig,
            }),
        ))
    }
}

impl fmt::Debug for SignedPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignedPayload")
            .field("bytes", &self.data.len())
            .field("signature", &self.signature)
            .finish()
    }
}

/// What a relay puts on the sidelink.
pub struct SidelinkData {
    /// Ciphertext in secure modes, plaintext otherwise.
    pub body: Vec<u8>,
    pub relay_id: DeviceId,
    pub relay_signature: Option<Signature>,
    digest: OnceLock<MessageDigest>,
}

impl SidelinkData {
    pub fn new(body: Vec<u8>, relay_id: DeviceId, relay_signature: Option<Signature>) -> Self {
        Self {
            body,
            relay_id,
            relay_signature,
            digest: OnceLock::new(),
        }
    }

    /// Digest over the signed content: body then relay id.
    pub fn signed_digest(&self) -> &MessageDigest {
        self.digest.get_or_init(|| Self::digest_of(&self.body, self.relay_id))
    }

    pub fn digest_of(body: &[u8], relay_id: DeviceId) -> MessageDigest {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(body);
        h.update(relay_id.0.to_be_bytes());
        h.finalize().into()
    }
}

impl fmt::Debug for SidelinkData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SidelinkData")
            .field("bytes", &self.body.len())
            .field("relay_id", &self.relay_id)
            .field("relay_signature", &self.relay_signature)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Page,
    RachReport,
    ServiceRequest,
    PairAnnouncement,
    MulticastData,
    SidelinkData,
    RelayReport,
    PublicKeyRequest,
    PublicKeyResponse,
    AlarmBeacon,
}

impl MessageKind {
    pub const ALL: [MessageKind; 10] = [
        MessageKind::Page,
        MessageKind::RachReport,
        MessageKind::ServiceRequest,
        MessageKind::PairAnnouncement,
        MessageKind::MulticastData,
        MessageKind::SidelinkData,
        MessageKind::RelayReport,
        MessageKind::PublicKeyRequest,
        MessageKind::PublicKeyResponse,
        MessageKind::AlarmBeacon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Page => "Page",
            MessageKind::RachReport => "RachReport",
            MessageKind::ServiceRequest => "ServiceRequest",
            MessageKind::PairAnnouncement => "PairAnnouncement",
            MessageKind::MulticastData => "MulticastData",
            MessageKind::SidelinkData => "SidelinkData",
            MessageKind::RelayReport => "RelayReport",
            MessageKind::PublicKeyRequest => "PublicKeyRequest",
            MessageKind::PublicKeyResponse => "PublicKeyResponse",
            MessageKind::AlarmBeacon => "AlarmBeacon",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Messages that exist only to secure the sidelink.
    pub fn is_security_only(self) -> bool {
        matches!(
            self,
            MessageKind::RelayReport
                | MessageKind::PublicKeyRequest
                | MessageKind::PublicKeyResponse
                | MessageKind::AlarmBeacon
        )
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// HMAC tag plus the per-sender sequence number it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Auth {
    pub seq: u64,
    pub tag: AuthTag,
}

#[derive(Debug, Clone)]
pub enum ProtocolMessage {
    Page {
        subgroup: u32,
        rach_deadline: crate::ids::Tti,
        serve_direct_cqi: u8,
    },
    RachReport {
        device: DeviceId,
        downlink_cqi: u8,
        d2d_cqi: BTreeMap<DeviceId, u8>,
        social_value: f64,
        auth: Option<Auth>,
    },
    ServiceRequest {
        device: DeviceId,
        y_public: Option<BigUint>,
        auth: Option<Auth>,
    },
    PairAnnouncement {
        receiver: DeviceId,
        relay: DeviceId,
        peer_public: Option<BigUint>,
        auth: Option<Auth>,
    },
    MulticastData {
        payload: Arc<SignedPayload>,
    },
    SidelinkData(Arc<SidelinkData>),
    RelayReport {
        relay: DeviceId,
        receiver: DeviceId,
        y_public: BigUint,
        auth: Option<Auth>,
    },
    PublicKeyRequest {
        receiver: DeviceId,
        auth: Option<Auth>,
    },
    PublicKeyResponse {
        receiver: DeviceId,
        y_public: BigUint,
        auth: Option<Auth>,
    },
    AlarmBeacon {
        receiver: DeviceId,
        evidence: Arc<SidelinkData>,
        /// The receiver's ephemeral exponent, letting the HeNB rebuild the
        /// pair key and open the evidence.
        revealed_secret: BigUint,
        auth: Option<Auth>,
    },
}

impl ProtocolMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            ProtocolMessage::Page { .. } => MessageKind::Page,
            ProtocolMessage::RachReport { .. } => MessageKind::RachReport,
            ProtocolMessage::ServiceRequest { .. } => MessageKind::ServiceRequest,
            ProtocolMessage::PairAnnouncement { .. } => MessageKind::PairAnnouncement,
            ProtocolMessage::MulticastData { .. } => MessageKind::MulticastData,
            ProtocolMessage::SidelinkData(_) => MessageKind::SidelinkData,
            ProtocolMessage::RelayReport { .. } => MessageKind::RelayReport,
            ProtocolMessage::PublicKeyRequest { .. } => MessageKind::PublicKeyRequest,
            ProtocolMessage::PublicKeyResponse { .. } => MessageKind::PublicKeyResponse,
            ProtocolMessage::AlarmBeacon { .. } => MessageKind::AlarmBeacon,
        }
    }

    pub fn auth(&self) -> Option<&Auth> {
        match self {
            ProtocolMessage::RachReport { auth, .. }
            | ProtocolMessage::ServiceRequest { auth, .. }
            | ProtocolMessage::PairAnnouncement { auth, .. }
            | ProtocolMessage::RelayReport { auth, .. }
            | ProtocolMessage::PublicKeyRequest { auth, .. }
            | ProtocolMessage::PublicKeyResponse { auth, .. }
            | ProtocolMessage::AlarmBeacon { auth, .. } => auth.as_ref(),
            _ => None,
        }
    }

    pub fn set_auth(&mut self, value: Auth) {
        match self {
            ProtocolMessage::RachReport { auth, .. }
            | ProtocolMessage::ServiceRequest { auth, .. }
            | ProtocolMessage::PairAnnouncement { auth, .. }
            | ProtocolMessage::RelayReport { auth, .. }
            | ProtocolMessage::PublicKeyRequest { auth, .. }
            | ProtocolMessage::PublicKeyResponse { auth, .. }
            | ProtocolMessage::AlarmBeacon { auth, .. } => *auth = Some(value),
            _ => {}
        }
    }

    /// Canonical bytes covered by the auth tag: every field except the tag,
    /// followed by the sequence number.
    pub fn auth_bytes(&self, seq: u64) -> Vec<u8> {
        let mut e = Enc(Vec::with_capacity(64));
        e.u8(self.kind() as u8);
        match self {
            ProtocolMessage::Page {
                subgroup,
                rach_deadline,
                serve_direct_cqi,
            } => {
                e.u32(*subgroup);
                e.u64(rach_deadline.0);
                e.u8(*serve_direct_cqi);
            }
            ProtocolMessage::RachReport {
                device,
                downlink_cqi,
                d2d_cqi,
                social_value,
                ..
            } => {
                e.dev(*device);
                e.u8(*downlink_cqi);
                e.u32(d2d_cqi.len() as u32);
                for (peer, cqi) in d2d_cqi {
                    e.dev(*peer);
                    e.u8(*cqi);
                }
                e.u64(social_value.to_bits());
            }
            ProtocolMessage::ServiceRequest {
                device, y_public, ..
            } => {
                e.dev(*device);
                e.opt_big(y_public.as_ref());
            }
            ProtocolMessage::PairAnnouncement {
                receiver,
                relay,
                peer_public,
                ..
            } => {
                e.dev(*receiver);
                e.dev(*relay);
                e.opt_big(peer_public.as_ref());
            }
            ProtocolMessage::MulticastData { payload } => {
                e.0.extend_from_slice(payload.digest());
            }
            ProtocolMessage::SidelinkData(d) => {
                e.0.extend_from_slice(d.signed_digest());
            }
            ProtocolMessage::RelayReport {
                relay,
                receiver,
                y_public,
                ..
            } => {
                e.dev(*relay);
                e.dev(*receiver);
                e.big(y_public);
            }
            ProtocolMessage::PublicKeyRequest { receiver, .. } => e.dev(*receiver),
            ProtocolMessage::PublicKeyResponse {
                receiver, y_public, ..
            } => {
                e.dev(*receiver);
                e.big(y_public);
            }
            ProtocolMessage::AlarmBeacon {
                receiver,
                evidence,
                revealed_secret,
                ..
            } => {
                e.dev(*receiver);
                e.dev(evidence.relay_id);
                if let Some(sig) = &evidence.relay_signature {
                    e.0.extend_from_slice(&sig.bytes);
                }
                e.big(revealed_secret);
            }
        }
        e.u64(seq);
        e.0
    }

    /// Wire size split into (useful, security) bits.
    pub fn wire_bits(&self, sizes: &MessageSizes, key_bits: u64) -> WireBits {
        let tag_bits = if self.auth().is_some() {
            (TAG_LEN as u64 + 8) * 8
        } else {
            0
        };
        let ctrl = |base: u64, key: bool, security_only: bool| {
            let key = if key { key_bits } else { 0 };
            if security_only {
                WireBits::security(base + key + tag_bits)
            } else {
                WireBits {
                    useful: base,
                    security: key + tag_bits,
                }
            }
        };
        match self {
            ProtocolMessage::Page { .. } => WireBits::useful(sizes.page),
            ProtocolMessage::RachReport { d2d_cqi, .. } => ctrl(
                sizes.rach_report + sizes.rach_entry * d2d_cqi.len() as u64,
                false,
                false,
            ),
            ProtocolMessage::ServiceRequest { y_public, .. } => {
                ctrl(sizes.service_request, y_public.is_some(), false)
            }
            ProtocolMessage::PairAnnouncement { peer_public, .. } => {
                ctrl(sizes.pair_announcement, peer_public.is_some(), false)
            }
            ProtocolMessage::MulticastData { payload } => WireBits {
                useful: payload.bits(),
                security: if payload.signature().is_some() {
                    SIGNATURE_LEN as u64 * 8
                } else {
                    0
                },
            },
            ProtocolMessage::SidelinkData(d) => {
                let body = d.body.len() as u64 * 8;
                match d.relay_signature {
                    Some(_) => {
                        let overhead = (CIPHERTEXT_OVERHEAD + 2 * SIGNATURE_LEN) as u64 * 8;
                        WireBits {
                            useful: body.saturating_sub(overhead - SIGNATURE_LEN as u64 * 8),
                            security: overhead + 32,
                        }
                    }
                    None => WireBits {
                        useful: body,
                        security: 0,
                    },
                }
            }
            ProtocolMessage::RelayReport { .. } => ctrl(sizes.relay_report, true, true),
            ProtocolMessage::PublicKeyRequest { .. } => ctrl(sizes.public_key_request, false, true),
            ProtocolMessage::PublicKeyResponse { .. } => {
                ctrl(sizes.public_key_response, true, true)
            }
            ProtocolMessage::AlarmBeacon { .. } => ctrl(sizes.alarm_beacon, true, true),
        }
    }
}

struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn dev(&mut self, d: DeviceId) {
        self.u32(d.0);
    }
    fn big(&mut self, v: &BigUint) {
        let b = v.to_bytes_be();
        self.u32(b.len() as u32);
        self.0.extend_from_slice(&b);
    }
    fn opt_big(&mut self, v: Option<&BigUint>) {
        match v {
            Some(v) => {
                self.u8(1);
                self.big(v);
            }
            None => self.u8(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WireBits {
    pub useful: u64,
    pub security: u64,
}

impl WireBits {
    pub fn useful(bits: u64) -> Self {
        Self {
            useful: bits,
            security: 0,
        }
    }

    pub fn security(bits: u64) -> Self {
        Self {
            useful: 0,
            security: bits,
        }
    }

    pub fn total(&self) -> u64 {
        self.useful + self.security
    }
}

/// Control-message sizes in bits, excluding public keys and auth tags which
/// are added on top when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MessageSizes {
    pub page: u64,
    pub rach_report: u64,
    /// Per reported sidelink neighbour.
    pub rach_entry: u64,
    pub service_request: u64,
    pub pair_announcement: u64,
    pub relay_report: u64,
    pub public_key_request: u64,
    pub public_key_response: u64,
    /// Fixed size; the evidence is referenced, not re-sent.
    pub alarm_beacon: u64,
}

impl Default for MessageSizes {
    fn default() -> Self {
        Self {
            page: 64,
            rach_report: 128,
            rach_entry: 40,
            service_request: 96,
            pair_announcement: 128,
            relay_report: 128,
            public_key_request: 96,
            public_key_response: 96,
            alarm_beacon: 1024,
        }
    }
}
