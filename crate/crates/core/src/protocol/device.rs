use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::context::{AuditEvent, Context, CryptoOp, RejectReason, Timer};
use super::message::{Auth, MessageKind, ProtocolMessage, SidelinkData, SignedPayload};
use super::{DeliveryStatus, ProtocolParams, Variant};
use crate::crypto::{
    auth_tag, derive_key, dhke_keypair, dhke_shared, verify_tag, CipherKind, DhkeParams, KeyPair,
    Signer, SignerId, SymmetricKey, VerifierDirectory,
};
use crate::ids::{DeviceId, NodeId, Tti};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Unpaged,
    Direct,
    Relay,
    Receiver,
}

pub struct DeviceSetup {
    pub id: DeviceId,
    pub variant: Variant,
    pub params: Arc<ProtocolParams>,
    pub dhke: Arc<DhkeParams>,
    pub cipher: CipherKind,
    pub subscription_key: SymmetricKey,
    pub signer: Signer,
    pub directory: Arc<VerifierDirectory>,
    pub downlink_cqi: u8,
    pub d2d_cqi: BTreeMap<DeviceId, u8>,
    pub srf: f64,
    pub malicious: bool,
    pub tamper_prob: f64,
    pub key_rng: ChaCha8Rng,
    pub tamper_rng: ChaCha8Rng,
}

/// One subscriber. The same machine plays direct member, relay or receiver
/// depending on what the HeNB tells it.
pub struct Device {
    s: DeviceSetup,
    seq_out: u64,
    seq_in: u64,
    role: Role,
    rach_deadline: Option<Tti>,
    keypair: Option<KeyPair>,
    my_relay: Option<DeviceId>,
    relay_for: Vec<(DeviceId, Option<BigUint>)>,
    held: Option<Arc<SidelinkData>>,
    awaiting_key: bool,
    status: DeliveryStatus,
    tampered: Vec<DeviceId>,
}

impl Device {
    pub fn new(setup: DeviceSetup) -> Self {
        Self {
            s: setup,
            seq_out: 0,
            seq_in: 0,
            role: Role::Unpaged,
            rach_deadline: None,
            keypair: None,
            my_relay: None,
            relay_for: Vec::new(),
            held: None,
            awaiting_key: false,
            status: DeliveryStatus::Pending,
            tampered: Vec::new(),
        }
    }

    pub fn id(&self) -> DeviceId {
        self.s.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn status(&self) -> DeliveryStatus {
        self.status
    }

    pub fn is_malicious(&self) -> bool {
        self.s.malicious
    }

    pub fn downlink_cqi(&self) -> u8 {
        self.s.downlink_cqi
    }

    pub fn relay(&self) -> Option<DeviceId> {
        self.my_relay
    }

    /// Session stop: anything still pending is frozen as unserved.
    pub fn close(&mut self) -> DeliveryStatus {
        if self.status == DeliveryStatus::Pending {
            self.status = DeliveryStatus::Unserved;
        }
        self.status
    }

    fn secure(&self) -> bool {
        self.s.variant.is_secure()
    }

    fn send_henb(&mut self, ctx: &mut dyn Context, mut msg: ProtocolMessage) -> bool {
        if self.secure() {
            self.seq_out += 1;
            let tag = auth_tag(&msg.auth_bytes(self.seq_out), &self.s.subscription_key);
            ctx.meter(self.s.id, CryptoOp::Tag);
            msg.set_auth(Auth {
                seq: self.seq_out,
                tag,
            });
        }
        ctx.send(self.s.id.into(), NodeId::Henb, msg).is_ok()
    }

    fn check_henb(&mut self, ctx: &mut dyn Context, msg: &ProtocolMessage) -> bool {
        if !self.secure() {
            return true;
        }
        ctx.meter(self.s.id, CryptoOp::VerifyTag);
        let reason = match msg.auth() {
            None => Some(RejectReason::BadTag),
            Some(a) if !verify_tag(&msg.auth_bytes(a.seq), &self.s.subscription_key, &a.tag) => {
                Some(RejectReason::BadTag)
            }
            Some(a) if a.seq <= self.seq_in => Some(RejectReason::Replay),
            Some(a) => {
                self.seq_in = a.seq;
                None
            }
        };
        if let Some(reason) = reason {
            ctx.audit(AuditEvent::Rejected {
                at: self.s.id.into(),
                from: NodeId::Henb,
                kind: msg.kind(),
                reason,
            });
            return false;
        }
        true
    }

    fn keypair(&mut self, ctx: &mut dyn Context) -> KeyPair {
        if let Some(k) = &self.keypair {
            return k.clone();
        }
        let k = dhke_keypair(&self.s.dhke, &mut self.s.key_rng);
        ctx.meter(self.s.id, CryptoOp::DhExp);
        self.keypair = Some(k.clone());
        k
    }

    pub fn on_message(&mut self, ctx: &mut dyn Context, from: NodeId, msg: ProtocolMessage) {
        match (from, msg) {
            (NodeId::Henb, ProtocolMessage::Page {
                rach_deadline,
                serve_direct_cqi,
                ..
            }) => self.on_page(ctx, rach_deadline, serve_direct_cqi),
            (NodeId::Henb, m @ ProtocolMessage::PairAnnouncement { .. }) => {
                if self.check_henb(ctx, &m) {
                    if let ProtocolMessage::PairAnnouncement {
                        receiver,
                        relay,
                        peer_public,
                        ..
                    } = m
                    {
                        self.on_announcement(receiver, relay, peer_public);
                    }
                }
            }
            (NodeId::Henb, ProtocolMessage::MulticastData { payload }) => {
                self.on_multicast(ctx, payload)
            }
            (NodeId::Device(relay), ProtocolMessage::SidelinkData(data)) => {
                self.on_sidelink(ctx, relay, data)
            }
            (NodeId::Henb, m @ ProtocolMessage::PublicKeyResponse { .. }) => {
                if self.check_henb(ctx, &m) {
                    if let ProtocolMessage::PublicKeyResponse { receiver, y_public, .. } = m {
                        if receiver == self.s.id {
                            self.on_public_key(ctx, y_public);
                        }
                    }
                }
            }
            (from, m) => ctx.audit(AuditEvent::Rejected {
                at: self.s.id.into(),
                from,
                kind: m.kind(),
                reason: RejectReason::Unsolicited,
            }),
        }
    }

    fn on_page(&mut self, ctx: &mut dyn Context, rach_deadline: Tti, serve_direct_cqi: u8) {
        if self.rach_deadline.is_some() {
            return;
        }
        self.rach_deadline = Some(rach_deadline);
        let edge = self.s.downlink_cqi < serve_direct_cqi;
        self.role = if edge && self.s.variant.uses_sidelink() {
            Role::Receiver
        } else {
            Role::Direct
        };
        let report = ProtocolMessage::RachReport {
            device: self.s.id,
            downlink_cqi: self.s.downlink_cqi,
            d2d_cqi: self.s.d2d_cqi.clone(),
            social_value: self.s.srf,
            auth: None,
        };
        self.send_henb(ctx, report);
        if self.role == Role::Receiver {
            ctx.set_timer(self.s.id.into(), rach_deadline, Timer::SendServiceRequest);
        }
    }

    fn send_service_request(&mut self, ctx: &mut dyn Context) {
        let y_public = if self.secure() {
            Some(self.keypair(ctx).public().clone())
        } else {
            None
        };
        let msg = ProtocolMessage::ServiceRequest {
            device: self.s.id,
            y_public,
            auth: None,
        };
        self.send_henb(ctx, msg);
    }

    fn on_announcement(&mut self, receiver: DeviceId, relay: DeviceId, peer_public: Option<BigUint>) {
        if receiver == self.s.id {
            self.my_relay = Some(relay);
        } else if relay == self.s.id && !self.relay_for.iter().any(|(r, _)| *r == receiver) {
            self.role = Role::Relay;
            self.relay_for.push((receiver, peer_public));
        }
    }

    fn on_multicast(&mut self, ctx: &mut dyn Context, payload: Arc<SignedPayload>) {
        if self.status == DeliveryStatus::Pending {
            self.status = DeliveryStatus::Accepted { relayed: false };
        }
        let jobs = std::mem::take(&mut self.relay_for);
        for (receiver, y_i) in &jobs {
            self.sd2d_transmit(ctx, &payload, *receiver, y_i.as_ref());
        }
        self.relay_for = jobs;
    }

    fn should_tamper(&mut self) -> bool {
        self.s.malicious && self.s.tamper_rng.random::<f64>() < self.s.tamper_prob
    }

    /// Forwards the gateway payload to `receiver`: encrypted under the pair
    /// key and signed with the relay's key in secure modes, in clear
    /// otherwise. A malicious relay alters the content first.
    pub fn sd2d_transmit(
        &mut self,
        ctx: &mut dyn Context,
        payload: &SignedPayload,
        receiver: DeviceId,
        peer_public: Option<&BigUint>,
    ) {
        let tamper = self.should_tamper();
        let mut plaintext = payload.to_plaintext();
        if tamper {
            let data_len = payload.data().len();
            if data_len == 0 {
                plaintext.insert(0, 0xff);
            } else {
                plaintext[0] ^= 0xa5;
                plaintext[data_len - 1] ^= 0x5a;
            }
        }
        let data = if self.secure() {
            let Some(y_i) = peer_public else {
                ctx.audit(AuditEvent::MissingPeerKey {
                    relay: self.s.id,
                    receiver,
                });
                return;
            };
            let kp = self.keypair(ctx);
            let Ok(shared) = dhke_shared(y_i, kp.secret(), &self.s.dhke) else {
                ctx.audit(AuditEvent::MissingPeerKey {
                    relay: self.s.id,
                    receiver,
                });
                return;
            };
            ctx.meter(self.s.id, CryptoOp::DhExp);
            let key = derive_key(&shared);
            ctx.audit(AuditEvent::KeyUsed {
                device: self.s.id,
                peer: receiver,
                fingerprint: key.fingerprint(),
            });
            let body = self.s.cipher.encrypt(&plaintext, &key);
            ctx.meter(self.s.id, CryptoOp::Encrypt {
                bits: plaintext.len() as u64 * 8,
            });
            let sig = self.s.signer.sign_digest(&SidelinkData::digest_of(&body, self.s.id));
            ctx.meter(self.s.id, CryptoOp::Sign);
            SidelinkData::new(body, self.s.id, Some(sig))
        } else {
            if payload.signature().is_some() {
                plaintext.truncate(plaintext.len() - crate::crypto::SIGNATURE_LEN);
            }
            SidelinkData::new(plaintext, self.s.id, None)
        };
        if tamper {
            self.tampered.push(receiver);
            ctx.audit(AuditEvent::Tampered {
                relay: self.s.id,
                receiver,
            });
        }
        let cqi = self
            .s
            .d2d_cqi
            .get(&receiver)
            .copied()
            .unwrap_or(self.s.params.selection.cqi_threshold.max(1));
        let _ = ctx.send_sidelink(self.s.id, receiver, Arc::new(data), cqi);
    }

    /// The sidelink transfer to `receiver` has completed.
    pub fn on_sidelink_sent(&mut self, ctx: &mut dyn Context, receiver: DeviceId) {
        if !self.secure() {
            return;
        }
        let Some(kp) = self.keypair.clone() else {
            return;
        };
        let msg = ProtocolMessage::RelayReport {
            relay: self.s.id,
            receiver,
            y_public: kp.public().clone(),
            auth: None,
        };
        self.send_henb(ctx, msg);
    }

    fn on_sidelink(&mut self, ctx: &mut dyn Context, from: DeviceId, data: Arc<SidelinkData>) {
        let drop = |ctx: &mut dyn Context, me: DeviceId, reason| {
            ctx.audit(AuditEvent::Rejected {
                at: me.into(),
                from: from.into(),
                kind: MessageKind::SidelinkData,
                reason,
            });
        };
        if self.my_relay.is_none() || self.held.is_some() || self.status != DeliveryStatus::Pending {
            drop(ctx, self.s.id, RejectReason::Unsolicited);
            return;
        }
        if !self.secure() {
            self.status = DeliveryStatus::Accepted { relayed: true };
            return;
        }
        if self.my_relay != Some(data.relay_id) || from != data.relay_id {
            drop(ctx, self.s.id, RejectReason::IdentityMismatch);
            self.status = DeliveryStatus::Dropped;
            return;
        }
        ctx.meter(self.s.id, CryptoOp::Verify);
        let sig_ok = data.relay_signature.as_ref().is_some_and(|sig| {
            self.s
                .directory
                .verify_digest(data.signed_digest(), sig, SignerId::Device(data.relay_id))
        });
        if !sig_ok {
            drop(ctx, self.s.id, RejectReason::BadRelaySignature);
            self.status = DeliveryStatus::Dropped;
            return;
        }
        self.held = Some(data);
        self.awaiting_key = true;
        let msg = ProtocolMessage::PublicKeyRequest {
            receiver: self.s.id,
            auth: None,
        };
        self.send_henb(ctx, msg);
        let t = ctx.now().plus(self.s.params.delta_t);
        ctx.set_timer(self.s.id.into(), t, Timer::ReceiverTimeout);
    }

    /// Opens the held packet with the relay's public key and checks the
    /// gateway signature: accept, or raise an alarm carrying the evidence.
    fn on_public_key(&mut self, ctx: &mut dyn Context, y_j: BigUint) {
        if !self.awaiting_key {
            return;
        }
        self.awaiting_key = false;
        let (Some(held), Some(kp)) = (self.held.clone(), self.keypair.clone()) else {
            return;
        };
        let opened = dhke_shared(&y_j, kp.secret(), &self.s.dhke).ok().and_then(|shared| {
            ctx.meter(self.s.id, CryptoOp::DhExp);
            let key = derive_key(&shared);
            ctx.audit(AuditEvent::KeyUsed {
                device: self.s.id,
                peer: held.relay_id,
                fingerprint: key.fingerprint(),
            });
            ctx.meter(self.s.id, CryptoOp::Decrypt {
                bits: held.body.len() as u64 * 8,
            });
            self.s.cipher.decrypt(&held.body, &key).ok()
        });
        let valid = opened
            .and_then(|pt| SignedPayload::from_signed_plaintext(pt).ok())
            .is_some_and(|p| {
                ctx.meter(self.s.id, CryptoOp::Verify);
                p.signature().is_some_and(|s| {
                    self.s.directory.verify_digest(p.digest(), s, SignerId::Gateway)
                })
            });
        if valid {
            self.status = DeliveryStatus::Accepted { relayed: true };
        } else {
            self.status = DeliveryStatus::Alarmed;
            let msg = ProtocolMessage::AlarmBeacon {
                receiver: self.s.id,
                evidence: held,
                revealed_secret: kp.secret().clone(),
                auth: None,
            };
            self.send_henb(ctx, msg);
        }
        self.held = None;
    }

    pub fn on_timer(&mut self, ctx: &mut dyn Context, timer: Timer) {
        match timer {
            Timer::SendServiceRequest => self.send_service_request(ctx),
            Timer::ReceiverTimeout
                if self.awaiting_key => {
                    self.awaiting_key = false;
                    self.held = None;
                    self.status = DeliveryStatus::Unserved;
                    ctx.audit(AuditEvent::ReceiverTimeout { receiver: self.s.id });
                }
            _ => {}
        }
    }

    /// Receivers this relay corrupted, ground truth.
    pub fn tampered(&self) -> &[DeviceId] {
        &self.tampered
    }
}
