use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigUint;

use super::context::{AlarmOutcome, AuditEvent, Context, RejectReason, Timer};
use super::core_net::Subgroup;
use super::message::{Auth, MessageKind, ProtocolMessage, SidelinkData, SignedPayload};
use super::phase::{PhaseTracker, Procedure, SubProcedure};
use super::selection::{select_d2d_pairs, PairAssignment};
use super::{ProtocolParams, Variant};
use crate::crypto::{
    auth_tag, derive_key, dhke_shared, public_from_secret, verify_tag, CipherKind, DhkeParams,
    SignerId, SymmetricKey, VerifierDirectory,
};
use crate::ids::{DeviceId, NodeId, Tti};
use crate::radio::{cms_rate, CqiReport, SpectralTable};
use crate::trust::{ClassThresholds, ReliabilityClass, TrustLedger};

pub struct HenbSetup {
    pub variant: Variant,
    pub params: Arc<ProtocolParams>,
    pub dhke: Arc<DhkeParams>,
    pub cipher: CipherKind,
    pub thresholds: ClassThresholds,
    pub table: SpectralTable,
    /// Pre-provisioned subscription keys of registered devices.
    pub keys: BTreeMap<DeviceId, SymmetricKey>,
    pub directory: Arc<VerifierDirectory>,
    pub ledger: TrustLedger,
}

#[derive(Debug, Default)]
struct SubgroupState {
    index: u32,
    members: BTreeSet<DeviceId>,
    rach_deadline: Tti,
    reports: BTreeMap<DeviceId, CqiReport>,
    assignment: PairAssignment,
    receiver_keys: BTreeMap<DeviceId, BigUint>,
    announced: BTreeSet<DeviceId>,
    last_announcement: Tti,
    relay_keys: BTreeMap<DeviceId, BigUint>,
    pending_pk: BTreeSet<DeviceId>,
    alarm_deadline: BTreeMap<DeviceId, Tti>,
}

/// Home base station: paging, relay selection, key mediation and alarm
/// handling.
pub struct Henb {
    setup: HenbSetup,
    seq_in: BTreeMap<DeviceId, u64>,
    seq_out: BTreeMap<DeviceId, u64>,
    subgroups: Vec<Subgroup>,
    next_subgroup: usize,
    sg: Option<SubgroupState>,
    payload: Option<Arc<SignedPayload>>,
    phases: PhaseTracker,
    assignments: Vec<PairAssignment>,
}

impl Henb {
    pub fn new(setup: HenbSetup) -> Self {
        Self {
            setup,
            seq_in: BTreeMap::new(),
            seq_out: BTreeMap::new(),
            subgroups: Vec::new(),
            next_subgroup: 0,
            sg: None,
            payload: None,
            phases: PhaseTracker::default(),
            assignments: Vec::new(),
        }
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.setup.ledger
    }

    pub fn phases(&self) -> &PhaseTracker {
        &self.phases
    }

    pub fn assignments(&self) -> &[PairAssignment] {
        &self.assignments
    }

    /// Subscription and initialization are done by the core; the HeNB just
    /// records their completion and the resulting paging plan.
    pub fn begin_session(&mut self, subgroups: Vec<Subgroup>, payload: Arc<SignedPayload>) {
        self.phases.enter(Procedure::Subscription);
        self.phases.enter(Procedure::Initialization);
        self.subgroups = subgroups;
        self.next_subgroup = 0;
        self.payload = Some(payload);
    }

    pub fn next_subgroup_wake(&self) -> Option<Tti> {
        self.subgroups.get(self.next_subgroup).map(|g| g.wake)
    }

    /// Pages the next subgroup. Returns false when none is left.
    pub fn start_next_subgroup(&mut self, ctx: &mut dyn Context) -> bool {
        let Some(group) = self.subgroups.get(self.next_subgroup).cloned() else {
            return false;
        };
        self.next_subgroup += 1;
        self.phases.enter(Procedure::Joining);
        self.phases.mark(SubProcedure::Paging);
        let now = ctx.now();
        let deadline = now.plus(self.setup.params.rach_window);
        self.sg = Some(SubgroupState {
            index: group.index,
            members: group.members.iter().copied().collect(),
            rach_deadline: deadline,
            ..Default::default()
        });
        for &d in &group.members {
            let page = ProtocolMessage::Page {
                subgroup: group.index,
                rach_deadline: deadline,
                serve_direct_cqi: self.setup.params.selection.serve_direct_cqi,
            };
            let _ = ctx.send(NodeId::Henb, d.into(), page);
        }
        ctx.set_timer(NodeId::Henb, deadline, Timer::RachClose);
        true
    }

    pub fn end_session(&mut self) {
        self.sg = None;
        self.phases.enter(Procedure::SessionStop);
    }

    fn reject(&self, ctx: &mut dyn Context, from: DeviceId, kind: MessageKind, reason: RejectReason) {
        ctx.audit(AuditEvent::Rejected {
            at: NodeId::Henb,
            from: from.into(),
            kind,
            reason,
        });
    }

    fn authenticate(&mut self, from: DeviceId, msg: &ProtocolMessage) -> Result<(), RejectReason> {
        let key = self.setup.keys.get(&from).ok_or(RejectReason::Unregistered)?;
        if !self.setup.variant.is_secure() {
            return Ok(());
        }
        let auth = msg.auth().ok_or(RejectReason::BadTag)?;
        if !verify_tag(&msg.auth_bytes(auth.seq), key, &auth.tag) {
            return Err(RejectReason::BadTag);
        }
        let last = self.seq_in.entry(from).or_insert(0);
        if auth.seq <= *last {
            return Err(RejectReason::Replay);
        }
        *last = auth.seq;
        Ok(())
    }

    fn send_tagged(&mut self, ctx: &mut dyn Context, to: DeviceId, mut msg: ProtocolMessage) -> Option<Tti> {
        if self.setup.variant.is_secure() {
            if let Some(key) = self.setup.keys.get(&to) {
                let seq = self.seq_out.entry(to).or_insert(0);
                *seq += 1;
                let tag = auth_tag(&msg.auth_bytes(*seq), key);
                msg.set_auth(Auth { seq: *seq, tag });
            }
        }
        ctx.send(NodeId::Henb, to.into(), msg).ok()
    }

    pub fn on_message(&mut self, ctx: &mut dyn Context, from: NodeId, msg: ProtocolMessage) {
        let NodeId::Device(dev) = from else {
            return;
        };
        let kind = msg.kind();
        if self.sg.is_none() || !self.phases.admit(kind, Some(dev)) {
            self.reject(ctx, dev, kind, RejectReason::OutOfPhase);
            return;
        }
        if let Err(reason) = self.authenticate(dev, &msg) {
            self.reject(ctx, dev, kind, reason);
            return;
        }
        match msg {
            ProtocolMessage::RachReport {
                device,
                downlink_cqi,
                d2d_cqi,
                social_value,
                ..
            } => self.on_rach(ctx, dev, device, downlink_cqi, d2d_cqi, social_value),
            ProtocolMessage::ServiceRequest { device, y_public, .. } => {
                self.on_service_request(ctx, dev, device, y_public)
            }
            ProtocolMessage::RelayReport {
                relay,
                receiver,
                y_public,
                ..
            } => self.on_relay_report(ctx, dev, relay, receiver, y_public),
            ProtocolMessage::PublicKeyRequest { receiver, .. } => {
                self.on_public_key_request(ctx, dev, receiver)
            }
            ProtocolMessage::AlarmBeacon {
                receiver,
                evidence,
                revealed_secret,
                ..
            } => self.on_alarm(ctx, dev, receiver, evidence, revealed_secret),
            other => self.reject(ctx, dev, other.kind(), RejectReason::Unsolicited),
        }
    }

    fn on_rach(
        &mut self,
        ctx: &mut dyn Context,
        from: DeviceId,
        device: DeviceId,
        downlink_cqi: u8,
        d2d_cqi: BTreeMap<DeviceId, u8>,
        social_value: f64,
    ) {
        let now = ctx.now();
        let sg = self.sg.as_mut().expect("checked");
        if device != from || !sg.members.contains(&device) {
            self.reject(ctx, from, MessageKind::RachReport, RejectReason::NotPaged);
            return;
        }
        if now > sg.rach_deadline {
            self.reject(ctx, from, MessageKind::RachReport, RejectReason::LateReport);
            return;
        }
        let Ok(mut report) = CqiReport::new(device, downlink_cqi) else {
            return;
        };
        report.d2d_cqi = d2d_cqi;
        sg.reports.insert(device, report);
        let _ = self.setup.ledger.set_srf(device, social_value.clamp(0.0, 1.0));
    }

    fn on_rach_close(&mut self, ctx: &mut dyn Context) {
        self.phases.mark(SubProcedure::PairSelection);
        let now = ctx.now();
        let variant = self.setup.variant;
        let ledger = &self.setup.ledger;
        let thresholds = self.setup.thresholds;
        let sg = self.sg.as_mut().expect("subgroup open");
        let reports: Vec<CqiReport> = sg.reports.values().cloned().collect();
        let params = &self.setup.params.selection;
        let mut a = match variant {
            Variant::Cms | Variant::Unicast => select_d2d_pairs(&reports, |_| ReliabilityClass::Low, &super::SelectionParams {
                cqi_threshold: u8::MAX,
                ..params.clone()
            }),
            Variant::D2d => select_d2d_pairs(&reports, |_| ReliabilityClass::Low, params),
            Variant::Sd2d | Variant::Std2d => select_d2d_pairs(
                &reports,
                |d| ledger.class_of(d, &thresholds).unwrap_or(ReliabilityClass::Banned),
                params,
            ),
        };
        if !variant.uses_sidelink() {
            a.pairs.clear();
            a.fallback = false;
        }
        if a.fallback {
            ctx.audit(AuditEvent::PairingFallback { subgroup: sg.index });
        }
        let wait_for_requests = variant.uses_sidelink() && !a.receivers.is_empty();
        sg.assignment = a.clone();
        self.assignments.push(a);
        if wait_for_requests {
            ctx.set_timer(NodeId::Henb, now.plus(self.setup.params.join_window), Timer::JoinClose);
        } else {
            ctx.set_timer(NodeId::Henb, now.next_frame_boundary(), Timer::StartMulticast);
        }
    }

    fn on_service_request(
        &mut self,
        ctx: &mut dyn Context,
        from: DeviceId,
        device: DeviceId,
        y_public: Option<BigUint>,
    ) {
        let secure = self.setup.variant.is_secure();
        let q = self.setup.dhke.q().clone();
        let sg = self.sg.as_mut().expect("checked");
        let relay = match sg.assignment.relay_of(device) {
            Some(r) if device == from && !sg.announced.contains(&device) => r,
            _ => {
                self.reject(ctx, from, MessageKind::ServiceRequest, RejectReason::NotAssigned);
                return;
            }
        };
        if secure {
            match &y_public {
                Some(y) if *y > BigUint::from(1u32) && *y < &q - 1u32 => {
                    sg.receiver_keys.insert(device, y.clone());
                }
                _ => {
                    self.reject(ctx, from, MessageKind::ServiceRequest, RejectReason::BadPublicKey);
                    return;
                }
            }
        }
        sg.announced.insert(device);
        let to_receiver = ProtocolMessage::PairAnnouncement {
            receiver: device,
            relay,
            peer_public: None,
            auth: None,
        };
        let to_relay = ProtocolMessage::PairAnnouncement {
            receiver: device,
            relay,
            peer_public: if secure { y_public } else { None },
            auth: None,
        };
        self.phases.mark(SubProcedure::PairAnnouncement);
        let t1 = self.send_tagged(ctx, device, to_receiver);
        let t2 = self.send_tagged(ctx, relay, to_relay);
        let sg = self.sg.as_mut().expect("checked");
        for t in [t1, t2].into_iter().flatten() {
            sg.last_announcement = sg.last_announcement.max(t);
        }
    }

    fn on_join_close(&mut self, ctx: &mut dyn Context) {
        let sg = self.sg.as_ref().expect("subgroup open");
        let start = ctx.now().max(sg.last_announcement).next_frame_boundary();
        ctx.set_timer(NodeId::Henb, start, Timer::StartMulticast);
    }

    fn on_start_multicast(&mut self, ctx: &mut dyn Context) {
        self.phases.enter(Procedure::DataTransfer);
        self.phases.mark(SubProcedure::Multicast);
        let variant = self.setup.variant;
        let payload = self.payload.clone().expect("session begun");
        let sg = self.sg.as_ref().expect("subgroup open");
        let everyone = variant == Variant::Cms || sg.assignment.fallback;
        let group: Vec<DeviceId> = sg
            .reports
            .keys()
            .copied()
            .filter(|d| everyone || sg.assignment.direct.contains(d))
            .collect();
        if group.is_empty() {
            return;
        }
        let cqis: Vec<u8> = group.iter().map(|d| sg.reports[d].downlink_cqi).collect();
        let rate = cms_rate(&cqis, &self.setup.table).unwrap_or(0.0);
        let index = sg.index;
        let unicast: Vec<(DeviceId, u8)> = if variant == Variant::Unicast {
            sg.assignment
                .receivers
                .iter()
                .map(|d| (*d, sg.reports[d].downlink_cqi))
                .collect()
        } else {
            Vec::new()
        };
        let msg = ProtocolMessage::MulticastData {
            payload: payload.clone(),
        };
        if rate <= 0.0 || ctx.downlink_data(&group, msg, rate).is_err() {
            ctx.audit(AuditEvent::MulticastUnserved { subgroup: index });
        }
        for (d, cqi) in unicast {
            let msg = ProtocolMessage::MulticastData {
                payload: payload.clone(),
            };
            let _ = ctx.downlink_data(&[d], msg, self.setup.table.carrier_rate(cqi));
        }
    }

    fn on_relay_report(
        &mut self,
        ctx: &mut dyn Context,
        from: DeviceId,
        relay: DeviceId,
        receiver: DeviceId,
        y_public: BigUint,
    ) {
        let sg = self.sg.as_mut().expect("checked");
        if relay != from || sg.assignment.relay_of(receiver) != Some(relay) || !sg.announced.contains(&receiver) {
            self.reject(ctx, from, MessageKind::RelayReport, RejectReason::NotAssigned);
            return;
        }
        match sg.relay_keys.get(&receiver) {
            Some(existing) if *existing == y_public => return,
            Some(_) => {
                self.reject(ctx, from, MessageKind::RelayReport, RejectReason::BadPublicKey);
                return;
            }
            None => {}
        }
        sg.relay_keys.insert(receiver, y_public);
        if sg.pending_pk.remove(&receiver) {
            self.respond_public_key(ctx, receiver);
        }
    }

    fn on_public_key_request(&mut self, ctx: &mut dyn Context, from: DeviceId, receiver: DeviceId) {
        let now = ctx.now();
        let delta_t = self.setup.params.delta_t;
        let sg = self.sg.as_mut().expect("checked");
        if receiver != from || !sg.announced.contains(&receiver) {
            self.reject(ctx, from, MessageKind::PublicKeyRequest, RejectReason::NotAssigned);
            return;
        }
        if sg.relay_keys.contains_key(&receiver) {
            self.respond_public_key(ctx, receiver);
        } else if sg.pending_pk.insert(receiver) {
            ctx.set_timer(NodeId::Henb, now.plus(delta_t), Timer::PublicKeyDefer(receiver));
        }
    }

    fn respond_public_key(&mut self, ctx: &mut dyn Context, receiver: DeviceId) {
        let now = ctx.now();
        let delta_t = self.setup.params.delta_t;
        let sg = self.sg.as_mut().expect("subgroup open");
        let y = sg.relay_keys[&receiver].clone();
        sg.alarm_deadline.insert(receiver, now.plus(delta_t));
        let msg = ProtocolMessage::PublicKeyResponse {
            receiver,
            y_public: y,
            auth: None,
        };
        self.send_tagged(ctx, receiver, msg);
    }

    fn on_public_key_defer(&mut self, ctx: &mut dyn Context, receiver: DeviceId) {
        if let Some(sg) = self.sg.as_mut() {
            if sg.pending_pk.remove(&receiver) {
                ctx.audit(AuditEvent::PublicKeyTimeout { receiver });
            }
        }
    }

    fn on_alarm(
        &mut self,
        ctx: &mut dyn Context,
        from: DeviceId,
        receiver: DeviceId,
        evidence: Arc<SidelinkData>,
        secret: BigUint,
    ) {
        let now = ctx.now();
        let sg = self.sg.as_mut().expect("checked");
        let relay = evidence.relay_id;
        let outcome = if receiver != from || sg.assignment.relay_of(receiver) != Some(relay) {
            AlarmOutcome::Unattributable
        } else {
            match sg.alarm_deadline.get(&receiver) {
                Some(deadline) if now <= *deadline => {
                    sg.alarm_deadline.remove(&receiver);
                    Self::judge(&self.setup, sg, receiver, &evidence, &secret)
                }
                _ => AlarmOutcome::Late,
            }
        };
        ctx.audit(AuditEvent::Alarm {
            relay,
            receiver,
            outcome,
        });
        if outcome == AlarmOutcome::Confirmed {
            if let Ok(p) = self.setup.ledger.record_malicious(relay) {
                let mdc = p.mdc;
                ctx.audit(AuditEvent::MdcIncrement { relay, mdc });
            }
        }
    }

    /// Rebuilds the pair key from the revealed secret and checks that the
    /// evidence fails the gateway signature yet carries a valid relay
    /// signature.
    fn judge(
        setup: &HenbSetup,
        sg: &SubgroupState,
        receiver: DeviceId,
        evidence: &SidelinkData,
        secret: &BigUint,
    ) -> AlarmOutcome {
        let (Some(y_i), Some(y_j)) = (sg.receiver_keys.get(&receiver), sg.relay_keys.get(&receiver)) else {
            return AlarmOutcome::Unattributable;
        };
        match public_from_secret(&setup.dhke, secret) {
            Ok(y) if y == *y_i => {}
            _ => return AlarmOutcome::BadSecret,
        }
        let relay_ok = evidence.relay_signature.as_ref().is_some_and(|sig| {
            setup
                .directory
                .verify_digest(evidence.signed_digest(), sig, SignerId::Device(evidence.relay_id))
        });
        if !relay_ok {
            return AlarmOutcome::Unattributable;
        }
        let Ok(shared) = dhke_shared(y_j, secret, &setup.dhke) else {
            return AlarmOutcome::Unattributable;
        };
        let key = derive_key(&shared);
        let gw_ok = setup
            .cipher
            .decrypt(&evidence.body, &key)
            .ok()
            .and_then(|pt| SignedPayload::from_signed_plaintext(pt).ok())
            .is_some_and(|p| {
                p.signature()
                    .is_some_and(|s| setup.directory.verify_digest(p.digest(), s, SignerId::Gateway))
            });
        if gw_ok {
            AlarmOutcome::FalseAlarm
        } else {
            AlarmOutcome::Confirmed
        }
    }

    pub fn on_timer(&mut self, ctx: &mut dyn Context, timer: Timer) {
        if self.sg.is_none() {
            return;
        }
        match timer {
            Timer::RachClose => self.on_rach_close(ctx),
            Timer::JoinClose => self.on_join_close(ctx),
            Timer::StartMulticast => self.on_start_multicast(ctx),
            Timer::PublicKeyDefer(r) => self.on_public_key_defer(ctx, r),
            Timer::SendServiceRequest | Timer::ReceiverTimeout => {}
        }
    }
}
