use std::collections::BTreeSet;
use std::sync::Arc;

use super::energy::{Category, EnergyLedger, EnergyModel, Link, Side};
use super::engine::EventQueue;
use crate::ids::{DeviceId, NodeId, Tti};
use crate::protocol::trace::TraceRecord;
use crate::protocol::{
    AuditEvent, Context, CryptoOp, DeliveryError, MessageSizes, ProtocolMessage, SidelinkData,
    Timer, WireBits,
};
use crate::radio::{Direction, RadioParams, SidelinkScheduler};

pub(crate) enum Event {
    Deliver {
        from: NodeId,
        to: NodeId,
        msg: ProtocolMessage,
        bits: u64,
    },
    Timer {
        node: NodeId,
        timer: Timer,
    },
    SidelinkDone {
        id: u64,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct SidelinkTransfer {
    pub from: DeviceId,
    pub to: DeviceId,
    pub data: Arc<SidelinkData>,
    pub payload_bits: u64,
    pub tampered: bool,
    start: Tti,
    scheduled: Option<Tti>,
    pub delivered: bool,
}

/// The network around the protocol entities: timing, radio resources,
/// energy metering and the delivery trace.
pub(crate) struct World<'a> {
    pub now: Tti,
    pub queue: EventQueue<Event>,
    radio: &'a RadioParams,
    energy: &'a EnergyModel,
    sizes: &'a MessageSizes,
    key_bits: u64,
    downlink_cqi: Vec<u8>,
    dl_busy_until: Tti,
    sidelink: SidelinkScheduler,
    pub transfers: Vec<SidelinkTransfer>,
    pending_tamper: BTreeSet<(DeviceId, DeviceId)>,
    pub ledger: EnergyLedger,
    pub trace: Vec<TraceRecord>,
    pub audits: Vec<AuditEvent>,
}

impl<'a> World<'a> {
    pub fn new(
        radio: &'a RadioParams,
        energy: &'a EnergyModel,
        sizes: &'a MessageSizes,
        key_bits: u64,
        downlink_cqi: Vec<u8>,
    ) -> Self {
        Self {
            now: Tti::ZERO,
            queue: EventQueue::default(),
            radio,
            energy,
            sizes,
            key_bits,
            downlink_cqi,
            dl_busy_until: Tti::ZERO,
            sidelink: SidelinkScheduler::new(
                radio.frame.clone(),
                radio.spectral_efficiency.clone(),
                radio.sidelink_rbs,
            ),
            transfers: Vec::new(),
            pending_tamper: BTreeSet::new(),
            ledger: EnergyLedger::default(),
            trace: Vec::new(),
            audits: Vec::new(),
        }
    }

    fn cqi_of(&self, d: DeviceId) -> u8 {
        self.downlink_cqi.get(d.0 as usize).copied().unwrap_or(0)
    }

    fn charge_message(
        &mut self,
        device: DeviceId,
        link: Link,
        side: Side,
        rate: f64,
        msg: &ProtocolMessage,
        bits: WireBits,
        corrupted: bool,
    ) {
        let per_bit = self.energy.per_bit(link, side, rate);
        let security_only = msg.kind().is_security_only();
        let base = if security_only {
            Category::Security
        } else {
            Category::Useful
        };
        let body = if security_only {
            Category::Security
        } else if corrupted {
            Category::Malicious
        } else {
            Category::Useful
        };
        self.ledger.charge(device, base, self.energy.message_baseline_j);
        self.ledger.charge(device, body, bits.useful as f64 * per_bit);
        self.ledger
            .charge(device, Category::Security, bits.security as f64 * per_bit);
    }

    fn record(&mut self, at: Tti, from: NodeId, to: NodeId, msg: &ProtocolMessage, bits: u64) {
        self.trace.push(TraceRecord {
            time_tti: at.0,
            source: from.to_string(),
            destination: to.to_string(),
            variant: msg.kind().name().to_string(),
            size_bits: bits,
        });
    }

    pub fn record_delivery(&mut self, from: NodeId, to: NodeId, msg: &ProtocolMessage, bits: u64) {
        self.record(self.now, from, to, msg, bits);
    }

    /// Marks transfer `id` delivered if this is its current completion
    /// instant; stale completion events from earlier plans are ignored.
    pub fn complete_sidelink(&mut self, id: u64) -> Option<SidelinkTransfer> {
        let now = self.now;
        let tr = self.transfers.get_mut(id as usize)?;
        if tr.delivered || tr.scheduled != Some(now) {
            return None;
        }
        tr.delivered = true;
        let tr = tr.clone();
        let msg = ProtocolMessage::SidelinkData(tr.data.clone());
        let bits = msg.wire_bits(self.sizes, self.key_bits);
        let total = bits.useful + bits.security;
        // Both ends stay active from joining the allocation until the last
        // bit, so the energy follows the realized rate.
        let elapsed_s = now.0.saturating_sub(tr.start.0).max(1) as f64 / 1000.0;
        let rate = total as f64 / elapsed_s;
        self.charge_message(tr.from, Link::Sidelink, Side::Tx, rate, &msg, bits, false);
        self.charge_message(tr.to, Link::Sidelink, Side::Rx, rate, &msg, bits, tr.tampered);
        self.record(now, tr.from.into(), tr.to.into(), &msg, total);
        Some(tr)
    }

    fn resync_sidelink(&mut self) {
        let mut due = Vec::new();
        for (&id, &t) in self.sidelink.plan() {
            let tr = &mut self.transfers[id as usize];
            if !tr.delivered && tr.scheduled != Some(t) {
                tr.scheduled = Some(t);
                due.push((t, id));
            }
        }
        for (t, id) in due {
            self.queue.push(t, Event::SidelinkDone { id });
        }
    }
}

impl Context for World<'_> {
    fn now(&self) -> Tti {
        self.now
    }

    fn send(&mut self, from: NodeId, to: NodeId, msg: ProtocolMessage) -> Result<Tti, DeliveryError> {
        let device = match (from, to) {
            (NodeId::Device(d), _) | (_, NodeId::Device(d)) => d,
            _ => return Err(DeliveryError::Unreachable(to)),
        };
        let rate = self.radio.carrier_rate(self.cqi_of(device));
        if !(rate > 0.0) {
            return Err(DeliveryError::Unreachable(device.into()));
        }
        let bits = msg.wire_bits(self.sizes, self.key_bits);
        let total = bits.useful + bits.security;
        let ttis = ((total as f64 * 1000.0 / rate).ceil() as u64).max(1);
        let at = self.now.plus(ttis);
        if let NodeId::Device(d) = from {
            self.charge_message(d, Link::NbIot, Side::Tx, rate, &msg, bits, false);
        }
        if let NodeId::Device(d) = to {
            self.charge_message(d, Link::NbIot, Side::Rx, rate, &msg, bits, false);
        }
        self.queue.push(at, Event::Deliver { from, to, msg, bits: total });
        Ok(at)
    }

    fn downlink_data(
        &mut self,
        to: &[DeviceId],
        msg: ProtocolMessage,
        rate: f64,
    ) -> Result<Tti, DeliveryError> {
        let bits = msg.wire_bits(self.sizes, self.key_bits);
        let total = bits.useful + bits.security;
        let start = self.now.max(self.dl_busy_until);
        let airtime = self
            .radio
            .frame
            .airtime_from(total, rate, Direction::Downlink, start)
            .map_err(|_| DeliveryError::Unreachable(NodeId::Henb))?;
        let at = start.plus(airtime.max(1));
        self.dl_busy_until = at;
        for &d in to {
            self.charge_message(d, Link::NbIot, Side::Rx, rate, &msg, bits, false);
            self.queue.push(
                at,
                Event::Deliver {
                    from: NodeId::Henb,
                    to: d.into(),
                    msg: msg.clone(),
                    bits: total,
                },
            );
        }
        Ok(at)
    }

    fn send_sidelink(
        &mut self,
        from: DeviceId,
        to: DeviceId,
        data: Arc<SidelinkData>,
        cqi: u8,
    ) -> Result<(), DeliveryError> {
        let msg = ProtocolMessage::SidelinkData(data.clone());
        let bits = msg.wire_bits(self.sizes, self.key_bits);
        let id = self.transfers.len() as u64;
        let tampered = self.pending_tamper.remove(&(from, to));
        self.sidelink
            .add(self.now, id, cqi, bits.useful + bits.security)
            .map_err(|_| DeliveryError::Unreachable(to.into()))?;
        self.transfers.push(SidelinkTransfer {
            from,
            to,
            data,
            payload_bits: bits.useful,
            tampered,
            start: self.now.next_frame_boundary(),
            scheduled: None,
            delivered: false,
        });
        self.resync_sidelink();
        Ok(())
    }

    fn set_timer(&mut self, node: NodeId, at: Tti, timer: Timer) {
        self.queue.push(at.max(self.now), Event::Timer { node, timer });
    }

    fn meter(&mut self, device: DeviceId, op: CryptoOp) {
        self.ledger
            .charge(device, Category::Security, self.energy.crypto(op));
    }

    fn audit(&mut self, event: AuditEvent) {
        if let AuditEvent::Tampered { relay, receiver } = event {
            self.pending_tamper.insert((relay, receiver));
        }
        self.audits.push(event);
    }
}
