use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use super::energy::{DeviceEnergy, EnergyLedger};
use super::metrics::{self, DetectionStats};
use super::results::ResultRow;
use super::scenario::{generate_scenario, Scenario};
use super::world::{Event, World};
use crate::crypto::{KeyRegistry, SignerId, SymmetricKey};
use crate::ids::{DeviceId, NodeId, Tti};
use crate::protocol::trace::TraceRecord;
use crate::protocol::{
    AlarmOutcome, AuditEvent, CoreNetwork, DeliveryStatus, Device, DeviceSetup, Henb, HenbSetup,
    ProtocolMessage, Role, Variant,
};
use crate::trust::TrustLedger;

const SERVICE_ID: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Runtime(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub keep_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceOutcome {
    pub id: DeviceId,
    pub role: Role,
    pub status: DeliveryStatus,
    pub malicious: bool,
    /// Below the serve-direct CQI, i.e. a relay candidate receiver.
    pub edge: bool,
    pub corrupted: bool,
    pub energy: DeviceEnergy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub row: ResultRow,
    pub config_hash: String,
    pub edge_devices: usize,
    /// Edge devices left without the payload; excluded from download energy.
    pub unserved_edge: usize,
    pub relays: usize,
    pub sidelink_transfers: usize,
    pub corrupted_transfers: usize,
    pub detection: DetectionStats,
    pub phase_violations: usize,
    pub final_tti: u64,
    pub outcomes: Vec<DeviceOutcome>,
    pub trace: Vec<TraceRecord>,
    pub audits: Vec<AuditEvent>,
}

/// Generates the scenario for `config` and runs its configured variant.
pub fn run_config(config: &ScenarioConfig, opts: RunOptions) -> Result<RunResult, RunError> {
    let scenario = generate_scenario(config)?;
    run(&scenario, config.variant, opts)
}

/// One multicast session of `variant` over `scenario`.
pub fn run(scenario: &Scenario, variant: Variant, opts: RunOptions) -> Result<RunResult, RunError> {
    let mut config = scenario.config.clone();
    config.variant = variant;
    let runtime = |e: &dyn std::fmt::Display| RunError::Runtime(e.to_string());

    let params = Arc::new(config.protocol.clone());
    let dhke = Arc::new(config.crypto.dhke.clone());
    let cipher = config.crypto.suite.cipher;

    let mut registry = KeyRegistry::default();
    let gateway = registry.register(SignerId::Gateway, scenario.gateway_seed);
    let signers: Vec<_> = scenario
        .devices
        .iter()
        .map(|d| registry.register(SignerId::Device(d.id), d.signing_seed))
        .collect();
    let directory = registry.directory();

    let ids: Vec<DeviceId> = scenario.devices.iter().map(|d| d.id).collect();
    let mut core = CoreNetwork::new(ids.iter().copied(), gateway);
    core.subscribe(SERVICE_ID, ids.iter().copied()).map_err(|e| runtime(&e))?;
    let payload = core
        .initialize(scenario.payload(), variant.is_secure())
        .map_err(|e| runtime(&e))?;
    let drx: BTreeMap<DeviceId, u64> = scenario.devices.iter().map(|d| (d.id, d.drx_cycle)).collect();
    let subgroups = core
        .page(&drx, Tti(config.protocol.session_start))
        .map_err(|e| runtime(&e))?;

    let keys: BTreeMap<DeviceId, SymmetricKey> = scenario
        .devices
        .iter()
        .map(|d| (d.id, SymmetricKey::from_bytes(d.subscription_key)))
        .collect();
    let ledger = TrustLedger::from_srf(variant.nrv_mode(), ids.iter().map(|&d| (d, 0.0)))
        .map_err(|e| runtime(&e))?;
    let mut henb = Henb::new(HenbSetup {
        variant,
        params: params.clone(),
        dhke: dhke.clone(),
        cipher,
        thresholds: config.trust.thresholds,
        table: config.radio.spectral_efficiency.clone(),
        keys: keys.clone(),
        directory: directory.clone(),
        ledger,
    });
    let mut devices: Vec<Device> = scenario
        .devices
        .iter()
        .zip(signers)
        .map(|(d, signer)| {
            Device::new(DeviceSetup {
                id: d.id,
                variant,
                params: params.clone(),
                dhke: dhke.clone(),
                cipher,
                subscription_key: keys[&d.id],
                signer,
                directory: directory.clone(),
                downlink_cqi: d.downlink_cqi,
                d2d_cqi: d.d2d_cqi.clone(),
                srf: d.srf,
                malicious: d.malicious,
                tamper_prob: config.tamper_prob,
                key_rng: ChaCha8Rng::seed_from_u64(d.key_rng_seed),
                tamper_rng: ChaCha8Rng::seed_from_u64(d.tamper_rng_seed),
            })
        })
        .collect();

    let sizes = config.protocol.message_sizes.clone();
    let mut world = World::new(
        &config.radio,
        &config.energy,
        &sizes,
        dhke.modulus_bits(),
        scenario.devices.iter().map(|d| d.downlink_cqi).collect(),
    );

    henb.begin_session(subgroups, payload);
    while let Some(wake) = henb.next_subgroup_wake() {
        world.now = world.now.max(wake);
        henb.start_next_subgroup(&mut world);
        drain(&mut world, &mut henb, &mut devices);
    }
    henb.end_session();
    for d in &mut devices {
        d.close();
    }

    let phase_violations = henb.phases().violations().len();
    let final_tti = world.now.0;
    let mut result = summarize(
        &config,
        &devices,
        world.transfers.iter().filter(|t| t.delivered).map(|t| (t.from, t.to, t.payload_bits, t.tampered)).collect(),
        &world.audits,
        &world.ledger,
        phase_violations,
        final_tti,
        if opts.keep_trace { std::mem::take(&mut world.trace) } else { Vec::new() },
    );
    if opts.keep_trace {
        result.audits = std::mem::take(&mut world.audits);
    }
    Ok(result)
}

fn drain(world: &mut World<'_>, henb: &mut Henb, devices: &mut [Device]) {
    while let Some((t, ev)) = world.queue.pop() {
        world.now = t;
        match ev {
            Event::Deliver { from, to, msg, bits } => {
                world.record_delivery(from, to, &msg, bits);
                match to {
                    NodeId::Henb => henb.on_message(world, from, msg),
                    NodeId::Device(d) => {
                        if let Some(dev) = devices.get_mut(d.0 as usize) {
                            dev.on_message(world, from, msg);
                        }
                    }
                }
            }
            Event::Timer { node, timer } => match node {
                NodeId::Henb => henb.on_timer(world, timer),
                NodeId::Device(d) => {
                    if let Some(dev) = devices.get_mut(d.0 as usize) {
                        dev.on_timer(world, timer);
                    }
                }
            },
            Event::SidelinkDone { id } => {
                if let Some(tr) = world.complete_sidelink(id) {
                    let msg = ProtocolMessage::SidelinkData(tr.data);
                    devices[tr.to.0 as usize].on_message(world, tr.from.into(), msg);
                    devices[tr.from.0 as usize].on_sidelink_sent(world, tr.to);
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    config: &ScenarioConfig,
    devices: &[Device],
    transfers: Vec<(DeviceId, DeviceId, u64, bool)>,
    audits: &[AuditEvent],
    ledger: &EnergyLedger,
    phase_violations: usize,
    final_tti: u64,
    trace: Vec<TraceRecord>,
) -> RunResult {
    let variant = config.variant;
    let serve_direct = config.protocol.selection.serve_direct_cqi;
    let corrupted_to: BTreeSet<DeviceId> = transfers.iter().filter(|t| t.3).map(|t| t.1).collect();

    let outcomes: Vec<DeviceOutcome> = devices
        .iter()
        .map(|d| DeviceOutcome {
            id: d.id(),
            role: d.role(),
            status: d.status(),
            malicious: d.is_malicious(),
            edge: d.role() != Role::Unpaged && d.downlink_cqi() < serve_direct,
            corrupted: corrupted_to.contains(&d.id()),
            energy: ledger.get(d.id()),
        })
        .collect();
    let edge: Vec<&DeviceOutcome> = outcomes.iter().filter(|o| o.edge).collect();
    let accepted = |o: &DeviceOutcome| matches!(o.status, DeliveryStatus::Accepted { .. });

    let capacity: Vec<(u64, bool)> = transfers.iter().map(|t| (t.2, t.3)).collect();
    let good_bits: Vec<u64> = edge
        .iter()
        .map(|o| if accepted(o) && !o.corrupted { config.file_bits } else { 0 })
        .collect();
    let wasted_energy = metrics::mean(
        edge.iter()
            .map(|o| metrics::wasted_energy_fraction(&o.energy, variant)),
    );
    let relay_energy: Vec<DeviceEnergy> = outcomes
        .iter()
        .filter(|o| o.role == Role::Relay)
        .map(|o| o.energy)
        .collect();
    let receiver_energy: Vec<DeviceEnergy> = edge
        .iter()
        .filter(|o| o.role == Role::Receiver)
        .map(|o| o.energy)
        .collect();
    let (relay_sec, receiver_sec) =
        metrics::security_energy_pct(&relay_energy, &receiver_energy, variant);
    let served: Vec<&&DeviceOutcome> = edge.iter().filter(|o| accepted(o)).collect();
    let download = metrics::mean(served.iter().map(|o| o.energy.e_total()));

    let fallback = audits
        .iter()
        .any(|a| matches!(a, AuditEvent::PairingFallback { .. }));

    let tampered: BTreeSet<(DeviceId, DeviceId)> =
        transfers.iter().filter(|t| t.3).map(|t| (t.0, t.1)).collect();
    let mut confirmed: BTreeMap<(DeviceId, DeviceId), usize> = BTreeMap::new();
    let mut mdc_increments = 0;
    for a in audits {
        match a {
            AuditEvent::Alarm {
                relay,
                receiver,
                outcome: AlarmOutcome::Confirmed,
            } => *confirmed.entry((*relay, *receiver)).or_default() += 1,
            AuditEvent::MdcIncrement { .. } => mdc_increments += 1,
            _ => {}
        }
    }
    let mut detection = DetectionStats {
        mdc_increments,
        ..Default::default()
    };
    if variant.is_secure() {
        for &(relay, receiver) in &tampered {
            if outcomes[receiver.0 as usize].status == DeliveryStatus::Alarmed {
                detection.verified_corrupted += 1;
                if confirmed.get(&(relay, receiver)) == Some(&1) {
                    detection.correctly_attributed += 1;
                }
            }
        }
        detection.false_increments = confirmed
            .iter()
            .filter(|(pair, _)| !tampered.contains(pair))
            .map(|(_, n)| *n)
            .sum();
    }

    let row = ResultRow {
        seed: config.seed,
        variant,
        malicious_pct: (config.malicious_fraction * 100.0 * 1e6).round() / 1e6,
        file_bits: config.file_bits,
        wasted_capacity_pct: metrics::wasted_capacity_pct(&capacity),
        mean_noncorrupted_kbits: metrics::mean_noncorrupted_kbits(&good_bits),
        wasted_energy_frac: wasted_energy,
        relay_sec_pct: relay_sec,
        receiver_sec_pct: receiver_sec,
        download_energy_j: download,
        fallback_flag: fallback,
    };
    RunResult {
        row,
        config_hash: config.hash(),
        edge_devices: edge.len(),
        unserved_edge: edge.len() - served.len(),
        relays: relay_energy.len(),
        sidelink_transfers: transfers.len(),
        corrupted_transfers: tampered.len(),
        detection,
        phase_violations,
        final_tti,
        outcomes,
        trace,
        audits: Vec::new(),
    }
}
