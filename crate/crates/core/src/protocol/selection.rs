use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::DeviceId;
use crate::radio::CqiReport;
use crate::trust::ReliabilityClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionParams {
    /// Devices at or above this downlink CQI are served by the multicast.
    pub serve_direct_cqi: u8,
    /// Minimum sidelink CQI for a relay-receiver pair.
    pub cqi_threshold: u8,
    /// Receivers one relay may serve per session.
    pub r_max: u32,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            serve_direct_cqi: 3,
            cqi_threshold: 1,
            r_max: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairAssignment {
    /// receiver -> relay
    pub pairs: BTreeMap<DeviceId, DeviceId>,
    pub direct: BTreeSet<DeviceId>,
    pub receivers: BTreeSet<DeviceId>,
    /// Set when some receiver found no relay; everyone then gets the multicast.
    pub fallback: bool,
}

impl PairAssignment {
    pub fn relay_of(&self, receiver: DeviceId) -> Option<DeviceId> {
        self.pairs.get(&receiver).copied()
    }

    pub fn receivers_of(&self, relay: DeviceId) -> impl Iterator<Item = DeviceId> + '_ {
        self.pairs
            .iter()
            .filter(move |(_, r)| **r == relay)
            .map(|(rx, _)| *rx)
    }

    pub fn is_relay(&self, device: DeviceId) -> bool {
        self.pairs.values().any(|r| *r == device)
    }

    pub fn relay_loads(&self) -> BTreeMap<DeviceId, u32> {
        let mut loads = BTreeMap::new();
        for r in self.pairs.values() {
            *loads.entry(*r).or_insert(0) += 1;
        }
        loads
    }

    /// Either every receiver is paired or none is and the fallback flag is set.
    pub fn is_total(&self) -> bool {
        if self.fallback {
            self.pairs.is_empty()
        } else {
            self.receivers.iter().all(|r| self.pairs.contains_key(r))
                && self.pairs.len() == self.receivers.len()
        }
    }
}

/// Splits reporters into direct devices and receivers, then pairs receivers
/// with relays class by class (High, Medium, Low). Inside a class, candidate
/// pairs are taken in order of sidelink CQI (highest first), then relay id,
/// then receiver id, skipping matched receivers and full relays.
pub fn select_d2d_pairs<F>(reports: &[CqiReport], class_of: F, params: &SelectionParams) -> PairAssignment
where
    F: Fn(DeviceId) -> ReliabilityClass,
{
    let mut out = PairAssignment::default();
    let by_id: BTreeMap<DeviceId, &CqiReport> = reports.iter().map(|r| (r.device, r)).collect();
    for r in by_id.values() {
        if r.downlink_cqi >= params.serve_direct_cqi {
            out.direct.insert(r.device);
        } else {
            out.receivers.insert(r.device);
        }
    }
    if out.receivers.is_empty() {
        return out;
    }
    let classes: BTreeMap<DeviceId, ReliabilityClass> =
        out.direct.iter().map(|&d| (d, class_of(d))).collect();
    let mut load: BTreeMap<DeviceId, u32> = BTreeMap::new();
    for class in ReliabilityClass::SCAN_ORDER {
        if out.pairs.len() == out.receivers.len() {
            break;
        }
        let mut edges: Vec<(u8, DeviceId, DeviceId)> = Vec::new();
        for &rx in &out.receivers {
            if out.pairs.contains_key(&rx) {
                continue;
            }
            for (&relay, &cls) in &classes {
                if cls != class {
                    continue;
                }
                let cqi = sidelink_cqi(&by_id, relay, rx);
                if cqi >= params.cqi_threshold.max(1) {
                    edges.push((cqi, relay, rx));
                }
            }
        }
        edges.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, relay, rx) in edges {
            let l = load.entry(relay).or_insert(0);
            if *l >= params.r_max || out.pairs.contains_key(&rx) {
                continue;
            }
            *l += 1;
            out.pairs.insert(rx, relay);
        }
    }
    if out.pairs.len() < out.receivers.len() {
        out.pairs.clear();
        out.fallback = true;
    }
    out
}

/// Receiver-measured CQI, or the relay's measurement when the receiver has
/// none; the weaker of the two when both exist.
fn sidelink_cqi(reports: &BTreeMap<DeviceId, &CqiReport>, relay: DeviceId, rx: DeviceId) -> u8 {
    let a = reports.get(&rx).and_then(|r| r.d2d_cqi.get(&relay)).copied();
    let b = reports.get(&relay).and_then(|r| r.d2d_cqi.get(&rx)).copied();
    match (a, b) {
        (Some(a), Some(b)) => a.min(b),
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust::{ClassThresholds, TrustLedger, NrvMode};

    fn report(id: u32, dl: u8, peers: &[(u32, u8)]) -> CqiReport {
        let mut r = CqiReport::new(DeviceId(id), dl).unwrap();
        for &(p, c) in peers {
            r = r.with_peer(DeviceId(p), c).unwrap();
        }
        r
    }

    fn classes(ledger: TrustLedger) -> impl Fn(DeviceId) -> ReliabilityClass {
        let t = ClassThresholds::default();
        move |d| ledger.class_of(d, &t).unwrap()
    }

    #[test]
    fn high_class_preferred() {
        let reports = vec![report(1, 9, &[]), report(2, 9, &[]), report(10, 1, &[(1, 5), (2, 12)])];
        let ledger =
            TrustLedger::from_srf(NrvMode::Social, [(DeviceId(1), 0.9), (DeviceId(2), 0.5), (DeviceId(10), 0.5)]).unwrap();
        let a = select_d2d_pairs(&reports, classes(ledger), &SelectionParams::default());
        assert_eq!(a.relay_of(DeviceId(10)), Some(DeviceId(1)));
        assert!(!a.fallback);
        assert!(a.is_total());
    }

    #[test]
    fn banned_only_candidate_falls_back() {
        let reports = vec![report(1, 9, &[]), report(10, 1, &[(1, 9)])];
        let mut ledger =
            TrustLedger::from_srf(NrvMode::Social, [(DeviceId(1), 0.9), (DeviceId(10), 0.5)]).unwrap();
        ledger.record_malicious(DeviceId(1)).unwrap();
        ledger.record_malicious(DeviceId(1)).unwrap();
        let a = select_d2d_pairs(&reports, classes(ledger), &SelectionParams::default());
        assert!(a.fallback);
        assert!(a.pairs.is_empty());
        assert!(a.is_total());
    }

    #[test]
    fn capacity_pushes_second_receiver_down_a_class() {
        let reports = vec![
            report(1, 9, &[]),
            report(2, 9, &[]),
            report(10, 1, &[(1, 8), (2, 6)]),
            report(11, 1, &[(1, 11), (2, 6)]),
        ];
        let ledger = TrustLedger::from_srf(
            NrvMode::Social,
            [(DeviceId(1), 0.9), (DeviceId(2), 0.5), (DeviceId(10), 0.0), (DeviceId(11), 0.0)],
        )
        .unwrap();
        let a = select_d2d_pairs(&reports, classes(ledger), &SelectionParams::default());
        assert_eq!(a.relay_of(DeviceId(11)), Some(DeviceId(1)));
        assert_eq!(a.relay_of(DeviceId(10)), Some(DeviceId(2)));
    }

    #[test]
    fn ties_go_to_lower_relay_id() {
        let reports = vec![report(3, 9, &[]), report(2, 9, &[]), report(10, 0, &[(3, 7), (2, 7)])];
        let a = select_d2d_pairs(&reports, |_| ReliabilityClass::Low, &SelectionParams::default());
        assert_eq!(a.relay_of(DeviceId(10)), Some(DeviceId(2)));
    }

    #[test]
    fn no_receivers_no_pairs() {
        let reports = vec![report(1, 9, &[]), report(2, 4, &[])];
        let a = select_d2d_pairs(&reports, |_| ReliabilityClass::High, &SelectionParams::default());
        assert!(a.receivers.is_empty() && !a.fallback && a.direct.len() == 2);
    }

    #[test]
    fn sidelink_below_threshold_is_infeasible() {
        let reports = vec![report(1, 9, &[]), report(10, 1, &[(1, 2)])];
        let p = SelectionParams {
            cqi_threshold: 3,
            ..Default::default()
        };
        assert!(select_d2d_pairs(&reports, |_| ReliabilityClass::High, &p).fallback);
    }
}
