#![allow(dead_code)]

use std::collections::BTreeMap;

use mtms_core::ids::DeviceId;
use mtms_core::protocol::{PairAssignment, SelectionParams};
use mtms_core::radio::CqiReport;
use mtms_core::trust::ReliabilityClass;
use rand::Rng;

/// Primes below `limit` by sieve.
pub fn primes_below(limit: usize) -> Vec<u64> {
    let mut sieve = vec![true; limit];
    sieve[0] = false;
    if limit > 1 {
        sieve[1] = false;
    }
    let mut i = 2;
    while i * i < limit {
        if sieve[i] {
            let mut j = i * i;
            while j < limit {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (0..limit).filter(|&n| sieve[n]).map(|n| n as u64).collect()
}

/// `base^exp mod q` by `exp` repeated multiplications.
pub fn brute_pow(base: u64, exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    for _ in 0..exp {
        acc = acc * (base % q) % q;
    }
    acc
}

/// Multiplicative order of `a` mod prime `q`, counted step by step.
pub fn brute_order(a: u64, q: u64) -> u64 {
    let mut x = a % q;
    let mut k = 1;
    while x != 1 {
        x = x * a % q;
        k += 1;
    }
    k
}

pub fn smallest_generator(q: u64) -> u64 {
    (2..q).find(|&a| brute_order(a, q) == q - 1).expect("prime has a generator")
}

/// Random reports for `n` devices with sparse sidelink measurements.
pub fn random_topology<R: Rng>(rng: &mut R, n: u32) -> Vec<CqiReport> {
    let mut reports: Vec<CqiReport> = (0..n)
        .map(|i| CqiReport::new(DeviceId(i), rng.random_range(0..=15)).unwrap())
        .collect();
    let density: f64 = rng.random();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                let cqi = rng.random_range(0..=15);
                let r = reports[i as usize].clone().with_peer(DeviceId(j), cqi).unwrap();
                reports[i as usize] = r;
            }
        }
    }
    reports
}

pub fn random_classes<R: Rng>(rng: &mut R, n: u32) -> BTreeMap<DeviceId, ReliabilityClass> {
    let all = [
        ReliabilityClass::Banned,
        ReliabilityClass::High,
        ReliabilityClass::Medium,
        ReliabilityClass::Low,
    ];
    (0..n).map(|i| (DeviceId(i), all[rng.random_range(0..4)])).collect()
}

/// Checks an assignment against the selection rules from scratch. Returns
/// a description of the first rule broken.
pub fn check_assignment(
    reports: &[CqiReport],
    classes: &BTreeMap<DeviceId, ReliabilityClass>,
    params: &SelectionParams,
    out: &PairAssignment,
) -> Result<(), String> {
    let rep: BTreeMap<DeviceId, &CqiReport> = reports.iter().map(|r| (r.device, r)).collect();
    for r in reports {
        let direct = r.downlink_cqi >= params.serve_direct_cqi;
        if direct != out.direct.contains(&r.device) || direct == out.receivers.contains(&r.device) {
            return Err(format!("{} misfiled", r.device));
        }
    }
    if out.fallback {
        if !out.pairs.is_empty() {
            return Err("fallback with pairs left over".into());
        }
        return Ok(());
    }
    if out.pairs.len() != out.receivers.len() {
        return Err(format!("{} of {} receivers matched", out.pairs.len(), out.receivers.len()));
    }
    let mut load: BTreeMap<DeviceId, u32> = BTreeMap::new();
    for (rx, relay) in &out.pairs {
        if !out.receivers.contains(rx) || !out.direct.contains(relay) {
            return Err(format!("bad pair {rx} <- {relay}"));
        }
        if classes[relay] == ReliabilityClass::Banned {
            return Err(format!("banned relay {relay}"));
        }
        let a = rep[rx].d2d_cqi.get(relay).copied();
        let b = rep[relay].d2d_cqi.get(rx).copied();
        let cqi = match (a, b) {
            (Some(a), Some(b)) => a.min(b),
            (Some(c), None) | (None, Some(c)) => c,
            (None, None) => 0,
        };
        if cqi == 0 || cqi < params.cqi_threshold {
            return Err(format!("pair {rx} <- {relay} below threshold"));
        }
        *load.entry(*relay).or_default() += 1;
    }
    if load.values().any(|&l| l > params.r_max) {
        return Err("relay over capacity".into());
    }
    Ok(())
}
