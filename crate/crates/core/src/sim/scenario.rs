use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use crate::ids::{DeviceId, NodeId};
use crate::radio::Position;
use crate::trust::{sample_srf, SocialGraph};

const STREAM_POSITION: u64 = 1;
const STREAM_MALICIOUS: u64 = 2;
const STREAM_SRF: u64 = 3;
const STREAM_DRX: u64 = 4;
const STREAM_KEYS: u64 = 5;
const STREAM_PAYLOAD: u64 = 6;

/// Independent sub-stream per purpose, so changing one knob (say the
/// malicious fraction) leaves every other draw untouched.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub position: Position,
    pub malicious: bool,
    pub srf: f64,
    pub drx_cycle: u64,
    pub downlink_cqi: u8,
    /// Sidelink CQI towards every peer within D2D range.
    pub d2d_cqi: BTreeMap<DeviceId, u8>,
    #[serde(with = "hex::serde")]
    pub subscription_key: [u8; 32],
    #[serde(with = "hex::serde")]
    pub signing_seed: [u8; 32],
    pub key_rng_seed: u64,
    pub tamper_rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub devices: Vec<DeviceSpec>,
    #[serde(with = "hex::serde")]
    pub gateway_seed: [u8; 32],
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn malicious_count(&self) -> usize {
        self.devices.iter().filter(|d| d.malicious).count()
    }

    /// Deterministic payload of `file_bits` (rounded up to whole bytes).
    pub fn payload(&self) -> Vec<u8> {
        let mut data = vec![0u8; self.config.file_bits.div_ceil(8) as usize];
        substream(self.config.seed, STREAM_PAYLOAD).fill_bytes(&mut data);
        data
    }
}

fn annulus_position<R: Rng>(rng: &mut R, inner: f64, outer: f64) -> Position {
    let u: f64 = rng.random();
    let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Position::from_polar(r, theta)
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    config.validate()?;
    let n = config.devices as usize;
    let seed = config.seed;
    let ids: Vec<DeviceId> = (0..config.devices).map(DeviceId).collect();

    let outer = config.cell_radius_m;
    let inner = outer * config.edge_inner_fraction;
    let mut pos_rng = substream(seed, STREAM_POSITION);
    let positions: Vec<Position> = (0..n)
        .map(|_| annulus_position(&mut pos_rng, inner, outer))
        .collect();

    // Prefixes of one permutation: raising the fraction only adds devices.
    let mut order = ids.clone();
    order.shuffle(&mut substream(seed, STREAM_MALICIOUS));
    let mut malicious = vec![false; n];
    for d in order.iter().take(config.malicious_count() as usize) {
        malicious[d.0 as usize] = true;
    }

    let srf: Vec<f64> = match &config.trust.social_graph {
        Some(path) => {
            let graph = SocialGraph::load(path)
                .map_err(|e| ConfigError::new("trust.social_graph", e.to_string()))?;
            let table = graph.srf_table(&config.trust.coefficients);
            ids.iter().map(|d| table.get(d).copied().unwrap_or(0.0)).collect()
        }
        None => {
            let mut rng = substream(seed, STREAM_SRF);
            malicious.iter().map(|&m| sample_srf(m, &mut rng)).collect()
        }
    };

    let mut drx_rng = substream(seed, STREAM_DRX);
    let cycles = &config.drx_cycles_tti;
    let drx: Vec<u64> = (0..n)
        .map(|_| cycles[drx_rng.random_range(0..cycles.len())])
        .collect();

    let radio = &config.radio;
    let channel = &radio.channel;
    let mut key_rng = substream(seed, STREAM_KEYS);
    let mut gateway_seed = [0u8; 32];
    key_rng.fill_bytes(&mut gateway_seed);

    let mut devices = Vec::with_capacity(n);
    for (i, &id) in ids.iter().enumerate() {
        let p = positions[i];
        let dl_shadow = channel.shadowing_db(seed, NodeId::Henb, id.into());
        let downlink_cqi = radio.downlink_cqi(&p, dl_shadow);
        let mut d2d_cqi = BTreeMap::new();
        for (j, &peer) in ids.iter().enumerate() {
            if i == j || p.distance(&positions[j]) > radio.d2d_range_m {
                continue;
            }
            let shadow = channel.shadowing_db(seed, id.into(), peer.into());
            d2d_cqi.insert(peer, radio.sidelink_cqi(&p, &positions[j], shadow));
        }
        let mut subscription_key = [0u8; 32];
        let mut signing_seed = [0u8; 32];
        key_rng.fill_bytes(&mut subscription_key);
        key_rng.fill_bytes(&mut signing_seed);
        devices.push(DeviceSpec {
            id,
            position: p,
            malicious: malicious[i],
            srf: srf[i],
            drx_cycle: drx[i],
            downlink_cqi,
            d2d_cqi,
            subscription_key,
            signing_seed,
            key_rng_seed: key_rng.next_u64(),
            tamper_rng_seed: key_rng.next_u64(),
        });
    }

    Ok(Scenario {
        config: config.clone(),
        devices,
        gateway_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u32, f: f64) -> ScenarioConfig {
        ScenarioConfig {
            devices: n,
            malicious_fraction: f,
            ..Default::default()
        }
    }

    #[test]
    fn zero_fraction_has_no_malicious() {
        let s = generate_scenario(&cfg(100, 0.0)).unwrap();
        assert_eq!(s.malicious_count(), 0);
    }

    #[test]
    fn count_is_deterministic() {
        let s = generate_scenario(&cfg(1000, 0.6)).unwrap();
        assert_eq!(s.malicious_count(), 600);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_scenario(&cfg(50, 0.3)).unwrap();
        let b = generate_scenario(&cfg(50, 0.3)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.payload(), b.payload());
    }

    #[test]
    fn fraction_out_of_range() {
        let err = generate_scenario(&cfg(10, -0.1)).unwrap_err();
        assert_eq!(err.field, "malicious_fraction");
    }

    #[test]
    fn malicious_sets_are_nested() {
        let lo = generate_scenario(&cfg(200, 0.2)).unwrap();
        let hi = generate_scenario(&cfg(200, 0.5)).unwrap();
        for (a, b) in lo.devices.iter().zip(&hi.devices) {
            assert!(!a.malicious || b.malicious);
            assert_eq!(a.position, b.position);
            assert_eq!(a.d2d_cqi, b.d2d_cqi);
        }
    }

    #[test]
    fn positions_in_annulus() {
        let s = generate_scenario(&cfg(300, 0.0)).unwrap();
        for d in &s.devices {
            let r = d.position.radius();
            assert!((700.0 - 1e-9..=1000.0 + 1e-9).contains(&r));
        }
    }

    #[test]
    fn malicious_srf_capped() {
        let s = generate_scenario(&cfg(300, 0.5)).unwrap();
        for d in s.devices.iter().filter(|d| d.malicious) {
            assert!(d.srf <= 0.4);
        }
    }
}
