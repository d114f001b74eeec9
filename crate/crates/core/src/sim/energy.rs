use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::CryptoOp;
use crate::ids::DeviceId;

/// Energy constants. Per-bit radio costs hold at the reference rate and
/// scale with `ref_rate / rate`, i.e. constant power over the airtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub nbiot_ref_rate_bps: f64,
    pub nbiot_tx_j_per_bit: f64,
    pub nbiot_rx_j_per_bit: f64,
    pub sidelink_ref_rate_bps: f64,
    pub sidelink_tx_j_per_bit: f64,
    pub sidelink_rx_j_per_bit: f64,
    /// Fixed cost of sending or receiving any message.
    pub message_baseline_j: f64,
    pub encrypt_j_per_bit: f64,
    pub decrypt_j_per_bit: f64,
    pub sign_j: f64,
    pub verify_j: f64,
    pub tag_j: f64,
    pub dh_exp_j: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            nbiot_ref_rate_bps: 100e3,
            nbiot_tx_j_per_bit: 2e-6,
            nbiot_rx_j_per_bit: 1e-6,
            sidelink_ref_rate_bps: 1e6,
            sidelink_tx_j_per_bit: 2e-7,
            sidelink_rx_j_per_bit: 1e-7,
            message_baseline_j: 5e-4,
            encrypt_j_per_bit: 1e-8,
            decrypt_j_per_bit: 1e-8,
            sign_j: 2e-3,
            verify_j: 2e-3,
            tag_j: 5e-5,
            dh_exp_j: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    NbIot,
    Sidelink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("nbiot_ref_rate_bps", self.nbiot_ref_rate_bps),
            ("nbiot_tx_j_per_bit", self.nbiot_tx_j_per_bit),
            ("nbiot_rx_j_per_bit", self.nbiot_rx_j_per_bit),
            ("sidelink_ref_rate_bps", self.sidelink_ref_rate_bps),
            ("sidelink_tx_j_per_bit", self.sidelink_tx_j_per_bit),
            ("sidelink_rx_j_per_bit", self.sidelink_rx_j_per_bit),
            ("message_baseline_j", self.message_baseline_j),
            ("encrypt_j_per_bit", self.encrypt_j_per_bit),
            ("decrypt_j_per_bit", self.decrypt_j_per_bit),
            ("sign_j", self.sign_j),
            ("verify_j", self.verify_j),
            ("tag_j", self.tag_j),
            ("dh_exp_j", self.dh_exp_j),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("energy.{name} must be a finite non-negative number, got {v}"));
            }
        }
        if self.nbiot_ref_rate_bps == 0.0 || self.sidelink_ref_rate_bps == 0.0 {
            return Err("energy reference rates must be positive".into());
        }
        Ok(())
    }

    pub fn per_bit(&self, link: Link, side: Side, rate: f64) -> f64 {
        let (reference, cost) = match (link, side) {
            (Link::NbIot, Side::Tx) => (self.nbiot_ref_rate_bps, self.nbiot_tx_j_per_bit),
            (Link::NbIot, Side::Rx) => (self.nbiot_ref_rate_bps, self.nbiot_rx_j_per_bit),
            (Link::Sidelink, Side::Tx) => (self.sidelink_ref_rate_bps, self.sidelink_tx_j_per_bit),
            (Link::Sidelink, Side::Rx) => (self.sidelink_ref_rate_bps, self.sidelink_rx_j_per_bit),
        };
        if rate > 0.0 {
            cost * reference / rate
        } else {
            0.0
        }
    }

    pub fn crypto(&self, op: CryptoOp) -> f64 {
        match op {
            CryptoOp::DhExp => self.dh_exp_j,
            CryptoOp::Encrypt { bits } => self.encrypt_j_per_bit * bits as f64,
            CryptoOp::Decrypt { bits } => self.decrypt_j_per_bit * bits as f64,
            CryptoOp::Sign => self.sign_j,
            CryptoOp::Verify => self.verify_j,
            CryptoOp::Tag | CryptoOp::VerifyTag => self.tag_j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    Useful,
    Malicious,
    Security,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceEnergy {
    pub e_useful: f64,
    pub e_malicious: f64,
    pub e_security: f64,
}

impl DeviceEnergy {
    pub fn e_total(&self) -> f64 {
        self.e_useful + self.e_malicious + self.e_security
    }

    pub fn add(&mut self, category: Category, joules: f64) {
        let j = joules.max(0.0);
        match category {
            Category::Useful => self.e_useful += j,
            Category::Malicious => self.e_malicious += j,
            Category::Security => self.e_security += j,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    devices: BTreeMap<DeviceId, DeviceEnergy>,
}

impl EnergyLedger {
    pub fn charge(&mut self, device: DeviceId, category: Category, joules: f64) {
        self.devices.entry(device).or_default().add(category, joules);
    }

    pub fn get(&self, device: DeviceId) -> DeviceEnergy {
        self.devices.get(&device).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DeviceId, &DeviceEnergy)> {
        self.devices.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_scaling_is_linear() {
        let m = EnergyModel::default();
        assert_eq!(m.per_bit(Link::NbIot, Side::Rx, 100e3), 1e-6);
        assert!((m.per_bit(Link::NbIot, Side::Rx, 50e3) - 2e-6).abs() < 1e-18);
        assert_eq!(m.per_bit(Link::Sidelink, Side::Tx, 0.0), 0.0);
    }

    #[test]
    fn ledger_conserves() {
        let mut l = EnergyLedger::default();
        l.charge(DeviceId(1), Category::Useful, 1.0);
        l.charge(DeviceId(1), Category::Security, 0.5);
        l.charge(DeviceId(1), Category::Malicious, 0.25);
        let e = l.get(DeviceId(1));
        assert_eq!(e.e_total(), e.e_useful + e.e_malicious + e.e_security);
        assert_eq!(e.e_total(), 1.75);
        assert_eq!(l.get(DeviceId(2)).e_total(), 0.0);
    }

    #[test]
    fn negative_inputs_rejected() {
        let m = EnergyModel {
            sign_j: -1.0,
            ..Default::default()
        };
        assert!(m.validate().unwrap_err().contains("sign_j"));
    }
}
