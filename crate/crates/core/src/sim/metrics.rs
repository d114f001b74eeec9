use serde::{Deserialize, Serialize};

use super::energy::DeviceEnergy;
use crate::protocol::Variant;

/// Arithmetic mean; NaN for an empty set so that runs without any device
/// of a role do not drag aggregates towards zero.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Mean of the defined (non-NaN) entries.
pub fn nan_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    mean(values.into_iter().filter(|v| !v.is_nan()))
}

/// Corrupted share of all sidelink payload bits, in percent. Takes
/// `(payload_bits, corrupted)` per transfer.
pub fn wasted_capacity_pct(transfers: &[(u64, bool)]) -> f64 {
    let total: u64 = transfers.iter().map(|t| t.0).sum();
    if total == 0 {
        return 0.0;
    }
    let bad: u64 = transfers.iter().filter(|t| t.1).map(|t| t.0).sum();
    100.0 * bad as f64 / total as f64
}

/// Mean over receivers of the non-corrupted payload bits each accepted,
/// in kbit.
pub fn mean_noncorrupted_kbits(accepted_bits: &[u64]) -> f64 {
    mean(accepted_bits.iter().map(|&b| b as f64 / 1000.0))
}

/// Wasted energy fraction of one device. Secure variants also count the
/// security overhead as waste.
pub fn wasted_energy_fraction(e: &DeviceEnergy, variant: Variant) -> f64 {
    let total = e.e_total();
    if total <= 0.0 {
        return 0.0;
    }
    let wasted = if variant.is_secure() {
        e.e_malicious + e.e_security
    } else {
        e.e_malicious
    };
    wasted / total
}

pub fn security_pct(e: &DeviceEnergy) -> f64 {
    let total = e.e_total();
    if total <= 0.0 {
        0.0
    } else {
        100.0 * e.e_security / total
    }
}

/// Mean security share per role; zero for variants without crypto.
pub fn security_energy_pct(
    relays: &[DeviceEnergy],
    receivers: &[DeviceEnergy],
    variant: Variant,
) -> (f64, f64) {
    if !variant.is_secure() {
        return (0.0, 0.0);
    }
    (
        mean(relays.iter().map(security_pct)),
        mean(receivers.iter().map(security_pct)),
    )
}

/// Detection bookkeeping for secure variants, from ground truth and audits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    /// Corrupted transfers whose receiver ran the signature check.
    pub verified_corrupted: usize,
    /// Of those, the ones with exactly one confirmed alarm against the
    /// right relay.
    pub correctly_attributed: usize,
    /// Confirmed alarms for transfers that were not corrupted.
    pub false_increments: usize,
    /// MDC increments in total.
    pub mdc_increments: usize,
}

impl DetectionStats {
    pub fn is_perfect(&self) -> bool {
        self.verified_corrupted == self.correctly_attributed && self.false_increments == 0
    }
}
