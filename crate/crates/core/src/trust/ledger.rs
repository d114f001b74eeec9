use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClassThresholds, ReliabilityClass, TrustError, TrustProfile};
use crate::ids::DeviceId;

/// How the HeNB forms reliability values for relay ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NrvMode {
    /// SRF while clean, counter once flagged.
    #[default]
    Social,
    /// Counter only; SRF is ignored.
    CounterOnly,
}

/// Per-device MDC/NRV store owned by the HeNB.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrustLedger {
    profiles: BTreeMap<DeviceId, TrustProfile>,
    #[serde(default)]
    mode: NrvMode,
}

impl TrustLedger {
    pub fn new(mode: NrvMode) -> Self {
        Self {
            profiles: BTreeMap::new(),
            mode,
        }
    }

    pub fn from_srf(
        mode: NrvMode,
        srf: impl IntoIterator<Item = (DeviceId, f64)>,
    ) -> Result<Self, TrustError> {
        let mut ledger = Self::new(mode);
        for (d, s) in srf {
            ledger.insert(d, s)?;
        }
        Ok(ledger)
    }

    pub fn mode(&self) -> NrvMode {
        self.mode
    }

    pub fn insert(&mut self, device: DeviceId, srf: f64) -> Result<(), TrustError> {
        let srf = match self.mode {
            NrvMode::Social => srf,
            NrvMode::CounterOnly => {
                if !(0.0..=1.0).contains(&srf) {
                    return Err(TrustError::SrfOutOfRange(srf));
                }
                0.0
            }
        };
        self.profiles.insert(device, TrustProfile::new(device, srf)?);
        Ok(())
    }

    /// Refreshes a device's social value, keeping its counter. Ignored in
    /// counter-only mode.
    pub fn set_srf(&mut self, device: DeviceId, srf: f64) -> Result<(), TrustError> {
        if !(0.0..=1.0).contains(&srf) {
            return Err(TrustError::SrfOutOfRange(srf));
        }
        if self.mode == NrvMode::CounterOnly {
            return Ok(());
        }
        let p = self
            .profiles
            .get_mut(&device)
            .ok_or(TrustError::UnknownDevice(device))?;
        p.srf = srf;
        p.nrv = super::compute_nrv(p);
        Ok(())
    }

    pub fn get(&self, device: DeviceId) -> Option<&TrustProfile> {
        self.profiles.get(&device)
    }

    pub fn profile(&self, device: DeviceId) -> Result<&TrustProfile, TrustError> {
        self.get(device).ok_or(TrustError::UnknownDevice(device))
    }

    pub fn class_of(
        &self,
        device: DeviceId,
        thresholds: &ClassThresholds,
    ) -> Result<ReliabilityClass, TrustError> {
        Ok(self.profile(device)?.class(thresholds))
    }

    pub fn mdc(&self, device: DeviceId) -> u32 {
        self.get(device).map_or(0, |p| p.mdc)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrustProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn total_mdc(&self) -> u64 {
        self.profiles.values().map(|p| u64::from(p.mdc)).sum()
    }

    pub fn record_malicious(&mut self, device: DeviceId) -> Result<&TrustProfile, TrustError> {
        let p = self
            .profiles
            .get_mut(&device)
            .ok_or(TrustError::UnknownDevice(device))?;
        p.mdc = p.mdc.saturating_add(1);
        p.nrv = super::compute_nrv(p);
        Ok(p)
    }
}

/// Functional form: returns the updated ledger.
pub fn record_malicious(device: DeviceId, mut ledger: TrustLedger) -> Result<TrustLedger, TrustError> {
    ledger.record_malicious(device)?;
    Ok(ledger)
}
