use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrustError;
use crate::ids::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReliabilityClass {
    Banned,
    High,
    Medium,
    Low,
}

impl ReliabilityClass {
    /// Order in which relay classes are scanned.
    pub const SCAN_ORDER: [ReliabilityClass; 3] = [
        ReliabilityClass::High,
        ReliabilityClass::Medium,
        ReliabilityClass::Low,
    ];

    pub fn is_eligible(self) -> bool {
        self != ReliabilityClass::Banned
    }
}

impl fmt::Display for ReliabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReliabilityClass::Banned => "banned",
            ReliabilityClass::High => "high",
            ReliabilityClass::Medium => "medium",
            ReliabilityClass::Low => "low",
        };
        f.write_str(s)
    }
}

/// Lower bounds of the High and Medium classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassThresholds {
    pub high_lower: f64,
    pub medium_lower: f64,
}

impl Default for ClassThresholds {
    fn default() -> Self {
        Self {
            high_lower: 2.0 / 3.0,
            medium_lower: 1.0 / 3.0,
        }
    }
}

impl ClassThresholds {
    pub fn new(high_lower: f64, medium_lower: f64) -> Result<Self, TrustError> {
        let t = Self {
            high_lower,
            medium_lower,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        let ok = self.medium_lower.is_finite()
            && self.high_lower.is_finite()
            && 0.0 <= self.medium_lower
            && self.medium_lower <= self.high_lower
            && self.high_lower <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(TrustError::BadThresholds {
                high_lower: self.high_lower,
                medium_lower: self.medium_lower,
            })
        }
    }

    /// Any device with a nonzero counter is banned. Otherwise the value
    /// is binned into terciles; values above 1 (only reachable through a
    /// nonzero counter) never get here in a consistent profile, but they
    /// land in High for totality.
    pub fn classify(&self, nrv: f64, mdc: u32) -> ReliabilityClass {
        if mdc >= 1 {
            ReliabilityClass::Banned
        } else if nrv >= self.high_lower {
            ReliabilityClass::High
        } else if nrv >= self.medium_lower {
            ReliabilityClass::Medium
        } else {
            ReliabilityClass::Low
        }
    }
}

pub fn classify(nrv: f64, mdc: u32) -> ReliabilityClass {
    ClassThresholds::default().classify(nrv, mdc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustProfile {
    pub device: DeviceId,
    pub srf: f64,
    pub mdc: u32,
    pub nrv: f64,
}

impl TrustProfile {
    pub fn new(device: DeviceId, srf: f64) -> Result<Self, TrustError> {
        Self::with_mdc(device, srf, 0)
    }

    pub fn with_mdc(device: DeviceId, srf: f64, mdc: u32) -> Result<Self, TrustError> {
        if !(0.0..=1.0).contains(&srf) {
            return Err(TrustError::SrfOutOfRange(srf));
        }
        let mut p = Self {
            device,
            srf,
            mdc,
            nrv: 0.0,
        };
        p.nrv = compute_nrv(&p);
        Ok(p)
    }

    pub fn class(&self, thresholds: &ClassThresholds) -> ReliabilityClass {
        thresholds.classify(self.nrv, self.mdc)
    }

    pub fn is_consistent(&self) -> bool {
        self.nrv == compute_nrv(self)
    }
}

/// NRV = SRF while the counter is zero, otherwise the counter itself.
pub fn compute_nrv(profile: &TrustProfile) -> f64 {
    if profile.mdc == 0 {
        profile.srf
    } else {
        f64::from(profile.mdc)
    }
}

pub const MALICIOUS_SRF_MAX: f64 = 0.4;

/// Draws U[0, 0.4] for malicious devices, U[0, 1] for honest ones, from a
/// single uniform so that the two ranges are coupled under a fixed rng.
pub fn sample_srf<R: Rng + ?Sized>(is_malicious: bool, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if is_malicious {
        u * MALICIOUS_SRF_MAX
    } else {
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(srf: f64, mdc: u32) -> TrustProfile {
        TrustProfile::with_mdc(DeviceId(0), srf, mdc).unwrap()
    }

    #[test]
    fn nrv_cases() {
        assert_eq!(compute_nrv(&profile(0.7, 0)), 0.7);
        assert_eq!(compute_nrv(&profile(0.2, 3)), 3.0);
        assert_eq!(compute_nrv(&profile(1.0, 0)), 1.0);
    }

    #[test]
    fn class_examples() {
        assert_eq!(classify(3.0, 3), ReliabilityClass::Banned);
        assert_eq!(classify(0.9, 0), ReliabilityClass::High);
        assert_eq!(classify(0.0, 0), ReliabilityClass::Low);
        assert_eq!(classify(1.0, 1), ReliabilityClass::Banned);
        assert_eq!(classify(0.5, 0), ReliabilityClass::Medium);
        assert_eq!(classify(2.0 / 3.0, 0), ReliabilityClass::High);
        assert_eq!(classify(1.0 / 3.0, 0), ReliabilityClass::Medium);
    }

    #[test]
    fn thresholds_validated() {
        assert!(ClassThresholds::new(0.3, 0.6).is_err());
        assert!(ClassThresholds::new(1.2, 0.6).is_err());
        assert!(ClassThresholds::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn srf_ranges_and_determinism() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let m = sample_srf(true, &mut a);
            assert!((0.0..=0.4).contains(&m));
            assert_eq!(m, sample_srf(true, &mut b));
        }
        assert!(TrustProfile::new(DeviceId(1), 1.1).is_err());
    }
}
