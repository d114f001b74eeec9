use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::message::SignedPayload;
use super::ProtocolError;
use crate::crypto::Signer;
use crate::ids::{DeviceId, Tti};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub service: u32,
    pub devices: BTreeSet<DeviceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroup {
    pub index: u32,
    pub drx_cycle: u64,
    pub wake: Tti,
    pub members: Vec<DeviceId>,
}

/// The logical core: service center (subscriptions), gateway (signing) and
/// coordination entity (paging plan).
#[derive(Debug)]
pub struct CoreNetwork {
    registered: BTreeSet<DeviceId>,
    subscription: Option<Subscription>,
    gateway: Signer,
}

impl CoreNetwork {
    pub fn new(registered: impl IntoIterator<Item = DeviceId>, gateway: Signer) -> Self {
        Self {
            registered: registered.into_iter().collect(),
            subscription: None,
            gateway,
        }
    }

    pub fn is_registered(&self, device: DeviceId) -> bool {
        self.registered.contains(&device)
    }

    /// Network-side only; devices stay asleep.
    pub fn subscribe(
        &mut self,
        service: u32,
        devices: impl IntoIterator<Item = DeviceId>,
    ) -> Result<&Subscription, ProtocolError> {
        let devices: BTreeSet<DeviceId> = devices.into_iter().collect();
        if let Some(bad) = devices.iter().find(|d| !self.registered.contains(d)) {
            return Err(ProtocolError::Unregistered(*bad));
        }
        Ok(self.subscription.insert(Subscription { service, devices }))
    }

    pub fn subscription(&self) -> Option<&Subscription> {
        self.subscription.as_ref()
    }

    /// Gateway step: wraps the service data, signing it when `sign` is set.
    pub fn initialize(&self, payload: Vec<u8>, sign: bool) -> Result<Arc<SignedPayload>, ProtocolError> {
        if self.subscription.is_none() {
            return Err(ProtocolError::NoSubscription);
        }
        let mut p = SignedPayload::new(payload, None);
        if sign {
            let sig = self.gateway.sign_digest(p.digest());
            p = SignedPayload::with_digest(p, sig);
        }
        Ok(Arc::new(p))
    }

    pub fn page(&self, drx_cycle: &BTreeMap<DeviceId, u64>, session_start: Tti) -> Result<Vec<Subgroup>, ProtocolError> {
        let sub = self.subscription.as_ref().ok_or(ProtocolError::NoSubscription)?;
        page(&sub.devices, drx_cycle, session_start)
    }
}

/// Groups subscribers by DRX cycle and orders the groups by their next wake
/// instant at or after `session_start` (shorter cycle first on ties).
pub fn page(
    subscribers: &BTreeSet<DeviceId>,
    drx_cycle: &BTreeMap<DeviceId, u64>,
    session_start: Tti,
) -> Result<Vec<Subgroup>, ProtocolError> {
    let mut by_cycle: BTreeMap<u64, Vec<DeviceId>> = BTreeMap::new();
    for &d in subscribers {
        let c = *drx_cycle.get(&d).ok_or(ProtocolError::NoDrxCycle(d))?;
        if c == 0 {
            return Err(ProtocolError::NoDrxCycle(d));
        }
        by_cycle.entry(c).or_default().push(d);
    }
    let mut groups: Vec<Subgroup> = by_cycle
        .into_iter()
        .map(|(cycle, members)| Subgroup {
            index: 0,
            drx_cycle: cycle,
            wake: Tti(session_start.0.div_ceil(cycle) * cycle),
            members,
        })
        .collect();
    groups.sort_by_key(|g| (g.wake, g.drx_cycle));
    for (i, g) in groups.iter_mut().enumerate() {
        g.index = i as u32;
    }
    Ok(groups)
}
