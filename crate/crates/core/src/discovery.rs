//! Unknown resources become sensor agents; brokers are a configured list.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::net::SocketAddr;

use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterRef, DispatchTable, Protocol, SaId};
use crate::convert::json::{self, JsonValue};
use crate::device::{DeviceError, DeviceManager, SensorAgent};

/// A message no sensor agent is subscribed to yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRequest {
    pub resource_id: String,
    pub raw_payload: Vec<u8>,
    pub adapter_ref: AdapterRef,
    pub received_at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrokerOrigin {
    Config,
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokerEntry {
    pub address: SocketAddr,
    pub protocol_hint: Option<Protocol>,
    pub added_by: BrokerOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiscoveryError {
    #[error("invalid broker address `{0}`")]
    InvalidAddress(String),
    #[error("resource `{0}` rejected by allowlist")]
    AuthenticationFailed(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Known brokers, unique by address.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BrokerList {
    entries: Vec<BrokerEntry>,
}

impl BrokerList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the entry was new.
    pub fn add(&mut self, entry: BrokerEntry) -> bool {
        if self.entries.iter().any(|e| e.address == entry.address) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    /// Parses `ip:port` and adds it.
    pub fn add_str(
        &mut self,
        address: &str,
        protocol_hint: Option<Protocol>,
        added_by: BrokerOrigin,
    ) -> Result<(bool, BrokerEntry), DiscoveryError> {
        let address: SocketAddr = address
            .trim()
            .parse()
            .map_err(|_| DiscoveryError::InvalidAddress(address.into()))?;
        let entry = BrokerEntry { address, protocol_hint, added_by };
        Ok((self.add(entry.clone()), entry))
    }

    pub fn entries(&self) -> &[BrokerEntry] {
        &self.entries
    }
}

/// The agent made (or found) for a classification request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaCreated {
    pub sa_id: SaId,
    pub cluster_id: i64,
    /// False when an earlier request for the same resource already made it.
    pub fresh: bool,
}

/// Location of a resource: its identifier without the last path segment.
/// URIs lose scheme and authority first.
pub fn location_of(resource_id: &str) -> &str {
    let path = match resource_id.split_once("://") {
        Some((_, rest)) => rest.split_once('/').map_or("", |(_, p)| p),
        None => resource_id,
    };
    match path.rsplit_once('/') {
        Some((prefix, _)) => prefix,
        None => path,
    }
}

/// Attribute vector of a new agent. A payload that is a JSON array of
/// integers is used as is; otherwise `[0, sa_id]` followed by the payload
/// read as a number (rounded), when it is one.
pub fn attributes_from_payload(sa_id: SaId, payload: &[u8]) -> Vec<i64> {
    let text = core::str::from_utf8(payload).unwrap_or("").trim();
    if let Ok(JsonValue::Array(items)) = json::parse(text) {
        let ints: Option<Vec<i64>> = items.iter().map(JsonValue::as_i64).collect();
        if let Some(ints) = ints.filter(|v| !v.is_empty()) {
            return ints;
        }
    }
    let mut attrs = alloc::vec![0, sa_id as i64];
    if let Some(v) = reading(payload) {
        attrs.push(libm::round(v) as i64);
    }
    attrs
}

/// The payload as a single finite number, if it is one.
pub fn reading(payload: &[u8]) -> Option<f64> {
    let text = core::str::from_utf8(payload).ok()?.trim();
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Classification layer: allowlist, exactly-once agent creation, handoff to
/// the device manager and registration back to the adapter.
#[derive(Debug, Clone, Default)]
pub struct Discovery {
    /// Topic prefixes allowed to create agents; empty allows everything.
    pub allowlist: Vec<String>,
    created: BTreeMap<String, SaId>,
    next_id: SaId,
    audit: Vec<String>,
}

impl Discovery {
    pub fn new(allowlist: Vec<String>) -> Self {
        Discovery { allowlist, ..Self::default() }
    }

    pub fn allows(&self, resource_id: &str) -> bool {
        self.allowlist.is_empty() || self.allowlist.iter().any(|p| resource_id.starts_with(p.as_str()))
    }

    /// Rejected resource ids, oldest first.
    pub fn audit_log(&self) -> &[String] {
        &self.audit
    }

    pub fn sa_for(&self, resource_id: &str) -> Option<SaId> {
        self.created.get(resource_id).copied()
    }

    pub fn created(&self) -> usize {
        self.created.len()
    }

    /// Creates an agent for the request's resource, stores it in the device
    /// manager and registers it with the adapter's dispatch table. A repeat
    /// request for the same resource resolves to the existing agent.
    pub fn handle_unsubscribed(
        &mut self,
        req: &ClassificationRequest,
        dm: &mut DeviceManager,
        table: &mut DispatchTable,
    ) -> Result<SaCreated, DiscoveryError> {
        if !self.allows(&req.resource_id) {
            self.audit.push(req.resource_id.clone());
            return Err(DiscoveryError::AuthenticationFailed(req.resource_id.clone()));
        }
        if let Some(sa_id) = self.sa_for(&req.resource_id) {
            table.register(&req.resource_id, sa_id);
            dm.touch(sa_id, req.received_at_ms);
            let cluster_id = dm.lookup(sa_id).map_or(crate::device::UNCLASSIFIED, |(c, _)| c);
            return Ok(SaCreated { sa_id, cluster_id, fresh: false });
        }
        let sa_id = self.next_id + 1;
        let sa = SensorAgent {
            id: sa_id,
            attributes: attributes_from_payload(sa_id, &req.raw_payload),
            resource_id: req.resource_id.clone(),
            location: location_of(&req.resource_id).into(),
            last_active: req.received_at_ms,
        };
        let cluster_id = dm.insert(sa)?;
        self.next_id = sa_id;
        self.created.insert(req.resource_id.clone(), sa_id);
        table.register(&req.resource_id, sa_id);
        Ok(SaCreated { sa_id, cluster_id, fresh: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{DslProgram, RegistryId};
    use alloc::vec;

    fn req(topic: &str, payload: &[u8]) -> ClassificationRequest {
        ClassificationRequest { resource_id: topic.into(), raw_payload: payload.to_vec(), adapter_ref: 0, received_at_ms: 1 }
    }

    fn dm() -> DeviceManager {
        let mut dm = DeviceManager::default();
        dm.load_program(DslProgram::new(RegistryId::L, vec![1]).unwrap()).unwrap();
        dm
    }

    #[test]
    fn locations() {
        assert_eq!(location_of("kista/temp/7"), "kista/temp");
        assert_eq!(location_of("single"), "single");
        assert_eq!(location_of("coap://10.0.0.1:5683/kista/temp/7"), "kista/temp");
    }

    #[test]
    fn payload_attributes() {
        assert_eq!(attributes_from_payload(4, b"[1, 10, 20, 5, 12]"), vec![1, 10, 20, 5, 12]);
        assert_eq!(attributes_from_payload(4, b"21.5"), vec![0, 4, 22]);
        assert_eq!(attributes_from_payload(4, b"hello"), vec![0, 4]);
    }

    #[test]
    fn creates_once_per_resource() {
        let (mut d, mut dm, mut t) = (Discovery::default(), dm(), DispatchTable::new());
        let a = d.handle_unsubscribed(&req("kista/temp/7", b"[3, 1]"), &mut dm, &mut t).unwrap();
        assert_eq!(a, SaCreated { sa_id: 1, cluster_id: 3, fresh: true });
        let b = d.handle_unsubscribed(&req("kista/temp/7", b"[5, 1]"), &mut dm, &mut t).unwrap();
        assert_eq!(b, SaCreated { sa_id: 1, cluster_id: 3, fresh: false });
        assert_eq!((dm.len(), t.len()), (1, 1));
        assert_eq!(dm.lookup(1).unwrap().1.location, "kista/temp");
    }

    #[test]
    fn allowlist_rejects_without_side_effects() {
        let (mut d, mut dm, mut t) = (Discovery::new(vec!["kista/".into()]), dm(), DispatchTable::new());
        let err = d.handle_unsubscribed(&req("solna/x", b"1"), &mut dm, &mut t);
        assert_eq!(err, Err(DiscoveryError::AuthenticationFailed("solna/x".into())));
        assert!(dm.is_empty() && t.is_empty());
        assert_eq!(d.audit_log(), &["solna/x"]);
        assert!(d.handle_unsubscribed(&req("kista/x", b"1"), &mut dm, &mut t).is_ok());
    }

    #[test]
    fn broker_list() {
        let mut b = BrokerList::new();
        assert!(b.add_str("127.0.0.1:1883", None, BrokerOrigin::Config).unwrap().0);
        assert!(!b.add_str("127.0.0.1:1883", None, BrokerOrigin::Runtime).unwrap().0);
        assert_eq!(b.entries().len(), 1);
        assert_eq!(
            b.add_str("999.1.1.1:1", None, BrokerOrigin::Runtime),
            Err(DiscoveryError::InvalidAddress("999.1.1.1:1".into()))
        );
    }
}
