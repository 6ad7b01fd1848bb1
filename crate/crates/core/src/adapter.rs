//! Protocol adapters: usage-ranked connection attempts, retry policies and
//! the resource-identifier dispatch table.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::SocketAddr;
use core::str::FromStr;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::discovery::ClassificationRequest;

pub type SaId = u64;

/// Identifies one adapter instance (one broker session).
pub type AdapterRef = u32;

/// Wire protocol. `Custom` leaves room for further adapters; ties in the
/// ranking fall back to this enum's order (MQTT, CoAP, then custom ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Mqtt,
    Coap,
    Custom(u16),
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Mqtt => f.write_str("mqtt"),
            Protocol::Coap => f.write_str("coap"),
            Protocol::Custom(n) => write!(f, "custom-{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown protocol `{0}` (expected mqtt or coap)")]
pub struct UnknownProtocol(pub String);

impl FromStr for Protocol {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mqtt" | "MQTT" => Ok(Protocol::Mqtt),
            "coap" | "CoAP" | "COAP" => Ok(Protocol::Coap),
            other => Err(UnknownProtocol(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("attempts must be at least 1")]
    ZeroAttempts,
}

/// Per-attempt timeout and attempt count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    timeout: Duration,
    attempts: u32,
}

impl RetryPolicy {
    pub fn new(timeout: Duration, attempts: u32) -> Result<Self, PolicyError> {
        if timeout.is_zero() {
            return Err(PolicyError::ZeroTimeout);
        }
        if attempts == 0 {
            return Err(PolicyError::ZeroAttempts);
        }
        Ok(RetryPolicy { timeout, attempts })
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// Worst-case time spent on one adapter.
    pub fn budget(&self) -> Duration {
        self.timeout * self.attempts
    }

    /// Default policy: MQTT 0.8 s once, CoAP (and anything else) 0.5 s once.
    pub fn default_for(protocol: Protocol) -> Self {
        match protocol {
            Protocol::Mqtt => RetryPolicy { timeout: Duration::from_millis(800), attempts: 1 },
            _ => RetryPolicy { timeout: Duration::from_millis(500), attempts: 1 },
        }
    }

    /// Aggressive profile: MQTT 0.5 s twice, CoAP 0.1 s twice.
    pub fn aggressive_for(protocol: Protocol) -> Self {
        match protocol {
            Protocol::Mqtt => RetryPolicy { timeout: Duration::from_millis(500), attempts: 2 },
            _ => RetryPolicy { timeout: Duration::from_millis(100), attempts: 2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterDescriptor {
    pub protocol: Protocol,
    usage_count: u64,
    pub retry: RetryPolicy,
}

impl AdapterDescriptor {
    pub fn usage_count(&self) -> u64 {
        self.usage_count
    }
}

/// Adapters ordered by usage, most used first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProtocolRanking {
    adapters: Vec<AdapterDescriptor>,
}

impl ProtocolRanking {
    pub fn new() -> Self {
        Self::default()
    }

    /// MQTT and CoAP with default policies and zero usage.
    pub fn standard() -> Self {
        let mut r = Self::new();
        r.register(Protocol::Mqtt, RetryPolicy::default_for(Protocol::Mqtt));
        r.register(Protocol::Coap, RetryPolicy::default_for(Protocol::Coap));
        r
    }

    /// Adds an adapter, or replaces the retry policy of an existing one.
    pub fn register(&mut self, protocol: Protocol, retry: RetryPolicy) {
        match self.adapters.iter_mut().find(|a| a.protocol == protocol) {
            Some(a) => a.retry = retry,
            None => self.adapters.push(AdapterDescriptor { protocol, usage_count: 0, retry }),
        }
        self.resort();
    }

    pub fn set_usage(&mut self, protocol: Protocol, usage: u64) {
        if let Some(a) = self.adapters.iter_mut().find(|a| a.protocol == protocol) {
            a.usage_count = a.usage_count.max(usage);
        }
        self.resort();
    }

    pub fn record_use(&mut self, protocol: Protocol) {
        if let Some(a) = self.adapters.iter_mut().find(|a| a.protocol == protocol) {
            a.usage_count += 1;
        }
        self.resort();
    }

    fn resort(&mut self) {
        self.adapters
            .sort_by(|a, b| b.usage_count.cmp(&a.usage_count).then(a.protocol.cmp(&b.protocol)));
    }

    pub fn descriptors(&self) -> &[AdapterDescriptor] {
        &self.adapters
    }

    pub fn order(&self) -> Vec<Protocol> {
        self.adapters.iter().map(|a| a.protocol).collect()
    }

    pub fn get(&self, protocol: Protocol) -> Option<&AdapterDescriptor> {
        self.adapters.iter().find(|a| a.protocol == protocol)
    }

    pub fn is_sorted(&self) -> bool {
        self.adapters.windows(2).all(|w| w[0].usage_count >= w[1].usage_count)
    }
}

/// Outcome of a single handshake attempt.
pub enum Attempt<S> {
    Connected { session: S, elapsed: Duration },
    Failed { elapsed: Duration },
}

/// Something that can open a session for one protocol.
pub trait Connector<S> {
    fn protocol(&self) -> Protocol;

    /// One handshake bounded by `timeout`.
    fn attempt(&mut self, endpoint: SocketAddr, timeout: Duration) -> Attempt<S>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub protocol: Protocol,
    pub attempts: u32,
    pub elapsed: Duration,
    /// Whether each attempt succeeded, in order.
    pub outcomes: Vec<bool>,
}

impl AttemptLog {
    pub fn first_attempt_failed(&self) -> bool {
        self.outcomes.first() == Some(&false)
    }

    pub fn succeeded(&self) -> bool {
        self.outcomes.last() == Some(&true)
    }
}

pub struct Connected<S> {
    pub session: S,
    pub log: AttemptLog,
}

/// Tries up to `policy.attempts()` handshakes and stops at the first success.
pub fn attempt_connect<S, C: Connector<S> + ?Sized>(
    connector: &mut C,
    endpoint: SocketAddr,
    policy: RetryPolicy,
) -> Result<Connected<S>, AttemptLog> {
    let mut log = AttemptLog {
        protocol: connector.protocol(),
        attempts: 0,
        elapsed: Duration::ZERO,
        outcomes: Vec::new(),
    };
    for _ in 0..policy.attempts() {
        log.attempts += 1;
        match connector.attempt(endpoint, policy.timeout()) {
            Attempt::Connected { session, elapsed } => {
                log.elapsed += elapsed;
                log.outcomes.push(true);
                return Ok(Connected { session, log });
            }
            Attempt::Failed { elapsed } => {
                log.elapsed += elapsed.min(policy.timeout());
                log.outcomes.push(false);
            }
        }
    }
    Err(log)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConnectFailure {
    #[error("no adapters registered")]
    NoAdapters,
    #[error("every adapter failed ({} tried)", .0.len())]
    Exhausted(Vec<AttemptLog>),
}

pub struct RankedConnection<S> {
    pub protocol: Protocol,
    pub session: S,
    /// Failed ranks' time plus the successful handshake.
    pub elapsed: Duration,
    pub logs: Vec<AttemptLog>,
}

/// Tries adapters in rank order. The first success bumps that adapter's
/// usage count. Ranked protocols without a connector are skipped.
pub fn connect_ranked<S>(
    ranking: &mut ProtocolRanking,
    connectors: &mut [&mut dyn Connector<S>],
    endpoint: SocketAddr,
) -> Result<RankedConnection<S>, ConnectFailure> {
    if ranking.descriptors().is_empty() {
        return Err(ConnectFailure::NoAdapters);
    }
    let mut logs = Vec::new();
    let mut elapsed = Duration::ZERO;
    for desc in ranking.descriptors().to_vec() {
        let Some(conn) = connectors.iter_mut().find(|c| c.protocol() == desc.protocol) else {
            continue;
        };
        match attempt_connect(&mut **conn, endpoint, desc.retry) {
            Ok(Connected { session, log }) => {
                elapsed += log.elapsed;
                logs.push(log);
                ranking.record_use(desc.protocol);
                return Ok(RankedConnection { protocol: desc.protocol, session, elapsed, logs });
            }
            Err(log) => {
                elapsed += log.elapsed;
                logs.push(log);
            }
        }
    }
    Err(ConnectFailure::Exhausted(logs))
}

/// Exponential reconnection delay: `base * 2^n`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    base: Duration,
    cap: Duration,
    failures: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff::new(Duration::from_secs(1), Duration::from_secs(30))
    }
}

impl Backoff {
    pub fn new(base: Duration, cap: Duration) -> Self {
        Backoff { base, cap, failures: 0 }
    }

    /// Delay before the next attempt; grows after every call.
    pub fn next_delay(&mut self) -> Duration {
        let factor = 1u32.checked_shl(self.failures).unwrap_or(u32::MAX);
        self.failures = self.failures.saturating_add(1);
        self.base.checked_mul(factor).map_or(self.cap, |d| d.min(self.cap))
    }

    pub fn reset(&mut self) {
        self.failures = 0;
    }
}

/// A message arriving on an adapter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InboundMessage {
    /// Topic or URI; `None` when the frame carried none.
    pub resource_id: Option<String>,
    pub payload: Vec<u8>,
}

impl InboundMessage {
    pub fn new(resource_id: &str, payload: &[u8]) -> Self {
        InboundMessage { resource_id: Some(resource_id.into()), payload: payload.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dispatch {
    Delivered(SaId),
    Classify(ClassificationRequest),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("message has no resource identifier")]
pub struct MalformedMessage;

/// Resource identifier to SA id; exact match, last write wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchTable {
    routes: BTreeMap<String, SaId>,
}

impl DispatchTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, resource_id: &str, sa: SaId) {
        self.routes.insert(resource_id.into(), sa);
    }

    pub fn lookup(&self, resource_id: &str) -> Option<SaId> {
        self.routes.get(resource_id).copied()
    }

    pub fn remove(&mut self, resource_id: &str) -> Option<SaId> {
        self.routes.remove(resource_id)
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SaId)> {
        self.routes.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Known identifiers are delivered; unknown non-empty ones become
    /// classification requests carrying the raw payload.
    pub fn dispatch(
        &self,
        adapter: AdapterRef,
        message: InboundMessage,
        received_at_ms: u64,
    ) -> Result<Dispatch, MalformedMessage> {
        let resource_id = message.resource_id.ok_or(MalformedMessage)?;
        if let Some(sa) = self.lookup(&resource_id) {
            return Ok(Dispatch::Delivered(sa));
        }
        if resource_id.is_empty() {
            return Err(MalformedMessage);
        }
        Ok(Dispatch::Classify(ClassificationRequest {
            resource_id,
            raw_payload: message.payload,
            adapter_ref: adapter,
            received_at_ms,
        }))
    }
}
