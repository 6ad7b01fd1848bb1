//! Single owner of the per-adapter dispatch tables, the classification
//! queue, discovery, the device manager and the context store.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::adapter::{AdapterRef, Dispatch, DispatchTable, InboundMessage, SaId};
use crate::context::{self, AttrValue, Context, SensorObservation, ADD_SENSOR, EXCLUDE_DATES, EXCLUDE_OUTSIDE_STD};
use crate::device::DeviceManager;
use crate::discovery::{reading, Discovery, DiscoveryError, SaCreated};
use crate::dsl::{DslProgram, RegistryId};
use crate::stats::DispatchCounters;

/// What happened to one inbound message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Delivered(SaId),
    /// Queued for classification.
    Queued,
    Malformed,
}

#[derive(Debug, Clone)]
pub struct Controller {
    tables: BTreeMap<AdapterRef, DispatchTable>,
    queue: VecDeque<crate::discovery::ClassificationRequest>,
    pub discovery: Discovery,
    pub dm: DeviceManager,
    contexts: Vec<Context>,
    placement: DslProgram,
    counters: DispatchCounters,
    last_payload: BTreeMap<SaId, Vec<u8>>,
}

/// Location-keyed placement: drop time-keyed contexts, keep those whose
/// location matches, add the sensor.
pub fn default_placement() -> DslProgram {
    DslProgram::new(RegistryId::C, alloc::vec![EXCLUDE_DATES, EXCLUDE_OUTSIDE_STD, ADD_SENSOR])
        .unwrap_or_else(|_| DslProgram::identity(RegistryId::C))
}

impl Controller {
    pub fn new(discovery: Discovery, dm: DeviceManager) -> Self {
        Controller {
            tables: BTreeMap::new(),
            queue: VecDeque::new(),
            discovery,
            dm,
            contexts: Vec::new(),
            placement: default_placement(),
            counters: DispatchCounters::default(),
            last_payload: BTreeMap::new(),
        }
    }

    pub fn set_placement(&mut self, program: DslProgram) -> Result<(), DslProgram> {
        if program.registry() != RegistryId::C {
            return Err(program);
        }
        self.placement = program;
        Ok(())
    }

    pub fn table(&self, adapter: AdapterRef) -> Option<&DispatchTable> {
        self.tables.get(&adapter)
    }

    pub fn tables(&self) -> impl Iterator<Item = (AdapterRef, &DispatchTable)> {
        self.tables.iter().map(|(k, v)| (*k, v))
    }

    pub fn counters(&self) -> DispatchCounters {
        self.counters
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn last_payload(&self, sa: SaId) -> Option<&[u8]> {
        self.last_payload.get(&sa).map(Vec::as_slice)
    }

    /// Routes one message. Every call increments exactly one of the
    /// delivered, classified or malformed counters.
    pub fn on_message(&mut self, adapter: AdapterRef, message: InboundMessage, now_ms: u64) -> Outcome {
        let payload = message.payload.clone();
        let table = self.tables.entry(adapter).or_default();
        match table.dispatch(adapter, message, now_ms) {
            Ok(Dispatch::Delivered(sa)) => {
                self.counters.delivered += 1;
                self.dm.touch(sa, now_ms);
                self.last_payload.insert(sa, payload);
                Outcome::Delivered(sa)
            }
            Ok(Dispatch::Classify(req)) => {
                self.counters.classified += 1;
                self.queue.push_back(req);
                Outcome::Queued
            }
            Err(_) => {
                self.counters.malformed += 1;
                Outcome::Malformed
            }
        }
    }

    /// Drains the classification queue in arrival order.
    pub fn process_queue(&mut self) -> Vec<Result<SaCreated, DiscoveryError>> {
        let mut out = Vec::with_capacity(self.queue.len());
        while let Some(req) = self.queue.pop_front() {
            let table = self.tables.entry(req.adapter_ref).or_default();
            let result = self.discovery.handle_unsubscribed(&req, &mut self.dm, table);
            match &result {
                Ok(created) => {
                    self.last_payload.insert(created.sa_id, req.raw_payload.clone());
                    if created.fresh {
                        self.place_sensor(created.sa_id, &req.raw_payload, req.received_at_ms);
                    }
                }
                Err(DiscoveryError::AuthenticationFailed(_)) => self.counters.rejected += 1,
                Err(_) => {}
            }
            out.push(result);
        }
        out
    }

    /// Adds a numeric reading to the contexts chosen by the placement
    /// program, or opens a new location context when none accepts it.
    fn place_sensor(&mut self, sa: SaId, payload: &[u8], now_ms: u64) {
        let Some(value) = reading(payload) else { return };
        let Some((_, agent)) = self.dm.lookup(sa) else { return };
        let sensor = SensorObservation::new(&format!("sa{sa}"))
            .with("loc", AttrValue::Text(agent.location.clone()))
            .with("value", AttrValue::Number(value))
            .with("time", AttrValue::Time((now_ms / 1000) as f64));
        if let Ok(updated) = context::place(&sensor, &self.contexts, &self.placement) {
            self.contexts = updated;
        }
        if !self.contexts.iter().any(|c| c.members.contains(&sensor.name)) {
            let id = format!("c{}", self.contexts.len() + 1);
            if let Ok(c) = Context::from_members(&id, "loc", &[sensor]) {
                self.contexts.push(c);
            }
        }
    }

    /// Every registered route points at an agent the device manager holds
    /// for that same resource.
    pub fn consistent(&self) -> bool {
        self.tables.values().flat_map(DispatchTable::iter).all(|(rid, sa)| {
            self.dm.lookup(sa).is_some_and(|(_, agent)| agent.resource_id == rid)
        })
    }

    pub fn dispatch_size(&self) -> usize {
        self.tables.values().map(DispatchTable::len).sum()
    }

    pub fn context_ids(&self) -> Vec<String> {
        self.contexts.iter().map(|c| c.id.clone()).collect()
    }
}
