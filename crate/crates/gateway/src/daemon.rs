//! The long-running gateway: a supervisor thread owning the controller, one
//! thread per broker session, and an admin command channel.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context as _};
use edge_gateway_core::adapter::{
    connect_ranked, AdapterRef, AttemptLog, Backoff, ConnectFailure, Connector, InboundMessage, Protocol,
    ProtocolRanking, SaId,
};
use edge_gateway_core::controller::{Controller, Outcome};
use edge_gateway_core::device::DeviceManager;
use edge_gateway_core::discovery::{BrokerEntry, BrokerList, BrokerOrigin, Discovery};
use edge_gateway_core::dsl::list::{ListValue, HEAD};
use edge_gateway_core::dsl::Synthesizer;
use edge_gateway_core::stats::{DispatchCounters, RunStats};
use edge_gateway_core::{DslProgram, RegistryId};
use log::{debug, info, warn};

use crate::coap::{CoapServer, ServerFaults};
use crate::config::{resolve, GatewayConfig, HarnessSection};
use crate::files::{self, StatsDump};
use crate::mqtt::{Broker, BrokerFaults};
use crate::session::{CoapConnector, MqttConnector, Received, Session};

const POLL: Duration = Duration::from_millis(100);
const RESCAN: Duration = Duration::from_secs(1);

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdminCommand {
    AddBroker { address: String, protocol: Option<Protocol> },
    Recluster,
    Stats,
    DumpContexts,
}

impl AdminCommand {
    pub fn parse(line: &str) -> Result<AdminCommand, String> {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["add-broker", address] => Ok(AdminCommand::AddBroker { address: address.to_string(), protocol: None }),
            ["add-broker", address, "--protocol", p] | ["add-broker", "--protocol", p, address] => {
                let protocol = p.parse().map_err(|e| format!("{e}"))?;
                Ok(AdminCommand::AddBroker { address: address.to_string(), protocol: Some(protocol) })
            }
            ["recluster"] => Ok(AdminCommand::Recluster),
            ["stats"] => Ok(AdminCommand::Stats),
            ["dump-contexts"] => Ok(AdminCommand::DumpContexts),
            _ => Err(format!(
                "unknown command {line:?}; expected add-broker <ip:port> [--protocol mqtt|coap], recluster, stats or dump-contexts"
            )),
        }
    }
}

/// Point-in-time view of the supervisor state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub agents: usize,
    pub clusters: usize,
    pub cluster_sizes: BTreeMap<i64, usize>,
    pub dispatch_entries: usize,
    pub created: usize,
    pub counters: DispatchCounters,
    pub pending: usize,
    pub consistent: bool,
    pub brokers: usize,
    pub sessions_up: usize,
    pub ranking: Vec<(Protocol, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShutdownReport {
    pub archived: Vec<PathBuf>,
    pub stats: StatsDump,
}

enum Event {
    Received { adapter: AdapterRef, message: Received, at_ms: u64 },
    Connected { adapter: AdapterRef, protocol: Protocol, rank: u32, elapsed: Duration, logs: Vec<AttemptLog> },
    ConnectFailed { adapter: AdapterRef, logs: Vec<AttemptLog> },
    Disconnected { adapter: AdapterRef },
    Admin { command: AdminCommand, reply: Sender<Result<String, String>> },
    Snapshot(Sender<Snapshot>),
    Shutdown,
}

/// In-process brokers started from the `[harness]` section.
#[derive(Default)]
pub struct Harness {
    pub mqtt: Vec<Broker>,
    pub coap: Vec<CoapServer>,
}

impl Harness {
    pub fn start(h: &HarnessSection) -> std::io::Result<Harness> {
        let mut out = Harness::default();
        for i in 0..h.mqtt_brokers {
            let faults = BrokerFaults {
                drop_connect_rate: h.drop_connect_rate,
                connack_delay: Duration::from_millis(h.connack_delay_ms),
                seed: h.seed.wrapping_add(u64::from(i)),
            };
            out.mqtt.push(Broker::start("127.0.0.1:0", faults)?);
        }
        for i in 0..h.coap_servers {
            let faults = ServerFaults {
                drop_ping_rate: h.drop_connect_rate,
                reply_delay: Duration::ZERO,
                seed: h.seed.wrapping_add(1000 + u64::from(i)),
            };
            out.coap.push(CoapServer::start("127.0.0.1:0", faults)?);
        }
        Ok(out)
    }

    fn entries(&self) -> Vec<BrokerEntry> {
        let mqtt = self.mqtt.iter().map(|b| (b.local_addr(), Protocol::Mqtt));
        let coap = self.coap.iter().map(|s| (s.local_addr(), Protocol::Coap));
        mqtt.chain(coap)
            .map(|(address, p)| BrokerEntry { address, protocol_hint: Some(p), added_by: BrokerOrigin::Config })
            .collect()
    }
}

/// Cloneable access to a running daemon, usable from other threads and
/// signal handlers.
#[derive(Clone)]
pub struct Handle(Sender<Event>);

impl Handle {
    /// Requests a clean shutdown.
    pub fn stop(&self) {
        let _ = self.0.send(Event::Shutdown);
    }

    pub fn admin(&self, command: AdminCommand) -> anyhow::Result<String> {
        let (reply, rx) = mpsc::channel();
        self.0.send(Event::Admin { command, reply }).map_err(|_| anyhow!("daemon has stopped"))?;
        rx.recv().map_err(|_| anyhow!("daemon has stopped"))?.map_err(|e| anyhow!(e))
    }

    pub fn snapshot(&self) -> anyhow::Result<Snapshot> {
        let (reply, rx) = mpsc::channel();
        self.0.send(Event::Snapshot(reply)).map_err(|_| anyhow!("daemon has stopped"))?;
        rx.recv().map_err(|_| anyhow!("daemon has stopped"))
    }
}

pub struct Daemon {
    tx: Sender<Event>,
    supervisor: Option<JoinHandle<anyhow::Result<ShutdownReport>>>,
    harness: Harness,
}

impl Daemon {
    pub fn start(cfg: GatewayConfig) -> anyhow::Result<Daemon> {
        let harness = match &cfg.harness {
            Some(h) => Harness::start(h).context("starting simulated brokers")?,
            None => Harness::default(),
        };
        let mut brokers = BrokerList::new();
        for b in &cfg.brokers {
            let protocol_hint = b.protocol.as_deref().map(str::parse).transpose().map_err(|e| anyhow!("{e}"))?;
            brokers.add(BrokerEntry { address: resolve(&b.address)?, protocol_hint, added_by: BrokerOrigin::Config });
        }
        for e in harness.entries() {
            brokers.add(e);
        }
        let controller = build_controller(&cfg)?;
        let ranking = Arc::new(Mutex::new(cfg.retry.ranking()?));
        let (tx, rx) = mpsc::channel();
        let mut sup = Supervisor {
            controller,
            stats: RunStats::default(),
            brokers: BrokerList::new(),
            ranking,
            sessions: Vec::new(),
            sessions_up: BTreeMap::new(),
            archived: BTreeMap::new(),
            cfg,
            tx: tx.clone(),
            stop: Arc::new(AtomicBool::new(false)),
        };
        for e in brokers.entries().to_vec() {
            sup.add_broker(e);
        }
        let supervisor = thread::Builder::new().name("supervisor".into()).spawn(move || sup.run(rx))?;
        Ok(Daemon { tx, supervisor: Some(supervisor), harness })
    }

    pub fn harness(&self) -> &Harness {
        &self.harness
    }

    pub fn handle(&self) -> Handle {
        Handle(self.tx.clone())
    }

    pub fn admin(&self, command: AdminCommand) -> anyhow::Result<String> {
        self.handle().admin(command)
    }

    pub fn snapshot(&self) -> anyhow::Result<Snapshot> {
        self.handle().snapshot()
    }

    /// Blocks until the supervisor exits after a stop request.
    pub fn wait(mut self) -> anyhow::Result<ShutdownReport> {
        let handle = self.supervisor.take().expect("supervisor joined once");
        handle.join().map_err(|_| anyhow!("supervisor panicked"))?
    }

    pub fn shutdown(self) -> anyhow::Result<ShutdownReport> {
        self.handle().stop();
        self.wait()
    }
}

impl Drop for Daemon {
    fn drop(&mut self) {
        if let Some(h) = self.supervisor.take() {
            let _ = self.tx.send(Event::Shutdown);
            let _ = h.join();
        }
    }
}

/// Clustering program: the program file if present, else one synthesized
/// from the example file, else clustering by device type.
pub fn build_controller(cfg: &GatewayConfig) -> anyhow::Result<Controller> {
    let g = &cfg.gateway;
    let mut dm = DeviceManager::new(Synthesizer::default());
    match (&g.clustering_program, &g.clustering_examples) {
        (Some(p), _) if p.exists() => {
            dm.load_program(files::load_program(p)?)?;
        }
        (program_path, Some(ex)) => {
            let examples = files::load_examples::<ListValue>(ex)?;
            let program = dm.regenerate(&examples).with_context(|| format!("synthesizing from {}", ex.display()))?;
            info!("synthesized clustering program {}", program.describe());
            if let Some(p) = program_path {
                files::save_program(p, &program)?;
            }
        }
        (Some(p), None) => anyhow::bail!("{} does not exist and no clustering_examples are configured", p.display()),
        (None, None) => dm.load_program(DslProgram::new(RegistryId::L, vec![HEAD])?)?,
    }
    let mut controller = Controller::new(Discovery::new(g.allowlist.clone()), dm);
    if let Some(p) = &g.placement_program {
        controller
            .set_placement(files::load_program(p)?)
            .map_err(|p| anyhow!("placement program must use registry C, got {}", p.registry()))?;
    }
    Ok(controller)
}

/// Session, protocol, rank, elapsed time and per-adapter logs.
type Established = (Session, Protocol, u32, Duration, Vec<AttemptLog>);

struct SessionHandle {
    thread: JoinHandle<()>,
}

struct Supervisor {
    controller: Controller,
    stats: RunStats,
    brokers: BrokerList,
    ranking: Arc<Mutex<ProtocolRanking>>,
    sessions: Vec<SessionHandle>,
    sessions_up: BTreeMap<AdapterRef, bool>,
    /// Evicted agents and the cluster file holding them.
    archived: BTreeMap<SaId, i64>,
    cfg: GatewayConfig,
    tx: Sender<Event>,
    stop: Arc<AtomicBool>,
}

impl Supervisor {
    fn run(mut self, rx: Receiver<Event>) -> anyhow::Result<ShutdownReport> {
        let tick = Duration::from_millis(self.cfg.gateway.tick_ms);
        // Ticks run on schedule even under steady traffic.
        let mut next_tick = Instant::now() + tick;
        loop {
            match rx.recv_timeout(next_tick.saturating_duration_since(Instant::now())) {
                Ok(Event::Shutdown) | Err(RecvTimeoutError::Disconnected) => break,
                Ok(event) => self.handle(event),
                Err(RecvTimeoutError::Timeout) => {}
            }
            if Instant::now() >= next_tick {
                self.tick();
                next_tick = Instant::now() + tick;
            }
        }
        self.stop.store(true, Ordering::SeqCst);
        for s in std::mem::take(&mut self.sessions) {
            let _ = s.thread.join();
        }
        // Messages that arrived before the sessions stopped.
        while let Ok(event) = rx.try_recv() {
            if matches!(event, Event::Received { .. }) {
                self.handle(event);
            }
        }
        self.controller.process_queue();
        let mut archived = Vec::new();
        for cluster in self.controller.dm.drain() {
            archived.push(files::write_cluster(&self.cfg.gateway.archive_dir, &cluster)?);
        }
        let stats = self.dump();
        files::write_atomic(&self.cfg.stats_path(), stats.to_json().as_bytes())?;
        info!("archived {} clusters", archived.len());
        Ok(ShutdownReport { archived, stats })
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::Received { adapter, message, at_ms } => {
                let msg = InboundMessage::new(&message.resource_id, &message.payload);
                if let Outcome::Delivered(sa) = self.controller.on_message(adapter, msg, at_ms) {
                    if self.controller.dm.lookup(sa).is_none() {
                        self.restore_for(sa, at_ms);
                    }
                }
                for r in self.controller.process_queue() {
                    match r {
                        Ok(c) if c.fresh => debug!("sa {} created in cluster {}", c.sa_id, c.cluster_id),
                        Ok(_) => {}
                        Err(e) => warn!("classification: {e}"),
                    }
                }
            }
            Event::Connected { adapter, protocol, rank, elapsed, logs } => {
                self.record(&logs);
                self.stats.record_rank(rank, elapsed);
                self.sessions_up.insert(adapter, true);
                info!("adapter {adapter} connected over {protocol} at rank {rank} in {elapsed:?}");
            }
            Event::ConnectFailed { adapter, logs } => {
                self.record(&logs);
                self.sessions_up.insert(adapter, false);
            }
            Event::Disconnected { adapter } => {
                self.sessions_up.insert(adapter, false);
            }
            Event::Admin { command, reply } => {
                let _ = reply.send(self.admin(command));
            }
            Event::Snapshot(reply) => {
                let _ = reply.send(self.snapshot());
            }
            Event::Shutdown => {}
        }
    }

    fn record(&mut self, logs: &[AttemptLog]) {
        for log in logs {
            self.stats.record_attempts(log.protocol, u64::from(log.attempts), log.succeeded());
        }
    }

    fn tick(&mut self) {
        if let Some(ttl) = self.cfg.gateway.ttl_secs {
            for cluster in self.controller.dm.evict_inactive(now_ms(), Duration::from_secs(ttl)) {
                match files::write_cluster(&self.cfg.gateway.archive_dir, &cluster) {
                    Ok(path) => {
                        for m in &cluster.members {
                            self.archived.insert(m.id, cluster.cluster_id);
                        }
                        info!("archived cluster {} to {}", cluster.cluster_id, path.display());
                    }
                    Err(e) => {
                        warn!("{e}; keeping cluster {} in memory", cluster.cluster_id);
                        self.controller.dm.restore(cluster);
                    }
                }
            }
        }
        if let Err(e) = files::write_atomic(&self.cfg.stats_path(), self.dump().to_json().as_bytes()) {
            warn!("{e}");
        }
    }

    fn restore_for(&mut self, sa: SaId, at_ms: u64) {
        let Some(cluster_id) = self.archived.get(&sa).copied() else { return };
        let path = files::archive_path(&self.cfg.gateway.archive_dir, cluster_id);
        match files::read_cluster(&path) {
            Ok(cluster) => {
                for m in &cluster.members {
                    self.archived.remove(&m.id);
                }
                self.controller.dm.restore(cluster);
                self.controller.dm.touch(sa, at_ms);
                let _ = std::fs::remove_file(&path);
                info!("restored cluster {cluster_id}");
            }
            Err(e) => warn!("{e}"),
        }
    }

    fn dump(&mut self) -> StatsDump {
        self.stats.dispatch = self.controller.counters();
        let s = self.controller.dm.synthesizer();
        self.stats.synthesis.candidates_visited = s.candidates_visited();
        self.stats.synthesis.successes = s.successes();
        self.stats.synthesis.failures = s.failures();
        StatsDump::new(
            &self.stats,
            self.controller.dm.len(),
            self.controller.dm.cluster_count(),
            self.controller.dispatch_size(),
            self.controller.contexts().len(),
        )
    }

    fn snapshot(&self) -> Snapshot {
        let ranking = self.ranking.lock().expect("ranking lock");
        Snapshot {
            agents: self.controller.dm.len(),
            clusters: self.controller.dm.cluster_count(),
            cluster_sizes: self.controller.dm.clusters().map(|(id, ms)| (id, ms.len())).collect(),
            dispatch_entries: self.controller.dispatch_size(),
            created: self.controller.discovery.created(),
            counters: self.controller.counters(),
            pending: self.controller.pending(),
            consistent: self.controller.consistent(),
            brokers: self.brokers.entries().len(),
            sessions_up: self.sessions_up.values().filter(|up| **up).count(),
            ranking: ranking.descriptors().iter().map(|d| (d.protocol, d.usage_count())).collect(),
        }
    }

    fn admin(&mut self, command: AdminCommand) -> Result<String, String> {
        match command {
            AdminCommand::AddBroker { address, protocol } => {
                let (added, entry) =
                    self.brokers.add_str(&address, protocol, BrokerOrigin::Runtime).map_err(|e| e.to_string())?;
                if !added {
                    return Ok(format!("{} already configured", entry.address));
                }
                self.spawn_session(entry.clone());
                Ok(format!("added {}", entry.address))
            }
            AdminCommand::Recluster => {
                self.controller.dm.recluster().map_err(|e| e.to_string())?;
                Ok(format!(
                    "reclustered {} agents into {} clusters",
                    self.controller.dm.len(),
                    self.controller.dm.cluster_count()
                ))
            }
            AdminCommand::Stats => Ok(self.dump().to_json()),
            AdminCommand::DumpContexts => Ok(serde_json::to_string_pretty(&files::context_snapshot(
                self.controller.contexts(),
            ))
            .expect("snapshot serializes")),
        }
    }

    fn add_broker(&mut self, entry: BrokerEntry) {
        if self.brokers.add(entry.clone()) {
            self.spawn_session(entry);
        }
    }

    fn spawn_session(&mut self, entry: BrokerEntry) {
        let adapter = self.sessions.len() as AdapterRef + 1;
        let ctx = SessionCtx {
            adapter,
            address: entry.address,
            hint: entry.protocol_hint,
            ranking: Arc::clone(&self.ranking),
            tx: self.tx.clone(),
            stop: Arc::clone(&self.stop),
        };
        match thread::Builder::new().name(format!("session-{adapter}")).spawn(move || ctx.run()) {
            Ok(thread) => self.sessions.push(SessionHandle { thread }),
            Err(e) => warn!("cannot start session for {}: {e}", entry.address),
        }
    }
}

struct SessionCtx {
    adapter: AdapterRef,
    address: SocketAddr,
    hint: Option<Protocol>,
    ranking: Arc<Mutex<ProtocolRanking>>,
    tx: Sender<Event>,
    stop: Arc<AtomicBool>,
}

impl SessionCtx {
    fn stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    /// Sleeps up to `d`, waking early on stop.
    fn pause(&self, d: Duration) {
        let mut left = d;
        while !left.is_zero() && !self.stopped() {
            let step = left.min(POLL);
            thread::sleep(step);
            left -= step;
        }
    }

    fn connect(&self) -> Result<Established, Vec<AttemptLog>> {
        let mut mqtt = MqttConnector { client_id: format!("gateway-{}", self.adapter) };
        let mut coap = CoapConnector;
        let mut all: Vec<&mut dyn Connector<Session>> = vec![&mut mqtt, &mut coap];
        all.retain(|c| self.hint.is_none_or(|h| c.protocol() == h));
        let mut ranking = self.ranking.lock().expect("ranking lock");
        let order = ranking.order();
        match connect_ranked(&mut ranking, &mut all, self.address) {
            Ok(c) => {
                let rank = order.iter().position(|p| *p == c.protocol).map_or(0, |i| i as u32 + 1);
                Ok((c.session, c.protocol, rank, c.elapsed, c.logs))
            }
            Err(ConnectFailure::Exhausted(logs)) => Err(logs),
            Err(ConnectFailure::NoAdapters) => Err(Vec::new()),
        }
    }

    fn run(self) {
        let mut backoff = Backoff::default();
        while !self.stopped() {
            let (mut session, protocol, rank, elapsed, logs) = match self.connect() {
                Ok(c) => c,
                Err(logs) => {
                    warn!("adapter {}: no protocol reached {}", self.adapter, self.address);
                    let _ = self.tx.send(Event::ConnectFailed { adapter: self.adapter, logs });
                    self.pause(backoff.next_delay());
                    continue;
                }
            };
            if let Err(e) = session.subscribe_all() {
                warn!("adapter {}: subscribe failed: {e}", self.adapter);
                let _ = self.tx.send(Event::ConnectFailed { adapter: self.adapter, logs });
                self.pause(backoff.next_delay());
                continue;
            }
            backoff.reset();
            let _ = self.tx.send(Event::Connected { adapter: self.adapter, protocol, rank, elapsed, logs });
            let mut since_rescan = Duration::ZERO;
            while !self.stopped() {
                match session.poll(POLL) {
                    Ok(Some(message)) => {
                        let event = Event::Received { adapter: self.adapter, message, at_ms: now_ms() };
                        if self.tx.send(event).is_err() {
                            return;
                        }
                    }
                    Ok(None) => {
                        since_rescan += POLL;
                        if protocol == Protocol::Coap && since_rescan >= RESCAN {
                            since_rescan = Duration::ZERO;
                            if let Err(e) = session.subscribe_all() {
                                warn!("adapter {}: rescan failed: {e}", self.adapter);
                                break;
                            }
                        }
                    }
                    Err(e) => {
                        warn!("adapter {}: session lost: {e}", self.adapter);
                        break;
                    }
                }
            }
            let _ = self.tx.send(Event::Disconnected { adapter: self.adapter });
            if !self.stopped() {
                self.pause(backoff.next_delay());
            }
        }
    }
}
