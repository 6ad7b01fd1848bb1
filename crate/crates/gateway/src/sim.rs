//! Deterministic connection simulations for the evaluation harness.

use std::net::SocketAddr;
use std::time::Duration;

use edge_gateway_core::adapter::{
    connect_ranked, Attempt, ConnectFailure, Connector, Protocol, ProtocolRanking, RetryPolicy,
};
use edge_gateway_core::stats::{simulate_connections, ConnectionStats, SimConfig, StatsError};
use serde::Serialize;

/// Connector whose handshakes take a fixed time and never touch the network.
pub struct ScriptedConnector {
    pub protocol: Protocol,
    pub succeeds: bool,
    pub cost: Duration,
}

impl Connector<()> for ScriptedConnector {
    fn protocol(&self) -> Protocol {
        self.protocol
    }

    fn attempt(&mut self, _: SocketAddr, timeout: Duration) -> Attempt<()> {
        if self.succeeds {
            Attempt::Connected { session: (), elapsed: self.cost }
        } else {
            Attempt::Failed { elapsed: self.cost.min(timeout) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCost {
    pub rank: u32,
    pub failure_secs: f64,
    pub success_secs: f64,
    /// `rank * failure`: time to walk the ranking up to and including
    /// the target.
    pub search_secs: f64,
    /// Elapsed time reported by `connect_ranked` against `rank - 1` failing
    /// adapters followed by the target.
    pub connect_secs: f64,
}

/// Runs `connect_ranked` over scripted adapters with the target at `rank`.
pub fn rank_cost(rank: u32, failure: Duration, success: Duration) -> Result<RankCost, ConnectFailure> {
    let rank = rank.max(1);
    let mut ranking = ProtocolRanking::new();
    let mut connectors: Vec<ScriptedConnector> = (1..=rank)
        .map(|i| ScriptedConnector { protocol: Protocol::Custom(i as u16), succeeds: i == rank, cost: if i == rank { success } else { failure } })
        .collect();
    for (i, c) in connectors.iter().enumerate() {
        let policy = RetryPolicy::new(failure.max(success).max(Duration::from_nanos(1)), 1).expect("positive timeout");
        ranking.register(c.protocol, policy);
        ranking.set_usage(c.protocol, u64::from(rank) - i as u64);
    }
    let mut dyns: Vec<&mut dyn Connector<()>> = connectors.iter_mut().map(|c| c as &mut dyn Connector<()>).collect();
    let endpoint: SocketAddr = ([127, 0, 0, 1], 9).into();
    let done = connect_ranked(&mut ranking, &mut dyns, endpoint)?;
    Ok(RankCost {
        rank,
        failure_secs: failure.as_secs_f64(),
        success_secs: success.as_secs_f64(),
        search_secs: edge_gateway_core::stats::rank_search_time(rank, failure).as_secs_f64(),
        connect_secs: done.elapsed.as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub protocol: String,
    pub timeout_secs: f64,
    pub attempts: u32,
    pub failure_rate: f64,
    pub seed: u64,
    pub stats: ConnectionStats,
}

pub fn simulate(protocol: Protocol, policy: RetryPolicy, trials: u64, rate: f64, seed: u64) -> Result<SimReport, StatsError> {
    let stats = simulate_connections(&SimConfig { trials, attempts: policy.attempts(), failure_rate: rate, seed })?;
    Ok(SimReport {
        protocol: protocol.to_string(),
        timeout_secs: policy.timeout().as_secs_f64(),
        attempts: policy.attempts(),
        failure_rate: rate,
        seed,
        stats,
    })
}
