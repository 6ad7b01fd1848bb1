//! Evaluation toolkit: Spearman correlation, the rank-cost model, seeded
//! connection-failure simulation and run counters.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::Protocol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooShort,
    #[error("a constant input has no rank correlation")]
    DegenerateInput,
    #[error("failure rate must lie in [0, 1)")]
    Rate,
    #[error("trials and attempts must be at least 1")]
    Empty,
}

/// 1-based ranks; tied values share their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Tie-corrected Spearman rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort);
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Expected search time when the working adapter sits at `rank` (1-based)
/// and every rank costs `mean_failure`.
pub fn rank_search_time(rank: u32, mean_failure: Duration) -> Duration {
    mean_failure * rank
}

/// Connect time at `rank` with per-rank failure cost `failure` and a
/// successful handshake taking `success`.
pub fn rank_connect_time(rank: u32, failure: Duration, success: Duration) -> Duration {
    failure * rank.saturating_sub(1) + success
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub attempts: u32,
    pub failure_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionStats {
    pub trials: u64,
    pub attempts: u64,
    pub successes: u64,
    pub first_attempt_failures: u64,
    pub complete_failures: u64,
}

/// Bernoulli failure per attempt; a trial fails completely when every
/// attempt fails. Deterministic for a given seed.
pub fn simulate_connections(cfg: &SimConfig) -> Result<ConnectionStats, StatsError> {
    if !(0.0..1.0).contains(&cfg.failure_rate) {
        return Err(StatsError::Rate);
    }
    if cfg.trials == 0 || cfg.attempts == 0 {
        return Err(StatsError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = ConnectionStats { trials: cfg.trials, ..ConnectionStats::default() };
    for _ in 0..cfg.trials {
        let mut connected = false;
        for attempt in 0..cfg.attempts {
            s.attempts += 1;
            let failed = rng.random::<f64>() < cfg.failure_rate;
            if !failed {
                connected = true;
                break;
            }
            if attempt == 0 {
                s.first_attempt_failures += 1;
            }
        }
        if connected {
            s.successes += 1;
        } else {
            s.complete_failures += 1;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolCounters {
    pub attempts: u64,
    pub successes: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchCounters {
    pub delivered: u64,
    pub classified: u64,
    pub malformed: u64,
    pub rejected: u64,
}

impl DispatchCounters {
    pub fn total(&self) -> u64 {
        self.delivered + self.classified + self.malformed
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisCounters {
    pub candidates_visited: u64,
    pub successes: u64,
    pub failures: u64,
}

/// Monotone counters for one gateway run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Keyed by protocol name.
    pub protocols: BTreeMap<String, ProtocolCounters>,
    /// Elapsed connect time per successful connection, keyed by the rank
    /// (1-based) the winning adapter held.
    pub rank_elapsed: BTreeMap<u32, Vec<Duration>>,
    pub dispatch: DispatchCounters,
    pub synthesis: SynthesisCounters,
}

impl RunStats {
    pub fn record_attempts(&mut self, protocol: Protocol, attempts: u64, succeeded: bool) {
        let c = self.protocols.entry(protocol.to_string()).or_default();
        c.attempts += attempts;
        if succeeded {
            c.successes += 1;
        } else {
            c.failures += 1;
        }
    }

    pub fn record_rank(&mut self, rank: u32, elapsed: Duration) {
        self.rank_elapsed.entry(rank).or_default().push(elapsed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[2.0, 2.0, 3.0, 10.0, 10.0]), vec![1.5, 1.5, 3.0, 4.5, 4.5]);
        assert_eq!(average_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn spearman_errors() {
        assert_eq!(spearman(&[1.0], &[1.0]), Err(StatsError::TooShort));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(StatsError::DegenerateInput));
    }

    #[test]
    fn perfect_monotone() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&xs, &xs), Ok(1.0));
        assert_eq!(spearman(&xs, &[4.0, 3.0, 2.0, 1.0]), Ok(-1.0));
    }

    #[test]
    fn rank_models() {
        let c = Duration::from_millis(350);
        assert_eq!(rank_search_time(10, c), Duration::from_millis(3500));
        assert_eq!(rank_connect_time(1, c, Duration::from_millis(20)), Duration::from_millis(20));
        assert_eq!(rank_connect_time(10, c, c), Duration::from_millis(3500));
    }

    #[test]
    fn simulation_edges() {
        let base = SimConfig { trials: 500, attempts: 1, failure_rate: 0.0, seed: 1 };
        let s = simulate_connections(&base).unwrap();
        assert_eq!((s.first_attempt_failures, s.complete_failures, s.successes), (0, 0, 500));
        assert_eq!(simulate_connections(&SimConfig { failure_rate: 1.0, ..base }), Err(StatsError::Rate));
        assert_eq!(simulate_connections(&SimConfig { trials: 0, ..base }), Err(StatsError::Empty));
        let noisy = SimConfig { failure_rate: 0.3, seed: 9, ..base };
        assert_eq!(simulate_connections(&noisy), simulate_connections(&noisy));
    }
}
