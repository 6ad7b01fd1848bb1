use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;

use super::{DslProgram, RegistryId};

/// Stateless per-function values that order synthesis enumeration.
///
/// Each registry function carries a single value updated bandit-style after a
/// successful synthesis: `q <- q + alpha * (reward - q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    entries: BTreeMap<(RegistryId, u8), f64>,
    alpha: f64,
    initial_q: f64,
}

impl Default for QTable {
    fn default() -> Self {
        QTable::new(Self::DEFAULT_ALPHA, 0.0)
    }
}

impl QTable {
    pub const DEFAULT_ALPHA: f64 = 0.3;

    /// # Panics
    /// If `alpha` is outside `(0, 1]` or `initial_q` is not finite.
    pub fn new(alpha: f64, initial_q: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        assert!(initial_q.is_finite(), "initial_q must be finite");
        QTable { entries: BTreeMap::new(), alpha, initial_q }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self, registry: RegistryId, index: u8) -> f64 {
        self.entries.get(&(registry, index)).copied().unwrap_or(self.initial_q)
    }

    pub fn set(&mut self, registry: RegistryId, index: u8, q: f64) {
        assert!(q.is_finite());
        self.entries.insert((registry, index), q);
    }

    /// Applies one update per distinct function of `program`.
    pub fn update(&mut self, program: &DslProgram, reward: f64) {
        let registry = program.registry();
        let distinct: BTreeSet<u8> = program.stages().iter().copied().collect();
        for index in distinct {
            let q = self.q(registry, index);
            let next = q + self.alpha * (reward - q);
            if next.is_finite() {
                self.entries.insert((registry, index), next);
            }
        }
    }

    /// Mean q over the stages of a pipeline, quantized to 1e-9 so that
    /// mathematically equal means compare equal. The empty pipeline scores
    /// `initial_q`.
    pub fn score(&self, registry: RegistryId, stages: &[u8]) -> i64 {
        let mean = if stages.is_empty() {
            self.initial_q
        } else {
            stages.iter().map(|i| self.q(registry, *i)).sum::<f64>() / stages.len() as f64
        };
        libm::round(mean * 1e9) as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::list::{HEAD, REST};

    fn prog(stages: &[u8]) -> DslProgram {
        DslProgram::new(RegistryId::L, stages.to_vec()).unwrap()
    }

    #[test]
    fn one_step_update() {
        let mut q = QTable::new(0.5, 0.0);
        q.update(&prog(&[HEAD]), 1.0);
        assert_eq!(q.q(RegistryId::L, HEAD), 0.5);
        assert_eq!(q.q(RegistryId::L, REST), 0.0);
    }

    #[test]
    fn zero_reward_is_fixed_point_at_zero() {
        let mut q = QTable::new(0.5, 0.0);
        q.update(&prog(&[HEAD]), 0.0);
        assert_eq!(q.q(RegistryId::L, HEAD), 0.0);
    }

    #[test]
    fn two_updates() {
        // 0 -> 0.5 -> 0.5 + 0.5 * (1 - 0.5) = 0.75
        let mut q = QTable::new(0.5, 0.0);
        q.update(&prog(&[HEAD]), 1.0);
        q.update(&prog(&[HEAD]), 1.0);
        assert_eq!(q.q(RegistryId::L, HEAD), 0.75);
    }

    #[test]
    fn repeated_stage_updates_once() {
        let mut q = QTable::new(0.5, 0.0);
        q.update(&prog(&[REST, REST, HEAD]), 1.0);
        assert_eq!(q.q(RegistryId::L, REST), 0.5);
    }

    #[test]
    fn score_is_mean() {
        let mut q = QTable::new(0.5, 0.0);
        q.set(RegistryId::L, HEAD, 0.3);
        assert_eq!(q.score(RegistryId::L, &[HEAD]), q.score(RegistryId::L, &[HEAD, HEAD, HEAD]));
        assert!(q.score(RegistryId::L, &[HEAD]) > q.score(RegistryId::L, &[HEAD, REST]));
        assert_eq!(q.score(RegistryId::L, &[]), 0);
    }
}
