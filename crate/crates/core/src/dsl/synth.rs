//! Enumerative synthesis of pipelines from input/output examples.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::{evaluate, DslProgram, QTable, Registry};

pub const DEFAULT_MAX_LEN: usize = 4;

/// One input/output example. Pipelines are unary, so `input` must hold
/// exactly one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoExample<V> {
    pub input: Vec<V>,
    pub output: V,
}

impl<V> IoExample<V> {
    pub fn new(input: V, output: V) -> Self {
        IoExample { input: vec![input], output }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("no examples supplied")]
    NoExamples,
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
    #[error("example {example} has {arity} inputs; pipelines take exactly one")]
    UnsupportedArity { example: usize, arity: usize },
    #[error("examples {first} and {second} share an input but disagree on the output")]
    ExampleConflict { first: usize, second: usize },
    #[error("no pipeline of length <= {max_len} satisfies the examples ({candidates_visited} candidates tried)")]
    NotFound { max_len: usize, candidates_visited: usize },
}

/// A successful search result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesis {
    pub program: DslProgram,
    /// Candidates evaluated, the winner included.
    pub candidates_visited: usize,
}

/// Returns the first pipeline, in Q-ranked enumeration order, that maps every
/// example input to its output exactly.
///
/// Order: mean Q of the pipeline's stages descending, then length ascending,
/// then lexicographic index order. The Q-table is read, never written.
pub fn synthesize<R: Registry>(
    registry: &R,
    examples: &[IoExample<R::Value>],
    max_len: usize,
    qtable: &QTable,
) -> Result<Synthesis, SynthError> {
    if examples.is_empty() {
        return Err(SynthError::NoExamples);
    }
    if max_len == 0 {
        return Err(SynthError::ZeroMaxLen);
    }
    for (n, ex) in examples.iter().enumerate() {
        if ex.input.len() != 1 {
            return Err(SynthError::UnsupportedArity { example: n, arity: ex.input.len() });
        }
    }
    for (i, a) in examples.iter().enumerate() {
        for (j, b) in examples.iter().enumerate().skip(i + 1) {
            if a.input == b.input && a.output != b.output {
                return Err(SynthError::ExampleConflict { first: i, second: j });
            }
        }
    }

    let id = registry.id();
    let mut candidates = enumerate(&registry.indices(), max_len);
    // Stable: equal scores keep (length, lexicographic) order.
    candidates.sort_by_key(|c| Reverse(qtable.score(id, c)));

    let mut visited = 0;
    for stages in candidates {
        visited += 1;
        // Indices come from the registry itself.
        let program = DslProgram { registry: id, stages };
        let consistent = examples.iter().all(|ex| {
            evaluate(registry, &program, &ex.input[0]).is_ok_and(|out| out == ex.output)
        });
        if consistent {
            return Ok(Synthesis { program, candidates_visited: visited });
        }
    }
    Err(SynthError::NotFound { max_len, candidates_visited: visited })
}

/// Every pipeline of length `0..=max_len`, by length then lexicographically.
fn enumerate(indices: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut all: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * indices.len());
        for prefix in &frontier {
            for &i in indices {
                let mut p = prefix.clone();
                p.push(i);
                next.push(p);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// Owner of a live Q-table: synthesizes and learns from successes.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    qtable: QTable,
    max_len: usize,
    /// Reward applied to the winning program's functions.
    pub reward: f64,
    successes: u64,
    failures: u64,
    candidates_visited: u64,
}

impl Default for Synthesizer {
    fn default() -> Self {
        Synthesizer::new(QTable::default(), DEFAULT_MAX_LEN)
    }
}

impl Synthesizer {
    pub fn new(qtable: QTable, max_len: usize) -> Self {
        Synthesizer { qtable, max_len, reward: 1.0, successes: 0, failures: 0, candidates_visited: 0 }
    }

    pub fn qtable(&self) -> &QTable {
        &self.qtable
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    pub fn candidates_visited(&self) -> u64 {
        self.candidates_visited
    }

    /// Synthesizes against the current table, then rewards the winner.
    /// Failures leave the table untouched.
    pub fn learn<R: Registry>(
        &mut self,
        registry: &R,
        examples: &[IoExample<R::Value>],
    ) -> Result<Synthesis, SynthError> {
        match synthesize(registry, examples, self.max_len, &self.qtable) {
            Ok(found) => {
                self.successes += 1;
                self.candidates_visited += found.candidates_visited as u64;
                self.qtable.update(&found.program, self.reward);
                Ok(found)
            }
            Err(e) => {
                self.failures += 1;
                if let SynthError::NotFound { candidates_visited, .. } = e {
                    self.candidates_visited += candidates_visited as u64;
                }
                Err(e)
            }
        }
    }
}
