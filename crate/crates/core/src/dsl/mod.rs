//! Domain-specific languages as indexed function registries.
//!
//! A program is a linear pipeline of function indices applied left to right.
//! Element access at position `k` is spelled as `k` REST stages followed by a
//! HEAD, so no nesting is needed.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub mod list;
mod qtable;
mod synth;

pub use qtable::QTable;
pub use synth::{synthesize, IoExample, SynthError, Synthesis, Synthesizer, DEFAULT_MAX_LEN};

/// Identifies which registry the indices of a program refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegistryId {
    /// Integer-list functions used for device clustering.
    L,
    /// Message restructuring functions used for dialect translation.
    I,
    /// Context filtering and placement functions.
    C,
}

/// Semantic kind of a value flowing through a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Scalar,
    List,
    Record,
    Sequence,
    ContextSet,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Scalar => "scalar",
            ValueKind::List => "list",
            ValueKind::Record => "record",
            ValueKind::Sequence => "sequence",
            ValueKind::ContextSet => "context-set",
        };
        f.write_str(s)
    }
}

/// Static description of one registry entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionInfo {
    pub index: u8,
    pub name: &'static str,
    pub input: ValueKind,
    pub output: ValueKind,
}

const fn info(index: u8, name: &'static str, input: ValueKind, output: ValueKind) -> FunctionInfo {
    FunctionInfo { index, name, input, output }
}

use ValueKind::*;

static LIST_FUNCTIONS: [FunctionInfo; 9] = [
    info(1, "head", List, Scalar),
    info(2, "rest", List, List),
    info(3, "last", List, Scalar),
    info(4, "reverse", List, List),
    info(5, "sort", List, List),
    info(6, "sum", List, Scalar),
    info(7, "count", List, Scalar),
    info(8, "maximum", List, Scalar),
    info(9, "minimum", List, Scalar),
];

static INTEROP_FUNCTIONS: [FunctionInfo; 4] = [
    info(1, "unpack_payload", Record, Record),
    info(2, "extract_packet", Record, Sequence),
    info(3, "pack_properties", Sequence, Sequence),
    info(4, "label_packet", Sequence, Record),
];

static CONTEXT_FUNCTIONS: [FunctionInfo; 7] = [
    info(1, "exclude_strings", ContextSet, ContextSet),
    info(2, "exclude_numbers", ContextSet, ContextSet),
    info(3, "exclude_empty", ContextSet, ContextSet),
    info(4, "exclude_dates", ContextSet, ContextSet),
    info(5, "exclude_outside_std", ContextSet, ContextSet),
    info(6, "exclude_mismatched_key", ContextSet, ContextSet),
    info(7, "add_sensor", ContextSet, ContextSet),
];

impl RegistryId {
    pub const ALL: [RegistryId; 3] = [RegistryId::L, RegistryId::I, RegistryId::C];

    /// All functions of this registry, ordered by index.
    pub fn functions(self) -> &'static [FunctionInfo] {
        match self {
            RegistryId::L => &LIST_FUNCTIONS,
            RegistryId::I => &INTEROP_FUNCTIONS,
            RegistryId::C => &CONTEXT_FUNCTIONS,
        }
    }

    pub fn function(self, index: u8) -> Option<&'static FunctionInfo> {
        self.functions().iter().find(|f| f.index == index)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegistryId::L => "L",
            RegistryId::I => "I",
            RegistryId::C => "C",
        }
    }

    pub fn parse(s: &str) -> Option<RegistryId> {
        RegistryId::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for RegistryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors building or parsing a program.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("registry {registry} has no function with index {index}")]
    UnknownIndex { registry: RegistryId, index: u32 },
}

/// A linear pipeline of registry function indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DslProgram {
    registry: RegistryId,
    stages: Vec<u8>,
}

impl DslProgram {
    /// Builds a program, checking every index against the registry.
    pub fn new(registry: RegistryId, stages: Vec<u8>) -> Result<Self, ProgramError> {
        if let Some(&bad) = stages.iter().find(|&&i| registry.function(i).is_none()) {
            return Err(ProgramError::UnknownIndex { registry, index: bad.into() });
        }
        Ok(DslProgram { registry, stages })
    }

    /// The identity program of a registry.
    pub fn identity(registry: RegistryId) -> Self {
        DslProgram { registry, stages: Vec::new() }
    }

    pub fn registry(&self) -> RegistryId {
        self.registry
    }

    pub fn stages(&self) -> &[u8] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Canonical one-line text form, newline terminated: `L: 2 1\n`.
    pub fn serialize(&self) -> String {
        let mut out = String::from(self.registry.as_str());
        out.push(':');
        for idx in &self.stages {
            out.push(' ');
            push_u8(&mut out, *idx);
        }
        out.push('\n');
        out
    }

    /// Parses the one-line text form. A single trailing newline is accepted.
    pub fn parse(text: &str) -> Result<Self, ProgramError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let body = body.strip_suffix('\r').unwrap_or(body);
        if body.contains('\n') {
            return Err(parse_err(2, 1, "program must be a single line"));
        }
        let Some(colon) = body.find(':') else {
            return Err(parse_err(1, body.len() + 1, "expected `<registry>:`"));
        };
        let id = body[..colon].trim();
        let registry = RegistryId::parse(id)
            .ok_or_else(|| parse_err(1, 1, "unknown registry id; expected L, I or C"))?;

        let mut stages = Vec::new();
        let rest = &body[colon + 1..];
        let mut offset = colon + 1;
        for token in rest.split(' ') {
            let column = offset + 1;
            offset += token.len() + 1;
            if token.is_empty() {
                continue;
            }
            let value: u32 = token
                .parse()
                .map_err(|_| parse_err(1, column, "expected a function index"))?;
            let index = u8::try_from(value)
                .ok()
                .filter(|i| registry.function(*i).is_some())
                .ok_or(ProgramError::UnknownIndex { registry, index: value })?;
            stages.push(index);
        }
        Ok(DslProgram { registry, stages })
    }

    /// Human readable form listing names, e.g. `(2 (extract_packet), 3 (pack_properties))`.
    pub fn describe(&self) -> String {
        let mut out = String::from("(");
        for (n, idx) in self.stages.iter().enumerate() {
            if n > 0 {
                out.push_str(", ");
            }
            push_u8(&mut out, *idx);
            out.push_str(" (");
            out.push_str(self.registry.function(*idx).map_or("?", |f| f.name));
            out.push(')');
        }
        out.push(')');
        out
    }
}

impl fmt::Display for DslProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.serialize().trim_end())
    }
}

fn push_u8(out: &mut String, v: u8) {
    use core::fmt::Write;
    let _ = write!(out, "{v}");
}

fn parse_err(line: usize, column: usize, message: &str) -> ProgramError {
    ProgramError::Parse { line, column, message: message.into() }
}

/// Why a single stage could not be applied.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StageFault {
    #[error("empty list")]
    EmptyList,
    #[error("expected {expected} input, found {found}")]
    KindMismatch { expected: ValueKind, found: ValueKind },
    #[error("malformed input: {0}")]
    Malformed(&'static str),
}

/// Evaluation failure, naming the failing stage position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("program targets registry {program} but evaluator is {evaluator}")]
    RegistryMismatch { program: RegistryId, evaluator: RegistryId },
    #[error("stage {stage} (function {index}) failed: {fault}")]
    Stage { stage: usize, index: u8, fault: StageFault },
}

impl EvalError {
    pub fn fault(&self) -> Option<&StageFault> {
        match self {
            EvalError::Stage { fault, .. } => Some(fault),
            EvalError::RegistryMismatch { .. } => None,
        }
    }
}

/// A concrete function registry: the evaluator for one [`RegistryId`].
///
/// `apply` must not mutate its input; it returns a fresh value or a fault.
pub trait Registry {
    type Value: Clone + PartialEq + fmt::Debug;

    fn id(&self) -> RegistryId;

    fn apply(&self, index: u8, input: &Self::Value) -> Result<Self::Value, StageFault>;

    /// Indices in enumeration order.
    fn indices(&self) -> Vec<u8> {
        self.id().functions().iter().map(|f| f.index).collect()
    }
}

/// Threads `input` through every stage of `program`.
pub fn evaluate<R: Registry>(
    registry: &R,
    program: &DslProgram,
    input: &R::Value,
) -> Result<R::Value, EvalError> {
    if program.registry() != registry.id() {
        return Err(EvalError::RegistryMismatch {
            program: program.registry(),
            evaluator: registry.id(),
        });
    }
    let mut value = input.clone();
    for (stage, &index) in program.stages().iter().enumerate() {
        value = registry
            .apply(index, &value)
            .map_err(|fault| EvalError::Stage { stage, index, fault })?;
    }
    Ok(value)
}
