//! Context sensing diversity: placing new sensors into statistical contexts.
//!
//! A [`Context`] groups sensors around an identifying attribute (a location,
//! an instant, a reading). Raw member values are retained per attribute so
//! that every aggregate is recomputed exactly rather than streamed.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsl::{evaluate, DslProgram, EvalError, IoExample, Registry, RegistryId, StageFault, SynthError, Synthesis, Synthesizer};

mod aggregate;

pub use aggregate::{aggregate, AttributeAggregate};

pub const EXCLUDE_STRINGS: u8 = 1;
pub const EXCLUDE_NUMBERS: u8 = 2;
pub const EXCLUDE_EMPTY: u8 = 3;
pub const EXCLUDE_DATES: u8 = 4;
pub const EXCLUDE_OUTSIDE_STD: u8 = 5;
pub const EXCLUDE_MISMATCHED_KEY: u8 = 6;
pub const ADD_SENSOR: u8 = 7;

/// One attribute value. Times are seconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrValue {
    Text(String),
    Number(f64),
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttrType {
    Text,
    Number,
    Time,
}

impl AttrValue {
    pub fn attr_type(&self) -> AttrType {
        match self {
            AttrValue::Text(_) => AttrType::Text,
            AttrValue::Number(_) => AttrType::Number,
            AttrValue::Time(_) => AttrType::Time,
        }
    }

    fn numeric(&self) -> Option<f64> {
        match self {
            AttrValue::Number(v) | AttrValue::Time(v) => Some(*v),
            AttrValue::Text(_) => None,
        }
    }
}

/// A sensor to be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorObservation {
    pub name: String,
    pub values: Vec<(String, AttrValue)>,
}

impl SensorObservation {
    pub fn new(name: &str) -> Self {
        SensorObservation { name: name.into(), values: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: AttrValue) -> Self {
        self.values.push((key.into(), value));
        self
    }

    pub fn get(&self, key: &str) -> Option<&AttrValue> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("context has no members")]
    NoMembers,
    #[error("identifying attribute `{0}` has no values")]
    MissingIdentifyingAttribute(String),
    #[error("attribute `{0}` mixes value types")]
    MixedTypes(String),
}

/// A statistical grouping of sensors keyed by an identifying attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub id: String,
    pub identifying_key: String,
    pub members: Vec<String>,
    /// Raw values per attribute, in first-seen attribute order.
    pub member_values: Vec<(String, Vec<AttrValue>)>,
}

impl Context {
    /// Builds a context from its members' observations. Attribute columns are
    /// the union of the members' attributes in first-seen order.
    pub fn from_members(
        id: &str,
        identifying_key: &str,
        members: &[SensorObservation],
    ) -> Result<Self, ContextError> {
        let mut ctx = Context {
            id: id.into(),
            identifying_key: identifying_key.into(),
            members: Vec::new(),
            member_values: Vec::new(),
        };
        for m in members {
            ctx.members.push(m.name.clone());
            for (k, v) in &m.values {
                match ctx.member_values.iter_mut().find(|(ck, _)| ck == k) {
                    Some((_, col)) => col.push(v.clone()),
                    None => ctx.member_values.push((k.clone(), alloc::vec![v.clone()])),
                }
            }
        }
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        if self.members.is_empty() {
            return Err(ContextError::NoMembers);
        }
        if self.column(&self.identifying_key).is_none_or(|c| c.is_empty()) {
            return Err(ContextError::MissingIdentifyingAttribute(self.identifying_key.clone()));
        }
        for (k, col) in &self.member_values {
            if let Some(first) = col.first() {
                if col.iter().any(|v| v.attr_type() != first.attr_type()) {
                    return Err(ContextError::MixedTypes(k.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn column(&self, key: &str) -> Option<&[AttrValue]> {
        self.member_values.iter().find(|(k, _)| k == key).map(|(_, c)| c.as_slice())
    }

    pub fn attr_type(&self, key: &str) -> Option<AttrType> {
        self.column(key)?.first().map(AttrValue::attr_type)
    }

    pub fn identifying_type(&self) -> Option<AttrType> {
        self.attr_type(&self.identifying_key)
    }

    pub fn aggregate(&self, key: &str) -> Option<AttributeAggregate> {
        aggregate(self.column(key)?)
    }

    /// Every attribute aggregate in column order.
    pub fn attributes(&self) -> Vec<(String, AttributeAggregate)> {
        self.member_values
            .iter()
            .filter_map(|(k, col)| aggregate(col).map(|a| (k.clone(), a)))
            .collect()
    }

    /// Whether the sensor's identifying value lies within the context's
    /// spread: equal to the modal value for text, within one population
    /// standard deviation of the mean otherwise (exact match when it is 0).
    pub fn admits(&self, sensor: &SensorObservation) -> bool {
        let Some(value) = sensor.get(&self.identifying_key) else {
            return false;
        };
        let Some(agg) = self.aggregate(&self.identifying_key) else {
            return false;
        };
        if value.attr_type() != agg.representative.attr_type() {
            return false;
        }
        match (value, &agg.representative) {
            (AttrValue::Text(v), AttrValue::Text(mode)) => v == mode,
            _ => {
                let (v, mean) = (value.numeric().unwrap_or(f64::NAN), agg.representative.numeric().unwrap_or(f64::NAN));
                if agg.std == 0.0 {
                    v == mean
                } else {
                    libm::fabs(v - mean) <= agg.std
                }
            }
        }
    }

    /// Appends the sensor as a member and its values to every attribute the
    /// context already tracks. A sensor that is already a member is ignored.
    pub fn add_sensor(&mut self, sensor: &SensorObservation) {
        if self.members.contains(&sensor.name) {
            return;
        }
        self.members.push(sensor.name.clone());
        for (k, col) in &mut self.member_values {
            if let Some(v) = sensor.get(k) {
                col.push(v.clone());
            }
        }
    }
}

/// The value threaded through registry `C` pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementState {
    pub sensor: SensorObservation,
    pub contexts: Vec<Context>,
}

/// Evaluator for registry `C`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContextRegistry;

impl Registry for ContextRegistry {
    type Value = PlacementState;

    fn id(&self) -> RegistryId {
        RegistryId::C
    }

    fn apply(&self, index: u8, input: &PlacementState) -> Result<PlacementState, StageFault> {
        let keep = |f: &dyn Fn(&Context) -> bool| PlacementState {
            sensor: input.sensor.clone(),
            contexts: input.contexts.iter().filter(|c| f(c)).cloned().collect(),
        };
        Ok(match index {
            EXCLUDE_STRINGS => keep(&|c| c.identifying_type() != Some(AttrType::Text)),
            EXCLUDE_NUMBERS => keep(&|c| c.identifying_type() != Some(AttrType::Number)),
            EXCLUDE_EMPTY => keep(&|c| !c.members.is_empty() && c.identifying_type().is_some()),
            EXCLUDE_DATES => keep(&|c| c.identifying_type() != Some(AttrType::Time)),
            EXCLUDE_OUTSIDE_STD => keep(&|c| c.admits(&input.sensor)),
            EXCLUDE_MISMATCHED_KEY => keep(&|c| input.sensor.get(&c.identifying_key).is_some()),
            ADD_SENSOR => {
                let mut out = input.clone();
                for c in &mut out.contexts {
                    c.add_sensor(&input.sensor);
                }
                out
            }
            _ => return Err(StageFault::Malformed("unknown context function")),
        })
    }
}

/// Runs a placement program and returns only the surviving contexts.
pub fn run_placement(
    program: &DslProgram,
    sensor: &SensorObservation,
    contexts: &[Context],
) -> Result<Vec<Context>, EvalError> {
    let state = PlacementState { sensor: sensor.clone(), contexts: contexts.to_vec() };
    Ok(evaluate(&ContextRegistry, program, &state)?.contexts)
}

/// Runs a placement program and merges survivors back: contexts the program
/// kept are replaced by their updated form, the rest are returned untouched.
pub fn place(
    sensor: &SensorObservation,
    contexts: &[Context],
    program: &DslProgram,
) -> Result<Vec<Context>, EvalError> {
    let survivors = run_placement(program, sensor, contexts)?;
    Ok(contexts
        .iter()
        .map(|c| survivors.iter().find(|s| s.id == c.id).unwrap_or(c).clone())
        .collect())
}

/// Learns a placement program mapping (sensor, contexts) to the expected
/// surviving, updated contexts.
pub fn learn_placement(
    synthesizer: &mut Synthesizer,
    sensor: &SensorObservation,
    contexts: &[Context],
    expected: &[Context],
) -> Result<Synthesis, SynthError> {
    let example = IoExample::new(
        PlacementState { sensor: sensor.clone(), contexts: contexts.to_vec() },
        PlacementState { sensor: sensor.clone(), contexts: expected.to_vec() },
    );
    synthesizer.learn(&ContextRegistry, &[example])
}
