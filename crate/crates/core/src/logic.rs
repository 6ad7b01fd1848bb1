//! Dual-modal actuator rules.
//!
//! A rule relates an independent reading (e.g. a phone's distance from home)
//! to a dependent one (e.g. living-room temperature) through a slope `k`: the
//! dependent value can move `k` units per independent unit. An actuator fires
//! when the dependent reading is on the wrong side of the goal and the
//! independent reading is close enough that acting now is needed:
//! `deficit > 0 && p <= deficit / k`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub const HEATER: u8 = 1;
pub const COOLER: u8 = 3;

/// Direction marker stored with reference and goal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "<")]
    Less,
}

impl Comparison {
    pub fn symbol(self) -> char {
        match self {
            Comparison::Greater => '>',
            Comparison::Less => '<',
        }
    }
}

/// What switching an actuator on does to the dependent reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Raises,
    Lowers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actuator {
    pub id: u8,
    pub name: String,
    pub effect: Effect,
}

impl Actuator {
    pub fn new(id: u8, name: &str, effect: Effect) -> Self {
        Actuator { id, name: name.into(), effect }
    }
}

/// The household fixture actuators: heater (1) and cooler (3).
pub fn default_actuators() -> Vec<Actuator> {
    alloc::vec![
        Actuator::new(HEATER, "heater", Effect::Raises),
        Actuator::new(COOLER, "cooler", Effect::Lowers),
    ]
}

/// A reading source: device id plus sensor id, e.g. `phone`/`pos`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SensorKey {
    pub device: String,
    pub sensor: String,
}

impl SensorKey {
    pub fn new(device: &str, sensor: &str) -> Self {
        SensorKey { device: device.into(), sensor: sensor.into() }
    }
}

impl fmt::Display for SensorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.device, self.sensor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub actuators: Vec<u8>,
    pub slope: f64,
    pub reference: (f64, Comparison),
    pub goal: (f64, Comparison),
    pub independent: SensorKey,
    pub dependent: SensorKey,
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if libm::trunc(v) == v && libm::fabs(v) < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Rule {
    /// `((1), 0.004, (1000, '>'), (21, '<'))`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("((")?;
        for (n, a) in self.actuators.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("), ")?;
        write_num(f, self.slope)?;
        f.write_str(", (")?;
        write_num(f, self.reference.0)?;
        write!(f, ", '{}'), (", self.reference.1.symbol())?;
        write_num(f, self.goal.0)?;
        write!(f, ", '{}'))", self.goal.1.symbol())
    }
}

/// Endpoints of an example trace: as the independent reading moves from
/// `indep_start` to `indep_end`, the dependent one must go from `dep_start`
/// to `dep_goal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub indep_start: f64,
    pub indep_end: f64,
    pub dep_start: f64,
    pub dep_goal: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogicError {
    #[error("trace has no span (independent or dependent endpoints coincide)")]
    DegenerateTrace,
    #[error("no candidate actuator can move the reading in the required direction")]
    NoActuator,
    #[error("missing reading for {0}")]
    MissingReading(SensorKey),
}

/// Learns a rule from a trace. The actuator is the first candidate whose
/// effect moves the dependent reading toward the goal.
pub fn learn_rule(
    trace: &Trace,
    candidates: &[Actuator],
    independent: SensorKey,
    dependent: SensorKey,
) -> Result<Rule, LogicError> {
    let indep_span = libm::fabs(trace.indep_start - trace.indep_end);
    let dep_span = libm::fabs(trace.dep_goal - trace.dep_start);
    if indep_span == 0.0 || dep_span == 0.0 || !indep_span.is_finite() || !dep_span.is_finite() {
        return Err(LogicError::DegenerateTrace);
    }
    let (needed, direction) = if trace.dep_start < trace.dep_goal {
        (Effect::Raises, Comparison::Less)
    } else {
        (Effect::Lowers, Comparison::Greater)
    };
    let actuator = candidates.iter().find(|a| a.effect == needed).ok_or(LogicError::NoActuator)?;
    let trend = if trace.indep_start > trace.indep_end {
        Comparison::Greater
    } else {
        Comparison::Less
    };
    Ok(Rule {
        actuators: alloc::vec![actuator.id],
        slope: dep_span / indep_span,
        reference: (trace.indep_start, trend),
        goal: (trace.dep_goal, direction),
        independent,
        dependent,
    })
}

impl Rule {
    /// Amount by which the dependent reading is on the wrong side of the goal.
    pub fn deficit(&self, dependent: f64) -> f64 {
        match self.goal.1 {
            Comparison::Less => self.goal.0 - dependent,
            Comparison::Greater => dependent - self.goal.0,
        }
    }

    pub fn fires(&self, independent: f64, dependent: f64) -> bool {
        let deficit = self.deficit(dependent);
        deficit > 0.0 && independent <= deficit / self.slope
    }
}

/// Actuator name to on/off, in actuator registration order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActuatorStateMap(pub Vec<(String, bool)>);

impl ActuatorStateMap {
    pub fn get(&self, name: &str) -> Option<bool> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for ActuatorStateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, (name, on)) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "'{name}': {}", if *on { "True" } else { "False" })?;
        }
        f.write_str("}")
    }
}

/// Evaluates every rule against the readings. Rules targeting the same
/// actuator are OR-ed; actuators no rule fires stay off.
pub fn evaluate_rules(
    rules: &[Rule],
    actuators: &[Actuator],
    readings: &BTreeMap<SensorKey, f64>,
) -> Result<ActuatorStateMap, LogicError> {
    let mut state: Vec<(String, bool)> = actuators.iter().map(|a| (a.name.clone(), false)).collect();
    for rule in rules {
        let p = *readings
            .get(&rule.independent)
            .ok_or_else(|| LogicError::MissingReading(rule.independent.clone()))?;
        let t = *readings
            .get(&rule.dependent)
            .ok_or_else(|| LogicError::MissingReading(rule.dependent.clone()))?;
        if rule.fires(p, t) {
            for id in &rule.actuators {
                if let Some(pos) = actuators.iter().position(|a| a.id == *id) {
                    state[pos].1 = true;
                }
            }
        }
    }
    Ok(ActuatorStateMap(state))
}

/// Rules keyed by their (independent, dependent) sensor pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleStore {
    rules: BTreeMap<(SensorKey, SensorKey), Vec<Rule>>,
}

impl RuleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores a rule under its own sensor pair. Structural duplicates are
    /// dropped; returns whether the rule was new.
    pub fn store(&mut self, rule: Rule) -> bool {
        let key = (rule.independent.clone(), rule.dependent.clone());
        let bucket = self.rules.entry(key).or_default();
        if bucket.contains(&rule) {
            return false;
        }
        bucket.push(rule);
        true
    }

    pub fn find(&self, independent: &SensorKey, dependent: &SensorKey) -> &[Rule] {
        self.rules
            .get(&(independent.clone(), dependent.clone()))
            .map_or(&[], Vec::as_slice)
    }

    pub fn all(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.rules.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn pos() -> SensorKey {
        SensorKey::new("phone", "pos")
    }

    fn temp() -> SensorKey {
        SensorKey::new("living_room", "temp")
    }

    fn heat_trace() -> Trace {
        Trace { indep_start: 1000.0, indep_end: 0.0, dep_start: 17.0, dep_goal: 21.0 }
    }

    #[test]
    fn degenerate_trace() {
        let t = Trace { indep_start: 5.0, indep_end: 5.0, dep_start: 17.0, dep_goal: 21.0 };
        assert_eq!(
            learn_rule(&t, &default_actuators(), pos(), temp()),
            Err(LogicError::DegenerateTrace)
        );
    }

    #[test]
    fn no_matching_actuator() {
        let only_cooler = [Actuator::new(COOLER, "cooler", Effect::Lowers)];
        assert_eq!(
            learn_rule(&heat_trace(), &only_cooler, pos(), temp()),
            Err(LogicError::NoActuator)
        );
    }

    #[test]
    fn display_matches_tuple_form() {
        let rule = learn_rule(&heat_trace(), &default_actuators(), pos(), temp()).unwrap();
        assert_eq!(rule.to_string(), "((1), 0.004, (1000, '>'), (21, '<'))");
    }

    #[test]
    fn missing_reading() {
        let rule = learn_rule(&heat_trace(), &default_actuators(), pos(), temp()).unwrap();
        let readings = BTreeMap::from([(pos(), 3.0)]);
        assert_eq!(
            evaluate_rules(&[rule], &default_actuators(), &readings),
            Err(LogicError::MissingReading(temp()))
        );
    }

    #[test]
    fn store_dedups_and_finds() {
        let mut store = RuleStore::new();
        let rule = learn_rule(&heat_trace(), &default_actuators(), pos(), temp()).unwrap();
        assert!(store.store(rule.clone()));
        assert!(!store.store(rule));
        assert_eq!(store.find(&pos(), &temp()).len(), 1);
        assert!(store.find(&temp(), &pos()).is_empty());
    }

    #[test]
    fn state_map_display() {
        let m = ActuatorStateMap(alloc::vec![("heater".into(), true), ("cooler".into(), false)]);
        assert_eq!(m.to_string(), "{'heater': True, 'cooler': False}");
    }
}
