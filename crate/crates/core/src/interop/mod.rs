//! Translation between MQTT client message dialects.
//!
//! Two client libraries shape the same PUBLISH differently. The Paho-style
//! message is a keyed record whose `packet` field holds the flat packet
//! sequence; the gmqtt-style message is an ordered packet sequence with the
//! parsed properties and the unparsed tail appended. Translation programs
//! over registry `I` are learned from examples and cached per dialect pair.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{
    evaluate, DslProgram, EvalError, IoExample, Registry, RegistryId, StageFault, SynthError,
    Synthesis, Synthesizer, ValueKind,
};

mod envelope;
mod value;

pub use envelope::{EnvelopeError, MessageEnvelope};
pub use value::MsgValue;

pub const UNPACK_PAYLOAD: u8 = 1;
pub const EXTRACT_PACKET: u8 = 2;
pub const PACK_PROPERTIES: u8 = 3;
pub const LABEL_PACKET: u8 = 4;

/// Number of fixed header fields at the front of every packet sequence:
/// command, dup, qos, retain, remaining length, topic length, topic, mid.
pub const HEADER_FIELDS: usize = 8;

/// Evaluator for registry `I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteropRegistry;

impl Registry for InteropRegistry {
    type Value = MsgValue;

    fn id(&self) -> RegistryId {
        RegistryId::I
    }

    fn apply(&self, index: u8, input: &MsgValue) -> Result<MsgValue, StageFault> {
        match index {
            UNPACK_PAYLOAD => unpack_payload(input),
            EXTRACT_PACKET => extract_packet(input),
            PACK_PROPERTIES => pack_properties(input),
            LABEL_PACKET => label_packet(input),
            _ => Err(StageFault::Malformed("unknown interop function")),
        }
    }
}

fn expect_record(v: &MsgValue) -> Result<&[(String, MsgValue)], StageFault> {
    v.as_record()
        .ok_or(StageFault::KindMismatch { expected: ValueKind::Record, found: v.kind() })
}

fn expect_seq(v: &MsgValue) -> Result<&[MsgValue], StageFault> {
    v.as_seq()
        .ok_or(StageFault::KindMismatch { expected: ValueKind::Sequence, found: v.kind() })
}

/// Replaces a sequence-valued `payload` field by a record labelled
/// `payload part 1`, `payload part 2`, ...
fn unpack_payload(input: &MsgValue) -> Result<MsgValue, StageFault> {
    let fields = expect_record(input)?;
    let mut out = Vec::with_capacity(fields.len());
    let mut found = false;
    for (k, v) in fields {
        if k == "payload" {
            let parts = v.as_seq().ok_or(StageFault::Malformed("payload is not a sequence"))?;
            let labelled = parts
                .iter()
                .enumerate()
                .map(|(n, p)| (format!("payload part {}", n + 1), p.clone()))
                .collect();
            out.push((k.clone(), MsgValue::Record(labelled)));
            found = true;
        } else {
            out.push((k.clone(), v.clone()));
        }
    }
    if !found {
        return Err(StageFault::Malformed("record has no payload field"));
    }
    Ok(MsgValue::Record(out))
}

/// Projects the raw packet sequence out of a keyed record.
fn extract_packet(input: &MsgValue) -> Result<MsgValue, StageFault> {
    let fields = expect_record(input)?;
    let packet = fields
        .iter()
        .find(|(k, _)| k == "packet")
        .map(|(_, v)| v)
        .ok_or(StageFault::Malformed("record has no packet field"))?;
    expect_seq(packet)?;
    Ok(packet.clone())
}

/// Folds every field after the fixed header into one nested sequence.
fn pack_properties(input: &MsgValue) -> Result<MsgValue, StageFault> {
    let items = expect_seq(input)?;
    if items.len() <= HEADER_FIELDS {
        return Err(StageFault::Malformed("packet has no property fields to pack"));
    }
    let mut out: Vec<MsgValue> = items[..HEADER_FIELDS].to_vec();
    out.push(MsgValue::Seq(items[HEADER_FIELDS..].to_vec()));
    Ok(MsgValue::Seq(out))
}

/// Wraps a packet sequence into a keyed record with canonical field names.
///
/// Element 8 is the payload; an optional element 9 lists parsed properties
/// and an optional element 10 is the unparsed tail. `pos` is the read cursor
/// into that tail and `to_process` the bytes left after it.
fn label_packet(input: &MsgValue) -> Result<MsgValue, StageFault> {
    let items = expect_seq(input)?;
    if items.len() < HEADER_FIELDS + 1 || items.len() > HEADER_FIELDS + 3 {
        return Err(StageFault::Malformed("packet sequence has the wrong arity"));
    }
    let properties: &[MsgValue] = match items.get(HEADER_FIELDS + 1) {
        Some(p) => p.as_seq().ok_or(StageFault::Malformed("properties are not a sequence"))?,
        None => &[],
    };
    let tail_len = match items.get(HEADER_FIELDS + 2) {
        Some(MsgValue::Str(s)) => s.len(),
        Some(_) => return Err(StageFault::Malformed("unparsed tail is not a string")),
        None => 0,
    };
    let pos = 0usize;
    let mut info = Vec::with_capacity(properties.len() + 1);
    info.push(MsgValue::Int(properties.len() as i64));
    info.extend(properties.iter().cloned());
    Ok(MsgValue::Record(alloc::vec![
        ("command".into(), items[0].clone()),
        ("qos".into(), items[2].clone()),
        ("pos".into(), MsgValue::Int(pos as i64)),
        ("mid".into(), items[7].clone()),
        ("info".into(), MsgValue::Seq(info)),
        ("packet".into(), MsgValue::Seq(items[..=HEADER_FIELDS].to_vec())),
        ("to_process".into(), MsgValue::Int((tail_len - pos) as i64)),
    ]))
}

/// A message convention spoken by one family of MQTT clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    /// Keyed record carrying the flat packet (Eclipse Paho Python style).
    Paho,
    /// Ordered packet sequence (gmqtt style).
    Gmqtt,
    /// The normalized envelope written as a keyed record.
    Standard,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Paho => "paho",
            Dialect::Gmqtt => "gmqtt",
            Dialect::Standard => "standard",
        })
    }
}

impl core::str::FromStr for Dialect {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "paho" | "P" => Ok(Dialect::Paho),
            "gmqtt" | "G" => Ok(Dialect::Gmqtt),
            "standard" | "S" => Ok(Dialect::Standard),
            _ => Err(()),
        }
    }
}

/// A learned program bound to the dialect pair it translates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationProgram {
    pub source: Dialect,
    pub target: Dialect,
    pub program: DslProgram,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("no translation program for {0} -> {1}")]
    NoProgram(Dialect, Dialect),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synthesis(#[from] SynthError),
}

/// Cache of learned translation programs keyed by (source, target).
#[derive(Debug, Clone, Default)]
pub struct Translator {
    programs: BTreeMap<(Dialect, Dialect), TranslationProgram>,
    syntheses: u64,
}

impl Translator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Learns a program for `source -> target` and caches it.
    pub fn learn_translation(
        &mut self,
        synthesizer: &mut Synthesizer,
        examples: &[IoExample<MsgValue>],
        source: Dialect,
        target: Dialect,
    ) -> Result<Synthesis, TranslateError> {
        self.syntheses += 1;
        let found = synthesizer.learn(&InteropRegistry, examples)?;
        self.insert(TranslationProgram { source, target, program: found.program.clone() });
        Ok(found)
    }

    pub fn insert(&mut self, program: TranslationProgram) {
        self.programs.insert((program.source, program.target), program);
    }

    pub fn find(&self, source: Dialect, target: Dialect) -> Option<&TranslationProgram> {
        self.programs.get(&(source, target))
    }

    pub fn programs(&self) -> impl Iterator<Item = &TranslationProgram> {
        self.programs.values()
    }

    /// Number of times synthesis was entered through this cache.
    pub fn syntheses(&self) -> u64 {
        self.syntheses
    }

    /// Applies the cached program. Same-dialect translation is the identity.
    pub fn translate(
        &self,
        msg: &MsgValue,
        source: Dialect,
        target: Dialect,
    ) -> Result<MsgValue, TranslateError> {
        if source == target {
            return Ok(msg.clone());
        }
        let tp = self.find(source, target).ok_or(TranslateError::NoProgram(source, target))?;
        Ok(evaluate(&InteropRegistry, &tp.program, msg)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn paho_fixture(topic: &str, mid: i64) -> MessageEnvelope {
        MessageEnvelope {
            command: "PUBLISH".into(),
            dup: false,
            qos: 1,
            retain: false,
            remaining_len: 4,
            topic_len: topic.len() as i64,
            topic: topic.into(),
            mid,
            properties: vec!["property1".into(), "property2".into()],
            payload_parts: vec![("payload part 1".into(), MsgValue::Str("a".into()))],
            extras: vec![("format".into(), MsgValue::Int(1))],
        }
    }

    #[test]
    fn extract_then_pack_folds_tail() {
        let msg = paho_fixture("t/1", 7).to_paho();
        let program = DslProgram::new(RegistryId::I, vec![EXTRACT_PACKET, PACK_PROPERTIES]).unwrap();
        let out = evaluate(&InteropRegistry, &program, &msg).unwrap();
        let items = out.as_seq().unwrap();
        assert_eq!(items.len(), HEADER_FIELDS + 1);
        assert_eq!(items[6], MsgValue::Str("t/1".into()));
    }

    #[test]
    fn kind_mismatches() {
        let seq = MsgValue::Seq(vec![]);
        assert!(matches!(
            InteropRegistry.apply(EXTRACT_PACKET, &seq),
            Err(StageFault::KindMismatch { .. })
        ));
        let rec = MsgValue::Record(vec![]);
        assert!(matches!(
            InteropRegistry.apply(LABEL_PACKET, &rec),
            Err(StageFault::KindMismatch { .. })
        ));
        assert!(matches!(
            InteropRegistry.apply(UNPACK_PAYLOAD, &rec),
            Err(StageFault::Malformed(_))
        ));
    }

    #[test]
    fn unpack_payload_labels_parts() {
        let rec = MsgValue::Record(vec![(
            "payload".into(),
            MsgValue::Seq(vec![MsgValue::Int(1), MsgValue::Int(2)]),
        )]);
        let out = InteropRegistry.apply(UNPACK_PAYLOAD, &rec).unwrap();
        assert_eq!(
            out.to_string(),
            "{'payload': {'payload part 1': 1, 'payload part 2': 2}}"
        );
    }

    #[test]
    fn identity_dialect() {
        let t = Translator::new();
        let m = paho_fixture("x", 1).to_paho();
        assert_eq!(t.translate(&m, Dialect::Paho, Dialect::Paho), Ok(m));
    }

    #[test]
    fn missing_program() {
        let t = Translator::new();
        let m = paho_fixture("x", 1).to_paho();
        assert_eq!(
            t.translate(&m, Dialect::Paho, Dialect::Gmqtt),
            Err(TranslateError::NoProgram(Dialect::Paho, Dialect::Gmqtt))
        );
    }
}
