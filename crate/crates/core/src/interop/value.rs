use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dsl::ValueKind;

/// Dynamically shaped message content.
///
/// `Display` renders the value the way a Python client prints it: tuples for
/// sequences, dicts for records, `True`/`False` for booleans. JSON maps
/// sequences to arrays and records to objects with field order preserved.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MsgValue {
    Bool(bool),
    Int(i64),
    Str(String),
    Seq(Vec<MsgValue>),
    Record(Vec<(String, MsgValue)>),
}

impl MsgValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            MsgValue::Bool(_) | MsgValue::Int(_) | MsgValue::Str(_) => ValueKind::Scalar,
            MsgValue::Seq(_) => ValueKind::Sequence,
            MsgValue::Record(_) => ValueKind::Record,
        }
    }

    pub fn as_seq(&self) -> Option<&[MsgValue]> {
        match self {
            MsgValue::Seq(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&[(String, MsgValue)]> {
        match self {
            MsgValue::Record(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            MsgValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            MsgValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            MsgValue::Bool(v) => Some(*v),
            _ => None,
        }
    }

    /// Field lookup on a record.
    pub fn get(&self, key: &str) -> Option<&MsgValue> {
        self.as_record()?.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

impl From<&str> for MsgValue {
    fn from(s: &str) -> Self {
        MsgValue::Str(s.into())
    }
}

impl From<i64> for MsgValue {
    fn from(v: i64) -> Self {
        MsgValue::Int(v)
    }
}

impl From<bool> for MsgValue {
    fn from(v: bool) -> Self {
        MsgValue::Bool(v)
    }
}

fn write_py_str(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    f.write_str(if quote == '"' { "\"" } else { "'" })?;
    for c in s.chars() {
        match c {
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c if c == quote => write!(f, "\\{c}")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str(if quote == '"' { "\"" } else { "'" })
}

impl fmt::Display for MsgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MsgValue::Bool(true) => f.write_str("True"),
            MsgValue::Bool(false) => f.write_str("False"),
            MsgValue::Int(v) => write!(f, "{v}"),
            MsgValue::Str(s) => write_py_str(f, s),
            MsgValue::Seq(items) => {
                f.write_str("(")?;
                for (n, item) in items.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                if items.len() == 1 {
                    f.write_str(",")?;
                }
                f.write_str(")")
            }
            MsgValue::Record(fields) => {
                f.write_str("{")?;
                for (n, (k, v)) in fields.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write_py_str(f, k)?;
                    write!(f, ": {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

impl Serialize for MsgValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MsgValue::Bool(v) => s.serialize_bool(*v),
            MsgValue::Int(v) => s.serialize_i64(*v),
            MsgValue::Str(v) => s.serialize_str(v),
            MsgValue::Seq(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            MsgValue::Record(fields) => {
                let mut map = s.serialize_map(Some(fields.len()))?;
                for (k, v) in fields {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

struct MsgVisitor;

impl<'de> Visitor<'de> for MsgVisitor {
    type Value = MsgValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a boolean, integer, string, array or object")
    }

    fn visit_bool<E>(self, v: bool) -> Result<MsgValue, E> {
        Ok(MsgValue::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<MsgValue, E> {
        Ok(MsgValue::Int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<MsgValue, E> {
        i64::try_from(v).map(MsgValue::Int).map_err(|_| E::custom("integer out of range"))
    }

    fn visit_str<E>(self, v: &str) -> Result<MsgValue, E> {
        Ok(MsgValue::Str(v.into()))
    }

    fn visit_string<E>(self, v: String) -> Result<MsgValue, E> {
        Ok(MsgValue::Str(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<MsgValue, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element()? {
            items.push(item);
        }
        Ok(MsgValue::Seq(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<MsgValue, A::Error> {
        let mut fields = Vec::new();
        while let Some((k, v)) = map.next_entry::<String, MsgValue>()? {
            fields.push((k, v));
        }
        Ok(MsgValue::Record(fields))
    }
}

impl<'de> Deserialize<'de> for MsgValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(MsgVisitor)
    }
}
