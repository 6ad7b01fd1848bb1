use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{MsgValue, HEADER_FIELDS};

/// Normalized PUBLISH content shared by every dialect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEnvelope {
    pub command: String,
    pub dup: bool,
    pub qos: u8,
    pub retain: bool,
    pub remaining_len: i64,
    pub topic_len: i64,
    pub topic: String,
    pub mid: i64,
    pub properties: Vec<String>,
    pub payload_parts: Vec<(String, MsgValue)>,
    /// Dialect specific fields: `format` (Paho), `unparsed` (gmqtt tail),
    /// `pos`/`to_process` (labelled records).
    pub extras: Vec<(String, MsgValue)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("not a recognised message shape: {0}")]
    Shape(&'static str),
    #[error("qos {0} is not 0, 1 or 2")]
    Qos(i64),
    #[error("topic length {declared} does not match topic byte length {actual}")]
    TopicLength { declared: i64, actual: usize },
}

impl MessageEnvelope {
    /// A PUBLISH with consistent topic length and default header fields.
    pub fn publish(topic: &str, qos: u8, mid: i64) -> Self {
        MessageEnvelope {
            command: "PUBLISH".into(),
            dup: false,
            qos,
            retain: false,
            remaining_len: 0,
            topic_len: topic.len() as i64,
            topic: topic.into(),
            mid,
            properties: Vec::new(),
            payload_parts: Vec::new(),
            extras: Vec::new(),
        }
    }

    pub fn extra(&self, key: &str) -> Option<&MsgValue> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn header(&self) -> Vec<MsgValue> {
        alloc::vec![
            MsgValue::Str(self.command.clone()),
            MsgValue::Bool(self.dup),
            MsgValue::Int(self.qos.into()),
            MsgValue::Bool(self.retain),
            MsgValue::Int(self.remaining_len),
            MsgValue::Int(self.topic_len),
            MsgValue::Str(self.topic.clone()),
            MsgValue::Int(self.mid),
        ]
    }

    fn property_seq(&self) -> MsgValue {
        MsgValue::Seq(self.properties.iter().map(|p| MsgValue::Str(p.clone())).collect())
    }

    /// Paho shape: a record whose `packet` is the flat header followed by the
    /// payload format indicator, the properties and the payload parts.
    pub fn to_paho(&self) -> MsgValue {
        let mut packet = self.header();
        packet.push(self.extra("format").cloned().unwrap_or(MsgValue::Int(1)));
        packet.push(self.property_seq());
        packet.push(MsgValue::Seq(self.payload_parts.iter().map(|(_, v)| v.clone()).collect()));
        MsgValue::Record(alloc::vec![
            ("command".into(), MsgValue::Str(self.command.clone())),
            ("qos".into(), MsgValue::Int(self.qos.into())),
            ("mid".into(), MsgValue::Int(self.mid)),
            ("packet".into(), MsgValue::Seq(packet)),
        ])
    }

    /// gmqtt shape: header, labelled payload record, parsed properties and the
    /// unparsed tail.
    pub fn to_gmqtt(&self) -> MsgValue {
        let mut packet = self.header();
        packet.push(MsgValue::Record(self.payload_parts.clone()));
        packet.push(self.property_seq());
        let tail = self.extra("unparsed").cloned().unwrap_or(MsgValue::Str(String::new()));
        packet.push(tail);
        MsgValue::Seq(packet)
    }

    /// Every field as a keyed record.
    pub fn to_standard(&self) -> MsgValue {
        let mut fields = alloc::vec![
            ("command".into(), MsgValue::Str(self.command.clone())),
            ("dup".into(), MsgValue::Bool(self.dup)),
            ("qos".into(), MsgValue::Int(self.qos.into())),
            ("retain".into(), MsgValue::Bool(self.retain)),
            ("remaining_len".into(), MsgValue::Int(self.remaining_len)),
            ("topic_len".into(), MsgValue::Int(self.topic_len)),
            ("topic".into(), MsgValue::Str(self.topic.clone())),
            ("mid".into(), MsgValue::Int(self.mid)),
            ("properties".into(), self.property_seq()),
            ("payload".into(), MsgValue::Record(self.payload_parts.clone())),
        ];
        fields.extend(self.extras.iter().cloned());
        MsgValue::Record(fields)
    }

    /// Reads any of the supported shapes: Paho record, gmqtt sequence (raw or
    /// with properties packed), labelled record, or standard record.
    pub fn decode(value: &MsgValue) -> Result<Self, EnvelopeError> {
        match value {
            MsgValue::Seq(items) => decode_packet(items),
            MsgValue::Record(_) => {
                if let Some(packet) = value.get("packet") {
                    let items = packet.as_seq().ok_or(EnvelopeError::Shape("packet is not a sequence"))?;
                    let mut env = decode_packet(items)?;
                    if let Some(info) = value.get("info").and_then(MsgValue::as_seq) {
                        if env.properties.is_empty() {
                            env.properties = strings(info.get(1..).unwrap_or(&[]))?;
                        }
                    }
                    for key in ["pos", "to_process"] {
                        if let Some(v) = value.get(key) {
                            env.extras.push((key.into(), v.clone()));
                        }
                    }
                    Ok(env)
                } else if value.get("topic").is_some() {
                    decode_standard(value)
                } else {
                    Err(EnvelopeError::Shape("record has neither packet nor topic"))
                }
            }
            _ => Err(EnvelopeError::Shape("scalar")),
        }
    }
}

fn strings(items: &[MsgValue]) -> Result<Vec<String>, EnvelopeError> {
    items
        .iter()
        .map(|v| v.as_str().map(String::from).ok_or(EnvelopeError::Shape("property is not a string")))
        .collect()
}

fn labelled(values: &[MsgValue]) -> Vec<(String, MsgValue)> {
    values
        .iter()
        .enumerate()
        .map(|(n, v)| (format!("payload part {}", n + 1), v.clone()))
        .collect()
}

fn checked(mut env: MessageEnvelope, qos: i64) -> Result<MessageEnvelope, EnvelopeError> {
    env.qos = u8::try_from(qos).ok().filter(|q| *q <= 2).ok_or(EnvelopeError::Qos(qos))?;
    if env.topic_len != env.topic.len() as i64 {
        return Err(EnvelopeError::TopicLength { declared: env.topic_len, actual: env.topic.len() });
    }
    Ok(env)
}

fn decode_packet(items: &[MsgValue]) -> Result<MessageEnvelope, EnvelopeError> {
    if items.len() < HEADER_FIELDS {
        return Err(EnvelopeError::Shape("packet shorter than its header"));
    }
    let bad = || EnvelopeError::Shape("malformed header field");
    let qos = items[2].as_int().ok_or_else(bad)?;
    let mut env = MessageEnvelope {
        command: items[0].as_str().ok_or_else(bad)?.into(),
        dup: items[1].as_bool().ok_or_else(bad)?,
        qos: 0,
        retain: items[3].as_bool().ok_or_else(bad)?,
        remaining_len: items[4].as_int().ok_or_else(bad)?,
        topic_len: items[5].as_int().ok_or_else(bad)?,
        topic: items[6].as_str().ok_or_else(bad)?.into(),
        mid: items[7].as_int().ok_or_else(bad)?,
        properties: Vec::new(),
        payload_parts: Vec::new(),
        extras: Vec::new(),
    };

    let mut rest = &items[HEADER_FIELDS..];
    if let [MsgValue::Seq(inner)] = rest {
        // Properties were packed into one trailing sequence.
        rest = inner;
    }
    match rest.first() {
        None => {}
        Some(MsgValue::Record(payload)) => {
            env.payload_parts = payload.clone();
            if let Some(props) = rest.get(1) {
                env.properties = strings(props.as_seq().ok_or_else(bad)?)?;
            }
            if let Some(tail) = rest.get(2) {
                env.extras.push(("unparsed".into(), tail.clone()));
            }
        }
        Some(_) => {
            let mut tail = rest;
            if let Some(format @ MsgValue::Int(_)) = tail.first() {
                env.extras.push(("format".into(), format.clone()));
                tail = &tail[1..];
            }
            match tail {
                [props, payload] => {
                    env.properties = strings(props.as_seq().ok_or_else(bad)?)?;
                    env.payload_parts = labelled(payload.as_seq().ok_or_else(bad)?);
                }
                [] => {}
                _ => return Err(EnvelopeError::Shape("unexpected packet tail")),
            }
        }
    }
    checked(env, qos)
}

fn decode_standard(value: &MsgValue) -> Result<MessageEnvelope, EnvelopeError> {
    let bad = || EnvelopeError::Shape("malformed standard record");
    let field = |k: &str| value.get(k).ok_or_else(bad);
    let known = [
        "command", "dup", "qos", "retain", "remaining_len", "topic_len", "topic", "mid",
        "properties", "payload",
    ];
    let env = MessageEnvelope {
        command: field("command")?.as_str().ok_or_else(bad)?.into(),
        dup: field("dup")?.as_bool().ok_or_else(bad)?,
        qos: 0,
        retain: field("retain")?.as_bool().ok_or_else(bad)?,
        remaining_len: field("remaining_len")?.as_int().ok_or_else(bad)?,
        topic_len: field("topic_len")?.as_int().ok_or_else(bad)?,
        topic: field("topic")?.as_str().ok_or_else(bad)?.into(),
        mid: field("mid")?.as_int().ok_or_else(bad)?,
        properties: strings(field("properties")?.as_seq().ok_or_else(bad)?)?,
        payload_parts: field("payload")?.as_record().ok_or_else(bad)?.to_vec(),
        extras: value
            .as_record()
            .unwrap_or(&[])
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .cloned()
            .collect(),
    };
    checked(env, field("qos")?.as_int().ok_or_else(bad)?)
}
