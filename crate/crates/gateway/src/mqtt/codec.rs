//! MQTT 3.1.1 control packets: the subset a gateway and a test broker need.

use std::io::{self, Read, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Connect { client_id: String, keep_alive: u16, clean_session: bool },
    Connack { session_present: bool, code: u8 },
    Publish { topic: String, payload: Vec<u8>, qos: u8, packet_id: Option<u16>, dup: bool, retain: bool },
    Puback { packet_id: u16 },
    Subscribe { packet_id: u16, filters: Vec<(String, u8)> },
    Suback { packet_id: u16, codes: Vec<u8> },
    Unsubscribe { packet_id: u16, filters: Vec<String> },
    Unsuback { packet_id: u16 },
    Pingreq,
    Pingresp,
    Disconnect,
}

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
    #[error("unsupported packet type {0}")]
    Unsupported(u8),
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u16).to_be_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_remaining(buf: &mut Vec<u8>, mut len: usize) {
    loop {
        let mut byte = (len % 128) as u8;
        len /= 128;
        if len > 0 {
            byte |= 0x80;
        }
        buf.push(byte);
        if len == 0 {
            break;
        }
    }
}

pub fn encode(packet: &Packet) -> Vec<u8> {
    let mut body = Vec::new();
    let header: u8 = match packet {
        Packet::Connect { client_id, keep_alive, clean_session } => {
            put_str(&mut body, "MQTT");
            body.push(4);
            body.push(if *clean_session { 0x02 } else { 0 });
            body.extend_from_slice(&keep_alive.to_be_bytes());
            put_str(&mut body, client_id);
            0x10
        }
        Packet::Connack { session_present, code } => {
            body.push(u8::from(*session_present));
            body.push(*code);
            0x20
        }
        Packet::Publish { topic, payload, qos, packet_id, dup, retain } => {
            put_str(&mut body, topic);
            if *qos > 0 {
                body.extend_from_slice(&packet_id.unwrap_or(1).to_be_bytes());
            }
            body.extend_from_slice(payload);
            0x30 | (u8::from(*dup) << 3) | ((qos & 3) << 1) | u8::from(*retain)
        }
        Packet::Puback { packet_id } => {
            body.extend_from_slice(&packet_id.to_be_bytes());
            0x40
        }
        Packet::Subscribe { packet_id, filters } => {
            body.extend_from_slice(&packet_id.to_be_bytes());
            for (f, q) in filters {
                put_str(&mut body, f);
                body.push(*q);
            }
            0x82
        }
        Packet::Suback { packet_id, codes } => {
            body.extend_from_slice(&packet_id.to_be_bytes());
            body.extend_from_slice(codes);
            0x90
        }
        Packet::Unsubscribe { packet_id, filters } => {
            body.extend_from_slice(&packet_id.to_be_bytes());
            for f in filters {
                put_str(&mut body, f);
            }
            0xA2
        }
        Packet::Unsuback { packet_id } => {
            body.extend_from_slice(&packet_id.to_be_bytes());
            0xB0
        }
        Packet::Pingreq => 0xC0,
        Packet::Pingresp => 0xD0,
        Packet::Disconnect => 0xE0,
    };
    let mut out = vec![header];
    put_remaining(&mut out, body.len());
    out.extend_from_slice(&body);
    out
}

pub fn write_packet<W: Write>(w: &mut W, packet: &Packet) -> io::Result<()> {
    w.write_all(&encode(packet))?;
    w.flush()
}

struct Body<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Body<'_> {
    fn u8(&mut self) -> Result<u8, CodecError> {
        let b = *self.buf.get(self.pos).ok_or(CodecError::Malformed("truncated"))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_be_bytes([self.u8()?, self.u8()?]))
    }

    fn str(&mut self) -> Result<String, CodecError> {
        let len = self.u16()? as usize;
        let bytes = self.buf.get(self.pos..self.pos + len).ok_or(CodecError::Malformed("truncated string"))?;
        self.pos += len;
        String::from_utf8(bytes.to_vec()).map_err(|_| CodecError::Malformed("string is not UTF-8"))
    }

    fn rest(&mut self) -> Vec<u8> {
        let r = self.buf[self.pos..].to_vec();
        self.pos = self.buf.len();
        r
    }

    fn done(&self) -> bool {
        self.pos >= self.buf.len()
    }
}

/// Reads one packet. Blocks according to the reader's timeout settings.
pub fn read_packet<R: Read>(r: &mut R) -> Result<Packet, CodecError> {
    let mut first = [0u8; 1];
    r.read_exact(&mut first)?;
    let mut len = 0usize;
    let mut shift = 0;
    loop {
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        len |= ((b[0] & 0x7F) as usize) << shift;
        if b[0] & 0x80 == 0 {
            break;
        }
        shift += 7;
        if shift > 21 {
            return Err(CodecError::Malformed("remaining length too long"));
        }
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    decode_body(first[0], &buf)
}

pub fn decode_body(header: u8, buf: &[u8]) -> Result<Packet, CodecError> {
    let mut b = Body { buf, pos: 0 };
    let flags = header & 0x0F;
    Ok(match header >> 4 {
        1 => {
            if b.str()? != "MQTT" {
                return Err(CodecError::Malformed("protocol name"));
            }
            let _level = b.u8()?;
            let connect_flags = b.u8()?;
            let keep_alive = b.u16()?;
            let client_id = b.str()?;
            Packet::Connect { client_id, keep_alive, clean_session: connect_flags & 0x02 != 0 }
        }
        2 => Packet::Connack { session_present: b.u8()? & 1 == 1, code: b.u8()? },
        3 => {
            let qos = (flags >> 1) & 3;
            if qos == 3 {
                return Err(CodecError::Malformed("qos 3"));
            }
            let topic = b.str()?;
            let packet_id = if qos > 0 { Some(b.u16()?) } else { None };
            Packet::Publish { topic, payload: b.rest(), qos, packet_id, dup: flags & 8 != 0, retain: flags & 1 != 0 }
        }
        4 => Packet::Puback { packet_id: b.u16()? },
        8 => {
            let packet_id = b.u16()?;
            let mut filters = Vec::new();
            while !b.done() {
                filters.push((b.str()?, b.u8()?));
            }
            if filters.is_empty() {
                return Err(CodecError::Malformed("subscribe without filters"));
            }
            Packet::Subscribe { packet_id, filters }
        }
        9 => Packet::Suback { packet_id: b.u16()?, codes: b.rest() },
        10 => {
            let packet_id = b.u16()?;
            let mut filters = Vec::new();
            while !b.done() {
                filters.push(b.str()?);
            }
            Packet::Unsubscribe { packet_id, filters }
        }
        11 => Packet::Unsuback { packet_id: b.u16()? },
        12 => Packet::Pingreq,
        13 => Packet::Pingresp,
        14 => Packet::Disconnect,
        other => return Err(CodecError::Unsupported(other)),
    })
}

/// Topic filter match with `+` (one level) and `#` (rest, including the
/// parent level).
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}
