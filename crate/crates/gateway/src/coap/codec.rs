//! CoAP message framing (RFC 7252 section 3) for the options this gateway uses.

pub const VERSION: u8 = 1;

pub const OPT_OBSERVE: u16 = 6;
pub const OPT_URI_PATH: u16 = 11;
pub const OPT_CONTENT_FORMAT: u16 = 12;

/// `class.detail` packed as `class << 5 | detail`.
pub mod code {
    pub const EMPTY: u8 = 0x00;
    pub const GET: u8 = 0x01;
    pub const CONTENT: u8 = 0x45;
    pub const NOT_FOUND: u8 = 0x84;
    pub const METHOD_NOT_ALLOWED: u8 = 0x85;
}

pub const LINK_FORMAT: u16 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageType {
    Confirmable,
    NonConfirmable,
    Acknowledgement,
    Reset,
}

impl MessageType {
    fn bits(self) -> u8 {
        match self {
            MessageType::Confirmable => 0,
            MessageType::NonConfirmable => 1,
            MessageType::Acknowledgement => 2,
            MessageType::Reset => 3,
        }
    }

    fn from_bits(b: u8) -> Self {
        match b & 3 {
            0 => MessageType::Confirmable,
            1 => MessageType::NonConfirmable,
            2 => MessageType::Acknowledgement,
            _ => MessageType::Reset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub mtype: MessageType,
    pub code: u8,
    pub message_id: u16,
    pub token: Vec<u8>,
    /// Kept sorted by option number.
    pub options: Vec<(u16, Vec<u8>)>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoapError {
    #[error("malformed CoAP message: {0}")]
    Malformed(&'static str),
}

impl Message {
    pub fn new(mtype: MessageType, code: u8, message_id: u16) -> Self {
        Message { mtype, code, message_id, token: Vec::new(), options: Vec::new(), payload: Vec::new() }
    }

    /// Empty confirmable message, used as a ping.
    pub fn ping(message_id: u16) -> Self {
        Message::new(MessageType::Confirmable, code::EMPTY, message_id)
    }

    pub fn get(message_id: u16, token: &[u8], path: &str) -> Self {
        let mut m = Message::new(MessageType::Confirmable, code::GET, message_id);
        m.token = token.to_vec();
        m.set_path(path);
        m
    }

    pub fn add_option(&mut self, number: u16, value: Vec<u8>) {
        let at = self.options.partition_point(|(n, _)| *n <= number);
        self.options.insert(at, (number, value));
    }

    pub fn option(&self, number: u16) -> Option<&[u8]> {
        self.options.iter().find(|(n, _)| *n == number).map(|(_, v)| v.as_slice())
    }

    pub fn set_path(&mut self, path: &str) {
        self.options.retain(|(n, _)| *n != OPT_URI_PATH);
        for seg in path.split('/').filter(|s| !s.is_empty()) {
            self.add_option(OPT_URI_PATH, seg.as_bytes().to_vec());
        }
    }

    pub fn path(&self) -> String {
        let segs: Vec<String> = self
            .options
            .iter()
            .filter(|(n, _)| *n == OPT_URI_PATH)
            .map(|(_, v)| String::from_utf8_lossy(v).into_owned())
            .collect();
        segs.join("/")
    }

    pub fn observe(&self) -> Option<u32> {
        self.option(OPT_OBSERVE).map(decode_uint)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![(VERSION << 6) | (self.mtype.bits() << 4) | (self.token.len() as u8 & 0x0F), self.code];
        out.extend_from_slice(&self.message_id.to_be_bytes());
        out.extend_from_slice(&self.token);
        let mut last = 0u16;
        for (number, value) in &self.options {
            let (d, d_ext) = nibble(number - last);
            let (l, l_ext) = nibble(value.len() as u16);
            out.push((d << 4) | l);
            out.extend_from_slice(&d_ext);
            out.extend_from_slice(&l_ext);
            out.extend_from_slice(value);
            last = *number;
        }
        if !self.payload.is_empty() {
            out.push(0xFF);
            out.extend_from_slice(&self.payload);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Message, CoapError> {
        if buf.len() < 4 {
            return Err(CoapError::Malformed("shorter than the fixed header"));
        }
        if buf[0] >> 6 != VERSION {
            return Err(CoapError::Malformed("unsupported version"));
        }
        let tkl = (buf[0] & 0x0F) as usize;
        if tkl > 8 {
            return Err(CoapError::Malformed("token longer than 8 bytes"));
        }
        let mut m = Message::new(MessageType::from_bits(buf[0] >> 4), buf[1], u16::from_be_bytes([buf[2], buf[3]]));
        let mut pos = 4;
        m.token = buf.get(pos..pos + tkl).ok_or(CoapError::Malformed("truncated token"))?.to_vec();
        pos += tkl;
        let mut number = 0u16;
        while pos < buf.len() {
            let byte = buf[pos];
            pos += 1;
            if byte == 0xFF {
                if pos == buf.len() {
                    return Err(CoapError::Malformed("payload marker without payload"));
                }
                m.payload = buf[pos..].to_vec();
                break;
            }
            let delta = extended(byte >> 4, buf, &mut pos)?;
            let len = extended(byte & 0x0F, buf, &mut pos)? as usize;
            number = number.checked_add(delta).ok_or(CoapError::Malformed("option number overflow"))?;
            let value = buf.get(pos..pos + len).ok_or(CoapError::Malformed("truncated option"))?;
            m.options.push((number, value.to_vec()));
            pos += len;
        }
        if m.code == code::EMPTY && (!m.token.is_empty() || !m.options.is_empty() || !m.payload.is_empty()) {
            return Err(CoapError::Malformed("empty message with content"));
        }
        Ok(m)
    }
}

fn nibble(v: u16) -> (u8, Vec<u8>) {
    match v {
        0..=12 => (v as u8, Vec::new()),
        13..=268 => (13, vec![(v - 13) as u8]),
        _ => (14, (v - 269).to_be_bytes().to_vec()),
    }
}

fn extended(n: u8, buf: &[u8], pos: &mut usize) -> Result<u16, CoapError> {
    match n {
        0..=12 => Ok(n as u16),
        13 => {
            let b = *buf.get(*pos).ok_or(CoapError::Malformed("truncated option header"))?;
            *pos += 1;
            Ok(b as u16 + 13)
        }
        14 => {
            let b = buf.get(*pos..*pos + 2).ok_or(CoapError::Malformed("truncated option header"))?;
            *pos += 2;
            u16::from_be_bytes([b[0], b[1]]).checked_add(269).ok_or(CoapError::Malformed("option value too large"))
        }
        _ => Err(CoapError::Malformed("reserved option nibble")),
    }
}

pub fn encode_uint(v: u32) -> Vec<u8> {
    let bytes = v.to_be_bytes();
    let skip = bytes.iter().take_while(|b| **b == 0).count();
    bytes[skip..].to_vec()
}

pub fn decode_uint(b: &[u8]) -> u32 {
    b.iter().take(4).fold(0, |acc, x| (acc << 8) | *x as u32)
}

/// Paths out of a `/.well-known/core` link-format body.
pub fn parse_links(body: &str) -> Vec<String> {
    body.split(',')
        .filter_map(|link| {
            let link = link.trim();
            let start = link.find('<')?;
            let end = link[start..].find('>')? + start;
            Some(link[start + 1..end].trim_start_matches('/').to_string())
        })
        .filter(|p| !p.is_empty())
        .collect()
}
