//! Minimal JSON reader and writer. Object member order is preserved and
//! numbers keep their source text. Both directions use an explicit stack.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JsonValue {
    Null,
    Bool(bool),
    /// Source text of a valid JSON number.
    Number(String),
    String(String),
    Array(Vec<JsonValue>),
    Object(Vec<(String, JsonValue)>),
}

impl JsonValue {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            JsonValue::Number(n) => n.parse().ok(),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            JsonValue::String(s) => Some(s),
            _ => None,
        }
    }
}

/// Default nesting limit for [`parse`].
pub const MAX_NESTING: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JsonError {
    #[error("{message} at line {line}, column {column}")]
    Syntax { line: usize, column: usize, message: &'static str },
    #[error("nesting deeper than {0}")]
    TooDeep(usize),
}

pub fn parse(text: &str) -> Result<JsonValue, JsonError> {
    parse_with_limit(text, MAX_NESTING)
}

enum Frame {
    Array(Vec<JsonValue>),
    Object(Vec<(String, JsonValue)>, String),
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, message: &'static str) -> JsonError {
        let before = &self.src[..self.pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        JsonError::Syntax { line, column, message }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8, message: &'static str) -> Result<(), JsonError> {
        self.ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(message))
        }
    }

    fn literal(&mut self, word: &str, value: JsonValue) -> Result<JsonValue, JsonError> {
        if self.src[self.pos..].starts_with(word) {
            self.pos += word.len();
            Ok(value)
        } else {
            Err(self.err("invalid literal"))
        }
    }

    fn number(&mut self) -> Result<JsonValue, JsonError> {
        let start = self.pos;
        let digits = |r: &mut Self| {
            let s = r.pos;
            while r.peek().is_some_and(|c| c.is_ascii_digit()) {
                r.pos += 1;
            }
            r.pos > s
        };
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        if self.peek() == Some(b'0') {
            self.pos += 1;
        } else if !digits(self) {
            return Err(self.err("invalid number"));
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if !digits(self) {
                return Err(self.err("invalid number"));
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                return Err(self.err("invalid number"));
            }
        }
        Ok(JsonValue::Number(self.src[start..self.pos].into()))
    }

    fn hex4(&mut self) -> Result<u32, JsonError> {
        let hex = self.src.get(self.pos..self.pos + 4).ok_or_else(|| self.err("short unicode escape"))?;
        let v = u32::from_str_radix(hex, 16).map_err(|_| self.err("bad unicode escape"))?;
        self.pos += 4;
        Ok(v)
    }

    fn string(&mut self) -> Result<String, JsonError> {
        self.expect(b'"', "expected string")?;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(c) = rest.chars().next() else {
                return Err(self.err("unterminated string"));
            };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let e = self.peek().ok_or_else(|| self.err("unterminated escape"))?;
                    self.pos += 1;
                    match e {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'u' => {
                            let hi = self.hex4()?;
                            let code = if (0xD800..0xDC00).contains(&hi) {
                                if !self.src[self.pos..].starts_with("\\u") {
                                    return Err(self.err("lone surrogate"));
                                }
                                self.pos += 2;
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return Err(self.err("lone surrogate"));
                                }
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            } else {
                                hi
                            };
                            out.push(char::from_u32(code).ok_or_else(|| self.err("invalid code point"))?);
                        }
                        _ => return Err(self.err("invalid escape")),
                    }
                }
                c if (c as u32) < 0x20 => return Err(self.err("control character in string")),
                c => out.push(c),
            }
        }
    }
}

/// Parses one JSON document, rejecting nesting deeper than `limit`.
pub fn parse_with_limit(text: &str, limit: usize) -> Result<JsonValue, JsonError> {
    let mut r = Reader { src: text, pos: 0 };
    let mut stack: Vec<Frame> = Vec::new();
    'value: loop {
        r.ws();
        let mut value = match r.peek() {
            Some(b'{') | Some(b'[') => {
                if stack.len() >= limit {
                    return Err(JsonError::TooDeep(limit));
                }
                let open = r.peek();
                r.pos += 1;
                r.ws();
                if open == Some(b'{') {
                    if r.peek() == Some(b'}') {
                        r.pos += 1;
                        JsonValue::Object(Vec::new())
                    } else {
                        let key = r.string()?;
                        r.expect(b':', "expected ':'")?;
                        stack.push(Frame::Object(Vec::new(), key));
                        continue 'value;
                    }
                } else if r.peek() == Some(b']') {
                    r.pos += 1;
                    JsonValue::Array(Vec::new())
                } else {
                    stack.push(Frame::Array(Vec::new()));
                    continue 'value;
                }
            }
            Some(b'"') => JsonValue::String(r.string()?),
            Some(b't') => r.literal("true", JsonValue::Bool(true))?,
            Some(b'f') => r.literal("false", JsonValue::Bool(false))?,
            Some(b'n') => r.literal("null", JsonValue::Null)?,
            Some(b'-' | b'0'..=b'9') => r.number()?,
            Some(_) => return Err(r.err("unexpected character")),
            None => return Err(r.err("unexpected end of input")),
        };
        // Attach the finished value, closing containers as far as possible.
        loop {
            let Some(top) = stack.last_mut() else {
                r.ws();
                if r.pos != text.len() {
                    return Err(r.err("trailing characters"));
                }
                return Ok(value);
            };
            r.ws();
            let next = r.peek();
            match top {
                Frame::Array(items) => {
                    items.push(value);
                    match next {
                        Some(b',') => {
                            r.pos += 1;
                            continue 'value;
                        }
                        Some(b']') => r.pos += 1,
                        _ => return Err(r.err("expected ',' or ']'")),
                    }
                }
                Frame::Object(members, key) => {
                    members.push((core::mem::take(key), value));
                    match next {
                        Some(b',') => {
                            r.pos += 1;
                            let k = r.string()?;
                            r.expect(b':', "expected ':'")?;
                            if let Some(Frame::Object(_, key)) = stack.last_mut() {
                                *key = k;
                            }
                            continue 'value;
                        }
                        Some(b'}') => r.pos += 1,
                        _ => return Err(r.err("expected ',' or '}'")),
                    }
                }
            }
            value = match stack.pop() {
                Some(Frame::Array(items)) => JsonValue::Array(items),
                Some(Frame::Object(members, _)) => JsonValue::Object(members),
                None => unreachable!(),
            };
        }
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

enum Task<'a> {
    Value(&'a JsonValue),
    Key(&'a str),
    Raw(&'static str),
}

/// Single-line output with `", "` and `": "` separators.
pub fn to_string(value: &JsonValue) -> String {
    let mut out = String::new();
    let mut tasks = alloc::vec![Task::Value(value)];
    while let Some(task) = tasks.pop() {
        match task {
            Task::Raw(s) => out.push_str(s),
            Task::Key(k) => {
                write_str(&mut out, k);
                out.push_str(": ");
            }
            Task::Value(v) => match v {
                JsonValue::Null => out.push_str("null"),
                JsonValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
                JsonValue::Number(n) => out.push_str(n),
                JsonValue::String(s) => write_str(&mut out, s),
                JsonValue::Array(items) => {
                    out.push('[');
                    tasks.push(Task::Raw("]"));
                    for (n, item) in items.iter().enumerate().rev() {
                        tasks.push(Task::Value(item));
                        if n > 0 {
                            tasks.push(Task::Raw(", "));
                        }
                    }
                }
                JsonValue::Object(members) => {
                    out.push('{');
                    tasks.push(Task::Raw("}"));
                    for (n, (k, item)) in members.iter().enumerate().rev() {
                        tasks.push(Task::Value(item));
                        tasks.push(Task::Key(k));
                        if n > 0 {
                            tasks.push(Task::Raw(", "));
                        }
                    }
                }
            },
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn round_trips_compact_form() {
        let text = r#"{"a": [1, -2.5e3, true, null], "b": {"c": "x\"y\n"}, "d": {}, "e": []}"#;
        assert_eq!(to_string(&parse(text).unwrap()), text);
    }

    #[test]
    fn whitespace_and_escapes() {
        let v = parse(" { \"k\" :\t[ \"\\u00e9\\ud83d\\ude00\" ] } ").unwrap();
        assert_eq!(
            v,
            JsonValue::Object(vec![("k".into(), JsonValue::Array(vec![JsonValue::String("é😀".into())]))])
        );
    }

    #[test]
    fn errors() {
        for bad in ["", "{", "[1,]", "{\"a\" 1}", "01", "1.", "\"abc", "[1] x", "tru", "{1: 2}", "\"\\ud800\""] {
            assert!(matches!(parse(bad), Err(JsonError::Syntax { .. })), "{bad}");
        }
        let e = parse("[\n  1,\n  x]").unwrap_err();
        assert_eq!(e.to_string(), "unexpected character at line 3, column 3");
    }

    #[test]
    fn depth_limit() {
        let deep = "[".repeat(10) + &"]".repeat(10);
        assert!(parse_with_limit(&deep, 10).is_ok());
        let deeper = "[".repeat(11) + &"]".repeat(11);
        assert_eq!(parse_with_limit(&deeper, 10), Err(JsonError::TooDeep(10)));
        let huge = "[".repeat(100_000);
        assert_eq!(parse(&huge), Err(JsonError::TooDeep(MAX_NESTING)));
    }

    #[test]
    fn integers() {
        assert_eq!(parse("12").unwrap().as_i64(), Some(12));
        assert_eq!(parse("1.5").unwrap().as_i64(), None);
        assert_eq!(to_string(&JsonValue::Null), "null");
    }
}
