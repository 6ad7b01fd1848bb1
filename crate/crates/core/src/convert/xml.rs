//! Minimal XML reader and writer over [`Element`] trees.
//!
//! Supports elements, attributes, text, comments, processing instructions
//! and CDATA sections (read as plain text). Only the five predefined
//! entities are decoded. DTDs are rejected.

use alloc::string::String;
use alloc::vec::Vec;

use super::{ConvertError, Element, Node, MAX_DEPTH};

pub const DECLARATION: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>";

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: &'static str) -> ConvertError {
        ConvertError::parse_at(self.src, self.pos, message)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    /// Skips past `end`, failing if it never appears.
    fn skip_past(&mut self, end: &str, message: &'static str) -> Result<&'a str, ConvertError> {
        match self.rest().find(end) {
            Some(i) => {
                let body = &self.rest()[..i];
                self.pos += i + end.len();
                Ok(body)
            }
            None => Err(self.err(message)),
        }
    }

    fn name(&mut self) -> Result<&'a str, ConvertError> {
        let start = self.pos;
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() || matches!(c, '/' | '>' | '=' | '<' | '"' | '\'' | '&') {
                break;
            }
            self.pos += c.len_utf8();
        }
        let name = &self.src[start..self.pos];
        match name.chars().next() {
            Some(c) if c.is_alphabetic() || c == '_' || c == ':' => Ok(name),
            _ => {
                self.pos = start;
                Err(self.err("invalid name"))
            }
        }
    }
}

/// Decodes the predefined entities.
fn decode(r: &Reader<'_>, raw: &str, at: usize) -> Result<String, ConvertError> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let Some(end) = after.find(';') else {
            return Err(ConvertError::parse_at(r.src, at, "unterminated entity reference"));
        };
        let name = &after[..end];
        out.push(match name {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            other => return Err(ConvertError::EntityUnsupported(other.into())),
        });
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn push_text(stack: &mut [Element], text: String) {
    let t = text.trim();
    if t.is_empty() {
        return;
    }
    if let Some(top) = stack.last_mut() {
        match top.children.last_mut() {
            Some(Node::Text(prev)) => {
                prev.push(' ');
                prev.push_str(t);
            }
            _ => top.children.push(Node::Text(t.into())),
        }
    }
}

/// Parses a document with exactly one root element.
pub fn parse(text: &str) -> Result<Element, ConvertError> {
    let mut r = Reader { src: text.strip_prefix('\u{feff}').unwrap_or(text), pos: 0 };
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        // Character data up to the next markup.
        let start = r.pos;
        let lt = r.rest().find('<').map_or(r.src.len(), |i| r.pos + i);
        let raw = &r.src[start..lt];
        r.pos = lt;
        if stack.is_empty() {
            if !raw.trim().is_empty() {
                return Err(r.err("text outside the root element"));
            }
        } else {
            let decoded = decode(&r, raw, start)?;
            push_text(&mut stack, decoded);
        }
        if r.pos >= r.src.len() {
            break;
        }
        let rest = r.rest();
        if rest.starts_with("<!--") {
            r.pos += 4;
            r.skip_past("-->", "unterminated comment")?;
        } else if rest.starts_with("<![CDATA[") {
            if stack.is_empty() {
                return Err(r.err("CDATA outside the root element"));
            }
            r.pos += 9;
            let body = r.skip_past("]]>", "unterminated CDATA section")?;
            push_text(&mut stack, body.into());
        } else if rest.starts_with("<!") {
            return Err(r.err("document type declarations are not supported"));
        } else if rest.starts_with("<?") {
            r.pos += 2;
            r.skip_past("?>", "unterminated processing instruction")?;
        } else if rest.starts_with("</") {
            r.pos += 2;
            let name = r.name()?;
            r.ws();
            if r.peek() != Some(b'>') {
                return Err(r.err("expected '>'"));
            }
            r.pos += 1;
            let Some(done) = stack.pop() else {
                return Err(r.err("closing tag without an open element"));
            };
            if done.name != name {
                return Err(r.err("mismatched closing tag"));
            }
            match stack.last_mut() {
                Some(parent) => parent.children.push(Node::Element(done)),
                None => root = Some(done),
            }
        } else {
            if root.is_some() && stack.is_empty() {
                return Err(ConvertError::MultipleRoots);
            }
            r.pos += 1;
            let name = r.name()?;
            if stack.len() + 1 > MAX_DEPTH {
                return Err(ConvertError::DepthExceeded(MAX_DEPTH));
            }
            let mut el = Element::new(name);
            let self_closing = loop {
                let before = r.pos;
                r.ws();
                match r.peek() {
                    Some(b'>') => {
                        r.pos += 1;
                        break false;
                    }
                    Some(b'/') => {
                        r.pos += 1;
                        if r.peek() != Some(b'>') {
                            return Err(r.err("expected '>'"));
                        }
                        r.pos += 1;
                        break true;
                    }
                    None => return Err(r.err("unterminated start tag")),
                    Some(_) => {
                        if r.pos == before {
                            return Err(r.err("expected whitespace before attribute"));
                        }
                        let key = r.name()?;
                        r.ws();
                        if r.peek() != Some(b'=') {
                            return Err(r.err("expected '='"));
                        }
                        r.pos += 1;
                        r.ws();
                        let quote = match r.peek() {
                            Some(q @ (b'"' | b'\'')) => q as char,
                            _ => return Err(r.err("expected quoted attribute value")),
                        };
                        r.pos += 1;
                        let at = r.pos;
                        let raw = match quote {
                            '"' => r.skip_past("\"", "unterminated attribute value")?,
                            _ => r.skip_past("'", "unterminated attribute value")?,
                        };
                        if raw.contains('<') {
                            return Err(ConvertError::parse_at(r.src, at, "'<' in attribute value"));
                        }
                        if el.attributes.iter().any(|(k, _)| k == key) {
                            return Err(ConvertError::parse_at(r.src, at, "duplicate attribute"));
                        }
                        let value = decode(&r, raw, at)?;
                        el.attributes.push((key.into(), value));
                    }
                }
            };
            if self_closing {
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None => root = Some(el),
                }
            } else {
                stack.push(el);
            }
        }
    }
    if !stack.is_empty() {
        return Err(r.err("unclosed element"));
    }
    root.ok_or_else(|| r.err("no root element"))
}

fn escape(out: &mut String, s: &str, attr: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}

enum Task<'a> {
    Open(&'a Element),
    Close(&'a str),
    Text(&'a str),
}

/// Declaration line followed by the compact element.
pub fn to_string(root: &Element) -> String {
    let mut out = String::from(DECLARATION);
    out.push('\n');
    let mut tasks = alloc::vec![Task::Open(root)];
    while let Some(task) = tasks.pop() {
        match task {
            Task::Text(t) => escape(&mut out, t, false),
            Task::Close(name) => {
                out.push_str("</");
                out.push_str(name);
                out.push('>');
            }
            Task::Open(el) => {
                out.push('<');
                out.push_str(&el.name);
                for (k, v) in &el.attributes {
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape(&mut out, v, true);
                    out.push('"');
                }
                if el.children.is_empty() {
                    out.push_str("/>");
                    continue;
                }
                out.push('>');
                tasks.push(Task::Close(&el.name));
                for child in el.children.iter().rev() {
                    tasks.push(match child {
                        Node::Element(e) => Task::Open(e),
                        Node::Text(t) => Task::Text(t),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn parses_structure() {
        let doc = "<?xml version=\"1.0\"?>\n<!-- c --><e a='1' b=\"x &amp; y\">\n  hi <k/> <![CDATA[<raw>]]></e>\n";
        let e = parse(doc).unwrap();
        assert_eq!(e.name, "e");
        assert_eq!(e.attributes, vec![("a".into(), "1".into()), ("b".into(), "x & y".into())]);
        assert_eq!(
            e.children,
            vec![Node::Text("hi".into()), Node::Element(Element::new("k")), Node::Text("<raw>".into())]
        );
    }

    #[test]
    fn writes_compact() {
        let mut e = Element::new("e");
        e.attributes.push(("q".into(), "a\"<".into()));
        e.children.push(Node::Text("1 < 2".into()));
        e.children.push(Node::Element(Element::new("x")));
        assert_eq!(to_string(&e), "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<e q=\"a&quot;&lt;\">1 &lt; 2<x/></e>");
    }

    #[test]
    fn rejects() {
        assert_eq!(parse("<e>&nbsp;</e>"), Err(ConvertError::EntityUnsupported("nbsp".into())));
        assert_eq!(parse("<e>&#65;</e>"), Err(ConvertError::EntityUnsupported("#65".into())));
        assert_eq!(parse("<a/><b/>"), Err(ConvertError::MultipleRoots));
        for bad in ["", "<e>", "<e></f>", "</e>", "x<e/>", "<e a=1/>", "<e a='1' a='2'/>", "<!DOCTYPE e><e/>", "<e a='1'b='2'/>", "<1/>"] {
            assert!(matches!(parse(bad), Err(ConvertError::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn depth_boundary() {
        let nest = |n: usize| "<a>".repeat(n) + &"</a>".repeat(n);
        assert!(parse(&nest(MAX_DEPTH)).is_ok());
        assert_eq!(parse(&nest(MAX_DEPTH + 1)), Err(ConvertError::DepthExceeded(MAX_DEPTH)));
    }
}
