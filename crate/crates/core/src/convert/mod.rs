//! XML and JSON conversion through a shared element tree.
//!
//! Mapping (element `e`):
//!
//! | XML                              | JSON                                        |
//! |----------------------------------|---------------------------------------------|
//! | `<e/>`                           | `{"e": null}`                               |
//! | `<e>text</e>`                    | `{"e": "text"}`                             |
//! | `<e name="value"/>`              | `{"e": {"@name": "value"}}`                 |
//! | `<e name="value">text</e>`       | `{"e": {"@name": "value", "#text": "text"}}`|
//! | `<e><a>text</a><b>text</b></e>`  | `{"e": {"a": "text", "b": "text"}}`         |
//! | `<e><a>text</a><a>text</a></e>`  | `{"e": {"a": ["text", "text"]}}`            |
//! | `<e>text<a>text</a></e>`         | `{"e": {"#text": "text", "a": "text"}}`     |
//!
//! JSON input may also spell the prefixes `-name` and `-#text`. Nesting is
//! limited to [`MAX_DEPTH`] elements.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub mod json;
pub mod xml;

use json::{JsonError, JsonValue};

pub const MAX_DEPTH: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
}

impl Element {
    pub fn new(name: &str) -> Self {
        Element { name: name.into(), attributes: Vec::new(), children: Vec::new() }
    }

    /// Element nesting depth, the element itself counting as 1.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = alloc::vec![(self, 1usize)];
        while let Some((e, d)) = stack.pop() {
            max = max.max(d);
            for c in &e.children {
                if let Node::Element(child) = c {
                    stack.push((child, d + 1));
                }
            }
        }
        max
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConvertError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("nesting deeper than {0} elements")]
    DepthExceeded(usize),
    #[error("entity `&{0};` is not supported")]
    EntityUnsupported(String),
    #[error("document must have exactly one root element")]
    MultipleRoots,
    #[error("cannot map to XML: {0}")]
    Shape(String),
}

impl ConvertError {
    pub(crate) fn parse_at(src: &str, pos: usize, message: &str) -> Self {
        let before = &src[..pos.min(src.len())];
        ConvertError::Parse {
            line: before.matches('\n').count() + 1,
            column: before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1,
            message: message.into(),
        }
    }
}

impl From<JsonError> for ConvertError {
    fn from(e: JsonError) -> Self {
        match e {
            JsonError::Syntax { line, column, message } => ConvertError::Parse { line, column, message: message.into() },
            JsonError::TooDeep(_) => ConvertError::DepthExceeded(MAX_DEPTH),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Xml,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Xml => "xml",
            Format::Json => "json",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Format> {
        match ext.to_ascii_lowercase().as_str() {
            "xml" => Some(Format::Xml),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    /// Guess from the first non-blank character.
    pub fn sniff(text: &str) -> Option<Format> {
        match text.trim_start_matches('\u{feff}').trim_start().chars().next()? {
            '<' => Some(Format::Xml),
            '{' | '[' => Some(Format::Json),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

fn scalar_text(v: &JsonValue) -> Option<String> {
    match v {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.clone()),
        JsonValue::Bool(b) => Some(if *b { "true".into() } else { "false".into() }),
        _ => None,
    }
}

fn add_member(members: &mut Vec<(String, JsonValue)>, key: String, value: JsonValue) {
    match members.iter_mut().find(|(k, _)| *k == key) {
        Some((_, JsonValue::Array(items))) => items.push(value),
        Some((_, slot)) => {
            let first = core::mem::replace(slot, JsonValue::Null);
            *slot = JsonValue::Array(alloc::vec![first, value]);
        }
        None => members.push((key, value)),
    }
}

fn finish(e: &Element, members: Vec<(String, JsonValue)>) -> JsonValue {
    match (e.attributes.is_empty(), e.children.as_slice()) {
        (true, []) => JsonValue::Null,
        (true, [Node::Text(t)]) => JsonValue::String(t.clone()),
        _ => JsonValue::Object(members),
    }
}

fn attribute_members(e: &Element) -> Vec<(String, JsonValue)> {
    e.attributes.iter().map(|(k, v)| (format!("@{k}"), JsonValue::String(v.clone()))).collect()
}

/// Element, index of the next child, members collected so far.
type ValueFrame<'a> = (&'a Element, usize, Vec<(String, JsonValue)>);

/// JSON value of an element's content.
pub fn element_value(root: &Element) -> JsonValue {
    let mut stack: Vec<ValueFrame> = alloc::vec![(root, 0, attribute_members(root))];
    loop {
        let (el, next, members) = stack.last_mut().expect("stack holds the root until it finishes");
        if let Some(child) = el.children.get(*next) {
            *next += 1;
            match child {
                Node::Text(t) => add_member(members, "#text".into(), JsonValue::String(t.clone())),
                Node::Element(c) => stack.push((c, 0, attribute_members(c))),
            }
            continue;
        }
        let (el, _, members) = stack.pop().expect("non-empty");
        let value = finish(el, members);
        match stack.last_mut() {
            Some((_, _, parent)) => add_member(parent, el.name.clone(), value),
            None => return value,
        }
    }
}

pub fn element_to_json(root: &Element) -> JsonValue {
    JsonValue::Object(alloc::vec![(root.name.clone(), element_value(root))])
}

fn check_name(name: &str) -> Result<(), ConvertError> {
    let ok = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == ':')
        && !name.chars().any(|c| c.is_whitespace() || "/<>=\"'&".contains(c));
    if ok {
        Ok(())
    } else {
        Err(ConvertError::Shape(format!("`{name}` is not a valid XML name")))
    }
}

enum Item<'a> {
    Text(String),
    Child(&'a str, &'a JsonValue),
}

struct Frame<'a> {
    el: Element,
    /// Remaining content, last item first.
    pending: Vec<Item<'a>>,
    depth: usize,
}

/// Starts an element. Objects come back as a frame whose children still
/// need building; everything else is finished immediately.
fn open<'a>(name: &str, value: &'a JsonValue, depth: usize) -> Result<Frame<'a>, ConvertError> {
    if depth > MAX_DEPTH {
        return Err(ConvertError::DepthExceeded(MAX_DEPTH));
    }
    check_name(name)?;
    let mut frame = Frame { el: Element::new(name), pending: Vec::new(), depth };
    match value {
        JsonValue::Null => {}
        JsonValue::Array(_) => return Err(ConvertError::Shape(format!("array as content of `{name}`"))),
        JsonValue::Object(members) => {
            for (key, v) in members {
                if key == "#text" || key == "-#text" {
                    let texts: Vec<&JsonValue> = match v {
                        JsonValue::Array(items) => items.iter().collect(),
                        JsonValue::Null => Vec::new(),
                        other => alloc::vec![other],
                    };
                    for t in texts {
                        let t = scalar_text(t)
                            .ok_or_else(|| ConvertError::Shape(format!("non-text `{key}` in `{name}`")))?;
                        if !t.is_empty() {
                            frame.pending.push(Item::Text(t));
                        }
                    }
                } else if let Some(attr) = key.strip_prefix('@').or_else(|| key.strip_prefix('-')) {
                    check_name(attr)?;
                    let text = match v {
                        JsonValue::Null => String::new(),
                        other => scalar_text(other).ok_or_else(|| {
                            ConvertError::Shape(format!("attribute `{attr}` of `{name}` is not a scalar"))
                        })?,
                    };
                    if frame.el.attributes.iter().any(|(k, _)| k == attr) {
                        return Err(ConvertError::Shape(format!("duplicate attribute `{attr}` on `{name}`")));
                    }
                    frame.el.attributes.push((attr.into(), text));
                } else if let JsonValue::Array(items) = v {
                    for item in items {
                        if matches!(item, JsonValue::Array(_)) {
                            return Err(ConvertError::Shape(format!("nested array under `{key}`")));
                        }
                        frame.pending.push(Item::Child(key, item));
                    }
                } else {
                    frame.pending.push(Item::Child(key, v));
                }
            }
            frame.pending.reverse();
        }
        scalar => {
            if let Some(t) = scalar_text(scalar).filter(|t| !t.is_empty()) {
                frame.el.children.push(Node::Text(t));
            }
        }
    }
    Ok(frame)
}

/// Element tree of a single-member JSON object.
pub fn json_to_element(value: &JsonValue) -> Result<Element, ConvertError> {
    let (name, v) = match value {
        JsonValue::Object(members) => match members.as_slice() {
            [(_, JsonValue::Array(_))] => return Err(ConvertError::MultipleRoots),
            [(name, v)] => (name, v),
            [] => return Err(ConvertError::Shape("empty root object".into())),
            _ => return Err(ConvertError::MultipleRoots),
        },
        _ => return Err(ConvertError::Shape("root must be an object".into())),
    };
    let mut stack = alloc::vec![open(name, v, 1)?];
    loop {
        let top = stack.last_mut().expect("stack holds the root until it finishes");
        match top.pending.pop() {
            Some(Item::Text(t)) => top.el.children.push(Node::Text(t)),
            Some(Item::Child(name, v)) => {
                let child = open(name, v, top.depth + 1)?;
                stack.push(child);
            }
            None => {
                let done = stack.pop().expect("non-empty").el;
                match stack.last_mut() {
                    Some(parent) => parent.el.children.push(Node::Element(done)),
                    None => return Ok(done),
                }
            }
        }
    }
}

/// JSON nesting needed for `MAX_DEPTH` elements including repeat arrays.
const JSON_NESTING: usize = 2 * MAX_DEPTH + 2;

pub fn xml_to_json(text: &str) -> Result<String, ConvertError> {
    let root = xml::parse(text)?;
    Ok(json::to_string(&element_to_json(&root)))
}

pub fn json_to_xml(text: &str) -> Result<String, ConvertError> {
    let value = json::parse_with_limit(text, JSON_NESTING)?;
    let root = json_to_element(&value)?;
    Ok(xml::to_string(&root))
}

/// Converts between the two formats; identical formats are rejected by
/// callers, here they simply re-emit canonically.
pub fn convert(text: &str, from: Format, to: Format) -> Result<String, ConvertError> {
    match (from, to) {
        (Format::Xml, Format::Json) => xml_to_json(text),
        (Format::Json, Format::Xml) => json_to_xml(text),
        (Format::Xml, Format::Xml) => Ok(xml::to_string(&xml::parse(text)?)),
        (Format::Json, Format::Json) => Ok(json::to_string(&json::parse_with_limit(text, JSON_NESTING)?)),
    }
}
