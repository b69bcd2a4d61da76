//! Strict YAML subset used by descriptor, profile, and config files.
//!
//! Only block/flow mappings, sequences, and scalars are accepted. Anchors,
//! aliases, tags, duplicate keys, non-scalar keys, and multi-document
//! streams are rejected. Every node keeps its source position so schema
//! errors can point at the offending line.

use std::fmt::{self, Write as _};

use thiserror::Error;
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl From<Marker> for Pos {
    fn from(m: Marker) -> Self {
        Pos {
            line: m.line(),
            col: m.col() + 1,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Scalar {
        value: String,
        pos: Pos,
    },
    Seq {
        items: Vec<Node>,
        pos: Pos,
    },
    Map {
        entries: Vec<(String, Node)>,
        pos: Pos,
    },
}

impl Node {
    pub fn pos(&self) -> Pos {
        match self {
            Node::Scalar { pos, .. } | Node::Seq { pos, .. } | Node::Map { pos, .. } => *pos,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::Scalar { .. } => "scalar",
            Node::Seq { .. } => "sequence",
            Node::Map { .. } => "mapping",
        }
    }

    pub fn scalar(value: impl Into<String>) -> Node {
        Node::Scalar {
            value: value.into(),
            pos: Pos::default(),
        }
    }

    pub fn seq(items: Vec<Node>) -> Node {
        Node::Seq {
            items,
            pos: Pos::default(),
        }
    }

    pub fn map(entries: Vec<(&str, Node)>) -> Node {
        Node::Map {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            pos: Pos::default(),
        }
    }
}

enum Frame {
    Seq(Vec<Node>, Pos),
    Map(Vec<(String, Node)>, Option<(String, Pos)>, Pos),
}

#[derive(Default)]
struct Builder {
    stack: Vec<Frame>,
    docs: Vec<Node>,
    error: Option<SyntaxError>,
}

impl Builder {
    fn fail(&mut self, pos: Pos, message: impl Into<String>) {
        if self.error.is_none() {
            self.error = Some(SyntaxError {
                pos,
                message: message.into(),
            });
        }
    }

    fn push_value(&mut self, node: Node) {
        match self.stack.last_mut() {
            None => self.docs.push(node),
            Some(Frame::Seq(items, _)) => items.push(node),
            Some(Frame::Map(entries, pending, _)) => match pending.take() {
                None => match node {
                    Node::Scalar { value, pos } => {
                        if entries.iter().any(|(k, _)| *k == value) {
                            self.fail(pos, format!("duplicate key `{value}`"));
                        } else {
                            *pending = Some((value, pos));
                        }
                    }
                    other => self.fail(other.pos(), "mapping keys must be scalars"),
                },
                Some((key, _)) => entries.push((key, node)),
            },
        }
    }
}

impl MarkedEventReceiver for Builder {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        if self.error.is_some() {
            return;
        }
        let pos = Pos::from(mark);
        match ev {
            Event::Alias(_) => self.fail(pos, "aliases are not supported"),
            Event::Scalar(value, style, anchor, tag) => {
                if anchor != 0 {
                    self.fail(pos, "anchors are not supported");
                } else if tag.is_some() {
                    self.fail(pos, "tags are not supported");
                } else {
                    // `~` and empty plain scalars are YAML null; keep them as empty text.
                    let value = if style == TScalarStyle::Plain && value == "~" {
                        String::new()
                    } else {
                        value
                    };
                    self.push_value(Node::Scalar { value, pos });
                }
            }
            Event::SequenceStart(anchor, tag) | Event::MappingStart(anchor, tag)
                if anchor != 0 || tag.is_some() =>
            {
                self.fail(pos, "anchors and tags are not supported")
            }
            Event::SequenceStart(..) => self.stack.push(Frame::Seq(Vec::new(), pos)),
            Event::MappingStart(..) => self.stack.push(Frame::Map(Vec::new(), None, pos)),
            Event::SequenceEnd => {
                if let Some(Frame::Seq(items, pos)) = self.stack.pop() {
                    self.push_value(Node::Seq { items, pos });
                }
            }
            Event::MappingEnd => {
                if let Some(Frame::Map(entries, _, pos)) = self.stack.pop() {
                    self.push_value(Node::Map { entries, pos });
                }
            }
            Event::Nothing
            | Event::StreamStart
            | Event::StreamEnd
            | Event::DocumentStart
            | Event::DocumentEnd => {}
        }
    }
}

/// Parses exactly one YAML document into a [`Node`] tree.
pub fn parse(text: &str) -> Result<Node, SyntaxError> {
    let mut builder = Builder::default();
    let mut parser = Parser::new_from_str(text);
    if let Err(e) = parser.load(&mut builder, true) {
        return Err(SyntaxError {
            pos: Pos::from(*e.marker()),
            message: e.info().to_string(),
        });
    }
    if let Some(err) = builder.error {
        return Err(err);
    }
    let mut docs = builder.docs;
    match docs.len() {
        0 => Err(SyntaxError {
            pos: Pos { line: 1, col: 1 },
            message: "empty document".into(),
        }),
        1 => Ok(docs.remove(0)),
        _ => Err(SyntaxError {
            pos: docs[1].pos(),
            message: "multiple documents are not supported".into(),
        }),
    }
}

/// Renders a node as block-style YAML. Output of `emit` always re-parses to
/// a structurally equal tree.
pub fn emit(node: &Node) -> String {
    let mut out = String::new();
    match node {
        Node::Scalar { value, .. } => {
            out.push_str(&quote(value));
            out.push('\n');
        }
        _ => emit_block(&mut out, node, 0),
    }
    out
}

fn emit_block(out: &mut String, node: &Node, indent: usize) {
    let pad = " ".repeat(indent);
    match node {
        Node::Scalar { value, .. } => {
            let _ = writeln!(out, "{pad}{}", quote(value));
        }
        Node::Map { entries, .. } => {
            for (k, v) in entries {
                let _ = write!(out, "{pad}{}:", quote(k));
                emit_value_after_key(out, v, indent);
            }
        }
        Node::Seq { items, .. } => {
            for item in items {
                let _ = write!(out, "{pad}-");
                match item {
                    Node::Scalar { value, .. } => {
                        let _ = writeln!(out, " {}", quote(value));
                    }
                    Node::Map { entries, .. } if !entries.is_empty() => {
                        // First entry shares the dash line; the rest align under it.
                        let mut first = true;
                        for (k, v) in entries {
                            if first {
                                let _ = write!(out, " {}:", quote(k));
                                first = false;
                            } else {
                                let _ = write!(out, "{}  {}:", pad, quote(k));
                            }
                            emit_value_after_key(out, v, indent + 2);
                        }
                    }
                    Node::Map { .. } => out.push_str(" {}\n"),
                    Node::Seq { items, .. } if items.is_empty() => out.push_str(" []\n"),
                    Node::Seq { .. } => {
                        out.push('\n');
                        emit_block(out, item, indent + 2);
                    }
                }
            }
        }
    }
}

fn emit_value_after_key(out: &mut String, v: &Node, indent: usize) {
    match v {
        Node::Scalar { value, .. } => {
            let _ = writeln!(out, " {}", quote(value));
        }
        Node::Seq { items, .. } if items.is_empty() => out.push_str(" []\n"),
        Node::Map { entries, .. } if entries.is_empty() => out.push_str(" {}\n"),
        Node::Seq { .. } => {
            out.push('\n');
            emit_block(out, v, indent + 2);
        }
        Node::Map { .. } => {
            out.push('\n');
            emit_block(out, v, indent + 2);
        }
    }
}

fn is_plain_safe(s: &str) -> bool {
    if s.is_empty() || s == "~" {
        return false;
    }
    let first = s.chars().next().unwrap_or(' ');
    if !(first.is_ascii_alphanumeric() || first == '/' || first == '.') {
        return false;
    }
    s.chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '/' | '+' | '=' | ' '))
        && !s.ends_with(' ')
        && !s.contains("  ")
}

fn quote(s: &str) -> String {
    if is_plain_safe(s) {
        return s.to_string();
    }
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            '\r' => q.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(q, "\\u{:04x}", c as u32);
            }
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

/// Structural equality ignoring source positions.
pub fn same_shape(a: &Node, b: &Node) -> bool {
    match (a, b) {
        (Node::Scalar { value: x, .. }, Node::Scalar { value: y, .. }) => x == y,
        (Node::Seq { items: x, .. }, Node::Seq { items: y, .. }) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same_shape(p, q))
        }
        (Node::Map { entries: x, .. }, Node::Map { entries: y, .. }) => {
            x.len() == y.len()
                && x.iter()
                    .zip(y)
                    .all(|((k1, v1), (k2, v2))| k1 == k2 && same_shape(v1, v2))
        }
        _ => false,
    }
}

/// A schema violation located by a JSON-pointer style path (`/vdus/0/name`).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema error at {path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub fn child_path(path: &str, key: impl fmt::Display) -> String {
    format!("{path}/{key}")
}

/// Strict accessor over a mapping node: every key must be consumed, and
/// [`MapReader::finish`] reports leftovers as unknown fields.
pub struct MapReader<'a> {
    path: String,
    entries: Vec<(&'a str, &'a Node)>,
}

impl<'a> MapReader<'a> {
    pub fn new(node: &'a Node, path: &str) -> Result<Self, SchemaError> {
        match node {
            Node::Map { entries, .. } => Ok(MapReader {
                path: path.to_string(),
                entries: entries.iter().map(|(k, v)| (k.as_str(), v)).collect(),
            }),
            other => Err(SchemaError::new(
                display_path(path),
                format!("expected mapping, found {}", other.kind_name()),
            )),
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn key_path(&self, key: &str) -> String {
        child_path(&self.path, key)
    }

    pub fn take(&mut self, key: &str) -> Option<&'a Node> {
        let i = self.entries.iter().position(|(k, _)| *k == key)?;
        Some(self.entries.remove(i).1)
    }

    pub fn required(&mut self, key: &str) -> Result<&'a Node, SchemaError> {
        self.take(key)
            .ok_or_else(|| SchemaError::new(self.key_path(key), "missing required field"))
    }

    pub fn req_str(&mut self, key: &str) -> Result<String, SchemaError> {
        let node = self.required(key)?;
        as_str(node, &self.key_path(key)).map(str::to_string)
    }

    pub fn opt_str(&mut self, key: &str) -> Result<Option<String>, SchemaError> {
        match self.take(key) {
            None => Ok(None),
            Some(n) => as_str(n, &self.key_path(key)).map(|s| Some(s.to_string())),
        }
    }

    pub fn opt_bool(&mut self, key: &str) -> Result<Option<bool>, SchemaError> {
        match self.take(key) {
            None => Ok(None),
            Some(n) => {
                let path = self.key_path(key);
                match as_str(n, &path)? {
                    "true" => Ok(Some(true)),
                    "false" => Ok(Some(false)),
                    other => Err(SchemaError::new(
                        path,
                        format!("expected boolean, found `{other}`"),
                    )),
                }
            }
        }
    }

    pub fn req_parse<T: std::str::FromStr>(
        &mut self,
        key: &str,
        what: &str,
    ) -> Result<T, SchemaError> {
        let path = self.key_path(key);
        let s = self.req_str(key)?;
        s.parse()
            .map_err(|_| SchemaError::new(path, format!("expected {what}, found `{s}`")))
    }

    /// Sequence items with their paths; absent key yields an empty list.
    pub fn opt_seq(&mut self, key: &str) -> Result<Vec<(String, &'a Node)>, SchemaError> {
        match self.take(key) {
            None => Ok(Vec::new()),
            Some(n) => seq_items(n, &self.key_path(key)),
        }
    }

    pub fn req_seq(&mut self, key: &str) -> Result<Vec<(String, &'a Node)>, SchemaError> {
        let n = self.required(key)?;
        seq_items(n, &self.key_path(key))
    }

    /// Remaining `(key, node)` pairs, consuming them.
    pub fn drain(&mut self) -> Vec<(&'a str, &'a Node)> {
        std::mem::take(&mut self.entries)
    }

    pub fn finish(self) -> Result<(), SchemaError> {
        match self.entries.first() {
            None => Ok(()),
            Some((k, _)) => Err(SchemaError::new(child_path(&self.path, k), "unknown field")),
        }
    }
}

fn display_path(path: &str) -> String {
    if path.is_empty() {
        "/".to_string()
    } else {
        path.to_string()
    }
}

pub fn as_str<'a>(node: &'a Node, path: &str) -> Result<&'a str, SchemaError> {
    match node {
        Node::Scalar { value, .. } => Ok(value),
        other => Err(SchemaError::new(
            display_path(path),
            format!("expected scalar, found {}", other.kind_name()),
        )),
    }
}

pub fn seq_items<'a>(node: &'a Node, path: &str) -> Result<Vec<(String, &'a Node)>, SchemaError> {
    match node {
        Node::Seq { items, .. } => Ok(items
            .iter()
            .enumerate()
            .map(|(i, n)| (child_path(path, i), n))
            .collect()),
        other => Err(SchemaError::new(
            display_path(path),
            format!("expected sequence, found {}", other.kind_name()),
        )),
    }
}
