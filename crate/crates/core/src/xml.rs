//! Ordered XML trees: the value type for syntax trees, transform results and
//! `row` documents.
//!
//! Only elements and character data are modelled. Whitespace-only text is
//! dropped while parsing, so a document survives a serialize/parse round trip
//! unchanged as long as it holds no whitespace-only or adjacent text nodes.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct XmlError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A node of an XML tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum XmlNode {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Element {
    pub name: String,
    pub children: Vec<XmlNode>,
}

/// A document with exactly one root element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct XmlDoc {
    root: Element,
}

impl XmlNode {
    pub fn text(s: impl Into<String>) -> Self {
        XmlNode::Text(s.into())
    }

    pub fn as_element(&self) -> Option<&Element> {
        match self {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        }
    }

    pub fn string_value(&self) -> String {
        let mut out = String::new();
        self.push_text(&mut out);
        out
    }

    fn push_text(&self, out: &mut String) {
        match self {
            XmlNode::Text(t) => out.push_str(t),
            XmlNode::Element(e) => {
                for c in &e.children {
                    c.push_text(out);
                }
            }
        }
    }
}

impl From<Element> for XmlNode {
    fn from(e: Element) -> Self {
        XmlNode::Element(e)
    }
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            children: Vec::new(),
        }
    }

    /// Element holding a single text child (no child at all for "").
    pub fn with_text(name: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut e = Element::new(name);
        if !text.is_empty() {
            e.children.push(XmlNode::Text(text));
        }
        e
    }

    pub fn child(mut self, node: impl Into<XmlNode>) -> Self {
        self.push(node);
        self
    }

    /// Appends a child, merging adjacent text and skipping empty text.
    pub fn push(&mut self, node: impl Into<XmlNode>) {
        push_normalized(&mut self.children, node.into());
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(XmlNode::as_element)
    }

    pub fn string_value(&self) -> String {
        let mut out = String::new();
        for c in &self.children {
            c.push_text(&mut out);
        }
        out
    }
}

/// Appends `node` to a node list keeping text nodes non-empty and
/// non-adjacent.
pub fn push_normalized(list: &mut Vec<XmlNode>, node: XmlNode) {
    match node {
        XmlNode::Text(t) if t.is_empty() => {}
        XmlNode::Text(t) => match list.last_mut() {
            Some(XmlNode::Text(prev)) => prev.push_str(&t),
            _ => list.push(XmlNode::Text(t)),
        },
        e => list.push(e),
    }
}

impl XmlDoc {
    pub fn new(root: Element) -> Self {
        XmlDoc { root }
    }

    pub fn root(&self) -> &Element {
        &self.root
    }

    pub fn into_root(self) -> Element {
        self.root
    }

    pub fn string_value(&self) -> String {
        self.root.string_value()
    }
}

impl fmt::Display for XmlDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_xml(self))
    }
}

impl std::str::FromStr for XmlDoc {
    type Err = XmlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_xml(s)
    }
}

/// Element names: a letter or `_`, then letters, digits, `-`, `_` or `.`.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub fn parse_xml(text: &str) -> Result<XmlDoc, XmlError> {
    let mut reader = Reader::new(text, false);
    reader.skip_ws();
    if reader.at_end() {
        return Err(reader.error("document has no root element"));
    }
    let raw = reader.element()?;
    reader.skip_ws();
    if !reader.at_end() {
        return Err(reader.error("content after the root element"));
    }
    Ok(XmlDoc::new(raw.into_data()?))
}

pub fn serialize_xml(doc: &XmlDoc) -> String {
    let mut out = String::new();
    write_element(&doc.root, &mut out);
    out
}

/// Canonical form of a node list (e.g. a transform result fragment).
pub fn serialize_nodes(nodes: &[XmlNode]) -> String {
    let mut out = String::new();
    for n in nodes {
        write_node(n, &mut out);
    }
    out
}

pub fn string_value(node: &XmlNode) -> String {
    node.string_value()
}

pub fn canonical_equal(a: &XmlDoc, b: &XmlDoc) -> bool {
    serialize_xml(a) == serialize_xml(b)
}

fn write_node(node: &XmlNode, out: &mut String) {
    match node {
        XmlNode::Text(t) => escape_into(t, out),
        XmlNode::Element(e) => write_element(e, out),
    }
}

fn write_element(e: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&e.name);
    if e.children.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    for c in &e.children {
        write_node(c, out);
    }
    out.push_str("</");
    out.push_str(&e.name);
    out.push('>');
}

fn escape_into(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            c => out.push(c),
        }
    }
}

// ---------------------------------------------------------------------------
// Reader shared by data documents and transform program bodies.

/// Element with attributes and position, as read from source text.
#[derive(Debug, Clone)]
pub(crate) struct RawElement {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<RawNode>,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum RawNode {
    Element(RawElement),
    Text(String),
}

impl RawElement {
    fn into_data(self) -> Result<Element, XmlError> {
        if let Some((attr, _)) = self.attrs.first() {
            return Err(XmlError {
                line: self.line,
                column: self.column,
                message: format!("attributes are not supported (`{attr}` on <{}>)", self.name),
            });
        }
        if !is_valid_name(&self.name) {
            return Err(XmlError {
                line: self.line,
                column: self.column,
                message: format!("invalid element name `{}`", self.name),
            });
        }
        let mut e = Element::new(self.name);
        for c in self.children {
            match c {
                RawNode::Text(t) => e.push(XmlNode::Text(t)),
                RawNode::Element(r) => e.push(r.into_data()?),
            }
        }
        Ok(e)
    }
}

pub(crate) struct Reader<'a> {
    src: &'a str,
    pos: usize,
    /// Accept `prefix:name` element and attribute names.
    qualified: bool,
}

impl<'a> Reader<'a> {
    pub fn new(src: &'a str, qualified: bool) -> Self {
        Reader {
            src,
            pos: 0,
            qualified,
        }
    }

    pub fn with_offset(src: &'a str, pos: usize, qualified: bool) -> Self {
        Reader {
            src,
            pos,
            qualified,
        }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    pub fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    pub fn error(&self, message: impl Into<String>) -> XmlError {
        let (line, column) = line_col(self.src, self.pos);
        XmlError {
            line,
            column,
            message: message.into(),
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') || (self.qualified && c == ':') {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    /// Reads one element starting at `<`; whitespace-only text is dropped.
    pub fn element(&mut self) -> Result<RawElement, XmlError> {
        // Explicit stack so deeply nested input cannot exhaust the call stack.
        let mut stack: Vec<RawElement> = Vec::new();
        loop {
            if self.at_end() {
                let open = stack.last().map(|e| e.name.as_str()).unwrap_or("?");
                return Err(self.error(format!("unexpected end of input inside <{open}>")));
            }
            if self.peek() == Some('<') {
                if self.src[self.pos..].starts_with("</") {
                    let Some(mut done) = stack.pop() else {
                        return Err(self.error("unexpected end tag"));
                    };
                    self.pos += 2;
                    let name = self.name()?;
                    if name != done.name {
                        return Err(self.error(format!(
                            "mismatched end tag: expected </{}>, found </{name}>",
                            done.name
                        )));
                    }
                    self.skip_ws();
                    if !self.eat(">") {
                        return Err(self.error("expected `>`"));
                    }
                    trim_ws_text(&mut done.children);
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(RawNode::Element(done)),
                        None => return Ok(done),
                    }
                    continue;
                }
                if self.src[self.pos..].starts_with("<!") || self.src[self.pos..].starts_with("<?") {
                    return Err(self.error(
                        "comments, CDATA, declarations and processing instructions are not supported",
                    ));
                }
                let (line, column) = line_col(self.src, self.pos);
                self.pos += 1;
                let name = self.name()?;
                let mut attrs = Vec::new();
                loop {
                    let before = self.pos;
                    self.skip_ws();
                    if self.eat("/>") {
                        let e = RawElement {
                            name,
                            attrs,
                            children: Vec::new(),
                            line,
                            column,
                        };
                        match stack.last_mut() {
                            Some(parent) => parent.children.push(RawNode::Element(e)),
                            None => return Ok(e),
                        }
                        break;
                    }
                    if self.eat(">") {
                        stack.push(RawElement {
                            name,
                            attrs,
                            children: Vec::new(),
                            line,
                            column,
                        });
                        break;
                    }
                    if before == self.pos {
                        return Err(self.error("expected whitespace, `>` or `/>`"));
                    }
                    let attr = self.name()?;
                    self.skip_ws();
                    if !self.eat("=") {
                        return Err(self.error("expected `=` after attribute name"));
                    }
                    self.skip_ws();
                    let quote = match self.peek() {
                        Some(q @ ('"' | '\'')) => q,
                        _ => return Err(self.error("expected a quoted attribute value")),
                    };
                    self.pos += 1;
                    let end = self.src[self.pos..]
                        .find(quote)
                        .ok_or_else(|| self.error("unterminated attribute value"))?;
                    let raw = &self.src[self.pos..self.pos + end];
                    if raw.contains('<') {
                        return Err(self.error("`<` in attribute value"));
                    }
                    let value = decode_entities(raw).map_err(|m| self.error(m))?;
                    self.pos += end + 1;
                    if attrs.iter().any(|(a, _): &(String, String)| *a == attr) {
                        return Err(self.error(format!("duplicate attribute `{attr}`")));
                    }
                    attrs.push((attr, value));
                }
            } else {
                let Some(parent) = stack.last_mut() else {
                    return Err(self.error("expected `<`"));
                };
                let start = self.pos;
                let end = self.src[start..]
                    .find('<')
                    .map(|i| start + i)
                    .unwrap_or(self.src.len());
                let raw = &self.src[start..end];
                let text = decode_entities(raw).map_err(|m| {
                    let (line, column) = line_col(self.src, start);
                    XmlError {
                        line,
                        column,
                        message: m,
                    }
                })?;
                self.pos = end;
                match parent.children.last_mut() {
                    Some(RawNode::Text(prev)) => prev.push_str(&text),
                    _ => parent.children.push(RawNode::Text(text)),
                }
            }
        }
    }
}

fn trim_ws_text(children: &mut Vec<RawNode>) {
    children.retain(|c| match c {
        RawNode::Text(t) => !t.trim().is_empty(),
        RawNode::Element(_) => true,
    });
}

fn decode_entities(raw: &str) -> Result<String, String> {
    if !raw.contains('&') {
        return Ok(raw.to_string());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i + 1..];
        let end = rest
            .find(';')
            .ok_or_else(|| "unterminated entity reference".to_string())?;
        let entity = &rest[..end];
        let decoded = match entity {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            _ => {
                let code = if let Some(hex) = entity.strip_prefix("#x") {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = entity.strip_prefix('#') {
                    dec.parse::<u32>().ok()
                } else {
                    None
                };
                code.and_then(char::from_u32)
                    .ok_or_else(|| format!("bad entity reference `&{entity};`"))?
            }
        };
        out.push(decoded);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub(crate) fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}
