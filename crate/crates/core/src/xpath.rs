//! XPath subset: location paths over the child, descendant-or-self and self
//! axes, name/`*`/`node()` tests, predicates with `=`/`!=`, variables, and
//! the `count` and `string` functions. Also template match patterns.
//!
//! Expressions are evaluated over [`Tree`], a read-only arena index of a
//! document. Node ids are preorder positions, so document order is id order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;

use thiserror::Error;

use crate::xml::{push_normalized, Element, XmlDoc, XmlNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XPathError {
    #[error("XPath syntax error at offset {position} in `{text}`: expected {}", expected.join(" or "))]
    Syntax {
        text: String,
        position: usize,
        expected: Vec<&'static str>,
    },
    #[error("unsupported XPath construct `{construct}` in `{text}`")]
    Unsupported { text: String, construct: String },
    #[error("unsupported match pattern `{0}`")]
    UnsupportedPattern(String),
    #[error("unbound variable ${0}")]
    UnboundVariable(String),
    #[error("expression does not yield a node-set: {0}")]
    NotANodeSet(String),
}

// ---------------------------------------------------------------------------
// Arena trees

static TREE_SERIAL: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
enum Kind {
    Document,
    Element(String),
    Text(String),
}

#[derive(Debug)]
struct Entry {
    kind: Kind,
    parent: Option<u32>,
    children: Vec<u32>,
    /// One past the last descendant id.
    end: u32,
}

/// Navigable index of a document: id 0 is the document node.
#[derive(Debug)]
pub struct Tree {
    serial: u64,
    entries: Vec<Entry>,
}

impl Tree {
    pub fn from_doc(doc: &XmlDoc) -> Arc<Tree> {
        Self::build(std::slice::from_ref(doc.root()).iter().map(NodeOrElement::Element))
    }

    /// A tree whose document node holds `nodes` (a result tree fragment).
    pub fn from_fragment(nodes: &[XmlNode]) -> Arc<Tree> {
        Self::build(nodes.iter().map(NodeOrElement::Node))
    }

    fn build<'a>(top: impl Iterator<Item = NodeOrElement<'a>>) -> Arc<Tree> {
        let mut entries = vec![Entry {
            kind: Kind::Document,
            parent: None,
            children: Vec::new(),
            end: 0,
        }];
        for n in top {
            let id = add(&mut entries, n, 0);
            entries[0].children.push(id);
        }
        entries[0].end = entries.len() as u32;
        Arc::new(Tree {
            serial: TREE_SERIAL.fetch_add(1, AtomicOrdering::Relaxed),
            entries,
        })
    }

    pub fn root(self: &Arc<Self>) -> Node {
        Node {
            tree: Arc::clone(self),
            id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() == 1
    }
}

enum NodeOrElement<'a> {
    Node(&'a XmlNode),
    Element(&'a Element),
}

fn add(entries: &mut Vec<Entry>, n: NodeOrElement<'_>, parent: u32) -> u32 {
    let id = entries.len() as u32;
    let element = match n {
        NodeOrElement::Node(XmlNode::Text(t)) => {
            entries.push(Entry {
                kind: Kind::Text(t.clone()),
                parent: Some(parent),
                children: Vec::new(),
                end: id + 1,
            });
            return id;
        }
        NodeOrElement::Node(XmlNode::Element(e)) | NodeOrElement::Element(e) => e,
    };
    entries.push(Entry {
        kind: Kind::Element(element.name.clone()),
        parent: Some(parent),
        children: Vec::with_capacity(element.children.len()),
        end: 0,
    });
    for c in &element.children {
        let cid = add(entries, NodeOrElement::Node(c), id);
        entries[id as usize].children.push(cid);
    }
    entries[id as usize].end = entries.len() as u32;
    id
}

/// A handle on one node of a [`Tree`].
#[derive(Clone)]
pub struct Node {
    tree: Arc<Tree>,
    id: u32,
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.entry().kind {
            Kind::Document => write!(f, "Node(/)"),
            Kind::Element(n) => write!(f, "Node(<{n}>#{})", self.id),
            Kind::Text(t) => write!(f, "Node({t:?}#{})", self.id),
        }
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.tree.serial == other.tree.serial && self.id == other.id
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Document order within a tree; trees ordered by creation.
    fn cmp(&self, other: &Self) -> Ordering {
        (self.tree.serial, self.id).cmp(&(other.tree.serial, other.id))
    }
}

impl Node {
    fn entry(&self) -> &Entry {
        &self.tree.entries[self.id as usize]
    }

    fn at(&self, id: u32) -> Node {
        Node {
            tree: Arc::clone(&self.tree),
            id,
        }
    }

    pub fn is_document(&self) -> bool {
        matches!(self.entry().kind, Kind::Document)
    }

    pub fn is_element(&self) -> bool {
        matches!(self.entry().kind, Kind::Element(_))
    }

    pub fn name(&self) -> Option<&str> {
        match &self.entry().kind {
            Kind::Element(n) => Some(n),
            _ => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.entry().kind {
            Kind::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn parent(&self) -> Option<Node> {
        self.entry().parent.map(|p| self.at(p))
    }

    pub fn children(&self) -> impl Iterator<Item = Node> + '_ {
        self.entry().children.iter().map(|&c| self.at(c))
    }

    /// This node and all descendants in document order.
    pub fn descendants_or_self(&self) -> impl Iterator<Item = Node> + '_ {
        (self.id..self.entry().end).map(|i| self.at(i))
    }

    pub fn string_value(&self) -> String {
        let mut out = String::new();
        for i in self.id..self.entry().end {
            if let Kind::Text(t) = &self.tree.entries[i as usize].kind {
                out.push_str(t);
            }
        }
        out
    }

    /// Owned copy of the subtree; a document node yields its children.
    pub fn to_xml(&self) -> Vec<XmlNode> {
        match &self.entry().kind {
            Kind::Document => self.children().flat_map(|c| c.to_xml()).collect(),
            Kind::Text(t) => vec![XmlNode::Text(t.clone())],
            Kind::Element(name) => {
                let mut e = Element::new(name.clone());
                for c in self.children() {
                    for n in c.to_xml() {
                        push_normalized(&mut e.children, n);
                    }
                }
                vec![XmlNode::Element(e)]
            }
        }
    }

    /// The subtree as a document, when the node is an element or a document
    /// node with exactly one element child.
    pub fn to_doc(&self) -> Option<XmlDoc> {
        let mut nodes = self.to_xml();
        match nodes.as_slice() {
            [XmlNode::Element(_)] => match nodes.pop() {
                Some(XmlNode::Element(e)) => Some(XmlDoc::new(e)),
                _ => None,
            },
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Syntax

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Path(PathExpr),
    Count(PathExpr),
    /// `string()` (context node) or `string(path)`.
    StringOf(Option<PathExpr>),
    Literal(String),
    Number(f64),
    Compare {
        negated: bool,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathExpr {
    pub absolute: bool,
    pub start: PathStart,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathStart {
    Context,
    Variable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub axis: Axis,
    pub test: NodeTest,
    pub predicates: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Child,
    DescendantOrSelf,
    SelfAxis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeTest {
    Name(String),
    AnyElement,
    Node,
}

impl Step {
    fn simple(axis: Axis, test: NodeTest) -> Self {
        Step {
            axis,
            test,
            predicates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Slash,
    DoubleSlash,
    Dot,
    Star,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Eq,
    NotEq,
    Var(String),
    Name(String),
    Str(String),
    Num(f64),
}

pub fn parse_xpath(text: &str) -> Result<Expr, XPathError> {
    let toks = lex(text)?;
    let mut p = Parser { text, toks, i: 0 };
    let e = p.expr()?;
    if p.i < p.toks.len() {
        return Err(p.syntax(&["end of expression"]));
    }
    Ok(e)
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, XPathError> {
    let unsupported = |construct: &str| XPathError::Unsupported {
        text: text.to_string(),
        construct: construct.to_string(),
    };
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut k = 0;
    while k < bytes.len() {
        let (pos, c) = bytes[k];
        let next = bytes.get(k + 1).map(|b| b.1);
        k += 1;
        let tok = match c {
            c if c.is_whitespace() => continue,
            '/' if next == Some('/') => {
                k += 1;
                Tok::DoubleSlash
            }
            '/' => Tok::Slash,
            '.' if next == Some('.') => return Err(unsupported("..")),
            '.' if next.is_some_and(|n| n.is_ascii_digit()) => {
                let (n, used) = lex_number(&text[pos..]);
                k += used - 1;
                Tok::Num(n)
            }
            '.' => Tok::Dot,
            '*' => Tok::Star,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '=' => Tok::Eq,
            '!' if next == Some('=') => {
                k += 1;
                Tok::NotEq
            }
            '\'' | '"' => {
                let rest = &text[pos + 1..];
                let end = rest.find(c).ok_or_else(|| XPathError::Syntax {
                    text: text.to_string(),
                    position: pos,
                    expected: vec!["closing quote"],
                })?;
                let s = rest[..end].to_string();
                k += s.chars().count() + 1;
                Tok::Str(s)
            }
            '$' => {
                let (name, used) = lex_name(&text[pos + 1..]);
                if name.is_empty() {
                    return Err(XPathError::Syntax {
                        text: text.to_string(),
                        position: pos + 1,
                        expected: vec!["variable name"],
                    });
                }
                k += used;
                Tok::Var(name)
            }
            c if c.is_ascii_digit() => {
                let (n, used) = lex_number(&text[pos..]);
                k += used - 1;
                Tok::Num(n)
            }
            c if c.is_alphabetic() || c == '_' => {
                let (name, used) = lex_name(&text[pos..]);
                k += used - 1;
                if text[pos + name.len()..].trim_start().starts_with("::") {
                    return Err(unsupported(&format!("{name}::")));
                }
                if matches!(name.as_str(), "and" | "or" | "div" | "mod") {
                    return Err(unsupported(&name));
                }
                Tok::Name(name)
            }
            '@' => return Err(unsupported("@")),
            '|' => return Err(unsupported("|")),
            '+' | '-' | '<' | '>' => return Err(unsupported(&c.to_string())),
            ',' => return Err(unsupported(",")),
            _ => {
                return Err(XPathError::Syntax {
                    text: text.to_string(),
                    position: pos,
                    expected: vec!["path, literal or function call"],
                })
            }
        };
        out.push((pos, tok));
    }
    Ok(out)
}

/// Returns the name and its length in chars.
fn lex_name(s: &str) -> (String, usize) {
    let name: String = s
        .chars()
        .enumerate()
        .take_while(|&(i, c)| {
            if i == 0 {
                c.is_alphabetic() || c == '_'
            } else {
                c.is_alphanumeric() || matches!(c, '-' | '_' | '.')
            }
        })
        .map(|(_, c)| c)
        .collect();
    let n = name.chars().count();
    (name, n)
}

fn lex_number(s: &str) -> (f64, usize) {
    let len = s
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .count();
    (s[..len].parse().unwrap_or(f64::NAN), len)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    i: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|t| &t.1)
    }

    fn position(&self) -> usize {
        self.toks
            .get(self.i)
            .map(|t| t.0)
            .unwrap_or(self.text.len())
    }

    fn syntax(&self, expected: &[&'static str]) -> XPathError {
        XPathError::Syntax {
            text: self.text.to_string(),
            position: self.position(),
            expected: expected.to_vec(),
        }
    }

    fn unsupported(&self, construct: impl Into<String>) -> XPathError {
        XPathError::Unsupported {
            text: self.text.to_string(),
            construct: construct.into(),
        }
    }

    fn expect(&mut self, t: Tok, what: &'static str) -> Result<(), XPathError> {
        if self.peek() == Some(&t) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.syntax(&[what]))
        }
    }

    fn expr(&mut self) -> Result<Expr, XPathError> {
        let lhs = self.primary()?;
        let negated = match self.peek() {
            Some(Tok::Eq) => false,
            Some(Tok::NotEq) => true,
            _ => return Ok(lhs),
        };
        self.i += 1;
        let rhs = self.primary()?;
        Ok(Expr::Compare {
            negated,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    fn primary(&mut self) -> Result<Expr, XPathError> {
        match self.peek().cloned() {
            Some(Tok::Str(s)) => {
                self.i += 1;
                Ok(Expr::Literal(s))
            }
            Some(Tok::Num(n)) => {
                self.i += 1;
                Ok(Expr::Number(n))
            }
            Some(Tok::Name(name)) if self.peek_at(1) == Some(&Tok::LParen) => match name.as_str() {
                "count" => {
                    self.i += 2;
                    let p = self.path()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Count(p))
                }
                "string" => {
                    self.i += 2;
                    if self.peek() == Some(&Tok::RParen) {
                        self.i += 1;
                        return Ok(Expr::StringOf(None));
                    }
                    let p = self.path()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::StringOf(Some(p)))
                }
                "node" => Ok(Expr::Path(self.path()?)),
                other => Err(self.unsupported(format!("{other}()"))),
            },
            Some(_) => Ok(Expr::Path(self.path()?)),
            None => Err(self.syntax(&["expression"])),
        }
    }

    fn path(&mut self) -> Result<PathExpr, XPathError> {
        let mut path = PathExpr {
            absolute: false,
            start: PathStart::Context,
            steps: Vec::new(),
        };
        match self.peek() {
            Some(Tok::Slash) => {
                self.i += 1;
                path.absolute = true;
                if !self.starts_step() {
                    return Ok(path);
                }
            }
            Some(Tok::DoubleSlash) => {
                self.i += 1;
                path.absolute = true;
                path.steps
                    .push(Step::simple(Axis::DescendantOrSelf, NodeTest::Node));
            }
            Some(Tok::Var(v)) => {
                path.start = PathStart::Variable(v.clone());
                self.i += 1;
                match self.peek() {
                    Some(Tok::Slash) => self.i += 1,
                    Some(Tok::DoubleSlash) => {
                        self.i += 1;
                        path.steps
                            .push(Step::simple(Axis::DescendantOrSelf, NodeTest::Node));
                    }
                    Some(Tok::LBracket) => return Err(self.unsupported("predicate on a variable")),
                    _ => return Ok(path),
                }
            }
            _ => {}
        }
        loop {
            path.steps.push(self.step()?);
            match self.peek() {
                Some(Tok::Slash) => self.i += 1,
                Some(Tok::DoubleSlash) => {
                    self.i += 1;
                    path.steps
                        .push(Step::simple(Axis::DescendantOrSelf, NodeTest::Node));
                }
                _ => return Ok(path),
            }
        }
    }

    fn starts_step(&self) -> bool {
        matches!(self.peek(), Some(Tok::Dot | Tok::Star | Tok::Name(_)))
    }

    fn step(&mut self) -> Result<Step, XPathError> {
        let mut step = match self.peek().cloned() {
            Some(Tok::Dot) => {
                self.i += 1;
                return Ok(Step::simple(Axis::SelfAxis, NodeTest::Node));
            }
            Some(Tok::Star) => {
                self.i += 1;
                Step::simple(Axis::Child, NodeTest::AnyElement)
            }
            Some(Tok::Name(n)) => {
                self.i += 1;
                if self.peek() == Some(&Tok::LParen) {
                    if n != "node" {
                        return Err(self.unsupported(format!("{n}()")));
                    }
                    self.i += 1;
                    self.expect(Tok::RParen, "`)`")?;
                    Step::simple(Axis::Child, NodeTest::Node)
                } else {
                    Step::simple(Axis::Child, NodeTest::Name(n))
                }
            }
            _ => return Err(self.syntax(&["name", "`*`", "`.`", "node()"])),
        };
        while self.peek() == Some(&Tok::LBracket) {
            self.i += 1;
            let pred = self.expr()?;
            if matches!(pred, Expr::Number(_) | Expr::Count(_)) {
                return Err(self.unsupported("positional predicate"));
            }
            self.expect(Tok::RBracket, "`]`")?;
            step.predicates.push(pred);
        }
        Ok(step)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Path(p) => write!(f, "{p}"),
            Expr::Count(p) => write!(f, "count({p})"),
            Expr::StringOf(None) => write!(f, "string()"),
            Expr::StringOf(Some(p)) => write!(f, "string({p})"),
            Expr::Literal(s) if s.contains('\'') => write!(f, "\"{s}\""),
            Expr::Literal(s) => write!(f, "'{s}'"),
            Expr::Number(n) => write!(f, "{}", format_number(*n)),
            Expr::Compare { negated, lhs, rhs } => {
                write!(f, "{lhs}{}{rhs}", if *negated { "!=" } else { "=" })
            }
        }
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut need_sep = false;
        if let PathStart::Variable(v) = &self.start {
            write!(f, "${v}")?;
            need_sep = true;
        } else if self.absolute {
            if self.steps.is_empty() {
                return write!(f, "/");
            }
            need_sep = true;
        }
        let mut steps = self.steps.iter().peekable();
        while let Some(step) = steps.next() {
            let abbreviated = step.axis == Axis::DescendantOrSelf
                && step.test == NodeTest::Node
                && step.predicates.is_empty()
                && steps.peek().is_some();
            if abbreviated {
                write!(f, "//")?;
                need_sep = false;
                continue;
            }
            if need_sep {
                write!(f, "/")?;
            }
            match (step.axis, &step.test) {
                (Axis::SelfAxis, NodeTest::Node) => write!(f, ".")?,
                (Axis::Child, NodeTest::Name(n)) => write!(f, "{n}")?,
                (Axis::Child, NodeTest::AnyElement) => write!(f, "*")?,
                (Axis::Child, NodeTest::Node) => write!(f, "node()")?,
                (axis, test) => write!(f, "{axis:?}::{test:?}")?,
            }
            for p in &step.predicates {
                write!(f, "[{p}]")?;
            }
            need_sep = true;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq)]
pub enum XPathValue {
    NodeSet(Vec<Node>),
    String(String),
    Number(f64),
    Boolean(bool),
}

pub type Bindings = HashMap<String, XPathValue>;

impl XPathValue {
    pub fn to_string_value(&self) -> String {
        match self {
            XPathValue::NodeSet(ns) => ns.first().map(Node::string_value).unwrap_or_default(),
            XPathValue::String(s) => s.clone(),
            XPathValue::Number(n) => format_number(*n),
            XPathValue::Boolean(b) => b.to_string(),
        }
    }

    pub fn to_number(&self) -> f64 {
        match self {
            XPathValue::Number(n) => *n,
            XPathValue::Boolean(b) => f64::from(u8::from(*b)),
            other => parse_number(&other.to_string_value()),
        }
    }

    pub fn to_boolean(&self) -> bool {
        match self {
            XPathValue::NodeSet(ns) => !ns.is_empty(),
            XPathValue::String(s) => !s.is_empty(),
            XPathValue::Number(n) => *n != 0.0 && !n.is_nan(),
            XPathValue::Boolean(b) => *b,
        }
    }

    pub fn into_node_set(self) -> Result<Vec<Node>, XPathError> {
        match self {
            XPathValue::NodeSet(ns) => Ok(ns),
            other => Err(XPathError::NotANodeSet(format!("{other:?}"))),
        }
    }
}

/// XPath number-to-string: integral values without a fraction.
pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        "NaN".to_string()
    } else if n.is_infinite() {
        if n > 0.0 { "Infinity" } else { "-Infinity" }.to_string()
    } else if n == 0.0 {
        "0".to_string()
    } else {
        format!("{n}")
    }
}

fn parse_number(s: &str) -> f64 {
    parse_decimal(s.trim()).unwrap_or(f64::NAN)
}

/// Evaluates `expr` with `context` as the context node.
pub fn eval_xpath(expr: &Expr, context: &Node, vars: &Bindings) -> Result<XPathValue, XPathError> {
    match expr {
        Expr::Path(p) => eval_path(p, context, vars),
        Expr::Count(p) => {
            let ns = eval_path(p, context, vars)?.into_node_set()?;
            Ok(XPathValue::Number(ns.len() as f64))
        }
        Expr::StringOf(None) => Ok(XPathValue::String(context.string_value())),
        Expr::StringOf(Some(p)) => Ok(XPathValue::String(
            eval_path(p, context, vars)?.to_string_value(),
        )),
        Expr::Literal(s) => Ok(XPathValue::String(s.clone())),
        Expr::Number(n) => Ok(XPathValue::Number(*n)),
        Expr::Compare { negated, lhs, rhs } => {
            let l = eval_xpath(lhs, context, vars)?;
            let r = eval_xpath(rhs, context, vars)?;
            Ok(XPathValue::Boolean(compare(&l, &r, *negated)))
        }
    }
}

/// Evaluates against the document node of `doc`.
pub fn eval_on_doc(expr: &Expr, doc: &XmlDoc, vars: &Bindings) -> Result<XPathValue, XPathError> {
    eval_xpath(expr, &Tree::from_doc(doc).root(), vars)
}

fn eval_path(p: &PathExpr, context: &Node, vars: &Bindings) -> Result<XPathValue, XPathError> {
    let mut current = match &p.start {
        PathStart::Variable(v) => {
            let value = vars
                .get(v)
                .ok_or_else(|| XPathError::UnboundVariable(v.clone()))?;
            if p.steps.is_empty() {
                return Ok(value.clone());
            }
            value.clone().into_node_set()?
        }
        PathStart::Context if p.absolute => vec![context.tree.root()],
        PathStart::Context => vec![context.clone()],
    };
    for step in &p.steps {
        let mut next = Vec::new();
        for n in &current {
            match step.axis {
                Axis::SelfAxis => {
                    if node_test(&step.test, n, step.axis) && predicates(step, n, vars)? {
                        next.push(n.clone());
                    }
                }
                Axis::Child => {
                    for c in n.children() {
                        if node_test(&step.test, &c, step.axis) && predicates(step, &c, vars)? {
                            next.push(c);
                        }
                    }
                }
                Axis::DescendantOrSelf => {
                    for c in n.descendants_or_self() {
                        if node_test(&step.test, &c, step.axis) && predicates(step, &c, vars)? {
                            next.push(c);
                        }
                    }
                }
            }
        }
        next.sort();
        next.dedup();
        current = next;
    }
    Ok(XPathValue::NodeSet(current))
}

fn node_test(test: &NodeTest, n: &Node, axis: Axis) -> bool {
    match test {
        NodeTest::Name(name) => n.name() == Some(name.as_str()),
        NodeTest::AnyElement => n.is_element(),
        NodeTest::Node => axis != Axis::Child || !n.is_document(),
    }
}

fn predicates(step: &Step, n: &Node, vars: &Bindings) -> Result<bool, XPathError> {
    for p in &step.predicates {
        if !eval_xpath(p, n, vars)?.to_boolean() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn compare(l: &XPathValue, r: &XPathValue, negated: bool) -> bool {
    use XPathValue as V;
    let op = |a: &str, b: &str| (a == b) != negated;
    let num_op = |a: f64, b: f64| (a == b) != negated;
    match (l, r) {
        (V::NodeSet(a), V::NodeSet(b)) => {
            let bs: Vec<String> = b.iter().map(Node::string_value).collect();
            a.iter()
                .any(|x| {
                    let xs = x.string_value();
                    bs.iter().any(|y| op(&xs, y))
                })
        }
        (V::NodeSet(ns), V::Boolean(b)) | (V::Boolean(b), V::NodeSet(ns)) => {
            (!ns.is_empty() == *b) != negated
        }
        (V::NodeSet(ns), V::Number(x)) | (V::Number(x), V::NodeSet(ns)) => ns
            .iter()
            .any(|n| num_op(parse_number(&n.string_value()), *x)),
        (V::NodeSet(ns), V::String(s)) | (V::String(s), V::NodeSet(ns)) => {
            ns.iter().any(|n| op(&n.string_value(), s))
        }
        (V::Boolean(_), _) | (_, V::Boolean(_)) => (l.to_boolean() == r.to_boolean()) != negated,
        (V::Number(_), _) | (_, V::Number(_)) => num_op(l.to_number(), r.to_number()),
        _ => op(&l.to_string_value(), &r.to_string_value()),
    }
}

/// Strict decimal literal: optional sign, digits, optional fraction.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    let ok = digits(int)
        && frac.is_none_or(digits)
        && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()));
    if ok {
        s.parse().ok()
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Match patterns

/// Parses a template match pattern: `/`, or an optionally rooted path of
/// child steps testing a name, `*` or `node()`.
pub fn parse_pattern(text: &str) -> Result<PathExpr, XPathError> {
    let unsupported = || XPathError::UnsupportedPattern(text.to_string());
    let Expr::Path(p) = parse_xpath(text).map_err(|_| unsupported())? else {
        return Err(unsupported());
    };
    check_pattern(&p).map_err(|_| unsupported())?;
    Ok(p)
}

fn check_pattern(p: &PathExpr) -> Result<(), XPathError> {
    let ok = p.start == PathStart::Context
        && (p.absolute || !p.steps.is_empty())
        && p
            .steps
            .iter()
            .all(|s| s.axis == Axis::Child && s.predicates.is_empty());
    if ok {
        Ok(())
    } else {
        Err(XPathError::UnsupportedPattern(p.to_string()))
    }
}

pub fn match_pattern(pattern: &PathExpr, node: &Node) -> Result<bool, XPathError> {
    check_pattern(pattern)?;
    let mut current = node.clone();
    for (i, step) in pattern.steps.iter().enumerate().rev() {
        if current.is_document() || !node_test(&step.test, &current, Axis::Child) {
            return Ok(false);
        }
        match current.parent() {
            Some(p) => current = p,
            None => return Ok(false),
        }
        if i == 0 && !pattern.absolute {
            return Ok(true);
        }
    }
    Ok(current.is_document())
}

/// Default priority: `*`/`node()` -0.5, a bare name 0, anything longer 0.5.
pub fn pattern_priority(pattern: &PathExpr) -> Result<f64, XPathError> {
    check_pattern(pattern)?;
    Ok(match (pattern.absolute, pattern.steps.as_slice()) {
        (false, [step]) => match step.test {
            NodeTest::Name(_) => 0.0,
            NodeTest::AnyElement | NodeTest::Node => -0.5,
        },
        _ => 0.5,
    })
}
