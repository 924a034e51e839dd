//! Template-matching transform processor for a subset of XSLT 1.0.
//!
//! Programs are declared as
//!
//! ```text
//! function NAME
//! param NAME TYPE ...
//! returns TYPE
//! begin
//!   <xsl:param .../> <xsl:template ...> ... </xsl:template> ...
//! end
//! ```
//!
//! Supported instructions: `template`, `apply-templates`, `with-param`,
//! `value-of`, `copy`, `copy-of`, `if`, `choose`/`when`/`otherwise`,
//! `param`, `variable`, plus literal result elements and text.

use std::collections::HashMap;

use thiserror::Error;

use crate::value::{ColumnType, Value};
use crate::xml::{line_col, push_normalized, Element, RawElement, RawNode, Reader, XmlDoc, XmlError, XmlNode};
use crate::xpath::{
    eval_xpath, match_pattern, parse_decimal, parse_pattern, parse_xpath, pattern_priority, Bindings,
    Expr, Node, PathExpr, Tree, XPathError, XPathValue,
};

pub const DEFAULT_DEPTH_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("function syntax error at {line}:{column}: {message}")]
    FunctionSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown instruction <{name}> at {line}:{column}")]
    UnknownInstruction {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("parameter mismatch in function {function}: {message}")]
    ParamMismatch { function: String, message: String },
    #[error("in function body: {0}")]
    Xml(#[from] XmlError),
    #[error("{0}")]
    XPath(#[from] XPathError),
    #[error("template instantiation exceeded depth {0} (runaway recursion?)")]
    RecursionLimit(usize),
    #[error("function {function} expects {expected} argument(s) after the input document, got {found}")]
    ArityMismatch {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("function {function}: parameter {param} expects {expected}, got {found}")]
    ArgTypeMismatch {
        function: String,
        param: String,
        expected: ColumnType,
        found: String,
    },
    #[error("transform result `{0}` is not a number")]
    NotANumber(String),
}

// ---------------------------------------------------------------------------
// Program model

#[derive(Debug, Clone, PartialEq)]
pub struct TransformProgram {
    pub name: String,
    pub params: Vec<(String, ColumnType)>,
    pub return_type: ColumnType,
    pub rules: Vec<TemplateRule>,
    pub top_level_params: Vec<ParamDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRule {
    pub pattern: PathExpr,
    pub mode: Option<String>,
    pub priority: f64,
    pub params: Vec<ParamDecl>,
    pub body: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub default: Binding,
}

/// How a parameter, variable or with-param obtains its value.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Select(Expr),
    Body(Vec<Instruction>),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    ApplyTemplates {
        select: Option<Expr>,
        mode: Option<String>,
        with_params: Vec<(String, Binding)>,
    },
    ValueOf(Expr),
    Copy(Vec<Instruction>),
    CopyOf(Expr),
    If {
        test: Expr,
        body: Vec<Instruction>,
    },
    Choose {
        whens: Vec<(Expr, Vec<Instruction>)>,
        otherwise: Option<Vec<Instruction>>,
    },
    Variable {
        name: String,
        binding: Binding,
    },
    LiteralElement {
        name: String,
        body: Vec<Instruction>,
    },
    Text(String),
}

// ---------------------------------------------------------------------------
// Declaration front end

/// Compiles one complete function declaration.
pub fn compile_transform(text: &str) -> Result<TransformProgram, TransformError> {
    let (program, end) = parse_function(text, 0)?;
    let mut cur = Cursor { text, pos: end };
    cur.skip_trivia();
    if cur.pos < text.len() {
        return Err(cur.error("unexpected text after `end`"));
    }
    Ok(program)
}

/// Parses the declaration starting at byte `pos`; returns the program and the
/// offset just past its `end` keyword.
pub(crate) fn parse_function(text: &str, pos: usize) -> Result<(TransformProgram, usize), TransformError> {
    let mut cur = Cursor { text, pos };
    cur.keyword("function")?;
    let name = cur.identifier("function name")?;
    let mut params = Vec::new();
    while cur.peek_keyword("param") {
        cur.keyword("param")?;
        let pname = cur.identifier("parameter name")?;
        let ty = cur.type_name()?;
        if params.iter().any(|(p, _)| *p == pname) {
            return Err(cur.error(format!("duplicate parameter `{pname}`")));
        }
        params.push((pname, ty));
    }
    cur.keyword("returns")?;
    let return_type = cur.type_name()?;
    cur.keyword("begin")?;
    let mut top = Vec::new();
    loop {
        cur.skip_trivia();
        if !cur.rest().starts_with('<') {
            break;
        }
        let mut reader = Reader::with_offset(text, cur.pos, true);
        top.push(reader.element()?);
        cur.pos = reader.pos();
    }
    cur.keyword("end")?;

    let mut program = TransformProgram {
        name,
        params,
        return_type,
        rules: Vec::new(),
        top_level_params: Vec::new(),
    };
    for raw in top {
        match raw.name.as_str() {
            "xsl:template" => {
                let rule = compile_rule(raw)?;
                program.rules.push(rule);
            }
            "xsl:param" => {
                let decl = compile_param(raw)?;
                if program.top_level_params.iter().any(|p| p.name == decl.name) {
                    return Err(param_mismatch(&program.name, format!("duplicate param `{}`", decl.name)));
                }
                program.top_level_params.push(decl);
            }
            _ => return Err(misplaced(&raw, "expected <xsl:template> or <xsl:param> at top level")),
        }
    }
    check_params(&program)?;
    Ok((program, cur.pos))
}

fn param_mismatch(function: &str, message: String) -> TransformError {
    TransformError::ParamMismatch {
        function: function.to_string(),
        message,
    }
}

fn check_params(p: &TransformProgram) -> Result<(), TransformError> {
    for (name, _) in &p.params {
        if !p.top_level_params.iter().any(|d| d.name == *name) {
            return Err(param_mismatch(
                &p.name,
                format!("header parameter `{name}` has no <xsl:param name=\"{name}\"/> in the body"),
            ));
        }
    }
    for d in &p.top_level_params {
        if !p.params.iter().any(|(n, _)| *n == d.name) && d.default == Binding::Empty {
            return Err(param_mismatch(
                &p.name,
                format!("body parameter `{}` is not declared in the header and has no default", d.name),
            ));
        }
    }
    Ok(())
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn error(&self, message: impl Into<String>) -> TransformError {
        let (line, column) = line_col(self.text, self.pos);
        TransformError::FunctionSyntax {
            line,
            column,
            message: message.into(),
        }
    }

    /// Skips whitespace and `--` line comments.
    fn skip_trivia(&mut self) {
        loop {
            let trimmed = self.rest().trim_start();
            self.pos = self.text.len() - trimmed.len();
            if trimmed.starts_with("--") {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                return;
            }
        }
    }

    fn word(&mut self) -> Option<&'a str> {
        self.skip_trivia();
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        (len > 0).then(|| &self.text[self.pos..self.pos + len])
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        self.word().is_some_and(|w| w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), TransformError> {
        let len = match self.word() {
            Some(w) if w.eq_ignore_ascii_case(kw) => w.len(),
            _ => return Err(self.error(format!("expected `{kw}`"))),
        };
        self.pos += len;
        Ok(())
    }

    fn identifier(&mut self, what: &str) -> Result<String, TransformError> {
        let w = match self.word() {
            Some(w) if w.starts_with(|c: char| c.is_alphabetic() || c == '_') => w.to_string(),
            _ => return Err(self.error(format!("expected {what}"))),
        };
        self.pos += w.len();
        Ok(w)
    }

    fn type_name(&mut self) -> Result<ColumnType, TransformError> {
        let w = self.identifier("a type (string, number or xml)")?;
        w.parse().map_err(|m: String| {
            self.pos -= w.len();
            self.error(m)
        })
    }
}

fn syntax(raw: &RawElement, message: impl Into<String>) -> TransformError {
    TransformError::FunctionSyntax {
        line: raw.line,
        column: raw.column,
        message: message.into(),
    }
}

fn misplaced(raw: &RawElement, message: &str) -> TransformError {
    if raw.name.starts_with("xsl:") && !KNOWN.contains(&&raw.name[4..]) {
        unknown(raw)
    } else {
        syntax(raw, format!("<{}>: {message}", raw.name))
    }
}

fn unknown(raw: &RawElement) -> TransformError {
    TransformError::UnknownInstruction {
        name: raw.name.clone(),
        line: raw.line,
        column: raw.column,
    }
}

const KNOWN: &[&str] = &[
    "template",
    "apply-templates",
    "with-param",
    "value-of",
    "copy",
    "copy-of",
    "if",
    "choose",
    "when",
    "otherwise",
    "param",
    "variable",
];

/// Returns attribute values in the order of `names`, checking that required
/// ones are present and nothing else is.
fn attrs<'r>(raw: &'r RawElement, required: &[&str], optional: &[&str]) -> Result<Vec<Option<&'r str>>, TransformError> {
    for (a, _) in &raw.attrs {
        if !required.contains(&a.as_str()) && !optional.contains(&a.as_str()) {
            return Err(syntax(raw, format!("unexpected attribute `{a}` on <{}>", raw.name)));
        }
    }
    let get = |n: &str| raw.attrs.iter().find(|(a, _)| a == n).map(|(_, v)| v.as_str());
    let mut out = Vec::new();
    for r in required {
        match get(r) {
            Some(v) => out.push(Some(v)),
            None => return Err(syntax(raw, format!("<{}> requires attribute `{r}`", raw.name))),
        }
    }
    for o in optional {
        out.push(get(o));
    }
    Ok(out)
}

fn xpath_attr(raw: &RawElement, text: &str) -> Result<Expr, TransformError> {
    parse_xpath(text).map_err(|e| syntax(raw, format!("in <{}>: {e}", raw.name)))
}

fn no_children(raw: &RawElement) -> Result<(), TransformError> {
    if raw.children.is_empty() {
        Ok(())
    } else {
        Err(syntax(raw, format!("<{}> must be empty", raw.name)))
    }
}

fn compile_rule(raw: RawElement) -> Result<TemplateRule, TransformError> {
    let a = attrs(&raw, &["match"], &["mode", "priority"])?;
    let pattern = parse_pattern(a[0].unwrap_or_default())
        .map_err(|e| syntax(&raw, e.to_string()))?;
    let mode = a[1].map(str::to_string);
    let priority = match a[2] {
        Some(p) => parse_decimal(p.trim()).ok_or_else(|| syntax(&raw, format!("bad priority `{p}`")))?,
        None => pattern_priority(&pattern)?,
    };
    let (params, body) = compile_body(raw.children, true)?;
    Ok(TemplateRule {
        pattern,
        mode,
        priority,
        params,
        body,
    })
}

fn compile_param(raw: RawElement) -> Result<ParamDecl, TransformError> {
    let (name, default) = compile_binding(raw)?;
    Ok(ParamDecl { name, default })
}

fn compile_binding(raw: RawElement) -> Result<(String, Binding), TransformError> {
    let a = attrs(&raw, &["name"], &["select"])?;
    let name = a[0].unwrap_or_default().to_string();
    let binding = match a[1] {
        Some(sel) => {
            let e = xpath_attr(&raw, sel)?;
            no_children(&raw)?;
            Binding::Select(e)
        }
        None if raw.children.is_empty() => Binding::Empty,
        None => Binding::Body(compile_body(raw.children, false)?.1),
    };
    Ok((name, binding))
}

fn compile_body(children: Vec<RawNode>, allow_params: bool) -> Result<(Vec<ParamDecl>, Vec<Instruction>), TransformError> {
    let mut params = Vec::new();
    let mut body = Vec::new();
    for child in children {
        let raw = match child {
            RawNode::Text(t) => {
                body.push(Instruction::Text(t));
                continue;
            }
            RawNode::Element(raw) => raw,
        };
        if raw.name == "xsl:param" {
            if !allow_params || !body.is_empty() {
                return Err(syntax(&raw, "<xsl:param> must come first in a template"));
            }
            let decl = compile_param(raw)?;
            params.push(decl);
            continue;
        }
        body.push(compile_instruction(raw)?);
    }
    Ok((params, body))
}

fn compile_instruction(raw: RawElement) -> Result<Instruction, TransformError> {
    let Some(local) = raw.name.strip_prefix("xsl:") else {
        if raw.name.contains(':') {
            return Err(syntax(&raw, format!("namespaced element <{}> is not supported", raw.name)));
        }
        if let Some((a, _)) = raw.attrs.first() {
            return Err(syntax(&raw, format!("attribute `{a}` on literal element <{}>", raw.name)));
        }
        let name = raw.name;
        return Ok(Instruction::LiteralElement {
            name,
            body: compile_body(raw.children, false)?.1,
        });
    };
    let ins = match local {
        "apply-templates" => {
            let a = attrs(&raw, &[], &["select", "mode"])?;
            let select = a[0].map(|s| xpath_attr(&raw, s)).transpose()?;
            let mode = a[1].map(str::to_string);
            let mut with_params = Vec::new();
            for c in raw.children {
                match c {
                    RawNode::Element(w) if w.name == "xsl:with-param" => with_params.push(compile_binding(w)?),
                    RawNode::Element(w) => return Err(misplaced(&w, "only <xsl:with-param> may appear here")),
                    RawNode::Text(_) => {
                        return Err(syntax_at(raw.line, raw.column, "text inside <xsl:apply-templates>"))
                    }
                }
            }
            Instruction::ApplyTemplates {
                select,
                mode,
                with_params,
            }
        }
        "value-of" => {
            let a = attrs(&raw, &["select"], &[])?;
            no_children(&raw)?;
            Instruction::ValueOf(xpath_attr(&raw, a[0].unwrap_or_default())?)
        }
        "copy-of" => {
            let a = attrs(&raw, &["select"], &[])?;
            no_children(&raw)?;
            Instruction::CopyOf(xpath_attr(&raw, a[0].unwrap_or_default())?)
        }
        "copy" => {
            attrs(&raw, &[], &[])?;
            Instruction::Copy(compile_body(raw.children, false)?.1)
        }
        "if" => {
            let a = attrs(&raw, &["test"], &[])?;
            let test = xpath_attr(&raw, a[0].unwrap_or_default())?;
            Instruction::If {
                test,
                body: compile_body(raw.children, false)?.1,
            }
        }
        "choose" => {
            attrs(&raw, &[], &[])?;
            let (line, column) = (raw.line, raw.column);
            let mut whens = Vec::new();
            let mut otherwise = None;
            for c in raw.children {
                let RawNode::Element(w) = c else {
                    return Err(syntax_at(line, column, "text inside <xsl:choose>"));
                };
                match w.name.as_str() {
                    "xsl:when" if otherwise.is_none() => {
                        let a = attrs(&w, &["test"], &[])?;
                        let test = xpath_attr(&w, a[0].unwrap_or_default())?;
                        whens.push((test, compile_body(w.children, false)?.1));
                    }
                    "xsl:otherwise" if otherwise.is_none() => {
                        attrs(&w, &[], &[])?;
                        otherwise = Some(compile_body(w.children, false)?.1);
                    }
                    _ => return Err(misplaced(&w, "expected <xsl:when> or a final <xsl:otherwise>")),
                }
            }
            if whens.is_empty() {
                return Err(syntax_at(line, column, "<xsl:choose> needs at least one <xsl:when>"));
            }
            Instruction::Choose { whens, otherwise }
        }
        "variable" => {
            let (name, binding) = compile_binding(raw)?;
            Instruction::Variable { name, binding }
        }
        _ if KNOWN.contains(&local) => return Err(syntax(&raw, format!("<{}> is not allowed here", raw.name))),
        _ => return Err(unknown(&raw)),
    };
    Ok(ins)
}

fn syntax_at(line: usize, column: usize, message: &str) -> TransformError {
    TransformError::FunctionSyntax {
        line,
        column,
        message: message.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Execution

/// Runs `program` on `input`; `args` bind the header parameters in order.
pub fn run_transform(program: &TransformProgram, input: &XmlDoc, args: &[Value]) -> Result<Vec<XmlNode>, TransformError> {
    run_transform_with_limit(program, input, args, DEFAULT_DEPTH_LIMIT)
}

pub fn run_transform_with_limit(
    program: &TransformProgram,
    input: &XmlDoc,
    args: &[Value],
    depth_limit: usize,
) -> Result<Vec<XmlNode>, TransformError> {
    check_args(program, args)?;
    let root = Tree::from_doc(input).root();
    let mut run = Run {
        program,
        globals: Bindings::new(),
        depth: 0,
        limit: depth_limit,
    };
    let mut globals = Bindings::new();
    for decl in &program.top_level_params {
        let value = match program.params.iter().position(|(n, _)| *n == decl.name) {
            Some(i) => arg_value(&args[i]),
            None => run.binding(&decl.default, &root, &globals)?,
        };
        globals.insert(decl.name.clone(), value);
    }
    run.globals = globals;
    let mut out = Vec::new();
    run.apply(&root, None, &HashMap::new(), &mut out)?;
    Ok(out)
}

pub(crate) fn check_args(program: &TransformProgram, args: &[Value]) -> Result<(), TransformError> {
    if args.len() != program.params.len() {
        return Err(TransformError::ArityMismatch {
            function: program.name.clone(),
            expected: program.params.len(),
            found: args.len(),
        });
    }
    for ((name, ty), arg) in program.params.iter().zip(args) {
        if arg.column_type() != Some(*ty) {
            return Err(TransformError::ArgTypeMismatch {
                function: program.name.clone(),
                param: name.clone(),
                expected: *ty,
                found: arg.column_type().map_or("null".to_string(), |t| t.to_string()),
            });
        }
    }
    Ok(())
}

fn arg_value(v: &Value) -> XPathValue {
    match v {
        Value::Xml(d) => XPathValue::NodeSet(vec![Tree::from_doc(d).root()]),
        Value::Number(n) => XPathValue::Number(*n),
        Value::String(s) => XPathValue::String(s.clone()),
        Value::Null => XPathValue::String(String::new()),
    }
}

struct Run<'p> {
    program: &'p TransformProgram,
    globals: Bindings,
    depth: usize,
    limit: usize,
}

impl Run<'_> {
    fn apply(
        &mut self,
        node: &Node,
        mode: Option<&str>,
        with_params: &HashMap<String, XPathValue>,
        out: &mut Vec<XmlNode>,
    ) -> Result<(), TransformError> {
        if self.depth >= self.limit {
            return Err(TransformError::RecursionLimit(self.limit));
        }
        self.depth += 1;
        let result = stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || self.apply_inner(node, mode, with_params, out));
        self.depth -= 1;
        result
    }

    fn apply_inner(
        &mut self,
        node: &Node,
        mode: Option<&str>,
        with_params: &HashMap<String, XPathValue>,
        out: &mut Vec<XmlNode>,
    ) -> Result<(), TransformError> {
        let program = self.program;
        let mut best: Option<&TemplateRule> = None;
        for rule in &program.rules {
            if rule.mode.as_deref() != mode || !match_pattern(&rule.pattern, node)? {
                continue;
            }
            // Later declarations win ties.
            if best.is_none_or(|b| rule.priority >= b.priority) {
                best = Some(rule);
            }
        }
        let Some(rule) = best else {
            if let Some(t) = node.text() {
                push_normalized(out, XmlNode::Text(t.to_string()));
                return Ok(());
            }
            for child in node.children() {
                self.apply(&child, mode, &HashMap::new(), out)?;
            }
            return Ok(());
        };
        let mut vars = self.globals.clone();
        for p in &rule.params {
            let v = match with_params.get(&p.name) {
                Some(v) => v.clone(),
                None => self.binding(&p.default, node, &vars)?,
            };
            vars.insert(p.name.clone(), v);
        }
        self.instantiate(&rule.body, node, &vars, out)
    }

    fn binding(&mut self, b: &Binding, node: &Node, vars: &Bindings) -> Result<XPathValue, TransformError> {
        Ok(match b {
            Binding::Select(e) => eval_xpath(e, node, vars)?,
            Binding::Empty => XPathValue::String(String::new()),
            Binding::Body(body) => {
                let mut frag = Vec::new();
                self.instantiate(body, node, vars, &mut frag)?;
                XPathValue::NodeSet(vec![Tree::from_fragment(&frag).root()])
            }
        })
    }

    fn instantiate(
        &mut self,
        body: &[Instruction],
        node: &Node,
        vars: &Bindings,
        out: &mut Vec<XmlNode>,
    ) -> Result<(), TransformError> {
        let mut scope: Option<Bindings> = None;
        for ins in body {
            let vars = scope.as_ref().unwrap_or(vars);
            match ins {
                Instruction::Text(t) => push_normalized(out, XmlNode::Text(t.clone())),
                Instruction::LiteralElement { name, body } => {
                    let mut e = Element::new(name.clone());
                    self.instantiate(body, node, vars, &mut e.children)?;
                    out.push(XmlNode::Element(e));
                }
                Instruction::ValueOf(e) => {
                    let s = eval_xpath(e, node, vars)?.to_string_value();
                    if !s.is_empty() {
                        push_normalized(out, XmlNode::Text(s));
                    }
                }
                Instruction::CopyOf(e) => match eval_xpath(e, node, vars)? {
                    XPathValue::NodeSet(ns) => {
                        for n in ns {
                            for x in n.to_xml() {
                                push_normalized(out, x);
                            }
                        }
                    }
                    other => {
                        let s = other.to_string_value();
                        if !s.is_empty() {
                            push_normalized(out, XmlNode::Text(s));
                        }
                    }
                },
                Instruction::Copy(body) => {
                    if let Some(t) = node.text() {
                        push_normalized(out, XmlNode::Text(t.to_string()));
                    } else if let Some(name) = node.name() {
                        let mut e = Element::new(name);
                        self.instantiate(body, node, vars, &mut e.children)?;
                        out.push(XmlNode::Element(e));
                    } else {
                        self.instantiate(body, node, vars, out)?;
                    }
                }
                Instruction::If { test, body } => {
                    if eval_xpath(test, node, vars)?.to_boolean() {
                        self.instantiate(body, node, vars, out)?;
                    }
                }
                Instruction::Choose { whens, otherwise } => {
                    let mut chosen = otherwise.as_deref();
                    for (test, body) in whens {
                        if eval_xpath(test, node, vars)?.to_boolean() {
                            chosen = Some(body);
                            break;
                        }
                    }
                    if let Some(body) = chosen {
                        self.instantiate(body, node, vars, out)?;
                    }
                }
                Instruction::Variable { name, binding } => {
                    let v = self.binding(binding, node, vars)?;
                    let mut next = vars.clone();
                    next.insert(name.clone(), v);
                    scope = Some(next);
                }
                Instruction::ApplyTemplates {
                    select,
                    mode,
                    with_params,
                } => {
                    let mut params = HashMap::new();
                    for (name, b) in with_params {
                        let v = self.binding(b, node, vars)?;
                        params.insert(name.clone(), v);
                    }
                    let targets: Vec<Node> = match select {
                        Some(e) => eval_xpath(e, node, vars)?.into_node_set()?,
                        None => node.children().collect(),
                    };
                    for t in &targets {
                        self.apply(t, mode.as_deref(), &params, out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Converts a result fragment to a value of the declared return type.
pub fn result_to_value(fragment: &[XmlNode], declared: ColumnType) -> Result<Value, TransformError> {
    let text = || fragment.iter().map(XmlNode::string_value).collect::<String>();
    match declared {
        ColumnType::String if fragment.is_empty() => Ok(Value::Null),
        ColumnType::String => Ok(Value::String(text().trim().to_string())),
        ColumnType::Number if fragment.is_empty() => Ok(Value::Null),
        ColumnType::Number => {
            let t = text();
            parse_decimal(t.trim())
                .map(Value::Number)
                .ok_or_else(|| TransformError::NotANumber(t.trim().to_string()))
        }
        ColumnType::Xml => Ok(Value::xml(match fragment {
            [XmlNode::Element(e)] => XmlDoc::new(e.clone()),
            nodes => {
                let mut root = Element::new("result");
                for n in nodes {
                    push_normalized(&mut root.children, n.clone());
                }
                XmlDoc::new(root)
            }
        })),
    }
}
