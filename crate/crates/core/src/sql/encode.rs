//! Conversion between query trees and their XML documents.

use super::ast::*;
use super::dtd::{normalized_name, validate_tree};
use super::SqlError;
use crate::xml::{Element, XmlDoc, XmlNode};

/// Encodes a query as a syntax-tree document. Extension nodes are written
/// with elements outside the DTD, so such documents never validate.
pub fn to_xml(q: &Query) -> XmlDoc {
    XmlDoc::new(query(q))
}

fn el(name: &str) -> Element {
    Element::new(name)
}

fn text(name: &str, t: &str) -> Element {
    if t.is_empty() {
        Element::new(name)
    } else {
        Element::with_text(name, t)
    }
}

fn query(q: &Query) -> Element {
    let mut e = el("query");
    match q {
        Query::Select(s) => {
            let mut sel = el("select");
            match s.select.quantifier {
                Some(Quantifier::All) => sel.push(el("all")),
                Some(Quantifier::Distinct) => sel.push(el("distinct")),
                None => {}
            }
            match &s.select.items {
                SelectList::Wildcard => sel.push(el("wildcard")),
                SelectList::Items(items) => {
                    for it in items {
                        sel.push(sel_item(it));
                    }
                }
            }
            e.push(sel);
            let mut from = el("from");
            for t in &s.from {
                from.push(table_ref(t));
            }
            e.push(from);
            if let Some(w) = &s.where_clause {
                e.push(el("where").child(cond(w)));
            }
            if !s.group_by.is_empty() {
                let mut g = el("group-by");
                for c in &s.group_by {
                    g.push(column_ref(c));
                }
                e.push(g);
            }
            if let Some(h) = &s.having {
                e.push(el("having").child(cond(h)));
            }
        }
        Query::SetOp {
            kind,
            all,
            left,
            right,
        } => {
            let name = match kind {
                SetOpKind::Union => "union",
                SetOpKind::Except => "except",
                SetOpKind::Intersect => "intersect",
            };
            let mut op = el(name).child(query(left));
            if *all {
                op.push(el("all"));
            }
            op.push(query(right));
            e.push(op);
        }
    }
    e
}

fn sel_item(it: &SelItem) -> Element {
    let mut e = el("sel-item");
    match &it.value {
        SelValue::Column(c) => e.push(text("column", c)),
        SelValue::Qualified { rangevar, column } => {
            e.push(text("rangevar", rangevar));
            e.push(text("column", column));
        }
        SelValue::QualifiedWildcard(rv) => {
            e.push(text("rangevar", rv));
            e.push(el("wildcard"));
        }
        SelValue::Scalar(s) => e.push(scalar(s)),
        SelValue::Aggregate(a) => e.push(aggregate(a)),
    }
    if let Some(a) = &it.alias {
        e.push(text("alias", a));
    }
    e
}

fn column_ref(c: &ColumnRef) -> Element {
    let mut e = el("column-ref");
    if let Some(rv) = &c.rangevar {
        e.push(text("rangevar", rv));
    }
    e.push(text("column", &c.column));
    e
}

fn scalar(s: &Scalar) -> Element {
    el("scalar").child(scalar_body(s))
}

/// The element inside `<scalar>`; also the operand form used in aggregates.
fn scalar_body(s: &Scalar) -> Element {
    match s {
        Scalar::Arith { op, lhs, rhs } => {
            let op = match op {
                ArithOp::Add => "add",
                ArithOp::Sub => "sub",
                ArithOp::Mul => "mul",
                ArithOp::Div => "div",
            };
            el("alg-exp").child(scalar(lhs)).child(el(op)).child(scalar(rhs))
        }
        Scalar::Concat(l, r) => el("concat-exp").child(scalar(l)).child(scalar(r)),
        Scalar::Column(c) => column_ref(c),
        Scalar::Aggregate(a) => aggregate(a),
        Scalar::Constant(c) => text("constant", &c.0),
        Scalar::Query(q) => query(q),
        Scalar::Call { name, args } => {
            let mut e = el("call").child(text("name", name));
            for a in args {
                e.push(scalar(a));
            }
            e
        }
    }
}

fn aggregate(a: &Aggregate) -> Element {
    let mut e = el("aggregate");
    match a {
        Aggregate::CountAll => e.push(el("count-all")),
        Aggregate::Func {
            func,
            quantifier,
            operand,
        } => {
            e.push(el(func.name()));
            match quantifier {
                Some(Quantifier::All) => e.push(el("all")),
                Some(Quantifier::Distinct) => e.push(el("distinct")),
                None => {}
            }
            e.push(scalar_body(operand));
        }
    }
    e
}

fn table_ref(t: &TableRef) -> Element {
    let mut e = el("table-ref");
    match &t.source {
        TableSource::Table(name) => e.push(text("table", name)),
        TableSource::Query(q) => e.push(query(q)),
        TableSource::XmlBinding { source, path } => {
            e.push(el("xml-binding").child(scalar(source)).child(text("path", path)))
        }
        TableSource::UevalIn { arg } => e.push(el("ueval-in").child(scalar(arg))),
        TableSource::Eval { arg, scheme } => {
            let mut ev = el("eval").child(scalar(arg));
            for c in scheme.iter().flatten() {
                ev.push(text("column", c));
            }
            e.push(ev)
        }
        TableSource::Extract { source, path } => {
            e.push(el("extract").child(scalar(source)).child(text("path", path)))
        }
        TableSource::Ueval { arg } => e.push(el("ueval").child(scalar(arg))),
    }
    if let Some(a) = &t.alias {
        e.push(text("alias", a));
    }
    e
}

fn cond(c: &CondExpr) -> Element {
    let mut e = el("cond-exp");
    if c.negated {
        e.push(el("not"));
    }
    match &c.body {
        CondBody::Test(t) => e.push(el("cond-test").child(test(t))),
        CondBody::And(parts) | CondBody::Or(parts) => {
            let mut g = el(if matches!(c.body, CondBody::And(_)) { "and" } else { "or" });
            for p in parts {
                g.push(cond(p));
            }
            e.push(g);
        }
    }
    e
}

fn comp(op: CompOp) -> Element {
    el(match op {
        CompOp::Eq => "eq",
        CompOp::Lt => "lt",
        CompOp::Let => "let",
        CompOp::Gt => "gt",
        CompOp::Get => "get",
        CompOp::Neq => "neq",
    })
}

fn operand(o: &Operand) -> Element {
    match o {
        Operand::Column(c) => column_ref(c),
        Operand::Scalar(s) => scalar(s),
    }
}

fn row(r: &[Operand]) -> Element {
    let mut e = el("rowconstr");
    for o in r {
        e.push(operand(o));
    }
    e
}

fn test(t: &CondTest) -> Element {
    match t {
        CondTest::Comparison { lhs, op, rhs } => el("comparison").child(row(lhs)).child(comp(*op)).child(row(rhs)),
        CondTest::Like {
            value,
            pattern,
            escape,
        } => {
            let mut e = el("like").child(operand(value)).child(operand(pattern));
            if let Some(x) = escape {
                e.push(operand(x));
            }
            e
        }
        CondTest::In(InTest::Subquery { row: r, query: q }) => el("in").child(row(r)).child(query(q)),
        CondTest::In(InTest::List { value, list }) => {
            let mut e = el("in").child(scalar(value));
            for s in list {
                e.push(scalar(s));
            }
            e
        }
        CondTest::Match {
            row: r,
            unique,
            kind,
            query: q,
        } => {
            let mut e = el("match").child(row(r));
            if *unique {
                e.push(el("unique"));
            }
            match kind {
                Some(MatchKind::Partial) => e.push(el("partial")),
                Some(MatchKind::Full) => e.push(el("full")),
                None => {}
            }
            e.push(query(q));
            e
        }
        CondTest::AllOrAny {
            row: r,
            op,
            quantifier,
            query: q,
        } => {
            let mut e = el("all-or-any").child(row(r)).child(comp(*op));
            match quantifier {
                Some(AllAny::All) => e.push(el("all")),
                Some(AllAny::Any) => e.push(el("any")),
                None => {}
            }
            e.push(query(q));
            e
        }
        CondTest::Exists(q) => el("exists").child(query(q)),
        CondTest::Unique(q) => el("unique").child(query(q)),
        CondTest::Overlaps(s) => {
            let mut e = el("overlaps");
            for x in s.iter() {
                e.push(scalar(x));
            }
            e
        }
        CondTest::IsNull(r) => el("test-for-null").child(row(r)),
    }
}

// ---------------------------------------------------------------------------
// Decoding

/// Decodes a syntax-tree document. The document is validated first; the
/// first violation is reported as `InvalidSyntaxTree`.
pub fn from_xml(doc: &XmlDoc) -> Result<Query, SqlError> {
    let v = validate_tree(doc);
    if let Some(d) = v.diagnostics.into_iter().next() {
        return Err(SqlError::InvalidSyntaxTree {
            path: d.path,
            reason: d.message,
        });
    }
    Decoder.query(doc.root())
}

struct Decoder;

/// Cursor over the element children of a validated element.
struct Kids<'a> {
    items: Vec<&'a Element>,
    i: usize,
    parent: &'a Element,
}

impl<'a> Kids<'a> {
    fn of(e: &'a Element) -> Self {
        Kids {
            items: e.elements().collect(),
            i: 0,
            parent: e,
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.i).map(|e| normalized_name(&e.name))
    }

    fn is(&self, name: &str) -> bool {
        self.peek() == Some(name)
    }

    fn eat(&mut self, name: &str) -> Option<&'a Element> {
        if self.is(name) {
            self.i += 1;
            Some(self.items[self.i - 1])
        } else {
            None
        }
    }

    fn next(&mut self) -> Result<&'a Element, SqlError> {
        let e = self.items.get(self.i).copied().ok_or_else(|| invalid(self.parent, "missing child"))?;
        self.i += 1;
        Ok(e)
    }

    fn rest(&mut self) -> Vec<&'a Element> {
        let r = self.items[self.i..].to_vec();
        self.i = self.items.len();
        r
    }
}

fn invalid(e: &Element, reason: &str) -> SqlError {
    SqlError::InvalidSyntaxTree {
        path: e.name.clone(),
        reason: reason.to_string(),
    }
}

fn pcdata(e: &Element) -> String {
    e.children.iter().map(XmlNode::string_value).collect()
}

impl Decoder {
    fn query(&self, e: &Element) -> Result<Query, SqlError> {
        let mut k = Kids::of(e);
        let first = k.next()?;
        match normalized_name(&first.name) {
            "select" => {
                let select = self.select(first)?;
                let from_el = k.next()?;
                let from = from_el
                    .elements()
                    .map(|t| self.table_ref(t))
                    .collect::<Result<Vec<_>, _>>()?;
                let where_clause = match k.eat("where") {
                    Some(w) => Some(self.cond(Kids::of(w).next()?)?),
                    None => None,
                };
                let group_by = match k.eat("group-by") {
                    Some(g) => g.elements().map(|c| self.column_ref(c)).collect::<Result<_, _>>()?,
                    None => Vec::new(),
                };
                let having = match k.eat("having") {
                    Some(h) => Some(self.cond(Kids::of(h).next()?)?),
                    None => None,
                };
                Ok(Query::Select(Box::new(SelectQuery {
                    select,
                    from,
                    where_clause,
                    group_by,
                    having,
                })))
            }
            name @ ("union" | "except" | "intersect") => {
                let kind = match name {
                    "union" => SetOpKind::Union,
                    "except" => SetOpKind::Except,
                    _ => SetOpKind::Intersect,
                };
                let mut ops = Kids::of(first);
                let left = self.query(ops.next()?)?;
                let all = ops.eat("all").is_some();
                let right = self.query(ops.next()?)?;
                Ok(Query::SetOp {
                    kind,
                    all,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
            _ => Err(invalid(first, "unexpected element in <query>")),
        }
    }

    fn quantifier(&self, k: &mut Kids<'_>) -> Option<Quantifier> {
        if k.eat("all").is_some() {
            Some(Quantifier::All)
        } else if k.eat("distinct").is_some() {
            Some(Quantifier::Distinct)
        } else {
            None
        }
    }

    fn select(&self, e: &Element) -> Result<SelectClause, SqlError> {
        let mut k = Kids::of(e);
        let quantifier = self.quantifier(&mut k);
        let items = if k.eat("wildcard").is_some() {
            SelectList::Wildcard
        } else {
            SelectList::Items(k.rest().into_iter().map(|i| self.sel_item(i)).collect::<Result<_, _>>()?)
        };
        Ok(SelectClause { quantifier, items })
    }

    fn sel_item(&self, e: &Element) -> Result<SelItem, SqlError> {
        let mut k = Kids::of(e);
        let first = k.next()?;
        let value = match first.name.as_str() {
            "column" => SelValue::Column(pcdata(first)),
            "rangevar" => {
                let rv = pcdata(first);
                let second = k.next()?;
                if second.name == "wildcard" {
                    SelValue::QualifiedWildcard(rv)
                } else {
                    SelValue::Qualified {
                        rangevar: rv,
                        column: pcdata(second),
                    }
                }
            }
            "scalar" => SelValue::Scalar(self.scalar(first)?),
            "aggregate" => SelValue::Aggregate(self.aggregate(first)?),
            _ => return Err(invalid(first, "unexpected element in <sel-item>")),
        };
        let alias = k.eat("alias").map(pcdata);
        Ok(SelItem { value, alias })
    }

    fn column_ref(&self, e: &Element) -> Result<ColumnRef, SqlError> {
        let mut k = Kids::of(e);
        let rangevar = k.eat("rangevar").map(pcdata);
        let column = pcdata(k.next()?);
        Ok(ColumnRef { rangevar, column })
    }

    fn scalar(&self, e: &Element) -> Result<Scalar, SqlError> {
        self.scalar_body(Kids::of(e).next()?)
    }

    fn scalar_body(&self, e: &Element) -> Result<Scalar, SqlError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
            Ok(match e.name.as_str() {
                "alg-exp" => {
                    let mut k = Kids::of(e);
                    let lhs = self.scalar(k.next()?)?;
                    let op = match k.next()?.name.as_str() {
                        "add" => ArithOp::Add,
                        "sub" => ArithOp::Sub,
                        "mul" => ArithOp::Mul,
                        _ => ArithOp::Div,
                    };
                    let rhs = self.scalar(k.next()?)?;
                    Scalar::Arith {
                        op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    }
                }
                "concat-exp" => {
                    let mut k = Kids::of(e);
                    let l = self.scalar(k.next()?)?;
                    let r = self.scalar(k.next()?)?;
                    Scalar::Concat(Box::new(l), Box::new(r))
                }
                "column-ref" => Scalar::Column(self.column_ref(e)?),
                "aggregate" => Scalar::Aggregate(Box::new(self.aggregate(e)?)),
                "constant" => Scalar::Constant(Constant(pcdata(e))),
                "query" => Scalar::Query(Box::new(self.query(e)?)),
                _ => return Err(invalid(e, "unexpected scalar element")),
            })
        })
    }

    fn aggregate(&self, e: &Element) -> Result<Aggregate, SqlError> {
        let mut k = Kids::of(e);
        let f = k.next()?;
        let func = match f.name.as_str() {
            "count-all" => return Ok(Aggregate::CountAll),
            "avg" => AggFunc::Avg,
            "count" => AggFunc::Count,
            "max" => AggFunc::Max,
            "min" => AggFunc::Min,
            _ => AggFunc::Sum,
        };
        let quantifier = self.quantifier(&mut k);
        let operand = self.scalar_body(k.next()?)?;
        Ok(Aggregate::Func {
            func,
            quantifier,
            operand: Box::new(operand),
        })
    }

    fn table_ref(&self, e: &Element) -> Result<TableRef, SqlError> {
        let mut k = Kids::of(e);
        let first = k.next()?;
        let source = if first.name == "table" {
            TableSource::Table(pcdata(first))
        } else {
            TableSource::Query(Box::new(self.query(first)?))
        };
        let alias = k.eat("alias").map(pcdata);
        Ok(TableRef { source, alias })
    }

    fn cond(&self, e: &Element) -> Result<CondExpr, SqlError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
            let mut k = Kids::of(e);
            let negated = k.eat("not").is_some();
            let b = k.next()?;
            let body = match b.name.as_str() {
                "cond-test" => CondBody::Test(Box::new(self.test(Kids::of(b).next()?)?)),
                "and" => CondBody::And(b.elements().map(|c| self.cond(c)).collect::<Result<_, _>>()?),
                _ => CondBody::Or(b.elements().map(|c| self.cond(c)).collect::<Result<_, _>>()?),
            };
            Ok(CondExpr { negated, body })
        })
    }

    fn comp(&self, e: &Element) -> CompOp {
        match e.name.as_str() {
            "eq" => CompOp::Eq,
            "lt" => CompOp::Lt,
            "let" => CompOp::Let,
            "gt" => CompOp::Gt,
            "get" => CompOp::Get,
            _ => CompOp::Neq,
        }
    }

    fn operand(&self, e: &Element) -> Result<Operand, SqlError> {
        if e.name == "column-ref" {
            Ok(Operand::Column(self.column_ref(e)?))
        } else {
            Ok(Operand::Scalar(self.scalar(e)?))
        }
    }

    fn row(&self, e: &Element) -> Result<Vec<Operand>, SqlError> {
        e.elements().map(|o| self.operand(o)).collect()
    }

    fn test(&self, e: &Element) -> Result<CondTest, SqlError> {
        let mut k = Kids::of(e);
        Ok(match e.name.as_str() {
            "comparison" => {
                let lhs = self.row(k.next()?)?;
                let op = self.comp(k.next()?);
                let rhs = self.row(k.next()?)?;
                CondTest::Comparison { lhs, op, rhs }
            }
            "like" => {
                let value = self.operand(k.next()?)?;
                let pattern = self.operand(k.next()?)?;
                let escape = k.rest().first().map(|x| self.operand(x)).transpose()?;
                CondTest::Like {
                    value,
                    pattern,
                    escape,
                }
            }
            "in" if k.is("rowconstr") => {
                let row = self.row(k.next()?)?;
                let query = Box::new(self.query(k.next()?)?);
                CondTest::In(InTest::Subquery { row, query })
            }
            "in" => {
                let value = self.scalar(k.next()?)?;
                let list = k.rest().into_iter().map(|s| self.scalar(s)).collect::<Result<_, _>>()?;
                CondTest::In(InTest::List { value, list })
            }
            "match" => {
                let row = self.row(k.next()?)?;
                let unique = k.eat("unique").is_some();
                let kind = if k.eat("partial").is_some() {
                    Some(MatchKind::Partial)
                } else if k.eat("full").is_some() {
                    Some(MatchKind::Full)
                } else {
                    None
                };
                let query = Box::new(self.query(k.next()?)?);
                CondTest::Match {
                    row,
                    unique,
                    kind,
                    query,
                }
            }
            "all-or-any" => {
                let row = self.row(k.next()?)?;
                let op = self.comp(k.next()?);
                let quantifier = if k.eat("all").is_some() {
                    Some(AllAny::All)
                } else if k.eat("any").is_some() {
                    Some(AllAny::Any)
                } else {
                    None
                };
                let query = Box::new(self.query(k.next()?)?);
                CondTest::AllOrAny {
                    row,
                    op,
                    quantifier,
                    query,
                }
            }
            "exists" => CondTest::Exists(Box::new(self.query(k.next()?)?)),
            "unique" => CondTest::Unique(Box::new(self.query(k.next()?)?)),
            "overlaps" => {
                let mut s = Vec::new();
                for _ in 0..4 {
                    s.push(self.scalar(k.next()?)?);
                }
                let arr: [Scalar; 4] = s.try_into().map_err(|_| invalid(e, "overlaps needs four scalars"))?;
                CondTest::Overlaps(Box::new(arr))
            }
            _ => CondTest::IsNull(self.row(k.next()?)?),
        })
    }
}
