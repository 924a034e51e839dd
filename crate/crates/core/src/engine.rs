//! In-memory evaluation of query trees over a catalog of tables.
//!
//! The from-list is a nested loop in which every item may see the range
//! variables bound to its left. Conditions use three-valued logic; grouping,
//! `distinct` and the set operations compare values by canonical key.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use crate::runtime::{self, Functions};
use crate::sql::{
    AggFunc, Aggregate, AllAny, ArithOp, ColumnRef, CompOp, CondBody, CondExpr, CondTest, Constant, InTest, Operand,
    Quantifier, Query, Scalar, SelItem, SelValue, SelectList, SelectQuery, SetOpKind, TableSource,
};
use crate::value::{ColumnType, Value, ValueKey};
use crate::xform::{TransformError, DEFAULT_DEPTH_LIMIT};
use crate::xpath::{parse_xpath, Expr, XPathError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column reference `{0}`")]
    AmbiguousColumn(String),
    #[error("range variable `{0}` is bound twice in one from clause")]
    DuplicateRangeVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("column `{0}` must appear in group by or inside an aggregate")]
    NotGrouped(String),
    #[error("aggregate {0} is not allowed here")]
    MisplacedAggregate(String),
    #[error("subquery used as a value returned {0} rows")]
    Cardinality(usize),
    #[error("query result has no column `{0}`")]
    MissingColumn(String),
    #[error("invalid syntax tree at {path}: {reason}")]
    InvalidSyntaxTree { path: String, reason: String },
    #[error("dynamic evaluation of a null query document")]
    NullQueryDocument,
    #[error("{0} expects an xml value")]
    NotXmlTyped(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("column name `{0}` is not a valid element name")]
    InvalidElementName(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    XPath(#[from] XPathError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column { name: name.into(), ty }
    }
}

/// A bag of rows under an ordered list of typed columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    /// Builds a table, checking arity and column types of every row.
    pub fn from_rows(columns: Vec<Column>, rows: Vec<Vec<Value>>) -> Result<Self, ExecError> {
        let mut t = Table::new(columns);
        for r in rows {
            t.push(r)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<(), ExecError> {
        if row.len() != self.columns.len() {
            return Err(ExecError::TypeMismatch(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (v, c) in row.iter().zip(&self.columns) {
            if let Some(t) = v.column_type() {
                if t != c.ty {
                    return Err(ExecError::TypeMismatch(format!("{t} value in {} column `{}`", c.ty, c.name)));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Case-insensitive column lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in a canonical order, for order-insensitive comparison.
    pub fn sorted_keys(&self) -> Vec<Vec<ValueKey>> {
        let mut keys: Vec<_> = self.rows.iter().map(|r| row_key(r)).collect();
        keys.sort();
        keys
    }
}

/// Tables by name; lookup ignores ASCII case.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    tables: BTreeMap<String, (String, Table)>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a table, returning the previous one.
    pub fn insert(&mut self, name: impl Into<String>, table: Table) -> Option<Table> {
        let name = name.into();
        self.tables
            .insert(name.to_ascii_lowercase(), (name, table))
            .map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.get(&name.to_ascii_lowercase()).map(|(_, t)| t)
    }

    pub fn remove(&mut self, name: &str) -> Option<Table> {
        self.tables.remove(&name.to_ascii_lowercase()).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Table)> {
        self.tables.values().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// Restricts and reorders `table` to `scheme`, keeping duplicates.
pub fn project(table: &Table, scheme: &[String]) -> Result<Table, ExecError> {
    let idx = scheme
        .iter()
        .map(|n| table.column_index(n).ok_or_else(|| ExecError::MissingColumn(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Table {
        columns: idx.iter().map(|&i| table.columns[i].clone()).collect(),
        rows: table
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect(),
    })
}

/// Runs a plain query that calls no declared functions.
pub fn execute(query: &Query, catalog: &Catalog) -> Result<Table, ExecError> {
    let functions = Functions::new();
    Engine::new(catalog, &functions).execute(query)
}

/// Evaluation context: a catalog snapshot plus the declared functions.
#[derive(Clone)]
pub struct Engine<'a> {
    catalog: &'a Catalog,
    functions: &'a Functions,
    depth_limit: usize,
    paths: Rc<RefCell<HashMap<String, Rc<Expr>>>>,
}

type Row = Vec<Value>;

#[derive(Debug, Clone)]
struct Frame {
    name: Option<String>,
    columns: Vec<(String, Option<ColumnType>)>,
    offset: usize,
}

#[derive(Debug, Default)]
struct FromInfo {
    frames: Vec<Frame>,
    width: usize,
}

struct Group<'s> {
    rows: &'s [Row],
    keys: &'s [usize],
}

/// One query level of the row environment. Only the first `visible` frames
/// are in scope, which gives from-items their left-to-right visibility.
#[derive(Clone, Copy)]
struct Scope<'s> {
    info: &'s FromInfo,
    visible: usize,
    row: &'s [Value],
    group: Option<&'s Group<'s>>,
    parent: Option<&'s Scope<'s>>,
}

struct Resolved {
    depth: usize,
    flat: usize,
    ty: Option<ColumnType>,
}

fn ref_text(c: &ColumnRef) -> String {
    match &c.rangevar {
        Some(rv) => format!("{rv}.{}", c.column),
        None => c.column.clone(),
    }
}

impl<'s> Scope<'s> {
    fn lookup(&self, c: &ColumnRef) -> Result<Option<(usize, Option<ColumnType>)>, ExecError> {
        let frames = &self.info.frames[..self.visible];
        let mut hits = Vec::new();
        match &c.rangevar {
            Some(rv) => {
                let Some(f) = frames
                    .iter()
                    .find(|f| f.name.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(rv)))
                else {
                    return Ok(None);
                };
                for (i, (n, ty)) in f.columns.iter().enumerate() {
                    if n.eq_ignore_ascii_case(&c.column) {
                        hits.push((f.offset + i, *ty));
                    }
                }
                if hits.is_empty() {
                    return Err(ExecError::UnknownColumn(ref_text(c)));
                }
            }
            None => {
                for f in frames {
                    for (i, (n, ty)) in f.columns.iter().enumerate() {
                        if n.eq_ignore_ascii_case(&c.column) {
                            hits.push((f.offset + i, *ty));
                        }
                    }
                }
            }
        }
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            _ => Err(ExecError::AmbiguousColumn(ref_text(c))),
        }
    }

    fn resolve(&self, c: &ColumnRef) -> Result<Resolved, ExecError> {
        let mut cur = Some(self);
        let mut depth = 0;
        while let Some(s) = cur {
            if let Some((flat, ty)) = s.lookup(c)? {
                return Ok(Resolved { depth, flat, ty });
            }
            cur = s.parent;
            depth += 1;
        }
        Err(ExecError::UnknownColumn(ref_text(c)))
    }

    fn ancestor(&self, depth: usize) -> &Scope<'s> {
        let mut s = self;
        for _ in 0..depth {
            s = s.parent.expect("resolved depth within scope chain");
        }
        s
    }

    /// Reads a visible value; grouped levels only expose grouping columns.
    fn value_at(&self, depth: usize, flat: usize, name: &dyn Fn() -> String) -> Result<Value, ExecError> {
        let s = self.ancestor(depth);
        if let Some(g) = s.group {
            if !g.keys.contains(&flat) {
                return Err(ExecError::NotGrouped(name()));
            }
        }
        Ok(s.row[flat].clone())
    }

    fn column(&self, c: &ColumnRef) -> Result<Value, ExecError> {
        let r = self.resolve(c)?;
        self.value_at(r.depth, r.flat, &|| ref_text(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn of(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    fn not(self) -> Self {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    fn and(self, o: Self) -> Self {
        match (self, o) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    fn or(self, o: Self) -> Self {
        match (self, o) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Unknown,
        }
    }
}

fn row_key(r: &[Value]) -> Vec<ValueKey> {
    r.iter().map(Value::key).collect()
}

fn dedupe(rows: Vec<Row>) -> Vec<Row> {
    let mut seen = HashSet::new();
    rows.into_iter().filter(|r| seen.insert(row_key(r))).collect()
}

fn type_name(v: &Value) -> &'static str {
    v.column_type().map_or("null", ColumnType::as_str)
}

fn constant_value(c: &Constant) -> Value {
    match c.number() {
        Some(n) => Value::Number(n),
        None => Value::String(c.0.clone()),
    }
}

fn literal(o: Option<&Operand>) -> Option<&Constant> {
    match o {
        Some(Operand::Scalar(Scalar::Constant(c))) => Some(c),
        _ => None,
    }
}

/// A numeric-looking literal compared with a string is read as a string.
fn coerce(x: &mut Value, xs: Option<&Constant>, y: &Value) {
    if let (Value::Number(_), Value::String(_), Some(c)) = (&*x, y, xs) {
        *x = Value::String(c.0.clone());
    }
}

enum Cmp {
    Null,
    Ord(Ordering),
    /// Distinct xml values, which have no order.
    Unequal,
}

fn compare(a: &Value, b: &Value) -> Result<Cmp, ExecError> {
    Ok(match (a, b) {
        (Value::Null, _) | (_, Value::Null) => Cmp::Null,
        (Value::Number(x), Value::Number(y)) => Cmp::Ord(x.partial_cmp(y).unwrap_or(Ordering::Equal)),
        (Value::String(x), Value::String(y)) => Cmp::Ord(x.cmp(y)),
        (Value::Xml(_), Value::Xml(_)) if a.key() == b.key() => Cmp::Ord(Ordering::Equal),
        (Value::Xml(_), Value::Xml(_)) => Cmp::Unequal,
        _ => {
            return Err(ExecError::TypeMismatch(format!(
                "cannot compare {} with {}",
                type_name(a),
                type_name(b)
            )))
        }
    })
}

fn compare_rows(
    l: &[Value],
    lsyn: &[Operand],
    op: CompOp,
    r: &[Value],
    rsyn: &[Operand],
) -> Result<Truth, ExecError> {
    if l.len() != r.len() {
        return Err(ExecError::TypeMismatch(format!(
            "row constructors of degree {} and {}",
            l.len(),
            r.len()
        )));
    }
    let ordering = !matches!(op, CompOp::Eq | CompOp::Neq);
    let mut eq = Truth::True;
    for i in 0..l.len() {
        let (mut x, mut y) = (l[i].clone(), r[i].clone());
        coerce(&mut x, literal(lsyn.get(i)), &y);
        coerce(&mut y, literal(rsyn.get(i)), &x);
        let c = compare(&x, &y)?;
        if ordering && matches!(x, Value::Xml(_)) {
            return Err(ExecError::TypeMismatch("xml values have no order".into()));
        }
        match c {
            Cmp::Null if ordering => return Ok(Truth::Unknown),
            Cmp::Null => eq = Truth::Unknown,
            Cmp::Ord(Ordering::Equal) => {}
            Cmp::Ord(o) if ordering => {
                return Ok(Truth::of(match op {
                    CompOp::Lt | CompOp::Let => o == Ordering::Less,
                    _ => o == Ordering::Greater,
                }))
            }
            Cmp::Ord(_) | Cmp::Unequal => {
                eq = Truth::False;
                break;
            }
        }
    }
    Ok(match op {
        CompOp::Eq => eq,
        CompOp::Neq => eq.not(),
        CompOp::Let | CompOp::Get => Truth::True,
        CompOp::Lt | CompOp::Gt => Truth::False,
    })
}

fn like_match(text: &str, pattern: &str, escape: Option<char>) -> Result<bool, ExecError> {
    enum P {
        Any,
        One,
        Lit(char),
    }
    let mut pat = Vec::new();
    let mut chars = pattern.chars();
    while let Some(c) = chars.next() {
        if Some(c) == escape {
            match chars.next() {
                Some(n) => pat.push(P::Lit(n)),
                None => return Err(ExecError::TypeMismatch("like pattern ends with the escape character".into())),
            }
        } else if c == '%' {
            pat.push(P::Any);
        } else if c == '_' {
            pat.push(P::One);
        } else {
            pat.push(P::Lit(c));
        }
    }
    let text: Vec<char> = text.chars().collect();
    // reach[j]: the first j pattern items match the text consumed so far.
    let mut reach = vec![false; pat.len() + 1];
    reach[0] = true;
    for j in 0..pat.len() {
        reach[j + 1] = reach[j] && matches!(pat[j], P::Any);
    }
    for &t in &text {
        let mut next = vec![false; pat.len() + 1];
        for j in 0..pat.len() {
            next[j + 1] = match pat[j] {
                P::Any => next[j] || reach[j + 1],
                P::One => reach[j],
                P::Lit(c) => reach[j] && c == t,
            };
        }
        reach = next;
    }
    Ok(reach[pat.len()])
}

fn arith(op: ArithOp, a: Value, b: Value) -> Result<Value, ExecError> {
    match (&a, &b) {
        (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
        (Value::Number(x), Value::Number(y)) => Ok(Value::Number(match op {
            ArithOp::Add => x + y,
            ArithOp::Sub => x - y,
            ArithOp::Mul => x * y,
            ArithOp::Div if *y == 0.0 => return Err(ExecError::DivisionByZero),
            ArithOp::Div => x / y,
        })),
        _ => Err(ExecError::TypeMismatch(format!(
            "arithmetic on {} and {}",
            type_name(&a),
            type_name(&b)
        ))),
    }
}

fn concat(a: Value, b: Value) -> Result<Value, ExecError> {
    match (&a, &b) {
        (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
        (Value::Xml(_), _) | (_, Value::Xml(_)) => Err(ExecError::TypeMismatch("concatenation of an xml value".into())),
        _ => Ok(Value::String(format!(
            "{}{}",
            a.to_text().unwrap_or_default(),
            b.to_text().unwrap_or_default()
        ))),
    }
}

fn has_aggregate(s: &Scalar) -> bool {
    match s {
        Scalar::Aggregate(_) => true,
        Scalar::Arith { lhs, rhs, .. } => has_aggregate(lhs) || has_aggregate(rhs),
        Scalar::Concat(l, r) => has_aggregate(l) || has_aggregate(r),
        Scalar::Call { args, .. } => args.iter().any(has_aggregate),
        Scalar::Column(_) | Scalar::Constant(_) | Scalar::Query(_) => false,
    }
}

fn select_has_aggregate(items: &SelectList) -> bool {
    match items {
        SelectList::Wildcard => false,
        SelectList::Items(items) => items.iter().any(|i| match &i.value {
            SelValue::Aggregate(_) => true,
            SelValue::Scalar(s) => has_aggregate(s),
            _ => false,
        }),
    }
}

fn aggregate_name(a: &Aggregate) -> &'static str {
    match a {
        Aggregate::CountAll => "count",
        Aggregate::Func { func, .. } => func.name(),
    }
}

/// Column name for a select item without an alias.
fn default_name(item: &SelItem, position: usize) -> String {
    match &item.value {
        SelValue::Column(c) => c.clone(),
        SelValue::Qualified { column, .. } => column.clone(),
        SelValue::Scalar(Scalar::Column(c)) => c.column.clone(),
        SelValue::Scalar(Scalar::Call { name, .. }) => name.clone(),
        SelValue::Aggregate(a) => aggregate_name(a).to_string(),
        SelValue::Scalar(Scalar::Aggregate(a)) => aggregate_name(a).to_string(),
        _ => format!("col{}", position + 1),
    }
}

/// The common type of a column's non-Null values, string when mixed or empty.
fn observed_type(rows: &[Row], i: usize) -> ColumnType {
    let mut ty = None;
    for r in rows {
        match (ty, r[i].column_type()) {
            (_, None) => {}
            (None, t) => ty = t,
            (Some(a), Some(b)) if a != b => return ColumnType::String,
            _ => {}
        }
    }
    ty.unwrap_or(ColumnType::String)
}

fn finish(columns: Vec<(String, Option<ColumnType>)>, rows: Vec<Row>) -> Table {
    let columns = columns
        .into_iter()
        .enumerate()
        .map(|(i, (name, ty))| Column {
            name,
            ty: ty.unwrap_or_else(|| observed_type(&rows, i)),
        })
        .collect();
    Table { columns, rows }
}

fn set_op(kind: SetOpKind, all: bool, l: Table, r: Table) -> Result<Table, ExecError> {
    if l.columns.len() != r.columns.len() {
        return Err(ExecError::TypeMismatch(format!(
            "set operation over {} and {} columns",
            l.columns.len(),
            r.columns.len()
        )));
    }
    let columns: Vec<Column> = l
        .columns
        .iter()
        .zip(&r.columns)
        .enumerate()
        .map(|(i, (a, b))| {
            let left_has_values = l.rows.iter().any(|row| !row[i].is_null());
            Column::new(a.name.clone(), if left_has_values || r.rows.is_empty() { a.ty } else { b.ty })
        })
        .collect();
    let mut counts: HashMap<Vec<ValueKey>, usize> = HashMap::new();
    for row in &r.rows {
        *counts.entry(row_key(row)).or_default() += 1;
    }
    let rows = match kind {
        SetOpKind::Union => {
            let mut rows = l.rows;
            rows.extend(r.rows);
            rows
        }
        SetOpKind::Intersect => l
            .rows
            .into_iter()
            .filter(|row| match counts.get_mut(&row_key(row)) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    true
                }
                _ => false,
            })
            .collect(),
        SetOpKind::Except if all => l
            .rows
            .into_iter()
            .filter(|row| match counts.get_mut(&row_key(row)) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    false
                }
                _ => true,
            })
            .collect(),
        SetOpKind::Except => l
            .rows
            .into_iter()
            .filter(|row| !counts.contains_key(&row_key(row)))
            .collect(),
    };
    Ok(Table {
        columns,
        rows: if all { rows } else { dedupe(rows) },
    })
}

impl<'a> Engine<'a> {
    pub fn new(catalog: &'a Catalog, functions: &'a Functions) -> Self {
        Engine {
            catalog,
            functions,
            depth_limit: DEFAULT_DEPTH_LIMIT,
            paths: Rc::default(),
        }
    }

    /// Limits template nesting inside transform calls.
    pub fn with_depth_limit(mut self, limit: usize) -> Self {
        self.depth_limit = limit;
        self
    }

    pub fn catalog(&self) -> &'a Catalog {
        self.catalog
    }

    pub fn functions(&self) -> &'a Functions {
        self.functions
    }

    /// Parsed form of an EXTRACT path, parsed once per engine.
    fn path(&self, text: &str) -> Result<Rc<Expr>, ExecError> {
        if let Some(e) = self.paths.borrow().get(text) {
            return Ok(e.clone());
        }
        let e = Rc::new(parse_xpath(text)?);
        self.paths.borrow_mut().insert(text.to_string(), e.clone());
        Ok(e)
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn execute(&self, query: &Query) -> Result<Table, ExecError> {
        self.query(query, None)
    }

    fn query(&self, q: &Query, outer: Option<&Scope>) -> Result<Table, ExecError> {
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || match q {
            Query::Select(s) => self.select(s, outer),
            Query::SetOp {
                kind,
                all,
                left,
                right,
            } => {
                let l = self.query(left, outer)?;
                let r = self.query(right, outer)?;
                set_op(*kind, *all, l, r)
            }
        })
    }

    /// Output columns of `q` without running it. Types that depend on data
    /// (EVAL columns, unresolvable references) are left open.
    fn describe(&self, q: &Query, outer: Option<&Scope>) -> Result<Vec<(String, Option<ColumnType>)>, ExecError> {
        match q {
            Query::Select(s) => {
                let info = self.plan_from(&s.from, outer)?;
                let scope = Scope {
                    info: &info,
                    visible: info.frames.len(),
                    row: &[],
                    group: None,
                    parent: outer,
                };
                self.output_columns(&s.select.items, &scope)
            }
            Query::SetOp { left, right, .. } => {
                let l = self.describe(left, outer)?;
                let r = self.describe(right, outer)?;
                if l.len() != r.len() {
                    return Err(ExecError::TypeMismatch(format!(
                        "set operation over {} and {} columns",
                        l.len(),
                        r.len()
                    )));
                }
                Ok(l.into_iter().zip(r).map(|((n, a), (_, b))| (n, a.or(b))).collect())
            }
        }
    }

    fn plan_from(&self, from: &[crate::sql::TableRef], outer: Option<&Scope>) -> Result<FromInfo, ExecError> {
        let mut info = FromInfo::default();
        for t in from {
            let (name, columns) = match &t.source {
                TableSource::Table(n) => {
                    let table = self.catalog.get(n).ok_or_else(|| ExecError::UnknownTable(n.clone()))?;
                    let cols = table.columns.iter().map(|c| (c.name.clone(), Some(c.ty))).collect();
                    (Some(t.alias.clone().unwrap_or_else(|| n.clone())), cols)
                }
                TableSource::Query(q) => {
                    let scope = Scope {
                        info: &info,
                        visible: info.frames.len(),
                        row: &[],
                        group: None,
                        parent: outer,
                    };
                    (t.alias.clone(), self.describe(q, Some(&scope))?)
                }
                TableSource::Extract { .. } | TableSource::Ueval { .. } => (
                    t.alias.clone(),
                    vec![(runtime::RESULT_COLUMN.to_string(), Some(ColumnType::Xml))],
                ),
                TableSource::Eval { scheme: Some(s), .. } => {
                    (t.alias.clone(), s.iter().map(|c| (c.clone(), None)).collect())
                }
                TableSource::Eval { scheme: None, .. } => {
                    return Err(ExecError::UnsupportedFeature("EVAL without an inferred output scheme".into()))
                }
                TableSource::XmlBinding { .. } | TableSource::UevalIn { .. } => {
                    return Err(ExecError::UnsupportedFeature(
                        "XML variable bindings must be compiled before execution".into(),
                    ))
                }
            };
            if let Some(n) = &name {
                let clash = info
                    .frames
                    .iter()
                    .any(|f| f.name.as_deref().is_some_and(|m| m.eq_ignore_ascii_case(n)));
                if clash {
                    return Err(ExecError::DuplicateRangeVariable(n.clone()));
                }
            }
            let width = columns.len();
            info.frames.push(Frame {
                name,
                columns,
                offset: info.width,
            });
            info.width += width;
        }
        Ok(info)
    }

    fn output_columns(
        &self,
        items: &SelectList,
        scope: &Scope,
    ) -> Result<Vec<(String, Option<ColumnType>)>, ExecError> {
        let frames = &scope.info.frames[..scope.visible];
        match items {
            SelectList::Wildcard => Ok(frames.iter().flat_map(|f| f.columns.iter().cloned()).collect()),
            SelectList::Items(items) => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    if let SelValue::QualifiedWildcard(rv) = &item.value {
                        out.extend(self.frame_named(scope, rv)?.columns.iter().cloned());
                        continue;
                    }
                    let ty = match &item.value {
                        SelValue::Column(c) => scope.resolve(&ColumnRef::new(None, c)).ok().and_then(|r| r.ty),
                        SelValue::Qualified { rangevar, column } => scope
                            .resolve(&ColumnRef::new(Some(rangevar), column))
                            .ok()
                            .and_then(|r| r.ty),
                        SelValue::Scalar(s) => self.scalar_type(s, scope),
                        SelValue::Aggregate(a) => self.aggregate_type(a, scope),
                        SelValue::QualifiedWildcard(_) => unreachable!(),
                    };
                    let name = item.alias.clone().unwrap_or_else(|| default_name(item, i));
                    out.push((name, ty));
                }
                Ok(out)
            }
        }
    }

    fn frame_named<'s>(&self, scope: &'s Scope, rv: &str) -> Result<&'s Frame, ExecError> {
        scope.info.frames[..scope.visible]
            .iter()
            .find(|f| f.name.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(rv)))
            .ok_or_else(|| ExecError::UnknownColumn(format!("{rv}.*")))
    }

    fn scalar_type(&self, s: &Scalar, scope: &Scope) -> Option<ColumnType> {
        match s {
            Scalar::Arith { .. } => Some(ColumnType::Number),
            Scalar::Concat(..) => Some(ColumnType::String),
            Scalar::Column(c) => scope.resolve(c).ok().and_then(|r| r.ty),
            Scalar::Aggregate(a) => self.aggregate_type(a, scope),
            Scalar::Constant(c) if c.is_number() => Some(ColumnType::Number),
            Scalar::Constant(_) => Some(ColumnType::String),
            Scalar::Query(q) => self
                .describe(q, Some(scope))
                .ok()
                .and_then(|cols| cols.first().and_then(|c| c.1)),
            Scalar::Call { name, .. } => self.functions.get(name).map(|p| p.return_type),
        }
    }

    fn aggregate_type(&self, a: &Aggregate, scope: &Scope) -> Option<ColumnType> {
        match a {
            Aggregate::CountAll => Some(ColumnType::Number),
            Aggregate::Func { func, operand, .. } => match func {
                AggFunc::Count | AggFunc::Sum | AggFunc::Avg => Some(ColumnType::Number),
                AggFunc::Cmb => Some(ColumnType::Xml),
                AggFunc::Max | AggFunc::Min => self.scalar_type(operand, scope),
            },
        }
    }

    fn select(&self, s: &SelectQuery, outer: Option<&Scope>) -> Result<Table, ExecError> {
        let info = self.plan_from(&s.from, outer)?;
        let all = info.frames.len();
        let mut rows: Vec<Row> = vec![Vec::new()];
        for (i, t) in s.from.iter().enumerate() {
            let mut next = Vec::new();
            if let TableSource::Table(n) = &t.source {
                let table = self.catalog.get(n).ok_or_else(|| ExecError::UnknownTable(n.clone()))?;
                for r in &rows {
                    for tr in &table.rows {
                        let mut x = r.clone();
                        x.extend(tr.iter().cloned());
                        next.push(x);
                    }
                }
            } else {
                for r in &rows {
                    let scope = Scope {
                        info: &info,
                        visible: i,
                        row: r,
                        group: None,
                        parent: outer,
                    };
                    for produced in self.table_source(&t.source, &scope)?.rows {
                        let mut x = r.clone();
                        x.extend(produced);
                        next.push(x);
                    }
                }
            }
            rows = next;
        }

        if let Some(w) = &s.where_clause {
            let mut kept = Vec::with_capacity(rows.len());
            for r in rows {
                let scope = Scope {
                    info: &info,
                    visible: all,
                    row: &r,
                    group: None,
                    parent: outer,
                };
                if self.cond(w, &scope)? == Truth::True {
                    kept.push(r);
                }
            }
            rows = kept;
        }

        let top = Scope {
            info: &info,
            visible: all,
            row: &[],
            group: None,
            parent: outer,
        };
        let columns = self.output_columns(&s.select.items, &top)?;

        let mut out = Vec::new();
        if !s.group_by.is_empty() || s.having.is_some() || select_has_aggregate(&s.select.items) {
            let mut keys = Vec::new();
            for c in &s.group_by {
                let r = top.resolve(c)?;
                if r.depth != 0 {
                    return Err(ExecError::UnknownColumn(ref_text(c)));
                }
                keys.push(r.flat);
            }
            let groups = if keys.is_empty() {
                vec![rows]
            } else {
                let mut index: HashMap<Vec<ValueKey>, usize> = HashMap::new();
                let mut groups: Vec<Vec<Row>> = Vec::new();
                for r in rows {
                    let k: Vec<ValueKey> = keys.iter().map(|&i| r[i].key()).collect();
                    let g = *index.entry(k).or_insert_with(|| {
                        groups.push(Vec::new());
                        groups.len() - 1
                    });
                    groups[g].push(r);
                }
                groups
            };
            let blank = vec![Value::Null; info.width];
            for g in &groups {
                let group = Group { rows: g, keys: &keys };
                let scope = Scope {
                    row: g.first().unwrap_or(&blank),
                    group: Some(&group),
                    ..top
                };
                if let Some(h) = &s.having {
                    if self.cond(h, &scope)? != Truth::True {
                        continue;
                    }
                }
                out.push(self.project_items(&s.select.items, &scope)?);
            }
        } else {
            for r in &rows {
                let scope = Scope { row: r, ..top };
                out.push(self.project_items(&s.select.items, &scope)?);
            }
        }
        if s.select.quantifier == Some(Quantifier::Distinct) {
            out = dedupe(out);
        }
        Ok(finish(columns, out))
    }

    fn table_source(&self, source: &TableSource, scope: &Scope) -> Result<Table, ExecError> {
        match source {
            TableSource::Query(q) => self.query(q, Some(scope)),
            TableSource::Extract { source, path } => match self.scalar(source, scope)? {
                Value::Null => Ok(runtime::extract_empty()),
                Value::Xml(d) => runtime::extract_expr(&d, &*self.path(path)?),
                _ => Err(ExecError::NotXmlTyped("EXTRACT".into())),
            },
            TableSource::Ueval { arg } => match self.scalar(arg, scope)? {
                Value::Null => Err(ExecError::NullQueryDocument),
                Value::Xml(d) => runtime::ueval(&d, self),
                _ => Err(ExecError::NotXmlTyped("UEVAL".into())),
            },
            TableSource::Eval { arg, scheme } => match self.scalar(arg, scope)? {
                Value::Null => Err(ExecError::NullQueryDocument),
                Value::Xml(d) => runtime::eval_typed(&d, self, scheme.as_deref().unwrap_or_default()),
                _ => Err(ExecError::NotXmlTyped("EVAL".into())),
            },
            TableSource::Table(_) | TableSource::XmlBinding { .. } | TableSource::UevalIn { .. } => {
                unreachable!("handled by the planner")
            }
        }
    }

    fn project_items(&self, items: &SelectList, scope: &Scope) -> Result<Row, ExecError> {
        let frame_values = |f: &Frame, out: &mut Row| -> Result<(), ExecError> {
            for (i, (name, _)) in f.columns.iter().enumerate() {
                out.push(scope.value_at(0, f.offset + i, &|| name.clone())?);
            }
            Ok(())
        };
        let mut out = Vec::new();
        match items {
            SelectList::Wildcard => {
                for f in &scope.info.frames[..scope.visible] {
                    frame_values(f, &mut out)?;
                }
            }
            SelectList::Items(items) => {
                for item in items {
                    match &item.value {
                        SelValue::Column(c) => out.push(scope.column(&ColumnRef::new(None, c))?),
                        SelValue::Qualified { rangevar, column } => {
                            out.push(scope.column(&ColumnRef::new(Some(rangevar), column))?)
                        }
                        SelValue::QualifiedWildcard(rv) => frame_values(self.frame_named(scope, rv)?, &mut out)?,
                        SelValue::Scalar(s) => out.push(self.scalar(s, scope)?),
                        SelValue::Aggregate(a) => out.push(self.aggregate(a, scope)?),
                    }
                }
            }
        }
        Ok(out)
    }

    fn scalar(&self, s: &Scalar, scope: &Scope) -> Result<Value, ExecError> {
        match s {
            Scalar::Arith { op, lhs, rhs } => arith(*op, self.scalar(lhs, scope)?, self.scalar(rhs, scope)?),
            Scalar::Concat(l, r) => concat(self.scalar(l, scope)?, self.scalar(r, scope)?),
            Scalar::Column(c) => scope.column(c),
            Scalar::Aggregate(a) => self.aggregate(a, scope),
            Scalar::Constant(c) => Ok(constant_value(c)),
            Scalar::Query(q) => {
                let t = self.query(q, Some(scope))?;
                single_value(t, false)
            }
            Scalar::Call { name, args } => {
                let program = self
                    .functions
                    .get(name)
                    .ok_or_else(|| ExecError::UnknownFunction(name.clone()))?;
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(match a {
                        Scalar::Query(q) => single_value(self.query(q, Some(scope))?, true)?,
                        other => self.scalar(other, scope)?,
                    });
                }
                runtime::invoke_function(program, &values, self.depth_limit)
            }
        }
    }

    fn aggregate(&self, a: &Aggregate, scope: &Scope) -> Result<Value, ExecError> {
        let Some(group) = scope.group else {
            return Err(ExecError::MisplacedAggregate(aggregate_name(a).into()));
        };
        let Aggregate::Func {
            func,
            quantifier,
            operand,
        } = a
        else {
            return Ok(Value::Number(group.rows.len() as f64));
        };
        let mut values = Vec::new();
        for r in group.rows {
            let inner = Scope {
                row: r,
                group: None,
                ..*scope
            };
            let v = self.scalar(operand, &inner)?;
            if !v.is_null() {
                values.push(v);
            }
        }
        if *quantifier == Some(Quantifier::Distinct) {
            let mut seen = HashSet::new();
            values.retain(|v| seen.insert(v.key()));
        }
        if *func == AggFunc::Count {
            return Ok(Value::Number(values.len() as f64));
        }
        if values.is_empty() {
            return Ok(Value::Null);
        }
        match func {
            AggFunc::Sum | AggFunc::Avg => {
                let mut sum = 0.0;
                for v in &values {
                    match v {
                        Value::Number(n) => sum += n,
                        other => {
                            return Err(ExecError::TypeMismatch(format!("{} over {}", func.name(), type_name(other))))
                        }
                    }
                }
                Ok(Value::Number(if *func == AggFunc::Avg {
                    sum / values.len() as f64
                } else {
                    sum
                }))
            }
            AggFunc::Max | AggFunc::Min => {
                let mut best = values[0].clone();
                for v in &values[1..] {
                    if matches!(v, Value::Xml(_)) {
                        return Err(ExecError::TypeMismatch(format!("{} over xml", func.name())));
                    }
                    let Cmp::Ord(o) = compare(v, &best)? else {
                        return Err(ExecError::TypeMismatch(format!("{} over xml", func.name())));
                    };
                    if (*func == AggFunc::Max && o == Ordering::Greater) || (*func == AggFunc::Min && o == Ordering::Less) {
                        best = v.clone();
                    }
                }
                if matches!(best, Value::Xml(_)) {
                    return Err(ExecError::TypeMismatch(format!("{} over xml", func.name())));
                }
                Ok(best)
            }
            AggFunc::Cmb => {
                let docs = values
                    .into_iter()
                    .map(|v| match v {
                        Value::Xml(d) => Ok(d),
                        _ => Err(ExecError::NotXmlTyped("CMB".into())),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(runtime::cmb(&docs))
            }
            AggFunc::Count => unreachable!(),
        }
    }

    /// Values of a row constructor. A lone subquery facing a wider row
    /// supplies all of its columns.
    fn row(&self, ops: &[Operand], width: usize, scope: &Scope) -> Result<(Row, bool), ExecError> {
        if let ([Operand::Scalar(Scalar::Query(q))], true) = (ops, width > 1) {
            let t = self.query(q, Some(scope))?;
            return match t.rows.len() {
                0 => Ok((vec![Value::Null; t.columns.len()], true)),
                1 => Ok((t.rows.into_iter().next().unwrap_or_default(), true)),
                n => Err(ExecError::Cardinality(n)),
            };
        }
        let mut out = Vec::with_capacity(ops.len());
        for o in ops {
            out.push(match o {
                Operand::Column(c) => scope.column(c)?,
                Operand::Scalar(s) => self.scalar(s, scope)?,
            });
        }
        Ok((out, false))
    }

    fn cond(&self, c: &CondExpr, scope: &Scope) -> Result<Truth, ExecError> {
        let t = match &c.body {
            CondBody::Test(t) => self.test(t, scope)?,
            CondBody::And(parts) => {
                let mut acc = Truth::True;
                for p in parts {
                    acc = acc.and(self.cond(p, scope)?);
                    if acc == Truth::False {
                        break;
                    }
                }
                acc
            }
            CondBody::Or(parts) => {
                let mut acc = Truth::False;
                for p in parts {
                    acc = acc.or(self.cond(p, scope)?);
                    if acc == Truth::True {
                        break;
                    }
                }
                acc
            }
        };
        Ok(if c.negated { t.not() } else { t })
    }

    fn quantified(
        &self,
        row: &[Operand],
        op: CompOp,
        every: bool,
        q: &Query,
        scope: &Scope,
    ) -> Result<Truth, ExecError> {
        let t = self.query(q, Some(scope))?;
        let (l, expanded) = self.row(row, t.columns.len(), scope)?;
        let lsyn = if expanded { &[][..] } else { row };
        let mut acc = Truth::of(every);
        for r in &t.rows {
            let x = compare_rows(&l, lsyn, op, r, &[])?;
            acc = if every { acc.and(x) } else { acc.or(x) };
        }
        Ok(acc)
    }

    fn test(&self, t: &CondTest, scope: &Scope) -> Result<Truth, ExecError> {
        match t {
            CondTest::Comparison { lhs, op, rhs } => {
                let (l, le) = self.row(lhs, rhs.len(), scope)?;
                let (r, re) = self.row(rhs, lhs.len(), scope)?;
                compare_rows(&l, if le { &[] } else { lhs }, *op, &r, if re { &[] } else { rhs })
            }
            CondTest::Like {
                value,
                pattern,
                escape,
            } => {
                let mut parts = Vec::new();
                for o in std::iter::once(value).chain(std::iter::once(pattern)).chain(escape.iter()) {
                    let (mut v, _) = self.row(std::slice::from_ref(o), 1, scope)?;
                    let mut v = v.remove(0);
                    if let (Value::Number(_), Some(c)) = (&v, literal(Some(o))) {
                        v = Value::String(c.0.clone());
                    }
                    match v {
                        Value::Null => return Ok(Truth::Unknown),
                        Value::String(s) => parts.push(s),
                        other => {
                            return Err(ExecError::TypeMismatch(format!("like over {}", type_name(&other))))
                        }
                    }
                }
                let esc = match parts.get(2) {
                    None => None,
                    Some(e) if e.chars().count() == 1 => e.chars().next(),
                    Some(_) => return Err(ExecError::TypeMismatch("escape must be a single character".into())),
                };
                Ok(Truth::of(like_match(&parts[0], &parts[1], esc)?))
            }
            CondTest::In(InTest::List { value, list }) => {
                let v = self.scalar(value, scope)?;
                let vop = [Operand::from_scalar(value.clone())];
                let mut acc = Truth::False;
                for item in list {
                    let x = self.scalar(item, scope)?;
                    let xop = [Operand::from_scalar(item.clone())];
                    acc = acc.or(compare_rows(
                        std::slice::from_ref(&v),
                        &vop,
                        CompOp::Eq,
                        std::slice::from_ref(&x),
                        &xop,
                    )?);
                }
                Ok(acc)
            }
            CondTest::In(InTest::Subquery { row, query }) => self.quantified(row, CompOp::Eq, false, query, scope),
            CondTest::AllOrAny {
                row,
                op,
                quantifier,
                query,
            } => self.quantified(row, *op, *quantifier == Some(AllAny::All), query, scope),
            CondTest::Exists(q) => Ok(Truth::of(!self.query(q, Some(scope))?.rows.is_empty())),
            CondTest::Unique(q) => {
                let t = self.query(q, Some(scope))?;
                let mut seen = HashSet::new();
                let unique = t
                    .rows
                    .iter()
                    .filter(|r| r.iter().all(|v| !v.is_null()))
                    .all(|r| seen.insert(row_key(r)));
                Ok(Truth::of(unique))
            }
            CondTest::Match { .. } => Err(ExecError::UnsupportedFeature("match predicate".into())),
            CondTest::Overlaps(_) => Err(ExecError::UnsupportedFeature("overlaps predicate".into())),
            CondTest::IsNull(row) => {
                let (values, _) = self.row(row, 0, scope)?;
                Ok(Truth::of(values.iter().all(Value::is_null)))
            }
        }
    }
}

/// The value of a subquery used as a scalar. Function arguments demand
/// exactly one row; elsewhere an empty result reads as Null.
fn single_value(t: Table, exact: bool) -> Result<Value, ExecError> {
    if t.columns.len() != 1 {
        return Err(ExecError::TypeMismatch(format!(
            "subquery used as a value has {} columns",
            t.columns.len()
        )));
    }
    match t.rows.len() {
        0 if !exact => Ok(Value::Null),
        1 => Ok(t.rows.into_iter().next().and_then(|r| r.into_iter().next()).unwrap_or(Value::Null)),
        n => Err(ExecError::Cardinality(n)),
    }
}
