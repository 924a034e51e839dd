//! Reference evaluators written without reusing the library's algorithms:
//! a tuple-at-a-time interpreter for a small query language, a brute-force
//! location-path evaluator, a nested-loop binding evaluator and textual view
//! inlining.

use std::collections::BTreeMap;

use metasql::engine::{Catalog, Column, Table};
use metasql::sql::{CompOp, SetOpKind};
use metasql::value::{ColumnType, Value};
use metasql::xml::{serialize_xml, Element, XmlDoc, XmlNode};

use super::gen::PathStep;

// ---------------------------------------------------------------------------
// Naive interpreter

/// Columns visible in a mini query: R r is always present, S s when joined.
pub const COLS: &[&str] = &["r.a", "r.b", "r.c", "s.a", "s.d"];
pub const NUM_COLS: &[usize] = &[0, 2, 3, 4];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub r: Vec<(Option<i64>, Option<String>, Option<i64>)>,
    pub s: Vec<(Option<i64>, Option<i64>)>,
}

#[derive(Debug, Clone)]
pub enum NumTerm {
    Col(usize),
    Num(i64),
    Add(Box<NumTerm>, Box<NumTerm>),
    Sub(Box<NumTerm>, Box<NumTerm>),
    Mul(Box<NumTerm>, Box<NumTerm>),
}

#[derive(Debug, Clone)]
pub enum Pred {
    Cmp(NumTerm, CompOp, NumTerm),
    /// `r.b = 'lit'`
    StrEq(String),
    IsNull(usize),
    InList(NumTerm, Vec<i64>),
    /// `exists (select * from S z where z.a = col)`
    Exists(usize),
    And(Vec<Pred>),
    Or(Vec<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone)]
pub enum Agg {
    CountStar,
    Count(usize),
    Sum(usize),
    Min(usize),
    Max(usize),
}

impl Agg {
    pub fn column(&self) -> Option<usize> {
        match self {
            Agg::CountStar => None,
            Agg::Count(c) | Agg::Sum(c) | Agg::Min(c) | Agg::Max(c) => Some(*c),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Body {
    Plain { distinct: bool, items: Vec<NumTerm> },
    Grouped { key: usize, agg: Agg },
}

#[derive(Debug, Clone)]
pub struct Mini {
    pub two: bool,
    pub pred: Option<Pred>,
    pub body: Body,
}

#[derive(Debug, Clone)]
pub enum SetTop {
    Single(Mini),
    SetOp(SetOpKind, bool, Mini, Mini),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum V {
    Null,
    Num(i64),
    Str(String),
}

impl V {
    fn num(&self) -> Option<i64> {
        match self {
            V::Num(n) => Some(*n),
            _ => None,
        }
    }
}

fn term_sql(t: &NumTerm) -> String {
    match t {
        NumTerm::Col(c) => COLS[*c].to_string(),
        NumTerm::Num(n) => n.to_string(),
        NumTerm::Add(l, r) => format!("({} + {})", term_sql(l), term_sql(r)),
        NumTerm::Sub(l, r) => format!("({} - {})", term_sql(l), term_sql(r)),
        NumTerm::Mul(l, r) => format!("({} * {})", term_sql(l), term_sql(r)),
    }
}

fn pred_sql(p: &Pred) -> String {
    match p {
        Pred::Cmp(l, op, r) => format!("{} {} {}", term_sql(l), op.symbol(), term_sql(r)),
        Pred::StrEq(s) => format!("r.b = '{s}'"),
        Pred::IsNull(c) => format!("{} is null", COLS[*c]),
        Pred::InList(t, l) => {
            let items: Vec<String> = l.iter().map(i64::to_string).collect();
            format!("{} in ({})", term_sql(t), items.join(", "))
        }
        Pred::Exists(c) => format!("exists (select * from S z where z.a = {})", COLS[*c]),
        Pred::And(ps) => ps.iter().map(|p| format!("({})", pred_sql(p))).collect::<Vec<_>>().join(" and "),
        Pred::Or(ps) => ps.iter().map(|p| format!("({})", pred_sql(p))).collect::<Vec<_>>().join(" or "),
        Pred::Not(p) => format!("not ({})", pred_sql(p)),
    }
}

fn agg_sql(a: &Agg) -> String {
    match a {
        Agg::CountStar => "count(*)".into(),
        Agg::Count(c) => format!("count({})", COLS[*c]),
        Agg::Sum(c) => format!("sum({})", COLS[*c]),
        Agg::Min(c) => format!("min({})", COLS[*c]),
        Agg::Max(c) => format!("max({})", COLS[*c]),
    }
}

impl Mini {
    pub fn sql(&self) -> String {
        let from = if self.two { "R r, S s" } else { "R r" };
        let wh = self.pred.as_ref().map(|p| format!(" where {}", pred_sql(p))).unwrap_or_default();
        match &self.body {
            Body::Plain { distinct, items } => {
                let cols: Vec<String> = items
                    .iter()
                    .enumerate()
                    .map(|(i, t)| format!("{} as k{i}", term_sql(t)))
                    .collect();
                format!(
                    "select {}{} from {from}{wh}",
                    if *distinct { "distinct " } else { "" },
                    cols.join(", ")
                )
            }
            Body::Grouped { key, agg } => {
                format!("select {k}, {} from {from}{wh} group by {k}", agg_sql(agg), k = COLS[*key])
            }
        }
    }

    fn rows(&self, fx: &Fixture) -> Vec<Vec<V>> {
        let mut envs = Vec::new();
        for (a, b, c) in &fx.r {
            let base = vec![opt_num(a), b.clone().map_or(V::Null, V::Str), opt_num(c)];
            if self.two {
                for (sa, sd) in &fx.s {
                    let mut env = base.clone();
                    env.push(opt_num(sa));
                    env.push(opt_num(sd));
                    envs.push(env);
                }
            } else {
                envs.push(base);
            }
        }
        let kept: Vec<Vec<V>> = envs
            .into_iter()
            .filter(|env| self.pred.as_ref().is_none_or(|p| truth(p, env, fx) == Some(true)))
            .collect();
        match &self.body {
            Body::Plain { distinct, items } => {
                let out: Vec<Vec<V>> = kept.iter().map(|env| items.iter().map(|t| term(t, env)).collect()).collect();
                if *distinct {
                    dedup(out)
                } else {
                    out
                }
            }
            Body::Grouped { key, agg } => {
                let mut groups: BTreeMap<V, Vec<&Vec<V>>> = BTreeMap::new();
                for env in &kept {
                    groups.entry(env[*key].clone()).or_default().push(env);
                }
                groups
                    .into_iter()
                    .map(|(k, members)| vec![k, aggregate(agg, &members)])
                    .collect()
            }
        }
    }

    fn columns(&self) -> Vec<ColumnType> {
        match &self.body {
            Body::Plain { items, .. } => vec![ColumnType::Number; items.len()],
            Body::Grouped { key, .. } => vec![
                if *key == 1 { ColumnType::String } else { ColumnType::Number },
                ColumnType::Number,
            ],
        }
    }
}

fn opt_num(n: &Option<i64>) -> V {
    n.map_or(V::Null, V::Num)
}

fn term(t: &NumTerm, env: &[V]) -> V {
    let bin = |l: &NumTerm, r: &NumTerm, f: fn(i64, i64) -> i64| match (term(l, env).num(), term(r, env).num()) {
        (Some(a), Some(b)) => V::Num(f(a, b)),
        _ => V::Null,
    };
    match t {
        NumTerm::Col(c) => env[*c].clone(),
        NumTerm::Num(n) => V::Num(*n),
        NumTerm::Add(l, r) => bin(l, r, |a, b| a + b),
        NumTerm::Sub(l, r) => bin(l, r, |a, b| a - b),
        NumTerm::Mul(l, r) => bin(l, r, |a, b| a * b),
    }
}

/// Kleene logic; `None` is unknown.
fn truth(p: &Pred, env: &[V], fx: &Fixture) -> Option<bool> {
    match p {
        Pred::Cmp(l, op, r) => {
            let (a, b) = (term(l, env).num()?, term(r, env).num()?);
            Some(match op {
                CompOp::Eq => a == b,
                CompOp::Neq => a != b,
                CompOp::Lt => a < b,
                CompOp::Let => a <= b,
                CompOp::Gt => a > b,
                CompOp::Get => a >= b,
            })
        }
        Pred::StrEq(s) => match &env[1] {
            V::Str(b) => Some(b == s),
            _ => None,
        },
        Pred::IsNull(c) => Some(env[*c] == V::Null),
        Pred::InList(t, list) => {
            let v = term(t, env).num()?;
            Some(list.contains(&v))
        }
        Pred::Exists(c) => {
            let v = env[*c].num();
            Some(fx.s.iter().any(|(a, _)| a.is_some() && *a == v))
        }
        Pred::And(ps) => {
            let vals: Vec<Option<bool>> = ps.iter().map(|p| truth(p, env, fx)).collect();
            if vals.contains(&Some(false)) {
                Some(false)
            } else if vals.contains(&None) {
                None
            } else {
                Some(true)
            }
        }
        Pred::Or(ps) => {
            let vals: Vec<Option<bool>> = ps.iter().map(|p| truth(p, env, fx)).collect();
            if vals.contains(&Some(true)) {
                Some(true)
            } else if vals.contains(&None) {
                None
            } else {
                Some(false)
            }
        }
        Pred::Not(p) => truth(p, env, fx).map(|b| !b),
    }
}

fn aggregate(agg: &Agg, members: &[&Vec<V>]) -> V {
    let nums = |c: usize| members.iter().filter_map(|env| env[c].num()).collect::<Vec<i64>>();
    match agg {
        Agg::CountStar => V::Num(members.len() as i64),
        Agg::Count(c) => V::Num(nums(*c).len() as i64),
        Agg::Sum(c) => {
            let n = nums(*c);
            if n.is_empty() {
                V::Null
            } else {
                V::Num(n.iter().sum())
            }
        }
        Agg::Min(c) => nums(*c).into_iter().min().map_or(V::Null, V::Num),
        Agg::Max(c) => nums(*c).into_iter().max().map_or(V::Null, V::Num),
    }
}

fn dedup(rows: Vec<Vec<V>>) -> Vec<Vec<V>> {
    let mut out: Vec<Vec<V>> = Vec::new();
    for r in rows {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

fn count(rows: &[Vec<V>], r: &[V]) -> usize {
    rows.iter().filter(|x| x.as_slice() == r).count()
}

impl SetTop {
    pub fn sql(&self) -> String {
        match self {
            SetTop::Single(m) => m.sql(),
            SetTop::SetOp(kind, all, l, r) => {
                let op = match kind {
                    SetOpKind::Union => "union",
                    SetOpKind::Except => "except",
                    SetOpKind::Intersect => "intersect",
                };
                format!("({}) {op}{} ({})", l.sql(), if *all { " all" } else { "" }, r.sql())
            }
        }
    }

    fn rows(&self, fx: &Fixture) -> Vec<Vec<V>> {
        match self {
            SetTop::Single(m) => m.rows(fx),
            SetTop::SetOp(kind, all, l, r) => {
                let (a, b) = (l.rows(fx), r.rows(fx));
                let mut out = Vec::new();
                match (kind, all) {
                    (SetOpKind::Union, true) => {
                        out = a;
                        out.extend(b);
                    }
                    (SetOpKind::Union, false) => {
                        out = a;
                        out.extend(b);
                        out = dedup(out);
                    }
                    (SetOpKind::Intersect, true) => {
                        for row in dedup(a.clone()) {
                            let n = count(&a, &row).min(count(&b, &row));
                            out.extend(std::iter::repeat_n(row, n));
                        }
                    }
                    (SetOpKind::Intersect, false) => {
                        out = dedup(a).into_iter().filter(|row| b.contains(row)).collect();
                    }
                    (SetOpKind::Except, true) => {
                        for row in dedup(a.clone()) {
                            let n = count(&a, &row).saturating_sub(count(&b, &row));
                            out.extend(std::iter::repeat_n(row, n));
                        }
                    }
                    (SetOpKind::Except, false) => {
                        out = dedup(a).into_iter().filter(|row| !b.contains(row)).collect();
                    }
                }
                out
            }
        }
    }

    /// Result rows as library values, in no particular order.
    pub fn evaluate(&self, fx: &Fixture) -> Vec<Vec<Value>> {
        self.rows(fx)
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|v| match v {
                        V::Null => Value::Null,
                        V::Num(n) => Value::Number(n as f64),
                        V::Str(s) => Value::String(s),
                    })
                    .collect()
            })
            .collect()
    }

    pub fn column_types(&self) -> Vec<ColumnType> {
        match self {
            SetTop::Single(m) => m.columns(),
            SetTop::SetOp(_, _, l, _) => l.columns(),
        }
    }
}

impl Fixture {
    pub fn catalog(&self) -> Catalog {
        let num = |n: &Option<i64>| n.map_or(Value::Null, |n| Value::Number(n as f64));
        let r = Table::from_rows(
            vec![
                Column::new("a", ColumnType::Number),
                Column::new("b", ColumnType::String),
                Column::new("c", ColumnType::Number),
            ],
            self.r
                .iter()
                .map(|(a, b, c)| vec![num(a), b.clone().map_or(Value::Null, Value::String), num(c)])
                .collect(),
        )
        .unwrap();
        let s = Table::from_rows(
            vec![Column::new("a", ColumnType::Number), Column::new("d", ColumnType::Number)],
            self.s.iter().map(|(a, d)| vec![num(a), num(d)]).collect(),
        )
        .unwrap();
        let mut cat = Catalog::new();
        cat.insert("R", r);
        cat.insert("S", s);
        cat
    }
}

// ---------------------------------------------------------------------------
// Location paths by brute force

struct Flat<'a> {
    /// Preorder list of elements; index 0 is the document node.
    nodes: Vec<Option<&'a Element>>,
    parent: Vec<usize>,
}

fn flatten(doc: &XmlDoc) -> Flat<'_> {
    fn walk<'a>(e: &'a Element, parent: usize, flat: &mut Flat<'a>) {
        let me = flat.nodes.len();
        flat.nodes.push(Some(e));
        flat.parent.push(parent);
        for c in &e.children {
            if let XmlNode::Element(child) = c {
                walk(child, me, flat);
            }
        }
    }
    let mut flat = Flat {
        nodes: vec![None],
        parent: vec![usize::MAX],
    };
    walk(doc.root(), 0, &mut flat);
    flat
}

fn is_ancestor(flat: &Flat, anc: usize, mut node: usize) -> bool {
    while node != usize::MAX {
        node = flat.parent[node];
        if node == anc {
            return true;
        }
    }
    false
}

/// Serialized subtrees selected by `steps`, in document order.
pub fn select_elements(doc: &XmlDoc, steps: &[PathStep]) -> Vec<String> {
    let flat = flatten(doc);
    let mut current = vec![0usize];
    for (desc, name) in steps {
        let mut next = Vec::new();
        for j in 1..flat.nodes.len() {
            let e = flat.nodes[j].unwrap();
            if name.is_some_and(|n| n != e.name) {
                continue;
            }
            let reached = current
                .iter()
                .any(|&i| if *desc { is_ancestor(&flat, i, j) } else { flat.parent[j] == i });
            if reached {
                next.push(j);
            }
        }
        current = next;
    }
    current
        .into_iter()
        .map(|j| serialize_xml(&XmlDoc::new(flat.nodes[j].unwrap().clone())))
        .collect()
}

// ---------------------------------------------------------------------------
// XML variable bindings by nested loops

/// Rows of `select t.id, x from D t, x in t.d[steps]` computed directly.
pub fn binding_rows(docs: &[(i64, XmlDoc)], steps: &[PathStep]) -> Vec<(i64, String)> {
    let mut out = Vec::new();
    for (id, d) in docs {
        for x in select_elements(d, steps) {
            out.push((*id, x));
        }
    }
    out
}

/// Rows of `select t.id, y from D t, x in t.d[outer], y in x[inner]`.
pub fn chained_binding_rows(docs: &[(i64, XmlDoc)], outer: &[PathStep], inner: &[PathStep]) -> Vec<(i64, String)> {
    let mut out = Vec::new();
    for (id, d) in docs {
        for x in select_elements(d, outer) {
            let xd = metasql::xml::parse_xml(&x).unwrap();
            for y in select_elements(&xd, inner) {
                out.push((*id, y));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// View expansion by text substitution

/// Replaces every table name in `sql` that names a view by the view's
/// defining query in parentheses. Words inside string literals are kept.
pub fn inline_views(sql: &str, views: &[(String, String)]) -> String {
    let mut out = String::new();
    let mut chars = sql.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\'' {
            out.push(c);
            for d in chars.by_ref() {
                out.push(d);
                if d == '\'' {
                    break;
                }
            }
        } else if c.is_alphabetic() || c == '_' {
            let mut word = c.to_string();
            while let Some(&d) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    word.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            match views.iter().find(|(name, _)| *name == word) {
                Some((_, def)) => {
                    out.push('(');
                    out.push_str(def.trim());
                    out.push(')');
                }
                None => out.push_str(&word),
            }
        } else {
            out.push(c);
        }
    }
    out
}
