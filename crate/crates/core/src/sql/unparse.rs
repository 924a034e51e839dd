//! SQL text generation. Compound operands are always parenthesized, so the
//! output reparses to the same tree without precedence reasoning.

use std::collections::HashSet;
use std::fmt::Write;

use super::ast::*;
use super::parser::is_reserved;

/// Renders `q` as SQL text. Derived tables without an alias receive fresh
/// names `dt1`, `dt2`, ... that do not clash with any word in the query.
pub fn unparse_sql(q: &Query) -> String {
    let mut probe = Unparser {
        synthetic: false,
        taken: HashSet::new(),
        next: 0,
    };
    let plain = probe.query(q);
    let taken = plain
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .map(str::to_ascii_lowercase)
        .collect();
    let mut u = Unparser {
        synthetic: true,
        taken,
        next: 0,
    };
    u.query(q)
}

pub fn quote_ident(name: &str) -> String {
    let plain = name.starts_with(|c: char| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_')
        && !is_reserved(name);
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

fn quote_str(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

struct Unparser {
    synthetic: bool,
    taken: HashSet<String>,
    next: usize,
}

impl Unparser {
    fn fresh(&mut self) -> String {
        loop {
            self.next += 1;
            let name = format!("dt{}", self.next);
            if !self.taken.contains(&name) {
                return name;
            }
        }
    }

    fn query(&mut self, q: &Query) -> String {
        match q {
            Query::Select(s) => self.select(s),
            Query::SetOp {
                kind,
                all,
                left,
                right,
            } => {
                let op = match kind {
                    SetOpKind::Union => "union",
                    SetOpKind::Except => "except",
                    SetOpKind::Intersect => "intersect",
                };
                let l = self.query(left);
                let r = self.query(right);
                format!("({l}) {op}{} ({r})", if *all { " all" } else { "" })
            }
        }
    }

    fn select(&mut self, s: &SelectQuery) -> String {
        let mut out = String::from("select ");
        match s.select.quantifier {
            Some(Quantifier::Distinct) => out.push_str("distinct "),
            Some(Quantifier::All) => out.push_str("all "),
            None => {}
        }
        match &s.select.items {
            SelectList::Wildcard => out.push('*'),
            SelectList::Items(items) => {
                let parts: Vec<String> = items.iter().map(|i| self.sel_item(i)).collect();
                out.push_str(&parts.join(", "));
            }
        }
        out.push_str(" from ");
        let refs: Vec<String> = s.from.iter().map(|t| self.table_ref(t)).collect();
        out.push_str(&refs.join(", "));
        if let Some(w) = &s.where_clause {
            let _ = write!(out, " where {}", self.cond(w));
        }
        if !s.group_by.is_empty() {
            let cols: Vec<String> = s.group_by.iter().map(column_ref).collect();
            let _ = write!(out, " group by {}", cols.join(", "));
        }
        if let Some(h) = &s.having {
            let _ = write!(out, " having {}", self.cond(h));
        }
        out
    }

    fn sel_item(&mut self, item: &SelItem) -> String {
        let mut out = match &item.value {
            SelValue::Column(c) => quote_ident(c),
            SelValue::Qualified { rangevar, column } => format!("{}.{}", quote_ident(rangevar), quote_ident(column)),
            SelValue::QualifiedWildcard(rv) => format!("{}.*", quote_ident(rv)),
            SelValue::Scalar(s) => self.scalar(s),
            SelValue::Aggregate(a) => self.aggregate(a),
        };
        if let Some(a) = &item.alias {
            let _ = write!(out, " as {}", quote_ident(a));
        }
        out
    }

    fn table_ref(&mut self, t: &TableRef) -> String {
        let alias = |u: &mut Self| match &t.alias {
            Some(a) => quote_ident(a),
            None if u.synthetic => u.fresh(),
            None => String::new(),
        };
        match &t.source {
            TableSource::Table(name) => match &t.alias {
                Some(a) => format!("{} {}", quote_ident(name), quote_ident(a)),
                None => quote_ident(name),
            },
            TableSource::Query(q) => {
                let body = self.query(q);
                let a = alias(self);
                format!("({body}) {a}").trim_end().to_string()
            }
            TableSource::XmlBinding { source, path } => {
                format!("{} in {}[{path}]", alias(self), self.scalar(source))
            }
            TableSource::UevalIn { arg } => format!("{} in UEVAL({})", alias(self), self.scalar(arg)),
            TableSource::Eval { arg, .. } => {
                let body = self.scalar(arg);
                format!("EVAL({body}) {}", alias(self))
            }
            TableSource::Extract { source, path } => {
                let body = self.scalar(source);
                format!("table(EXTRACT({body}, {})) {}", quote_str(path), alias(self))
            }
            TableSource::Ueval { arg } => {
                let body = self.scalar(arg);
                format!("table(UEVAL({body})) {}", alias(self))
            }
        }
    }

    fn scalar(&mut self, s: &Scalar) -> String {
        match s {
            Scalar::Arith { op, lhs, rhs } => {
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                format!("{} {sym} {}", self.child(lhs), self.child(rhs))
            }
            Scalar::Concat(l, r) => format!("{} || {}", self.child(l), self.child(r)),
            Scalar::Column(c) => column_ref(c),
            Scalar::Aggregate(a) => self.aggregate(a),
            Scalar::Constant(c) if c.is_number() => c.0.clone(),
            Scalar::Constant(c) => quote_str(&c.0),
            Scalar::Query(q) => format!("({})", self.query(q)),
            Scalar::Call { name, args } => {
                let parts: Vec<String> = args.iter().map(|a| self.scalar(a)).collect();
                format!("{}({})", quote_ident(name), parts.join(", "))
            }
        }
    }

    fn child(&mut self, s: &Scalar) -> String {
        match s {
            Scalar::Arith { .. } | Scalar::Concat(..) => format!("({})", self.scalar(s)),
            _ => self.scalar(s),
        }
    }

    fn aggregate(&mut self, a: &Aggregate) -> String {
        match a {
            Aggregate::CountAll => "count(*)".to_string(),
            Aggregate::Func {
                func,
                quantifier,
                operand,
            } => {
                let q = match quantifier {
                    Some(Quantifier::Distinct) => "distinct ",
                    Some(Quantifier::All) => "all ",
                    None => "",
                };
                format!("{}({q}{})", func.name(), self.scalar(operand))
            }
        }
    }

    fn operand(&mut self, o: &Operand) -> String {
        match o {
            Operand::Column(c) => column_ref(c),
            Operand::Scalar(s) => self.scalar(s),
        }
    }

    fn row(&mut self, row: &[Operand]) -> String {
        match row {
            [single] => self.operand(single),
            many => {
                let parts: Vec<String> = many.iter().map(|o| self.operand(o)).collect();
                format!("({})", parts.join(", "))
            }
        }
    }

    fn cond(&mut self, c: &CondExpr) -> String {
        let body = self.cond_body(&c.body);
        if c.negated {
            format!("not ({body})")
        } else {
            body
        }
    }

    fn cond_body(&mut self, b: &CondBody) -> String {
        match b {
            CondBody::Test(t) => self.test(t),
            CondBody::And(parts) | CondBody::Or(parts) => {
                let sep = if matches!(b, CondBody::And(_)) { " and " } else { " or " };
                let texts: Vec<String> = parts
                    .iter()
                    .map(|p| match (&p.body, p.negated) {
                        (CondBody::Test(_), _) | (_, true) => self.cond(p),
                        _ => format!("({})", self.cond(p)),
                    })
                    .collect();
                texts.join(sep)
            }
        }
    }

    fn test(&mut self, t: &CondTest) -> String {
        match t {
            CondTest::Comparison { lhs, op, rhs } => {
                format!("{} {} {}", self.row(lhs), op.symbol(), self.row(rhs))
            }
            CondTest::Like {
                value,
                pattern,
                escape,
            } => {
                let mut s = format!("{} like {}", self.operand(value), self.operand(pattern));
                if let Some(e) = escape {
                    let _ = write!(s, " escape {}", self.operand(e));
                }
                s
            }
            CondTest::In(InTest::Subquery { row, query }) => {
                format!("{} in ({})", self.row(row), self.query(query))
            }
            CondTest::In(InTest::List { value, list }) => {
                let parts: Vec<String> = list.iter().map(|s| self.scalar(s)).collect();
                format!("{} in ({})", self.scalar(value), parts.join(", "))
            }
            CondTest::Match {
                row,
                unique,
                kind,
                query,
            } => {
                let mut s = format!("{} match ", self.row(row));
                if *unique {
                    s.push_str("unique ");
                }
                match kind {
                    Some(MatchKind::Partial) => s.push_str("partial "),
                    Some(MatchKind::Full) => s.push_str("full "),
                    None => {}
                }
                let _ = write!(s, "({})", self.query(query));
                s
            }
            CondTest::AllOrAny {
                row,
                op,
                quantifier,
                query,
            } => {
                let q = match quantifier {
                    Some(AllAny::All) => "all",
                    Some(AllAny::Any) => "any",
                    None => "some",
                };
                format!("{} {} {q} ({})", self.row(row), op.symbol(), self.query(query))
            }
            CondTest::Exists(q) => format!("exists ({})", self.query(q)),
            CondTest::Unique(q) => format!("unique ({})", self.query(q)),
            CondTest::Overlaps(s) => {
                let [a, b, c, d] = &**s;
                format!(
                    "({}, {}) overlaps ({}, {})",
                    self.scalar(a),
                    self.scalar(b),
                    self.scalar(c),
                    self.scalar(d)
                )
            }
            CondTest::IsNull(row) => format!("{} is null", self.row(row)),
        }
    }
}

fn column_ref(c: &ColumnRef) -> String {
    match &c.rangevar {
        Some(rv) => format!("{}.{}", quote_ident(rv), quote_ident(&c.column)),
        None => quote_ident(&c.column),
    }
}

/// Renders one scalar expression, for diagnostics.
pub(crate) fn unparse_scalar(s: &Scalar) -> String {
    Unparser {
        synthetic: false,
        taken: HashSet::new(),
        next: 0,
    }
    .scalar(s)
}
