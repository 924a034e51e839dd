//! Meta-SQL programs: function declarations followed by one extended query,
//! compiled into an executable plan.
//!
//! Compilation turns every XML variable binding `x in y[e]` into a lateral
//! EXTRACT over `y`, turns `x in UEVAL(q)` into a lateral UEVAL, rewrites
//! references to such variables into `x.result`, and infers the output
//! scheme of every EVAL from the `t.col` references to its range variable.

use thiserror::Error;

use crate::engine::{Catalog, Engine, ExecError, Table};
use crate::error::Error;
use crate::runtime::{Functions, RESULT_COLUMN};
use crate::sql::{
    is_reserved, parse_query_from, unparse_scalar, AggFunc, Aggregate, ColumnRef, CondBody, CondExpr, CondTest, InTest,
    Operand, Query, Scalar, SelValue, SelectList, SelectQuery, SqlError, TableRef, TableSource,
};
use crate::value::ColumnType;
use crate::xform::{parse_function, TransformError, TransformProgram};
use crate::xpath::{parse_xpath, Expr, XPathError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(#[from] SqlError),
    #[error(transparent)]
    Function(#[from] TransformError),
    #[error("function `{0}` is declared twice")]
    DuplicateFunction(String),
    #[error("`{0}` is reserved and cannot name a function")]
    ReservedName(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function {function} takes {expected} argument(s) including the input document, got {found}")]
    FunctionArity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is used before the from item that binds it")]
    ForwardReference(String),
    #[error("range variable `{0}` is not bound")]
    UnboundRangeVariable(String),
    #[error("range variable `{0}` is bound twice in one from clause")]
    DuplicateRangeVariable(String),
    #[error("{0} is not of type xml")]
    NotXmlTyped(String),
    #[error("cannot infer the output scheme of EVAL variable `{0}` from a wildcard; name its columns or use UEVAL")]
    WildcardOnEval(String),
    #[error("invalid path `{path}`: {source}")]
    InvalidPath { path: String, source: XPathError },
    #[error("path `{0}` does not select nodes")]
    PathNotNodeSet(String),
}

/// A parsed program: declared functions and the query that uses them.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaQuerySource {
    pub functions: Vec<TransformProgram>,
    pub query_text: String,
    pub query: Query,
}

/// A compiled program. The query contains only lateral table functions
/// (EXTRACT, UEVAL, EVAL with a scheme), calls and CMB beyond plain SQL.
#[derive(Debug, Clone)]
pub struct MetaQueryPlan {
    pub query: Query,
    pub functions: Functions,
}

impl MetaQueryPlan {
    pub fn execute(&self, catalog: &Catalog) -> Result<Table, ExecError> {
        Engine::new(catalog, &self.functions).execute(&self.query)
    }

    pub fn execute_with_limit(&self, catalog: &Catalog, depth_limit: usize) -> Result<Table, ExecError> {
        Engine::new(catalog, &self.functions)
            .with_depth_limit(depth_limit)
            .execute(&self.query)
    }
}

const RESERVED_FUNCTIONS: &[&str] = &["extract", "cmb", "eval", "ueval", "table", "avg", "count", "max", "min", "sum"];

fn skip_trivia(text: &str, mut pos: usize) -> usize {
    loop {
        let rest = &text[pos..];
        let trimmed = rest.trim_start();
        pos += rest.len() - trimmed.len();
        if trimmed.starts_with("--") {
            pos += trimmed.find('\n').unwrap_or(trimmed.len());
        } else {
            return pos;
        }
    }
}

fn starts_with_keyword(text: &str, kw: &str) -> bool {
    text.len() >= kw.len()
        && text[..kw.len()].eq_ignore_ascii_case(kw)
        && !text[kw.len()..].starts_with(|c: char| c.is_alphanumeric() || c == '_')
}

/// Splits a program into its function declarations and its query.
pub fn parse_source(text: &str) -> Result<MetaQuerySource, CompileError> {
    let mut functions: Vec<TransformProgram> = Vec::new();
    let mut pos = skip_trivia(text, 0);
    while starts_with_keyword(&text[pos..], "function") {
        let (program, end) = parse_function(text, pos)?;
        let lower = program.name.to_ascii_lowercase();
        if RESERVED_FUNCTIONS.contains(&lower.as_str()) || is_reserved(&lower) {
            return Err(CompileError::ReservedName(program.name));
        }
        if functions.iter().any(|f| f.name.eq_ignore_ascii_case(&program.name)) {
            return Err(CompileError::DuplicateFunction(program.name));
        }
        functions.push(program);
        pos = skip_trivia(text, end);
    }
    let query = parse_query_from(text, pos, true)?;
    Ok(MetaQuerySource {
        functions,
        query_text: text[pos..].to_string(),
        query,
    })
}

/// Compiles without catalog knowledge; column types are checked at run time.
pub fn rewrite_bindings(source: &MetaQuerySource) -> Result<MetaQueryPlan, CompileError> {
    compile(source, None)
}

/// Compiles `source`. With a catalog, xml-typed positions are also checked
/// against the declared column types.
pub fn compile(source: &MetaQuerySource, catalog: Option<&Catalog>) -> Result<MetaQueryPlan, CompileError> {
    let mut functions = Functions::new();
    for f in &source.functions {
        functions.insert(f.clone());
    }
    let mut query = source.query.clone();
    let mut c = Compiler {
        functions: &functions,
        catalog,
        levels: Vec::new(),
        mentions: Vec::new(),
        evals: 0,
    };
    c.query(&mut query)?;
    Ok(MetaQueryPlan { query, functions })
}

pub fn compile_text(text: &str, catalog: Option<&Catalog>) -> Result<MetaQueryPlan, CompileError> {
    compile(&parse_source(text)?, catalog)
}

/// Parses, compiles and executes a program.
pub fn run(text: &str, catalog: &Catalog) -> Result<Table, Error> {
    let plan = compile_text(text, Some(catalog))?;
    Ok(plan.execute(catalog)?)
}

/// The inferred scheme of the EVAL bound to `eval_var`.
pub fn infer_output_scheme(plan: &MetaQueryPlan, eval_var: &str) -> Result<Vec<String>, CompileError> {
    fn find(q: &Query, var: &str) -> Option<Vec<String>> {
        match q {
            Query::SetOp { left, right, .. } => find(left, var).or_else(|| find(right, var)),
            Query::Select(s) => s.from.iter().find_map(|t| match &t.source {
                TableSource::Eval { scheme, .. } if t.alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(var)) => {
                    scheme.clone()
                }
                TableSource::Query(q) => find(q, var),
                _ => None,
            }),
        }
    }
    find(&plan.query, eval_var).ok_or_else(|| CompileError::UnboundRangeVariable(eval_var.to_string()))
}

#[derive(Debug, Clone)]
enum Kind {
    Table(Option<Vec<(String, ColumnType)>>),
    Derived,
    XmlVar,
    Eval(usize),
}

#[derive(Debug, Clone)]
struct Bound {
    name: Option<String>,
    kind: Kind,
}

struct Level {
    bound: Vec<Bound>,
    /// Range names of this level's from items, in order.
    names: Vec<Option<String>>,
    /// Items of `names` already in scope.
    visible: usize,
}

struct Compiler<'c> {
    functions: &'c Functions,
    catalog: Option<&'c Catalog>,
    levels: Vec<Level>,
    /// Columns referenced through EVAL variables, in textual order.
    mentions: Vec<(usize, String)>,
    evals: usize,
}

fn range_name(t: &TableRef) -> Option<String> {
    match (&t.alias, &t.source) {
        (Some(a), _) => Some(a.clone()),
        (None, TableSource::Table(n)) => Some(n.clone()),
        _ => None,
    }
}

fn same(a: &Option<String>, b: &str) -> bool {
    a.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(b))
}

impl Compiler<'_> {
    fn level(&mut self) -> &mut Level {
        self.levels.last_mut().expect("inside a select")
    }

    fn lookup(&self, name: &str) -> Option<&Bound> {
        self.levels
            .iter()
            .rev()
            .find_map(|l| l.bound[..l.visible].iter().find(|b| same(&b.name, name)))
    }

    fn is_pending(&self, name: &str) -> bool {
        self.levels
            .iter()
            .any(|l| l.names[l.visible..].iter().any(|n| same(n, name)))
    }

    fn unbound(&self, name: &str) -> CompileError {
        if self.is_pending(name) {
            CompileError::ForwardReference(name.to_string())
        } else {
            CompileError::UnboundRangeVariable(name.to_string())
        }
    }

    /// The visible XML variable a bare name refers to.
    fn xml_var(&self, name: &str) -> Option<String> {
        match self.lookup(name) {
            Some(Bound {
                name: Some(n),
                kind: Kind::XmlVar,
            }) => Some(n.clone()),
            _ => None,
        }
    }

    fn query(&mut self, q: &mut Query) -> Result<(), CompileError> {
        match q {
            Query::Select(s) => self.select(s),
            Query::SetOp { left, right, .. } => {
                self.query(left)?;
                self.query(right)
            }
        }
    }

    fn select(&mut self, s: &mut SelectQuery) -> Result<(), CompileError> {
        self.levels.push(Level {
            bound: Vec::new(),
            names: s.from.iter().map(range_name).collect(),
            visible: 0,
        });
        let m0 = self.mentions.len();
        for (i, t) in s.from.iter_mut().enumerate() {
            self.level().visible = i;
            let kind = self.bind_from_item(t)?;
            let name = range_name(t);
            if let Some(n) = &name {
                if self.level().bound.iter().any(|b| same(&b.name, n)) {
                    return Err(CompileError::DuplicateRangeVariable(n.clone()));
                }
            }
            self.level().bound.push(Bound { name, kind });
        }
        let n = s.from.len();
        self.level().visible = n;
        let m1 = self.mentions.len();
        self.select_list(&mut s.select.items)?;
        let m2 = self.mentions.len();
        if let Some(w) = &mut s.where_clause {
            self.cond(w)?;
        }
        for c in &mut s.group_by {
            self.column_ref(c)?;
        }
        if let Some(h) = &mut s.having {
            self.cond(h)?;
        }
        // The from clause was walked first for scoping; restore textual order.
        let mut tail = self.mentions.split_off(m0);
        let rest = tail.split_off(m1 - m0);
        let (select_part, after) = rest.split_at(m2 - m1);
        self.mentions.extend(select_part.iter().cloned());
        self.mentions.extend(tail);
        self.mentions.extend(after.iter().cloned());

        let level = self.levels.pop().expect("pushed above");
        for (t, b) in s.from.iter_mut().zip(&level.bound) {
            if let (TableSource::Eval { scheme, .. }, Kind::Eval(id)) = (&mut t.source, &b.kind) {
                let mut cols: Vec<String> = Vec::new();
                for (k, c) in &self.mentions {
                    if k == id && !cols.iter().any(|x| x.eq_ignore_ascii_case(c)) {
                        cols.push(c.clone());
                    }
                }
                *scheme = Some(cols);
            }
        }
        Ok(())
    }

    fn check_path(&self, path: &str) -> Result<(), CompileError> {
        match parse_xpath(path) {
            Ok(Expr::Path(_)) => Ok(()),
            Ok(_) => Err(CompileError::PathNotNodeSet(path.to_string())),
            Err(source) => Err(CompileError::InvalidPath {
                path: path.to_string(),
                source,
            }),
        }
    }

    fn bind_from_item(&mut self, t: &mut TableRef) -> Result<Kind, CompileError> {
        let kind = match &mut t.source {
            TableSource::Table(n) => Kind::Table(self.catalog.and_then(|c| c.get(n)).map(|table| {
                table.columns.iter().map(|c| (c.name.clone(), c.ty)).collect()
            })),
            TableSource::Query(q) => {
                self.query(q)?;
                Kind::Derived
            }
            TableSource::XmlBinding { source, path } | TableSource::Extract { source, path } => {
                self.check_path(path)?;
                self.scalar(source)?;
                self.expect_xml(source, "XML variable source")?;
                Kind::XmlVar
            }
            TableSource::UevalIn { arg } | TableSource::Ueval { arg } => {
                self.scalar(arg)?;
                self.expect_xml(arg, "UEVAL argument")?;
                Kind::XmlVar
            }
            TableSource::Eval { arg, .. } => {
                self.scalar(arg)?;
                self.expect_xml(arg, "EVAL argument")?;
                self.evals += 1;
                Kind::Eval(self.evals)
            }
        };
        let source = std::mem::replace(&mut t.source, TableSource::Table(String::new()));
        t.source = match source {
            TableSource::XmlBinding { source, path } => TableSource::Extract { source, path },
            TableSource::UevalIn { arg } => TableSource::Ueval { arg },
            other => other,
        };
        Ok(kind)
    }

    fn eval_var_in_scope(&self) -> Option<String> {
        let l = self.levels.last()?;
        l.bound[..l.visible].iter().find_map(|b| match b.kind {
            Kind::Eval(_) => b.name.clone(),
            _ => None,
        })
    }

    fn select_list(&mut self, items: &mut SelectList) -> Result<(), CompileError> {
        let SelectList::Items(items) = items else {
            return match self.eval_var_in_scope() {
                Some(v) => Err(CompileError::WildcardOnEval(v)),
                None => Ok(()),
            };
        };
        for item in items {
            match &mut item.value {
                SelValue::Column(c) => {
                    if let Some(var) = self.xml_var(c) {
                        if item.alias.is_none() {
                            item.alias = Some(c.clone());
                        }
                        item.value = SelValue::Qualified {
                            rangevar: var,
                            column: RESULT_COLUMN.to_string(),
                        };
                    }
                }
                SelValue::Qualified { rangevar, column } => self.qualified(rangevar, column)?,
                SelValue::QualifiedWildcard(rv) => match self.lookup(rv) {
                    Some(Bound {
                        kind: Kind::Eval(_), ..
                    }) => return Err(CompileError::WildcardOnEval(rv.clone())),
                    Some(_) => {}
                    None => return Err(self.unbound(rv)),
                },
                SelValue::Scalar(s) => self.scalar(s)?,
                SelValue::Aggregate(a) => self.aggregate(a)?,
            }
        }
        Ok(())
    }

    fn qualified(&mut self, rv: &str, column: &str) -> Result<(), CompileError> {
        match self.lookup(rv) {
            Some(Bound {
                kind: Kind::Eval(id), ..
            }) => {
                self.mentions.push((*id, column.to_string()));
                Ok(())
            }
            Some(_) => Ok(()),
            None => Err(self.unbound(rv)),
        }
    }

    fn column_ref(&mut self, c: &mut ColumnRef) -> Result<(), CompileError> {
        match &c.rangevar {
            Some(rv) => {
                let rv = rv.clone();
                self.qualified(&rv, &c.column)
            }
            None => {
                if let Some(var) = self.xml_var(&c.column) {
                    c.rangevar = Some(var);
                    c.column = RESULT_COLUMN.to_string();
                } else if self.lookup(&c.column).is_none() && self.is_pending(&c.column) {
                    return Err(CompileError::ForwardReference(c.column.clone()));
                }
                Ok(())
            }
        }
    }

    fn scalar(&mut self, s: &mut Scalar) -> Result<(), CompileError> {
        match s {
            Scalar::Arith { lhs, rhs, .. } => {
                self.scalar(lhs)?;
                self.scalar(rhs)
            }
            Scalar::Concat(l, r) => {
                self.scalar(l)?;
                self.scalar(r)
            }
            Scalar::Column(c) => self.column_ref(c),
            Scalar::Aggregate(a) => self.aggregate(a),
            Scalar::Constant(_) => Ok(()),
            Scalar::Query(q) => self.query(q),
            Scalar::Call { name, args } => {
                let program = self
                    .functions
                    .get(name)
                    .ok_or_else(|| CompileError::UnknownFunction(name.clone()))?;
                if args.len() != program.params.len() + 1 {
                    return Err(CompileError::FunctionArity {
                        function: program.name.clone(),
                        expected: program.params.len() + 1,
                        found: args.len(),
                    });
                }
                for a in args.iter_mut() {
                    self.scalar(a)?;
                }
                self.expect_xml(&args[0], &format!("input document of {name}"))
            }
        }
    }

    fn aggregate(&mut self, a: &mut Aggregate) -> Result<(), CompileError> {
        if let Aggregate::Func { func, operand, .. } = a {
            self.scalar(operand)?;
            if *func == AggFunc::Cmb {
                self.expect_xml(operand, "CMB operand")?;
            }
        }
        Ok(())
    }

    fn operand(&mut self, o: &mut Operand) -> Result<(), CompileError> {
        match o {
            Operand::Column(c) => self.column_ref(c),
            Operand::Scalar(s) => self.scalar(s),
        }
    }

    fn cond(&mut self, c: &mut CondExpr) -> Result<(), CompileError> {
        match &mut c.body {
            CondBody::And(parts) | CondBody::Or(parts) => parts.iter_mut().try_for_each(|p| self.cond(p)),
            CondBody::Test(t) => match &mut **t {
                CondTest::Comparison { lhs, rhs, .. } => {
                    lhs.iter_mut().try_for_each(|o| self.operand(o))?;
                    rhs.iter_mut().try_for_each(|o| self.operand(o))
                }
                CondTest::Like {
                    value,
                    pattern,
                    escape,
                } => {
                    self.operand(value)?;
                    self.operand(pattern)?;
                    escape.iter_mut().try_for_each(|o| self.operand(o))
                }
                CondTest::In(InTest::List { value, list }) => {
                    self.scalar(value)?;
                    list.iter_mut().try_for_each(|s| self.scalar(s))
                }
                CondTest::In(InTest::Subquery { row, query })
                | CondTest::Match { row, query, .. }
                | CondTest::AllOrAny { row, query, .. } => {
                    row.iter_mut().try_for_each(|o| self.operand(o))?;
                    self.query(query)
                }
                CondTest::Exists(q) | CondTest::Unique(q) => self.query(q),
                CondTest::Overlaps(s) => s.iter_mut().try_for_each(|x| self.scalar(x)),
                CondTest::IsNull(row) => row.iter_mut().try_for_each(|o| self.operand(o)),
            },
        }
    }

    fn expect_xml(&self, s: &Scalar, what: &str) -> Result<(), CompileError> {
        match self.static_type(s) {
            Some(t) if t != ColumnType::Xml => Err(CompileError::NotXmlTyped(format!("{what} `{}`", unparse_scalar(s)))),
            _ => Ok(()),
        }
    }

    /// The type of `s` where it is known before execution.
    fn static_type(&self, s: &Scalar) -> Option<ColumnType> {
        let table_column = |cols: &Option<Vec<(String, ColumnType)>>, name: &str| {
            cols.as_ref()?
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(name))
                .map(|(_, t)| *t)
        };
        match s {
            Scalar::Arith { .. } => Some(ColumnType::Number),
            Scalar::Concat(..) => Some(ColumnType::String),
            Scalar::Constant(c) if c.is_number() => Some(ColumnType::Number),
            Scalar::Constant(_) => Some(ColumnType::String),
            Scalar::Call { name, .. } => self.functions.get(name).map(|p| p.return_type),
            Scalar::Query(_) => None,
            Scalar::Aggregate(a) => match &**a {
                Aggregate::CountAll => Some(ColumnType::Number),
                Aggregate::Func { func, operand, .. } => match func {
                    AggFunc::Count | AggFunc::Sum | AggFunc::Avg => Some(ColumnType::Number),
                    AggFunc::Cmb => Some(ColumnType::Xml),
                    AggFunc::Max | AggFunc::Min => self.static_type(operand),
                },
            },
            Scalar::Column(c) => match &c.rangevar {
                Some(rv) => match &self.lookup(rv)?.kind {
                    Kind::XmlVar => Some(ColumnType::Xml),
                    Kind::Table(cols) => table_column(cols, &c.column),
                    _ => None,
                },
                None => {
                    let l = self.levels.last()?;
                    let hits: Vec<ColumnType> = l.bound[..l.visible]
                        .iter()
                        .filter_map(|b| match &b.kind {
                            Kind::Table(cols) => table_column(cols, &c.column),
                            _ => None,
                        })
                        .collect();
                    match hits.as_slice() {
                        [t] => Some(*t),
                        _ => None,
                    }
                }
            },
        }
    }
}
