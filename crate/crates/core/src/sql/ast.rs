//! Syntax trees for the SQL-92 select subset, mirroring the XML encoding
//! element for element. A handful of variants marked *extension* exist only
//! in Meta-SQL plans and have no encoding in stored query documents.

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Select(Box<SelectQuery>),
    SetOp {
        kind: SetOpKind,
        all: bool,
        left: Box<Query>,
        right: Box<Query>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOpKind {
    Union,
    Except,
    Intersect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectQuery {
    pub select: SelectClause,
    pub from: Vec<TableRef>,
    pub where_clause: Option<CondExpr>,
    /// Empty when absent.
    pub group_by: Vec<ColumnRef>,
    pub having: Option<CondExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    All,
    Distinct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectClause {
    pub quantifier: Option<Quantifier>,
    pub items: SelectList,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectList {
    Wildcard,
    Items(Vec<SelItem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelItem {
    pub value: SelValue,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelValue {
    Column(String),
    Qualified { rangevar: String, column: String },
    QualifiedWildcard(String),
    Scalar(Scalar),
    Aggregate(Aggregate),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub rangevar: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn new(rangevar: Option<&str>, column: &str) -> Self {
        ColumnRef {
            rangevar: rangevar.map(str::to_string),
            column: column.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Arith {
        op: ArithOp,
        lhs: Box<Scalar>,
        rhs: Box<Scalar>,
    },
    Concat(Box<Scalar>, Box<Scalar>),
    Column(ColumnRef),
    Aggregate(Box<Aggregate>),
    Constant(Constant),
    Query(Box<Query>),
    /// Extension: call of a declared transform function.
    Call { name: String, args: Vec<Scalar> },
}

/// A literal, stored by lexeme. It is numeric iff the lexeme is a decimal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constant(pub String);

impl Constant {
    pub fn is_number(&self) -> bool {
        crate::xpath::parse_decimal(&self.0).is_some()
    }

    pub fn number(&self) -> Option<f64> {
        crate::xpath::parse_decimal(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Avg,
    Count,
    Max,
    Min,
    Sum,
    /// Extension: combine XML values under a `cmb` root.
    Cmb,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Avg => "avg",
            AggFunc::Count => "count",
            AggFunc::Max => "max",
            AggFunc::Min => "min",
            AggFunc::Sum => "sum",
            AggFunc::Cmb => "cmb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregate {
    CountAll,
    Func {
        func: AggFunc,
        quantifier: Option<Quantifier>,
        operand: Box<Scalar>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondExpr {
    pub negated: bool,
    pub body: CondBody,
}

impl CondExpr {
    pub fn test(t: CondTest) -> Self {
        CondExpr {
            negated: false,
            body: CondBody::Test(Box::new(t)),
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CondBody {
    Test(Box<CondTest>),
    /// Two or more operands.
    And(Vec<CondExpr>),
    /// Two or more operands.
    Or(Vec<CondExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompOp {
    Eq,
    Lt,
    Let,
    Gt,
    Get,
    Neq,
}

impl CompOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Eq => "=",
            CompOp::Lt => "<",
            CompOp::Let => "<=",
            CompOp::Gt => ">",
            CompOp::Get => ">=",
            CompOp::Neq => "<>",
        }
    }
}

/// A row-constructor element: a bare column reference or a scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(ColumnRef),
    Scalar(Scalar),
}

impl Operand {
    /// The operand viewed as a scalar expression.
    pub fn to_scalar(&self) -> Scalar {
        match self {
            Operand::Column(c) => Scalar::Column(c.clone()),
            Operand::Scalar(s) => s.clone(),
        }
    }

    /// Parser normal form: bare column references stay unwrapped.
    pub fn from_scalar(s: Scalar) -> Self {
        match s {
            Scalar::Column(c) => Operand::Column(c),
            s => Operand::Scalar(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchKind {
    Partial,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllAny {
    All,
    Any,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CondTest {
    Comparison {
        lhs: Vec<Operand>,
        op: CompOp,
        rhs: Vec<Operand>,
    },
    Like {
        value: Operand,
        pattern: Operand,
        escape: Option<Operand>,
    },
    In(InTest),
    Match {
        row: Vec<Operand>,
        unique: bool,
        kind: Option<MatchKind>,
        query: Box<Query>,
    },
    AllOrAny {
        row: Vec<Operand>,
        op: CompOp,
        /// `None` is written `some`.
        quantifier: Option<AllAny>,
        query: Box<Query>,
    },
    Exists(Box<Query>),
    Unique(Box<Query>),
    Overlaps(Box<[Scalar; 4]>),
    IsNull(Vec<Operand>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InTest {
    Subquery { row: Vec<Operand>, query: Box<Query> },
    List { value: Scalar, list: Vec<Scalar> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub source: TableSource,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    Table(String),
    Query(Box<Query>),
    /// Extension: `alias in source[path]`.
    XmlBinding { source: Scalar, path: String },
    /// Extension: `alias in UEVAL(arg)`.
    UevalIn { arg: Scalar },
    /// Extension: `EVAL(arg) alias`; the scheme is filled in by the compiler.
    Eval {
        arg: Scalar,
        scheme: Option<Vec<String>>,
    },
    /// Extension: `table(EXTRACT(source, 'path')) alias`.
    Extract { source: Scalar, path: String },
    /// Extension: `table(UEVAL(arg)) alias`.
    Ueval { arg: Scalar },
}

impl TableSource {
    pub fn is_extension(&self) -> bool {
        !matches!(self, TableSource::Table(_) | TableSource::Query(_))
    }
}
