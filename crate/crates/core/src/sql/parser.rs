//! Recursive-descent parser for the select-statement subset, with an
//! optional Meta-SQL mode accepting function calls, `CMB`, XML variable
//! bindings and dynamic evaluation in the from-clause.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SqlError;
use crate::xml::line_col;

pub(crate) const RESERVED: &[&str] = &[
    "all", "and", "any", "as", "by", "distinct", "escape", "except", "exists", "from", "full", "group", "having",
    "in", "intersect", "is", "like", "match", "not", "null", "or", "overlaps", "partial", "select", "some",
    "union", "unique", "where",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses a plain SQL select-statement.
pub fn parse_sql(text: &str) -> Result<Query, SqlError> {
    parse_query_from(text, 0, false)
}

/// Parses a query in Meta-SQL mode.
pub fn parse_meta_query(text: &str) -> Result<Query, SqlError> {
    parse_query_from(text, 0, true)
}

/// Parses the query starting at byte `offset` of `text`; positions in errors
/// refer to the whole text.
pub(crate) fn parse_query_from(text: &str, offset: usize, meta: bool) -> Result<Query, SqlError> {
    let mut toks = tokenize(&text[offset..]).map_err(|e| shift(e, text, offset))?;
    for t in &mut toks {
        t.pos += offset;
    }
    let mut p = Parser {
        text,
        toks,
        i: 0,
        meta,
    };
    let q = p.query_expr()?;
    p.eat(&Tok::Semi);
    if p.i < p.toks.len() {
        return Err(p.err(&["end of statement"]));
    }
    Ok(q)
}

fn shift(e: SqlError, text: &str, offset: usize) -> SqlError {
    match e {
        SqlError::Syntax {
            position,
            expected,
            found,
            ..
        } => {
            let (line, column) = line_col(text, position + offset);
            SqlError::Syntax {
                position: position + offset,
                line,
                column,
                expected,
                found,
            }
        }
        other => other,
    }
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    i: usize,
    meta: bool,
}

type PResult<T> = Result<T, SqlError>;

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|t| &t.tok)
    }

    fn err(&self, expected: &[&str]) -> SqlError {
        let position = self.toks.get(self.i).map_or(self.text.len(), |t| t.pos);
        let (line, column) = line_col(self.text, position);
        SqlError::Syntax {
            position,
            line,
            column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map_or("end of input".to_string(), Tok::describe),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(&[what]))
        }
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(&[kw]))
        }
    }

    fn is_ident_at(&self, k: usize) -> bool {
        match self.peek_at(k) {
            Some(Tok::Word(w)) => !is_reserved(w),
            Some(Tok::Quoted(_)) => true,
            _ => false,
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if !is_reserved(&w) => {
                self.i += 1;
                Ok(w)
            }
            Some(Tok::Quoted(w)) => {
                self.i += 1;
                Ok(w)
            }
            _ => Err(self.err(&["identifier"])),
        }
    }

    /// Skipping any run of `(`, does a `select` follow?
    fn select_after_parens(&self) -> bool {
        let mut k = 0;
        while self.peek_at(k) == Some(&Tok::LParen) {
            k += 1;
        }
        k > 0 && self.is_kw_at(k, "select")
    }

    /// Runs `f`; on failure restores the position and returns None.
    fn attempt<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> Option<T> {
        let save = self.i;
        match f(self) {
            Ok(v) => Some(v),
            Err(_) => {
                self.i = save;
                None
            }
        }
    }

    // -- queries ------------------------------------------------------------

    fn query_expr(&mut self) -> PResult<Query> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
            let mut left = self.query_term()?;
            loop {
                let kind = if self.eat_kw("union") {
                    SetOpKind::Union
                } else if self.eat_kw("except") {
                    SetOpKind::Except
                } else {
                    return Ok(left);
                };
                let all = self.set_quantifier();
                let right = self.query_term()?;
                left = Query::SetOp {
                    kind,
                    all,
                    left: Box::new(left),
                    right: Box::new(right),
                };
            }
        })
    }

    fn set_quantifier(&mut self) -> bool {
        if self.eat_kw("all") {
            true
        } else {
            self.eat_kw("distinct");
            false
        }
    }

    fn query_term(&mut self) -> PResult<Query> {
        let mut left = self.query_primary()?;
        while self.eat_kw("intersect") {
            let all = self.set_quantifier();
            let right = self.query_primary()?;
            left = Query::SetOp {
                kind: SetOpKind::Intersect,
                all,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn query_primary(&mut self) -> PResult<Query> {
        if self.eat(&Tok::LParen) {
            let q = self.query_expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(q);
        }
        if self.is_kw("select") {
            return Ok(Query::Select(Box::new(self.select_query()?)));
        }
        Err(self.err(&["select", "`(`"]))
    }

    fn paren_query(&mut self) -> PResult<Query> {
        self.expect(&Tok::LParen, "`(`")?;
        let q = self.query_expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(q)
    }

    fn select_query(&mut self) -> PResult<SelectQuery> {
        self.expect_kw("select")?;
        let quantifier = if self.eat_kw("distinct") {
            Some(Quantifier::Distinct)
        } else if self.eat_kw("all") {
            Some(Quantifier::All)
        } else {
            None
        };
        let items = if self.eat(&Tok::Star) {
            SelectList::Wildcard
        } else {
            let mut items = vec![self.sel_item()?];
            while self.eat(&Tok::Comma) {
                items.push(self.sel_item()?);
            }
            SelectList::Items(items)
        };
        self.expect_kw("from")?;
        let mut from = vec![self.table_ref()?];
        while self.eat(&Tok::Comma) {
            from.push(self.table_ref()?);
        }
        let where_clause = if self.eat_kw("where") { Some(self.cond()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            group_by.push(self.column_ref()?);
            while self.eat(&Tok::Comma) {
                group_by.push(self.column_ref()?);
            }
        }
        let having = if self.eat_kw("having") { Some(self.cond()?) } else { None };
        Ok(SelectQuery {
            select: SelectClause { quantifier, items },
            from,
            where_clause,
            group_by,
            having,
        })
    }

    fn column_ref(&mut self) -> PResult<ColumnRef> {
        let first = self.ident()?;
        if self.eat(&Tok::Dot) {
            let column = self.ident()?;
            Ok(ColumnRef {
                rangevar: Some(first),
                column,
            })
        } else {
            Ok(ColumnRef {
                rangevar: None,
                column: first,
            })
        }
    }

    fn sel_item(&mut self) -> PResult<SelItem> {
        let value = if self.is_ident_at(0) && self.peek_at(1) == Some(&Tok::Dot) && self.peek_at(2) == Some(&Tok::Star)
        {
            let rv = self.ident()?;
            self.i += 2;
            SelValue::QualifiedWildcard(rv)
        } else {
            match self.scalar()? {
                Scalar::Column(ColumnRef {
                    rangevar: None,
                    column,
                }) => SelValue::Column(column),
                Scalar::Column(ColumnRef {
                    rangevar: Some(rangevar),
                    column,
                }) => SelValue::Qualified { rangevar, column },
                Scalar::Aggregate(a) => SelValue::Aggregate(*a),
                s => SelValue::Scalar(s),
            }
        };
        let alias = self.alias()?;
        Ok(SelItem { value, alias })
    }

    fn alias(&mut self) -> PResult<Option<String>> {
        if self.eat_kw("as") {
            return self.ident().map(Some);
        }
        if self.is_ident_at(0) {
            return self.ident().map(Some);
        }
        Ok(None)
    }

    fn required_alias(&mut self, what: &str) -> PResult<String> {
        match self.alias()? {
            Some(a) => Ok(a),
            None => Err(self.err(&[what])),
        }
    }

    fn table_ref(&mut self) -> PResult<TableRef> {
        if self.is_ident_at(0) && self.is_kw_at(1, "in") {
            if !self.meta {
                return Err(self.err(&["table reference (XML variable bindings need Meta-SQL)"]));
            }
            let var = self.ident()?;
            self.i += 1;
            if self.is_kw("ueval") && self.peek_at(1) == Some(&Tok::LParen) {
                self.i += 2;
                let arg = self.scalar()?;
                self.expect(&Tok::RParen, "`)`")?;
                return Ok(TableRef {
                    source: TableSource::UevalIn { arg },
                    alias: Some(var),
                });
            }
            let source = self.binding_source()?;
            let Some(Tok::Bracketed(path)) = self.peek().cloned() else {
                return Err(self.err(&["`[` XPath expression `]`"]));
            };
            self.i += 1;
            return Ok(TableRef {
                source: TableSource::XmlBinding { source, path },
                alias: Some(var),
            });
        }
        if self.meta && self.peek_at(1) == Some(&Tok::LParen) {
            if self.is_kw("eval") {
                self.i += 2;
                let arg = self.scalar()?;
                self.expect(&Tok::RParen, "`)`")?;
                let alias = self.required_alias("range variable for EVAL")?;
                return Ok(TableRef {
                    source: TableSource::Eval { arg, scheme: None },
                    alias: Some(alias),
                });
            }
            if self.is_kw("table") {
                self.i += 2;
                let source = if self.is_kw("extract") && self.peek_at(1) == Some(&Tok::LParen) {
                    self.i += 2;
                    let source = self.scalar()?;
                    self.expect(&Tok::Comma, "`,`")?;
                    let Some(Tok::Str(path)) = self.peek().cloned() else {
                        return Err(self.err(&["XPath string literal"]));
                    };
                    self.i += 1;
                    self.expect(&Tok::RParen, "`)`")?;
                    TableSource::Extract { source, path }
                } else if self.is_kw("ueval") && self.peek_at(1) == Some(&Tok::LParen) {
                    self.i += 2;
                    let arg = self.scalar()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    TableSource::Ueval { arg }
                } else {
                    return Err(self.err(&["EXTRACT", "UEVAL"]));
                };
                self.expect(&Tok::RParen, "`)`")?;
                let alias = self.required_alias("range variable")?;
                return Ok(TableRef {
                    source,
                    alias: Some(alias),
                });
            }
        }
        if self.peek() == Some(&Tok::LParen) {
            let q = self.paren_query()?;
            let alias = self.alias()?;
            return Ok(TableRef {
                source: TableSource::Query(Box::new(q)),
                alias,
            });
        }
        let name = self.ident()?;
        let alias = self.alias()?;
        Ok(TableRef {
            source: TableSource::Table(name),
            alias,
        })
    }

    fn binding_source(&mut self) -> PResult<Scalar> {
        if self.is_ident_at(0) && self.peek_at(1) == Some(&Tok::LParen) {
            return self.call();
        }
        Ok(Scalar::Column(self.column_ref()?))
    }

    // -- conditions ---------------------------------------------------------

    fn cond(&mut self) -> PResult<CondExpr> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
            let first = self.and_cond()?;
            if !self.is_kw("or") {
                return Ok(first);
            }
            let mut parts = vec![first];
            while self.eat_kw("or") {
                parts.push(self.and_cond()?);
            }
            Ok(CondExpr {
                negated: false,
                body: CondBody::Or(parts),
            })
        })
    }

    fn and_cond(&mut self) -> PResult<CondExpr> {
        let first = self.not_cond()?;
        if !self.is_kw("and") {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat_kw("and") {
            parts.push(self.not_cond()?);
        }
        Ok(CondExpr {
            negated: false,
            body: CondBody::And(parts),
        })
    }

    fn not_cond(&mut self) -> PResult<CondExpr> {
        if self.eat_kw("not") {
            return Ok(self.not_cond()?.negate());
        }
        if self.peek() == Some(&Tok::LParen) {
            let grouped = self.attempt(|p| {
                p.i += 1;
                let c = p.cond()?;
                p.expect(&Tok::RParen, "`)`")?;
                if p.continues_predicate() {
                    return Err(p.err(&[]));
                }
                Ok(c)
            });
            if let Some(c) = grouped {
                return Ok(c);
            }
        }
        self.predicate()
    }

    fn continues_predicate(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Tok::Eq
                    | Tok::Ne
                    | Tok::Lt
                    | Tok::Le
                    | Tok::Gt
                    | Tok::Ge
                    | Tok::Plus
                    | Tok::Minus
                    | Tok::Star
                    | Tok::Slash
                    | Tok::Concat
            )
        ) || ["in", "like", "is", "not", "match", "overlaps"].iter().any(|k| self.is_kw(k))
    }

    fn comp_op(&mut self) -> Option<CompOp> {
        let op = match self.peek()? {
            Tok::Eq => CompOp::Eq,
            Tok::Lt => CompOp::Lt,
            Tok::Le => CompOp::Let,
            Tok::Gt => CompOp::Gt,
            Tok::Ge => CompOp::Get,
            Tok::Ne => CompOp::Neq,
            _ => return None,
        };
        self.i += 1;
        Some(op)
    }

    fn predicate(&mut self) -> PResult<CondExpr> {
        if self.is_kw("exists") && self.peek_at(1) == Some(&Tok::LParen) {
            self.i += 1;
            return Ok(CondExpr::test(CondTest::Exists(Box::new(self.paren_query()?))));
        }
        if self.is_kw("unique") && self.peek_at(1) == Some(&Tok::LParen) {
            self.i += 1;
            return Ok(CondExpr::test(CondTest::Unique(Box::new(self.paren_query()?))));
        }
        let row = self.row()?;
        if let Some(op) = self.comp_op() {
            let quantifier = if self.is_kw("all") {
                Some(Some(AllAny::All))
            } else if self.is_kw("any") {
                Some(Some(AllAny::Any))
            } else if self.is_kw("some") {
                Some(None)
            } else {
                None
            };
            if let Some(quantifier) = quantifier {
                self.i += 1;
                let query = Box::new(self.paren_query()?);
                return Ok(CondExpr::test(CondTest::AllOrAny {
                    row,
                    op,
                    quantifier,
                    query,
                }));
            }
            let rhs = self.row()?;
            return Ok(CondExpr::test(CondTest::Comparison { lhs: row, op, rhs }));
        }
        let negated = if self.is_kw("not") && (self.is_kw_at(1, "in") || self.is_kw_at(1, "like")) {
            self.i += 1;
            true
        } else {
            false
        };
        let test = if self.eat_kw("in") {
            self.in_test(row)?
        } else if self.eat_kw("like") {
            let value = single(row).ok_or_else(|| self.err(&["a single value before LIKE"]))?;
            let pattern = Operand::from_scalar(self.scalar()?);
            let escape = if self.eat_kw("escape") {
                Some(Operand::from_scalar(self.scalar()?))
            } else {
                None
            };
            CondTest::Like {
                value,
                pattern,
                escape,
            }
        } else if self.eat_kw("is") {
            let not = self.eat_kw("not");
            self.expect_kw("null")?;
            let c = CondExpr::test(CondTest::IsNull(row));
            return Ok(if not { c.negate() } else { c });
        } else if self.eat_kw("match") {
            let unique = self.eat_kw("unique");
            let kind = if self.eat_kw("partial") {
                Some(MatchKind::Partial)
            } else if self.eat_kw("full") {
                Some(MatchKind::Full)
            } else {
                None
            };
            let query = Box::new(self.paren_query()?);
            CondTest::Match {
                row,
                unique,
                kind,
                query,
            }
        } else if self.eat_kw("overlaps") {
            let rhs = self.row()?;
            match (<[Operand; 2]>::try_from(row), <[Operand; 2]>::try_from(rhs)) {
                (Ok([a, b]), Ok([c, d])) => {
                    CondTest::Overlaps(Box::new([a.to_scalar(), b.to_scalar(), c.to_scalar(), d.to_scalar()]))
                }
                _ => return Err(self.err(&["two-element row constructors around OVERLAPS"])),
            }
        } else {
            return Err(self.err(&["comparison operator", "IN", "LIKE", "IS", "MATCH", "OVERLAPS"]));
        };
        let c = CondExpr::test(test);
        Ok(if negated { c.negate() } else { c })
    }

    fn in_test(&mut self, row: Vec<Operand>) -> PResult<CondTest> {
        if self.select_after_parens() {
            if let Some(q) = self.attempt(|p| p.paren_query()) {
                return Ok(CondTest::In(InTest::Subquery {
                    row,
                    query: Box::new(q),
                }));
            }
        }
        let value = single(row)
            .ok_or_else(|| self.err(&["a subquery after IN with a row constructor"]))?
            .to_scalar();
        self.expect(&Tok::LParen, "`(`")?;
        let mut list = vec![self.scalar()?];
        while self.eat(&Tok::Comma) {
            list.push(self.scalar()?);
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(CondTest::In(InTest::List { value, list }))
    }

    fn row(&mut self) -> PResult<Vec<Operand>> {
        if self.peek() == Some(&Tok::LParen) {
            let multi = self.attempt(|p| {
                p.i += 1;
                let mut items = vec![p.scalar()?];
                while p.eat(&Tok::Comma) {
                    items.push(p.scalar()?);
                }
                p.expect(&Tok::RParen, "`)`")?;
                if items.len() < 2 {
                    return Err(p.err(&[]));
                }
                Ok(items)
            });
            if let Some(items) = multi {
                return Ok(items.into_iter().map(Operand::from_scalar).collect());
            }
        }
        Ok(vec![Operand::from_scalar(self.scalar()?)])
    }

    // -- scalars ------------------------------------------------------------

    fn scalar(&mut self) -> PResult<Scalar> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
            let mut left = self.additive()?;
            while self.eat(&Tok::Concat) {
                let right = self.additive()?;
                left = Scalar::Concat(Box::new(left), Box::new(right));
            }
            Ok(left)
        })
    }

    fn additive(&mut self) -> PResult<Scalar> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(left),
            };
            self.i += 1;
            let right = self.term()?;
            left = Scalar::Arith {
                op,
                lhs: Box::new(left),
                rhs: Box::new(right),
            };
        }
    }

    fn term(&mut self) -> PResult<Scalar> {
        let mut left = self.primary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => ArithOp::Mul,
                Some(Tok::Slash) => ArithOp::Div,
                _ => return Ok(left),
            };
            self.i += 1;
            let right = self.primary()?;
            left = Scalar::Arith {
                op,
                lhs: Box::new(left),
                rhs: Box::new(right),
            };
        }
    }

    fn primary(&mut self) -> PResult<Scalar> {
        match self.peek().cloned() {
            Some(Tok::Number(n)) => {
                self.i += 1;
                Ok(Scalar::Constant(Constant(n)))
            }
            Some(sign @ (Tok::Minus | Tok::Plus)) => match self.peek_at(1).cloned() {
                Some(Tok::Number(n)) => {
                    self.i += 2;
                    let s = if sign == Tok::Minus { "-" } else { "+" };
                    Ok(Scalar::Constant(Constant(format!("{s}{n}"))))
                }
                _ => Err(self.err(&["expression (unary operators apply to numeric literals only)"])),
            },
            Some(Tok::Str(s)) => {
                self.i += 1;
                Ok(Scalar::Constant(Constant(s)))
            }
            Some(Tok::LParen) => {
                if self.select_after_parens() {
                    if let Some(q) = self.attempt(|p| p.paren_query()) {
                        return Ok(Scalar::Query(Box::new(q)));
                    }
                }
                self.i += 1;
                let s = self.scalar()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(s)
            }
            Some(Tok::Word(w)) if self.peek_at(1) == Some(&Tok::LParen) && !is_reserved(&w) => {
                let func = match w.to_ascii_lowercase().as_str() {
                    "count" => Some(AggFunc::Count),
                    "avg" => Some(AggFunc::Avg),
                    "max" => Some(AggFunc::Max),
                    "min" => Some(AggFunc::Min),
                    "sum" => Some(AggFunc::Sum),
                    "cmb" if self.meta => Some(AggFunc::Cmb),
                    _ => None,
                };
                match func {
                    Some(f) => self.aggregate(f),
                    None if self.meta => self.call(),
                    None => Err(self.err(&["expression (function calls need Meta-SQL)"])),
                }
            }
            Some(Tok::Word(_) | Tok::Quoted(_)) if self.is_ident_at(0) => Ok(Scalar::Column(self.column_ref()?)),
            _ => Err(self.err(&["expression"])),
        }
    }

    fn aggregate(&mut self, func: AggFunc) -> PResult<Scalar> {
        self.i += 2;
        if func == AggFunc::Count && self.eat(&Tok::Star) {
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Scalar::Aggregate(Box::new(Aggregate::CountAll)));
        }
        let quantifier = if self.eat_kw("distinct") {
            Some(Quantifier::Distinct)
        } else if self.eat_kw("all") {
            Some(Quantifier::All)
        } else {
            None
        };
        let operand = self.scalar()?;
        if matches!(operand, Scalar::Aggregate(_)) {
            return Err(self.err(&["non-aggregate operand (aggregates do not nest)"]));
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(Scalar::Aggregate(Box::new(Aggregate::Func {
            func,
            quantifier,
            operand: Box::new(operand),
        })))
    }

    fn call(&mut self) -> PResult<Scalar> {
        let name = self.ident()?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            args.push(self.scalar()?);
            while self.eat(&Tok::Comma) {
                args.push(self.scalar()?);
            }
            self.expect(&Tok::RParen, "`)`")?;
        }
        Ok(Scalar::Call { name, args })
    }
}

fn single(row: Vec<Operand>) -> Option<Operand> {
    let [op] = <[Operand; 1]>::try_from(row).ok()?;
    Some(op)
}
