//! proptest strategies: SQL syntax trees in parser normal form covering every
//! element of the document type, small XML documents, XPath location paths,
//! and the restricted queries understood by the naive interpreter.

use proptest::collection::vec;
use proptest::prelude::*;

use metasql::sql::*;
use metasql::xml::{Element, XmlDoc, XmlNode};

use super::oracle::{Agg, Body, Fixture, Mini, NumTerm, Pred, SetTop, COLS, NUM_COLS};

// ---------------------------------------------------------------------------
// SQL syntax trees

const IDENTS: &[&str] = &["a", "b", "c", "title", "Movies", "t1", "x_y", "odd name", "Select", "v"];

fn ident() -> BoxedStrategy<String> {
    proptest::sample::select(IDENTS).prop_map(str::to_string).boxed()
}

fn column_ref() -> BoxedStrategy<ColumnRef> {
    (proptest::option::of(ident()), ident())
        .prop_map(|(rangevar, column)| ColumnRef { rangevar, column })
        .boxed()
}

fn constant() -> BoxedStrategy<Constant> {
    prop_oneof![
        "[0-9]{1,3}",
        "[0-9]{1,2}\\.[0-9]{1,2}",
        "-[1-9][0-9]?",
        "[a-z%_][a-z '%_]{0,5}[a-z%_]",
        "[a-z]?",
    ]
    .prop_map(Constant)
    .boxed()
}

fn comp_op() -> BoxedStrategy<CompOp> {
    proptest::sample::select(vec![CompOp::Eq, CompOp::Lt, CompOp::Let, CompOp::Gt, CompOp::Get, CompOp::Neq]).boxed()
}

fn quantifier() -> BoxedStrategy<Option<Quantifier>> {
    proptest::option::of(prop_oneof![Just(Quantifier::All), Just(Quantifier::Distinct)]).boxed()
}

/// Scalars that are legal aggregate operands: no aggregates anywhere inside.
fn plain_scalar(depth: u32) -> BoxedStrategy<Scalar> {
    scalar_with(depth, false)
}

pub fn scalar(depth: u32) -> BoxedStrategy<Scalar> {
    scalar_with(depth, true)
}

fn scalar_with(depth: u32, aggregates: bool) -> BoxedStrategy<Scalar> {
    let leaf = prop_oneof![
        column_ref().prop_map(Scalar::Column),
        constant().prop_map(Scalar::Constant),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let arith_op = proptest::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]);
    let mut options: Vec<(u32, BoxedStrategy<Scalar>)> = vec![
        (4, leaf.boxed()),
        (
            2,
            (arith_op, scalar_with(depth - 1, aggregates), scalar_with(depth - 1, aggregates))
                .prop_map(|(op, l, r)| Scalar::Arith {
                    op,
                    lhs: Box::new(l),
                    rhs: Box::new(r),
                })
                .boxed(),
        ),
        (
            1,
            (scalar_with(depth - 1, aggregates), scalar_with(depth - 1, aggregates))
                .prop_map(|(l, r)| Scalar::Concat(Box::new(l), Box::new(r)))
                .boxed(),
        ),
        (1, query(depth - 1).prop_map(|q| Scalar::Query(Box::new(q))).boxed()),
    ];
    if aggregates {
        options.push((1, aggregate(depth - 1).prop_map(|a| Scalar::Aggregate(Box::new(a))).boxed()));
    }
    proptest::strategy::Union::new_weighted(options).boxed()
}

fn aggregate(depth: u32) -> BoxedStrategy<Aggregate> {
    let func = proptest::sample::select(vec![AggFunc::Avg, AggFunc::Count, AggFunc::Max, AggFunc::Min, AggFunc::Sum]);
    prop_oneof![
        1 => Just(Aggregate::CountAll),
        3 => (func, quantifier(), plain_scalar(depth)).prop_map(|(func, quantifier, operand)| Aggregate::Func {
            func,
            quantifier,
            operand: Box::new(operand),
        }),
    ]
    .boxed()
}

fn operand(depth: u32) -> BoxedStrategy<Operand> {
    scalar(depth).prop_map(Operand::from_scalar).boxed()
}

fn row(depth: u32) -> BoxedStrategy<Vec<Operand>> {
    vec(operand(depth), 1..=3).boxed()
}

fn cond_test(depth: u32) -> BoxedStrategy<CondTest> {
    let comparison = (row(depth), comp_op(), row(depth))
        .prop_map(|(lhs, op, rhs)| CondTest::Comparison { lhs, op, rhs })
        .boxed();
    let like = (operand(depth), operand(depth), proptest::option::of(operand(0)))
        .prop_map(|(value, pattern, escape)| CondTest::Like {
            value,
            pattern,
            escape,
        })
        .boxed();
    // `v in ((select ...))` reads back as a subquery test, so a lone list
    // element is never a subquery.
    let in_list = (scalar(depth), vec(scalar(depth), 1..=3))
        .prop_filter("one-element list holding a subquery", |(_, l)| {
            !matches!(l.as_slice(), [Scalar::Query(_)])
        })
        .prop_map(|(value, list)| CondTest::In(InTest::List { value, list }))
        .boxed();
    let is_null = row(depth).prop_map(CondTest::IsNull).boxed();
    let overlaps = (scalar(depth), scalar(depth), scalar(depth), scalar(depth))
        .prop_map(|(a, b, c, d)| CondTest::Overlaps(Box::new([a, b, c, d])))
        .boxed();
    if depth == 0 {
        return prop_oneof![comparison, like, in_list, is_null, overlaps].boxed();
    }
    let sub = || query(depth - 1).prop_map(Box::new);
    let in_sub = (row(depth), sub())
        .prop_map(|(row, query)| CondTest::In(InTest::Subquery { row, query }))
        .boxed();
    let kind = proptest::option::of(prop_oneof![Just(MatchKind::Partial), Just(MatchKind::Full)]);
    let match_ = (row(depth), any::<bool>(), kind, sub())
        .prop_map(|(row, unique, kind, query)| CondTest::Match {
            row,
            unique,
            kind,
            query,
        })
        .boxed();
    let quant = proptest::option::of(prop_oneof![Just(AllAny::All), Just(AllAny::Any)]);
    let all_any = (row(depth), comp_op(), quant, sub())
        .prop_map(|(row, op, quantifier, query)| CondTest::AllOrAny {
            row,
            op,
            quantifier,
            query,
        })
        .boxed();
    prop_oneof![
        3 => comparison,
        1 => like,
        1 => in_list,
        1 => is_null,
        1 => overlaps,
        1 => in_sub,
        1 => match_,
        1 => all_any,
        1 => sub().prop_map(CondTest::Exists),
        1 => sub().prop_map(CondTest::Unique),
    ]
    .boxed()
}

pub fn cond(depth: u32) -> BoxedStrategy<CondExpr> {
    let test = (cond_test(depth), any::<bool>())
        .prop_map(|(t, negated)| CondExpr {
            negated,
            body: CondBody::Test(Box::new(t)),
        })
        .boxed();
    if depth == 0 {
        return test;
    }
    let parts = || vec(cond(depth - 1), 2..=3);
    prop_oneof![
        3 => test,
        1 => (parts(), any::<bool>()).prop_map(|(p, negated)| CondExpr { negated, body: CondBody::And(p) }),
        1 => (parts(), any::<bool>()).prop_map(|(p, negated)| CondExpr { negated, body: CondBody::Or(p) }),
    ]
    .boxed()
}

fn sel_item(depth: u32) -> BoxedStrategy<SelItem> {
    let value = prop_oneof![
        ident().prop_map(SelValue::Column),
        (ident(), ident()).prop_map(|(rangevar, column)| SelValue::Qualified { rangevar, column }),
        ident().prop_map(SelValue::QualifiedWildcard),
        scalar(depth)
            .prop_filter("bare columns and aggregates have their own forms", |s| !matches!(
                s,
                Scalar::Column(_) | Scalar::Aggregate(_)
            ))
            .prop_map(SelValue::Scalar),
        aggregate(depth.saturating_sub(1)).prop_map(SelValue::Aggregate),
    ];
    (value, proptest::option::of(ident()))
        .prop_map(|(value, alias)| SelItem { value, alias })
        .boxed()
}

fn table_ref(depth: u32) -> BoxedStrategy<TableRef> {
    let table = (ident(), proptest::option::of(ident())).prop_map(|(name, alias)| TableRef {
        source: TableSource::Table(name),
        alias,
    });
    if depth == 0 {
        return table.boxed();
    }
    prop_oneof![
        3 => table,
        1 => (query(depth - 1), ident()).prop_map(|(q, alias)| TableRef {
            source: TableSource::Query(Box::new(q)),
            alias: Some(alias),
        }),
    ]
    .boxed()
}

fn select_query(depth: u32) -> BoxedStrategy<SelectQuery> {
    let items = prop_oneof![
        1 => Just(SelectList::Wildcard),
        5 => vec(sel_item(depth), 1..=3).prop_map(SelectList::Items),
    ];
    (
        quantifier(),
        items,
        vec(table_ref(depth), 1..=3),
        proptest::option::of(cond(depth)),
        vec(column_ref(), 0..=2),
        proptest::option::of(cond(depth.saturating_sub(1))),
    )
        .prop_map(|(quantifier, items, from, where_clause, group_by, having)| SelectQuery {
            select: SelectClause { quantifier, items },
            from,
            where_clause,
            group_by,
            having,
        })
        .boxed()
}

/// Queries in the exact shape the parser produces, nesting up to `depth`.
pub fn query(depth: u32) -> BoxedStrategy<Query> {
    let select = select_query(depth).prop_map(|s| Query::Select(Box::new(s)));
    if depth == 0 {
        return select.boxed();
    }
    let kind = proptest::sample::select(vec![SetOpKind::Union, SetOpKind::Except, SetOpKind::Intersect]);
    prop_oneof![
        4 => select,
        1 => (kind, any::<bool>(), query(depth - 1), query(depth - 1)).prop_map(|(kind, all, l, r)| Query::SetOp {
            kind,
            all,
            left: Box::new(l),
            right: Box::new(r),
        }),
    ]
    .boxed()
}

// ---------------------------------------------------------------------------
// XML documents and paths

const LABELS: &[&str] = &["a", "b", "c"];

fn element(depth: u32) -> BoxedStrategy<Element> {
    let label = proptest::sample::select(LABELS);
    let text = proptest::option::of("[a-z0-9]{1,3}");
    if depth == 0 {
        return (label, text)
            .prop_map(|(l, t)| match t {
                Some(t) => Element::with_text(l, t),
                None => Element::new(l),
            })
            .boxed();
    }
    (label, text, vec(element(depth - 1), 0..=3))
        .prop_map(|(l, t, kids)| {
            let mut e = Element::new(l);
            if let Some(t) = t {
                e.push(XmlNode::text(t));
            }
            for k in kids {
                e.push(k);
            }
            e
        })
        .boxed()
}

pub fn xml_doc() -> BoxedStrategy<XmlDoc> {
    element(4).prop_map(XmlDoc::new).boxed()
}

/// One location step: descendant (`//`) or child (`/`), and a name test
/// (`None` is `*`).
pub type PathStep = (bool, Option<&'static str>);

pub fn path_steps() -> BoxedStrategy<Vec<PathStep>> {
    let name = proptest::option::weighted(0.8, proptest::sample::select(LABELS));
    vec((any::<bool>(), name), 1..=3).boxed()
}

pub fn path_text(steps: &[PathStep]) -> String {
    steps
        .iter()
        .map(|(desc, name)| format!("{}{}", if *desc { "//" } else { "/" }, name.unwrap_or("*")))
        .collect()
}

// ---------------------------------------------------------------------------
// Queries for the naive interpreter

fn num_col() -> BoxedStrategy<usize> {
    proptest::sample::select(NUM_COLS).boxed()
}

fn num_term(depth: u32, two: bool) -> BoxedStrategy<NumTerm> {
    let col = num_col().prop_filter("column of a joined table", move |c| two || *c < 3);
    let leaf = prop_oneof![col.prop_map(NumTerm::Col), (0i64..4).prop_map(NumTerm::Num)];
    if depth == 0 {
        return leaf.boxed();
    }
    prop_oneof![
        3 => leaf,
        1 => (num_term(depth - 1, two), num_term(depth - 1, two)).prop_map(|(l, r)| NumTerm::Add(Box::new(l), Box::new(r))),
        1 => (num_term(depth - 1, two), num_term(depth - 1, two)).prop_map(|(l, r)| NumTerm::Sub(Box::new(l), Box::new(r))),
        1 => (num_term(depth - 1, two), num_term(depth - 1, two)).prop_map(|(l, r)| NumTerm::Mul(Box::new(l), Box::new(r))),
    ]
    .boxed()
}

fn pred(depth: u32, two: bool) -> BoxedStrategy<Pred> {
    let any_col = (0..COLS.len()).prop_filter("column of a joined table", move |c| two || *c < 3);
    let leaf = prop_oneof![
        4 => (num_term(1, two), comp_op(), num_term(1, two)).prop_map(|(l, op, r)| Pred::Cmp(l, op, r)),
        1 => proptest::sample::select(vec!["x", "y", "z"]).prop_map(|s| Pred::StrEq(s.to_string())),
        1 => any_col.prop_map(Pred::IsNull),
        1 => (num_term(0, two), vec(0i64..4, 1..=3)).prop_map(|(t, l)| Pred::InList(t, l)),
        1 => num_col().prop_filter("column of a joined table", move |c| two || *c < 3).prop_map(Pred::Exists),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    prop_oneof![
        3 => leaf,
        1 => vec(pred(depth - 1, two), 2..=3).prop_map(Pred::And),
        1 => vec(pred(depth - 1, two), 2..=3).prop_map(Pred::Or),
        1 => pred(depth - 1, two).prop_map(|p| Pred::Not(Box::new(p))),
    ]
    .boxed()
}

fn agg() -> BoxedStrategy<Agg> {
    prop_oneof![
        Just(Agg::CountStar),
        num_col().prop_map(Agg::Count),
        num_col().prop_map(Agg::Sum),
        num_col().prop_map(Agg::Min),
        num_col().prop_map(Agg::Max),
    ]
    .boxed()
}

fn plain_mini(width: Option<usize>) -> BoxedStrategy<Mini> {
    let width = match width {
        Some(w) => (w..=w).boxed(),
        None => (1usize..=3).boxed(),
    };
    (any::<bool>(), any::<bool>(), width)
        .prop_flat_map(|(two, distinct, w)| {
            (
                Just(two),
                proptest::option::of(pred(2, two)),
                Just(distinct),
                vec(num_term(1, two), w..=w),
            )
        })
        .prop_map(|(two, pred, distinct, items)| Mini {
            two,
            pred,
            body: Body::Plain { distinct, items },
        })
        .boxed()
}

fn grouped_mini() -> BoxedStrategy<Mini> {
    any::<bool>()
        .prop_flat_map(|two| {
            let col = move || (0..COLS.len()).prop_filter("column of a joined table", move |c| two || *c < 3);
            (
                Just(two),
                proptest::option::of(pred(1, two)),
                col(),
                agg().prop_filter("column of a joined table", move |a| two || a.column().is_none_or(|c| c < 3)),
            )
        })
        .prop_map(|(two, pred, key, agg)| Mini {
            two,
            pred,
            body: Body::Grouped { key, agg },
        })
        .boxed()
}

pub fn set_top() -> BoxedStrategy<SetTop> {
    let kind = proptest::sample::select(vec![SetOpKind::Union, SetOpKind::Except, SetOpKind::Intersect]);
    prop_oneof![
        3 => plain_mini(None).prop_map(SetTop::Single),
        2 => grouped_mini().prop_map(SetTop::Single),
        2 => (kind, any::<bool>(), plain_mini(Some(2)), plain_mini(Some(2)))
            .prop_map(|(k, all, l, r)| SetTop::SetOp(k, all, l, r)),
    ]
    .boxed()
}

/// Rows for R(a, b, c) and S(a, d), at most five each, with Nulls.
pub fn small_fixture() -> BoxedStrategy<Fixture> {
    let n = || proptest::option::weighted(0.8, 0i64..4);
    let s = || proptest::option::weighted(0.8, proptest::sample::select(vec!["x", "y"]).prop_map(str::to_string));
    (vec((n(), s(), n()), 0..=5), vec((n(), n()), 0..=5))
        .prop_map(|(r, s)| Fixture { r, s })
        .boxed()
}
