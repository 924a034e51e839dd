//! End-to-end checks of the bundled meta-query programs against hand-derived
//! answers and independent oracles.

use std::sync::Arc;

use metasql::engine::{Catalog, ExecError, Table};
use metasql::error::Error;
use metasql::metasql::{compile_text, infer_output_scheme, run, CompileError};
use metasql::runtime::{cmb, invoke_function};
use metasql::sql::*;
use metasql::value::{ColumnType, Value};
use metasql::xform::DEFAULT_DEPTH_LIMIT;
use metasql::xml::{canonical_equal, parse_xml, serialize_xml, XmlDoc};

use super::oracle::inline_views;
use super::props::Outcome;
use super::{function, hotspots, movies, program, sql_files, sorted_strings, store, strings};

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn run_program(name: &str, catalog: &Catalog) -> Result<Table, String> {
    run(&program(name), catalog).map_err(|e| format!("{name}: {e}"))
}

fn xml_cell(v: &Value) -> Result<Arc<XmlDoc>, String> {
    v.as_xml().cloned().ok_or_else(|| format!("expected xml, got {v:?}"))
}

// ---------------------------------------------------------------------------
// Golden tree

pub const DIR_RATINGS: &str = "select director, avg(rating) as avgrat from Movies group by director";

/// Reference encoding of the avg-rating view.
pub const GOLDEN_LISTING: &str = "<query>
<select>
<sel-item>
  <column>director</column>
</sel-item>
<sel-item>
  <aggregate><avg/>
    <column-ref>
      <column>rating</column>
    </column-ref>
  </aggregate>
  <alias>avgrat</alias>
</sel-item>
</select>
<from>
<table-ref>
  <table>Movies</table>
</table-ref>
</from>
<group-by>
<column-ref>
  <column>director</column>
</column-ref>
</group-by>
</query>";

pub fn golden_tree() -> Outcome {
    let q = parse_sql(DIR_RATINGS).map_err(|e| e.to_string())?;
    let got = serialize_xml(&to_xml(&q));
    let want = serialize_xml(&parse_xml(GOLDEN_LISTING).map_err(|e| e.to_string())?);
    ensure!(got == want, "got {got}\nwant {want}");
    let underscore = parse_xml(&want.replace("group-by", "group_by")).unwrap();
    ensure!(from_xml(&underscore).map_err(|e| e.to_string())? == q, "group_by spelling not accepted");
    Ok(())
}

// ---------------------------------------------------------------------------
// Log and view meta-queries

const VIEW_NAMES: [&str; 3] = ["Cast", "DirRatings", "Recent"];

/// Most joins: the views whose definitions mention the most tables, by
/// counting `<table>` tags in the serialized definitions.
pub fn most_joins() -> Outcome {
    let cat = movies();
    let got = sorted_strings(&run_program("most_joins", &cat)?, "name");
    let views = cat.get("Views").unwrap();
    let counts: Vec<(String, usize)> = views
        .rows
        .iter()
        .map(|r| {
            let name = r[0].to_text().unwrap();
            (name, serialize_xml(r[1].as_xml().unwrap()).matches("<table>").count())
        })
        .collect();
    let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
    let mut oracle: Vec<String> = counts.into_iter().filter(|c| c.1 == max).map(|c| c.0).collect();
    oracle.sort();
    ensure!(got == oracle, "got {got:?}, oracle {oracle:?}");
    ensure!(got == ["Cast"], "got {got:?}, hand answer [Cast]");
    Ok(())
}

/// Log queries that return nothing. The stored queries mention views, so
/// the program expands them before evaluation.
pub const EMPTY_BY_HAND: [&str; 3] = ["q02", "q07", "q12"];

pub fn empty_answer() -> Outcome {
    let cat = movies();
    let got = strings(&run_program("empty_answer", &cat)?, "id");
    ensure!(got == EMPTY_BY_HAND, "got {got:?}, hand answer {EMPTY_BY_HAND:?}");
    // The unexpanded form, on the log entries that mention only base tables.
    let mut base = cat.clone();
    let log = cat.get("Log").unwrap();
    let mut plain = Table::new(log.columns.clone());
    for r in &log.rows {
        let text = serialize_xml(r[1].as_xml().unwrap());
        if !VIEW_NAMES.iter().any(|v| text.contains(&format!("<table>{v}</table>"))) {
            plain.rows.push(r.clone());
        }
    }
    base.insert("Log", plain);
    let direct = "select l.id from Log l\nwhere not exists\n  (select x from x in UEVAL(l.Q))";
    let got = strings(&run(direct, &base).map_err(|e| e.to_string())?, "id");
    ensure!(got == ["q02", "q07"], "unexpanded form on base-only log: got {got:?}");
    Ok(())
}

fn view_sources(dir: &str) -> Vec<(String, String)> {
    sql_files(dir)
}

/// Expansion oracle: inline view text into each log query and parse.
fn expansion_oracle(views: &str) -> Vec<(String, XmlDoc)> {
    let views = view_sources(views);
    sql_files("log")
        .into_iter()
        .map(|(id, text)| {
            let inlined = inline_views(&text, &views);
            let q = parse_sql(&inlined).unwrap_or_else(|e| panic!("{inlined}: {e}"));
            (id, to_xml(&q))
        })
        .collect()
}

pub fn view_expansion() -> Outcome {
    let cat = movies();
    let t = run_program("view_expansion", &cat)?;
    let oracle = expansion_oracle("views");
    ensure!(t.len() == oracle.len(), "{} rows, oracle has {}", t.len(), oracle.len());
    for (row, (id, want)) in t.rows.iter().zip(&oracle) {
        ensure!(row[0].to_text().as_deref() == Some(id.as_str()), "row order: {:?} vs {id}", row[0]);
        let got = xml_cell(&row[1])?;
        ensure!(
            canonical_equal(&got, want),
            "{id}:\n got  {}\n want {}",
            serialize_xml(&got),
            serialize_xml(want)
        );
        ensure!(validate_tree(&got).valid, "{id}: expansion is not a valid tree");
    }
    Ok(())
}

pub const DIVERGING_BY_HAND: [&str; 3] = ["q05", "q08", "q11"];

pub fn query_comparison() -> Outcome {
    let mut cat = movies();
    let same = strings(&run_program("query_comparison", &cat)?, "id");
    ensure!(same.is_empty(), "identical definitions reported {same:?}");
    let altered = cat.get("ViewsAltered").unwrap().clone();
    cat.insert("NewViews", altered);
    let got = strings(&run_program("query_comparison", &cat)?, "id");
    ensure!(got == DIVERGING_BY_HAND, "got {got:?}, hand answer {DIVERGING_BY_HAND:?}");
    Ok(())
}

// ---------------------------------------------------------------------------
// Transform programs

fn defs(cat: &Catalog, table: &str, name: &str) -> Vec<Arc<XmlDoc>> {
    cat.get(table)
        .unwrap()
        .rows
        .iter()
        .filter(|r| r[0].to_text().as_deref() == Some(name))
        .map(|r| r[1].as_xml().unwrap().clone())
        .collect()
}

pub fn cartprod() -> Outcome {
    let cat = movies();
    let triple = defs(&cat, "Views3", "Triple");
    ensure!(triple.len() == 3, "fixture has {} definitions", triple.len());
    let f = function("cartprod");
    let out = invoke_function(&f, &[cmb(&triple)], DEFAULT_DEPTH_LIMIT).map_err(|e| e.to_string())?;
    let doc = xml_cell(&out)?;
    let v = validate_tree(&doc);
    ensure!(v.valid, "not DTD-valid: {:?}", v.diagnostics);
    let q = from_xml(&doc).map_err(|e| e.to_string())?;
    let Query::Select(s) = q else {
        return Err("cartprod returned a set operation".into());
    };
    ensure!(s.select.items == SelectList::Wildcard, "select list is not *");
    ensure!(s.from.len() == 3, "{} table-refs", s.from.len());
    for (t, d) in s.from.iter().zip(&triple) {
        let TableSource::Query(inner) = &t.source else {
            return Err(format!("table-ref holds {:?}", t.source));
        };
        ensure!(canonical_equal(&to_xml(inner), d), "table-ref does not copy its definition");
    }
    // The same through the program, grouped by view name.
    let t = run_program("cartprod", &cat)?;
    let row = t
        .rows
        .iter()
        .find(|r| r[0].to_text().as_deref() == Some("Triple"))
        .ok_or("no Triple row")?;
    ensure!(canonical_equal(&*xml_cell(&row[1])?, &doc), "program and direct call differ");
    Ok(())
}

/// `pair` then `rewrite`, called directly, reproduce the program's view
/// expansion and the textual oracle.
pub fn pair_rewrite() -> Outcome {
    let cat = movies();
    let (pair, rewrite) = (function("pair"), function("rewrite"));
    let mut pairs = Vec::new();
    for r in &cat.get("Views").unwrap().rows {
        let p = invoke_function(&pair, &[r[1].clone(), r[0].clone()], DEFAULT_DEPTH_LIMIT).map_err(|e| e.to_string())?;
        let p = xml_cell(&p)?;
        let root = p.root();
        let kids: Vec<_> = root.elements().collect();
        ensure!(root.name == "pair" && kids.len() == 2, "pair shape: {}", serialize_xml(&p));
        ensure!(kids[0].name == "name" && kids[0].string_value() == r[0].to_text().unwrap(), "pair name");
        ensure!(canonical_equal(&XmlDoc::new(kids[1].clone()), r[1].as_xml().unwrap()), "pair body");
        pairs.push(p);
    }
    let env = cmb(&pairs);
    let expanded = run_program("view_expansion", &cat)?;
    let oracle = expansion_oracle("views");
    for ((row, log), (_, want)) in expanded.rows.iter().zip(&cat.get("Log").unwrap().rows).zip(&oracle) {
        let direct = invoke_function(&rewrite, &[log[1].clone(), env.clone()], DEFAULT_DEPTH_LIMIT)
            .map_err(|e| e.to_string())?;
        let direct = xml_cell(&direct)?;
        ensure!(canonical_equal(&direct, &*xml_cell(&row[1])?), "direct call and program differ");
        ensure!(canonical_equal(&direct, want), "direct call and oracle differ");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Compiler rewrites

/// The plan of `select v.name, string_value(x.result) from Views v,
/// table(EXTRACT(v.def, '//table')) x`, built by hand.
pub fn hand_built_extract_plan() -> Query {
    Query::Select(Box::new(SelectQuery {
        select: SelectClause {
            quantifier: None,
            items: SelectList::Items(vec![
                SelItem {
                    value: SelValue::Qualified {
                        rangevar: "v".into(),
                        column: "name".into(),
                    },
                    alias: None,
                },
                SelItem {
                    value: SelValue::Scalar(Scalar::Call {
                        name: "string_value".into(),
                        args: vec![Scalar::Column(ColumnRef::new(Some("x"), "result"))],
                    }),
                    alias: None,
                },
            ]),
        },
        from: vec![
            TableRef {
                source: TableSource::Table("Views".into()),
                alias: Some("v".into()),
            },
            TableRef {
                source: TableSource::Extract {
                    source: Scalar::Column(ColumnRef::new(Some("v"), "def")),
                    path: "//table".into(),
                },
                alias: Some("x".into()),
            },
        ],
        where_clause: None,
        group_by: Vec::new(),
        having: None,
    }))
}

pub fn extract_rewrite() -> Outcome {
    let plan = compile_text(&program("view_tables"), None).map_err(|e| e.to_string())?;
    let hand = hand_built_extract_plan();
    ensure!(plan.query == hand, "plan {:#?}\nhand {:#?}", plan.query, hand);
    let after = "select v.name, string_value(x.result) from Views v, table(EXTRACT(v.def, '//table')) x";
    ensure!(parse_meta_query(after).map_err(|e| e.to_string())? == hand, "rewritten text parses differently");
    let t = run_program("view_tables", &movies())?;
    let pairs: Vec<(String, String)> = t
        .rows
        .iter()
        .map(|r| (r[0].to_text().unwrap(), r[1].to_text().unwrap()))
        .collect();
    let want: Vec<(String, String)> = [
        ("Cast", "Movies"),
        ("Cast", "Actors"),
        ("DirRatings", "Movies"),
        ("Recent", "Movies"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    ensure!(pairs == want, "got {pairs:?}");
    Ok(())
}

pub fn eval_schemes() -> Outcome {
    for (name, want) in [
        ("customer_max_price", vec!["price"]),
        ("customer_price_qty", vec!["price", "qty"]),
    ] {
        let plan = compile_text(&program(name), None).map_err(|e| e.to_string())?;
        let scheme = infer_output_scheme(&plan, "t").map_err(|e| e.to_string())?;
        ensure!(scheme == want, "{name}: scheme {scheme:?}, want {want:?}");
    }
    let t = run_program("customer_max_price", &store())?;
    let got: Vec<(String, Value)> = t.rows.iter().map(|r| (r[0].to_text().unwrap(), r[1].clone())).collect();
    let want = vec![
        ("c1".to_string(), Value::Number(15.0)),
        ("c2".to_string(), Value::Number(40.0)),
        ("c3".to_string(), Value::Number(40.0)),
    ];
    ensure!(got == want, "max price per customer: {got:?}");
    Ok(())
}

pub fn hot_spots() -> Outcome {
    let t = run_program("hot_spots", &hotspots())?;
    ensure!(t.len() == 1, "{} hot spots", t.len());
    let shared = parse_sql("select director from Movies where rating > 8.4").unwrap();
    ensure!(canonical_equal(&*xml_cell(&t.rows[0][0])?, &to_xml(&shared)), "wrong subquery");
    Ok(())
}

// ---------------------------------------------------------------------------
// Error contracts

fn bad_documents() -> Catalog {
    let mut cat = store();
    let malformed = [
        "<query><select/></query>",
        "<cmb/>",
        "<query><select><wildcard/></select><from><table-ref><table>Items</table></table-ref><table-ref/></from></query>",
    ];
    let rows = malformed
        .iter()
        .enumerate()
        .map(|(i, d)| vec![Value::String(format!("b{i}")), Value::xml(parse_xml(d).unwrap())])
        .collect();
    let t = Table::from_rows(
        vec![
            metasql::engine::Column::new("id", ColumnType::String),
            metasql::engine::Column::new("Q", ColumnType::Xml),
        ],
        rows,
    )
    .unwrap();
    for i in 0..malformed.len() {
        let mut one = t.clone();
        one.rows = vec![t.rows[i].clone()];
        cat.insert(format!("Bad{i}"), one);
    }
    cat
}

pub fn error_contracts() -> Outcome {
    let bad = bad_documents();
    for i in 0..3 {
        for text in [
            format!("select x from Bad{i} b, x in UEVAL(b.Q)"),
            format!("select t.item from Bad{i} b, EVAL(b.Q) t"),
        ] {
            match run(&text, &bad) {
                Err(Error::Exec(ExecError::InvalidSyntaxTree { path, .. })) => {
                    ensure!(path.starts_with('/'), "{text}: path {path}")
                }
                other => return Err(format!("{text}: expected InvalidSyntaxTree, got {other:?}")),
            }
        }
    }
    match run_program("customer_price_qty", &store()) {
        Err(e) if e.contains("no column `qty`") => {}
        other => return Err(format!("customer_price_qty: expected MissingColumn, got {other:?}")),
    }
    match run("select custid, t.qty from Customer c, EVAL(c.query) t", &store()) {
        Err(Error::Exec(ExecError::MissingColumn(c))) if c == "qty" => {}
        other => return Err(format!("expected MissingColumn(qty), got {other:?}")),
    }
    for text in [
        "select * from Customer c, EVAL(c.query) t",
        "select t.* from Customer c, EVAL(c.query) t",
    ] {
        match run(text, &store()) {
            Err(Error::Compile(CompileError::WildcardOnEval(v))) if v == "t" => {}
            other => return Err(format!("{text}: expected WildcardOnEval, got {other:?}")),
        }
    }
    for text in [
        "select item from Items where (price, qty) match (select price, qty from Items)",
        "select item from Items where (price, qty) match unique full (select price, qty from Items)",
        "select item from Items where (price, qty) overlaps (qty, price)",
    ] {
        match run(text, &store()) {
            Err(Error::Exec(ExecError::UnsupportedFeature(_))) => {}
            other => return Err(format!("{text}: expected UnsupportedFeature, got {other:?}")),
        }
    }
    Ok(())
}
