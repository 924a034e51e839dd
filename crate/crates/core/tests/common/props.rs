//! Property checks. Each returns a description of the first minimal
//! counterexample on failure so that the test files and the acceptance
//! harness can share them.

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

use metasql::cli::{load_catalog, save_catalog};
use metasql::engine::{project, Catalog, Column, Engine, ExecError, Table};
use metasql::metasql::run;
use metasql::runtime::{cmb, eval_typed, extract, invoke_function, ueval, Functions};
use metasql::sql::*;
use metasql::value::{ColumnType, Value};
use metasql::xform::{compile_transform, run_transform, DEFAULT_DEPTH_LIMIT};
use metasql::xml::{canonical_equal, parse_xml, serialize_xml, XmlDoc, XmlNode};

use super::gen;
use super::oracle::{binding_rows, chained_binding_rows, select_elements, Body, Fixture, SetTop};

pub type Outcome = Result<(), String>;

/// Case counts and whether the generator seed is fixed.
#[derive(Clone, Copy)]
pub struct Plan {
    pub cases: u32,
    pub fixed_seed: bool,
}

impl Plan {
    pub fn new(cases: u32) -> Self {
        Plan { cases, fixed_seed: false }
    }

    pub fn fixed(cases: u32) -> Self {
        Plan { cases, fixed_seed: true }
    }

    fn runner(self) -> TestRunner {
        let config = Config {
            cases: self.cases,
            failure_persistence: None,
            max_shrink_iters: 2048,
            ..Config::default()
        };
        if self.fixed_seed {
            TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
        } else {
            TestRunner::new(config)
        }
    }
}

fn check<S: Strategy>(plan: Plan, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome
where
    S::Value: std::fmt::Debug,
{
    plan.runner().run(&strategy, test).map_err(|e| match e {
        TestError::Fail(why, value) => format!("{why}\nminimal input: {value:#?}"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

fn fail(msg: impl Into<String>) -> TestCaseError {
    TestCaseError::fail(msg.into())
}

// ---------------------------------------------------------------------------
// Syntax trees

pub fn sql_text_round_trip(plan: Plan) -> Outcome {
    check(plan, gen::query(2), |q| {
        let text = unparse_sql(&q);
        let back = parse_sql(&text).map_err(|e| fail(format!("{text}\n{e}")))?;
        prop_assert_eq!(back, q, "text: {}", text);
        Ok(())
    })
}

pub fn sql_xml_round_trip(plan: Plan) -> Outcome {
    check(plan, gen::query(2), |q| {
        let doc = to_xml(&q);
        let v = validate_tree(&doc);
        prop_assert!(v.valid, "not DTD-valid: {:?}", v.diagnostics);
        let back = from_xml(&doc).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(&back, &q);
        let text = serialize_xml(&doc);
        let reparsed = parse_xml(&text).map_err(|e| fail(e.to_string()))?;
        let back = from_xml(&reparsed).map_err(|e| fail(format!("{text}\n{e}")))?;
        prop_assert_eq!(back, q, "serialized: {}", text);
        Ok(())
    })
}

/// Names declared in the document type.
pub fn dtd_elements() -> BTreeSet<String> {
    SYNTAX_TREE_DTD
        .split("<!ELEMENT")
        .skip(1)
        .map(|decl| decl.split_whitespace().next().unwrap().to_string())
        .collect()
}

fn collect_names(e: &metasql::xml::Element, out: &mut BTreeSet<String>) {
    out.insert(e.name.clone());
    for c in &e.children {
        if let XmlNode::Element(k) = c {
            collect_names(k, out);
        }
    }
}

/// Declared elements never produced by `samples` generated queries.
pub fn dtd_coverage_gaps(samples: usize) -> BTreeSet<String> {
    let mut runner = Plan::fixed(1).runner();
    let strategy = gen::query(2);
    let mut seen = BTreeSet::new();
    for _ in 0..samples {
        let q = strategy.new_tree(&mut runner).unwrap().current();
        collect_names(to_xml(&q).root(), &mut seen);
    }
    dtd_elements().difference(&seen).cloned().collect()
}

// ---------------------------------------------------------------------------
// Extraction and bindings

pub fn extract_matches_oracle(plan: Plan) -> Outcome {
    check(plan, (gen::xml_doc(), gen::path_steps()), |(doc, steps)| {
        let path = gen::path_text(&steps);
        let t = extract(&doc, &path).map_err(|e| fail(format!("{path}: {e}")))?;
        let got: Vec<String> = t.rows.iter().map(|r| serialize_xml(r[0].as_xml().unwrap())).collect();
        prop_assert_eq!(got, select_elements(&doc, &steps), "path {}", path);
        Ok(())
    })
}

fn doc_table(docs: &[(i64, XmlDoc)]) -> Catalog {
    let t = Table::from_rows(
        vec![Column::new("id", ColumnType::Number), Column::new("d", ColumnType::Xml)],
        docs.iter()
            .map(|(i, d)| vec![Value::Number(*i as f64), Value::xml(d.clone())])
            .collect(),
    )
    .unwrap();
    let mut cat = Catalog::new();
    cat.insert("D", t);
    cat
}

fn id_doc_rows(t: &Table) -> Vec<(i64, String)> {
    t.rows
        .iter()
        .map(|r| match (&r[0], &r[1]) {
            (Value::Number(n), Value::Xml(d)) => (*n as i64, serialize_xml(d)),
            other => panic!("unexpected row {other:?}"),
        })
        .collect()
}

/// Compiled bindings agree with nested-loop evaluation, for a single
/// binding and for one chained off an earlier variable.
pub fn bindings_match_reference(plan: Plan) -> Outcome {
    let docs = proptest::collection::vec(gen::xml_doc(), 0..=4)
        .prop_map(|ds| ds.into_iter().enumerate().map(|(i, d)| (i as i64, d)).collect::<Vec<_>>());
    check(plan, (docs, gen::path_steps(), gen::path_steps()), |(docs, outer, inner)| {
        let cat = doc_table(&docs);
        let (po, pi) = (gen::path_text(&outer), gen::path_text(&inner));
        let single = run(&format!("select t.id, x from D t, x in t.d[{po}]"), &cat).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(id_doc_rows(&single), binding_rows(&docs, &outer));
        let chained = run(&format!("select t.id, y from D t, x in t.d[{po}], y in x[{pi}]"), &cat)
            .map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(id_doc_rows(&chained), chained_binding_rows(&docs, &outer, &inner));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Engine

pub fn engine_matches_interpreter(plan: Plan) -> Outcome {
    check(plan, (gen::set_top(), gen::small_fixture()), |(top, fx)| {
        let text = top.sql();
        let q = parse_sql(&text).map_err(|e| fail(format!("{text}\n{e}")))?;
        let got = execute_plain(&q, &fx).map_err(|e| fail(format!("{text}\n{e}")))?;
        prop_assert_eq!(super::bag(&got.rows), super::bag(&top.evaluate(&fx)), "query: {}", text);
        Ok(())
    })
}

fn execute_plain(q: &Query, fx: &Fixture) -> Result<Table, ExecError> {
    metasql::engine::execute(q, &fx.catalog())
}

pub fn ueval_row_count(plan: Plan) -> Outcome {
    check(plan, (gen::set_top(), gen::small_fixture()), |(top, fx)| {
        let q = parse_sql(&top.sql()).unwrap();
        let cat = fx.catalog();
        let functions = Functions::new();
        let engine = Engine::new(&cat, &functions);
        let direct = engine.execute(&q).map_err(|e| fail(e.to_string()))?;
        let rows = ueval(&to_xml(&q), &engine).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(rows.len(), direct.len());
        Ok(())
    })
}

pub fn eval_typed_is_projection(plan: Plan) -> Outcome {
    let case = (gen::set_top(), gen::small_fixture()).prop_filter("plain select", |(t, _)| {
        matches!(t, SetTop::Single(m) if matches!(m.body, Body::Plain { .. }))
    });
    let case = case.prop_flat_map(|(top, fx)| {
        let width = top.column_types().len();
        let names: Vec<String> = (0..width).map(|i| format!("k{i}")).collect();
        (Just(top), Just(fx), proptest::sample::subsequence(names, 1..=width).prop_shuffle())
    });
    check(plan, case, |(top, fx, scheme)| {
        let q = parse_sql(&top.sql()).unwrap();
        let cat = fx.catalog();
        let functions = Functions::new();
        let engine = Engine::new(&cat, &functions);
        let doc = to_xml(&q);
        let typed = eval_typed(&doc, &engine, &scheme).map_err(|e| fail(e.to_string()))?;
        let expected = project(&engine.execute(&q).unwrap(), &scheme).unwrap();
        prop_assert_eq!(typed.rows, expected.rows);
        let mut wider = scheme.clone();
        wider.push("absent".into());
        prop_assert_eq!(
            eval_typed(&doc, &engine, &wider).unwrap_err(),
            ExecError::MissingColumn("absent".into())
        );
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Transforms and CMB

/// The empty program emits the input's string value; scalar conversion then
/// trims it and maps an empty fragment to Null.
pub fn zero_rule_transform_is_string_value(plan: Plan) -> Outcome {
    let program = compile_transform("function sv returns string begin end").unwrap();
    check(plan, gen::xml_doc(), move |doc| {
        let expected = doc.string_value();
        let fragment = run_transform(&program, &doc, &[]).map_err(|e| fail(e.to_string()))?;
        let emitted: String = fragment.iter().map(metasql::xml::string_value).collect();
        prop_assert_eq!(&emitted, &expected);
        let got = invoke_function(&program, &[Value::xml(doc)], DEFAULT_DEPTH_LIMIT).map_err(|e| fail(e.to_string()))?;
        let scalar = if fragment.is_empty() {
            Value::Null
        } else {
            Value::String(expected.trim().to_string())
        };
        prop_assert_eq!(got, scalar);
        Ok(())
    })
}

pub fn cmb_child_count(plan: Plan) -> Outcome {
    let docs = proptest::collection::vec((0i64..3, gen::xml_doc()), 0..=6);
    check(plan, docs, |docs| {
        let arcs: Vec<Arc<XmlDoc>> = docs.iter().map(|(_, d)| Arc::new(d.clone())).collect();
        match cmb(&arcs) {
            Value::Null => prop_assert!(arcs.is_empty()),
            Value::Xml(c) => {
                prop_assert_eq!(&c.root().name, "cmb");
                let kids: Vec<_> = c.root().elements().collect();
                prop_assert_eq!(kids.len(), arcs.len());
                for (k, d) in kids.iter().zip(&arcs) {
                    prop_assert!(canonical_equal(&XmlDoc::new((*k).clone()), d));
                }
            }
            other => return Err(fail(format!("cmb returned {other:?}"))),
        }
        // Through SQL: one combined child per grouped row.
        let t = Table::from_rows(
            vec![Column::new("g", ColumnType::Number), Column::new("d", ColumnType::Xml)],
            docs.iter()
                .map(|(g, d)| vec![Value::Number(*g as f64), Value::xml(d.clone())])
                .collect(),
        )
        .unwrap();
        let mut cat = Catalog::new();
        cat.insert("T", t);
        let out = run("select g, CMB(d) as c, count(*) as n from T group by g", &cat).map_err(|e| fail(e.to_string()))?;
        for r in &out.rows {
            let (Value::Xml(c), Value::Number(n)) = (&r[1], &r[2]) else {
                return Err(fail(format!("unexpected row {r:?}")));
            };
            prop_assert_eq!(c.root().elements().count(), *n as usize);
        }
        Ok(())
    })
}

/// `rewrite` with an empty `cmb` parameter copies its input.
pub fn rewrite_with_empty_cmb_is_identity(plan: Plan) -> Outcome {
    let program = super::function("rewrite");
    check(plan, gen::query(2), move |q| {
        let doc = to_xml(&q);
        let empty = Value::xml(XmlDoc::new(metasql::xml::Element::new("cmb")));
        let out = invoke_function(&program, &[Value::xml(doc.clone()), empty], DEFAULT_DEPTH_LIMIT)
            .map_err(|e| fail(e.to_string()))?;
        let Value::Xml(out) = out else {
            return Err(fail(format!("rewrite returned {out:?}")));
        };
        prop_assert!(canonical_equal(&out, &doc), "{}\n!=\n{}", serialize_xml(&out), serialize_xml(&doc));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Catalog files

fn cell() -> BoxedStrategy<Value> {
    prop_oneof![
        Just(Value::Null),
        (-1000i64..1000, 0u32..3).prop_map(|(n, scale)| Value::Number(n as f64 / 10f64.powi(scale as i32))),
    ]
    .boxed()
}

fn string_cell() -> BoxedStrategy<Value> {
    prop_oneof![
        1 => Just(Value::Null),
        4 => "[a-z\\\\\t\n\r N' ]{0,8}".prop_map(Value::String),
    ]
    .boxed()
}

fn xml_cell() -> BoxedStrategy<Value> {
    prop_oneof![1 => Just(Value::Null), 3 => gen::xml_doc().prop_map(Value::xml)].boxed()
}

pub fn catalog_files_round_trip(plan: Plan) -> Outcome {
    let row = (cell(), string_cell(), xml_cell()).prop_map(|(a, b, c)| vec![a, b, c]);
    let tables = proptest::collection::vec(proptest::collection::vec(row, 0..=4), 0..=3);
    check(plan, tables, |tables| {
        let mut cat = Catalog::new();
        for (i, rows) in tables.into_iter().enumerate() {
            let t = Table::from_rows(
                vec![
                    Column::new("n", ColumnType::Number),
                    Column::new("s", ColumnType::String),
                    Column::new("x", ColumnType::Xml),
                ],
                rows,
            )
            .unwrap();
            cat.insert(format!("T{i}"), t);
        }
        let dir = tempfile::tempdir().unwrap();
        save_catalog(&cat, dir.path()).map_err(|e| fail(e.to_string()))?;
        let back = load_catalog(dir.path()).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(back.len(), cat.len());
        for (name, t) in cat.iter() {
            let b = back.get(name).ok_or_else(|| fail(format!("{name} missing")))?;
            prop_assert_eq!(&b.columns, &t.columns);
            prop_assert_eq!(&b.rows, &t.rows);
        }
        Ok(())
    })
}
