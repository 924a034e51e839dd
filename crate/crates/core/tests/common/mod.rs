//! Shared support for the integration suites: fixture access, generators,
//! independent oracles and the property checks run by both the per-topic
//! test files and the acceptance harness.
#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod props;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};

use metasql::cli::{format_table_file, import_queries, load_catalog};
use metasql::engine::{Catalog, Column, Table};
use metasql::sql::{parse_sql, to_xml};
use metasql::value::{ColumnType, Value, ValueKey};
use metasql::xform::{compile_transform, TransformProgram};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn read_fixture(rel: &str) -> String {
    let path = fixtures().join(rel);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn program(name: &str) -> String {
    read_fixture(&format!("programs/{name}.msql"))
}

pub fn function(name: &str) -> TransformProgram {
    compile_transform(&read_fixture(&format!("functions/{name}.fn"))).expect("fixture function compiles")
}

pub fn movies() -> Catalog {
    load_catalog(&fixtures().join("movies")).expect("movies catalog loads")
}

pub fn store() -> Catalog {
    load_catalog(&fixtures().join("store")).expect("store catalog loads")
}

pub fn hotspots() -> Catalog {
    load_catalog(&fixtures().join("hotspots")).expect("hotspots catalog loads")
}

/// `*.sql` files of a fixture directory as (stem, text), sorted by stem.
pub fn sql_files(rel: &str) -> Vec<(String, String)> {
    let dir = fixtures().join(rel);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sql"))
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (stem, fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// A two-column table of stored queries keyed by file stem. With
/// `strip_suffix`, `V.2.sql` contributes key `V`.
fn query_table(rel: &str, key: &str, def: &str, strip_suffix: bool) -> Table {
    let rows = sql_files(rel)
        .into_iter()
        .map(|(stem, text)| {
            let k = if strip_suffix {
                stem.split('.').next().unwrap().to_string()
            } else {
                stem
            };
            let q = parse_sql(&text).unwrap_or_else(|e| panic!("{rel}/{k}: {e}"));
            vec![Value::String(k), Value::xml(to_xml(&q))]
        })
        .collect();
    Table::from_rows(
        vec![Column::new(key, ColumnType::String), Column::new(def, ColumnType::Xml)],
        rows,
    )
    .unwrap()
}

fn imported(rel: &str) -> Table {
    import_queries(&fixtures().join(rel)).expect("fixture corpus imports")
}

/// Every derived table file with its contents rebuilt from the SQL corpora.
pub fn derived_tables() -> Vec<(PathBuf, String)> {
    let f = fixtures();
    let tables = [
        ("movies/Views.tbl", imported("views")),
        ("movies/NewViews.tbl", imported("views")),
        ("movies/ViewsAltered.tbl", imported("views_altered")),
        ("movies/Views2.tbl", imported("views2")),
        ("movies/Views3.tbl", query_table("views3", "name", "def", true)),
        ("movies/Log.tbl", query_table("log", "id", "Q", false)),
        ("hotspots/Log.tbl", query_table("hotspot_queries", "id", "Q", false)),
        ("store/Customer.tbl", query_table("store_queries", "custid", "query", true)),
    ];
    tables
        .into_iter()
        .map(|(rel, t)| (f.join(rel), format_table_file(&t)))
        .collect()
}

/// Order-insensitive comparison form of a table's rows.
pub fn bag(rows: &[Vec<Value>]) -> Vec<Vec<ValueKey>> {
    let mut keys: Vec<Vec<ValueKey>> = rows.iter().map(|r| r.iter().map(Value::key).collect()).collect();
    keys.sort();
    keys
}

/// The string column `col` of `t`, in row order.
pub fn strings(t: &Table, col: &str) -> Vec<String> {
    let i = t.column_index(col).unwrap_or_else(|| panic!("no column {col}"));
    t.rows
        .iter()
        .map(|r| match &r[i] {
            Value::String(s) => s.clone(),
            other => panic!("expected string, got {other:?}"),
        })
        .collect()
}

pub fn sorted_strings(t: &Table, col: &str) -> Vec<String> {
    let mut v = strings(t, col);
    v.sort();
    v
}
