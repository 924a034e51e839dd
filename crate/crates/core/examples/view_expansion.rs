//! Replaces view references in logged queries with the view definitions,
//! using the `pair` and `rewrite` functions.

use std::path::Path;

use metasql::cli::load_catalog;
use metasql::metasql::run;
use metasql::sql::{from_xml, unparse_sql};

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = load_catalog(&fixtures.join("movies"))?;
    let program = std::fs::read_to_string(fixtures.join("programs/view_expansion.msql")).expect("fixture");
    let log = catalog.get("Log").expect("fixture log");
    let result = run(&program, &catalog)?;
    for (before, after) in log.rows.iter().zip(&result.rows) {
        let id = before[0].to_text().unwrap_or_default();
        println!("{id}  {}", unparse_sql(&from_xml(before[1].as_xml().unwrap())?));
        println!("{}  {}\n", " ".repeat(id.len()), unparse_sql(&from_xml(after[1].as_xml().unwrap())?));
    }
    Ok(())
}
