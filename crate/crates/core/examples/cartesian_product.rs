//! Combines the definitions of a multi-part view with CMB and turns them
//! into one cross-product query with the `cartprod` function.

use std::path::Path;

use metasql::cli::load_catalog;
use metasql::metasql::run;
use metasql::sql::{from_xml, unparse_sql};

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = load_catalog(&fixtures.join("movies"))?;
    let program = std::fs::read_to_string(fixtures.join("programs/cartprod.msql")).expect("fixture");
    let result = run(&program, &catalog)?;
    for row in &result.rows {
        let doc = row[1].as_xml().expect("xml column");
        println!("{}: {}", row[0].to_text().unwrap_or_default(), unparse_sql(&from_xml(doc)?));
    }
    Ok(())
}
