//! Finds the stored views that join the most tables.

use std::path::Path;

use metasql::cli::{format_table, load_catalog, OutputFormat};
use metasql::metasql::run;

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = load_catalog(&fixtures.join("movies"))?;
    let program = std::fs::read_to_string(fixtures.join("programs/most_joins.msql")).expect("fixture");
    println!("{program}");
    print!("{}", format_table(&run(&program, &catalog)?, OutputFormat::Aligned)?);
    Ok(())
}
