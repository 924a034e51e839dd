//! Log analysis: which logged queries return nothing, and which change
//! their answer when the view definitions change.

use std::path::Path;

use metasql::cli::{format_table, load_catalog, OutputFormat};
use metasql::metasql::run;

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut catalog = load_catalog(&fixtures.join("movies"))?;
    let program = |name: &str| std::fs::read_to_string(fixtures.join(format!("programs/{name}.msql"))).expect("fixture");

    println!("empty answers:");
    print!("{}", format_table(&run(&program("empty_answer"), &catalog)?, OutputFormat::Aligned)?);

    let altered = catalog.get("ViewsAltered").expect("fixture").clone();
    catalog.insert("NewViews", altered);
    println!("\naffected by the altered views:");
    print!("{}", format_table(&run(&program("query_comparison"), &catalog)?, OutputFormat::Aligned)?);

    let hotspots = load_catalog(&fixtures.join("hotspots"))?;
    println!("\nsubqueries shared by more than half the log:");
    print!("{}", format_table(&run(&program("hot_spots"), &hotspots)?, OutputFormat::Xml)?);
    Ok(())
}
