//! XML variable bindings: `x in v.def[//table]` ranges over the table
//! elements of each view definition. Prints the plan the compiler produces
//! and the result.

use std::path::Path;

use metasql::cli::{format_table, load_catalog, OutputFormat};
use metasql::metasql::compile_text;
use metasql::sql::unparse_sql;

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = load_catalog(&fixtures.join("movies"))?;
    let program = "select v.name, x from Views v, x in v.def[//table]";
    let plan = compile_text(program, Some(&catalog))?;
    println!("plan: {}\n", unparse_sql(&plan.query));
    print!("{}", format_table(&plan.execute(&catalog)?, OutputFormat::Aligned)?);
    Ok(())
}
