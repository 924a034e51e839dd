//! Runs stored queries from inside a query: UEVAL yields one `row`
//! document per answer row, EVAL exposes the answers as typed columns.

use std::path::Path;

use metasql::cli::{format_table, load_catalog, OutputFormat};
use metasql::metasql::run;

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let store = load_catalog(&fixtures.join("store"))?;
    for program in [
        "select c.custid, r from Customer c, r in UEVAL(c.query)",
        "select c.custid, max(t.price) as price from Customer c, EVAL(c.query) t group by c.custid",
    ] {
        println!("{program}");
        println!("{}", format_table(&run(program, &store)?, OutputFormat::Aligned)?);
    }
    match run("select t.qty from Customer c, EVAL(c.query) t", &store) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("error: {e}"),
    }
    Ok(())
}
