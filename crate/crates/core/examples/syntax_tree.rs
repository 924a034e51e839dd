//! Encodes a SQL query as its XML syntax tree, validates it against the
//! DTD and decodes it back to SQL text.
//!
//! cargo run --example syntax_tree -- "select a from T where b > 1"

use metasql::sql::{from_xml, parse_sql, to_xml, unparse_sql, validate_tree};
use metasql::xml::serialize_xml;

fn main() -> Result<(), metasql::Error> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "select director, avg(rating) as avgrat from Movies group by director".into());
    let query = parse_sql(&text)?;
    let doc = to_xml(&query);
    println!("{}", serialize_xml(&doc));
    let v = validate_tree(&doc);
    println!("valid: {}", v.valid);
    for d in &v.diagnostics {
        println!("  {d:?}");
    }
    println!("{}", unparse_sql(&from_xml(&doc)?));
    Ok(())
}
