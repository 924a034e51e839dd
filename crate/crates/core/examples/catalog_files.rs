//! Imports a directory of SQL files as a query table, saves the catalog to
//! disk and loads it back.

use std::path::Path;

use metasql::cli::{format_table, import_queries, load_catalog, save_catalog, OutputFormat};
use metasql::engine::Catalog;

fn main() -> Result<(), metasql::Error> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut catalog = Catalog::default();
    catalog.insert("Views", import_queries(&fixtures.join("views"))?);

    let dir = std::env::temp_dir().join(format!("metasql-example-{}", std::process::id()));
    save_catalog(&catalog, &dir)?;
    let text = std::fs::read_to_string(dir.join("Views.tbl")).expect("just written");
    println!("{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));

    let back = load_catalog(&dir)?;
    print!("{}", format_table(back.get("Views").expect("saved"), OutputFormat::Csv)?);
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
