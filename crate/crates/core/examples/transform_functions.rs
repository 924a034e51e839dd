//! Declares a transformation function and calls it directly, outside any
//! query.

use metasql::runtime::invoke_function;
use metasql::sql::{parse_sql, to_xml};
use metasql::value::Value;
use metasql::xform::{compile_transform, DEFAULT_DEPTH_LIMIT};
use metasql::xml::serialize_xml;

const TABLES: &str = r#"function tables returns xml
begin
  <xsl:template match="/">
    <tables><xsl:apply-templates select="//table"/></tables>
  </xsl:template>
  <xsl:template match="table">
    <name><xsl:value-of select="."/></name>
  </xsl:template>
end"#;

fn main() -> Result<(), metasql::Error> {
    let f = compile_transform(TABLES)?;
    println!("{} returns {:?}", f.name, f.return_type);
    let q = parse_sql("select * from A, (select b from B, C) t where exists (select 1 from D)")?;
    let out = invoke_function(&f, &[Value::xml(to_xml(&q))], DEFAULT_DEPTH_LIMIT)?;
    if let Value::Xml(doc) = out {
        println!("{}", serialize_xml(&doc));
    }
    Ok(())
}
