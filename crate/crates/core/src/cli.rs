//! Catalog files, query-corpus import, result formatting and the
//! interactive session behind the `metasql` binary.
//!
//! A catalog directory holds one `NAME.tbl` file per table. Line 1 is the
//! header `col:type<TAB>col:type...`; every further line is a row of
//! tab-separated values. `\N` is Null; backslash, tab, newline and carriage
//! return inside values are written `\\`, `\t`, `\n`, `\r`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::engine::{Catalog, Column, Table};
use crate::error::Error;
use crate::metasql::compile_text;
use crate::runtime::row_doc;
use crate::sql::{parse_sql, to_xml};
use crate::value::{ColumnType, Value};
use crate::xform::DEFAULT_DEPTH_LIMIT;
use crate::xml::{parse_xml, serialize_xml, Element, XmlDoc};
use crate::xpath::parse_decimal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Aligned,
    Csv,
    Xml,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

fn layout(file: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Layout {
        file: file.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(o) => return Err(format!("unknown escape `\\{o}`")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

/// Parses the contents of one table file; `file` is used in diagnostics.
pub fn parse_table(text: &str, file: &Path) -> Result<Table, Error> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or("");
    let mut columns = Vec::new();
    if !header.is_empty() {
        for field in header.split('\t') {
            let (name, ty) = field
                .rsplit_once(':')
                .ok_or_else(|| layout(file, 1, format!("header field `{field}` is not name:type")))?;
            if name.is_empty() {
                return Err(layout(file, 1, "empty column name"));
            }
            let ty: ColumnType = ty.parse().map_err(|e: String| layout(file, 1, e))?;
            columns.push(Column::new(name, ty));
        }
    }
    let mut table = Table::new(columns);
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != table.columns.len() {
            return Err(layout(
                file,
                n,
                format!("{} fields for {} columns", fields.len(), table.columns.len()),
            ));
        }
        let mut row = Vec::with_capacity(fields.len());
        for (f, c) in fields.iter().zip(&table.columns) {
            if *f == "\\N" {
                row.push(Value::Null);
                continue;
            }
            let s = unescape(f).map_err(|e| layout(file, n, e))?;
            row.push(match c.ty {
                ColumnType::String => Value::String(s),
                ColumnType::Number => Value::Number(
                    parse_decimal(&s).ok_or_else(|| layout(file, n, format!("`{s}` is not a number")))?,
                ),
                ColumnType::Xml => Value::xml(parse_xml(&s).map_err(|e| layout(file, n, e.to_string()))?),
            });
        }
        table.rows.push(row);
    }
    Ok(table)
}

/// Renders a table in the catalog file layout.
pub fn format_table_file(table: &Table) -> String {
    let mut out = table
        .columns
        .iter()
        .map(|c| format!("{}:{}", c.name, c.ty))
        .collect::<Vec<_>>()
        .join("\t");
    out.push('\n');
    for r in &table.rows {
        let fields: Vec<String> = r
            .iter()
            .map(|v| match v.to_text() {
                None => "\\N".to_string(),
                Some(t) => escape(&t),
            })
            .collect();
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

fn sorted_entries(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads every `*.tbl` file of `dir`; the file stem names the table.
pub fn load_catalog(dir: &Path) -> Result<Catalog, Error> {
    let mut catalog = Catalog::new();
    for path in sorted_entries(dir, "tbl")? {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let table = parse_table(&text, &path)?;
        catalog.insert(stem(&path), table);
    }
    Ok(catalog)
}

/// Writes one `NAME.tbl` file per table.
pub fn save_catalog(catalog: &Catalog, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, table) in catalog.iter() {
        let path = dir.join(format!("{name}.tbl"));
        fs::write(&path, format_table_file(table)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Builds a `(name, def)` table from the `*.sql` files of `dir`, one row per
/// file holding its syntax tree. Any bad file aborts the whole import.
pub fn import_queries(dir: &Path) -> Result<Table, Error> {
    let mut table = Table::new(vec![
        Column::new("name", ColumnType::String),
        Column::new("def", ColumnType::Xml),
    ]);
    for path in sorted_entries(dir, "sql")? {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let q = parse_sql(&text).map_err(|source| Error::Import {
            file: path.clone(),
            source,
        })?;
        table.rows.push(vec![Value::String(stem(&path)), Value::xml(to_xml(&q))]);
    }
    Ok(table)
}

fn cell(v: &Value) -> String {
    v.to_text().unwrap_or_else(|| "NULL".into())
}

pub fn format_table(table: &Table, format: OutputFormat) -> Result<String, Error> {
    match format {
        OutputFormat::Aligned => Ok(format_aligned(table)),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
            w.write_record(table.columns.iter().map(|c| c.name.as_str())).map_err(io)?;
            for r in &table.rows {
                w.write_record(r.iter().map(|v| v.to_text().unwrap_or_default())).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))?;
            Ok(String::from_utf8_lossy(&bytes).into_owned())
        }
        OutputFormat::Xml => {
            let mut root = Element::new("result");
            for r in &table.rows {
                root.push(row_doc(&table.columns, r)?.into_root());
            }
            Ok(serialize_xml(&XmlDoc::new(root)) + "\n")
        }
    }
}

fn format_aligned(table: &Table) -> String {
    let cells: Vec<Vec<String>> = table.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
    let widths: Vec<usize> = table
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            cells
                .iter()
                .map(|r| r[i].chars().count())
                .chain(std::iter::once(c.name.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |vals: Vec<&str>| {
        let padded: Vec<String> = vals
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:<w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut out = String::new();
    out.push_str(&line(table.columns.iter().map(|c| c.name.as_str()).collect()));
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for r in &cells {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    let _ = writeln!(out, "({} row{})", table.len(), if table.len() == 1 { "" } else { "s" });
    out
}

/// Interactive state: the catalog plus output settings.
#[derive(Debug, Clone)]
pub struct Session {
    pub catalog: Catalog,
    pub format: OutputFormat,
    pub depth_limit: usize,
}

impl Default for Session {
    fn default() -> Self {
        Session {
            catalog: Catalog::new(),
            format: OutputFormat::Aligned,
            depth_limit: DEFAULT_DEPTH_LIMIT,
        }
    }
}

const HELP: &str = "\
.load DIR            replace the catalog with the tables in DIR
.import TABLE DIR    create TABLE(name, def) from the *.sql files in DIR
.save DIR            write the catalog to DIR
.tables              list tables and row counts
.format FMT          aligned | csv | xml
.run FILE            run the program in FILE
.help                this text
.quit                leave
Anything else is Meta-SQL; a program ends with a line ending in `;`.";

/// What a dot-command asks the loop to do next.
pub enum Reply {
    Output(String),
    Quit,
}

impl Session {
    pub fn load(&mut self, dir: &Path) -> Result<String, Error> {
        self.catalog = load_catalog(dir)?;
        Ok(self.describe_tables())
    }

    pub fn import(&mut self, table: &str, dir: &Path) -> Result<String, Error> {
        let t = import_queries(dir)?;
        let n = t.len();
        self.catalog.insert(table, t);
        Ok(format!("{table}: {n} queries\n"))
    }

    pub fn describe_tables(&self) -> String {
        let mut out = String::new();
        for (name, t) in self.catalog.iter() {
            let _ = writeln!(out, "{name}: {} rows", t.len());
        }
        out
    }

    /// Compiles and runs a program, returning the formatted result.
    pub fn run(&self, program: &str) -> Result<String, Error> {
        let plan = compile_text(program, Some(&self.catalog))?;
        let table = plan.execute_with_limit(&self.catalog, self.depth_limit)?;
        format_table(&table, self.format)
    }

    /// Handles one `.`-command line.
    pub fn command(&mut self, line: &str) -> Result<Reply, Error> {
        let mut words = line.split_whitespace();
        let cmd = words.next().unwrap_or("");
        let args: Vec<&str> = words.collect();
        let usage = |u: &str| Error::Layout {
            file: PathBuf::from("<repl>"),
            line: 0,
            reason: format!("usage: {u}"),
        };
        let out = match (cmd, args.as_slice()) {
            (".quit" | ".exit", _) => return Ok(Reply::Quit),
            (".help", _) => format!("{HELP}\n"),
            (".load", [dir]) => self.load(Path::new(dir))?,
            (".load", _) => return Err(usage(".load DIR")),
            (".import", [table, dir]) => self.import(table, Path::new(dir))?,
            (".import", _) => return Err(usage(".import TABLE DIR")),
            (".save", [dir]) => {
                save_catalog(&self.catalog, Path::new(dir))?;
                String::new()
            }
            (".save", _) => return Err(usage(".save DIR")),
            (".tables", _) => self.describe_tables(),
            (".format", [f]) => {
                self.format = f.parse().map_err(|e: String| usage(&format!(".format aligned|csv|xml ({e})")))?;
                String::new()
            }
            (".format", _) => return Err(usage(".format aligned|csv|xml")),
            (".run", [file]) => {
                let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
                self.run(&text)?
            }
            (".run", _) => return Err(usage(".run FILE")),
            _ => format!("unknown command {cmd}; try .help\n"),
        };
        Ok(Reply::Output(out))
    }

    /// Reads commands and programs until end of input or `.quit`. Results go
    /// to `out`, diagnostics and prompts to `err`.
    pub fn repl(&mut self, input: impl BufRead, out: &mut impl Write, err: &mut impl Write) -> std::io::Result<()> {
        let mut pending = String::new();
        let _ = write!(err, "metasql> ");
        err.flush()?;
        for line in input.lines() {
            let line = line?;
            let trimmed = line.trim();
            if pending.is_empty() && trimmed.starts_with('.') {
                match self.command(trimmed) {
                    Ok(Reply::Quit) => return Ok(()),
                    Ok(Reply::Output(s)) => out.write_all(s.as_bytes())?,
                    Err(e) => writeln!(err, "error: {e}")?,
                }
            } else if !(pending.is_empty() && trimmed.is_empty()) {
                pending.push_str(&line);
                pending.push('\n');
                if trimmed.ends_with(';') {
                    match self.run(&pending) {
                        Ok(s) => out.write_all(s.as_bytes())?,
                        Err(e) => writeln!(err, "error: {e}")?,
                    }
                    pending.clear();
                }
            }
            out.flush()?;
            let _ = write!(err, "{}", if pending.is_empty() { "metasql> " } else { "    ...> " });
            err.flush()?;
        }
        if !pending.trim().is_empty() {
            match self.run(&pending) {
                Ok(s) => out.write_all(s.as_bytes())?,
                Err(e) => writeln!(err, "error: {e}")?,
            }
        }
        writeln!(err)?;
        Ok(())
    }
}
