use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metasql::cli::{format_table_file, OutputFormat, Session};
use metasql::Error;

#[derive(Parser)]
#[command(name = "metasql", version, about = "Meta-SQL: query the queries stored in your database")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one program and print its result.
    Run {
        /// Program file; use -e for inline text.
        file: Option<PathBuf>,
        #[arg(short = 'e', long = "eval", conflicts_with = "file")]
        text: Option<String>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Import a query corpus first, as TABLE=DIR.
        #[arg(long, value_name = "TABLE=DIR")]
        import: Vec<String>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Aligned)]
        format: OutputFormat,
        /// Maximum template nesting inside function calls.
        #[arg(long)]
        depth_limit: Option<usize>,
    },
    /// Import the *.sql files of DIR as table TABLE(name, def) of a catalog.
    Import {
        table: String,
        dir: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
    },
    /// Interactive shell.
    Repl {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

fn session(catalog: Option<&PathBuf>, imports: &[String]) -> Result<Session, Error> {
    let mut s = Session::default();
    if let Some(dir) = catalog {
        s.load(dir)?;
    }
    for spec in imports {
        let (table, dir) = spec.split_once('=').ok_or_else(|| Error::Layout {
            file: PathBuf::from(spec),
            line: 0,
            reason: "expected TABLE=DIR".into(),
        })?;
        s.import(table, dir.as_ref())?;
    }
    Ok(s)
}

fn main_inner(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            file,
            text,
            catalog,
            import,
            format,
            depth_limit,
        } => {
            let program = match (file, text) {
                (_, Some(t)) => t,
                (Some(f), None) => fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?,
                (None, None) => io::read_to_string(io::stdin()).map_err(|e| Error::io("<stdin>", e))?,
            };
            let mut s = session(catalog.as_ref(), &import)?;
            s.format = format;
            if let Some(d) = depth_limit {
                s.depth_limit = d;
            }
            let out = s.run(&program)?;
            io::stdout()
                .write_all(out.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
        Command::Import { table, dir, catalog } => {
            let mut s = session(Some(&catalog), &[])?;
            eprint!("{}", s.import(&table, &dir)?);
            let t = s.catalog.get(&table).expect("just imported");
            let path = catalog.join(format!("{table}.tbl"));
            fs::write(&path, format_table_file(t)).map_err(|e| Error::io(&path, e))
        }
        Command::Repl { catalog } => {
            let mut s = session(catalog.as_ref(), &[])?;
            s.repl(io::stdin().lock(), &mut io::stdout(), &mut io::stderr())
                .map_err(|e| Error::io("<stdin>", e))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
