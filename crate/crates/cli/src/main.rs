//! `vizual`: compile, rewrite, replay and verify scripts and notebooks, or
//! serve notebooks over HTTP.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use vizual_core::executor::{load_source, replay, FsSources, StabilityPolicy};
use vizual_core::lang::{parse_script, Script, Step};
use vizual_core::notebook::{Notebook, MAIN};
use vizual_core::rewrite::{self, RewriteError, RewriteSuggestion};
use vizual_core::sql::{self, Table};

#[derive(Parser)]
#[command(name = "vizual", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the SQL query equivalent to a script.
    Compile {
        script: PathBuf,
        /// Directory LOAD paths are relative to; defaults to the script's.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Allow running accumulations, compiled with window functions.
        #[arg(long)]
        positional: bool,
    },
    /// Print rewrite suggestions for a script as script diffs.
    Rewrite {
        script: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Also propose data-dependent generalizations of singleton edits.
        #[arg(long)]
        generalize: bool,
    },
    /// Replay a script and print the resulting sheet as CSV.
    Replay {
        script: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Build a notebook file from scripts, one page per script named by its
    /// file stem, in the order given.
    Pack {
        #[arg(required = true)]
        scripts: Vec<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Replay a notebook file and check every page against its recorded
    /// output hash.
    Run {
        notebook: PathBuf,
        /// Print this page of the main branch as CSV.
        #[arg(long)]
        show: Option<String>,
    },
    /// Serve notebooks over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Where notebooks are stored and page files are loaded from.
        #[arg(long)]
        data_dir: PathBuf,
    },
}

fn read_script(path: &Path, data_dir: Option<PathBuf>) -> Result<(Script, FsSources)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let script = parse_script(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = data_dir.unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    Ok((script, FsSources { base }))
}

fn write_table(out: &mut impl Write, t: &Table) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&t.columns)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn compile(script: &Path, data_dir: Option<PathBuf>, positional: bool) -> Result<String> {
    let (script, files) = read_script(script, data_dir)?;
    let (loaded, _) = load_source(&script.source, &files)?;
    let schema: Vec<String> = loaded.column_names().into_iter().map(str::to_string).collect();
    let q = if positional {
        sql::compile_positional(&script, &schema)?
    } else {
        sql::compile_script(&script, &schema)?
    };
    Ok(format!("{};\n", q.text()))
}

fn diff_lines(out: &mut String, sign: char, steps: &[Step]) {
    for s in steps {
        out.push_str(&format!("{sign}{};\n", s.stmt));
    }
}

/// One suggestion as a hunk against the script's statement numbering
/// (1-based, the LOAD line excluded).
fn hunk(s: &RewriteSuggestion) -> String {
    let status = match (s.verified, s.data_dependent) {
        (true, _) => "verified",
        (false, true) => "data-dependent",
        (false, false) => "unverified",
    };
    let mut out = format!(
        "@@ -{},{} +{},{} @@ {:?} {} ({status})\n",
        s.start + 1,
        s.end - s.start,
        s.start + 1,
        s.replacement.len(),
        s.kind,
        s.id
    );
    if let Some(e) = &s.evidence {
        out.push_str(&format!("# predicate: {}\n", e.predicate));
        if let Some(a) = &e.affine {
            out.push_str(&format!("# fit: {} * {} + {}\n", a.a, a.column, a.b));
        }
    }
    diff_lines(&mut out, '-', &s.original);
    diff_lines(&mut out, '+', &s.replacement);
    out
}

fn rewrite_cmd(script: &Path, data_dir: Option<PathBuf>, generalize: bool) -> Result<String> {
    let name = script.display().to_string();
    let (script, files) = read_script(script, data_dir)?;
    let mut sugs = rewrite::suggest(&script, &files)?;
    if generalize {
        let state = replay(&script, &files, &StabilityPolicy::default())?.state;
        match rewrite::generalize(&script, &state) {
            Ok(g) => sugs.extend(g),
            Err(RewriteError::NoCandidate { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if sugs.is_empty() {
        return Ok(String::new());
    }
    let mut out = format!("--- {name}\n+++ {name} (rewritten)\n");
    for s in &sugs {
        out.push_str(&hunk(s));
    }
    Ok(out)
}

fn run_notebook(path: &Path, show: Option<&str>, out: &mut impl Write) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let nb = Notebook::from_json(&text).with_context(|| format!("replaying {}", path.display()))?;
    for b in &nb.branches {
        for p in &b.pages {
            writeln!(
                out,
                "{}/{}: {} statements, {} rows x {} columns, output {}",
                b.name,
                p.name,
                p.script.len(),
                p.output.height(),
                p.output.width(),
                &p.output.content_hash()[..12]
            )?;
        }
    }
    writeln!(out, "notebook {}: ok", &nb.content_hash()[..12])?;
    if let Some(page) = show {
        write_table(out, &Table::visible(&nb.page(MAIN, page)?.output))?;
    }
    Ok(())
}

fn pack(scripts: &[PathBuf], data_dir: Option<PathBuf>) -> Result<Notebook> {
    let mut nb = Notebook::new();
    for path in scripts {
        let (script, files) = read_script(path, data_dir.clone())?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("no page name in {}", path.display()))?;
        nb.add_page(MAIN, name, script.source, &files)?;
        nb.append_steps(MAIN, name, script.steps)?;
    }
    Ok(nb)
}

async fn serve(port: u16, data_dir: PathBuf) -> Result<()> {
    let store = vizual_service::Store::open(Some(data_dir.clone()))
        .with_context(|| format!("opening data directory {}", data_dir.display()))?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("serving {} on http://{}", data_dir.display(), listener.local_addr()?);
    axum::serve(listener, vizual_service::router(store)).await?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Compile {
            script,
            data_dir,
            positional,
        } => stdout.write_all(compile(&script, data_dir, positional)?.as_bytes())?,
        Command::Rewrite {
            script,
            data_dir,
            generalize,
        } => stdout.write_all(rewrite_cmd(&script, data_dir, generalize)?.as_bytes())?,
        Command::Replay { script, data_dir } => {
            let (script, files) = read_script(&script, data_dir)?;
            let r = replay(&script, &files, &StabilityPolicy::default())?;
            for d in &r.diagnostics {
                eprintln!("{:?}: statement {:?}: {}", d.severity, d.statement.map(|i| i + 1), d.message);
            }
            write_table(&mut stdout, &Table::visible(&r.state))?;
        }
        Command::Pack {
            scripts,
            data_dir,
            output,
        } => {
            let nb = pack(&scripts, data_dir)?;
            std::fs::write(&output, nb.to_json()).with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Run { notebook, show } => run_notebook(&notebook, show.as_deref(), &mut stdout)?,
        Command::Serve { port, data_dir } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            if !data_dir.is_dir() {
                bail!("{} is not a directory", data_dir.display());
            }
            tokio::runtime::Runtime::new()?.block_on(serve(port, data_dir))?;
        }
    }
    Ok(())
}
