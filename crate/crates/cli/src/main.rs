use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use platoon_core::bdi::{check_agent_property, explore, parse_agent_query, parse_program};
use platoon_core::mc::{check_query, Options};
use platoon_core::platoon::{parse_scenario, safety_oracle};
use platoon_core::pvm::{parse_document, render_template};
use platoon_core::report::{render_all, Report};
use platoon_core::ta::automaton::untimed_projection;

/// Verification workbench for platoon protocols.
#[derive(Parser)]
#[command(name = "platoon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the queries of a .pvm model.
    Check {
        model: PathBuf,
        /// Query to check instead of the document's queries (repeatable).
        #[arg(long, conflicts_with = "all")]
        query: Vec<String>,
        /// Check every query in the document (the default).
        #[arg(long)]
        all: bool,
        /// Exploration workers.
        #[arg(long, env = "PLATOON_MC_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Disable extrapolation and dead-clock freeing.
        #[arg(long)]
        no_extrapolation: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Print the timed or untimed abstraction of a template.
    Abstract {
        model: PathBuf,
        #[arg(long)]
        template: String,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Value bound to the template parameter `id`.
        #[arg(long)]
        id: Option<i64>,
    },
    /// Exhaustive spatial safety oracle on a .scn scenario.
    Oracle {
        scenario: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Explore BDI agent programs and check an agent query.
    Agents {
        #[arg(required = true)]
        programs: Vec<PathBuf>,
        /// Agent query, or `eq1` for the joining property.
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 100)]
        depth: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Timed,
    Untimed,
}

/// Input problems; exit status 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn in_file<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, InputError> {
    r.map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn emit(reports: &[Report], output: &Output) -> Result<ExitCode, InputError> {
    let text = render_all(reports, matches!(output.format, Format::Records));
    match &output.out {
        Some(p) => std::fs::write(p, text).map_err(|e| InputError(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(if reports.iter().all(|r| r.verdict.holds()) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode, InputError> {
    match cli.command {
        Command::Check { model, query, all: _, workers, no_extrapolation, output } => {
            let doc = in_file(&model, parse_document(&read(&model)?))?;
            let queries = if query.is_empty() { doc.queries } else { query };
            if queries.is_empty() {
                return Err(InputError(format!("{}: no queries", model.display())));
            }
            let options = Options { workers: workers.max(1), extrapolate: !no_extrapolation };
            let mut reports = Vec::new();
            for q in &queries {
                let o = check_query(&doc.network, q, options).map_err(|e| InputError(format!("query `{q}`: {e}")))?;
                reports.push(Report::from_outcome(q, &o, &doc.network));
            }
            emit(&reports, &output)
        }
        Command::Abstract { model, template, mode, id } => {
            let doc = in_file(&model, parse_document(&read(&model)?))?;
            let mut t = doc
                .network
                .templates
                .iter()
                .find(|t| t.name == template)
                .cloned()
                .ok_or_else(|| InputError(format!("unknown template `{template}`")))?;
            if let Some(k) = id {
                t = t.bind("id", k).ok_or_else(|| InputError(format!("template `{template}` has no parameter `id`")))?;
            }
            if matches!(mode, Mode::Untimed) && !t.is_untimed() {
                t = untimed_projection(&t);
            }
            print!("{}", render_template(&t));
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { scenario, output } => {
            let cfg = in_file(&scenario, parse_scenario(&read(&scenario)?))?;
            let report = safety_oracle(&cfg)?;
            emit(&[report], &output)
        }
        Command::Agents { programs, query, depth, output } => {
            let mut ps = Vec::new();
            for p in &programs {
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                ps.push(in_file(p, parse_program(&read(p)?, &name))?);
            }
            let q = parse_agent_query(&query, &ps)?;
            let report = check_agent_property(&explore(&ps, depth), &q).map_err(InputError)?;
            emit(&[report], &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
