mod commands;
mod report;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agler_core::SolverParams;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(
    name = "agler-lab",
    version,
    about = "Schur-Agler certificates, realizations and interpolation on finite samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Problem file; standard input when absent.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Result file, written atomically; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub feas_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Admissibility of a kernel for a preordering.
    CheckKernel,
    /// Auxiliary test-function data, its finite extension and the defect identity.
    Aux,
    /// Agler decomposition at a level, or a separating witness.
    Decompose,
    /// Decomposition followed by a unitary realization.
    Realize,
    /// Transfer function of a colligation at points.
    Eval,
    /// Bisection for the sampled norm, or the decision at a given level.
    Norm {
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Hereditary defects of a commuting tuple.
    Brehmer,
    /// Transfer function at a commuting tuple; without input, a random suite.
    Vn {
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Interpolation feasibility and an interpolant.
    Pick,
    /// Built-in boundary tuples with their verification.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleName {
    Parrott,
    Gkvw,
    Kv,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error(transparent)]
    Core(#[from] agler_core::Error),
    #[error("{0}")]
    Usage(String),
}

/// A finished run: the JSON document and the exit status.
pub struct Outcome {
    pub document: String,
    pub code: u8,
    pub summary: String,
}

impl Cli {
    fn input_name(&self) -> String {
        self.input.as_ref().map_or_else(|| "<stdin>".into(), |p| p.display().to_string())
    }

    pub fn read_input<T: for<'de> Deserialize<'de>>(&self) -> Result<T, CliError> {
        let name = self.input_name();
        let text = match &self.input {
            Some(path) => fs::read_to_string(path).map_err(|source| CliError::Io { path: name.clone(), source })?,
            None => {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s).map_err(|source| CliError::Io { path: name.clone(), source })?;
                s
            }
        };
        serde_json::from_str(&text).map_err(|source| CliError::Parse { path: name, source })
    }

    /// Solver settings from the problem file, overridden by flags.
    pub fn solver(&self, from_file: Option<SolverParams>) -> Result<SolverParams, CliError> {
        let mut params = from_file.unwrap_or_default();
        if let Some(t) = self.feas_tol {
            params.feas_tol = t;
        }
        if let Some(m) = self.max_iter {
            params.max_iter = m;
        }
        params.validate()?;
        Ok(params)
    }
}

fn write_atomically(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AGLER_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("AGLER_LAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    let outcome = commands::dispatch(cli)?;
    match &cli.output {
        Some(path) => write_atomically(path, &outcome.document)?,
        None => io::stdout()
            .write_all(outcome.document.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?,
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if !cli.quiet {
                eprintln!("{}", outcome.summary);
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("agler-lab: {e}");
            ExitCode::from(1)
        }
    }
}
