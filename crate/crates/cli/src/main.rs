//! `polybound` command-line front end.
//!
//! Every command prints exactly one JSON document on stdout (or a table with
//! `--pretty`); diagnostics go to stderr.
//!
//! Exit codes:
//! - 0: success
//! - 1: negative verdict (proof rejected, sandwich violated, reduction check
//!   mismatch, or a failed file in directory mode)
//! - 2: usage error
//! - 3: unreadable or malformed input file
//! - 4: precondition not met (instance class, size cap, permutation)
//! - 5: internal fault

mod commands;
mod pretty;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use polybound::Error;

#[derive(Parser, Debug)]
#[command(name = "polybound", version, about = "Cardinality bounds for conjunctive queries under degree constraints")]
struct Cli {
    /// Print a human-readable table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute one bound for an instance file, or for every `.json` file in a directory.
    Bound {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: BoundKind,
        /// Permutation as comma-separated names or 1-based indices.
        #[arg(long, conflicts_with = "all_pi")]
        pi: Option<String>,
        /// Minimize over every permutation (n <= 7).
        #[arg(long)]
        all_pi: bool,
        /// Let each sink of the flow bound also draw from earlier singletons.
        #[arg(long)]
        multi_source: bool,
    },
    /// Generate a proof sequence for a simple instance.
    Proof {
        file: PathBuf,
        /// Write the proof text here instead of embedding it in the report.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a proof sequence against an instance.
    Verify { file: PathBuf, proof: PathBuf },
    /// Compute every bound and check the known inequalities between them.
    Compare {
        file: PathBuf,
        #[arg(long)]
        pi: Option<String>,
    },
    /// Rewrite an instance into a restricted shape with the same polymatroid bound.
    Reduce {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: ReduceMode,
        /// Compare the polymatroid bound of both instances.
        #[arg(long)]
        check: bool,
        /// Also write the reduced instance here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Report the instance class and the dependency graph.
    Classify { file: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    FlowSimple,
    Oracle,
    Normal,
    Modular,
    Chain,
    Flow,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::FlowSimple => "flow-simple",
            BoundKind::Oracle => "oracle",
            BoundKind::Normal => "normal",
            BoundKind::Modular => "modular",
            BoundKind::Chain => "chain",
            BoundKind::Flow => "flow",
        }
    }

    pub fn uses_permutation(self) -> bool {
        matches!(self, BoundKind::Chain | BoundKind::Flow)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReduceMode {
    AcyclicSimple,
    TwoThree,
    SimpleFd,
}

impl ReduceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReduceMode::AcyclicSimple => "acyclic-simple",
            ReduceMode::TwoThree => "two-three",
            ReduceMode::SimpleFd => "simple-fd",
        }
    }
}

/// A failed run: what to print on stderr and the exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Precondition(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 3,
            Failure::Precondition(_) => 4,
            Failure::Internal(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Precondition(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::ProofStructure { .. } => Failure::Input(e.to_string()),
            Error::Structural(_) | Error::Classification(_) | Error::Size { .. } => Failure::Precondition(e.to_string()),
            Error::Witness(_) | Error::Internal(_) | Error::Generation { .. } => Failure::Internal(e.to_string()),
        }
    }
}

/// A finished run: the report and whether its verdict was positive.
pub struct Report {
    pub json: serde_json::Value,
    pub ok: bool,
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    match &cli.command {
        Command::Bound { file, kind, pi, all_pi, multi_source } => {
            let opts = commands::BoundArgs { kind: *kind, pi: pi.clone(), all_pi: *all_pi, multi_source: *multi_source };
            if file.is_dir() {
                commands::bound_dir(file, &opts)
            } else {
                commands::bound(file, &opts)
            }
        }
        Command::Proof { file, output } => commands::proof(file, output.as_deref()),
        Command::Verify { file, proof } => commands::verify(file, proof),
        Command::Compare { file, pi } => commands::compare(file, pi.as_deref()),
        Command::Reduce { file, mode, check, output } => commands::reduce(file, *mode, *check, output.as_deref()),
        Command::Classify { file } => commands::classify(file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let text = if cli.pretty {
                pretty::render(&report.json)
            } else {
                serde_json::to_string_pretty(&report.json).expect("report serializes") + "\n"
            };
            // A closed pipe on the reader's side is not our failure.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("polybound: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
