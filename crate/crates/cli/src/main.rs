//! `acvass`: decide reachability questions for affine continuous VASS from
//! the command line.
//!
//! Exit codes: 0 yes, 1 no, 2 undecidable class, 3 unknown (open class,
//! solver cap, or no bounded witness), 4 bad input, 5 internal failure.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "acvass", version, about = "Decision procedures for affine continuous VASS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the verdict for each problem on the machine's matrix class.
    Classify { machine: PathBuf },
    /// Decide whether the source configuration reaches the target exactly.
    Reach(Query),
    /// Decide whether the source configuration reaches something at least
    /// the target.
    Cover(Query),
    /// Decide whether some configuration in the given state is reachable.
    StateReach(StateQuery),
    /// Bounded search for a witness of length at most --max-len.
    Oracle(OracleQuery),
    /// Translate an instance into another machine class.
    Compile(CompileArgs),
    /// Generate a random machine with sample configurations.
    GenRandom(GenArgs),
    /// Write a linear system in SMT-LIB 2.
    SmtExport(SmtArgs),
    /// Replay a firing sequence and print every configuration.
    Simulate(SimulateArgs),
}

/// Configurations are written `state(v1, ..., vd)` or `@file.json`.
#[derive(Args)]
struct Query {
    machine: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    /// Print the firing sequence.
    #[arg(long)]
    witness: bool,
    /// Print the solver's certificate as JSON.
    #[arg(long)]
    certificate: bool,
    /// Write the solver's linear system to FILE in SMT-LIB 2.
    #[arg(long, value_name = "FILE")]
    dump_system: Option<PathBuf>,
    /// Run the bounded search even when no solver applies.
    #[arg(long)]
    force_oracle: bool,
    #[arg(long, default_value_t = 8)]
    max_len: usize,
    /// Largest transition support the solver enumerates.
    #[arg(long)]
    support_cap: Option<usize>,
}

#[derive(Args)]
struct StateQuery {
    machine: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long = "to-state")]
    to_state: String,
    #[arg(long)]
    witness: bool,
    #[arg(long)]
    force_oracle: bool,
    #[arg(long, default_value_t = 8)]
    max_len: usize,
}

#[derive(Args)]
struct OracleQuery {
    machine: PathBuf,
    #[arg(long)]
    from: String,
    /// Target configuration; reached exactly unless --cover is given.
    #[arg(long, conflicts_with = "to_state", required_unless_present = "to_state")]
    to: Option<String>,
    #[arg(long = "to-state")]
    to_state: Option<String>,
    #[arg(long, requires = "to")]
    cover: bool,
    #[arg(long, default_value_t = 8)]
    max_len: usize,
    /// Keep every configuration inside the unit cube.
    #[arg(long)]
    one_bounded: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Compiler {
    CoverToReach,
    ZeroTestToOneBounded,
    OneBoundedToReset,
    ZeroTestToNegative,
    OneBoundedToWeighted,
    ResetToZeroLine,
    BooleanToReset,
    BooleanToPerm,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(value_enum)]
    name: Compiler,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// Source configurations, for compilers that fix the question.
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long = "to-state")]
    to_state: Option<String>,
    /// Gadget matrix as JSON rows, e.g. `[[1,-1],[0,1]]`.
    #[arg(long)]
    matrix: Option<String>,
    /// Permutation used by boolean-to-perm, e.g. `1,2,0`.
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inclusive ranges are written `lo..hi` or as a single number.
    #[arg(long, default_value = "1..3")]
    dims: String,
    #[arg(long, default_value = "1..3")]
    states: String,
    #[arg(long, default_value = "1..4")]
    transitions: String,
    #[arg(long, default_value_t = 2)]
    entry_max: i64,
    #[arg(long, default_value = "-2..2", allow_hyphen_values = true)]
    deltas: String,
    #[arg(long = "out")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SmtArgs {
    machine: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long)]
    cover: bool,
    /// Export the system of this transition path (comma-separated ids)
    /// instead of the solver's.
    #[arg(long)]
    path: Option<String>,
    #[arg(long, requires = "path")]
    one_bounded: bool,
    #[arg(long)]
    support_cap: Option<usize>,
    #[arg(long = "out")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    machine: PathBuf,
    #[arg(long)]
    from: String,
    /// Firing sequence JSON file.
    #[arg(long)]
    seq: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Code {
    Yes = 0,
    No = 1,
    Undecidable = 2,
    Unknown = 3,
    Usage = 4,
    Internal = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl ToString) -> Self {
        Failure { code: Code::Usage, message: message.to_string() }
    }

    pub fn internal(message: impl ToString) -> Self {
        Failure { code: Code::Internal, message: message.to_string() }
    }
}

fn dispatch(command: Command, out: &mut String) -> Result<Code, Failure> {
    match command {
        Command::Classify { machine } => commands::classify(&machine, out),
        Command::Reach(q) => commands::reach_or_cover(&q, false, out),
        Command::Cover(q) => commands::reach_or_cover(&q, true, out),
        Command::StateReach(q) => commands::state_reach(&q, out),
        Command::Oracle(q) => commands::oracle(&q, out),
        Command::Compile(a) => commands::compile(&a, out),
        Command::GenRandom(a) => commands::gen_random(&a, out),
        Command::SmtExport(a) => commands::smt_export(&a, out),
        Command::Simulate(a) => commands::simulate(&a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Code::Usage as u8 } else { 0 });
        }
    };
    std::panic::set_hook(Box::new(|info| eprintln!("internal error: {info}")));
    let mut out = String::new();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli.command, &mut out)));
    // a closed pipe downstream is not our failure
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    let code = match result {
        Ok(Ok(code)) => code,
        Ok(Err(failure)) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
        Err(_) => Code::Internal,
    };
    ExitCode::from(code as u8)
}
