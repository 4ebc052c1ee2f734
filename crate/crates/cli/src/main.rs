//! `lgpgi` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 environment error (counter or sandbox unavailable, unwritable output).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lgpgi", version, about = "Lane-parallel LGP interpreter and patch search workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a test suite (programs, inputs and expected outputs).
    GenSuite(GenSuiteArgs),
    /// Run a suite through the scalar or the lane-parallel interpreter.
    Interpret(InterpretArgs),
    /// Measure interpreter throughput.
    Bench(BenchArgs),
    /// Run local search over patches for a scenario.
    Search(SearchArgs),
    /// Write the patched sources of a scenario.
    ApplyPatch(ApplyPatchArgs),
    /// Evaluate one patch; exit 0 iff all tests pass.
    Verify(VerifyArgs),
    /// Rebuild report CSVs from a saved step log.
    Report(ReportArgs),
    /// Sandbox child entry point.
    #[command(hide = true, disable_help_flag = true)]
    Sandbox {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// Compile toy-language sources to an artifact file.
    #[command(hide = true)]
    Toyc(ToycArgs),
}

#[derive(Debug, Args)]
struct GenSuiteArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    programs: usize,
    #[arg(long, default_value_t = 64)]
    cases: usize,
    /// Instructions per program.
    #[arg(long, default_value_t = 4)]
    length: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Impl {
    Scalar,
    Batch,
}

#[derive(Debug, Args)]
struct SuiteArg {
    /// Suite file; the built-in four-program fixture when omitted.
    #[arg(long)]
    suite: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InterpretArgs {
    #[command(flatten)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 8, value_parser = parse_width)]
    width: u32,
    #[arg(long = "impl", value_enum, default_value_t = Impl::Batch)]
    implementation: Impl,
    /// Also run the other implementation and fail on any difference.
    #[arg(long)]
    compare: bool,
    /// Write the per-step value distribution CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 8, value_parser = parse_width)]
    width: u32,
    /// Suite passes for the wall-clock measurement.
    #[arg(long, default_value_t = 10_000)]
    iterations: u64,
    /// Clock rate used to turn instruction counts into operations per second.
    #[arg(long, default_value_t = 3.8)]
    clock_ghz: f64,
    /// auto, hw or model; defaults to GI_COUNTER.
    #[arg(long)]
    counter: Option<String>,
    /// Spread passes over all cores.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct ScenarioArg {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Search steps after warmup (overrides the scenario).
    #[arg(long)]
    budget: Option<usize>,
    /// Neighbors evaluated per round (overrides the scenario).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "gi-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ApplyPatchArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long)]
    patch: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long)]
    patch: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// steps.csv written by `search`.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Steps per window of the patch-length series.
    #[arg(long, default_value_t = lgpgi::gi::report::LENGTH_WINDOW)]
    window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Debug,
    Opt,
}

#[derive(Debug, Args)]
struct ToycArgs {
    #[arg(long, value_enum, default_value_t = StageArg::Opt)]
    stage: StageArg,
    #[arg(long, default_value_t = 8)]
    width: u32,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(required = true)]
    sources: Vec<PathBuf>,
}

fn parse_width(s: &str) -> Result<u32, String> {
    match s {
        "8" | "16" | "32" => Ok(s.parse().expect("literal")),
        _ => Err(format!("lane width must be 8, 16 or 32, got {s:?}")),
    }
}

fn main() -> ExitCode {
    // The sandbox child takes its own argv, untouched by clap.
    let argv: Vec<String> = std::env::args().collect();
    if argv.get(1).map(String::as_str) == Some("sandbox") {
        lgpgi::harness::child_main(&argv[2..]);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSuite(a) => commands::gen_suite(a),
        Command::Interpret(a) => commands::interpret(a),
        Command::Bench(a) => commands::bench(a),
        Command::Search(a) => commands::search(a),
        Command::ApplyPatch(a) => commands::apply_patch(a),
        Command::Verify(a) => commands::verify(a),
        Command::Report(a) => commands::report(a),
        Command::Sandbox { args } => lgpgi::harness::child_main(&args),
        Command::Toyc(a) => commands::toyc(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lgpgi: {e:#}");
            ExitCode::from(commands::exit_code_of(&e))
        }
    }
}
