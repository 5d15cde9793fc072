use clap::{Args, Parser, Subcommand};
use semimax_cli::config::{ExperimentConfig, ExperimentKind};
use semimax_cli::record::ExperimentRecord;
use semimax_cli::{prepare, report, run, write_outputs, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "semimax", version, about = "Maximal-function experiments for complex elliptic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: `output` from the config, else `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes per axis.
    #[arg(long)]
    resolution: Option<usize>,
    /// Treat warnings as failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    Ellipticity(RunArgs),
    Semigroup(RunArgs),
    ImaginaryPowers(RunArgs),
    Maximal(RunArgs),
    Ergodic(RunArgs),
    Difference(RunArgs),
    Duhamel(RunArgs),
    Transfer(RunArgs),
    Subordinate(RunArgs),
    SquareFunction(RunArgs),
    TwoParam(RunArgs),
    FullSuite(RunArgs),
    /// Pass/fail table over `summary.json` files.
    Report {
        records: Vec<PathBuf>,
    },
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<bool, String> {
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides { seed: args.seed, resolution: args.resolution };
    let cfg = prepare(cfg, kind, &overrides).map_err(|e| e.to_string())?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let (record, artifacts, timing) = run(&cfg).map_err(|e| e.to_string())?;
    let path = write_outputs(&out, &record, &artifacts, &timing).map_err(|e| e.to_string())?;
    print!("{}", report::build(std::slice::from_ref(&record)).render());
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {}", path.display());
    Ok(if args.strict { record.passed_strict() } else { record.passed() })
}

fn load_record(path: &PathBuf) -> Result<ExperimentRecord, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Report { records } => records.iter().map(load_record).collect::<Result<Vec<_>, _>>().map(|rs| {
            let rep = report::build(&rs);
            print!("{}", rep.render());
            !rep.failed()
        }),
        Command::Ellipticity(a) => execute(ExperimentKind::Ellipticity, a),
        Command::Semigroup(a) => execute(ExperimentKind::Semigroup, a),
        Command::ImaginaryPowers(a) => execute(ExperimentKind::ImaginaryPowers, a),
        Command::Maximal(a) => execute(ExperimentKind::Maximal, a),
        Command::Ergodic(a) => execute(ExperimentKind::Ergodic, a),
        Command::Difference(a) => execute(ExperimentKind::Difference, a),
        Command::Duhamel(a) => execute(ExperimentKind::Duhamel, a),
        Command::Transfer(a) => execute(ExperimentKind::Transfer, a),
        Command::Subordinate(a) => execute(ExperimentKind::Subordinate, a),
        Command::SquareFunction(a) => execute(ExperimentKind::SquareFunction, a),
        Command::TwoParam(a) => execute(ExperimentKind::TwoParam, a),
        Command::FullSuite(a) => execute(ExperimentKind::FullSuite, a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
