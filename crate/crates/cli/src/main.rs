//! Command-line front end: `discover` builds the transformation catalog,
//! `diagnose` classifies the undetected ones, `report` renders suggestions.
//! Exit codes: 0 success, 1 usage/configuration error, 2 subject-project
//! failure.

use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand};

use stubscope_core::campaign::{DiagnoseOutcome, DiscoverOutcome, ReportOutcome};
use stubscope_core::{CampaignConfig, Error, StageSelection, RUNNER_MARKER};

#[derive(Parser)]
#[command(
    name = "stubscope",
    version,
    about = "Find test-suite gaps: apply extreme transformations, diagnose why the suite misses them, and suggest fixes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate extreme transformations and detect which ones the suite catches
    Discover(CommonArgs),
    /// Classify undetected transformations (no-infection / no-propagation / weak-oracle)
    Diagnose(DiagnoseArgs),
    /// Render suggestions and campaign statistics from persisted evidence
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Subject project root (with src/ and tests/)
    #[arg(default_value = ".")]
    project: PathBuf,
    /// Output directory for campaign artifacts [default: <project>/.stubscope]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Observation repetitions per program version (N)
    #[arg(long)]
    runs: Option<u32>,
    /// Per-test timeout in seconds
    #[arg(long)]
    timeout: Option<u64>,
    /// Worker threads for per-transformation analysis
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Restrict the analysis to these transformation ids
    #[arg(long)]
    only: Vec<String>,
    /// Which analysis stages to run
    #[arg(long, default_value = "all")]
    stage: StageArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StageArg {
    Infection,
    Propagation,
    All,
}

impl From<StageArg> for StageSelection {
    fn from(value: StageArg) -> StageSelection {
        match value {
            StageArg::Infection => StageSelection::Infection,
            StageArg::Propagation => StageSelection::Propagation,
            StageArg::All => StageSelection::All,
        }
    }
}

fn main() {
    // Hidden self-execution entry: the analyzer spawns `stubscope
    // __run-subject ...` as the isolated per-test runner.
    let raw: Vec<String> = std::env::args().collect();
    if raw.get(1).map(String::as_str) == Some(RUNNER_MARKER) {
        exit(stubscope_core::runner::subject_main(raw[2..].to_vec()));
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                exit(1);
            }
            print!("{e}");
            exit(0);
        }
    };

    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            exit(match e {
                Error::Config(_) | Error::Prerequisite(_) => 1,
                _ => 2,
            });
        }
    }
}

fn build_config(common: &CommonArgs) -> Result<CampaignConfig, Error> {
    let mut config = CampaignConfig::load(&common.project)?;
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(runs) = common.runs {
        config.runs = runs;
    }
    if let Some(timeout) = common.timeout {
        config.timeout_secs = timeout;
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Discover(common) => {
            let config = build_config(&common)?;
            let outcome = stubscope_core::discover(&config)?;
            print_discover(&outcome, &config);
        }
        Command::Diagnose(args) => {
            let mut config = build_config(&args.common)?;
            if !args.only.is_empty() {
                config.only = Some(args.only.clone());
            }
            config.stage = args.stage.into();
            let outcome = stubscope_core::diagnose(&config)?;
            print_diagnose(&outcome);
        }
        Command::Report(common) => {
            let config = build_config(&common)?;
            let outcome = stubscope_core::report(&config)?;
            print_report(&outcome);
        }
    }
    Ok(())
}

fn print_discover(outcome: &DiscoverOutcome, config: &CampaignConfig) {
    use stubscope_core::Detection;
    let detected = outcome
        .catalog
        .iter()
        .filter(|t| t.detection == Detection::Detected)
        .count();
    let undetected = outcome
        .catalog
        .iter()
        .filter(|t| t.detection == Detection::Undetected)
        .count();
    let unknown = outcome.catalog.len() - detected - undetected;
    if outcome.cache_hit {
        println!("discover: cache hit (sources and configuration unchanged)");
    }
    println!(
        "discover: {} transformation(s): {detected} detected, {undetected} undetected, {unknown} unknown",
        outcome.catalog.len()
    );
    println!(
        "discover: {} method(s) discovered, {} skipped, {} test(s), {} flaky excluded",
        outcome.methods.len(),
        outcome.skipped.len(),
        outcome.tests.len(),
        outcome.flaky.len()
    );
    for err in &outcome.file_errors {
        eprintln!("discover: file error in {}: {}", err.file, err.message);
    }
    println!("discover: artifacts under {}", config.out_dir.display());
}

fn print_diagnose(outcome: &DiagnoseOutcome) {
    let mut counts = std::collections::BTreeMap::new();
    for d in &outcome.diagnoses {
        *counts.entry(d.symptom.label()).or_insert(0usize) += 1;
    }
    let rendered: Vec<String> = counts
        .iter()
        .map(|(label, count)| format!("{label}={count}"))
        .collect();
    println!(
        "diagnose: {} transformation(s) classified ({} resumed): {}",
        outcome.diagnoses.len(),
        outcome.resumed,
        if rendered.is_empty() {
            "nothing to do".to_string()
        } else {
            rendered.join(" ")
        }
    );
}

fn print_report(outcome: &ReportOutcome) {
    println!(
        "report: {} suggestion(s), {} unresolved",
        outcome.suggestions.len(),
        outcome.unresolved.len()
    );
    println!("report: human-readable  {}", outcome.report_path.display());
    println!(
        "report: machine catalog {}",
        outcome.suggestions_path.display()
    );
    println!("report: summary         {}", outcome.summary_path.display());
    println!(
        "report: distances table {}",
        outcome.distances_path.display()
    );
}
