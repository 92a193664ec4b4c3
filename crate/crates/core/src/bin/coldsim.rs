use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};

use coldsim::config::describe_keys;
use coldsim::policy::Strategy;
use coldsim::trace::read_trace;
use coldsim::{emit_reports, parse_config, run_with, ScenarioConfig, SimError};

/// Simulates a region-based heap that sequesters cold objects found by
/// stack sampling, and writes CSV reports.
#[derive(Parser, Debug)]
#[command(name = "coldsim", version)]
struct Cli {
    /// Scenario file of `key = value` lines. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    t_cold_ms: Option<u64>,
    #[arg(long)]
    sample_interval_ms: Option<u64>,
    #[arg(long)]
    p_max: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run the access-barrier oracle and write convergence.csv.
    #[arg(long)]
    oracle: bool,
    /// Directory for the CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the event stream to this trace file.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Replay a recorded trace instead of generating a workload.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig, SimError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => ScenarioConfig::default(),
    };
    let mut set = |key: &str, value: String| {
        config
            .set(key, &value)
            .map_err(|m| SimError::Config(format!("{key}: {m}")))
    };
    if let Some(s) = cli.strategy {
        set("strategy", s.to_string())?;
    }
    if let Some(v) = cli.t_cold_ms {
        set("t_cold_ms", v.to_string())?;
    }
    if let Some(v) = cli.sample_interval_ms {
        set("sample_interval_ms", v.to_string())?;
    }
    if let Some(v) = cli.p_max {
        set("p_max", v.to_string())?;
    }
    if let Some(v) = cli.seed {
        set("seed", v.to_string())?;
    }
    if cli.oracle {
        set("oracle", "true".into())?;
    }
    if let Some(dir) = &cli.out {
        set("output_dir", dir.display().to_string())?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        set(k.trim(), v.trim().to_string())?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), SimError> {
    let config = build_config(&cli)?;
    let replay = match &cli.replay {
        Some(path) => Some(read_trace(BufReader::new(File::open(path)?))?),
        None => None,
    };
    let report = match &cli.record {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            run_with(&config, replay, Some(&mut out))?
        }
        None => run_with(&config, replay, None)?,
    };
    if let Some(dir) = &config.output_dir {
        emit_reports(&report, dir)?;
    }
    for (k, v) in report.summary.rows() {
        println!("{k} = {v}");
    }
    if let Some(v) = report.violations.first() {
        return Err(SimError::Invariant(v.clone()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let command = Cli::command().after_help(format!("Configuration keys:\n{}", describe_keys()));
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coldsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
