use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gaugelab::experiments::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "gaugelab", version, about = "Run gauge-theory scenarios and write JSON/CSV reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        scenario: String,
        /// JSON config; its scenario field is overridden by the positional argument.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for <scenario>.json and <scenario>.csv.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List scenarios and the statements they check.
    List,
}

fn run(scenario: String, config: Option<PathBuf>, out: PathBuf, seed: Option<u64>, workers: Option<usize>) -> Result<bool> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut value: serde_json::Value = serde_json::from_str(&text).context("parsing config")?;
            value["scenario"] = serde_json::Value::String(scenario);
            ScenarioConfig::from_json(&value.to_string())?
        }
        None => ScenarioConfig::new(&scenario),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    cfg.validate()?;
    let report = experiments::run(&cfg)?;
    let (json, csv) = report.write_to(&out)?;
    for c in report.cases.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {}", c.id, c.error.as_deref().unwrap_or("assertion failed"));
    }
    let s = &report.summary;
    println!(
        "{}: {}/{} cases passed ({} errors) -> {}, {}",
        report.scenario,
        s.passed,
        s.cases,
        s.errors,
        json.display(),
        csv.display()
    );
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in experiments::scenarios() {
                println!("{:<32} {}", s.name, s.anchor);
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, config, out, seed, workers } => match run(scenario, config, out, seed, workers) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
