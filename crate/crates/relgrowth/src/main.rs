use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use relgrowth::config::Config;
use relgrowth::{golden, runner};

const DEFAULT_GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/golden.csv");

/// Relative growth-rate portfolio optimization with probability weighting.
#[derive(Debug, Parser)]
#[command(name = "relgrowth", version)]
struct Cli {
    /// JSON configuration (defaults reproduce the 27-cell study).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides such as `c=0.3,g=0,weighting=identity`.
    #[arg(long, value_name = "KEY=VAL[,...]")]
    scenario: Vec<String>,
    /// Output directory. `CPT_OUT` takes precedence when set.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Recompute the golden table and compare it with the stored file.
    #[arg(long)]
    check_golden: bool,
    /// Recompute the golden table and write it.
    #[arg(long, conflicts_with = "check_golden")]
    write_golden: bool,
    #[arg(long, value_name = "PATH", default_value = DEFAULT_GOLDEN)]
    golden: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, short)]
    quiet: bool,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Config::from_json(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => Config::default(),
    };
    for s in &cli.scenario {
        config.apply_overrides(s)?;
    }
    config.scenarios()?;
    Ok(config)
}

fn check_golden(path: &PathBuf) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let stored = golden::parse(&text)?;
    let fresh = golden::compute()?;
    let problems = golden::compare(&fresh, &stored);
    for p in &problems {
        eprintln!("golden: {p}");
    }
    if problems.is_empty() {
        println!("golden: {} rows match {}", fresh.len(), path.display());
    }
    Ok(problems.is_empty())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("thread pool")?;
    }
    if cli.check_golden {
        return Ok(if check_golden(&cli.golden)? { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }
    if cli.write_golden {
        let rows = golden::compute()?;
        std::fs::write(&cli.golden, golden::render(&rows)).with_context(|| format!("writing {}", cli.golden.display()))?;
        println!("wrote {} rows to {}", rows.len(), cli.golden.display());
        return Ok(ExitCode::SUCCESS);
    }
    let config = load_config(&cli)?;
    let out = std::env::var_os("CPT_OUT").map(PathBuf::from).unwrap_or(cli.out);
    let cells = runner::run(&config, &out)?;
    if !cli.quiet {
        for c in &cells {
            match &c.outcome {
                Ok(s) => println!(
                    "{:<28} {:<12} lambda*={:.10}",
                    c.scenario.id,
                    s.solution.regime.name(),
                    s.solution.lambda_star
                ),
                Err(e) => println!("{:<28} {:<12} {e}", c.scenario.id, runner::status_of(e)),
            }
        }
        println!("results in {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
