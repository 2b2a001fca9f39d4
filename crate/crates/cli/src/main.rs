//! `polyspec <kind> [--config path] [--seed N] [--workers K] [--out dir]`
//!
//! Exit codes: 0 when every check passes, 2 when a statistical check fails,
//! 1 on any error. `polyspec validate --config path` only checks the config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;
use polyspec_core::experiment::{run, validate, ExperimentConfig, ExperimentKind};
use polyspec_core::Error;

#[derive(Debug, Parser)]
#[command(name = "polyspec", version, about = "Random polymer spectral experiments")]
struct Cli {
    /// Experiment kind, or `validate`.
    #[arg(value_parser = kind_names())]
    kind: String,
    /// JSON experiment config; defaults for the kind when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for the CSV and JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn kind_names() -> PossibleValuesParser {
    let mut names: Vec<&'static str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
    names.push("validate");
    PossibleValuesParser::new(names)
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match (&cli.config, ExperimentKind::from_name(&cli.kind)) {
        (Some(path), kind) => {
            let config = ExperimentConfig::load(path)?;
            if let Some(kind) = kind {
                if config.kind != kind {
                    return Err(Error::Config {
                        path: "kind".into(),
                        message: format!(
                            "config is for `{}` but `{}` was requested",
                            config.kind.name(),
                            kind.name()
                        ),
                    });
                }
            }
            config
        }
        (None, Some(kind)) => ExperimentConfig::new(kind),
        (None, None) => {
            return Err(Error::Config {
                path: "--config".into(),
                message: "validate needs a config file".into(),
            })
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.kind == "validate" {
        let diagnostics = validate(&config);
        for d in &diagnostics {
            eprintln!("error: {d}");
        }
        if diagnostics.is_empty() {
            println!("config ok ({}), hash {}", config.kind.name(), config.hash());
            return ExitCode::SUCCESS;
        }
        return ExitCode::from(1);
    }
    let report = match run(&config).and_then(|r| r.write(&config.output_dir).map(|_| r)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} {}: {} ({})", c.name, c.value, c.requirement);
    }
    println!(
        "{} done in {:.1}s; wrote {} and {}",
        config.kind.name(),
        report.wall_clock.as_secs_f64(),
        report.csv_path(&config.output_dir).display(),
        report.json_path(&config.output_dir).display()
    );
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
