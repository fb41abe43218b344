use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eps_cli::{run_experiment, CheckStatus, ExperimentConfig};

#[derive(Parser)]
#[command(name = "eps", version, about = "Run extended phase space conductivity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV trajectories plus report.json.
    Run {
        /// TOML configuration; missing keys take their defaults.
        config: PathBuf,
        /// Replace one value, e.g. `--override medium.alpha=2`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory, replacing `output_dir`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Print nothing but errors.
        #[arg(long)]
        quiet: bool,
    },
    /// Print the fully resolved configuration as TOML.
    Config {
        config: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn resolve(config: Option<&PathBuf>, overrides: &[String]) -> eps_cli::Result<ExperimentConfig> {
    match config {
        Some(path) => ExperimentConfig::load(path, overrides),
        None => ExperimentConfig::from_toml_str("", overrides),
    }
}

fn format_complex(z: eps_core::Complex64) -> String {
    format!("{:.9} {} {:.9}i", z.re, if z.im < 0.0 { '-' } else { '+' }, z.im.abs())
}

fn run(config: PathBuf, overrides: Vec<String>, out: Option<PathBuf>, quiet: bool) -> eps_cli::Result<bool> {
    let mut config = ExperimentConfig::load(&config, &overrides)?;
    if let Some(out) = out {
        config.output_dir = out;
    }
    let report = run_experiment(&config)?;
    if !quiet {
        if let Some(theory) = report.sigma_theory {
            println!("sigma theory       {}", format_complex(theory));
        }
        for g in &report.gauges {
            match &g.conductivity {
                Some(c) => println!(
                    "sigma {:<12} {}  relative error {:.3e}",
                    g.gauge.to_string(),
                    format_complex(c.sigma),
                    c.relative_error
                ),
                None => println!("sigma {:<12} (t_final before averaging window)", g.gauge.to_string()),
            }
        }
        for c in &report.checks {
            let status = match c.status {
                CheckStatus::Passed => "pass",
                CheckStatus::Failed => "FAIL",
                CheckStatus::Skipped => "skip",
            };
            let value = c.value.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            println!("[{status}] {:<34} {value:>10} (tol {:.0e})", c.name, c.tolerance);
        }
        println!("wrote {}", config.output_dir.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = matches!(cli.command, Command::Run { quiet: true, .. });
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    let outcome = match cli.command {
        Command::Run {
            config,
            overrides,
            out,
            quiet,
        } => run(config, overrides, out, quiet),
        Command::Config { config, overrides } => resolve(config.as_ref(), &overrides)
            .and_then(|c| c.to_toml_string())
            .map(|text| {
                print!("{text}");
                true
            }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
