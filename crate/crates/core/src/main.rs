//! `tsm run <config>` and `tsm verify <config>`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsm_core::config::{load_config, RunConfig};
use tsm_core::error::TsmError;
use tsm_core::pipeline::{run, verify};

#[derive(Parser)]
#[command(name = "tsm", version, about = "Time-separated stochastic simulation of inelastic material points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run TSM and/or Monte Carlo and write CSV, comparison and timing outputs.
    Run(Overrides),
    /// Check the tangents by finite differences and the moment contractions by sampling.
    Verify(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, env = "TSM_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "mc-n")]
    mc_n: Option<usize>,
    /// Monte Carlo worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig, TsmError> {
        let mut cfg = load_config(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.mc_n {
            if n < 2 {
                return Err(tsm_core::error::ConfigError::Validation(vec![format!(
                    "--mc-n must be at least 2 (got {n})"
                )])
                .into());
            }
            cfg.mc_n = n;
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(
                    tsm_core::error::ConfigError::Validation(vec!["--workers must be at least 1".into()]).into()
                );
            }
            cfg.workers = Some(w);
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<ExitCode, TsmError> {
    match cli.command {
        Command::Run(o) => {
            let cfg = o.load()?;
            let report = run(&cfg)?;
            print!("{}", report.timing.render(&cfg));
            if let Some(c) = &report.comparison {
                for q in &c.quantities {
                    println!(
                        "{}: mean agrees at {:.1}% of steps, std at {:.1}%",
                        q.name,
                        100.0 * q.mean_pass_fraction(|_| true),
                        100.0 * q.std_pass_fraction(|_| true)
                    );
                }
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(o) => {
            let cfg = o.load()?;
            let report = verify(&cfg)?;
            print!("{}", report.render());
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in report.failures() {
                    eprintln!("failed: {f}");
                }
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
