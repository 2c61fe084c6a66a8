use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use alsim::cases::CaseBase;
use alsim::config::{load_config, Mode};
use alsim::experiment::{run_experiment, write_csv, RunOptions};
use alsim::plot::emit_plot;
use alsim::summary::summarize;
use alsim::{Error, Result};

#[derive(Parser)]
#[command(name = "alsim", about = "Anytime learning experiments on a pursuit task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mode over every seed and write a CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the mode in the config.
        #[arg(long)]
        mode: Option<Mode>,
        /// Write the final case base of the first seed (case_based mode).
        #[arg(long)]
        save_cases: Option<PathBuf>,
        /// Start every case_based run from this case base.
        #[arg(long)]
        load_cases: Option<PathBuf>,
        /// Run seeds concurrently; output is unchanged.
        #[arg(long)]
        parallel: bool,
    },
    /// Run several modes on the same config into one CSV.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "baseline,anytime,case_based")]
        modes: Vec<Mode>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallel: bool,
    },
    /// Print per-phase summary statistics for a CSV.
    Summarize {
        csv: PathBuf,
        /// Moving-average window in episodes.
        #[arg(long, default_value_t = 20)]
        window: usize,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Render a CSV as an SVG plot.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        window: usize,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            mode,
            save_cases,
            load_cases,
            parallel,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(m) = mode {
                cfg.mode = m;
                cfg.validate()?;
            }
            let initial_cases = load_cases.map(|p| CaseBase::load(&p)).transpose()?;
            let output = run_experiment(
                &cfg,
                &[cfg.mode],
                &RunOptions {
                    parallel,
                    initial_cases,
                },
            )?;
            write_csv(&out, &output.rows)?;
            if let Some(path) = save_cases {
                let cases = output
                    .cases
                    .ok_or_else(|| Error::config("save_cases", "only case_based runs produce a case base"))?;
                cases.save(&path)?;
            }
            Ok(())
        }
        Command::Compare {
            config,
            modes,
            out,
            parallel,
        } => {
            let cfg = load_config(&config)?;
            let output = run_experiment(
                &cfg,
                &modes,
                &RunOptions {
                    parallel,
                    initial_cases: None,
                },
            )?;
            write_csv(&out, &output.rows)
        }
        Command::Summarize { csv, window, json } => {
            let stats = summarize(&csv, window)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            } else {
                print!("{stats}");
            }
            Ok(())
        }
        Command::Plot { csv, out, window } => emit_plot(&csv, &out, window),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
