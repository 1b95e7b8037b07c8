use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curveortho::cli::{exit, exit_code, run, ExperimentConfig, RunOptions};

/// Orthogonal polynomials over analytic Jordan curves.
#[derive(Parser, Debug)]
#[command(name = "curveortho", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Enforce the acceptance thresholds (exit 3 on failure).
        #[arg(long)]
        check: bool,
        /// Override the initial node count of the expansion contours.
        #[arg(long, value_name = "N")]
        nodes: Option<usize>,
        /// Emit one SVG zero scatter per degree.
        #[arg(long)]
        svg: bool,
        /// Output directory (overrides `output_dir`).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker threads for the degree sweep.
        #[arg(long, value_name = "K", env = "CURVEORTHO_THREADS")]
        jobs: Option<usize>,
        /// Log per-term sizes and bounds of each expansion.
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let Command::Run { config, check, nodes, svg, out, jobs, verbose } = cli.command;
    let opts = RunOptions { check, nodes, svg, out, jobs, verbose };
    let result = ExperimentConfig::load(&config).and_then(|cfg| run(cfg, opts));
    let code = match result {
        Ok(summary) => {
            for c in &summary.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {}: {:.3e} (threshold {:.3e})", c.name, c.value, c.threshold);
            }
            if let Some(e) = summary.max_compare_error {
                println!("max |P_expansion - P_oracle| = {e:.3e}");
            }
            if check && !summary.passed {
                exit::CHECK
            } else {
                exit::OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
