//! `teach`: simulations, bounds, oracle checks and the session service.

mod commands;
mod theta;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "teach",
    version,
    about = "Adaptive teaching under a half-life regression memory model"
)]
struct Cli {
    /// Worker threads for parallel work; defaults to every core.
    #[arg(long, global = true, env = "TEACH_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and dump every trial as JSON lines.
    Simulate(RunArgs),
    /// Run an experiment grid and write the trial CSV.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Named grid: fig4-T or fig4-n.
        #[arg(long)]
        preset: Option<String>,
        /// Also write per-cell means and standard errors here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Greedy teaching under misspecified teacher models, by number of easy concepts.
    Sensitivity {
        #[command(flatten)]
        run: RunArgs,
        /// Largest number of easy concepts in the sweep.
        #[arg(long)]
        max_easy: Option<usize>,
    },
    /// Per-step approximation coefficients along a greedy run.
    Bounds {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Named instance; only appendix-toy is defined.
        #[arg(long)]
        preset: Option<String>,
        /// empirical or exact coefficient computation.
        #[arg(long, default_value = "empirical")]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare greedy against the exhaustive optimum and the certified ratio.
    Oracle {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the flashcard session service.
    Serve(ServeArgs),
}

/// Experiment settings; flags override the config file.
#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Recall is measured at T + s.
    #[arg(long = "s")]
    recall_offset: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "TEACH_SEED")]
    seed: Option<u64>,
    /// Comma-separated policy names, e.g. GR,LR,RR,RD.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A teaching instance for bounds and oracle runs.
#[derive(Debug, Args)]
struct InstanceArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// appendix-toy, one a,b,c triple for every concept, or triples separated by ';'.
    #[arg(long)]
    theta: Option<String>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "TEACH_ADDR", default_value = "127.0.0.1:8080")]
    addr: String,
    /// Session logs and uploaded decks; omit to keep everything in memory.
    #[arg(long, env = "TEACH_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Directories of deck files loaded at startup.
    #[arg(long = "decks", env = "TEACH_DECK_DIRS", value_delimiter = ',')]
    deck_dirs: Vec<PathBuf>,
    #[arg(long, env = "TEACH_ANSWER_WINDOW_MS", default_value_t = teach_service::service::DEFAULT_ANSWER_WINDOW_MS)]
    answer_window_ms: u64,
    #[arg(long, env = "TEACH_REVIEW_WINDOW_MS", default_value_t = teach_service::service::DEFAULT_REVIEW_WINDOW_MS)]
    review_window_ms: u64,
    /// Seed the teacher with this recall for cards answered correctly in the prequiz.
    #[arg(long, env = "TEACH_PREQUIZ_PRIOR")]
    prequiz_prior: Option<f64>,
    #[arg(long)]
    case_sensitive: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
