//! `ciss`: fit, rescore, evaluate and synthesize from the command line.

mod config;
mod error;
mod eval;
mod fit;
mod rescore;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ciss::eval::{ApMode, ErrorMode};

use config::RunConfig;
use error::CliResult;

#[derive(Parser)]
#[command(name = "ciss", version, about = "Rescore detections by inner-scene similarity")]
struct Cli {
    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApArg {
    Area,
    Voc07,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the dependency model from training pairs and patches.
    Fit {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Rescore detections and write the results CSV.
    Rescore {
        #[arg(short, long)]
        config: PathBuf,
        /// Rescore the full candidate set, then run NMS on the new scores.
        #[arg(long)]
        pre_nms: bool,
    },
    /// Evaluate detections or a rescore CSV against ground truth.
    Eval {
        #[arg(short, long)]
        config: PathBuf,
        /// Do not count localization or similar-category errors as false positives.
        #[arg(long)]
        ignore_loc_sim: bool,
        #[arg(long, value_enum)]
        ap_mode: Option<ApArg>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { config } => {
            let cfg = RunConfig::load(&config)?;
            pool(cfg.workers)?.install(|| fit::run(&cfg))
        }
        Command::Rescore { config, pre_nms } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.pre_nms |= pre_nms;
            pool(cfg.workers)?.install(|| rescore::run(&cfg))
        }
        Command::Eval {
            config,
            ignore_loc_sim,
            ap_mode,
        } => {
            let cfg = RunConfig::load(&config)?;
            let mut eval = cfg.eval.clone();
            if ignore_loc_sim {
                eval.filter.mode = ErrorMode::IgnoreLocSim;
            }
            match ap_mode {
                Some(ApArg::Area) => eval.ap_mode = ApMode::Area,
                Some(ApArg::Voc07) => eval.ap_mode = ApMode::Voc07,
                None => {}
            }
            eval::run(&cfg, &eval)
        }
        Command::Synth { config, n, seed } => {
            let cfg = RunConfig::load(&config)?;
            pool(cfg.workers)?.install(|| synth::run(&cfg, n, seed))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
