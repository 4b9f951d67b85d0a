//! `openset`: command-line driver for the incremental recognition engine.
//!
//! Results go to stdout as `key=value` lines. Failures print one JSON object
//! `{"error": kind, "message": text}` on stderr; usage errors and missing
//! input files exit with 2, everything else with 1.

mod commands;
mod failure;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "openset", version, about = "Incremental open-set recognition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the commands that read an experiment configuration.
#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RatioFlags {
    #[arg(long)]
    ratio_start: Option<f64>,
    #[arg(long)]
    ratio_end: Option<f64>,
    #[arg(long)]
    ratio_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic Gaussian corpus as train.fvec and test.fvec.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        train_per_class: Option<usize>,
        #[arg(long)]
        test_per_class: Option<usize>,
    },
    /// Jointly train a base head on a feature file and save the checkpoint.
    TrainBase {
        #[command(flatten)]
        common: Common,
        /// Training feature file.
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add one class to a head from a file of positives.
    AddClass {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        head: PathBuf,
        /// Positives; if the file has a class with this name only its
        /// examples are used, otherwise every example is.
        #[arg(long)]
        positives: PathBuf,
        #[arg(long)]
        name: String,
        /// Labeled examples of the known classes to draw negatives from.
        #[arg(long)]
        pools: PathBuf,
        /// Output checkpoint; defaults to overwriting --head.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-1 accuracy, AP or combined precision from files.
    Eval {
        /// CSV with `prediction` and `label` columns.
        #[arg(long, conflicts_with_all = ["detections", "head"])]
        predictions: Option<PathBuf>,
        /// JSON with `detections` and `ground_truths` arrays.
        #[arg(long, conflicts_with = "head")]
        detections: Option<PathBuf>,
        /// IoU threshold for AP.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Evaluate a checkpoint on --test.
        #[arg(long, requires = "test")]
        head: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Ratio sweep of one added class on a test file.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ratios: RatioFlags,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// The class treated as new; every other class forms the old pool.
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full incremental experiment on the synthetic corpus.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ratios: RatioFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        /// Engine configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return Failure::usage("usage", e.to_string()).report(),
    };
    match run(cli.command) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => f.report(),
    }
}

fn run(command: Command) -> Result<Vec<String>, Failure> {
    match command {
        Command::Synth { common, out, dim, classes, train_per_class, test_per_class } => {
            let mut cfg = commands::load_experiment_config(&common)?;
            let synth = &mut cfg.synth;
            synth.dim = dim.unwrap_or(synth.dim);
            synth.class_count = classes.unwrap_or(synth.class_count);
            synth.train_per_class = train_per_class.unwrap_or(synth.train_per_class);
            synth.test_per_class = test_per_class.unwrap_or(synth.test_per_class);
            commands::synth(&cfg, &out)
        }
        Command::TrainBase { common, train, out } => {
            commands::train_base(&commands::load_experiment_config(&common)?, &train, &out)
        }
        Command::AddClass { common, head, positives, name, pools, out } => {
            let cfg = commands::load_experiment_config(&common)?;
            let out = out.unwrap_or_else(|| head.clone());
            commands::add_class(&cfg, &head, &positives, &name, &pools, &out)
        }
        Command::Eval { predictions, detections, iou, head, test } => match (predictions, detections, head, test) {
            (Some(p), None, None, None) => commands::eval_predictions(&p),
            (None, Some(d), None, None) => commands::eval_detections(&d, iou),
            (None, None, Some(h), Some(t)) => commands::eval_head(&h, &t),
            _ => Err(Failure::usage(
                "argument_conflict",
                "eval needs exactly one of --predictions, --detections or --head with --test",
            )),
        },
        Command::Sweep { common, ratios, head, test, name, out } => {
            let mut cfg = commands::load_experiment_config(&common)?;
            commands::apply_ratios(&mut cfg, &ratios);
            commands::sweep(&cfg, &head, &test, &name, &out)
        }
        Command::Experiment { common, ratios, out } => {
            let mut cfg = commands::load_experiment_config(&common)?;
            commands::apply_ratios(&mut cfg, &ratios);
            commands::experiment(&cfg, &out)
        }
        Command::Serve { config, bind } => commands::serve(&config, bind),
    }
}
