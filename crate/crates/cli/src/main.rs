use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod inputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Human-readable tables.
    Table,
    /// One JSON object per line.
    Jsonl,
}

#[derive(Debug, Parser)]
#[command(name = "aumask", version, about = "Multi-label learning with missing labels")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge per-dataset annotation tables into one ternary database.
    Merge {
        /// Dataset descriptor (JSON); repeatable.
        #[arg(long = "descriptor", required = true)]
        descriptors: Vec<PathBuf>,
        /// Annotation table as `[DATASET=]PATH`; the dataset defaults to the file stem.
        #[arg(long = "table", required = true)]
        tables: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class displayed / not displayed / unknown counts.
    Stats { db: PathBuf },
    /// Keep classes with at least `--threshold` displayed labels and drop rows left without annotations.
    Filter {
        db: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        threshold: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Oversample to even out displayed counts of the selected classes.
    Balance {
        db: PathBuf,
        /// Minimum displayed count for a class to be selected.
        #[arg(long, default_value_t = 20_000)]
        threshold: u64,
        /// Raise every selected class to at least this count instead of minimizing max/min.
        #[arg(long)]
        target: Option<u64>,
        #[arg(long)]
        max_iterations: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against a database with masked metrics.
    Evaluate {
        db: PathBuf,
        /// CSV with header `sample_id,<class>,...` and one probability per class.
        predictions: PathBuf,
        /// Decision threshold on probabilities.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// CSV `class,count` of displayed occurrences used to weight F1 macro.
        #[arg(long, conflicts_with = "weights_db")]
        weights: Option<PathBuf>,
        /// Database whose displayed counts weight F1 macro.
        #[arg(long)]
        weights_db: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the toy model on the synthetic reference task.
    TrainDemo {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 256)]
        batch_size: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 0.5)]
        missingness: f64,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long)]
        out_report: Option<PathBuf>,
        #[arg(long)]
        out_model: Option<PathBuf>,
    },
    /// Compare analytic soft-F1 gradients with central finite differences.
    GradCheck {
        /// JSON fixture `{class_names, truth, predictions}`; random when omitted.
        fixture: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 6)]
        classes: usize,
        #[arg(long, default_value_t = 0.5)]
        missingness: f64,
    },
}

/// Failure with its exit code: 1 for data/validation problems, 2 for I/O.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<aumask_core::Error> for CliError {
    fn from(e: aumask_core::Error) -> Self {
        CliError {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl CliError {
    pub fn domain(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

fn run(cli: Cli) -> Result<(String, u8), CliError> {
    let f = cli.format;
    let out = match cli.command {
        Command::Merge {
            descriptors,
            tables,
            out,
        } => commands::merge(&descriptors, &tables, &out, f),
        Command::Stats { db } => commands::stats(&db, f),
        Command::Filter { db, threshold, out } => commands::filter(&db, threshold, &out, f),
        Command::Balance {
            db,
            threshold,
            target,
            max_iterations,
            out,
        } => commands::balance(&db, threshold, target, max_iterations, &out, f),
        Command::Evaluate {
            db,
            predictions,
            threshold,
            weights,
            weights_db,
            out,
        } => commands::evaluate(
            &db,
            &predictions,
            threshold,
            weights.as_deref(),
            weights_db.as_deref(),
            out.as_deref(),
            f,
        ),
        Command::TrainDemo {
            seed,
            epochs,
            learning_rate,
            batch_size,
            samples,
            features,
            classes,
            missingness,
            noise,
            out_report,
            out_model,
        } => {
            let synth = aumask_core::trainer::SynthConfig {
                seed,
                samples,
                features,
                classes,
                missingness,
                noise,
                ..Default::default()
            };
            let train = aumask_core::trainer::TrainConfig {
                learning_rate,
                epochs,
                batch_size,
                ..aumask_core::trainer::TrainConfig::demo(seed)
            };
            commands::train_demo(&synth, &train, out_report.as_deref(), out_model.as_deref(), f)
        }
        Command::GradCheck {
            fixture,
            seed,
            step,
            epsilon,
            samples,
            classes,
            missingness,
        } => return commands::grad_check(fixture.as_deref(), seed, step, epsilon, samples, classes, missingness, f),
    };
    out.map(|s| (s, 0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
