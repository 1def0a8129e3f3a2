//! `osteo`: ingest, explore, tune, train, evaluate, explain and report on a
//! tabular risk dataset. Every artifact is canonical JSON or CSV tagged with
//! the run seed and the SHA-256 of the input CSV.

mod bundle;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use osteo::ModelFamily;

#[derive(Parser, Debug)]
#[command(name = "osteo", version, about = "Osteoporosis risk models and explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub csv: PathBuf,
    /// Schema configuration (column kinds, label, ignored columns).
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Bundle directory.
    #[arg(long, env = "OSTEO_OUT_DIR", default_value = "osteo-out")]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Rf,
    Lr,
    Xgb,
    Ab,
    Lgbm,
    Gb,
}

impl From<FamilyArg> for ModelFamily {
    fn from(f: FamilyArg) -> ModelFamily {
        match f {
            FamilyArg::Rf => ModelFamily::RandomForest,
            FamilyArg::Lr => ModelFamily::Logistic,
            FamilyArg::Xgb => ModelFamily::Xgb,
            FamilyArg::Ab => ModelFamily::Adaboost,
            FamilyArg::Lgbm => ModelFamily::Lgbm,
            FamilyArg::Gb => ModelFamily::GradientBoosting,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Shap,
    Lime,
    Pfi,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and encode the CSV, then record the stratified split.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Crosstabs of every categorical feature against the label and the
    /// correlation matrix.
    Eda {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Grid search with stratified k-fold accuracy on the training split; the
    /// winner is refit on the whole training split.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Fit one family on the training split with fixed hyperparameters.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Hyperparameter file; family defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Test-split metrics, ROC curve and confusion matrix of a model file.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Tree Shapley values, a local surrogate or permutation importance on
    /// the test split.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Row of the test split to explain (shap waterfall and lime).
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Comparison table of every evaluated family plus the bundle manifest.
    Report {
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { data, out } => commands::ingest(&data, &out.out),
        Command::Eda { data, out } => commands::eda(&data, &out.out),
        Command::Tune {
            data,
            out,
            family,
            grid,
            folds,
        } => commands::tune(&data, &out.out, family.map(Into::into), &grid, folds),
        Command::Train {
            data,
            out,
            family,
            params,
        } => commands::train(&data, &out.out, family.map(Into::into), params.as_deref()),
        Command::Evaluate { data, out, model } => commands::evaluate(&data, &out.out, &model),
        Command::Explain {
            data,
            out,
            model,
            method,
            instance,
        } => commands::explain(&data, &out.out, &model, method, instance),
        Command::Report { out } => commands::report(&out.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("osteo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
