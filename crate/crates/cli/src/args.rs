use std::path::PathBuf;

use bopnn::model::{HyperParams, Variant, DEFAULT_SEED};
use clap::{Args, Parser, Subcommand};

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "bopnn",
    version,
    about = "Bagged projected nearest-neighbour classifier"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an ensemble and write the model file.
    Train(TrainArgs),
    /// Random search over hyperparameters by OOB accuracy.
    Tune(TrainArgs),
    /// Class probabilities for the rows of a table.
    Predict(PredictArgs),
    /// Per-column variable importance of a fitted model.
    Importance(ImportanceArgs),
    /// Low-dimensional view of a table through a fitted model.
    Project(ProjectArgs),
    /// Repeated train/test comparison of variants on one dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// CSV or TSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Target column (defaults to the last column).
    #[arg(long)]
    pub target: Option<String>,
    /// Columns to one-hot encode even if they look numeric.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Z-score features with training statistics.
    #[arg(long)]
    pub z_score: bool,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "bopnn", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub q0: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Number of base models [default: 100, or 1 for knn].
    #[arg(long = "B")]
    pub n_models: Option<usize>,
    /// Bag fraction.
    #[arg(long = "pi-b")]
    pub pi_b: Option<f64>,
    #[arg(long)]
    pub balanced: bool,
    #[arg(long)]
    pub no_projection: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Random-search draws.
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Run the variant's model selection before the final fit (train only).
    #[arg(long)]
    pub tune: bool,
    /// Model file to write.
    #[arg(long, default_value = "model.bopnn.json")]
    pub out: PathBuf,
    /// Trial table (tune only; defaults to `<out>.trials.csv`).
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Table to project (the training data when absent).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub view_dims: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Variants to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant,
          default_value = "bopnn,bopnn-noproj,bnn,bnn-inf,knn")]
    pub variants: Vec<Variant>,
    #[arg(long = "B", default_value_t = 100)]
    pub n_models: usize,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long)]
    pub balanced: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Override the size-based repetition count.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Directory for the result tables.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!(
            "unknown variant {s:?}; expected one of {}",
            names.join(", ")
        )
    })
}

impl ModelArgs {
    /// Variant template for dimension `d` with explicit flags applied on top.
    pub fn hyperparams(&self, d: usize) -> CliResult<HyperParams> {
        let mut hp = self.variant.template(d, self.seed);
        if let Some(b) = self.n_models {
            hp.n_models = b;
        }
        hp.balanced = self.balanced;
        if let Some(k) = self.k {
            hp.k = k;
        }
        if let Some(q0) = self.q0 {
            hp.q0 = q0;
            if self.q.is_none() {
                hp.q = if hp.projection_enabled {
                    q0.div_ceil(2)
                } else {
                    q0
                };
            }
        }
        if let Some(q) = self.q {
            hp.q = q;
        }
        if let Some(p) = self.pi_b {
            hp.pi_b = p;
        }
        if self.no_projection {
            hp.projection_enabled = false;
            hp.q = hp.q0;
        }
        hp.validate(d).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(hp)
    }
}
