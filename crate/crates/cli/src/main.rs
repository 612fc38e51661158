use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod util;

#[derive(Parser, Debug)]
#[command(name = "genclus", version, about = "Attribute-guided soft clustering of heterogeneous information networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic weather sensor network.
    Generate(GenerateArgs),
    /// Cluster a network and learn relation strengths.
    Cluster(ClusterArgs),
    /// Score a clustering run: NMI against labels and MAP link prediction.
    Evaluate(EvaluateArgs),
    /// Rank link candidates by membership similarity.
    Predict(PredictArgs),
    /// Run the nine-network weather grid against the k-means baseline.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// key=value generator config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Pattern layout, 1 (diagonal means) or 2 (square corners).
    #[arg(long)]
    pub setting: Option<u8>,
    #[arg(long)]
    pub n_temp: Option<usize>,
    #[arg(long)]
    pub n_precip: Option<usize>,
    #[arg(long)]
    pub n_obs: Option<usize>,
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Options shared by every command that runs GenClus.
#[derive(Args, Debug, Clone, Default)]
pub struct TuningArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub inner_iters: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub probe_steps: Option<usize>,
    /// Standard deviation of the Gaussian prior on the strengths.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Keep Θ and β between outer iterations instead of restarting.
    #[arg(long)]
    pub warm_theta: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Directory holding nodes.tsv, edges.tsv, attributes.tsv and schema.txt.
    /// Falls back to the `data` key of the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// key=value run config; a previous run's manifest.txt works too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated attribute names; default all attributes.
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Add an inverse relation for every relation lacking one.
    #[arg(long)]
    pub materialize_inverses: bool,
    /// Fraction of links held out of training and written to <out>/heldout.
    #[arg(long)]
    pub holdout: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Output directory of a cluster run.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// `id<TAB>label` file; default the labels in nodes.tsv.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Edge file that defines relevant links; default the data's edges.
    #[arg(long)]
    pub links: Option<PathBuf>,
    /// Relations to score; default all.
    #[arg(long = "relation")]
    pub relations: Vec<String>,
    /// Similarities to score; default all.
    #[arg(long = "similarity", value_enum)]
    pub similarities: Vec<Similarity>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub relation: String,
    #[arg(long, value_enum, default_value_t = Similarity::NegCrossEntropy)]
    pub similarity: Similarity,
    /// Query object ids; default every object of the relation's source type.
    #[arg(long = "query")]
    pub queries: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub setting: Setting,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_temp: usize,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Setting {
    #[value(name = "weather-1")]
    Weather1,
    #[value(name = "weather-2")]
    Weather2,
}

impl Setting {
    pub fn id(self) -> u8 {
        match self {
            Setting::Weather1 => 1,
            Setting::Weather2 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Similarity {
    #[value(name = "cosine")]
    Cosine,
    #[value(name = "neg_euclidean")]
    NegEuclidean,
    #[value(name = "neg_cross_entropy")]
    NegCrossEntropy,
}

impl From<Similarity> for genclus::eval::SimilarityKind {
    fn from(s: Similarity) -> Self {
        use genclus::eval::SimilarityKind as K;
        match s {
            Similarity::Cosine => K::Cosine,
            Similarity::NegEuclidean => K::NegEuclidean,
            Similarity::NegCrossEntropy => K::NegCrossEntropy,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GENCLUS_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate::run(&a),
        Command::Cluster(a) => commands::cluster::run(&a),
        Command::Evaluate(a) => commands::evaluate::run(&a),
        Command::Predict(a) => commands::predict::run(&a),
        Command::Reproduce(a) => commands::reproduce::run(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
