//! Command-line driver: synthetic generation, graph building, training,
//! evaluation, benchmarking and checkpoint inspection.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ngnn::model::{Modality, Variant};

#[derive(Parser)]
#[command(
    name = "ngnn",
    about = "Outfit compatibility learning on a weighted category graph",
    long_about = "Build a category co-occurrence graph from an outfit corpus, train a \
                  message-passing compatibility model with a ranking loss, and evaluate \
                  fill-in-the-blank accuracy and pairwise AUC.\n\
                  Defaults follow the reported operating point: learning rate 0.001, \
                  batch size 16, fusion weight 0.2, L2 weight 0.001, latent size 12, \
                  3 propagation steps, category keep-threshold 100.",
    version
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; all randomness derives from it via named streams
    /// [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with a planted compatibility structure.
    GenSynth(GenSynthArgs),
    /// Build and export the category graph from a corpus.
    BuildGraph(BuildGraphArgs),
    /// Train a compatibility model.
    Train(TrainArgs),
    /// Evaluate fill-in-the-blank accuracy on the test split.
    EvalFitb(EvalArgs),
    /// Evaluate compatibility AUC on the test split.
    EvalAuc(EvalArgs),
    /// Measure parameter-count and runtime scaling across variants.
    Bench(BenchArgs),
    /// Print a checkpoint's config, hashes and parameter inventory.
    InspectCheckpoint(InspectArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    /// Output directory for corpus.jsonl, feature files and world metadata.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Category count [default: 12].
    #[arg(long)]
    categories: Option<usize>,
    /// Items per category [default: 50].
    #[arg(long)]
    items_per_category: Option<usize>,
    /// Hidden style dimensionality [default: 4].
    #[arg(long)]
    style_dim: Option<usize>,
    /// Theme cluster count [default: 6].
    #[arg(long)]
    themes: Option<usize>,
    /// Scale of theme centers [default: 1.5].
    #[arg(long)]
    theme_spread: Option<f64>,
    /// Within-theme style noise [default: 0.3].
    #[arg(long)]
    style_noise: Option<f64>,
    /// Visual feature dimensionality [default: 16].
    #[arg(long)]
    visual_dim: Option<usize>,
    /// Textual feature dimensionality [default: 10].
    #[arg(long)]
    textual_dim: Option<usize>,
    /// Observation noise on features [default: 0.1].
    #[arg(long)]
    feature_noise: Option<f64>,
    /// Mean pairwise style distance an outfit must stay below [default: 1.5].
    #[arg(long)]
    dispersion_threshold: Option<f64>,
    /// Train split size [default: 2000].
    #[arg(long)]
    train_outfits: Option<usize>,
    /// Valid split size [default: 200].
    #[arg(long)]
    valid_outfits: Option<usize>,
    /// Test split size [default: 400].
    #[arg(long)]
    test_outfits: Option<usize>,
    /// Smallest outfit generated [default: 3].
    #[arg(long)]
    min_items: Option<usize>,
    /// Largest outfit generated [default: 8].
    #[arg(long)]
    max_items: Option<usize>,
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Corpus file (line-delimited JSON outfits).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory for vocab.tsv, edges.tsv and text_vocab.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep categories appearing in more than this many outfits
    /// [default: 100].
    #[arg(long)]
    keep_threshold: Option<u64>,
    /// Largest outfit kept by ingestion [default: 8].
    #[arg(long)]
    max_outfit_size: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file (line-delimited JSON outfits).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Dense visual feature file.
    #[arg(long)]
    visual_features: Option<PathBuf>,
    /// Dense textual feature file.
    #[arg(long)]
    textual_features: Option<PathBuf>,
    /// Output directory for checkpoint.ngnn and metrics.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep categories appearing in more than this many outfits
    /// [default: 100].
    #[arg(long)]
    keep_threshold: Option<u64>,
    /// Largest outfit kept by ingestion [default: 8].
    #[arg(long)]
    max_outfit_size: Option<usize>,
    /// Propagation variant [default: ngnn].
    #[arg(long, value_enum)]
    variant: Option<CliVariant>,
    /// Feature channel(s) to score with [default: multimodal].
    #[arg(long, value_enum)]
    modality: Option<CliModality>,
    /// Latent/state size [default: 12].
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Propagation steps; 0 scores initial states directly [default: 3].
    #[arg(long)]
    steps: Option<usize>,
    /// Weight of the visual channel in multimodal fusion, in [0, 1]
    /// [default: 0.2].
    #[arg(long)]
    fusion_weight: Option<f64>,
    /// RMSProp learning rate [default: 0.001].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Pairs per optimizer step [default: 16].
    #[arg(long)]
    batch_size: Option<usize>,
    /// L2 weight on batch-touched parameters [default: 0.001].
    #[arg(long)]
    l2_weight: Option<f64>,
    /// Epoch budget [default: 20].
    #[arg(long)]
    epochs: Option<usize>,
    /// Consecutive non-improving epochs tolerated [default: 3].
    #[arg(long)]
    patience: Option<usize>,
    /// Minimum validation-loss improvement that counts [default: 1e-4].
    #[arg(long)]
    min_delta: Option<f64>,
    /// Regularize all parameters instead of only the batch-touched ones.
    #[arg(long)]
    global_regularizer: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus file (line-delimited JSON outfits).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Trained checkpoint to score with.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dense visual feature file.
    #[arg(long)]
    visual_features: Option<PathBuf>,
    /// Dense textual feature file.
    #[arg(long)]
    textual_features: Option<PathBuf>,
    /// Keep categories appearing in more than this many outfits; must match
    /// the training run [default: 100].
    #[arg(long)]
    keep_threshold: Option<u64>,
    /// Largest outfit kept by ingestion [default: 8].
    #[arg(long)]
    max_outfit_size: Option<usize>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export the generated eval set as line-delimited JSON.
    #[arg(long)]
    export_set: Option<PathBuf>,
    /// Score a previously exported eval set instead of generating one.
    #[arg(long)]
    import_set: Option<PathBuf>,
    /// Draw fill-in-the-blank negatives from the blanked item's category.
    #[arg(long)]
    same_category: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Smallest complete graph [default: 2].
    #[arg(long)]
    min_nodes: Option<usize>,
    /// Largest complete graph [default: 30].
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Latent/state size [default: 12].
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Input feature dimensionality [default: 32].
    #[arg(long)]
    feature_dim: Option<usize>,
    /// Timed passes per point, at least 5 [default: 7].
    #[arg(long)]
    repetitions: Option<usize>,
    /// Output directory for bench.tsv and bench.dat.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint to describe.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliVariant {
    Ngnn,
    Ggnn,
    Egnn,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Variant {
        match v {
            CliVariant::Ngnn => Variant::Ngnn,
            CliVariant::Ggnn => Variant::Ggnn,
            CliVariant::Egnn => Variant::Egnn,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliModality {
    Visual,
    Textual,
    Multimodal,
}

impl From<CliModality> for Modality {
    fn from(m: CliModality) -> Modality {
        match m {
            CliModality::Visual => Modality::Visual,
            CliModality::Textual => Modality::Textual,
            CliModality::Multimodal => Modality::Multimodal,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let file = config::load_file_config(cli.config.as_deref())?;
        match cli.command {
            Command::GenSynth(args) => commands::gen_synth(args, &file, cli.seed),
            Command::BuildGraph(args) => commands::build_graph(args, &file),
            Command::Train(args) => commands::train(args, &file, cli.seed),
            Command::EvalFitb(args) => commands::eval(args, &file, cli.seed, commands::EvalKind::Fitb),
            Command::EvalAuc(args) => commands::eval(args, &file, cli.seed, commands::EvalKind::Auc),
            Command::Bench(args) => commands::bench(args, &file, cli.seed),
            Command::InspectCheckpoint(args) => commands::inspect_checkpoint(args, &file),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err.category();
            let message = err.to_string().replace('\n', " ");
            let message = message
                .strip_prefix(&format!("{category} error: "))
                .unwrap_or(&message);
            eprintln!("error: {category}: {message}");
            ExitCode::FAILURE
        }
    }
}
