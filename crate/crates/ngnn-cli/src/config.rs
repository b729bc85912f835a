//! Config file parsing and flag/file/default resolution.
//!
//! Precedence: command-line flags override config-file values, which override
//! built-in defaults. Unknown keys in the file are rejected. Validation
//! collects every problem before reporting.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use ngnn::error::{Error, Result};
use ngnn::model::{ModelConfig, Modality, Variant};
use ngnn::synthetic::WorldConfig;
use ngnn::training::TrainConfig;

/// Optional config file contents. Every field mirrors a CLI flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub visual_features: Option<PathBuf>,
    pub textual_features: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub keep_threshold: Option<u64>,
    pub max_outfit_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub latent_dim: Option<usize>,
    pub steps: Option<usize>,
    pub variant: Option<Variant>,
    pub modality: Option<Modality>,
    pub fusion_weight: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub l2_weight: Option<f64>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub min_delta: Option<f64>,
    pub global_regularizer: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub seed: Option<u64>,
    pub same_category: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub min_nodes: Option<usize>,
    pub max_nodes: Option<usize>,
    pub latent_dim: Option<usize>,
    pub feature_dim: Option<usize>,
    pub repetitions: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub categories: Option<usize>,
    pub items_per_category: Option<usize>,
    pub style_dim: Option<usize>,
    pub themes: Option<usize>,
    pub theme_spread: Option<f64>,
    pub style_noise: Option<f64>,
    pub visual_dim: Option<usize>,
    pub textual_dim: Option<usize>,
    pub feature_noise: Option<f64>,
    pub dispersion_threshold: Option<f64>,
    pub train_outfits: Option<usize>,
    pub valid_outfits: Option<usize>,
    pub test_outfits: Option<usize>,
    pub min_items: Option<usize>,
    pub max_items: Option<usize>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))
}

/// Merge helper: flag beats file beats default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Merge helper for values with no default; reports the flag name otherwise.
pub fn require<T>(flag: Option<T>, file: Option<T>, what: &str, problems: &mut Vec<String>) -> Option<T> {
    let v = flag.or(file);
    if v.is_none() {
        problems.push(format!("missing required value: {what}"));
    }
    v
}

/// Defaults for the model: the operating point reported for this setup.
pub fn default_model_config() -> ModelConfig {
    ModelConfig::default()
}

pub fn default_train_config() -> TrainConfig {
    TrainConfig::default()
}

pub fn default_world_config() -> WorldConfig {
    WorldConfig::default()
}

/// Bundle every validation problem into one config error.
pub fn finish_validation(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}

/// Check an input path exists now rather than failing mid-run.
pub fn check_input(path: &Path, what: &str, problems: &mut Vec<String>) {
    if !path.exists() {
        problems.push(format!("{what} path does not exist: {}", path.display()));
    }
}

/// Ensure the output directory exists and is writable.
pub fn prepare_out_dir(path: &Path, problems: &mut Vec<String>) {
    if let Err(e) = std::fs::create_dir_all(path) {
        problems.push(format!("cannot create output dir {}: {e}", path.display()));
        return;
    }
    let probe = path.join(".write-probe");
    match std::fs::write(&probe, b"ok") {
        Ok(()) => {
            let _ = std::fs::remove_file(&probe);
        }
        Err(e) => problems.push(format!("output dir {} is not writable: {e}", path.display())),
    }
}
