//! Ranking-loss training: negative sampling, batched objectives, RMSProp
//! updates, early stopping and checkpointing.

mod loss;
mod rmsprop;
mod sampler;

pub use loss::{batch_loss, bpr_loss, pair_loss};
pub use rmsprop::RmsProp;
pub use sampler::{sample_negative, TrainPair};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::graph::FashionGraph;
use crate::model::{Checkpoint, FeatureSet, ModelConfig, ModelParams, Modality, ParamBinder};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 weight on the parameters each batch touches.
    pub l2_weight: f64,
    pub epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping. Zero
    /// stops at the first epoch that fails to improve.
    pub patience: usize,
    /// Validation loss must drop by at least this much to count as progress.
    pub min_delta: f64,
    pub seed: u64,
    /// Regularize every parameter instead of only the touched ones.
    pub global_regularizer: bool,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub max_sample_retries: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 16,
            l2_weight: 0.001,
            epochs: 20,
            patience: 3,
            min_delta: 1e-4,
            seed: 0,
            global_regularizer: false,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            max_sample_retries: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.learning_rate <= 0.0 {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.l2_weight < 0.0 {
            problems.push(format!("l2_weight must be nonnegative, got {}", self.l2_weight));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            problems.push(format!(
                "rmsprop_decay must lie in [0, 1), got {}",
                self.rmsprop_decay
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-pair training objective (ranking + consistency + regularizer).
    pub train_loss: f64,
    /// Mean per-pair validation loss (no regularizer), on fixed negatives.
    pub valid_loss: f64,
    pub wall_time_s: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum StopReason {
    /// Ran the full epoch budget.
    Completed,
    /// Validation loss stalled.
    EarlyStopped { epoch: usize },
    /// Training loss went non-finite; the best earlier checkpoint is kept.
    Diverged { epoch: usize },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<EpochRecord>,
    pub stop: StopReason,
    /// Validation loss of the retained checkpoint.
    pub best_valid_loss: f64,
}

/// Mean per-pair validation loss with frozen parameters: ranking loss plus,
/// for multimodal models, both outfits' consistency terms.
fn validation_loss(
    pairs: &[TrainPair],
    graph: &FashionGraph,
    params: &ModelParams,
    features: &FeatureSet,
) -> Result<f64> {
    let mut total = 0.0;
    for pair in pairs {
        match params.config.modality {
            Modality::Multimodal => {
                let pos = crate::model::score_multimodal(&pair.positive, graph, params, features)?;
                let neg = crate::model::score_multimodal(&pair.negative, graph, params, features)?;
                total += bpr_loss(pos.score, neg.score) + pos.consistency + neg.consistency;
            }
            _ => {
                let pos = crate::model::score_outfit(&pair.positive, graph, params, features)?;
                let neg = crate::model::score_outfit(&pair.negative, graph, params, features)?;
                total += bpr_loss(pos.score, neg.score);
            }
        }
    }
    Ok(total / pairs.len() as f64)
}

/// Train a model on the corpus's train split, early-stopping on the valid
/// split. Fully deterministic given (seed, corpus, config).
pub fn train(
    corpus: &Corpus,
    graph: &FashionGraph,
    features: &FeatureSet,
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;

    let train_outfits = corpus.split(Split::Train);
    let valid_outfits = corpus.split(Split::Valid);
    if train_outfits.is_empty() {
        return Err(Error::Training("train split is empty".into()));
    }
    if valid_outfits.is_empty() {
        return Err(Error::Training(
            "valid split is empty; early stopping needs one".into(),
        ));
    }
    let pool = corpus.item_pool(&[Split::Train]);
    if pool.is_empty() {
        return Err(Error::Training("empty item pool".into()));
    }

    let mut feature_dims = Vec::new();
    if let Some(store) = features.visual {
        feature_dims.push((FeatureKind::Visual, store.dim()));
    }
    if let Some(store) = features.textual {
        feature_dims.push((FeatureKind::Textual, store.dim()));
    }
    let mut params = ModelParams::init(model_config, graph, &feature_dims, config.seed)?;

    // Fixed validation negatives keep the early-stopping series comparable
    // across epochs.
    let mut valid_rng = Rng::for_stream(config.seed, "valid-negatives");
    let valid_pairs: Vec<TrainPair> = valid_outfits
        .iter()
        .map(|o| sample_negative(o, &pool, &mut valid_rng, config.max_sample_retries))
        .collect::<Result<_>>()?;

    let make_checkpoint = |params: &ModelParams| Checkpoint {
        params: params.clone(),
        vocab_hash: graph.vocab().content_hash(),
        graph_hash: graph.content_hash(),
    };

    let mut optimizer = RmsProp::new(config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon);
    let mut best_valid = f64::INFINITY;
    let mut best_params = params.clone();
    let mut non_improving = 0usize;
    let mut metrics = Vec::new();
    let mut stop = StopReason::Completed;

    'epochs: for epoch in 1..=config.epochs {
        let epoch_start = Instant::now();
        let mut order: Vec<usize> = (0..train_outfits.len()).collect();
        Rng::for_substream(config.seed, "shuffle", epoch as u64).shuffle(&mut order);
        let mut neg_rng = Rng::for_substream(config.seed, "negatives", epoch as u64);

        let mut epoch_loss = 0.0;
        for batch_indices in order.chunks(config.batch_size) {
            let batch: Vec<TrainPair> = batch_indices
                .iter()
                .map(|&i| {
                    sample_negative(train_outfits[i], &pool, &mut neg_rng, config.max_sample_retries)
                })
                .collect::<Result<_>>()?;

            let mut tape = Tape::new();
            let mut binder = ParamBinder::new(&params);
            let loss = batch_loss(
                &mut tape,
                &mut binder,
                &batch,
                graph,
                features,
                &model_config,
                config.l2_weight,
                config.global_regularizer,
            )?;
            let loss_value = tape.value(loss).item()?;
            if !loss_value.is_finite() {
                stop = StopReason::Diverged { epoch };
                metrics.push(EpochRecord {
                    epoch,
                    train_loss: f64::NAN,
                    valid_loss: f64::NAN,
                    wall_time_s: epoch_start.elapsed().as_secs_f64(),
                    learning_rate: config.learning_rate,
                });
                break 'epochs;
            }
            epoch_loss += loss_value;

            let grads = tape.backward(loss)?;
            let per_param = binder.collect_grads(&tape, &grads);
            optimizer.step(&mut params, &per_param)?;
        }

        let train_loss = epoch_loss / train_outfits.len() as f64;
        let valid_loss = validation_loss(&valid_pairs, graph, &params, features)?;
        metrics.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            wall_time_s: epoch_start.elapsed().as_secs_f64(),
            learning_rate: config.learning_rate,
        });

        if valid_loss < best_valid - config.min_delta {
            best_valid = valid_loss;
            best_params = params.clone();
            non_improving = 0;
        } else {
            non_improving += 1;
            if non_improving >= config.patience.max(1) {
                stop = StopReason::EarlyStopped { epoch };
                break;
            }
        }
    }

    Ok(TrainOutcome {
        checkpoint: make_checkpoint(&best_params),
        metrics,
        stop,
        best_valid_loss: best_valid,
    })
}

#[cfg(test)]
pub(crate) mod tests;
