//! Ranking and batch objectives on the tape.

use crate::autodiff::{softplus, Tape, Var};
use crate::error::Result;
use crate::graph::{extract_subgraph, FashionGraph};
use crate::model::{
    channel_forward, multimodal_forward, FeatureSet, ModelConfig, Modality, ParamBinder,
};
use crate::features::FeatureKind;

use super::sampler::TrainPair;

/// Pairwise ranking loss -ln sigmoid(pos - neg), in its stable softplus form.
pub fn bpr_loss(positive_score: f64, negative_score: f64) -> f64 {
    softplus(negative_score - positive_score)
}

/// Tape version of the pair objective. Single-modality models contribute the
/// ranking loss; multimodal models add both outfits' consistency terms.
pub fn pair_loss(
    tape: &mut Tape,
    binder: &mut ParamBinder,
    pair: &TrainPair,
    graph: &FashionGraph,
    features: &FeatureSet,
    config: &ModelConfig,
) -> Result<Var> {
    let pos_sub = extract_subgraph(&pair.positive, graph)?;
    let neg_sub = extract_subgraph(&pair.negative, graph)?;

    let (pos_score, neg_score, consistency) = match config.modality {
        Modality::Multimodal => {
            let pos = multimodal_forward(tape, binder, graph, &pos_sub, &pair.positive, features, config)?;
            let neg = multimodal_forward(tape, binder, graph, &neg_sub, &pair.negative, features, config)?;
            let consistency = tape.add(pos.consistency, neg.consistency)?;
            (pos.score, neg.score, Some(consistency))
        }
        Modality::Visual | Modality::Textual => {
            let channel = match config.modality {
                Modality::Visual => FeatureKind::Visual,
                _ => FeatureKind::Textual,
            };
            let pos = channel_forward(tape, binder, graph, &pos_sub, &pair.positive, features, channel, config)?;
            let neg = channel_forward(tape, binder, graph, &neg_sub, &pair.negative, features, channel, config)?;
            (pos.score, neg.score, None)
        }
    };

    let margin = tape.sub(pos_score, neg_score)?;
    let neg_margin = tape.scale(-1.0, margin);
    let ranking = tape.softplus(neg_margin);
    match consistency {
        Some(c) => tape.add(ranking, c),
        None => Ok(ranking),
    }
}

/// Summed pair losses plus (l2_weight / 2) * ||params||^2.
///
/// By default the squared norm runs over exactly the parameters this batch's
/// forward passes touched, keeping updates node-local; `global_regularizer`
/// widens it to every parameter.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss(
    tape: &mut Tape,
    binder: &mut ParamBinder,
    batch: &[TrainPair],
    graph: &FashionGraph,
    features: &FeatureSet,
    config: &ModelConfig,
    l2_weight: f64,
    global_regularizer: bool,
) -> Result<Var> {
    assert!(!batch.is_empty(), "batch must be non-empty");

    if global_regularizer {
        for id in binder.params().param_ids() {
            binder.var(tape, id)?;
        }
    }

    let mut total: Option<Var> = None;
    for pair in batch {
        let loss = pair_loss(tape, binder, pair, graph, features, config)?;
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss)?,
        });
    }
    let mut total = total.expect("non-empty batch");

    if l2_weight > 0.0 {
        let bound: Vec<Var> = binder.bound().iter().map(|&(_, v)| v).collect();
        let mut norm: Option<Var> = None;
        for var in bound {
            let sq = tape.hadamard(var, var)?;
            let sum = tape.reduce_sum(sq);
            norm = Some(match norm {
                None => sum,
                Some(acc) => tape.add(acc, sum)?,
            });
        }
        if let Some(norm) = norm {
            let reg = tape.scale(l2_weight / 2.0, norm);
            total = tape.add(total, reg)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpr_at_equal_scores_is_ln_two() {
        assert!((bpr_loss(1.3, 1.3) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bpr_loss(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bpr_at_unit_margin() {
        // -ln(1 / (1 + e^-1))
        assert!((bpr_loss(1.0, 0.0) - 0.3132616875182228).abs() < 1e-15);
    }

    #[test]
    fn bpr_limits() {
        assert!(bpr_loss(60.0, -60.0) < 1e-12);
        assert!(bpr_loss(-60.0, 60.0) > 100.0);
        assert!(bpr_loss(-745.0, 745.0).is_finite());
    }

    #[test]
    fn bpr_antisymmetry_bound() {
        // loss(a,b) + loss(b,a) >= 2 ln 2, equality iff a == b.
        for (a, b) in [(0.0, 0.0), (1.0, -1.0), (3.5, 3.6), (-2.0, 5.0)] {
            let sum = bpr_loss(a, b) + bpr_loss(b, a);
            assert!(sum >= 2.0 * std::f64::consts::LN_2 - 1e-12, "{a} {b}: {sum}");
            if a == b {
                assert!((sum - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
            } else {
                assert!(sum > 2.0 * std::f64::consts::LN_2);
            }
        }
    }
}
