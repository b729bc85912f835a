//! Forward computation of compatibility scores on the autodiff tape.
//!
//! Nodes are always visited in the subgraph's canonical (ascending global
//! index) order, so scores are invariant — bit for bit — under permutations
//! of the outfit's item list. Only parameters actually used by the forward
//! pass are registered on the tape; everything else keeps an exactly-zero
//! gradient, which is what makes node-local training updates possible.

use std::collections::HashMap;

use crate::autodiff::{Grads, Tape, Tensor, Var};
use crate::corpus::Outfit;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureStore};
use crate::graph::{extract_subgraph, FashionGraph, OutfitSubgraph};

use super::params::{ModelConfig, ModelParams, Modality, ParamId, ParamKind, Propagation};

/// Feature stores available to a forward pass, by modality.
#[derive(Clone, Copy)]
pub struct FeatureSet<'a> {
    pub visual: Option<&'a FeatureStore>,
    pub textual: Option<&'a FeatureStore>,
}

impl<'a> FeatureSet<'a> {
    pub fn visual_only(store: &'a FeatureStore) -> Self {
        FeatureSet {
            visual: Some(store),
            textual: None,
        }
    }

    pub fn textual_only(store: &'a FeatureStore) -> Self {
        FeatureSet {
            visual: None,
            textual: Some(store),
        }
    }

    pub fn both(visual: &'a FeatureStore, textual: &'a FeatureStore) -> Self {
        FeatureSet {
            visual: Some(visual),
            textual: Some(textual),
        }
    }

    fn store(&self, kind: FeatureKind) -> Result<&'a FeatureStore> {
        match kind {
            FeatureKind::Visual => self.visual,
            FeatureKind::Textual => self.textual,
        }
        .ok_or_else(|| Error::Config(format!("no {kind} feature store supplied")))
    }

    /// Feature row for one outfit item in the given modality.
    pub fn feature(&self, kind: FeatureKind, item: &crate::corpus::Item) -> Result<&'a [f64]> {
        let key = match kind {
            FeatureKind::Visual => &item.visual_key,
            FeatureKind::Textual => &item.textual_key,
        };
        self.store(kind)?.get(key)
    }
}

/// Registers parameters on a tape at most once and remembers the order, so
/// gradients can be read back per parameter deterministically.
pub struct ParamBinder<'p> {
    params: &'p ModelParams,
    vars: HashMap<ParamId, Var>,
    order: Vec<(ParamId, Var)>,
}

impl<'p> ParamBinder<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        ParamBinder {
            params,
            vars: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ModelParams {
        self.params
    }

    /// The tape variable for a parameter, registering it on first use.
    pub fn var(&mut self, tape: &mut Tape, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.vars.get(&id) {
            return Ok(v);
        }
        let tensor = self.params.tensor(&id).ok_or_else(|| {
            Error::Config(format!("parameter {} not present in this model", id.name()))
        })?;
        let v = tape.param(tensor);
        self.vars.insert(id, v);
        self.order.push((id, v));
        Ok(v)
    }

    /// Parameters bound so far, in registration order.
    pub fn bound(&self) -> &[(ParamId, Var)] {
        &self.order
    }

    /// Dense gradient per bound parameter, in registration order. Parameters
    /// the loss never reached come back as zeros.
    pub fn collect_grads(&self, tape: &Tape, grads: &Grads) -> Vec<(ParamId, Vec<f64>)> {
        self.order
            .iter()
            .map(|&(id, var)| (id, grads.dense(var, tape.value(var).numel())))
            .collect()
    }
}

/// Tape handles produced by one channel's forward pass. Vectors are aligned
/// with the subgraph's canonical node order.
pub struct ChannelVars {
    pub score: Var,
    /// Sigmoid attention weight per node.
    pub attention: Vec<Var>,
    /// Latent representation (input of the state initializer) per node.
    pub latents: Vec<Var>,
    /// Node states per step: `states[t][node]`, with t = 0 the initial state.
    pub states: Vec<Vec<Var>>,
    /// Aggregated incoming messages per step (empty at t = 0).
    pub aggregates: Vec<Vec<Var>>,
    /// Update gates per step (empty at t = 0).
    pub update_gates: Vec<Vec<Var>>,
    /// Reset gates per step (empty at t = 0).
    pub reset_gates: Vec<Vec<Var>>,
}

/// Tape handles for a fused multimodal pass.
pub struct MultimodalVars {
    pub score: Var,
    pub visual: ChannelVars,
    pub textual: ChannelVars,
    /// Summed squared latent disagreement across the outfit's items.
    pub consistency: Var,
}

fn affine_scalar(
    tape: &mut Tape,
    binder: &mut ParamBinder,
    channel: FeatureKind,
    weight_kind: ParamKind,
    bias_kind: ParamKind,
    x: Var,
) -> Result<Var> {
    let w = binder.var(tape, ParamId { channel, kind: weight_kind })?;
    let b = binder.var(tape, ParamId { channel, kind: bias_kind })?;
    let wx = tape.matmul(w, x)?;
    tape.add(wx, b)
}

/// Forward pass of one channel over an outfit subgraph.
///
/// Initializes node states from item features through per-category latent
/// maps, runs `config.steps` rounds of weighted message passing with a gated
/// state update, and reads the final states out into a scalar score through
/// two attention heads.
#[allow(clippy::too_many_arguments)]
pub fn channel_forward(
    tape: &mut Tape,
    binder: &mut ParamBinder,
    graph: &FashionGraph,
    subgraph: &OutfitSubgraph,
    outfit: &Outfit,
    features: &FeatureSet,
    channel: FeatureKind,
    config: &ModelConfig,
) -> Result<ChannelVars> {
    let params = binder.params().channel(channel)?;
    if params.propagation.variant() != config.variant {
        return Err(Error::Config(format!(
            "config wants variant {} but {channel} channel parameters are for {}",
            config.variant,
            params.propagation.variant()
        )));
    }
    let d = config.latent_dim;
    let k = subgraph.len();
    if k == 0 {
        return Err(Error::Contract("cannot score an empty outfit".into()));
    }

    // Initial states: latent = latent_map[node] . feature, state = tanh(latent).
    let mut latents = Vec::with_capacity(k);
    let mut states = Vec::with_capacity(k);
    for a in 0..k {
        let item = &outfit.items[subgraph.item_index(a)];
        let row = features.feature(channel, item)?;
        if row.len() != params.feature_dim {
            return Err(Error::Config(format!(
                "{channel} feature for item '{}' has dimension {} but the channel expects {}",
                item.item_id,
                row.len(),
                params.feature_dim
            )));
        }
        let feature = tape.constant(Tensor::column(row.to_vec()));
        let map = binder.var(
            tape,
            ParamId {
                channel,
                kind: ParamKind::LatentMap(subgraph.global_node(a)),
            },
        )?;
        let latent = tape.matmul(map, feature)?;
        latents.push(latent);
        states.push(tape.tanh(latent));
    }

    let ones = tape.constant(Tensor::full(vec![d, 1], 1.0));
    let gru_ids = |kind: ParamKind| ParamId { channel, kind };

    let mut state_trace = vec![states.clone()];
    let mut aggregate_trace = Vec::with_capacity(config.steps);
    let mut update_trace = Vec::with_capacity(config.steps);
    let mut reset_trace = Vec::with_capacity(config.steps);

    for _ in 0..config.steps {
        // Aggregate incoming messages per node.
        let mut aggregated = Vec::with_capacity(k);
        for to in 0..k {
            let mut agg = binder.var(tape, gru_ids(ParamKind::PropBias))?;
            for (from, &sender_state) in states.iter().enumerate() {
                let weight = subgraph.weight(from, to);
                if weight == 0.0 {
                    continue;
                }
                let message = match &params.propagation {
                    Propagation::NodeWise { .. } => {
                        let recv = binder.var(
                            tape,
                            gru_ids(ParamKind::InputTransform(subgraph.global_node(to))),
                        )?;
                        let send = binder.var(
                            tape,
                            gru_ids(ParamKind::OutputTransform(subgraph.global_node(from))),
                        )?;
                        let inner = tape.matmul(recv, sender_state)?;
                        tape.matmul(send, inner)?
                    }
                    Propagation::Shared { .. } => {
                        let transform = binder.var(tape, gru_ids(ParamKind::SharedTransform))?;
                        tape.matmul(transform, sender_state)?
                    }
                    Propagation::EdgeWise { .. } => {
                        let edge = graph
                            .edge_position(subgraph.global_node(from), subgraph.global_node(to))
                            .ok_or_else(|| {
                                Error::Contract(format!(
                                    "subgraph edge {} -> {} missing from the graph edge list",
                                    subgraph.global_node(from),
                                    subgraph.global_node(to)
                                ))
                            })?;
                        let transform =
                            binder.var(tape, gru_ids(ParamKind::EdgeTransform(edge)))?;
                        tape.matmul(transform, sender_state)?
                    }
                };
                let scaled = tape.scale(weight, message);
                agg = tape.add(agg, scaled)?;
            }
            aggregated.push(agg);
        }

        // Gated update of every node state.
        let mut next_states = Vec::with_capacity(k);
        let mut update_gates = Vec::with_capacity(k);
        let mut reset_gates = Vec::with_capacity(k);
        for i in 0..k {
            let a = aggregated[i];
            let h = states[i];

            let uw = binder.var(tape, gru_ids(ParamKind::GruUpdateInput))?;
            let us = binder.var(tape, gru_ids(ParamKind::GruUpdateState))?;
            let ub = binder.var(tape, gru_ids(ParamKind::GruUpdateBias))?;
            let ua = tape.matmul(uw, a)?;
            let uh = tape.matmul(us, h)?;
            let pre_update = {
                let s = tape.add(ua, uh)?;
                tape.add(s, ub)?
            };
            let update_gate = tape.sigmoid(pre_update);

            let rw = binder.var(tape, gru_ids(ParamKind::GruResetInput))?;
            let rs = binder.var(tape, gru_ids(ParamKind::GruResetState))?;
            let rb = binder.var(tape, gru_ids(ParamKind::GruResetBias))?;
            let ra = tape.matmul(rw, a)?;
            let rh = tape.matmul(rs, h)?;
            let pre_reset = {
                let s = tape.add(ra, rh)?;
                tape.add(s, rb)?
            };
            let reset_gate = tape.sigmoid(pre_reset);

            let cw = binder.var(tape, gru_ids(ParamKind::GruCandInput))?;
            let cs = binder.var(tape, gru_ids(ParamKind::GruCandState))?;
            let cb = binder.var(tape, gru_ids(ParamKind::GruCandBias))?;
            let ca = tape.matmul(cw, a)?;
            let gated_state = tape.hadamard(reset_gate, h)?;
            let ch = tape.matmul(cs, gated_state)?;
            let pre_cand = {
                let s = tape.add(ca, ch)?;
                tape.add(s, cb)?
            };
            let candidate = tape.tanh(pre_cand);

            let keep = tape.sub(ones, update_gate)?;
            let new_part = tape.hadamard(candidate, update_gate)?;
            let old_part = tape.hadamard(h, keep)?;
            next_states.push(tape.add(new_part, old_part)?);
            update_gates.push(update_gate);
            reset_gates.push(reset_gate);
        }
        states = next_states;
        state_trace.push(states.clone());
        aggregate_trace.push(aggregated);
        update_trace.push(update_gates);
        reset_trace.push(reset_gates);
    }

    // Readout: sum of sigmoid(weight head) * leaky_relu(score head).
    let mut attention = Vec::with_capacity(k);
    let mut score: Option<Var> = None;
    for &state in &states {
        let weight_pre = affine_scalar(
            tape,
            binder,
            channel,
            ParamKind::AttnWeightW,
            ParamKind::AttnWeightB,
            state,
        )?;
        let weight = tape.sigmoid(weight_pre);
        attention.push(weight);

        let score_pre = affine_scalar(
            tape,
            binder,
            channel,
            ParamKind::AttnScoreW,
            ParamKind::AttnScoreB,
            state,
        )?;
        let item_score = tape.leaky_relu(score_pre);

        let contribution = tape.hadamard(weight, item_score)?;
        score = Some(match score {
            None => contribution,
            Some(acc) => tape.add(acc, contribution)?,
        });
    }

    Ok(ChannelVars {
        score: score.expect("at least one node"),
        attention,
        latents,
        states: state_trace,
        aggregates: aggregate_trace,
        update_gates: update_trace,
        reset_gates: reset_trace,
    })
}

/// Fused two-channel forward: score is the fusion-weighted sum of the two
/// channel scores, and the consistency term accumulates the squared
/// distance between the channels' latent representations per item.
pub fn multimodal_forward(
    tape: &mut Tape,
    binder: &mut ParamBinder,
    graph: &FashionGraph,
    subgraph: &OutfitSubgraph,
    outfit: &Outfit,
    features: &FeatureSet,
    config: &ModelConfig,
) -> Result<MultimodalVars> {
    let visual = channel_forward(
        tape, binder, graph, subgraph, outfit, features, FeatureKind::Visual, config,
    )?;
    let textual = channel_forward(
        tape, binder, graph, subgraph, outfit, features, FeatureKind::Textual, config,
    )?;

    let beta = config.fusion_weight;
    let vis_part = tape.scale(beta, visual.score);
    let txt_part = tape.scale(1.0 - beta, textual.score);
    let score = tape.add(vis_part, txt_part)?;

    let mut consistency: Option<Var> = None;
    for (rv, rt) in visual.latents.iter().zip(&textual.latents) {
        let diff = tape.sub(*rv, *rt)?;
        let sq = tape.hadamard(diff, diff)?;
        let total = tape.reduce_sum(sq);
        consistency = Some(match consistency {
            None => total,
            Some(acc) => tape.add(acc, total)?,
        });
    }

    Ok(MultimodalVars {
        score,
        visual,
        textual,
        consistency: consistency.expect("at least one node"),
    })
}

/// Single-channel score of an outfit with frozen parameters.
#[derive(Clone, Debug)]
pub struct OutfitScore {
    pub score: f64,
    /// Attention weight per item, aligned with the outfit's item order.
    pub attention: Vec<f64>,
    /// Latent representation per item, aligned with the outfit's item order.
    pub latents: Vec<Vec<f64>>,
}

fn reorder_to_items<T: Clone>(subgraph: &OutfitSubgraph, by_node: &[T]) -> Vec<T> {
    let mut out: Vec<Option<T>> = vec![None; by_node.len()];
    for (node, value) in by_node.iter().enumerate() {
        out[subgraph.item_index(node)] = Some(value.clone());
    }
    out.into_iter().map(|v| v.expect("bijection")).collect()
}

/// Score an outfit through the model's single configured channel.
pub fn score_outfit(
    outfit: &Outfit,
    graph: &FashionGraph,
    params: &ModelParams,
    features: &FeatureSet,
) -> Result<OutfitScore> {
    let channel = match params.config.modality {
        Modality::Visual => FeatureKind::Visual,
        Modality::Textual => FeatureKind::Textual,
        Modality::Multimodal => {
            return Err(Error::Config(
                "score_outfit is single-channel; use score_multimodal for multimodal models"
                    .into(),
            ))
        }
    };
    let subgraph = extract_subgraph(outfit, graph)?;
    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(params);
    let vars = channel_forward(
        &mut tape,
        &mut binder,
        graph,
        &subgraph,
        outfit,
        features,
        channel,
        &params.config,
    )?;
    let attention: Vec<f64> = vars
        .attention
        .iter()
        .map(|&v| tape.value(v).item())
        .collect::<Result<_>>()?;
    let latents: Vec<Vec<f64>> = vars
        .latents
        .iter()
        .map(|&v| tape.value(v).data().to_vec())
        .collect();
    Ok(OutfitScore {
        score: tape.value(vars.score).item()?,
        attention: reorder_to_items(&subgraph, &attention),
        latents: reorder_to_items(&subgraph, &latents),
    })
}

/// Multimodal score of an outfit with frozen parameters.
#[derive(Clone, Debug)]
pub struct MultimodalScore {
    pub score: f64,
    pub visual_score: f64,
    pub textual_score: f64,
    /// This outfit's contribution to the consistency penalty.
    pub consistency: f64,
    pub visual_attention: Vec<f64>,
    pub textual_attention: Vec<f64>,
}

/// Score an outfit through both channels and fuse.
pub fn score_multimodal(
    outfit: &Outfit,
    graph: &FashionGraph,
    params: &ModelParams,
    features: &FeatureSet,
) -> Result<MultimodalScore> {
    if params.config.modality != Modality::Multimodal {
        return Err(Error::Config(
            "score_multimodal requires a multimodal model".into(),
        ));
    }
    let subgraph = extract_subgraph(outfit, graph)?;
    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(params);
    let vars = multimodal_forward(
        &mut tape,
        &mut binder,
        graph,
        &subgraph,
        outfit,
        features,
        &params.config,
    )?;
    let channel_attention = |vars: &ChannelVars| -> Result<Vec<f64>> {
        let by_node: Vec<f64> = vars
            .attention
            .iter()
            .map(|&v| tape.value(v).item())
            .collect::<Result<_>>()?;
        Ok(reorder_to_items(&subgraph, &by_node))
    };
    Ok(MultimodalScore {
        score: tape.value(vars.score).item()?,
        visual_score: tape.value(vars.visual.score).item()?,
        textual_score: tape.value(vars.textual.score).item()?,
        consistency: tape.value(vars.consistency).item()?,
        visual_attention: channel_attention(&vars.visual)?,
        textual_attention: channel_attention(&vars.textual)?,
    })
}

/// Score through whichever path the model's modality requires.
pub fn score_any(
    outfit: &Outfit,
    graph: &FashionGraph,
    params: &ModelParams,
    features: &FeatureSet,
) -> Result<f64> {
    match params.config.modality {
        Modality::Multimodal => Ok(score_multimodal(outfit, graph, params, features)?.score),
        _ => Ok(score_outfit(outfit, graph, params, features)?.score),
    }
}
