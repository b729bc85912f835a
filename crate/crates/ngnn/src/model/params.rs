//! Model configuration and parameter containers.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::graph::FashionGraph;
use crate::rng::Rng;

/// How state is transformed along an edge during propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Node-wise: edge j->i applies sender's output matrix then receiver's
    /// input matrix; parameters grow with node count.
    Ngnn,
    /// One transform shared across all edges.
    Ggnn,
    /// An independent transform per directed edge; parameters grow with edge
    /// count.
    Egnn,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Ngnn => write!(f, "ngnn"),
            Variant::Ggnn => write!(f, "ggnn"),
            Variant::Egnn => write!(f, "egnn"),
        }
    }
}

/// Which feature channel(s) the model scores with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Textual,
    Multimodal,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modality::Visual => write!(f, "visual"),
            Modality::Textual => write!(f, "textual"),
            Modality::Multimodal => write!(f, "multimodal"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Latent/state size d.
    pub latent_dim: usize,
    /// Propagation steps T. Zero is allowed: readout on initial states.
    pub steps: usize,
    pub variant: Variant,
    pub modality: Modality,
    /// Fusion weight toward the visual channel in [0, 1].
    pub fusion_weight: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.latent_dim == 0 {
            problems.push("latent_dim must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.fusion_weight) {
            problems.push(format!(
                "fusion_weight must lie in [0, 1], got {}",
                self.fusion_weight
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            latent_dim: 12,
            steps: 3,
            variant: Variant::Ngnn,
            modality: Modality::Multimodal,
            fusion_weight: 0.2,
        }
    }
}

/// An affine map from a d-vector to one real value.
#[derive(Clone, Debug)]
pub struct AffineScalar {
    /// 1 x d.
    pub weight: Tensor,
    /// 1 x 1.
    pub bias: Tensor,
}

/// Gated state update weights, shared by all nodes.
#[derive(Clone, Debug)]
pub struct GruWeights {
    pub update_input: Tensor,
    pub update_state: Tensor,
    pub update_bias: Tensor,
    pub reset_input: Tensor,
    pub reset_state: Tensor,
    pub reset_bias: Tensor,
    pub cand_input: Tensor,
    pub cand_state: Tensor,
    pub cand_bias: Tensor,
}

/// Variant-specific propagation parameters.
#[derive(Clone, Debug)]
pub enum Propagation {
    /// Per-node input/output transforms, indexed by global node.
    NodeWise {
        input_transforms: Vec<Tensor>,
        output_transforms: Vec<Tensor>,
    },
    /// A single transform for every edge.
    Shared { transform: Tensor },
    /// One transform per directed edge, aligned with `FashionGraph::edges()`.
    EdgeWise { transforms: Vec<Tensor> },
}

impl Propagation {
    pub fn variant(&self) -> Variant {
        match self {
            Propagation::NodeWise { .. } => Variant::Ngnn,
            Propagation::Shared { .. } => Variant::Ggnn,
            Propagation::EdgeWise { .. } => Variant::Egnn,
        }
    }
}

/// All parameters of one feature channel.
#[derive(Clone, Debug)]
pub struct ChannelParams {
    /// Per-node d x F latent mapping, indexed by global node.
    pub latent_maps: Vec<Tensor>,
    pub feature_dim: usize,
    pub propagation: Propagation,
    /// Shared propagation bias, d x 1.
    pub prop_bias: Tensor,
    pub gru: GruWeights,
    /// Attention head weighing each item's influence.
    pub attn_weight: AffineScalar,
    /// Attention head scoring each item.
    pub attn_score: AffineScalar,
}

fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.uniform_in(-bound, bound))
        .collect();
    Tensor::matrix(rows, cols, data).expect("consistent dims")
}

impl ChannelParams {
    /// Fresh seeded parameters for a channel over `graph`.
    ///
    /// Matrices are uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out));
    /// biases start at zero.
    pub fn init(
        variant: Variant,
        graph: &FashionGraph,
        latent_dim: usize,
        feature_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let d = latent_dim;
        let n = graph.node_count();
        let latent_maps = (0..n).map(|_| glorot(rng, d, feature_dim)).collect();
        let propagation = match variant {
            Variant::Ngnn => Propagation::NodeWise {
                input_transforms: (0..n).map(|_| glorot(rng, d, d)).collect(),
                output_transforms: (0..n).map(|_| glorot(rng, d, d)).collect(),
            },
            Variant::Ggnn => Propagation::Shared {
                transform: glorot(rng, d, d),
            },
            Variant::Egnn => Propagation::EdgeWise {
                transforms: (0..graph.edge_count()).map(|_| glorot(rng, d, d)).collect(),
            },
        };
        ChannelParams {
            latent_maps,
            feature_dim,
            propagation,
            prop_bias: Tensor::zeros(vec![d, 1]),
            gru: GruWeights {
                update_input: glorot(rng, d, d),
                update_state: glorot(rng, d, d),
                update_bias: Tensor::zeros(vec![d, 1]),
                reset_input: glorot(rng, d, d),
                reset_state: glorot(rng, d, d),
                reset_bias: Tensor::zeros(vec![d, 1]),
                cand_input: glorot(rng, d, d),
                cand_state: glorot(rng, d, d),
                cand_bias: Tensor::zeros(vec![d, 1]),
            },
            attn_weight: AffineScalar {
                weight: glorot(rng, 1, d),
                bias: Tensor::zeros(vec![1, 1]),
            },
            attn_score: AffineScalar {
                weight: glorot(rng, 1, d),
                bias: Tensor::zeros(vec![1, 1]),
            },
        }
    }

    pub fn node_count(&self) -> usize {
        self.latent_maps.len()
    }

    /// Total scalar parameter count of this channel.
    pub fn count(&self) -> usize {
        let mut total = 0;
        for id in channel_param_kinds(self) {
            total += self.tensor(&id).map(Tensor::numel).unwrap_or(0);
        }
        total
    }

    pub fn tensor(&self, kind: &ParamKind) -> Option<&Tensor> {
        match kind {
            ParamKind::LatentMap(i) => self.latent_maps.get(*i),
            ParamKind::InputTransform(i) => match &self.propagation {
                Propagation::NodeWise {
                    input_transforms, ..
                } => input_transforms.get(*i),
                _ => None,
            },
            ParamKind::OutputTransform(i) => match &self.propagation {
                Propagation::NodeWise {
                    output_transforms, ..
                } => output_transforms.get(*i),
                _ => None,
            },
            ParamKind::SharedTransform => match &self.propagation {
                Propagation::Shared { transform } => Some(transform),
                _ => None,
            },
            ParamKind::EdgeTransform(i) => match &self.propagation {
                Propagation::EdgeWise { transforms } => transforms.get(*i),
                _ => None,
            },
            ParamKind::PropBias => Some(&self.prop_bias),
            ParamKind::GruUpdateInput => Some(&self.gru.update_input),
            ParamKind::GruUpdateState => Some(&self.gru.update_state),
            ParamKind::GruUpdateBias => Some(&self.gru.update_bias),
            ParamKind::GruResetInput => Some(&self.gru.reset_input),
            ParamKind::GruResetState => Some(&self.gru.reset_state),
            ParamKind::GruResetBias => Some(&self.gru.reset_bias),
            ParamKind::GruCandInput => Some(&self.gru.cand_input),
            ParamKind::GruCandState => Some(&self.gru.cand_state),
            ParamKind::GruCandBias => Some(&self.gru.cand_bias),
            ParamKind::AttnWeightW => Some(&self.attn_weight.weight),
            ParamKind::AttnWeightB => Some(&self.attn_weight.bias),
            ParamKind::AttnScoreW => Some(&self.attn_score.weight),
            ParamKind::AttnScoreB => Some(&self.attn_score.bias),
        }
    }

    pub fn tensor_mut(&mut self, kind: &ParamKind) -> Option<&mut Tensor> {
        match kind {
            ParamKind::LatentMap(i) => self.latent_maps.get_mut(*i),
            ParamKind::InputTransform(i) => match &mut self.propagation {
                Propagation::NodeWise {
                    input_transforms, ..
                } => input_transforms.get_mut(*i),
                _ => None,
            },
            ParamKind::OutputTransform(i) => match &mut self.propagation {
                Propagation::NodeWise {
                    output_transforms, ..
                } => output_transforms.get_mut(*i),
                _ => None,
            },
            ParamKind::SharedTransform => match &mut self.propagation {
                Propagation::Shared { transform } => Some(transform),
                _ => None,
            },
            ParamKind::EdgeTransform(i) => match &mut self.propagation {
                Propagation::EdgeWise { transforms } => transforms.get_mut(*i),
                _ => None,
            },
            ParamKind::PropBias => Some(&mut self.prop_bias),
            ParamKind::GruUpdateInput => Some(&mut self.gru.update_input),
            ParamKind::GruUpdateState => Some(&mut self.gru.update_state),
            ParamKind::GruUpdateBias => Some(&mut self.gru.update_bias),
            ParamKind::GruResetInput => Some(&mut self.gru.reset_input),
            ParamKind::GruResetState => Some(&mut self.gru.reset_state),
            ParamKind::GruResetBias => Some(&mut self.gru.reset_bias),
            ParamKind::GruCandInput => Some(&mut self.gru.cand_input),
            ParamKind::GruCandState => Some(&mut self.gru.cand_state),
            ParamKind::GruCandBias => Some(&mut self.gru.cand_bias),
            ParamKind::AttnWeightW => Some(&mut self.attn_weight.weight),
            ParamKind::AttnWeightB => Some(&mut self.attn_weight.bias),
            ParamKind::AttnScoreW => Some(&mut self.attn_score.weight),
            ParamKind::AttnScoreB => Some(&mut self.attn_score.bias),
        }
    }
}

/// Canonical enumeration of a channel's parameter kinds.
pub(crate) fn channel_param_kinds(params: &ChannelParams) -> Vec<ParamKind> {
    let mut kinds = Vec::new();
    for i in 0..params.latent_maps.len() {
        kinds.push(ParamKind::LatentMap(i));
    }
    match &params.propagation {
        Propagation::NodeWise {
            input_transforms,
            output_transforms,
        } => {
            for i in 0..input_transforms.len() {
                kinds.push(ParamKind::InputTransform(i));
            }
            for i in 0..output_transforms.len() {
                kinds.push(ParamKind::OutputTransform(i));
            }
        }
        Propagation::Shared { .. } => kinds.push(ParamKind::SharedTransform),
        Propagation::EdgeWise { transforms } => {
            for i in 0..transforms.len() {
                kinds.push(ParamKind::EdgeTransform(i));
            }
        }
    }
    kinds.extend([
        ParamKind::PropBias,
        ParamKind::GruUpdateInput,
        ParamKind::GruUpdateState,
        ParamKind::GruUpdateBias,
        ParamKind::GruResetInput,
        ParamKind::GruResetState,
        ParamKind::GruResetBias,
        ParamKind::GruCandInput,
        ParamKind::GruCandState,
        ParamKind::GruCandBias,
        ParamKind::AttnWeightW,
        ParamKind::AttnWeightB,
        ParamKind::AttnScoreW,
        ParamKind::AttnScoreB,
    ]);
    kinds
}

/// One named parameter tensor within a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKind {
    LatentMap(usize),
    InputTransform(usize),
    OutputTransform(usize),
    SharedTransform,
    EdgeTransform(usize),
    PropBias,
    GruUpdateInput,
    GruUpdateState,
    GruUpdateBias,
    GruResetInput,
    GruResetState,
    GruResetBias,
    GruCandInput,
    GruCandState,
    GruCandBias,
    AttnWeightW,
    AttnWeightB,
    AttnScoreW,
    AttnScoreB,
}

impl ParamKind {
    pub fn name(&self) -> String {
        match self {
            ParamKind::LatentMap(i) => format!("latent_map/{i}"),
            ParamKind::InputTransform(i) => format!("input_transform/{i}"),
            ParamKind::OutputTransform(i) => format!("output_transform/{i}"),
            ParamKind::SharedTransform => "shared_transform".into(),
            ParamKind::EdgeTransform(i) => format!("edge_transform/{i}"),
            ParamKind::PropBias => "prop_bias".into(),
            ParamKind::GruUpdateInput => "gru/update_input".into(),
            ParamKind::GruUpdateState => "gru/update_state".into(),
            ParamKind::GruUpdateBias => "gru/update_bias".into(),
            ParamKind::GruResetInput => "gru/reset_input".into(),
            ParamKind::GruResetState => "gru/reset_state".into(),
            ParamKind::GruResetBias => "gru/reset_bias".into(),
            ParamKind::GruCandInput => "gru/cand_input".into(),
            ParamKind::GruCandState => "gru/cand_state".into(),
            ParamKind::GruCandBias => "gru/cand_bias".into(),
            ParamKind::AttnWeightW => "attn_weight/w".into(),
            ParamKind::AttnWeightB => "attn_weight/b".into(),
            ParamKind::AttnScoreW => "attn_score/w".into(),
            ParamKind::AttnScoreB => "attn_score/b".into(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let indexed = |prefix: &str| -> Option<usize> {
            name.strip_prefix(prefix)
                .and_then(|rest| rest.parse::<usize>().ok())
        };
        if let Some(i) = indexed("latent_map/") {
            return Ok(ParamKind::LatentMap(i));
        }
        if let Some(i) = indexed("input_transform/") {
            return Ok(ParamKind::InputTransform(i));
        }
        if let Some(i) = indexed("output_transform/") {
            return Ok(ParamKind::OutputTransform(i));
        }
        if let Some(i) = indexed("edge_transform/") {
            return Ok(ParamKind::EdgeTransform(i));
        }
        match name {
            "shared_transform" => Ok(ParamKind::SharedTransform),
            "prop_bias" => Ok(ParamKind::PropBias),
            "gru/update_input" => Ok(ParamKind::GruUpdateInput),
            "gru/update_state" => Ok(ParamKind::GruUpdateState),
            "gru/update_bias" => Ok(ParamKind::GruUpdateBias),
            "gru/reset_input" => Ok(ParamKind::GruResetInput),
            "gru/reset_state" => Ok(ParamKind::GruResetState),
            "gru/reset_bias" => Ok(ParamKind::GruResetBias),
            "gru/cand_input" => Ok(ParamKind::GruCandInput),
            "gru/cand_state" => Ok(ParamKind::GruCandState),
            "gru/cand_bias" => Ok(ParamKind::GruCandBias),
            "attn_weight/w" => Ok(ParamKind::AttnWeightW),
            "attn_weight/b" => Ok(ParamKind::AttnWeightB),
            "attn_score/w" => Ok(ParamKind::AttnScoreW),
            "attn_score/b" => Ok(ParamKind::AttnScoreB),
            other => Err(Error::Format(format!("unknown parameter name '{other}'"))),
        }
    }
}

/// Fully qualified parameter identity: channel plus kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId {
    pub channel: FeatureKind,
    pub kind: ParamKind,
}

impl ParamId {
    pub fn name(&self) -> String {
        format!("{}/{}", self.channel, self.kind.name())
    }
}

/// The model's full parameter set: one channel per modality in use.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub config: ModelConfig,
    channels: Vec<(FeatureKind, ChannelParams)>,
}

impl ModelParams {
    /// Initialize parameters for `config` over `graph`.
    ///
    /// `feature_dims` supplies the input feature dimensionality per channel:
    /// visual, textual, or both for the multimodal case.
    pub fn init(
        config: ModelConfig,
        graph: &FashionGraph,
        feature_dims: &[(FeatureKind, usize)],
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let needed: Vec<FeatureKind> = match config.modality {
            Modality::Visual => vec![FeatureKind::Visual],
            Modality::Textual => vec![FeatureKind::Textual],
            Modality::Multimodal => vec![FeatureKind::Visual, FeatureKind::Textual],
        };
        let mut channels = Vec::new();
        for kind in needed {
            let dim = feature_dims
                .iter()
                .find(|(k, _)| *k == kind)
                .map(|&(_, d)| d)
                .ok_or_else(|| {
                    Error::Config(format!("no feature dimension supplied for {kind} channel"))
                })?;
            if dim == 0 {
                return Err(Error::Config(format!(
                    "{kind} feature dimension must be positive"
                )));
            }
            let mut rng = Rng::for_stream(seed, &format!("params/{kind}"));
            channels.push((
                kind,
                ChannelParams::init(config.variant, graph, config.latent_dim, dim, &mut rng),
            ));
        }
        Ok(ModelParams { config, channels })
    }

    pub fn from_channels(
        config: ModelConfig,
        channels: Vec<(FeatureKind, ChannelParams)>,
    ) -> Self {
        ModelParams { config, channels }
    }

    pub fn channels(&self) -> &[(FeatureKind, ChannelParams)] {
        &self.channels
    }

    pub fn channel(&self, kind: FeatureKind) -> Result<&ChannelParams> {
        self.channels
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Config(format!("model has no {kind} channel")))
    }

    pub fn channel_mut(&mut self, kind: FeatureKind) -> Result<&mut ChannelParams> {
        self.channels
            .iter_mut()
            .find(|(k, _)| *k == kind)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Config(format!("model has no {kind} channel")))
    }

    pub fn tensor(&self, id: &ParamId) -> Option<&Tensor> {
        self.channels
            .iter()
            .find(|(k, _)| *k == id.channel)
            .and_then(|(_, p)| p.tensor(&id.kind))
    }

    pub fn tensor_mut(&mut self, id: &ParamId) -> Option<&mut Tensor> {
        self.channels
            .iter_mut()
            .find(|(k, _)| *k == id.channel)
            .and_then(|(_, p)| p.tensor_mut(&id.kind))
    }

    /// Every parameter id, in canonical (channel, kind) order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for (kind, params) in &self.channels {
            for k in channel_param_kinds(params) {
                ids.push(ParamId {
                    channel: *kind,
                    kind: k,
                });
            }
        }
        ids
    }

    /// Total scalar parameter count across channels.
    pub fn count(&self) -> usize {
        self.channels.iter().map(|(_, p)| p.count()).sum()
    }
}

/// Closed-form parameter count of one channel.
///
/// Common to all variants: per-node latent maps (d*F each), the shared
/// propagation bias (d), three gate transform pairs with biases
/// (3 * (2d^2 + d)), and two affine attention heads (2 * (d + 1)). The
/// propagation term is what distinguishes the variants: 2d^2 per node for
/// node-wise transforms, a single d^2 when shared, d^2 per directed edge for
/// edge-wise.
pub fn count_params(
    variant: Variant,
    node_count: usize,
    edge_count: usize,
    latent_dim: usize,
    feature_dim: usize,
) -> usize {
    let d = latent_dim;
    let f = feature_dim;
    let common = node_count * d * f + d + 3 * (2 * d * d + d) + 2 * (d + 1);
    let propagation = match variant {
        Variant::Ngnn => node_count * 2 * d * d,
        Variant::Ggnn => d * d,
        Variant::Egnn => edge_count * d * d,
    };
    common + propagation
}

/// The edge-transform share of a channel's parameters; zero unless edge-wise.
pub fn edge_term_params(variant: Variant, edge_count: usize, latent_dim: usize) -> usize {
    match variant {
        Variant::Egnn => edge_count * latent_dim * latent_dim,
        _ => 0,
    }
}
