//! Compatibility model: per-category latent mapping, gated message passing
//! over the outfit subgraph, attention readout, and two-channel fusion.

mod checkpoint;
mod forward;
mod params;

pub use checkpoint::{read_checkpoint, read_checkpoint_from_path, write_checkpoint,
                     write_checkpoint_to_path, Checkpoint};
pub use forward::{
    channel_forward, multimodal_forward, score_any, score_multimodal, score_outfit, ChannelVars,
    FeatureSet, MultimodalScore, MultimodalVars, OutfitScore, ParamBinder,
};
pub use params::{
    count_params, edge_term_params, AffineScalar, ChannelParams, GruWeights, ModelConfig,
    ModelParams, Modality, ParamId, ParamKind, Propagation, Variant,
};
