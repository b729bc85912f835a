//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "NGCK" | version u32
//! latent_dim u32 | steps u32 | variant u8 | modality u8 | pad u16 | fusion_weight f64
//! vocab_hash u64 | graph_hash u64
//! channel_count u32
//! per channel:
//!   kind u8 | feature_dim u32 | param_count u32
//!   per parameter: name (u32 len + bytes) | rank u32 | dims u32* | values f64*
//! trailer: fnv1a64 of everything before it
//! ```
//!
//! Values are stored as raw f64 bits, so save/load round-trips bit-exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::hash::Fnv1a;

use super::params::{
    channel_param_kinds, AffineScalar, ChannelParams, GruWeights, ModelConfig, ModelParams,
    Modality, ParamKind, Propagation, Variant,
};

const CHECKPOINT_MAGIC: &[u8; 4] = b"NGCK";
const CHECKPOINT_VERSION: u32 = 1;

/// A trained model together with the identity of the data it was built on.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab_hash: u64,
    pub graph_hash: u64,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    /// Hash of the serialized container (including the trailer).
    pub fn content_hash(&self) -> Result<u64> {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, self)?;
        Ok(crate::hash::fnv1a64(&buf))
    }
}

fn variant_tag(v: Variant) -> u8 {
    match v {
        Variant::Ngnn => 0,
        Variant::Ggnn => 1,
        Variant::Egnn => 2,
    }
}

fn variant_from_tag(tag: u8) -> Result<Variant> {
    match tag {
        0 => Ok(Variant::Ngnn),
        1 => Ok(Variant::Ggnn),
        2 => Ok(Variant::Egnn),
        other => Err(Error::Format(format!("unknown variant tag {other}"))),
    }
}

fn modality_tag(m: Modality) -> u8 {
    match m {
        Modality::Visual => 0,
        Modality::Textual => 1,
        Modality::Multimodal => 2,
    }
}

fn modality_from_tag(tag: u8) -> Result<Modality> {
    match tag {
        0 => Ok(Modality::Visual),
        1 => Ok(Modality::Textual),
        2 => Ok(Modality::Multimodal),
        other => Err(Error::Format(format!("unknown modality tag {other}"))),
    }
}

fn kind_tag(k: FeatureKind) -> u8 {
    match k {
        FeatureKind::Visual => 0,
        FeatureKind::Textual => 1,
    }
}

fn kind_from_tag(tag: u8) -> Result<FeatureKind> {
    match tag {
        0 => Ok(FeatureKind::Visual),
        1 => Ok(FeatureKind::Textual),
        other => Err(Error::Format(format!("unknown channel tag {other}"))),
    }
}

/// A writer that hashes everything passing through it.
struct HashingWriter<W: Write> {
    inner: W,
    hasher: Fnv1a,
}

impl<W: Write> HashingWriter<W> {
    fn new(inner: W) -> Self {
        HashingWriter {
            inner,
            hasher: Fnv1a::new(),
        }
    }
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.write(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

pub fn write_checkpoint<W: Write>(w: W, ckpt: &Checkpoint) -> Result<()> {
    let mut w = HashingWriter::new(w);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;

    let cfg = &ckpt.params.config;
    w.write_all(&(cfg.latent_dim as u32).to_le_bytes())?;
    w.write_all(&(cfg.steps as u32).to_le_bytes())?;
    w.write_all(&[variant_tag(cfg.variant), modality_tag(cfg.modality)])?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&cfg.fusion_weight.to_bits().to_le_bytes())?;
    w.write_all(&ckpt.vocab_hash.to_le_bytes())?;
    w.write_all(&ckpt.graph_hash.to_le_bytes())?;

    let channels = ckpt.params.channels();
    w.write_all(&(channels.len() as u32).to_le_bytes())?;
    for (kind, params) in channels {
        w.write_all(&[kind_tag(*kind)])?;
        w.write_all(&(params.feature_dim as u32).to_le_bytes())?;
        let kinds = channel_param_kinds(params);
        w.write_all(&(kinds.len() as u32).to_le_bytes())?;
        for pk in kinds {
            let tensor = params.tensor(&pk).expect("enumerated kinds exist");
            let name = pk.name();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
            for &dim in tensor.shape() {
                w.write_all(&(dim as u32).to_le_bytes())?;
            }
            for &v in tensor.data() {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
    }

    let digest = w.hasher.finish();
    w.inner.write_all(&digest.to_le_bytes())?;
    Ok(())
}

pub fn write_checkpoint_to_path(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut file, ckpt)
}

struct HashingReader<R: Read> {
    inner: R,
    hasher: Fnv1a,
}

impl<R: Read> HashingReader<R> {
    fn new(inner: R) -> Self {
        HashingReader {
            inner,
            hasher: Fnv1a::new(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|_| Error::Format(format!("checkpoint truncated while reading {what}")))?;
        self.hasher.write(buf);
        Ok(())
    }

    fn read_u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b, what)?;
        Ok(b[0])
    }

    fn read_u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.read_u64(what)?))
    }

    fn read_string(&mut self, what: &str) -> Result<String> {
        let len = self.read_u32(what)? as usize;
        let mut bytes = vec![0u8; len];
        self.read_exact(&mut bytes, what)?;
        String::from_utf8(bytes).map_err(|_| Error::Format(format!("{what} is not valid UTF-8")))
    }
}

fn assemble_channel(
    feature_dim: usize,
    latent_dim: usize,
    tensors: BTreeMap<ParamKind, Tensor>,
) -> Result<ChannelParams> {
    let take = |map: &BTreeMap<ParamKind, Tensor>, kind: ParamKind| -> Result<Tensor> {
        map.get(&kind)
            .cloned()
            .ok_or_else(|| Error::Format(format!("checkpoint missing parameter {}", kind.name())))
    };

    let mut latent_maps = Vec::new();
    while let Some(t) = tensors.get(&ParamKind::LatentMap(latent_maps.len())) {
        latent_maps.push(t.clone());
    }
    if latent_maps.is_empty() {
        return Err(Error::Format("checkpoint has no latent maps".into()));
    }

    let propagation = if tensors.contains_key(&ParamKind::SharedTransform) {
        Propagation::Shared {
            transform: take(&tensors, ParamKind::SharedTransform)?,
        }
    } else if tensors.contains_key(&ParamKind::InputTransform(0)) {
        let mut input_transforms = Vec::new();
        while let Some(t) = tensors.get(&ParamKind::InputTransform(input_transforms.len())) {
            input_transforms.push(t.clone());
        }
        let mut output_transforms = Vec::new();
        while let Some(t) = tensors.get(&ParamKind::OutputTransform(output_transforms.len())) {
            output_transforms.push(t.clone());
        }
        if input_transforms.len() != latent_maps.len()
            || output_transforms.len() != latent_maps.len()
        {
            return Err(Error::Format(format!(
                "node-wise transform counts ({}, {}) disagree with {} nodes",
                input_transforms.len(),
                output_transforms.len(),
                latent_maps.len()
            )));
        }
        Propagation::NodeWise {
            input_transforms,
            output_transforms,
        }
    } else {
        let mut edge_transforms = Vec::new();
        while let Some(t) = tensors.get(&ParamKind::EdgeTransform(edge_transforms.len())) {
            edge_transforms.push(t.clone());
        }
        if edge_transforms.is_empty() {
            return Err(Error::Format(
                "checkpoint carries no propagation transforms".into(),
            ));
        }
        Propagation::EdgeWise {
            transforms: edge_transforms,
        }
    };

    let channel = ChannelParams {
        latent_maps,
        feature_dim,
        propagation,
        prop_bias: take(&tensors, ParamKind::PropBias)?,
        gru: GruWeights {
            update_input: take(&tensors, ParamKind::GruUpdateInput)?,
            update_state: take(&tensors, ParamKind::GruUpdateState)?,
            update_bias: take(&tensors, ParamKind::GruUpdateBias)?,
            reset_input: take(&tensors, ParamKind::GruResetInput)?,
            reset_state: take(&tensors, ParamKind::GruResetState)?,
            reset_bias: take(&tensors, ParamKind::GruResetBias)?,
            cand_input: take(&tensors, ParamKind::GruCandInput)?,
            cand_state: take(&tensors, ParamKind::GruCandState)?,
            cand_bias: take(&tensors, ParamKind::GruCandBias)?,
        },
        attn_weight: AffineScalar {
            weight: take(&tensors, ParamKind::AttnWeightW)?,
            bias: take(&tensors, ParamKind::AttnWeightB)?,
        },
        attn_score: AffineScalar {
            weight: take(&tensors, ParamKind::AttnScoreW)?,
            bias: take(&tensors, ParamKind::AttnScoreB)?,
        },
    };

    // Shape sanity for the loaded channel.
    for (name, tensor, rows, cols) in [
        ("latent_map", &channel.latent_maps[0], latent_dim, feature_dim),
        ("gru/update_input", &channel.gru.update_input, latent_dim, latent_dim),
        ("attn_weight/w", &channel.attn_weight.weight, 1, latent_dim),
    ] {
        if tensor.shape() != [rows, cols] {
            return Err(Error::Format(format!(
                "checkpoint parameter {name} has shape {:?}, expected [{rows}, {cols}]",
                tensor.shape()
            )));
        }
    }
    Ok(channel)
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    let mut r = HashingReader::new(r);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let version = r.read_u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }

    let latent_dim = r.read_u32("latent_dim")? as usize;
    let steps = r.read_u32("steps")? as usize;
    let variant = variant_from_tag(r.read_u8("variant")?)?;
    let modality = modality_from_tag(r.read_u8("modality")?)?;
    let _pad = r.read_u16("padding")?;
    let fusion_weight = r.read_f64("fusion_weight")?;
    let vocab_hash = r.read_u64("vocab_hash")?;
    let graph_hash = r.read_u64("graph_hash")?;

    let config = ModelConfig {
        latent_dim,
        steps,
        variant,
        modality,
        fusion_weight,
    };

    let channel_count = r.read_u32("channel_count")? as usize;
    let mut channels = Vec::with_capacity(channel_count);
    for _ in 0..channel_count {
        let kind = kind_from_tag(r.read_u8("channel kind")?)?;
        let feature_dim = r.read_u32("feature_dim")? as usize;
        let param_count = r.read_u32("param_count")? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..param_count {
            let name = r.read_string("parameter name")?;
            let pk = ParamKind::parse(&name)?;
            let rank = r.read_u32("rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u32("dimension")? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(r.read_f64("value")?);
            }
            tensors.insert(pk, Tensor::from_vec(shape, data)?);
        }
        channels.push((kind, assemble_channel(feature_dim, latent_dim, tensors)?));
    }

    let expected_digest = r.hasher.finish();
    let mut trailer = [0u8; 8];
    r.inner
        .read_exact(&mut trailer)
        .map_err(|_| Error::Format("checkpoint truncated before trailer".into()))?;
    let stored_digest = u64::from_le_bytes(trailer);
    if stored_digest != expected_digest {
        return Err(Error::Format(format!(
            "checkpoint digest mismatch: stored {stored_digest:#018x}, computed {expected_digest:#018x}"
        )));
    }

    Ok(Checkpoint {
        params: ModelParams::from_channels(config, channels),
        vocab_hash,
        graph_hash,
    })
}

pub fn read_checkpoint_from_path(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Format(format!("cannot open checkpoint {}: {e}", path.display()))
    })?;
    read_checkpoint(std::io::BufReader::new(file))
}
