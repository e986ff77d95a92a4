//! Encoder-decoder assembly, parameter flattening, and checkpoints.
//!
//! Both model kinds share the topology: `n` strided conv layers down,
//! `n` transposed conv layers mirrored back up, hardtanh after every layer
//! including the last. A QCAE maps one quaternion channel to quaternion
//! feature maps; the CAE baseline maps three real channels through real
//! feature maps.

use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::nn::{
    hardtanh_backward_q, hardtanh_backward_real, hardtanh_forward_q, hardtanh_forward_real,
    quaternion_weight_bank, real_weight_bank, ConvMode, QConvCache, QConvLayer, RealConvCache,
    RealConvLayer,
};
use crate::tensor::{QTensor, RealTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const COMPONENT_ORDER: &str = "r,x,y,z";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QcaeModel {
    pub layers: Vec<QConvLayer>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaeModel {
    pub layers: Vec<RealConvLayer>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Qcae(QcaeModel),
    Cae(CaeModel),
}

/// Per-layer forward state kept for the backward pass.
pub struct QModelCache {
    conv: Vec<QConvCache>,
    pre_activation: Vec<QTensor>,
}

pub struct CaeModelCache {
    conv: Vec<RealConvCache>,
    pre_activation: Vec<RealTensor>,
}

fn layer_channel_plan(cfg: &ModelConfig) -> Vec<(usize, usize, ConvMode)> {
    let input_channels = match cfg.kind {
        ModelKind::Qcae => 1,
        ModelKind::Cae => 3,
    };
    let mut widths = vec![input_channels];
    widths.extend(&cfg.encoder_maps);
    let mut plan = Vec::new();
    for pair in widths.windows(2) {
        plan.push((pair[1], pair[0], ConvMode::Conv));
    }
    for pair in widths.windows(2).rev() {
        plan.push((pair[0], pair[1], ConvMode::Transposed));
    }
    plan
}

impl Model {
    /// Deterministically initialized model for the given config and seed.
    pub fn build(cfg: &ModelConfig, seed: u64) -> Result<Model> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = layer_channel_plan(cfg);
        match cfg.kind {
            ModelKind::Qcae => {
                let mut layers = Vec::new();
                for (c_out, c_in, mode) in plan {
                    let output_padding = match mode {
                        ConvMode::Conv => 0,
                        ConvMode::Transposed => cfg.output_padding,
                    };
                    let mut layer = QConvLayer::new(
                        mode,
                        c_out,
                        c_in,
                        cfg.kernel,
                        cfg.stride,
                        cfg.padding,
                        output_padding,
                    )?;
                    layer.weights = quaternion_weight_bank(c_out, c_in, cfg.kernel, &mut rng);
                    layers.push(layer);
                }
                Ok(Model::Qcae(QcaeModel { layers }))
            }
            ModelKind::Cae => {
                let mut layers = Vec::new();
                for (c_out, c_in, mode) in plan {
                    let output_padding = match mode {
                        ConvMode::Conv => 0,
                        ConvMode::Transposed => cfg.output_padding,
                    };
                    let mut layer = RealConvLayer::new(
                        mode,
                        c_out,
                        c_in,
                        cfg.kernel,
                        cfg.stride,
                        cfg.padding,
                        output_padding,
                    )?;
                    layer.weights = real_weight_bank(c_out, c_in, cfg.kernel, &mut rng);
                    layers.push(layer);
                }
                Ok(Model::Cae(CaeModel { layers }))
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Qcae(_) => ModelKind::Qcae,
            Model::Cae(_) => ModelKind::Cae,
        }
    }

    /// Real-scalar parameter count.
    pub fn parameter_count(&self) -> usize {
        match self {
            Model::Qcae(m) => m.layers.iter().map(|l| l.parameter_count()).sum(),
            Model::Cae(m) => m.layers.iter().map(|l| l.parameter_count()).sum(),
        }
    }

    /// `(label, real-scalar count)` per layer, in forward order.
    pub fn layer_parameter_counts(&self) -> Vec<(String, usize)> {
        fn label(mode: ConvMode, kind: &str, c_in: usize, c_out: usize, k: usize) -> String {
            let op = match mode {
                ConvMode::Conv => "conv",
                ConvMode::Transposed => "tconv",
            };
            format!("{kind}_{op}({c_in}->{c_out}, k{k})")
        }
        match self {
            Model::Qcae(m) => m
                .layers
                .iter()
                .map(|l| {
                    (
                        label(l.mode, "q", l.c_in, l.c_out, l.kernel),
                        l.parameter_count(),
                    )
                })
                .collect(),
            Model::Cae(m) => m
                .layers
                .iter()
                .map(|l| {
                    (
                        label(l.mode, "r", l.c_in, l.c_out, l.kernel),
                        l.parameter_count(),
                    )
                })
                .collect(),
        }
    }

    /// All parameters as one flat vector: per layer, weights then bias, in
    /// storage order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.parameter_count());
        match self {
            Model::Qcae(m) => {
                for l in &m.layers {
                    flat.extend_from_slice(&l.weights);
                    flat.extend_from_slice(&l.bias);
                }
            }
            Model::Cae(m) => {
                for l in &m.layers {
                    flat.extend_from_slice(&l.weights);
                    flat.extend_from_slice(&l.bias);
                }
            }
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::shape(format!(
                "flat parameter vector has {} scalars, model needs {}",
                flat.len(),
                self.parameter_count()
            )));
        }
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[at..at + dst.len()]);
            at += dst.len();
        };
        match self {
            Model::Qcae(m) => {
                for l in m.layers.iter_mut() {
                    take(&mut l.weights);
                    take(&mut l.bias);
                }
            }
            Model::Cae(m) => {
                for l in m.layers.iter_mut() {
                    take(&mut l.weights);
                    take(&mut l.bias);
                }
            }
        }
        Ok(())
    }

    fn validate_loaded(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Checkpoint(format!("inconsistent {what}")))
            }
        };
        match self {
            Model::Qcae(m) => {
                check(!m.layers.is_empty(), "layer list")?;
                for l in &m.layers {
                    check(
                        l.weights.len() == 4 * l.c_out * l.c_in * l.kernel * l.kernel,
                        "weight length",
                    )?;
                    check(l.bias.len() == 4 * l.c_out, "bias length")?;
                }
            }
            Model::Cae(m) => {
                check(!m.layers.is_empty(), "layer list")?;
                for l in &m.layers {
                    check(
                        l.weights.len() == l.c_out * l.c_in * l.kernel * l.kernel,
                        "weight length",
                    )?;
                    check(l.bias.len() == l.c_out, "bias length")?;
                }
            }
        }
        Ok(())
    }

    /// Write a versioned checkpoint: layer order, shapes, component order,
    /// and every real scalar in declared order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let doc = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            component_order: COMPONENT_ORDER.to_string(),
            model: self.clone(),
        };
        let text = serde_json::to_string(&doc)
            .map_err(|e| Error::Checkpoint(format!("serialize failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("parse failed: {e}")))?;
        if doc.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        if doc.component_order != COMPONENT_ORDER {
            return Err(Error::Checkpoint(format!(
                "unexpected component order {:?}",
                doc.component_order
            )));
        }
        doc.model.validate_loaded()?;
        Ok(doc.model)
    }

    /// Spatial size of the deepest feature map for an `(h, w)` input, with
    /// its channel count in the model's own units.
    pub fn latent_dims(&self, h: usize, w: usize) -> Result<(usize, usize, usize)> {
        let (mut lh, mut lw) = (h, w);
        let mut channels = 0;
        match self {
            Model::Qcae(m) => {
                for l in &m.layers {
                    if l.mode == ConvMode::Conv {
                        let (nh, nw) = l.output_dims(lh, lw)?;
                        lh = nh;
                        lw = nw;
                        channels = l.c_out;
                    }
                }
            }
            Model::Cae(m) => {
                for l in &m.layers {
                    if l.mode == ConvMode::Conv {
                        let (nh, nw) = l.output_dims(lh, lw)?;
                        lh = nh;
                        lw = nw;
                        channels = l.c_out;
                    }
                }
            }
        }
        Ok((channels, lh, lw))
    }
}

/// Spatial output size of the full encoder-decoder for an `(h, w)` input,
/// computed from the size formulas alone.
pub fn forward_dims(cfg: &ModelConfig, h: usize, w: usize) -> Result<(usize, usize)> {
    use crate::nn::{conv_out_dim, tconv_out_dim};
    let (mut ch, mut cw) = (h, w);
    for (_, _, mode) in layer_channel_plan(cfg) {
        match mode {
            ConvMode::Conv => {
                ch = conv_out_dim(ch, cfg.kernel, cfg.stride, cfg.padding)?;
                cw = conv_out_dim(cw, cfg.kernel, cfg.stride, cfg.padding)?;
            }
            ConvMode::Transposed => {
                ch = tconv_out_dim(ch, cfg.kernel, cfg.stride, cfg.padding, cfg.output_padding)?;
                cw = tconv_out_dim(cw, cfg.kernel, cfg.stride, cfg.padding, cfg.output_padding)?;
            }
        }
    }
    Ok((ch, cw))
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    component_order: String,
    model: Model,
}

impl QcaeModel {
    /// Forward through every layer with hardtanh after each, keeping the
    /// per-layer state the backward pass needs.
    pub fn forward(&self, input: &QTensor) -> Result<(QTensor, QModelCache)> {
        let mut cache = QModelCache {
            conv: Vec::with_capacity(self.layers.len()),
            pre_activation: Vec::with_capacity(self.layers.len()),
        };
        let mut x = input.clone();
        for layer in &self.layers {
            let (pre, conv_cache) = layer.forward(&x)?;
            let (post, pre_cache) = hardtanh_forward_q(&pre);
            cache.conv.push(conv_cache);
            cache.pre_activation.push(pre_cache);
            x = post;
        }
        Ok((x, cache))
    }

    /// Activation-free forward, for inference.
    pub fn predict(&self, input: &QTensor) -> Result<QTensor> {
        Ok(self.forward(input)?.0)
    }

    /// Gradients for every parameter, flattened in [`Model::params_flat`]
    /// order.
    pub fn backward(&self, grad_output: &QTensor, cache: &QModelCache) -> Result<Vec<f64>> {
        if cache.conv.len() != self.layers.len() {
            return Err(Error::shape("cache does not match model depth"));
        }
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            g = hardtanh_backward_q(&g, &cache.pre_activation[idx])?;
            let (gin, grads) = layer.backward(&g, &cache.conv[idx])?;
            per_layer.push(grads);
            g = gin;
        }
        per_layer.reverse();
        let mut flat = Vec::with_capacity(self.layers.iter().map(|l| l.parameter_count()).sum());
        for grads in per_layer {
            flat.extend_from_slice(&grads.weights);
            flat.extend_from_slice(&grads.bias);
        }
        Ok(flat)
    }
}

impl CaeModel {
    pub fn forward(&self, input: &RealTensor) -> Result<(RealTensor, CaeModelCache)> {
        let mut cache = CaeModelCache {
            conv: Vec::with_capacity(self.layers.len()),
            pre_activation: Vec::with_capacity(self.layers.len()),
        };
        let mut x = input.clone();
        for layer in &self.layers {
            let (pre, conv_cache) = layer.forward(&x)?;
            let (post, pre_cache) = hardtanh_forward_real(&pre);
            cache.conv.push(conv_cache);
            cache.pre_activation.push(pre_cache);
            x = post;
        }
        Ok((x, cache))
    }

    pub fn predict(&self, input: &RealTensor) -> Result<RealTensor> {
        Ok(self.forward(input)?.0)
    }

    pub fn backward(&self, grad_output: &RealTensor, cache: &CaeModelCache) -> Result<Vec<f64>> {
        if cache.conv.len() != self.layers.len() {
            return Err(Error::shape("cache does not match model depth"));
        }
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            g = hardtanh_backward_real(&g, &cache.pre_activation[idx])?;
            let (gin, grads) = layer.backward(&g, &cache.conv[idx])?;
            per_layer.push(grads);
            g = gin;
        }
        per_layer.reverse();
        let mut flat = Vec::with_capacity(self.layers.iter().map(|l| l.parameter_count()).sum());
        for grads in per_layer {
            flat.extend_from_slice(&grads.weights);
            flat.extend_from_slice(&grads.bias);
        }
        Ok(flat)
    }
}
