//! Convolutional feature extractor.
//!
//! Residual stages of 3x3 convolutions with per-position channel
//! normalization (batch-independent, so single-sample forwards are
//! deterministic). Each stage opens with a strided downsample convolution.

use crate::error::{Result, VlanError};
use crate::ops::ConvSpec;
use crate::params::{init_uniform, ModelParams, ParamId};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor};

pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageConfig {
    pub width: usize,
    pub stride: (usize, usize),
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneConfig {
    pub stages: Vec<StageConfig>,
}

impl BackboneConfig {
    /// Desk-scale default: three stages of two residual blocks, widths
    /// c/4, c/2, c, each downsampling by 2.
    pub fn toy(c: usize) -> Self {
        BackboneConfig {
            stages: vec![
                StageConfig { width: c / 4, stride: (2, 2), blocks: 2 },
                StageConfig { width: c / 2, stride: (2, 2), blocks: 2 },
                StageConfig { width: c, stride: (2, 2), blocks: 2 },
            ],
        }
    }

    /// Five-stage layout in the style of deep text-recognition backbones:
    /// stride 2 in stages 2-4, output width 512.
    pub fn deep512() -> Self {
        BackboneConfig {
            stages: vec![
                StageConfig { width: 32, stride: (1, 1), blocks: 3 },
                StageConfig { width: 64, stride: (2, 2), blocks: 4 },
                StageConfig { width: 128, stride: (2, 2), blocks: 6 },
                StageConfig { width: 256, stride: (2, 2), blocks: 6 },
                StageConfig { width: 512, stride: (1, 1), blocks: 3 },
            ],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.stages.last().map_or(0, |s| s.width)
    }

    pub fn total_stride(&self) -> (usize, usize) {
        self.stages.iter().fold((1, 1), |(sy, sx), s| (sy * s.stride.0, sx * s.stride.1))
    }

    /// Output spatial dims for an input; errors when the input is not
    /// divisible by the total stride.
    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (sy, sx) = self.total_stride();
        if h % sy != 0 || w % sx != 0 {
            return Err(VlanError::Shape(format!(
                "input {h}x{w} not divisible by total stride {sy}x{sx}"
            )));
        }
        Ok((h / sy, w / sx))
    }

    pub fn validate(&self, n_steps: usize, input_h: usize, input_w: usize) -> Result<()> {
        if self.stages.is_empty() {
            return Err(VlanError::Config("backbone needs at least one stage".into()));
        }
        let (h, w) = self.out_dims(input_h, input_w)?;
        if h * w < n_steps {
            return Err(VlanError::Config(format!(
                "feature map {h}x{w} has fewer positions than {n_steps} decode steps"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ConvIds {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct NormIds {
    g: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct BlockIds {
    conv1: ConvIds,
    norm1: NormIds,
    conv2: ConvIds,
    norm2: NormIds,
}

#[derive(Debug, Clone)]
pub struct BackboneIds {
    stages: Vec<(ConvIds, NormIds, Vec<BlockIds>)>,
    strides: Vec<(usize, usize)>,
}

fn register_conv<S: Scalar>(
    params: &mut ModelParams<S>,
    prefix: &str,
    cin: usize,
    cout: usize,
    rng: &mut Rng,
) -> Result<ConvIds> {
    Ok(ConvIds {
        w: params.register(&format!("{prefix}.w"), init_uniform(rng, vec![cout, cin, 3, 3], cin * 9))?,
        b: params.register(&format!("{prefix}.b"), Tensor::zeros(vec![cout]))?,
    })
}

fn register_norm<S: Scalar>(params: &mut ModelParams<S>, prefix: &str, c: usize) -> Result<NormIds> {
    Ok(NormIds {
        g: params.register(&format!("{prefix}.g"), Tensor::full(vec![c], S::ONE))?,
        b: params.register(&format!("{prefix}.b"), Tensor::zeros(vec![c]))?,
    })
}

impl BackboneIds {
    pub fn register<S: Scalar>(
        params: &mut ModelParams<S>,
        cfg: &BackboneConfig,
        in_channels: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut stages = Vec::new();
        let mut strides = Vec::new();
        let mut cin = in_channels;
        for (si, stage) in cfg.stages.iter().enumerate() {
            let prefix = format!("backbone.stage{si}");
            let down = register_conv(params, &format!("{prefix}.down"), cin, stage.width, rng)?;
            let down_norm = register_norm(params, &format!("{prefix}.down.norm"), stage.width)?;
            let mut blocks = Vec::new();
            for bi in 0..stage.blocks {
                let bp = format!("{prefix}.block{bi}");
                blocks.push(BlockIds {
                    conv1: register_conv(params, &format!("{bp}.conv1"), stage.width, stage.width, rng)?,
                    norm1: register_norm(params, &format!("{bp}.norm1"), stage.width)?,
                    conv2: register_conv(params, &format!("{bp}.conv2"), stage.width, stage.width, rng)?,
                    norm2: register_norm(params, &format!("{bp}.norm2"), stage.width)?,
                });
            }
            stages.push((down, down_norm, blocks));
            strides.push(stage.stride);
            cin = stage.width;
        }
        Ok(BackboneIds { stages, strides })
    }

    /// Forward one image `[1, H, W]` to a `[c, h, w]` feature map.
    pub fn forward<S: Scalar>(&self, tape: &mut Tape<'_, S>, x: Var) -> Result<Var> {
        let mut cur = x;
        for ((down, down_norm, blocks), &stride) in self.stages.iter().zip(self.strides.iter()) {
            let w = tape.param(down.w);
            let b = tape.param(down.b);
            cur = tape.conv2d(cur, w, b, ConvSpec { stride, pad: (1, 1) })?;
            let g = tape.param(down_norm.g);
            let nb = tape.param(down_norm.b);
            cur = tape.channel_norm(cur, g, nb, NORM_EPS)?;
            cur = tape.relu(cur);
            for block in blocks {
                let skip = cur;
                let w1 = tape.param(block.conv1.w);
                let b1 = tape.param(block.conv1.b);
                let mut h = tape.conv2d(cur, w1, b1, ConvSpec { stride: (1, 1), pad: (1, 1) })?;
                let g1 = tape.param(block.norm1.g);
                let nb1 = tape.param(block.norm1.b);
                h = tape.channel_norm(h, g1, nb1, NORM_EPS)?;
                h = tape.relu(h);
                let w2 = tape.param(block.conv2.w);
                let b2 = tape.param(block.conv2.b);
                h = tape.conv2d(h, w2, b2, ConvSpec { stride: (1, 1), pad: (1, 1) })?;
                let g2 = tape.param(block.norm2.g);
                let nb2 = tape.param(block.norm2.b);
                h = tape.channel_norm(h, g2, nb2, NORM_EPS)?;
                h = tape.add(h, skip)?;
                cur = tape.relu(h);
            }
        }
        Ok(cur)
    }
}

/// Batched feature extraction: images `[b, H, W]` to features `[b, h, w, c]`.
pub fn extract_features<S: Scalar>(
    images: &Tensor<S>,
    ids: &BackboneIds,
    cfg: &BackboneConfig,
    params: &ModelParams<S>,
) -> Result<Tensor<S>> {
    let [b, ih, iw] = match images.shape() {
        [a, h, w] => [*a, *h, *w],
        other => return Err(VlanError::Shape(format!("expected [b, H, W] images, got {other:?}"))),
    };
    let (oh, ow) = cfg.out_dims(ih, iw)?;
    let c = cfg.out_channels();
    let mut out = Tensor::zeros(vec![b, oh, ow, c]);
    for i in 0..b {
        let img = Tensor::new(
            vec![1, ih, iw],
            images.data()[i * ih * iw..(i + 1) * ih * iw].to_vec(),
        )?;
        let mut tape = Tape::new(params);
        let x = tape.constant(img);
        let fm = ids.forward(&mut tape, x)?;
        let flat = tape.chw_to_hwc(fm)?;
        let v = tape.value(flat);
        out.data_mut()[i * oh * ow * c..(i + 1) * oh * ow * c].copy_from_slice(v.data());
    }
    out.validate_finite("extract_features output")?;
    Ok(out)
}
