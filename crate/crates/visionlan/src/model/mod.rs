//! Model assembly: backbone + masked language-aware module (training only)
//! + visual reasoning module.

pub mod attention;
pub mod backbone;
pub mod mlm;
pub mod posenc;
pub mod vrm;

use crate::error::{Result, VlanError};
use crate::params::{ModelParams, ParamGroup, ParamId};
use crate::rng::{mix, Rng};
use crate::tape::Tape;
use crate::tensor::{Scalar, Tensor};
use crate::vocab::VOCAB_SIZE;
use backbone::{BackboneConfig, BackboneIds};
use mlm::MlmIds;
use vrm::{Recognition, VrmIds};

/// Which feature masker trains the recognizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Masker {
    /// Learned character-wise mask with complementary-branch supervision.
    Mlm,
    /// Random rectangle baseline.
    Cutout,
    /// Random per-cell baseline.
    Dropout,
    /// No masking module at all (vision-only baseline).
    None,
}

impl Masker {
    pub fn parse(s: &str) -> Result<Masker> {
        match s {
            "mlm" => Ok(Masker::Mlm),
            "cutout" => Ok(Masker::Cutout),
            "dropout" => Ok(Masker::Dropout),
            "none" => Ok(Masker::None),
            other => Err(VlanError::Config(format!("unknown masker '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Masker::Mlm => "mlm",
            Masker::Cutout => "cutout",
            Masker::Dropout => "dropout",
            Masker::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Model width (backbone output channels and transformer width).
    pub c: usize,
    pub n_heads: usize,
    /// Transformer units in the reasoning stack.
    pub vsr_depth: usize,
    /// Max decode steps (word length + EOS at most).
    pub n_max: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub backbone: BackboneConfig,
    pub masker: Masker,
    /// When true, the learned mask is inserted as a constant while occluding
    /// features, so the recognition loss does not shape the mask module.
    pub mask_detached: bool,
    /// When true, the mask module reads live backbone features and its branch
    /// losses backpropagate into the backbone (the fully coupled graph). The
    /// default feeds it a detached copy: branch supervision then shapes only
    /// mask-module parameters, which keeps recognizer training stable at
    /// small scale. The recognition loss always flows through the mask.
    pub mlm_coupled: bool,
}

impl ModelConfig {
    pub fn toy() -> Self {
        ModelConfig {
            c: 128,
            n_heads: 4,
            vsr_depth: 3,
            n_max: 12,
            image_h: 32,
            image_w: 128,
            backbone: BackboneConfig::toy(128),
            masker: Masker::Mlm,
            mask_detached: false,
            mlm_coupled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c == 0 || self.c % 2 != 0 {
            return Err(VlanError::Config(format!("model width {} must be even and positive", self.c)));
        }
        if self.n_heads == 0 || self.c % self.n_heads != 0 {
            return Err(VlanError::Config(format!(
                "model width {} not divisible by {} heads",
                self.c, self.n_heads
            )));
        }
        if self.backbone.out_channels() != self.c {
            return Err(VlanError::Config(format!(
                "backbone output width {} does not match model width {}",
                self.backbone.out_channels(),
                self.c
            )));
        }
        self.backbone.validate(self.n_max, self.image_h, self.image_w)?;
        Ok(())
    }

    /// Feature-map dims for the configured input size.
    pub fn feature_dims(&self) -> (usize, usize) {
        self.backbone
            .out_dims(self.image_h, self.image_w)
            .expect("validated config")
    }
}

/// Handles of all registered submodules.
#[derive(Debug, Clone)]
pub struct ModelIds {
    pub backbone: BackboneIds,
    pub mlm: Option<MlmIds>,
    pub vrm: VrmIds,
}

/// Config, parameter store and fixed codes for one model instance.
pub struct Model<S: Scalar> {
    pub cfg: ModelConfig,
    pub ids: ModelIds,
    pub params: ModelParams<S>,
    /// Fixed sinusoidal codes over the flattened feature positions.
    pub spatial_pe: Tensor<S>,
}

impl<S: Scalar> Model<S> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ModelParams::new();
        let mut rng = Rng::new(mix(&[seed, 0x6d6f_6465]));
        let backbone = BackboneIds::register(&mut params, &cfg.backbone, 1, &mut rng)?;
        let mlm_ids = if cfg.masker == Masker::None {
            None
        } else {
            Some(MlmIds::register(&mut params, cfg.c, cfg.n_heads, cfg.n_max, VOCAB_SIZE, &mut rng)?)
        };
        let vrm = VrmIds::register(&mut params, cfg.c, cfg.n_heads, cfg.vsr_depth, cfg.n_max, VOCAB_SIZE, &mut rng)?;
        let (h, w) = cfg.feature_dims();
        let spatial_pe = posenc::positional_encoding::<f64>(h * w, cfg.c)?.cast::<S>();
        Ok(Model { cfg, ids: ModelIds { backbone, mlm: mlm_ids, vrm }, params, spatial_pe })
    }

    /// Forward one image `[H, W]` through backbone + reasoning + decoding.
    /// This is the complete inference path; no mask module is involved.
    pub fn recognize_image(&self, image: &Tensor<S>) -> Result<Recognition<S>> {
        let (h, w) = image.dims2()?;
        if (h, w) != (self.cfg.image_h, self.cfg.image_w) {
            return Err(VlanError::Shape(format!(
                "image {h}x{w} does not match configured {}x{}",
                self.cfg.image_h, self.cfg.image_w
            )));
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(image.clone().reshaped(vec![1, h, w])?);
        let fm = self.ids.backbone.forward(&mut tape, x)?;
        let flat = tape.chw_to_hwc(fm)?;
        let pe = tape.constant(self.spatial_pe.clone());
        let reasoned = self.ids.vrm.vsr_forward_t(&mut tape, flat, pe)?;
        let out = attention::pp_forward(&mut tape, reasoned, &self.ids.vrm.pp)?;
        let att_t = tape.transpose(out.att_steps)?;
        let logits = tape.value(out.logits).clone();
        let text = vrm::greedy_decode(&logits)?;
        Ok(Recognition { att: tape.value(att_t).clone(), logits, text })
    }

    /// Names of every parameter reachable from the inference path.
    pub fn inference_param_names(&self) -> Result<Vec<String>> {
        let (h, w) = self.cfg.feature_dims();
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(Tensor::zeros(vec![1, self.cfg.image_h, self.cfg.image_w]));
        let fm = self.ids.backbone.forward(&mut tape, x)?;
        let flat = tape.chw_to_hwc(fm)?;
        debug_assert_eq!(tape.value(flat).shape(), &[h * w, self.cfg.c]);
        let pe = tape.constant(self.spatial_pe.clone());
        let reasoned = self.ids.vrm.vsr_forward_t(&mut tape, flat, pe)?;
        let _ = attention::pp_forward(&mut tape, reasoned, &self.ids.vrm.pp)?;
        let mut names: Vec<String> = tape
            .touched_params()
            .into_iter()
            .map(|id| self.params.name(id).to_string())
            .collect();
        names.sort();
        Ok(names)
    }

    /// Element count of the inference-reachable parameter set.
    pub fn inference_param_count(&self) -> Result<usize> {
        let (h, _) = self.cfg.feature_dims();
        debug_assert!(h > 0);
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(Tensor::zeros(vec![1, self.cfg.image_h, self.cfg.image_w]));
        let fm = self.ids.backbone.forward(&mut tape, x)?;
        let flat = tape.chw_to_hwc(fm)?;
        let pe = tape.constant(self.spatial_pe.clone());
        let reasoned = self.ids.vrm.vsr_forward_t(&mut tape, flat, pe)?;
        let _ = attention::pp_forward(&mut tape, reasoned, &self.ids.vrm.pp)?;
        Ok(tape
            .touched_params()
            .into_iter()
            .map(|id| self.params.value(id).numel())
            .sum())
    }
}

/// Ensures the inference graph touches exactly the backbone and reasoning
/// groups, never the mask module.
pub fn check_inference_partition<S: Scalar>(model: &Model<S>) -> Result<()> {
    let names = model.inference_param_names()?;
    let mut expected: Vec<String> = model
        .params
        .iter()
        .filter(|(_, p)| matches!(p.group, ParamGroup::Backbone | ParamGroup::Vrm))
        .map(|(_, p)| p.name.clone())
        .collect();
    expected.sort();
    if names != expected {
        return Err(VlanError::Contract(
            "inference graph does not match the backbone+vrm parameter set".into(),
        ));
    }
    Ok(())
}

/// Convenience accessor used by training code.
pub fn param_ids_of_group<S: Scalar>(params: &ModelParams<S>, group: ParamGroup) -> Vec<ParamId> {
    params
        .iter()
        .filter(|(_, p)| p.group == group)
        .map(|(id, _)| id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(masker: Masker) -> ModelConfig {
        ModelConfig {
            c: 16,
            n_heads: 2,
            vsr_depth: 2,
            n_max: 6,
            image_h: 16,
            image_w: 64,
            backbone: BackboneConfig::toy(16),
            masker,
            mask_detached: false,
            mlm_coupled: false,
        }
    }

    #[test]
    fn builds_and_recognizes() {
        let model = Model::<f32>::new(tiny_cfg(Masker::Mlm), 0).unwrap();
        let img = Tensor::from_fn(vec![16, 64], |i| ((i % 7) as f32) / 7.0);
        let rec = model.recognize_image(&img).unwrap();
        assert_eq!(rec.logits.shape(), &[6, 37]);
        assert_eq!(rec.att.shape(), &[2 * 8, 6]);
        assert!(rec.text.len() <= 5);
    }

    #[test]
    fn inference_partition_excludes_mask_module() {
        let model = Model::<f32>::new(tiny_cfg(Masker::Mlm), 1).unwrap();
        check_inference_partition(&model).unwrap();
        for name in model.inference_param_names().unwrap() {
            assert!(!name.starts_with("mlm."));
        }
    }

    #[test]
    fn masker_none_has_no_mlm_params() {
        let model = Model::<f32>::new(tiny_cfg(Masker::None), 1).unwrap();
        assert!(model.ids.mlm.is_none());
        assert_eq!(model.params.element_count(Some(ParamGroup::Mlm)), 0);
    }

    #[test]
    fn same_config_same_seed_same_inference_count() {
        let a = Model::<f32>::new(tiny_cfg(Masker::Mlm), 2).unwrap();
        let b = Model::<f32>::new(tiny_cfg(Masker::None), 2).unwrap();
        assert_eq!(a.inference_param_count().unwrap(), b.inference_param_count().unwrap());
        assert_eq!(
            b.inference_param_count().unwrap(),
            b.params.element_count(None),
            "vision-only model is exactly its inference graph"
        );
    }

    #[test]
    fn config_validation_catches_mismatches() {
        let mut cfg = tiny_cfg(Masker::Mlm);
        cfg.c = 24; // backbone still outputs 16
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_cfg(Masker::Mlm);
        cfg.n_heads = 3;
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_cfg(Masker::Mlm);
        cfg.image_h = 17;
        assert!(cfg.validate().is_err());

        // Too few spatial positions for the decode steps.
        let mut cfg = tiny_cfg(Masker::Mlm);
        cfg.n_max = 200;
        assert!(cfg.validate().is_err());
    }
}
