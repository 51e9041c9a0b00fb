//! Run configuration: line-oriented `key = value` text with dotted keys and
//! `#` comments. Unknown keys are rejected. Every run writes its resolved
//! snapshot next to its outputs so results can be reproduced from the
//! snapshot alone.

use crate::error::{Result, VlanError};
use crate::model::backbone::{BackboneConfig, StageConfig};
use crate::model::{Masker, ModelConfig};
use crate::render::RenderConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // Model dims.
    pub model_c: usize,
    pub model_heads: usize,
    pub model_depth: usize,
    pub model_n: usize,
    pub model_masker: Masker,
    pub model_mask_detached: bool,
    pub model_mlm_coupled: bool,
    // Backbone stages.
    pub backbone_widths: Vec<usize>,
    pub backbone_strides: Vec<usize>,
    pub backbone_blocks: Vec<usize>,
    // Rendering.
    pub render_height: usize,
    pub render_width: usize,
    pub render_max_len: usize,
    pub render_jitter: usize,
    pub render_noise: f64,
    pub render_curve: f64,
    // Corpus.
    pub data_corpus_size: usize,
    pub data_max_word_len: usize,
    pub data_train_frac: f64,
    pub data_seed: u64,
    // Training.
    pub train_lambda1: f32,
    pub train_lambda2: f32,
    pub train_ratio: (u32, u32),
    pub train_lf_fraction: f64,
    pub train_batch_size: usize,
    pub train_lr: f64,
    pub train_total_steps: usize,
    pub train_seed: u64,
    pub train_fixed_n_loss: bool,
    pub train_cutout_fraction: f64,
    pub train_dropout_p: f64,
    pub train_save_every: usize,
    // Evaluation.
    pub eval_n_words: usize,
    pub eval_seed: u64,
    pub eval_latency_warmup: usize,
    pub eval_latency_reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_c: 128,
            model_heads: 4,
            model_depth: 3,
            model_n: 12,
            model_masker: Masker::Mlm,
            model_mask_detached: false,
            model_mlm_coupled: false,
            backbone_widths: vec![32, 64, 128],
            backbone_strides: vec![2, 2, 2],
            backbone_blocks: vec![2, 2, 2],
            render_height: 32,
            render_width: 128,
            render_max_len: 12,
            render_jitter: 1,
            render_noise: 0.03,
            render_curve: 1.5,
            data_corpus_size: 2000,
            data_max_word_len: 10,
            data_train_frac: 0.9,
            data_seed: 0,
            train_lambda1: 0.5,
            train_lambda2: 0.5,
            train_ratio: (1, 1),
            train_lf_fraction: 0.5,
            train_batch_size: 32,
            train_lr: 1e-4,
            train_total_steps: 4000,
            train_seed: 0,
            train_fixed_n_loss: false,
            train_cutout_fraction: 0.1,
            train_dropout_p: 0.1,
            train_save_every: 0,
            eval_n_words: 0,
            eval_seed: 123,
            eval_latency_warmup: 20,
            eval_latency_reps: 200,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        VlanError::Config(format!("line {line}: key '{key}' has malformed value '{value}'"))
    })
}

fn parse_bool(key: &str, line: usize, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(VlanError::Config(format!(
            "line {line}: key '{key}' expects a boolean, got '{value}'"
        ))),
    }
}

fn parse_ratio(key: &str, line: usize, value: &str) -> Result<(u32, u32)> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 2 {
        return Err(VlanError::Config(format!(
            "line {line}: key '{key}' expects 'a:b', got '{value}'"
        )));
    }
    Ok((parse_num(key, line, parts[0].trim())?, parse_num(key, line, parts[1].trim())?))
}

fn parse_csv(key: &str, line: usize, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| parse_num(key, line, s.trim()))
        .collect()
}

impl RunConfig {
    /// Parses a config text over the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(VlanError::Config(format!(
                    "line {line_no}: expected 'key = value', got '{raw}'"
                )));
            };
            self.apply(key.trim(), value.trim(), line_no)?;
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "model.c" => self.model_c = parse_num(key, line, value)?,
            "model.heads" => self.model_heads = parse_num(key, line, value)?,
            "model.depth" => self.model_depth = parse_num(key, line, value)?,
            "model.n" => self.model_n = parse_num(key, line, value)?,
            "model.masker" => {
                self.model_masker = Masker::parse(value)
                    .map_err(|e| VlanError::Config(format!("line {line}: {e}")))?;
            }
            "model.mask_detached" => self.model_mask_detached = parse_bool(key, line, value)?,
            "model.mlm_coupled" => self.model_mlm_coupled = parse_bool(key, line, value)?,
            "backbone.widths" => self.backbone_widths = parse_csv(key, line, value)?,
            "backbone.strides" => self.backbone_strides = parse_csv(key, line, value)?,
            "backbone.blocks" => self.backbone_blocks = parse_csv(key, line, value)?,
            "render.height" => self.render_height = parse_num(key, line, value)?,
            "render.width" => self.render_width = parse_num(key, line, value)?,
            "render.max_len" => self.render_max_len = parse_num(key, line, value)?,
            "render.jitter" => self.render_jitter = parse_num(key, line, value)?,
            "render.noise" => self.render_noise = parse_num(key, line, value)?,
            "render.curve" => self.render_curve = parse_num(key, line, value)?,
            "data.corpus_size" => self.data_corpus_size = parse_num(key, line, value)?,
            "data.max_word_len" => self.data_max_word_len = parse_num(key, line, value)?,
            "data.train_frac" => self.data_train_frac = parse_num(key, line, value)?,
            "data.seed" => self.data_seed = parse_num(key, line, value)?,
            "train.lambda1" => self.train_lambda1 = parse_num(key, line, value)?,
            "train.lambda2" => self.train_lambda2 = parse_num(key, line, value)?,
            "train.ratio" => self.train_ratio = parse_ratio(key, line, value)?,
            "train.lf_fraction" => self.train_lf_fraction = parse_num(key, line, value)?,
            "train.batch_size" => self.train_batch_size = parse_num(key, line, value)?,
            "train.lr" => self.train_lr = parse_num(key, line, value)?,
            "train.total_steps" => self.train_total_steps = parse_num(key, line, value)?,
            "train.seed" => self.train_seed = parse_num(key, line, value)?,
            "train.fixed_n_loss" => self.train_fixed_n_loss = parse_bool(key, line, value)?,
            "train.cutout_fraction" => self.train_cutout_fraction = parse_num(key, line, value)?,
            "train.dropout_p" => self.train_dropout_p = parse_num(key, line, value)?,
            "train.save_every" => self.train_save_every = parse_num(key, line, value)?,
            "eval.n_words" => self.eval_n_words = parse_num(key, line, value)?,
            "eval.seed" => self.eval_seed = parse_num(key, line, value)?,
            "eval.latency_warmup" => self.eval_latency_warmup = parse_num(key, line, value)?,
            "eval.latency_reps" => self.eval_latency_reps = parse_num(key, line, value)?,
            other => {
                return Err(VlanError::Config(format!("line {line}: unknown key '{other}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_lambda1 < 0.0 || self.train_lambda2 < 0.0 {
            return Err(VlanError::Config("train.lambda1/lambda2 must be non-negative".into()));
        }
        if self.backbone_widths.len() != self.backbone_strides.len()
            || self.backbone_widths.len() != self.backbone_blocks.len()
        {
            return Err(VlanError::Config(
                "backbone.widths, backbone.strides and backbone.blocks must have equal length".into(),
            ));
        }
        if self.data_max_word_len + 1 > self.model_n {
            return Err(VlanError::Config(format!(
                "data.max_word_len {} needs model.n of at least {} (word plus end symbol)",
                self.data_max_word_len,
                self.data_max_word_len + 1
            )));
        }
        if self.data_max_word_len > self.render_max_len {
            return Err(VlanError::Config(format!(
                "data.max_word_len {} exceeds render.max_len {}",
                self.data_max_word_len, self.render_max_len
            )));
        }
        self.model_config()?.validate()?;
        self.train_config().validate()?;
        self.render_config().validate()?;
        Ok(())
    }

    pub fn backbone_config(&self) -> BackboneConfig {
        BackboneConfig {
            stages: self
                .backbone_widths
                .iter()
                .zip(&self.backbone_strides)
                .zip(&self.backbone_blocks)
                .map(|((&width, &stride), &blocks)| StageConfig {
                    width,
                    stride: (stride, stride),
                    blocks,
                })
                .collect(),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig {
            c: self.model_c,
            n_heads: self.model_heads,
            vsr_depth: self.model_depth,
            n_max: self.model_n,
            image_h: self.render_height,
            image_w: self.render_width,
            backbone: self.backbone_config(),
            masker: self.model_masker,
            mask_detached: self.model_mask_detached,
            mlm_coupled: self.model_mlm_coupled,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda1: self.train_lambda1,
            lambda2: self.train_lambda2,
            ratio: self.train_ratio,
            lf_fraction: self.train_lf_fraction,
            batch_size: self.train_batch_size,
            lr: self.train_lr,
            total_steps: self.train_total_steps,
            seed: self.train_seed,
            fixed_n_loss: self.train_fixed_n_loss,
            cutout_fraction: self.train_cutout_fraction,
            dropout_p: self.train_dropout_p,
            save_every: self.train_save_every,
        }
    }

    pub fn render_config(&self) -> RenderConfig {
        RenderConfig {
            height: self.render_height,
            width: self.render_width,
            max_len: self.render_max_len,
            jitter: self.render_jitter,
            noise: self.render_noise,
            curve: self.render_curve,
        }
    }

    /// Canonical resolved snapshot; parsing it back reproduces this config.
    pub fn snapshot(&self) -> String {
        let csv = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "model.c = {}\nmodel.heads = {}\nmodel.depth = {}\nmodel.n = {}\n\
             model.masker = {}\nmodel.mask_detached = {}\nmodel.mlm_coupled = {}\n\
             backbone.widths = {}\nbackbone.strides = {}\nbackbone.blocks = {}\n\
             render.height = {}\nrender.width = {}\nrender.max_len = {}\n\
             render.jitter = {}\nrender.noise = {}\nrender.curve = {}\n\
             data.corpus_size = {}\ndata.max_word_len = {}\ndata.train_frac = {}\ndata.seed = {}\n\
             train.lambda1 = {}\ntrain.lambda2 = {}\ntrain.ratio = {}:{}\ntrain.lf_fraction = {}\n\
             train.batch_size = {}\ntrain.lr = {}\ntrain.total_steps = {}\ntrain.seed = {}\n\
             train.fixed_n_loss = {}\ntrain.cutout_fraction = {}\ntrain.dropout_p = {}\n\
             train.save_every = {}\n\
             eval.n_words = {}\neval.seed = {}\neval.latency_warmup = {}\neval.latency_reps = {}\n",
            self.model_c,
            self.model_heads,
            self.model_depth,
            self.model_n,
            self.model_masker.as_str(),
            self.model_mask_detached,
            self.model_mlm_coupled,
            csv(&self.backbone_widths),
            csv(&self.backbone_strides),
            csv(&self.backbone_blocks),
            self.render_height,
            self.render_width,
            self.render_max_len,
            self.render_jitter,
            self.render_noise,
            self.render_curve,
            self.data_corpus_size,
            self.data_max_word_len,
            self.data_train_frac,
            self.data_seed,
            self.train_lambda1,
            self.train_lambda2,
            self.train_ratio.0,
            self.train_ratio.1,
            self.train_lf_fraction,
            self.train_batch_size,
            self.train_lr,
            self.train_total_steps,
            self.train_seed,
            self.train_fixed_n_loss,
            self.train_cutout_fraction,
            self.train_dropout_p,
            self.train_save_every,
            self.eval_n_words,
            self.eval_seed,
            self.eval_latency_warmup,
            self.eval_latency_reps,
        )
    }
}
