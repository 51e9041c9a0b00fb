//! Training: per-sample end-to-end graphs, the two-stage schedule, batch
//! composition, the optimizer loop, metrics and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod schedule;

use crate::error::{Result, VlanError};
use crate::model::mlm::{baseline_cutout_mask, baseline_dropout_mask};
use crate::model::{attention, Masker, Model};
use crate::params::{ParamId, ModelParams};
use crate::render::{render_word, RenderConfig};
use crate::rng::{mix, Rng};
use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor};
use crate::threads;
use crate::vocab::{encode_text, make_mlm_labels, sample_char_index, Vocabulary};
use adam::Adam;
use rayon::prelude::*;
use schedule::{compose_batch, lf_la_stage, Stage};
use std::io::Write;
use std::path::Path;

/// Fixed accumulation chunk: gradients are reduced in this many samples at a
/// time, in index order, so results do not depend on worker count.
const ACCUM_CHUNK: usize = 8;

const RENDER_TAG: u64 = 0x7472_6e64;
const P_TAG: u64 = 0x7472_6970;
const FLAG_TAG: u64 = 0x7472_666c;
const EPOCH_TAG: u64 = 0x7472_6570;
const MASK_TAG: u64 = 0x7472_6d6b;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f32,
    pub lambda2: f32,
    /// Occluded:clean sample ratio per language-aware batch.
    pub ratio: (u32, u32),
    /// Fraction of total steps spent in the language-free stage.
    pub lf_fraction: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub total_steps: usize,
    pub seed: u64,
    /// When set, the recognition loss averages all decode steps (EOS padding
    /// included) instead of the supervised prefix.
    pub fixed_n_loss: bool,
    /// Cutout/dropout baseline masker knobs.
    pub cutout_fraction: f64,
    pub dropout_p: f64,
    /// Save a checkpoint every this many steps (0 = final only).
    pub save_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 0.5,
            lambda2: 0.5,
            ratio: (1, 1),
            lf_fraction: 0.5,
            batch_size: 32,
            lr: 1e-4,
            total_steps: 4000,
            seed: 0,
            fixed_n_loss: false,
            cutout_fraction: 0.1,
            dropout_p: 0.1,
            save_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(VlanError::Config("loss weights must be non-negative".into()));
        }
        if !(self.lf_fraction > 0.0 && self.lf_fraction < 1.0) {
            return Err(VlanError::Config(format!(
                "lf_fraction {} outside (0, 1)",
                self.lf_fraction
            )));
        }
        if self.ratio == (0, 0) {
            return Err(VlanError::Config("occlusion ratio 0:0 is invalid".into()));
        }
        if self.batch_size == 0 || self.total_steps == 0 {
            return Err(VlanError::Config("batch size and total steps must be positive".into()));
        }
        if self.lr <= 0.0 {
            return Err(VlanError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Everything needed to build one sample's graph.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub word: String,
    pub render_seed: u64,
    /// 1-based index of the character the mask module must localize.
    pub p: usize,
    /// Whether this sample's features are occluded before recognition.
    pub occlude: bool,
    /// Seed for baseline (cutout/dropout) masks.
    pub mask_seed: u64,
}

#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub step: usize,
    pub stage: Stage,
    pub l: f32,
    pub l_rec: f32,
    pub l_mas: f32,
    pub l_rem: f32,
    pub grad_norm: f64,
    pub lr: f64,
}

impl StepMetrics {
    pub fn csv_header() -> &'static str {
        "step,stage,L,L_rec,L_mas,L_rem,grad_norm,lr"
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.stage.as_str(),
            self.l,
            self.l_rec,
            self.l_mas,
            self.l_rem,
            self.grad_norm,
            self.lr
        )
    }
}

struct SamplePass<S: Scalar> {
    l_total: S,
    l_rec: S,
    l_mas: S,
    l_rem: S,
    grads: Vec<(ParamId, Tensor<S>)>,
}

/// Builds one sample's full graph (mask module branches + recognizer) and
/// runs the backward pass.
fn sample_pass<S: Scalar>(
    model: &Model<S>,
    cfg: &TrainConfig,
    render_cfg: &RenderConfig,
    stage: Stage,
    spec: &SampleSpec,
    compute_grads: bool,
) -> Result<SamplePass<S>> {
    let vocab = Vocabulary::new();
    let n_max = model.cfg.n_max;
    let sample = render_word(&spec.word, render_cfg, spec.render_seed)?;
    let image = sample.image.cast::<S>();
    let (h, w) = model.cfg.feature_dims();

    let mut tape = Tape::new(&model.params);
    let x = tape.constant(image.reshaped(vec![1, model.cfg.image_h, model.cfg.image_w])?);
    let fm = model.ids.backbone.forward(&mut tape, x)?;
    let flat = tape.chw_to_hwc(fm)?;
    let pe = tape.constant(model.spatial_pe.clone());

    // Mask-module supervision runs in both stages; only occlusion is gated.
    // In the default decoupled mode the mask module reads a detached copy of
    // the features, so branch losses shape only its own parameters.
    let mut branch_losses: Option<(Var, Var)> = None;
    let mut learned_mask: Option<Var> = None;
    if model.cfg.masker == Masker::Mlm {
        let mlm = model.ids.mlm.as_ref().expect("mlm masker has mlm params");
        let mlm_in = if model.cfg.mlm_coupled {
            flat
        } else {
            let frozen = tape.value(flat).clone();
            tape.constant(frozen)
        };
        let mask = mlm.predict_mask_t(&mut tape, mlm_in, pe, spec.p)?;
        let (mas_labels, rem_labels) = make_mlm_labels(&spec.word, spec.p, &vocab, n_max)?;

        let branch = |tape: &mut Tape<'_, S>, v_in: Var, labels: &crate::vocab::EncodedText| -> Result<Var> {
            let x = tape.add(v_in, pe)?;
            let x = mlm.branch_unit.forward(tape, x)?;
            let out = attention::pp_forward(tape, x, &mlm.branch_pp)?;
            let supervised = if cfg.fixed_n_loss { n_max } else { labels.supervised_len };
            tape.seq_cross_entropy(out.logits, &labels.labels, supervised)
        };

        let v_mas = tape.mul_col(mlm_in, mask)?;
        let neg = tape.scale(mask, -S::ONE);
        let inv_mask = tape.add_scalar(neg, S::ONE);
        let v_rem = tape.mul_col(mlm_in, inv_mask)?;
        let l_mas = branch(&mut tape, v_mas, &mas_labels)?;
        let l_rem = branch(&mut tape, v_rem, &rem_labels)?;
        branch_losses = Some((l_mas, l_rem));
        learned_mask = Some(mask);
    }

    // Recognizer input: occluded in the language-aware stage for flagged
    // samples, the raw features otherwise.
    let v_m = if spec.occlude && stage == Stage::La {
        let mask_var = match model.cfg.masker {
            Masker::Mlm => {
                let mask = learned_mask.expect("mask built above");
                if model.cfg.mask_detached {
                    let frozen = tape.value(mask).clone();
                    tape.constant(frozen)
                } else {
                    mask
                }
            }
            Masker::Cutout => {
                let m = baseline_cutout_mask::<S>(h, w, cfg.cutout_fraction, spec.mask_seed)?;
                tape.constant(m.reshaped(vec![h * w, 1])?)
            }
            Masker::Dropout => {
                let m = baseline_dropout_mask::<S>(h, w, cfg.dropout_p, spec.mask_seed)?;
                tape.constant(m.reshaped(vec![h * w, 1])?)
            }
            Masker::None => unreachable!("no occlusion flags without a masker"),
        };
        let neg = tape.scale(mask_var, -S::ONE);
        let keep = tape.add_scalar(neg, S::ONE);
        tape.mul_col(flat, keep)?
    } else {
        flat
    };

    let reasoned = model.ids.vrm.vsr_forward_t(&mut tape, v_m, pe)?;
    let out = attention::pp_forward(&mut tape, reasoned, &model.ids.vrm.pp)?;
    let enc = encode_text(&spec.word, &vocab, n_max)?;
    let supervised = if cfg.fixed_n_loss { n_max } else { enc.supervised_len };
    let l_rec = tape.seq_cross_entropy(out.logits, &enc.labels, supervised)?;

    let total = match branch_losses {
        Some((l_mas, l_rem)) => tape.weighted_sum(&[
            (l_rec, S::ONE),
            (l_mas, S::from_f64(cfg.lambda1 as f64)),
            (l_rem, S::from_f64(cfg.lambda2 as f64)),
        ])?,
        None => tape.weighted_sum(&[(l_rec, S::ONE)])?,
    };

    let grads = if compute_grads { tape.backward(total)? } else { Vec::new() };
    let (l_mas_v, l_rem_v) = match branch_losses {
        Some((m, r)) => (tape.value(m).item()?, tape.value(r).item()?),
        None => (S::ZERO, S::ZERO),
    };
    Ok(SamplePass {
        l_total: tape.value(total).item()?,
        l_rec: tape.value(l_rec).item()?,
        l_mas: l_mas_v,
        l_rem: l_rem_v,
        grads,
    })
}

/// One optimizer step over a composed batch. Gradients are averaged over the
/// batch in fixed chunk order, so the result is bit-identical for any worker
/// count.
pub fn train_step(
    model: &mut Model<f32>,
    optimizer: &mut Adam<f32>,
    cfg: &TrainConfig,
    render_cfg: &RenderConfig,
    batch: &[SampleSpec],
    step: usize,
) -> Result<StepMetrics> {
    let stage = lf_la_stage(step, cfg.total_steps, cfg.lf_fraction);
    model.params.zero_grads();

    let inv_batch = 1.0f32 / batch.len() as f32;
    let (mut l, mut l_rec, mut l_mas, mut l_rem) = (0f32, 0f32, 0f32, 0f32);

    for chunk in batch.chunks(ACCUM_CHUNK) {
        let passes: Vec<Result<SamplePass<f32>>> = threads::pool().install(|| {
            chunk
                .par_iter()
                .map(|spec| sample_pass(&*model, cfg, render_cfg, stage, spec, true))
                .collect()
        });
        for (spec, pass) in chunk.iter().zip(passes) {
            let pass = pass?;
            if !pass.l_total.is_finite() {
                return Err(VlanError::Numeric(format!(
                    "non-finite loss at step {step}: word '{}' render_seed {} p {} \
                     (L={} L_rec={} L_mas={} L_rem={})",
                    spec.word, spec.render_seed, spec.p, pass.l_total, pass.l_rec, pass.l_mas, pass.l_rem
                )));
            }
            l += pass.l_total * inv_batch;
            l_rec += pass.l_rec * inv_batch;
            l_mas += pass.l_mas * inv_batch;
            l_rem += pass.l_rem * inv_batch;
            for (id, grad) in &pass.grads {
                model.params.accumulate_grad(*id, grad, inv_batch);
            }
        }
    }

    let grad_norm = model.params.grad_norm();
    if !grad_norm.is_finite() {
        return Err(VlanError::Numeric(format!("non-finite gradient norm at step {step}")));
    }
    optimizer.step(&mut model.params);

    Ok(StepMetrics { step, stage, l, l_rec, l_mas, l_rem, grad_norm, lr: optimizer.lr() })
}

/// Deterministic batch composition for a step: per-epoch word permutation,
/// per-epoch render seeds and character indices, per-step occlusion flags.
pub fn compose_step_batch(
    words: &[String],
    cfg: &TrainConfig,
    masker: Masker,
    step: usize,
    perm_cache: &mut (usize, Vec<usize>),
) -> Result<Vec<SampleSpec>> {
    let n_words = words.len();
    if n_words == 0 {
        return Err(VlanError::Config("empty training corpus".into()));
    }
    let stage = lf_la_stage(step, cfg.total_steps, cfg.lf_fraction);
    let flags = if masker == Masker::None {
        vec![false; cfg.batch_size]
    } else {
        compose_batch(cfg.batch_size, cfg.ratio, stage, mix(&[cfg.seed, FLAG_TAG, step as u64]))?
    };

    let mut batch = Vec::with_capacity(cfg.batch_size);
    for (i, &occlude) in flags.iter().enumerate() {
        let global = step * cfg.batch_size + i;
        let epoch = global / n_words;
        let pos = global % n_words;
        if perm_cache.1.len() != n_words || perm_cache.0 != epoch {
            let mut perm: Vec<usize> = (0..n_words).collect();
            let mut rng = Rng::new(mix(&[cfg.seed, EPOCH_TAG, epoch as u64]));
            rng.shuffle(&mut perm);
            *perm_cache = (epoch, perm);
        }
        let widx = perm_cache.1[pos];
        let word = &words[widx];
        let p = sample_char_index(
            word.chars().count(),
            mix(&[cfg.seed, P_TAG, epoch as u64, widx as u64]),
        )?;
        batch.push(SampleSpec {
            word: word.clone(),
            render_seed: mix(&[cfg.seed, RENDER_TAG, epoch as u64, widx as u64]),
            p,
            occlude,
            mask_seed: mix(&[cfg.seed, MASK_TAG, step as u64, i as u64]),
        });
    }
    Ok(batch)
}

/// Full training run. Writes a metrics CSV and periodic checkpoints when an
/// output directory is given; returns the metrics history.
pub fn run_training(
    model: &mut Model<f32>,
    cfg: &TrainConfig,
    render_cfg: &RenderConfig,
    words: &[String],
    out_dir: Option<&Path>,
    config_snapshot: &str,
    quiet: bool,
) -> Result<Vec<StepMetrics>> {
    cfg.validate()?;
    let mut optimizer = Adam::new(&model.params, cfg.lr);
    let mut history = Vec::with_capacity(cfg.total_steps);
    let mut perm_cache = (usize::MAX, Vec::new());

    let mut metrics_file = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::File::create(dir.join("metrics.csv"))?;
            writeln!(f, "{}", StepMetrics::csv_header())?;
            Some(f)
        }
        None => None,
    };

    for step in 0..cfg.total_steps {
        let batch = compose_step_batch(words, cfg, model.cfg.masker, step, &mut perm_cache)?;
        let metrics = match train_step(model, &mut optimizer, cfg, render_cfg, &batch, step) {
            Ok(m) => m,
            Err(e) => {
                if let Some(dir) = out_dir {
                    let dump = dir.join(format!("diagnostic_step{step}.txt"));
                    let _ = std::fs::write(&dump, format!("{e}\n"));
                }
                return Err(e);
            }
        };
        if let Some(f) = metrics_file.as_mut() {
            writeln!(f, "{}", metrics.csv_line())?;
        }
        if !quiet && (step % 50 == 0 || step + 1 == cfg.total_steps) {
            eprintln!(
                "step {:>6} [{}] L={:.4} rec={:.4} mas={:.4} rem={:.4} |g|={:.3e}",
                metrics.step,
                metrics.stage.as_str(),
                metrics.l,
                metrics.l_rec,
                metrics.l_mas,
                metrics.l_rem,
                metrics.grad_norm
            );
        }
        history.push(metrics);

        if let Some(dir) = out_dir {
            let save_now = cfg.save_every > 0 && (step + 1) % cfg.save_every == 0;
            if save_now || step + 1 == cfg.total_steps {
                checkpoint::save(
                    &dir.join(format!("ckpt_{:06}.vlan", step + 1)),
                    &model.params,
                    (step + 1) as u64,
                    [cfg.seed, (step + 1) as u64],
                    config_snapshot,
                )?;
            }
        }
    }
    Ok(history)
}

/// Loss closure over a full single-sample objective, for gradient checks.
pub fn full_loss_fn<'m, S: Scalar>(
    model: &'m Model<S>,
    cfg: &TrainConfig,
    render_cfg: &RenderConfig,
    spec: &SampleSpec,
    stage: Stage,
) -> impl Fn(&ModelParams<S>) -> Result<(S, Vec<(ParamId, Tensor<S>)>)> + 'm {
    let cfg = cfg.clone();
    let render_cfg = render_cfg.clone();
    let spec = spec.clone();
    move |params: &ModelParams<S>| {
        // Rebuild a model view that borrows the perturbed parameters.
        let shadow = Model {
            cfg: model.cfg.clone(),
            ids: model.ids.clone(),
            params: params.clone(),
            spatial_pe: model.spatial_pe.clone(),
        };
        let pass = sample_pass(&shadow, &cfg, &render_cfg, stage, &spec, true)?;
        Ok((pass.l_total, pass.grads))
    }
}
