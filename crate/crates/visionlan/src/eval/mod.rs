//! Evaluation and benchmarking: word accuracy, occlusion-robustness splits,
//! extra-parameter accounting, latency measurement and mask localization
//! scoring.

use crate::error::{Result, VlanError};
use crate::model::Model;
use crate::occlude::{occlude_ost, OcclusionDegree, OcclusionSpec};
use crate::render::{render_word, RenderConfig, WordSample};
use crate::rng::{mix, Rng};
use crate::tensor::Tensor;
use crate::threads;
use crate::vocab::sample_char_index;
use rayon::prelude::*;
use std::time::Instant;

/// Case-insensitive exact-match word accuracy.
pub fn word_accuracy(preds: &[String], gts: &[String]) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(VlanError::Length(format!(
            "{} predictions vs {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    let hits = preds
        .iter()
        .zip(gts.iter())
        .filter(|(p, g)| p.to_lowercase() == g.to_lowercase())
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Extra parameters a test-time model introduces over a baseline:
/// inference-reachable element count minus the baseline's total.
pub fn count_eips(test_model: &Model<f32>, baseline: &Model<f32>) -> Result<i64> {
    let test = test_model.inference_param_count()? as i64;
    let base = baseline.params.element_count(None) as i64;
    Ok(test - base)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

/// Wall-clock per single-image forward, strictly serial, warmup excluded.
pub fn bench_latency(
    model: &Model<f32>,
    inputs: &[Tensor<f32>],
    warmup: usize,
    reps: usize,
) -> Result<LatencyStats> {
    if reps < 1 {
        return Err(VlanError::Config("latency reps must be at least 1".into()));
    }
    if inputs.is_empty() {
        return Err(VlanError::Config("latency bench needs at least one input".into()));
    }
    for i in 0..warmup {
        let _ = model.recognize_image(&inputs[i % inputs.len()])?;
    }
    let mut times = Vec::with_capacity(reps);
    for i in 0..reps {
        let input = &inputs[i % inputs.len()];
        let t0 = Instant::now();
        let _ = model.recognize_image(input)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let pct = |q: f64| times[((times.len() as f64 - 1.0) * q).round() as usize];
    Ok(LatencyStats { mean_ms: mean, p50_ms: pct(0.50), p95_ms: pct(0.95) })
}

/// Column-energy localization check: the mask's strongest column, mapped back
/// to pixels through the feature stride, must fall inside the target
/// character's box.
pub fn mask_localization_score(
    mask: &Tensor<f32>,
    sample: &WordSample,
    p: usize,
    feature_stride: usize,
) -> Result<bool> {
    let n_chars = sample.text.chars().count();
    if p < 1 || p > n_chars {
        return Err(VlanError::Index(format!("character index {p} out of [1, {n_chars}]")));
    }
    let (h, w) = mask.dims2()?;
    let mut best_col = 0usize;
    let mut best_energy = f64::NEG_INFINITY;
    for x in 0..w {
        let energy: f64 = (0..h).map(|y| mask.data()[y * w + x] as f64).sum();
        if energy > best_energy {
            best_energy = energy;
            best_col = x;
        }
    }
    let pixel_x = best_col as f64 * feature_stride as f64 + feature_stride as f64 / 2.0;
    Ok(sample.boxes[p - 1].contains_x(pixel_x))
}

/// One held-out word rendered clean plus its weak/heavy occluded variants.
#[derive(Debug, Clone)]
pub struct EvalTriplet {
    pub clean: WordSample,
    pub weak: WordSample,
    pub heavy: WordSample,
}

/// Renders the occlusion-robustness evaluation set: every test word clean,
/// weakly occluded (one line through one uniformly drawn character) and
/// heavily occluded (two lines).
pub fn build_eval_set(
    words: &[String],
    render_cfg: &RenderConfig,
    seed: u64,
) -> Result<Vec<EvalTriplet>> {
    words
        .iter()
        .enumerate()
        .map(|(i, word)| {
            let s = mix(&[seed, 0x6576_616c, i as u64]);
            let clean = render_word(word, render_cfg, s)?;
            let p = sample_char_index(word.chars().count(), mix(&[s, 1]))?;
            let weak = occlude_ost(&clean, &OcclusionSpec::new(OcclusionDegree::Weak, p, mix(&[s, 2])))?;
            let heavy = occlude_ost(&clean, &OcclusionSpec::new(OcclusionDegree::Heavy, p, mix(&[s, 3])))?;
            Ok(EvalTriplet { clean, weak, heavy })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub dataset_id: String,
    pub n_samples: usize,
    /// Accuracy over all degrees pooled.
    pub word_accuracy: f64,
    pub clean_accuracy: f64,
    pub weak_accuracy: f64,
    pub heavy_accuracy: f64,
    pub latency: Option<LatencyStats>,
    pub eip_count: Option<i64>,
}

impl EvalReport {
    pub fn occluded_accuracy(&self) -> f64 {
        (self.weak_accuracy + self.heavy_accuracy) / 2.0
    }

    pub fn csv_header() -> &'static str {
        "dataset,n,accuracy,clean,weak,heavy,occluded,latency_mean_ms,latency_p50_ms,latency_p95_ms,eip"
    }

    pub fn csv_line(&self) -> String {
        let (lm, l50, l95) = match &self.latency {
            Some(l) => (format!("{:.3}", l.mean_ms), format!("{:.3}", l.p50_ms), format!("{:.3}", l.p95_ms)),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{},{}",
            self.dataset_id,
            self.n_samples,
            self.word_accuracy,
            self.clean_accuracy,
            self.weak_accuracy,
            self.heavy_accuracy,
            self.occluded_accuracy(),
            lm,
            l50,
            l95,
            if let Some(e) = self.eip_count { e.to_string() } else { String::new() },
        )
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "dataset {}: {} words\n  accuracy {:.2}% (clean {:.2}%, weak {:.2}%, heavy {:.2}%, occluded avg {:.2}%)\n",
            self.dataset_id,
            self.n_samples,
            100.0 * self.word_accuracy,
            100.0 * self.clean_accuracy,
            100.0 * self.weak_accuracy,
            100.0 * self.heavy_accuracy,
            100.0 * self.occluded_accuracy(),
        );
        if let Some(l) = &self.latency {
            s.push_str(&format!(
                "  latency mean {:.2} ms, p50 {:.2} ms, p95 {:.2} ms (single image, serial)\n",
                l.mean_ms, l.p50_ms, l.p95_ms
            ));
        }
        if let Some(e) = self.eip_count {
            s.push_str(&format!("  extra inference parameters vs baseline: {e}\n"));
        }
        s
    }
}

/// Recognizes a batch of images in parallel; order is preserved. The model
/// only ever sees pixels.
pub fn recognize_batch(model: &Model<f32>, samples: &[&WordSample]) -> Result<Vec<String>> {
    threads::pool().install(|| {
        samples
            .par_iter()
            .map(|s| Ok(model.recognize_image(&s.image)?.text))
            .collect()
    })
}

/// Accuracy per degree over a rendered evaluation set.
pub fn evaluate(model: &Model<f32>, set: &[EvalTriplet], dataset_id: &str) -> Result<EvalReport> {
    let gts: Vec<String> = set.iter().map(|t| t.clean.text.clone()).collect();
    let clean: Vec<&WordSample> = set.iter().map(|t| &t.clean).collect();
    let weak: Vec<&WordSample> = set.iter().map(|t| &t.weak).collect();
    let heavy: Vec<&WordSample> = set.iter().map(|t| &t.heavy).collect();

    let clean_preds = recognize_batch(model, &clean)?;
    let weak_preds = recognize_batch(model, &weak)?;
    let heavy_preds = recognize_batch(model, &heavy)?;

    let clean_acc = word_accuracy(&clean_preds, &gts)?;
    let weak_acc = word_accuracy(&weak_preds, &gts)?;
    let heavy_acc = word_accuracy(&heavy_preds, &gts)?;
    Ok(EvalReport {
        dataset_id: dataset_id.to_string(),
        n_samples: set.len(),
        word_accuracy: (clean_acc + weak_acc + heavy_acc) / 3.0,
        clean_accuracy: clean_acc,
        weak_accuracy: weak_acc,
        heavy_accuracy: heavy_acc,
        latency: None,
        eip_count: None,
    })
}

/// Measured chance level for the localization score: a uniformly random
/// column passed through the same hit rule, on the same samples.
pub fn localization_chance_baseline(
    samples: &[(WordSample, usize)],
    feature_w: usize,
    feature_stride: usize,
    seed: u64,
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut rng = Rng::new(mix(&[seed, 0x6368_6e63]));
    let mut hits = 0usize;
    for (sample, p) in samples {
        let col = rng.below(feature_w);
        let pixel_x = col as f64 * feature_stride as f64 + feature_stride as f64 / 2.0;
        if sample.boxes[p - 1].contains_x(pixel_x) {
            hits += 1;
        }
    }
    hits as f64 / samples.len() as f64
}
