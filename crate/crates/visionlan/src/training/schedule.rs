//! Two-stage schedule and occluded-batch composition.
//!
//! The first (language-free) stage trains the recognizer on clean features;
//! the second (language-aware) stage occludes a ratio-controlled share of
//! each batch with the learned mask. Mask-module supervision is active in
//! both stages; only feature occlusion is stage-gated.

use crate::error::{Result, VlanError};
use crate::rng::{mix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Language-free: features pass through unoccluded.
    Lf,
    /// Language-aware: ratio-controlled occlusion.
    La,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Lf => "LF",
            Stage::La => "LA",
        }
    }
}

/// Stage for a step: the first `lf_fraction` of training is language-free,
/// the boundary step is the first language-aware step.
pub fn lf_la_stage(step: usize, total_steps: usize, lf_fraction: f64) -> Stage {
    if (step as f64) < lf_fraction * total_steps as f64 {
        Stage::Lf
    } else {
        Stage::La
    }
}

/// Per-sample occlusion flags for one batch. In the language-aware stage
/// exactly round(batch * a / (a + b)) samples are flagged for an a:b ratio,
/// at seeded-shuffled positions. The language-free stage flags none.
pub fn compose_batch(
    batch_size: usize,
    ratio: (u32, u32),
    stage: Stage,
    seed: u64,
) -> Result<Vec<bool>> {
    if batch_size == 0 {
        return Err(VlanError::Config("batch size must be positive".into()));
    }
    let (a, b) = ratio;
    if a == 0 && b == 0 {
        return Err(VlanError::Config("occlusion ratio 0:0 is invalid".into()));
    }
    let mut flags = vec![false; batch_size];
    if stage == Stage::Lf {
        return Ok(flags);
    }
    let n_occluded = ((batch_size as f64) * a as f64 / (a + b) as f64).round() as usize;
    for f in flags.iter_mut().take(n_occluded) {
        *f = true;
    }
    let mut rng = Rng::new(mix(&[seed, 0x666c_6167]));
    rng.shuffle(&mut flags);
    Ok(flags)
}
