//! Occlusion protocol for evaluation images: one character per word is
//! covered by one (weak) or two (heavy) straight line strokes confined to
//! that character's box. Stroke intensity contrasts with the box mean.
//!
//! The protocol leaves line thickness and orientation open; this
//! implementation uses thickness 2-4 px and orientations within 60 degrees
//! of vertical (heavy strokes are parallel and kept disjoint).

use crate::error::{Result, VlanError};
use crate::render::WordSample;
use crate::rng::{mix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionDegree {
    /// One line.
    Weak,
    /// Two lines.
    Heavy,
}

impl OcclusionDegree {
    pub fn line_count(self) -> usize {
        match self {
            OcclusionDegree::Weak => 1,
            OcclusionDegree::Heavy => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OcclusionSpec {
    pub degree: OcclusionDegree,
    /// 1-based index of the character to occlude.
    pub target_char: usize,
    /// Stroke thickness in pixels (2..=4).
    pub thickness: usize,
    pub seed: u64,
}

impl OcclusionSpec {
    pub fn new(degree: OcclusionDegree, target_char: usize, seed: u64) -> Self {
        let mut rng = Rng::new(mix(&[seed, 0x7468_6963]));
        OcclusionSpec { degree, target_char, thickness: 2 + rng.below(3), seed }
    }
}

const MAX_TILT_DEG: f64 = 60.0;

/// Returns a copy of `sample` with the target character struck through.
/// Pixels outside the target character's box are untouched and the label is
/// unchanged.
pub fn occlude_ost(sample: &WordSample, spec: &OcclusionSpec) -> Result<WordSample> {
    let n_chars = sample.text.chars().count();
    if spec.target_char < 1 || spec.target_char > n_chars {
        return Err(VlanError::Index(format!(
            "target character {} out of [1, {n_chars}]",
            spec.target_char
        )));
    }
    if !(2..=4).contains(&spec.thickness) {
        return Err(VlanError::Config(format!("line thickness {} outside [2, 4]", spec.thickness)));
    }
    let bx = sample.boxes[spec.target_char - 1];
    let (x0, y0, x1, y1) = (bx.x0 as i64, bx.y0 as i64, bx.x1 as i64, bx.y1 as i64);
    let (bw, bh) = (x1 - x0, y1 - y0);
    if bw < 4 || bh < 2 {
        return Err(VlanError::Layout(format!("target box {bx:?} too small to occlude")));
    }

    let mut out = sample.clone();
    let w = out.image.shape()[1];

    // Contrast against the mean intensity inside the box.
    let mut mean = 0.0f64;
    for y in y0..y1 {
        for x in x0..x1 {
            mean += out.image.data()[y as usize * w + x as usize] as f64;
        }
    }
    mean /= (bw * bh) as f64;
    let line_level: f32 = if mean > 0.5 { 0.0 } else { 1.0 };

    let mut rng = Rng::new(mix(&[spec.seed, 0x6f63_636c]));
    let n_lines = spec.degree.line_count();

    // One shared tilt keeps heavy strokes parallel. `span` is the horizontal
    // width of a stroke; both strokes share the same quantized per-row offset
    // so their column gap is exact, and the gap is sized against the largest
    // per-row shift so the strokes stay 8-disconnected.
    let mut tilt = rng.uniform(-MAX_TILT_DEG, MAX_TILT_DEG).to_radians();
    let mut span = spec.thickness as i64;
    if n_lines == 2 {
        loop {
            let shift = tilt.tan().abs().ceil() as i64;
            let gap = bw - 2 - 2 * span;
            if gap >= shift + 1 {
                break;
            }
            if span > 2 {
                span -= 1;
            } else if tilt.abs() > 0.02 {
                tilt *= 0.5;
            } else {
                return Err(VlanError::Layout(format!(
                    "box {bw} px too narrow for two disjoint strokes"
                )));
            }
        }
    }
    span = span.max(1).min(bw - 2);
    let slope = tilt.tan();
    let y_mid = (y0 + y1) as f64 / 2.0;

    let anchors: Vec<i64> = if n_lines == 1 {
        let lo = x0 + 1;
        let hi = x1 - 1 - span;
        let a = if hi > lo { lo + rng.below((hi - lo) as usize) as i64 } else { (x0 + x1) / 2 };
        vec![a]
    } else {
        vec![x0 + 1, x1 - 1 - span]
    };

    for y in y0..y1 {
        let offset = (slope * (y as f64 + 0.5 - y_mid)).round() as i64;
        for &anchor in &anchors {
            let lo = (anchor + offset).max(x0);
            let hi = (anchor + offset + span).min(x1);
            for x in lo..hi {
                out.image.data_mut()[y as usize * w + x as usize] = line_level;
            }
        }
    }

    Ok(out)
}
