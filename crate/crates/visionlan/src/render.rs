//! Deterministic synthetic word-image rendering.
//!
//! Words are drawn from the built-in 5x7 font into a fixed grid of
//! equal-width cells (width / max_len pixels each), left-aligned. Per-seed
//! distortions: per-character pixel jitter, a sinusoidal vertical curve and
//! additive Gaussian noise. Rendering is bit-deterministic for a given
//! (word, config, seed).

use crate::error::{Result, VlanError};
use crate::font::{glyph_pixel, GLYPH_H, GLYPH_W};
use crate::rng::{mix, Rng};
use crate::tensor::Tensor;
use crate::vocab::Vocabulary;

pub const BG_LEVEL: f32 = 0.1;
pub const FG_LEVEL: f32 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub height: usize,
    pub width: usize,
    /// Number of glyph cells across the image; also the longest word drawable.
    pub max_len: usize,
    /// Max per-character shift in pixels (both axes).
    pub jitter: usize,
    /// Standard deviation of additive Gaussian noise (0 disables).
    pub noise: f64,
    /// Amplitude in pixels of the sinusoidal vertical curve (0 disables).
    pub curve: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { height: 32, width: 128, max_len: 12, jitter: 1, noise: 0.03, curve: 1.5 }
    }
}

impl RenderConfig {
    /// Distortion-free variant used by layout tests and oracles.
    pub fn plain(height: usize, width: usize, max_len: usize) -> Self {
        RenderConfig { height, width, max_len, jitter: 0, noise: 0.0, curve: 0.0 }
    }

    pub fn cell_width(&self) -> usize {
        self.width / self.max_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 || self.cell_width() < GLYPH_W + 1 {
            return Err(VlanError::Layout(format!(
                "cells of {} px cannot hold {}-px glyphs (width {} / max_len {})",
                self.cell_width(),
                GLYPH_W,
                self.width,
                self.max_len
            )));
        }
        if self.height < GLYPH_H + 2 {
            return Err(VlanError::Layout(format!("height {} too small for glyphs", self.height)));
        }
        Ok(())
    }
}

/// Axis-aligned half-open pixel rectangle [x0, x1) x [y0, y1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharBox {
    pub x0: u16,
    pub y0: u16,
    pub x1: u16,
    pub y1: u16,
}

impl CharBox {
    pub fn width(&self) -> usize {
        (self.x1 - self.x0) as usize
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 as usize && x < self.x1 as usize && y >= self.y0 as usize && y < self.y1 as usize
    }

    pub fn contains_x(&self, x: f64) -> bool {
        x >= self.x0 as f64 && x < self.x1 as f64
    }
}

/// One rendered word: grayscale image in [0,1], label, character cells and
/// the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSample {
    pub text: String,
    pub image: Tensor<f32>,
    pub boxes: Vec<CharBox>,
    pub seed: u64,
}

/// Integer glyph scale factors for a configuration.
pub fn glyph_scale(cfg: &RenderConfig) -> (usize, usize) {
    let sx = ((cfg.cell_width() - 1) / GLYPH_W).max(1);
    let sy = ((cfg.height.saturating_sub(8)) / GLYPH_H).max(1);
    (sx, sy)
}

pub fn render_word(word: &str, cfg: &RenderConfig, seed: u64) -> Result<WordSample> {
    cfg.validate()?;
    let vocab = Vocabulary::new();
    let chars: Vec<usize> = word.chars().map(|c| vocab.index_of(c)).collect::<Result<_>>()?;
    if chars.is_empty() || chars.len() > cfg.max_len {
        return Err(VlanError::Layout(format!(
            "word '{word}' ({} chars) does not fit {} cells",
            chars.len(),
            cfg.max_len
        )));
    }

    let (h, w) = (cfg.height, cfg.width);
    let cell_w = cfg.cell_width();
    let (sx, sy) = glyph_scale(cfg);
    let glyph_w = GLYPH_W * sx;
    let glyph_h = GLYPH_H * sy;

    let mut rng = Rng::new(mix(&[seed, 0x7265_6e64]));
    let phase = rng.uniform(0.0, std::f64::consts::TAU);

    let mut pixels = vec![BG_LEVEL; h * w];
    let mut boxes = Vec::with_capacity(chars.len());

    for (i, &glyph) in chars.iter().enumerate() {
        let cell_x = i * cell_w;
        // Jitter is consumed from the stream even when zero-range so the
        // stream layout does not depend on the config.
        let jx = rng.uniform(-(cfg.jitter as f64), cfg.jitter as f64 + 1e-9).floor() as i64;
        let jy = rng.uniform(-(cfg.jitter as f64), cfg.jitter as f64 + 1e-9).floor() as i64;
        let (jx, jy) = if cfg.jitter == 0 { (0, 0) } else { (jx, jy) };

        let center_x = cell_x as f64 + cell_w as f64 / 2.0;
        let curve_dy = if cfg.curve > 0.0 {
            (cfg.curve * (std::f64::consts::TAU * center_x / w as f64 + phase).sin()).round() as i64
        } else {
            0
        };

        let base_x = cell_x as i64 + ((cell_w - glyph_w) / 2) as i64;
        let base_y = ((h - glyph_h) / 2) as i64;
        let ox = (base_x + jx).clamp(cell_x as i64, (cell_x + cell_w - glyph_w) as i64) as usize;
        let oy = (base_y + jy + curve_dy).clamp(0, (h - glyph_h) as i64) as usize;

        for row in 0..GLYPH_H {
            for col in 0..GLYPH_W {
                if !glyph_pixel(glyph, row, col) {
                    continue;
                }
                for dy in 0..sy {
                    let y = oy + row * sy + dy;
                    let base = y * w + ox + col * sx;
                    pixels[base..base + sx].iter_mut().for_each(|p| *p = FG_LEVEL);
                }
            }
        }

        // The box is the character's cell horizontally and the glyph's
        // (jittered) vertical extent plus a 1 px margin.
        let y0 = oy.saturating_sub(1);
        let y1 = (oy + glyph_h + 1).min(h);
        boxes.push(CharBox {
            x0: cell_x as u16,
            y0: y0 as u16,
            x1: (cell_x + cell_w) as u16,
            y1: y1 as u16,
        });
    }

    if cfg.noise > 0.0 {
        for p in pixels.iter_mut() {
            *p = (*p + (cfg.noise * rng.gaussian()) as f32).clamp(0.0, 1.0);
        }
    }

    Ok(WordSample {
        text: word.to_string(),
        image: Tensor::new(vec![h, w], pixels)?,
        boxes,
        seed,
    })
}
