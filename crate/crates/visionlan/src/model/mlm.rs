//! Masked language-aware module (training-time only).
//!
//! Predicts a soft spatial map over the feature grid that localizes the
//! character at a given 1-based index, trained through two weight-shared
//! branches: one supervised on the occluded character, one on the remaining
//! string. The complementary split V = V_mas + V_rem shapes the map using
//! only word-level labels.

use crate::error::{Result, VlanError};
use crate::model::attention::{PpIds, TransformerUnitIds};
use crate::params::{init_uniform, ModelParams, ParamId};
use crate::rng::{mix, Rng};
use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct MlmIds {
    pub enhance: TransformerUnitIds,
    /// Learned embedding of the character index, one row per step.
    pub index_embed: ParamId,
    pub head_w: ParamId,
    pub head_b: ParamId,
    /// Transformer + prediction layer shared by both branches.
    pub branch_unit: TransformerUnitIds,
    pub branch_pp: PpIds,
    pub n_max: usize,
}

impl MlmIds {
    pub fn register<S: Scalar>(
        params: &mut ModelParams<S>,
        c: usize,
        n_heads: usize,
        n_max: usize,
        n_classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(MlmIds {
            enhance: TransformerUnitIds::register(params, "mlm.enhance", c, n_heads, rng)?,
            index_embed: params.register("mlm.index_embed", init_uniform(rng, vec![n_max, c], c))?,
            head_w: params.register("mlm.head.w", init_uniform(rng, vec![c, 1], c))?,
            head_b: params.register("mlm.head.b", Tensor::zeros(vec![1]))?,
            branch_unit: TransformerUnitIds::register(params, "mlm.branch.unit", c, n_heads, rng)?,
            branch_pp: PpIds::register(params, "mlm.branch.pp", c, c, n_max, n_classes, rng)?,
            n_max,
        })
    }

    /// Tape forward of the mask head: enhanced features plus a broadcast
    /// index embedding, squeezed through a sigmoid. Returns an
    /// (positions x 1) map in (0, 1).
    pub fn predict_mask_t<S: Scalar>(
        &self,
        tape: &mut Tape<'_, S>,
        v_flat: Var,
        spatial_pe: Var,
        p: usize,
    ) -> Result<Var> {
        if p < 1 || p > self.n_max {
            return Err(VlanError::Index(format!(
                "character index {p} out of [1, {}]",
                self.n_max
            )));
        }
        let x = tape.add(v_flat, spatial_pe)?;
        let x = self.enhance.forward(tape, x)?;
        let embed_table = tape.param(self.index_embed);
        let embed = tape.gather_row(embed_table, p - 1)?;
        let x = tape.add_row(x, embed)?;
        let head_w = tape.param(self.head_w);
        let head_b = tape.param(self.head_b);
        let logits = tape.matmul(x, head_w)?;
        let logits = tape.add_row(logits, head_b)?;
        Ok(tape.sigmoid(logits))
    }
}

/// Concrete-tensor mask prediction: features `[h, w, c]` and a 1-based
/// character index to an `[h, w]` map in (0, 1).
pub fn predict_mask<S: Scalar>(
    v: &Tensor<S>,
    p: usize,
    mlm: &MlmIds,
    spatial_pe: &Tensor<S>,
    params: &ModelParams<S>,
) -> Result<Tensor<S>> {
    let [h, w, c] = match v.shape() {
        [a, b, d] => [*a, *b, *d],
        other => return Err(VlanError::Shape(format!("expected [h, w, c] features, got {other:?}"))),
    };
    let flat = v.clone().reshaped(vec![h * w, c])?;
    let mut tape = Tape::new(params);
    let vv = tape.constant(flat);
    let pe = tape.constant(spatial_pe.clone());
    let mask = mlm.predict_mask_t(&mut tape, vv, pe, p)?;
    tape.value(mask).clone().reshaped(vec![h, w])
}

/// Complementary split: V_mas = V * mask, V_rem = V * (1 - mask), with the
/// mask broadcast over channels. The identity V_mas + V_rem == V holds
/// exactly up to rounding.
pub fn wcl_split<S: Scalar>(v: &Tensor<S>, mask: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
    let (rows, cols) = v.dims2()?;
    if mask.numel() != rows {
        return Err(VlanError::Shape(format!(
            "mask has {} positions, features have {rows}",
            mask.numel()
        )));
    }
    let mut v_mas = v.clone();
    let mut v_rem = v.clone();
    for (i, &m) in mask.data().iter().enumerate() {
        for j in 0..cols {
            v_mas.data_mut()[i * cols + j] = v.data()[i * cols + j] * m;
            v_rem.data_mut()[i * cols + j] = v.data()[i * cols + j] * (S::ONE - m);
        }
    }
    Ok((v_mas, v_rem))
}

/// Binary rectangle mask covering ~`patch_fraction` of the grid.
pub fn baseline_cutout_mask<S: Scalar>(
    h: usize,
    w: usize,
    patch_fraction: f64,
    seed: u64,
) -> Result<Tensor<S>> {
    if !(0.0..1.0).contains(&patch_fraction) || patch_fraction <= 0.0 {
        return Err(VlanError::Config(format!(
            "cutout fraction {patch_fraction} outside (0, 1)"
        )));
    }
    let target = patch_fraction * (h * w) as f64;
    let mut rng = Rng::new(mix(&[seed, 0x6375_746f]));
    let max_rh = (target.sqrt().ceil() as usize).clamp(1, h);
    let rh = 1 + rng.below(max_rh);
    let rw = ((target / rh as f64).round() as usize).clamp(1, w);
    let y0 = rng.below(h - rh + 1);
    let x0 = rng.below(w - rw + 1);
    let mut mask = Tensor::zeros(vec![h, w]);
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            mask.data_mut()[y * w + x] = S::ONE;
        }
    }
    Ok(mask)
}

/// Independent Bernoulli(p) binary mask per grid cell.
pub fn baseline_dropout_mask<S: Scalar>(h: usize, w: usize, p: f64, seed: u64) -> Result<Tensor<S>> {
    if !(0.0..1.0).contains(&p) {
        return Err(VlanError::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    let mut rng = Rng::new(mix(&[seed, 0x6472_6f70]));
    let mut mask = Tensor::zeros(vec![h, w]);
    for v in mask.data_mut() {
        if rng.next_f64() < p {
            *v = S::ONE;
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::posenc::positional_encoding;

    fn fixture(c: usize, n_max: usize, seed: u64) -> (ModelParams<f64>, MlmIds) {
        let mut params = ModelParams::new();
        let mut rng = Rng::new(seed);
        let mlm = MlmIds::register(&mut params, c, 2, n_max, 5, &mut rng).unwrap();
        (params, mlm)
    }

    #[test]
    fn mask_values_strictly_inside_unit_interval() {
        let (params, mlm) = fixture(8, 4, 1);
        let pe = positional_encoding::<f64>(6, 8).unwrap();
        let v = Tensor::from_fn(vec![2, 3, 8], |i| ((i * 3) as f64 * 0.21).sin() * 2.0);
        for p in 1..=4 {
            let mask = predict_mask(&v, p, &mlm, &pe, &params).unwrap();
            assert_eq!(mask.shape(), &[2, 3]);
            for &m in mask.data() {
                assert!(m > 0.0 && m < 1.0);
            }
        }
    }

    #[test]
    fn different_indices_give_different_masks() {
        let (params, mlm) = fixture(8, 4, 2);
        let pe = positional_encoding::<f64>(6, 8).unwrap();
        let v = Tensor::from_fn(vec![2, 3, 8], |i| ((i * 5) as f64 * 0.17).cos());
        let m1 = predict_mask(&v, 1, &mlm, &pe, &params).unwrap();
        let m2 = predict_mask(&v, 3, &mlm, &pe, &params).unwrap();
        let l1: f64 = m1
            .data()
            .iter()
            .zip(m2.data().iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 > 0.0, "index embedding should differentiate masks");
    }

    #[test]
    fn index_out_of_range_is_error() {
        let (params, mlm) = fixture(8, 4, 3);
        let pe = positional_encoding::<f64>(6, 8).unwrap();
        let v = Tensor::zeros(vec![2, 3, 8]);
        assert!(matches!(predict_mask(&v, 0, &mlm, &pe, &params), Err(VlanError::Index(_))));
        assert!(matches!(predict_mask(&v, 5, &mlm, &pe, &params), Err(VlanError::Index(_))));
    }

    /// Scalar-loop oracle of the full mask head.
    pub(crate) fn oracle_predict_mask(
        v: &Tensor<f64>,
        p: usize,
        mlm: &MlmIds,
        spatial_pe: &Tensor<f64>,
        params: &ModelParams<f64>,
    ) -> Tensor<f64> {
        let [h, w, c] = match v.shape() {
            [a, b, d] => [*a, *b, *d],
            _ => unreachable!(),
        };
        let hw = h * w;
        let mut x = vec![0.0; hw * c];
        for i in 0..hw * c {
            x[i] = v.data()[i] + spatial_pe.data()[i];
        }
        let x = Tensor::new(vec![hw, c], x).unwrap();
        let enhanced =
            crate::model::attention::tests::oracle_transformer_unit(&x, &mlm.enhance, params);
        let embed = params.value(mlm.index_embed).row(p - 1);
        let head_w = params.value(mlm.head_w).data();
        let head_b = params.value(mlm.head_b).data()[0];
        let mut out = Tensor::zeros(vec![h, w]);
        for s in 0..hw {
            let mut acc = head_b;
            for k in 0..c {
                acc += (enhanced.data()[s * c + k] + embed[k]) * head_w[k];
            }
            out.data_mut()[s] = 1.0 / (1.0 + (-acc).exp());
        }
        out
    }

    #[test]
    fn mask_matches_scalar_oracle() {
        let (params, mlm) = fixture(8, 4, 4);
        let pe = positional_encoding::<f64>(4, 8).unwrap();
        let mut rng = Rng::new(60);
        let v = Tensor::from_fn(vec![2, 2, 8], |_| rng.uniform(-1.0, 1.0));
        let got = predict_mask(&v, 1, &mlm, &pe, &params).unwrap();
        let expect = oracle_predict_mask(&v, 1, &mlm, &pe, &params);
        assert!(crate::tensor::max_rel_err(&got, &expect, 1e-6) < 1e-10);
    }

    #[test]
    fn wcl_split_half_mask() {
        let v = Tensor::from_fn(vec![3, 4], |i| i as f64);
        let mask = Tensor::full(vec![3], 0.5);
        let (mas, rem) = wcl_split(&v, &mask).unwrap();
        for i in 0..12 {
            assert_eq!(mas.data()[i], v.data()[i] / 2.0);
            assert_eq!(rem.data()[i], v.data()[i] / 2.0);
        }
    }

    #[test]
    fn wcl_split_complementarity_property() {
        let mut rng = Rng::new(8);
        for _ in 0..100 {
            let rows = 1 + rng.below(6);
            let cols = 1 + rng.below(6);
            let v = Tensor::<f64>::from_fn(vec![rows, cols], |_| rng.uniform(-5.0, 5.0));
            let mask = Tensor::<f64>::from_fn(vec![rows], |_| rng.next_f64());
            let (mas, rem) = wcl_split(&v, &mask).unwrap();
            for i in 0..rows * cols {
                let sum = mas.data()[i] + rem.data()[i];
                let rel = (sum - v.data()[i]).abs() / v.data()[i].abs().max(1e-6);
                assert!(rel < 1e-6);
                // Elementwise against the scalar definition.
                assert_eq!(mas.data()[i], v.data()[i] * mask.data()[i / cols]);
            }
        }
    }

    #[test]
    fn cutout_covers_requested_fraction() {
        for seed in 0..50 {
            let mask = baseline_cutout_mask::<f64>(4, 16, 0.1, seed).unwrap();
            let ones: usize = mask.data().iter().filter(|&&v| v == 1.0).count();
            assert!((6..=7).contains(&ones), "seed {seed}: {ones} cells");
            // Binary values only.
            assert!(mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn cutout_tiny_fraction_sets_one_cell() {
        let mask = baseline_cutout_mask::<f64>(4, 16, 0.001, 3).unwrap();
        let ones: usize = mask.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 1);
    }

    #[test]
    fn cutout_deterministic_and_validated() {
        let a = baseline_cutout_mask::<f64>(4, 16, 0.1, 9).unwrap();
        let b = baseline_cutout_mask::<f64>(4, 16, 0.1, 9).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(baseline_cutout_mask::<f64>(4, 16, 0.0, 0).is_err());
        assert!(baseline_cutout_mask::<f64>(4, 16, 1.0, 0).is_err());
    }

    #[test]
    fn dropout_zero_probability_is_empty() {
        let mask = baseline_dropout_mask::<f64>(4, 16, 0.0, 1).unwrap();
        assert!(mask.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dropout_frequency_matches_probability() {
        let mask = baseline_dropout_mask::<f64>(250, 400, 0.1, 2).unwrap();
        let ones: usize = mask.data().iter().filter(|&&v| v == 1.0).count();
        let frac = ones as f64 / mask.numel() as f64;
        assert!((frac - 0.1).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn dropout_deterministic_and_validated() {
        let a = baseline_dropout_mask::<f64>(4, 16, 0.3, 5).unwrap();
        let b = baseline_dropout_mask::<f64>(4, 16, 0.3, 5).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(baseline_dropout_mask::<f64>(4, 16, 1.0, 0).is_err());
        assert!(baseline_dropout_mask::<f64>(4, 16, -0.1, 0).is_err());
    }
}
