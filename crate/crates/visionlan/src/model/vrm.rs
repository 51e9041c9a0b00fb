//! Visual reasoning module: the entire test-time model downstream of the
//! backbone. A stack of transformer units reasons over the (possibly
//! occluded) feature map, then the parallel prediction layer decodes every
//! character step at once.

use crate::error::{Result, VlanError};
use crate::model::attention::{pp_forward, PpIds, TransformerUnitIds};
use crate::params::{ModelParams, ParamId};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor};
use crate::vocab::{decode_labels, Vocabulary};

#[derive(Debug, Clone)]
pub struct VrmIds {
    pub vsr: Vec<TransformerUnitIds>,
    pub pp: PpIds,
}

impl VrmIds {
    pub fn register<S: Scalar>(
        params: &mut ModelParams<S>,
        c: usize,
        n_heads: usize,
        depth: usize,
        n_max: usize,
        n_classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(VlanError::Config("reasoning stack depth must be at least 1".into()));
        }
        let vsr = (0..depth)
            .map(|i| TransformerUnitIds::register(params, &format!("vrm.vsr.{i}"), c, n_heads, rng))
            .collect::<Result<_>>()?;
        Ok(VrmIds { vsr, pp: PpIds::register(params, "vrm.pp", c, c, n_max, n_classes, rng)? })
    }

    /// Flattened features plus spatial codes through the full stack.
    pub fn vsr_forward_t<S: Scalar>(
        &self,
        tape: &mut Tape<'_, S>,
        v_flat: Var,
        spatial_pe: Var,
    ) -> Result<Var> {
        let mut x = tape.add(v_flat, spatial_pe)?;
        for unit in &self.vsr {
            x = unit.forward(tape, x)?;
        }
        Ok(x)
    }
}

/// Feature occlusion: with a mask, V_m = V * (1 - mask) broadcast over
/// channels; with none (the inference path), V_m is V itself.
pub fn occlude_features<S: Scalar>(v: &Tensor<S>, mask: Option<&Tensor<S>>) -> Result<Tensor<S>> {
    match mask {
        None => Ok(v.clone()),
        Some(mask) => {
            let (rows, cols) = v.dims2()?;
            if mask.numel() != rows {
                return Err(VlanError::Shape(format!(
                    "mask has {} positions, features have {rows}",
                    mask.numel()
                )));
            }
            let mut out = v.clone();
            for (i, &m) in mask.data().iter().enumerate() {
                let keep = S::ONE - m;
                for x in out.data_mut()[i * cols..(i + 1) * cols].iter_mut() {
                    *x *= keep;
                }
            }
            Ok(out)
        }
    }
}

/// Outputs of one recognition pass.
#[derive(Debug, Clone)]
pub struct Recognition<S: Scalar> {
    /// Attention over spatial positions, one column per decode step.
    pub att: Tensor<S>,
    /// Per-step class scores (n_max x classes).
    pub logits: Tensor<S>,
    /// Greedy decode truncated at the first end-of-sequence class.
    pub text: String,
}

/// Runs the reasoning stack and parallel decoder on occluded features
/// `[hw, c]` (one sample).
pub fn recognize<S: Scalar>(
    v_m: &Tensor<S>,
    vrm: &VrmIds,
    spatial_pe: &Tensor<S>,
    params: &ModelParams<S>,
) -> Result<Recognition<S>> {
    let mut tape = Tape::new(params);
    let v = tape.constant(v_m.clone());
    let pe = tape.constant(spatial_pe.clone());
    let reasoned = vrm.vsr_forward_t(&mut tape, v, pe)?;
    let out = pp_forward(&mut tape, reasoned, &vrm.pp)?;
    let att_t = tape.transpose(out.att_steps)?;
    let logits = tape.value(out.logits).clone();
    let text = greedy_decode(&logits)?;
    Ok(Recognition { att: tape.value(att_t).clone(), logits, text })
}

/// Argmax per step, truncated at the first EOS.
pub fn greedy_decode<S: Scalar>(logits: &Tensor<S>) -> Result<String> {
    let (n, k) = logits.dims2()?;
    let vocab = Vocabulary::new();
    let mut labels = Vec::with_capacity(n);
    for t in 0..n {
        let row = &logits.data()[t * k..(t + 1) * k];
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        labels.push(best);
    }
    decode_labels(&labels, &vocab)
}

/// Parameters touched by a recognition pass (basis of the zero-extra-params
/// accounting).
pub fn inference_param_ids<S: Scalar>(
    vrm: &VrmIds,
    spatial_pe: &Tensor<S>,
    params: &ModelParams<S>,
    c: usize,
) -> Result<Vec<ParamId>> {
    let hw = spatial_pe.shape()[0];
    let dummy = Tensor::zeros(vec![hw, c]);
    let mut tape = Tape::new(params);
    let v = tape.constant(dummy);
    let pe = tape.constant(spatial_pe.clone());
    let reasoned = vrm.vsr_forward_t(&mut tape, v, pe)?;
    let _ = pp_forward(&mut tape, reasoned, &vrm.pp)?;
    Ok(tape.touched_params())
}
