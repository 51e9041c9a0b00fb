//! Shared attention building blocks: the transformer unit used by both the
//! mask module and the reasoning stack, and the parallel prediction layer
//! that decodes all character steps at once.

use crate::error::{Result, VlanError};
use crate::ops::kernels;
use crate::params::{init_uniform, ModelParams, ParamId};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct HeadIds {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
}

/// Pre-norm transformer unit: x + MHSA(LN(x)), then + FFN(LN(.)).
#[derive(Debug, Clone)]
pub struct TransformerUnitIds {
    heads: Vec<HeadIds>,
    head_dim: usize,
    out_w: ParamId,
    out_b: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    ffn_w1: ParamId,
    ffn_b1: ParamId,
    ffn_w2: ParamId,
    ffn_b2: ParamId,
}

impl TransformerUnitIds {
    pub fn register<S: Scalar>(
        params: &mut ModelParams<S>,
        prefix: &str,
        c: usize,
        n_heads: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n_heads == 0 || c % n_heads != 0 {
            return Err(VlanError::Config(format!(
                "model width {c} not divisible by {n_heads} heads"
            )));
        }
        let dh = c / n_heads;
        let mut heads = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            heads.push(HeadIds {
                wq: params.register(&format!("{prefix}.attn.h{h}.wq"), init_uniform(rng, vec![c, dh], c))?,
                wk: params.register(&format!("{prefix}.attn.h{h}.wk"), init_uniform(rng, vec![c, dh], c))?,
                wv: params.register(&format!("{prefix}.attn.h{h}.wv"), init_uniform(rng, vec![c, dh], c))?,
            });
        }
        let hidden = 4 * c;
        Ok(TransformerUnitIds {
            heads,
            head_dim: dh,
            out_w: params.register(&format!("{prefix}.attn.out.w"), init_uniform(rng, vec![c, c], c))?,
            out_b: params.register(&format!("{prefix}.attn.out.b"), Tensor::zeros(vec![c]))?,
            ln1_g: params.register(&format!("{prefix}.ln1.g"), Tensor::full(vec![c], S::ONE))?,
            ln1_b: params.register(&format!("{prefix}.ln1.b"), Tensor::zeros(vec![c]))?,
            ln2_g: params.register(&format!("{prefix}.ln2.g"), Tensor::full(vec![c], S::ONE))?,
            ln2_b: params.register(&format!("{prefix}.ln2.b"), Tensor::zeros(vec![c]))?,
            ffn_w1: params.register(&format!("{prefix}.ffn.w1"), init_uniform(rng, vec![c, hidden], c))?,
            ffn_b1: params.register(&format!("{prefix}.ffn.b1"), Tensor::zeros(vec![hidden]))?,
            ffn_w2: params.register(&format!("{prefix}.ffn.w2"), init_uniform(rng, vec![hidden, c], hidden))?,
            ffn_b2: params.register(&format!("{prefix}.ffn.b2"), Tensor::zeros(vec![c]))?,
        })
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<'_, S>, x: Var) -> Result<Var> {
        let scale = S::from_f64(1.0 / (self.head_dim as f64).sqrt());

        let ln1_g = tape.param(self.ln1_g);
        let ln1_b = tape.param(self.ln1_b);
        let normed = tape.layer_norm(x, ln1_g, ln1_b, LN_EPS)?;

        let mut head_outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let wq = tape.param(head.wq);
            let wk = tape.param(head.wk);
            let wv = tape.param(head.wv);
            let q = tape.matmul(normed, wq)?;
            let k = tape.matmul(normed, wk)?;
            let v = tape.matmul(normed, wv)?;
            let scores = tape.matmul_bt(q, k)?;
            let scores = tape.scale(scores, scale);
            let attn = tape.row_softmax(scores)?;
            head_outs.push(tape.matmul(attn, v)?);
        }
        let merged = tape.concat_cols(&head_outs)?;
        let out_w = tape.param(self.out_w);
        let out_b = tape.param(self.out_b);
        let proj = tape.matmul(merged, out_w)?;
        let proj = tape.add_row(proj, out_b)?;
        let x_mid = tape.add(x, proj)?;

        let ln2_g = tape.param(self.ln2_g);
        let ln2_b = tape.param(self.ln2_b);
        let normed2 = tape.layer_norm(x_mid, ln2_g, ln2_b, LN_EPS)?;
        let w1 = tape.param(self.ffn_w1);
        let b1 = tape.param(self.ffn_b1);
        let w2 = tape.param(self.ffn_w2);
        let b2 = tape.param(self.ffn_b2);
        let h = tape.matmul(normed2, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.relu(h);
        let h = tape.matmul(h, w2)?;
        let h = tape.add_row(h, b2)?;
        tape.add(x_mid, h)
    }
}

/// Standalone forward for one transformer unit on a concrete tensor.
pub fn transformer_unit_forward<S: Scalar>(
    x: &Tensor<S>,
    unit: &TransformerUnitIds,
    params: &ModelParams<S>,
) -> Result<Tensor<S>> {
    let mut tape = Tape::new(params);
    let xv = tape.constant(x.clone());
    let out = unit.forward(&mut tape, xv)?;
    Ok(tape.value(out).clone())
}

/// Parallel prediction layer: per-step additive attention over the spatial
/// positions with fixed character-order codes as queries, then a linear
/// classifier on each attended glimpse.
#[derive(Debug, Clone)]
pub struct PpIds {
    pub w1: ParamId,
    pub w2: ParamId,
    pub w3: ParamId,
    pub w_cls: ParamId,
    pub b_cls: ParamId,
    /// Fixed character-order codes, one row per step.
    pub order_codes: Tensor<f64>,
    pub n_steps: usize,
}

impl PpIds {
    pub fn register<S: Scalar>(
        params: &mut ModelParams<S>,
        prefix: &str,
        c: usize,
        d: usize,
        n_steps: usize,
        n_classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        // The score head gets a 4x gain: with plain fan-in scale the initial
        // per-step score spread is so small that attention starts near
        // uniform over all positions and takes long to differentiate.
        let mut w1 = init_uniform::<S>(rng, vec![d, 1], d);
        w1.data_mut().iter_mut().for_each(|v| *v *= S::from_f64(4.0));
        Ok(PpIds {
            w1: params.register(&format!("{prefix}.w1"), w1)?,
            w2: params.register(&format!("{prefix}.w2"), init_uniform(rng, vec![c, d], c))?,
            w3: params.register(&format!("{prefix}.w3"), init_uniform(rng, vec![c, d], c))?,
            w_cls: params.register(&format!("{prefix}.wcls"), init_uniform(rng, vec![c, n_classes], c))?,
            b_cls: params.register(&format!("{prefix}.bcls"), Tensor::zeros(vec![n_classes]))?,
            order_codes: super::posenc::positional_encoding::<f64>(n_steps, c)?,
            n_steps,
        })
    }
}

/// Tape outputs of the parallel prediction layer.
pub struct PpOut {
    /// Softmax-normalized attention, one row per step (steps x positions).
    pub att_steps: Var,
    /// Per-step attended feature vectors (steps x c).
    pub glimpses: Var,
    /// Per-step class scores (steps x classes).
    pub logits: Var,
}

pub fn pp_forward<S: Scalar>(tape: &mut Tape<'_, S>, v_in: Var, pp: &PpIds) -> Result<PpOut> {
    let oc = tape.constant(pp.order_codes.cast::<S>());
    let w2 = tape.param(pp.w2);
    let w3 = tape.param(pp.w3);
    let w1 = tape.param(pp.w1);
    let queries = tape.matmul(oc, w2)?;
    let keys = tape.matmul(v_in, w3)?;
    let scores = tape.attn_scores(keys, queries, w1)?;
    let att_steps = tape.row_softmax(scores)?;
    let glimpses = tape.matmul(att_steps, v_in)?;
    let w_cls = tape.param(pp.w_cls);
    let b_cls = tape.param(pp.b_cls);
    let logits = tape.matmul(glimpses, w_cls)?;
    let logits = tape.add_row(logits, b_cls)?;
    Ok(PpOut { att_steps, glimpses, logits })
}

/// Concrete-tensor wrapper around [`pp_forward`]. Returns the attention map
/// in positions-by-steps orientation, the glimpses and the logits.
pub fn parallel_predict<S: Scalar>(
    v_in: &Tensor<S>,
    pp: &PpIds,
    params: &ModelParams<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let (_, c) = v_in.dims2()?;
    if c != pp.order_codes.shape()[1] {
        return Err(VlanError::Config(format!(
            "feature width {c} does not match prediction layer width {}",
            pp.order_codes.shape()[1]
        )));
    }
    let mut tape = Tape::new(params);
    let v = tape.constant(v_in.clone());
    let out = pp_forward(&mut tape, v, pp)?;
    let att_t = tape.transpose(out.att_steps)?;
    Ok((
        tape.value(att_t).clone(),
        tape.value(out.glimpses).clone(),
        tape.value(out.logits).clone(),
    ))
}

/// Glimpse extraction alone: p_t = sum_s att[s, t] * v_in[s].
pub fn glimpses_from_attention<S: Scalar>(att: &Tensor<S>, v_in: &Tensor<S>) -> Result<Tensor<S>> {
    let (hw, n) = att.dims2()?;
    let (hw2, c) = v_in.dims2()?;
    if hw != hw2 {
        return Err(VlanError::Shape(format!(
            "attention rows {hw} do not match feature rows {hw2}"
        )));
    }
    let mut out = Tensor::zeros(vec![n, c]);
    // att^T @ v_in with att stored positions-by-steps.
    kernels::matmul_at_acc(att.data(), v_in.data(), out.data_mut(), n, hw, c, S::ONE);
    Ok(out)
}
