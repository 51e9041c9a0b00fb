//! Recognition losses.

use crate::error::{Result, VlanError};
use crate::tensor::{Scalar, Tensor};
use crate::vocab::VOCAB_SIZE;

/// Mean cross-entropy over the supervised prefix of a step sequence:
/// -(1/supervised_len) * sum_t log softmax(logits[t])[labels[t]].
pub fn sequence_loss<S: Scalar>(
    logits: &Tensor<S>,
    labels: &[usize],
    supervised_len: usize,
) -> Result<S> {
    let (n, k) = logits.dims2()?;
    if supervised_len < 1 || supervised_len > n || labels.len() < supervised_len {
        return Err(VlanError::Shape(format!(
            "supervised_len {supervised_len} invalid for {n} steps / {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels[..supervised_len].iter().find(|&&l| l >= k) {
        return Err(VlanError::Vocab(format!("label {bad} out of {k} classes")));
    }
    let mut acc = S::ZERO;
    for t in 0..supervised_len {
        let row = &logits.data()[t * k..(t + 1) * k];
        let mut max = row[0];
        for &v in &row[1..] {
            if v > max {
                max = v;
            }
        }
        let mut sum = S::ZERO;
        for &v in row {
            sum += (v - max).exp();
        }
        acc += sum.ln() + max - row[labels[t]];
    }
    Ok(acc / S::from_f64(supervised_len as f64))
}

/// Weighted objective: L_rec + lambda1 * L_mas + lambda2 * L_rem.
pub fn total_loss<S: Scalar>(l_rec: S, l_mas: S, l_rem: S, lambda1: S, lambda2: S) -> S {
    l_rec + lambda1 * l_mas + lambda2 * l_rem
}

/// Logits whose softmax assigns exactly the given probability to `gold`
/// (remaining mass spread uniformly). Test helper for frozen loss values.
pub fn logits_with_gold_prob<S: Scalar>(gold: usize, p: f64) -> Tensor<S> {
    let rest = (1.0 - p) / (VOCAB_SIZE - 1) as f64;
    Tensor::from_fn(vec![1, VOCAB_SIZE], |j| {
        S::from_f64(if j == gold { p.ln() } else { rest.ln() })
    })
}
