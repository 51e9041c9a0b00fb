//! Central-difference verification of analytic gradients.

use crate::error::{Result, VlanError};
use crate::params::{ModelParams, ParamId};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// A differentiable scalar objective: returns the loss and the gradient of
/// every parameter it touched.
pub trait LossFn<S: Scalar> {
    fn eval(&self, params: &ModelParams<S>) -> Result<(S, Vec<(ParamId, Tensor<S>)>)>;
}

impl<S: Scalar, F> LossFn<S> for F
where
    F: Fn(&ModelParams<S>) -> Result<(S, Vec<(ParamId, Tensor<S>)>)>,
{
    fn eval(&self, params: &ModelParams<S>) -> Result<(S, Vec<(ParamId, Tensor<S>)>)> {
        self(params)
    }
}

/// Compares analytic gradients against central differences on `sample`
/// seeded-uniform coordinates per parameter and returns the maximum
/// relative error |analytic - cd| / max(|analytic|, |cd|, 1e-8).
///
/// The objective must be deterministic; two evaluations that disagree
/// bit-for-bit are reported as a contract error.
pub fn gradient_check<S: Scalar>(
    loss_fn: &dyn LossFn<S>,
    params: &mut ModelParams<S>,
    eps: f64,
    sample: usize,
    seed: u64,
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(VlanError::Config(format!("gradient_check eps must be positive, got {eps}")));
    }
    if sample == 0 {
        return Err(VlanError::Config("gradient_check sample count must be positive".into()));
    }

    let (loss_a, grads) = loss_fn.eval(params)?;
    let (loss_b, _) = loss_fn.eval(params)?;
    if loss_a.to_f64().to_bits() != loss_b.to_f64().to_bits() {
        return Err(VlanError::Contract(format!(
            "loss_fn is not deterministic: {} vs {}",
            loss_a.to_f64(),
            loss_b.to_f64()
        )));
    }

    let mut rng = Rng::new(seed);
    let mut max_rel = 0.0f64;
    for (id, grad) in &grads {
        let numel = grad.numel();
        for _ in 0..sample.min(numel) {
            let coord = rng.below(numel);
            let orig = params.value(*id).data()[coord];
            params.value_mut(*id).data_mut()[coord] = orig + S::from_f64(eps);
            let plus = loss_fn.eval(params)?.0.to_f64();
            params.value_mut(*id).data_mut()[coord] = orig - S::from_f64(eps);
            let minus = loss_fn.eval(params)?.0.to_f64();
            params.value_mut(*id).data_mut()[coord] = orig;
            let cd = (plus - minus) / (2.0 * eps);
            let analytic = grad.data()[coord].to_f64();
            let rel = (analytic - cd).abs() / analytic.abs().max(cd.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
