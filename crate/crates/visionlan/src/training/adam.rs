//! Adam optimizer with constant learning rate.

use crate::params::ModelParams;
use crate::tensor::{Scalar, Tensor};

pub struct Adam<S: Scalar> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(params: &ModelParams<S>, lr: f64) -> Self {
        let m = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape().to_vec())).collect();
        let v = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape().to_vec())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m, v }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// One update from the gradients accumulated in `params`.
    pub fn step(&mut self, params: &mut ModelParams<S>) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2) = (S::from_f64(self.beta1), S::from_f64(self.beta2));
        let one_m_b1 = S::from_f64(1.0 - self.beta1);
        let one_m_b2 = S::from_f64(1.0 - self.beta2);
        let lr = S::from_f64(self.lr / bc1);
        let bc2_sqrt = S::from_f64(bc2.sqrt());
        let eps = S::from_f64(self.eps);

        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let grad = params.grad(id).clone();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for ((g, m), v) in grad.data().iter().zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + one_m_b1 * *g;
                *v = b2 * *v + one_m_b2 * *g * *g;
            }
            let value = params.value_mut(id);
            for ((x, m), v) in value.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
                *x -= lr * *m / (v.sqrt() / bc2_sqrt + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // loss = sum (w - 3)^2; gradient 2(w - 3).
        let mut params = ModelParams::<f32>::new();
        let id = params.register("vrm.w", Tensor::new(vec![2], vec![0.0, 10.0]).unwrap()).unwrap();
        let mut adam = Adam::new(&params, 0.1);
        for _ in 0..500 {
            params.zero_grads();
            let grad = Tensor::new(
                vec![2],
                params.value(id).data().iter().map(|w| 2.0 * (w - 3.0)).collect(),
            )
            .unwrap();
            params.accumulate_grad(id, &grad, 1.0);
            adam.step(&mut params);
        }
        for &w in params.value(id).data() {
            assert!((w - 3.0).abs() < 1e-2, "w = {w}");
        }
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut params = ModelParams::<f32>::new();
            let id = params.register("vrm.w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()).unwrap();
            let mut adam = Adam::new(&params, 1e-3);
            for k in 0..50 {
                params.zero_grads();
                let grad = Tensor::new(
                    vec![3],
                    params.value(id).data().iter().map(|w| w * 0.3 + k as f32 * 0.01).collect(),
                )
                .unwrap();
                params.accumulate_grad(id, &grad, 1.0);
                adam.step(&mut params);
            }
            params.value(id).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
