//! Fixed sinusoidal positional encodings.
//!
//! Used in two roles: spatial codes over the flattened feature map (added
//! before the reasoning stack) and character-order codes that act as the
//! per-step queries of the parallel prediction layer.

use crate::error::{Result, VlanError};
use crate::tensor::{Scalar, Tensor};

/// Standard sinusoid: PE[t, 2i] = sin(t / 10000^(2i/c)),
/// PE[t, 2i+1] = cos(t / 10000^(2i/c)).
pub fn positional_encoding<S: Scalar>(n: usize, c: usize) -> Result<Tensor<S>> {
    if c % 2 != 0 {
        return Err(VlanError::Config(format!("positional encoding width {c} must be even")));
    }
    let mut data = vec![S::ZERO; n * c];
    for t in 0..n {
        for i in 0..c / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / c as f64);
            let angle = t as f64 * freq;
            data[t * c + 2 * i] = S::from_f64(angle.sin());
            data[t * c + 2 * i + 1] = S::from_f64(angle.cos());
        }
    }
    Tensor::new(vec![n, c], data)
}
