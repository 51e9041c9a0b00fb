//! Shared helpers for the integration suites: independent scalar-loop
//! oracles that recompute module forwards from named parameters alone.

#![allow(dead_code)]

use visionlan::model::posenc::positional_encoding;
use visionlan::params::ModelParams;
use visionlan::tensor::Tensor;

fn get<'a>(params: &'a ModelParams<f64>, name: &str) -> &'a [f64] {
    params
        .value(params.id(name).unwrap_or_else(|| panic!("missing parameter {name}")))
        .data()
}

fn layer_norm_rows(x: &[f64], g: &[f64], b: &[f64], cols: usize) -> Vec<f64> {
    let mut0_out = x.len();
    let mut out = vec![0.0; mut0_out];
    for r in 0..x.len() / cols {
        let row = &x[r * cols..(r + 1) * cols];
        let mean: f64 = row.iter().sum::<f64>() / cols as f64;
        let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let rstd = 1.0 / (var + 1e-5).sqrt();
        for j in 0..cols {
            out[r * cols + j] = (row[j] - mean) * rstd * g[j] + b[j];
        }
    }
    out
}

fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Straight-line evaluation of one pre-norm transformer unit, reading the
/// weights by name.
pub fn oracle_transformer_unit(
    x: &Tensor<f64>,
    prefix: &str,
    n_heads: usize,
    params: &ModelParams<f64>,
) -> Tensor<f64> {
    let (n, c) = x.dims2().unwrap();
    let dh = c / n_heads;

    let normed = layer_norm_rows(
        x.data(),
        get(params, &format!("{prefix}.ln1.g")),
        get(params, &format!("{prefix}.ln1.b")),
        c,
    );
    let mut merged = vec![0.0; n * c];
    for h in 0..n_heads {
        let wq = get(params, &format!("{prefix}.attn.h{h}.wq"));
        let wk = get(params, &format!("{prefix}.attn.h{h}.wk"));
        let wv = get(params, &format!("{prefix}.attn.h{h}.wv"));
        let project = |w: &[f64]| {
            let mut out = vec![0.0; n * dh];
            for i in 0..n {
                for j in 0..dh {
                    let mut acc = 0.0;
                    for k in 0..c {
                        acc += normed[i * c + k] * w[k * dh + j];
                    }
                    out[i * dh + j] = acc;
                }
            }
            out
        };
        let (q, k, v) = (project(wq), project(wk), project(wv));
        for i in 0..n {
            let mut scores = vec![0.0; n];
            for j in 0..n {
                let mut acc = 0.0;
                for u in 0..dh {
                    acc += q[i * dh + u] * k[j * dh + u];
                }
                scores[j] = acc / (dh as f64).sqrt();
            }
            softmax_inplace(&mut scores);
            for u in 0..dh {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += scores[j] * v[j * dh + u];
                }
                merged[i * c + h * dh + u] = acc;
            }
        }
    }
    let ow = get(params, &format!("{prefix}.attn.out.w"));
    let ob = get(params, &format!("{prefix}.attn.out.b"));
    let mut x_mid = vec![0.0; n * c];
    for i in 0..n {
        for j in 0..c {
            let mut acc = ob[j];
            for k in 0..c {
                acc += merged[i * c + k] * ow[k * c + j];
            }
            x_mid[i * c + j] = x.data()[i * c + j] + acc;
        }
    }
    let normed2 = layer_norm_rows(
        &x_mid,
        get(params, &format!("{prefix}.ln2.g")),
        get(params, &format!("{prefix}.ln2.b")),
        c,
    );
    let hidden = 4 * c;
    let w1 = get(params, &format!("{prefix}.ffn.w1"));
    let b1 = get(params, &format!("{prefix}.ffn.b1"));
    let w2 = get(params, &format!("{prefix}.ffn.w2"));
    let b2 = get(params, &format!("{prefix}.ffn.b2"));
    let mut out = vec![0.0; n * c];
    for i in 0..n {
        let mut h = vec![0.0; hidden];
        for j in 0..hidden {
            let mut acc = b1[j];
            for k in 0..c {
                acc += normed2[i * c + k] * w1[k * hidden + j];
            }
            h[j] = acc.max(0.0);
        }
        for j in 0..c {
            let mut acc = b2[j];
            for k in 0..hidden {
                acc += h[k] * w2[k * c + j];
            }
            out[i * c + j] = x_mid[i * c + j] + acc;
        }
    }
    Tensor::new(vec![n, c], out).unwrap()
}

/// Brute-force evaluation of the parallel prediction equations: per-step
/// additive attention scores, softmax over positions, glimpses, class
/// scores.
pub fn oracle_parallel_predict(
    v_in: &Tensor<f64>,
    prefix: &str,
    n_steps: usize,
    params: &ModelParams<f64>,
) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>) {
    let (hw, c) = v_in.dims2().unwrap();
    let w1 = get(params, &format!("{prefix}.w1"));
    let w2 = get(params, &format!("{prefix}.w2"));
    let w3 = get(params, &format!("{prefix}.w3"));
    let wc = get(params, &format!("{prefix}.wcls"));
    let bc = get(params, &format!("{prefix}.bcls"));
    let d = w1.len();
    let n_classes = bc.len();
    let oc = positional_encoding::<f64>(n_steps, c).unwrap();

    let mut att = Tensor::zeros(vec![hw, n_steps]);
    for t in 0..n_steps {
        let mut scores = vec![0.0; hw];
        for (s, score) in scores.iter_mut().enumerate() {
            let mut dot = 0.0;
            for u in 0..d {
                let mut pre = 0.0;
                for k in 0..c {
                    pre += w2[k * d + u] * oc.data()[t * c + k];
                    pre += w3[k * d + u] * v_in.data()[s * c + k];
                }
                dot += w1[u] * pre.tanh();
            }
            *score = dot;
        }
        softmax_inplace(&mut scores);
        for s in 0..hw {
            att.data_mut()[s * n_steps + t] = scores[s];
        }
    }

    let mut glimpses = Tensor::zeros(vec![n_steps, c]);
    for t in 0..n_steps {
        for k in 0..c {
            let mut acc = 0.0;
            for s in 0..hw {
                acc += att.data()[s * n_steps + t] * v_in.data()[s * c + k];
            }
            glimpses.data_mut()[t * c + k] = acc;
        }
    }
    let mut logits = Tensor::zeros(vec![n_steps, n_classes]);
    for t in 0..n_steps {
        for j in 0..n_classes {
            let mut acc = bc[j];
            for k in 0..c {
                acc += glimpses.data()[t * c + k] * wc[k * n_classes + j];
            }
            logits.data_mut()[t * n_classes + j] = acc;
        }
    }
    (att, glimpses, logits)
}

/// Scalar-loop evaluation of the mask head: enhanced features plus index
/// embedding through the linear head and sigmoid.
pub fn oracle_predict_mask(
    v: &Tensor<f64>,
    p: usize,
    n_heads: usize,
    spatial_pe: &Tensor<f64>,
    params: &ModelParams<f64>,
) -> Tensor<f64> {
    let [h, w, c] = match v.shape() {
        [a, b, d] => [*a, *b, *d],
        other => panic!("expected [h, w, c], got {other:?}"),
    };
    let hw = h * w;
    let mut x = vec![0.0; hw * c];
    for i in 0..hw * c {
        x[i] = v.data()[i] + spatial_pe.data()[i];
    }
    let x = Tensor::new(vec![hw, c], x).unwrap();
    let enhanced = oracle_transformer_unit(&x, "mlm.enhance", n_heads, params);
    let embed_table = get(params, "mlm.index_embed");
    let head_w = get(params, "mlm.head.w");
    let head_b = get(params, "mlm.head.b")[0];
    let mut out = Tensor::zeros(vec![h, w]);
    for s in 0..hw {
        let mut acc = head_b;
        for k in 0..c {
            acc += (enhanced.data()[s * c + k] + embed_table[(p - 1) * c + k]) * head_w[k];
        }
        out.data_mut()[s] = 1.0 / (1.0 + (-acc).exp());
    }
    out
}

/// Elementwise occlusion oracle: v[i][j] * (1 - mask[i]).
pub fn oracle_occlude(v: &Tensor<f64>, mask: &Tensor<f64>) -> Tensor<f64> {
    let (rows, cols) = v.dims2().unwrap();
    Tensor::from_fn(vec![rows, cols], |i| v.data()[i] * (1.0 - mask.data()[i / cols]))
}
