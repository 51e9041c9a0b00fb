//! Pure tensor operations: the numeric contract every module builds on.
//!
//! Each public function validates shapes, checks the finite-value contract,
//! and delegates to the raw kernels in [`kernels`]. The autograd tape reuses
//! the same kernels so the two paths cannot drift apart.

use crate::error::{Result, VlanError};
use crate::tensor::{Scalar, Tensor};

/// Numerically stable softmax along `axis` (max-subtraction).
pub fn softmax<S: Scalar>(x: &Tensor<S>, axis: usize) -> Result<Tensor<S>> {
    if axis >= x.shape().len() {
        return Err(VlanError::Shape(format!(
            "softmax axis {axis} out of range for shape {:?}",
            x.shape()
        )));
    }
    x.validate_finite("softmax input")?;

    let shape = x.shape().to_vec();
    let axis_len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();

    let mut out = vec![S::ZERO; x.numel()];
    let data = x.data();
    for o in 0..outer {
        for i in 0..inner {
            let base = o * axis_len * inner + i;
            let mut max = data[base];
            for k in 1..axis_len {
                let v = data[base + k * inner];
                if v > max {
                    max = v;
                }
            }
            let mut sum = S::ZERO;
            for k in 0..axis_len {
                let e = (data[base + k * inner] - max).exp();
                out[base + k * inner] = e;
                sum += e;
            }
            for k in 0..axis_len {
                out[base + k * inner] = out[base + k * inner] / sum;
            }
        }
    }
    Tensor::new(shape, out)
}

/// 2-D matrix product.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(VlanError::Shape(format!(
            "matmul inner dims differ: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    kernels::matmul(a.data(), b.data(), out.data_mut(), m, k, n);
    out.validate_finite("matmul output")?;
    Ok(out)
}

/// Elementwise binary op with trailing-dims broadcast (numpy-style, with the
/// restriction that the smaller operand's shape must be a suffix of the
/// larger's, or have 1s in non-matching positions).
fn broadcast_binary<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    f: impl Fn(S, S) -> S,
    name: &str,
) -> Result<Tensor<S>> {
    let (big, small, swapped) = if a.shape().len() >= b.shape().len() {
        (a, b, false)
    } else {
        (b, a, true)
    };
    let bs = big.shape();
    let ss = small.shape();
    let offset = bs.len() - ss.len();
    // Validate alignment: each small dim must equal the big dim or be 1.
    for (i, &sd) in ss.iter().enumerate() {
        let bd = bs[offset + i];
        if sd != bd && sd != 1 {
            return Err(VlanError::Shape(format!(
                "{name}: cannot broadcast {:?} with {:?}",
                a.shape(),
                b.shape()
            )));
        }
    }
    let mut out = vec![S::ZERO; big.numel()];
    let sdata = small.data();
    let bdata = big.data();

    // Strides of the small tensor mapped onto the big tensor's index space.
    let mut sstrides = vec![0usize; bs.len()];
    {
        let mut stride = 1;
        for i in (0..ss.len()).rev() {
            sstrides[offset + i] = if ss[i] == 1 { 0 } else { stride };
            stride *= ss[i];
        }
    }
    let mut idx = vec![0usize; bs.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut soff = 0;
        for (d, &i) in idx.iter().enumerate() {
            soff += i * sstrides[d];
        }
        let (x, y) = if swapped {
            (sdata[soff], bdata[flat])
        } else {
            (bdata[flat], sdata[soff])
        };
        *slot = f(x, y);
        // Advance the multi-index.
        for d in (0..bs.len()).rev() {
            idx[d] += 1;
            if idx[d] < bs[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Tensor::new(bs.to_vec(), out)
}

pub fn add<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let out = broadcast_binary(a, b, |x, y| x + y, "add")?;
    out.validate_finite("add output")?;
    Ok(out)
}

pub fn mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let out = broadcast_binary(a, b, |x, y| x * y, "mul")?;
    out.validate_finite("mul output")?;
    Ok(out)
}

pub fn tanh<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let out = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v.tanh()).collect())?;
    out.validate_finite("tanh output")?;
    Ok(out)
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let out = Tensor::new(
        x.shape().to_vec(),
        x.data().iter().map(|&v| kernels::sigmoid_scalar(v)).collect(),
    )?;
    out.validate_finite("sigmoid output")?;
    Ok(out)
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let out = Tensor::new(
        x.shape().to_vec(),
        x.data().iter().map(|&v| v.maximum(S::ZERO)).collect(),
    )?;
    out.validate_finite("relu output")?;
    Ok(out)
}

/// Layer normalization over the last axis with learned gain/bias.
pub fn layer_norm<S: Scalar>(
    x: &Tensor<S>,
    gain: &Tensor<S>,
    bias: &Tensor<S>,
    eps: f64,
) -> Result<Tensor<S>> {
    let cols = *x.shape().last().ok_or_else(|| VlanError::Shape("layer_norm on 0-d".into()))?;
    if gain.numel() != cols || bias.numel() != cols {
        return Err(VlanError::Shape(format!(
            "layer_norm gain/bias must have {cols} elements"
        )));
    }
    let mut out = vec![S::ZERO; x.numel()];
    kernels::layer_norm(
        x.data(),
        gain.data(),
        bias.data(),
        &mut out,
        x.numel() / cols,
        cols,
        S::from_f64(eps),
    );
    let out = Tensor::new(x.shape().to_vec(), out)?;
    out.validate_finite("layer_norm output")?;
    Ok(out)
}

/// Sum over one axis, or over all elements when `axis` is None.
pub fn sum<S: Scalar>(x: &Tensor<S>, axis: Option<usize>) -> Result<Tensor<S>> {
    match axis {
        None => {
            let mut acc = S::ZERO;
            for &v in x.data() {
                acc += v;
            }
            Ok(Tensor::scalar(acc))
        }
        Some(axis) => {
            if axis >= x.shape().len() {
                return Err(VlanError::Shape(format!(
                    "sum axis {axis} out of range for shape {:?}",
                    x.shape()
                )));
            }
            let shape = x.shape();
            let axis_len = shape[axis];
            let inner: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            let mut out_shape: Vec<usize> = shape.to_vec();
            out_shape.remove(axis);
            if out_shape.is_empty() {
                out_shape.push(1);
            }
            let mut out = vec![S::ZERO; outer * inner];
            for o in 0..outer {
                for k in 0..axis_len {
                    for i in 0..inner {
                        out[o * inner + i] += x.data()[(o * axis_len + k) * inner + i];
                    }
                }
            }
            Tensor::new(out_shape, out)
        }
    }
}

pub fn mean<S: Scalar>(x: &Tensor<S>, axis: Option<usize>) -> Result<Tensor<S>> {
    let n = match axis {
        None => x.numel(),
        Some(a) => *x.shape().get(a).ok_or_else(|| {
            VlanError::Shape(format!("mean axis {a} out of range for {:?}", x.shape()))
        })?,
    };
    let mut s = sum(x, axis)?;
    let inv = S::ONE / S::from_f64(n as f64);
    for v in s.data_mut() {
        *v *= inv;
    }
    Ok(s)
}

/// Convolution geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

/// 2-D convolution. Input `[cin, h, w]`, weight `[cout, cin, kh, kw]`,
/// bias `[cout]`, output `[cout, ho, wo]`.
pub fn conv2d<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
    spec: ConvSpec,
) -> Result<Tensor<S>> {
    let [cin, h, wd] = dims3(x, "conv2d input")?;
    let ws = w.shape();
    if ws.len() != 4 || ws[1] != cin {
        return Err(VlanError::Shape(format!(
            "conv2d weight {ws:?} incompatible with input channels {cin}"
        )));
    }
    let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
    if b.numel() != cout {
        return Err(VlanError::Shape(format!("conv2d bias must have {cout} elements")));
    }
    let (ho, wo) = conv_out_dims(h, wd, kh, kw, spec)?;
    let mut out = Tensor::zeros(vec![cout, ho, wo]);
    kernels::conv2d(
        x.data(),
        w.data(),
        b.data(),
        out.data_mut(),
        kernels::ConvDims { cin, h, w: wd, cout, kh, kw, ho, wo, spec },
    );
    out.validate_finite("conv2d output")?;
    Ok(out)
}

pub fn conv_out_dims(h: usize, w: usize, kh: usize, kw: usize, spec: ConvSpec) -> Result<(usize, usize)> {
    let (sy, sx) = spec.stride;
    let (py, px) = spec.pad;
    let h_eff = h + 2 * py;
    let w_eff = w + 2 * px;
    if h_eff < kh || w_eff < kw || sy == 0 || sx == 0 {
        return Err(VlanError::Shape(format!(
            "conv geometry invalid: input {h}x{w}, kernel {kh}x{kw}, spec {spec:?}"
        )));
    }
    Ok(((h_eff - kh) / sy + 1, (w_eff - kw) / sx + 1))
}

fn dims3<S: Scalar>(x: &Tensor<S>, what: &str) -> Result<[usize; 3]> {
    match x.shape() {
        [a, b, c] => Ok([*a, *b, *c]),
        other => Err(VlanError::Shape(format!("{what}: expected 3-D, got {other:?}"))),
    }
}

/// Raw kernels shared between the pure ops above and the autograd tape.
pub mod kernels {
    use super::ConvSpec;
    use crate::tensor::Scalar;

    pub fn sigmoid_scalar<S: Scalar>(v: S) -> S {
        S::ONE / (S::ONE + (-v).exp())
    }

    /// out = a @ b; a is m x k, b is k x n, out m x n (overwritten).
    pub fn matmul<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize) {
        out.iter_mut().for_each(|v| *v = S::ZERO);
        matmul_acc(a, b, out, m, k, n, S::ONE);
    }

    /// out += scale * (a @ b). The k-dimension is unrolled by four to amortize
    /// loads of the output row; the grouping is fixed, so results stay
    /// bit-deterministic.
    pub fn matmul_acc<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize, scale: S) {
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            let mut kk = 0;
            while kk + 4 <= k {
                let a0 = arow[kk] * scale;
                let a1 = arow[kk + 1] * scale;
                let a2 = arow[kk + 2] * scale;
                let a3 = arow[kk + 3] * scale;
                let b0 = &b[kk * n..(kk + 1) * n];
                let b1 = &b[(kk + 1) * n..(kk + 2) * n];
                let b2 = &b[(kk + 2) * n..(kk + 3) * n];
                let b3 = &b[(kk + 3) * n..(kk + 4) * n];
                for ((((o, &v0), &v1), &v2), &v3) in
                    orow.iter_mut().zip(b0).zip(b1).zip(b2).zip(b3)
                {
                    *o += a0 * v0 + a1 * v1 + a2 * v2 + a3 * v3;
                }
                kk += 4;
            }
            while kk < k {
                let av = arow[kk] * scale;
                let brow = &b[kk * n..(kk + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                    *o += av * bv;
                }
                kk += 1;
            }
        }
    }

    /// Dot product with eight independent accumulator lanes (fixed grouping,
    /// bit-deterministic, and wide enough for the auto-vectorizer).
    pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
        let mut lanes = [S::ZERO; 8];
        let chunks = a.len() / 8;
        for c in 0..chunks {
            let aa = &a[c * 8..(c + 1) * 8];
            let bb = &b[c * 8..(c + 1) * 8];
            for l in 0..8 {
                lanes[l] += aa[l] * bb[l];
            }
        }
        let mut acc = S::ZERO;
        for (&av, &bv) in a[chunks * 8..].iter().zip(&b[chunks * 8..]) {
            acc += av * bv;
        }
        let pairs = [lanes[0] + lanes[4], lanes[1] + lanes[5], lanes[2] + lanes[6], lanes[3] + lanes[7]];
        acc + (pairs[0] + pairs[2]) + (pairs[1] + pairs[3])
    }

    /// out += scale * (a @ b^T); a is m x k, b is n x k, out m x n.
    pub fn matmul_bt_acc<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize, scale: S) {
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &b[j * k..(j + 1) * k];
                *o += dot(arow, brow) * scale;
            }
        }
    }

    /// out += scale * (a^T @ b); a is k x m, b is k x n, out m x n.
    /// Transposes `a` into row-major order first so the hot loop matches
    /// [`matmul_acc`].
    pub fn matmul_at_acc<S: Scalar>(a: &[S], b: &[S], out: &mut [S], m: usize, k: usize, n: usize, scale: S) {
        let mut at = vec![S::ZERO; m * k];
        for kk in 0..k {
            for i in 0..m {
                at[i * k + kk] = a[kk * m + i];
            }
        }
        matmul_acc(&at, b, out, m, k, n, scale);
    }

    /// Row-wise softmax of an m x n matrix, written into out.
    pub fn row_softmax<S: Scalar>(x: &[S], out: &mut [S], m: usize, n: usize) {
        for i in 0..m {
            let row = &x[i * n..(i + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            let mut max = row[0];
            for &v in &row[1..] {
                if v > max {
                    max = v;
                }
            }
            let mut sum = S::ZERO;
            for (o, &v) in orow.iter_mut().zip(row.iter()) {
                let e = (v - max).exp();
                *o = e;
                sum += e;
            }
            for o in orow.iter_mut() {
                *o = *o / sum;
            }
        }
    }

    /// Row-wise layer normalization with affine transform.
    pub fn layer_norm<S: Scalar>(
        x: &[S],
        gain: &[S],
        bias: &[S],
        out: &mut [S],
        rows: usize,
        cols: usize,
        eps: S,
    ) {
        let inv_n = S::ONE / S::from_f64(cols as f64);
        for r in 0..rows {
            let row = &x[r * cols..(r + 1) * cols];
            let orow = &mut out[r * cols..(r + 1) * cols];
            let mut mean = S::ZERO;
            for &v in row {
                mean += v;
            }
            mean *= inv_n;
            let mut var = S::ZERO;
            for &v in row {
                let d = v - mean;
                var += d * d;
            }
            var *= inv_n;
            let rstd = S::ONE / (var + eps).sqrt();
            for ((o, &v), (&g, &b)) in orow.iter_mut().zip(row.iter()).zip(gain.iter().zip(bias.iter())) {
                *o = (v - mean) * rstd * g + b;
            }
        }
    }

    #[derive(Debug, Clone, Copy)]
    pub struct ConvDims {
        pub cin: usize,
        pub h: usize,
        pub w: usize,
        pub cout: usize,
        pub kh: usize,
        pub kw: usize,
        pub ho: usize,
        pub wo: usize,
        pub spec: ConvSpec,
    }

    /// Unfolds the input into a [cin*kh*kw, ho*wo] patch matrix so the
    /// convolution becomes one matrix product.
    fn im2col<S: Scalar>(x: &[S], d: ConvDims, col: &mut [S]) {
        let (sy, sx) = d.spec.stride;
        let (py, px) = d.spec.pad;
        let n = d.ho * d.wo;
        col.iter_mut().for_each(|v| *v = S::ZERO);
        for ic in 0..d.cin {
            for ky in 0..d.kh {
                for kx in 0..d.kw {
                    let row = ((ic * d.kh + ky) * d.kw + kx) * n;
                    // Valid ox range: 0 <= ox*sx + kx - px < w.
                    let ox_lo = px.saturating_sub(kx).div_ceil(sx).min(d.wo);
                    let ox_hi = if d.w + px > kx {
                        (((d.w + px - kx - 1) / sx) + 1).min(d.wo)
                    } else {
                        0
                    };
                    for oy in 0..d.ho {
                        let iy = (oy * sy + ky) as i64 - py as i64;
                        if iy < 0 || iy >= d.h as i64 {
                            continue;
                        }
                        let xrow = &x[(ic * d.h + iy as usize) * d.w..(ic * d.h + iy as usize + 1) * d.w];
                        let crow = &mut col[row + oy * d.wo..row + (oy + 1) * d.wo];
                        if sx == 1 {
                            let ix0 = ox_lo + kx - px;
                            crow[ox_lo..ox_hi].copy_from_slice(&xrow[ix0..ix0 + (ox_hi - ox_lo)]);
                        } else {
                            for (ox, c) in crow[ox_lo..ox_hi].iter_mut().enumerate() {
                                *c = xrow[(ox_lo + ox) * sx + kx - px];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds a patch-matrix gradient back onto the input layout.
    fn col2im_add<S: Scalar>(dcol: &[S], d: ConvDims, dx: &mut [S]) {
        let (sy, sx) = d.spec.stride;
        let (py, px) = d.spec.pad;
        let n = d.ho * d.wo;
        for ic in 0..d.cin {
            for ky in 0..d.kh {
                for kx in 0..d.kw {
                    let row = ((ic * d.kh + ky) * d.kw + kx) * n;
                    let ox_lo = px.saturating_sub(kx).div_ceil(sx).min(d.wo);
                    let ox_hi = if d.w + px > kx {
                        (((d.w + px - kx - 1) / sx) + 1).min(d.wo)
                    } else {
                        0
                    };
                    for oy in 0..d.ho {
                        let iy = (oy * sy + ky) as i64 - py as i64;
                        if iy < 0 || iy >= d.h as i64 {
                            continue;
                        }
                        let dxrow = &mut dx[(ic * d.h + iy as usize) * d.w..(ic * d.h + iy as usize + 1) * d.w];
                        let crow = &dcol[row + oy * d.wo..row + (oy + 1) * d.wo];
                        if sx == 1 {
                            let ix0 = ox_lo + kx - px;
                            for (o, &v) in dxrow[ix0..ix0 + (ox_hi - ox_lo)].iter_mut().zip(&crow[ox_lo..ox_hi]) {
                                *o += v;
                            }
                        } else {
                            for (ox, &v) in crow[ox_lo..ox_hi].iter().enumerate() {
                                dxrow[(ox_lo + ox) * sx + kx - px] += v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Convolution forward as w_mat @ im2col(x) + bias. Output is overwritten.
    pub fn conv2d<S: Scalar>(x: &[S], w: &[S], b: &[S], out: &mut [S], d: ConvDims) {
        let kdim = d.cin * d.kh * d.kw;
        let n = d.ho * d.wo;
        let mut col = vec![S::ZERO; kdim * n];
        im2col(x, d, &mut col);
        for oc in 0..d.cout {
            let bias = b[oc];
            out[oc * n..(oc + 1) * n].iter_mut().for_each(|v| *v = bias);
        }
        matmul_acc(w, &col, out, d.cout, kdim, n, S::ONE);
    }

    /// Gradients of conv2d: accumulates into dx, dw, db.
    pub fn conv2d_backward<S: Scalar>(
        x: &[S],
        w: &[S],
        dout: &[S],
        dx: &mut [S],
        dw: &mut [S],
        db: &mut [S],
        d: ConvDims,
    ) {
        let kdim = d.cin * d.kh * d.kw;
        let n = d.ho * d.wo;
        for oc in 0..d.cout {
            let mut acc = S::ZERO;
            for &g in &dout[oc * n..(oc + 1) * n] {
                acc += g;
            }
            db[oc] += acc;
        }
        let mut col = vec![S::ZERO; kdim * n];
        im2col(x, d, &mut col);
        // dw = dout @ col^T, dx = col2im(w^T @ dout).
        matmul_bt_acc(dout, &col, dw, d.cout, n, kdim, S::ONE);
        let mut dcol = vec![S::ZERO; kdim * n];
        matmul_at_acc(w, dout, &mut dcol, kdim, d.cout, n, S::ONE);
        col2im_add(&dcol, d, dx);
    }
}
