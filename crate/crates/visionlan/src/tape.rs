//! Reverse-mode autodiff tape.
//!
//! A `Tape` records one forward evaluation per sample as a flat list of
//! operations over dense tensors, then replays it backwards to accumulate
//! gradients. Parameter tensors are leased from a shared [`ModelParams`]
//! (never copied); re-leasing the same parameter returns the same leaf, so
//! weight sharing accumulates gradients naturally.

use crate::error::{Result, VlanError};
use crate::ops::kernels::{self, ConvDims};
use crate::ops::{conv_out_dims, ConvSpec};
use crate::params::{ModelParams, ParamId};
use crate::tensor::{Scalar, Tensor};
use std::collections::HashMap;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug)]
enum Op<S: Scalar> {
    Param(ParamId),
    Const,
    Matmul { a: Var, b: Var },
    /// a @ b^T with a: m x k, b: n x k.
    MatmulBt { a: Var, b: Var },
    Add { a: Var, b: Var },
    /// x: m x n plus a broadcast row vector of n elements.
    AddRow { x: Var, row: Var },
    AddScalar { x: Var },
    Scale { x: Var, k: S },
    Mul { a: Var, b: Var },
    /// x: m x n times a broadcast column of m elements.
    MulCol { x: Var, col: Var },
    Tanh { x: Var },
    Sigmoid { x: Var },
    Relu { x: Var },
    RowSoftmax { x: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, eps: S },
    /// Normalizes across channels at every spatial position of a [c, h, w] map.
    ChannelNorm { x: Var, gain: Var, bias: Var, eps: S },
    Conv2d { x: Var, w: Var, b: Var, spec: ConvSpec },
    /// [c, h, w] -> [h*w, c] layout change.
    ChwToHwc { x: Var },
    Transpose { x: Var },
    GatherRow { table: Var, row: usize },
    ConcatCols { parts: Vec<Var> },
    /// score[t, s] = w1 . tanh(keys[s] + queries[t]) for keys: m x d,
    /// queries: n x d, w1: d elements; output n x m.
    AttnScores { keys: Var, queries: Var, w1: Var },
    /// Mean over the first `supervised` rows of -log softmax(logits)[label].
    SeqCrossEntropy { logits: Var, labels: Vec<usize>, supervised: usize },
    /// Weighted sum of scalar nodes.
    WeightedSum { terms: Vec<(Var, S)> },
    SumAll { x: Var },
}

struct Node<S: Scalar> {
    op: Op<S>,
    /// None only for Param leaves, whose value lives in the shared store.
    value: Option<Tensor<S>>,
}

pub struct Tape<'p, S: Scalar> {
    params: &'p ModelParams<S>,
    nodes: Vec<Node<S>>,
    leaf_of: HashMap<ParamId, Var>,
}

impl<'p, S: Scalar> Tape<'p, S> {
    pub fn new(params: &'p ModelParams<S>) -> Self {
        Tape { params, nodes: Vec::new(), leaf_of: HashMap::new() }
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        let node = &self.nodes[v.0 as usize];
        match &node.op {
            Op::Param(id) => self.params.value(*id),
            _ => node.value.as_ref().expect("non-param node has a value"),
        }
    }

    /// Parameters leased onto this tape, in first-use order.
    pub fn touched_params(&self) -> Vec<ParamId> {
        let mut ids: Vec<(Var, ParamId)> = self.leaf_of.iter().map(|(k, v)| (*v, *k)).collect();
        ids.sort_by_key(|(v, _)| v.0);
        ids.into_iter().map(|(_, id)| id).collect()
    }

    fn push(&mut self, op: Op<S>, value: Option<Tensor<S>>) -> Var {
        let v = Var(self.nodes.len() as u32);
        self.nodes.push(Node { op, value });
        v
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.leaf_of.get(&id) {
            return v;
        }
        let v = self.push(Op::Param(id), None);
        self.leaf_of.insert(id, v);
        v
    }

    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(Op::Const, Some(t))
    }

    fn dims2(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        self.value(v).dims2().map_err(|_| {
            VlanError::Shape(format!("{what}: expected 2-D, got {:?}", self.value(v).shape()))
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul lhs")?;
        let (k2, n) = self.dims2(b, "matmul rhs")?;
        if k != k2 {
            return Err(VlanError::Shape(format!("matmul inner dims {k} vs {k2}")));
        }
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::matmul(self.value(a).data(), self.value(b).data(), out.data_mut(), m, k, n);
        Ok(self.push(Op::Matmul { a, b }, Some(out)))
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul_bt lhs")?;
        let (n, k2) = self.dims2(b, "matmul_bt rhs")?;
        if k != k2 {
            return Err(VlanError::Shape(format!("matmul_bt inner dims {k} vs {k2}")));
        }
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::matmul_bt_acc(self.value(a).data(), self.value(b).data(), out.data_mut(), m, k, n, S::ONE);
        Ok(self.push(Op::MatmulBt { a, b }, Some(out)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(VlanError::Shape(format!(
                "add shape mismatch {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let out = Tensor::new(
            self.value(a).shape().to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data().iter())
                .map(|(&x, &y)| x + y)
                .collect(),
        )?;
        Ok(self.push(Op::Add { a, b }, Some(out)))
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (m, n) = self.dims2(x, "add_row lhs")?;
        if self.value(row).numel() != n {
            return Err(VlanError::Shape(format!(
                "add_row: row has {} elements, need {n}",
                self.value(row).numel()
            )));
        }
        let rdata = self.value(row).data().to_vec();
        let mut out = self.value(x).clone();
        for i in 0..m {
            for (o, &r) in out.data_mut()[i * n..(i + 1) * n].iter_mut().zip(rdata.iter()) {
                *o += r;
            }
        }
        Ok(self.push(Op::AddRow { x, row }, Some(out)))
    }

    pub fn add_scalar(&mut self, x: Var, k: S) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v += k);
        self.push(Op::AddScalar { x }, Some(out))
    }

    pub fn scale(&mut self, x: Var, k: S) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= k);
        self.push(Op::Scale { x, k }, Some(out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(VlanError::Shape(format!(
                "mul shape mismatch {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let out = Tensor::new(
            self.value(a).shape().to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data().iter())
                .map(|(&x, &y)| x * y)
                .collect(),
        )?;
        Ok(self.push(Op::Mul { a, b }, Some(out)))
    }

    pub fn mul_col(&mut self, x: Var, col: Var) -> Result<Var> {
        let (m, n) = self.dims2(x, "mul_col lhs")?;
        if self.value(col).numel() != m {
            return Err(VlanError::Shape(format!(
                "mul_col: column has {} elements, need {m}",
                self.value(col).numel()
            )));
        }
        let cdata = self.value(col).data().to_vec();
        let mut out = self.value(x).clone();
        for (i, &c) in cdata.iter().enumerate() {
            for o in out.data_mut()[i * n..(i + 1) * n].iter_mut() {
                *o *= c;
            }
        }
        Ok(self.push(Op::MulCol { x, col }, Some(out)))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = Tensor::new(
            self.value(x).shape().to_vec(),
            self.value(x).data().iter().map(|v| v.tanh()).collect(),
        )
        .expect("same shape");
        self.push(Op::Tanh { x }, Some(out))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = Tensor::new(
            self.value(x).shape().to_vec(),
            self.value(x).data().iter().map(|&v| kernels::sigmoid_scalar(v)).collect(),
        )
        .expect("same shape");
        self.push(Op::Sigmoid { x }, Some(out))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = Tensor::new(
            self.value(x).shape().to_vec(),
            self.value(x).data().iter().map(|&v| v.maximum(S::ZERO)).collect(),
        )
        .expect("same shape");
        self.push(Op::Relu { x }, Some(out))
    }

    pub fn row_softmax(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims2(x, "row_softmax")?;
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::row_softmax(self.value(x).data(), out.data_mut(), m, n);
        Ok(self.push(Op::RowSoftmax { x }, Some(out)))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.dims2(x, "layer_norm input")?;
        if self.value(gain).numel() != n || self.value(bias).numel() != n {
            return Err(VlanError::Shape(format!("layer_norm gain/bias must have {n} elements")));
        }
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::layer_norm(
            self.value(x).data(),
            self.value(gain).data(),
            self.value(bias).data(),
            out.data_mut(),
            m,
            n,
            S::from_f64(eps),
        );
        Ok(self.push(Op::LayerNorm { x, gain, bias, eps: S::from_f64(eps) }, Some(out)))
    }

    pub fn channel_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        let [c, h, w] = match shape.as_slice() {
            [a, b, d] => [*a, *b, *d],
            other => return Err(VlanError::Shape(format!("channel_norm: expected 3-D, got {other:?}"))),
        };
        if self.value(gain).numel() != c || self.value(bias).numel() != c {
            return Err(VlanError::Shape(format!("channel_norm gain/bias must have {c} elements")));
        }
        let eps = S::from_f64(eps);
        let hw = h * w;
        let mut out = Tensor::zeros(vec![c, h, w]);
        {
            let xd = self.value(x).data();
            let g = self.value(gain).data();
            let b = self.value(bias).data();
            let od = out.data_mut();
            let inv_c = S::ONE / S::from_f64(c as f64);
            for p in 0..hw {
                let mut mean = S::ZERO;
                for ch in 0..c {
                    mean += xd[ch * hw + p];
                }
                mean *= inv_c;
                let mut var = S::ZERO;
                for ch in 0..c {
                    let d = xd[ch * hw + p] - mean;
                    var += d * d;
                }
                var *= inv_c;
                let rstd = S::ONE / (var + eps).sqrt();
                for ch in 0..c {
                    od[ch * hw + p] = (xd[ch * hw + p] - mean) * rstd * g[ch] + b[ch];
                }
            }
        }
        Ok(self.push(Op::ChannelNorm { x, gain, bias, eps }, Some(out)))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, spec: ConvSpec) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        let [cin, h, wd] = match xs.as_slice() {
            [a, b2, c] => [*a, *b2, *c],
            other => return Err(VlanError::Shape(format!("conv2d input: expected 3-D, got {other:?}"))),
        };
        if ws.len() != 4 || ws[1] != cin {
            return Err(VlanError::Shape(format!("conv2d weight {ws:?} vs input channels {cin}")));
        }
        let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
        if self.value(b).numel() != cout {
            return Err(VlanError::Shape(format!("conv2d bias must have {cout} elements")));
        }
        let (ho, wo) = conv_out_dims(h, wd, kh, kw, spec)?;
        let mut out = Tensor::zeros(vec![cout, ho, wo]);
        kernels::conv2d(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            out.data_mut(),
            ConvDims { cin, h, w: wd, cout, kh, kw, ho, wo, spec },
        );
        Ok(self.push(Op::Conv2d { x, w, b, spec }, Some(out)))
    }

    pub fn chw_to_hwc(&mut self, x: Var) -> Result<Var> {
        let [c, h, w] = match self.value(x).shape() {
            [a, b, d] => [*a, *b, *d],
            other => return Err(VlanError::Shape(format!("chw_to_hwc: expected 3-D, got {other:?}"))),
        };
        let hw = h * w;
        let xd = self.value(x).data();
        let mut out = vec![S::ZERO; hw * c];
        for ch in 0..c {
            for p in 0..hw {
                out[p * c + ch] = xd[ch * hw + p];
            }
        }
        let out = Tensor::new(vec![hw, c], out)?;
        Ok(self.push(Op::ChwToHwc { x }, Some(out)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims2(x, "transpose")?;
        let xd = self.value(x).data();
        let mut out = vec![S::ZERO; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = xd[i * n + j];
            }
        }
        let out = Tensor::new(vec![n, m], out)?;
        Ok(self.push(Op::Transpose { x }, Some(out)))
    }

    pub fn gather_row(&mut self, table: Var, row: usize) -> Result<Var> {
        let (rows, cols) = self.dims2(table, "gather_row table")?;
        if row >= rows {
            return Err(VlanError::Index(format!("gather_row: row {row} out of {rows}")));
        }
        let out = Tensor::new(vec![cols], self.value(table).row(row).to_vec())?;
        Ok(self.push(Op::GatherRow { table, row }, Some(out)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(VlanError::Shape("concat_cols of zero parts".into()));
        }
        let (m, _) = self.dims2(parts[0], "concat_cols part")?;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pm, pn) = self.value(p).dims2()?;
                if pm != m {
                    return Err(VlanError::Shape("concat_cols: row count mismatch".into()));
                }
                Ok(pn)
            })
            .collect::<Result<_>>()?;
        let total: usize = widths.iter().sum();
        let mut out = vec![S::ZERO; m * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(widths.iter()) {
            let pd = self.value(p).data();
            for i in 0..m {
                out[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&pd[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        let out = Tensor::new(vec![m, total], out)?;
        Ok(self.push(Op::ConcatCols { parts: parts.to_vec() }, Some(out)))
    }

    pub fn attn_scores(&mut self, keys: Var, queries: Var, w1: Var) -> Result<Var> {
        let (m, d) = self.dims2(keys, "attn_scores keys")?;
        let (n, d2) = self.dims2(queries, "attn_scores queries")?;
        if d != d2 || self.value(w1).numel() != d {
            return Err(VlanError::Shape(format!(
                "attn_scores width mismatch: keys d={d}, queries d={d2}, w1 {}",
                self.value(w1).numel()
            )));
        }
        let kd = self.value(keys).data();
        let qd = self.value(queries).data();
        let wd = self.value(w1).data();
        let mut out = vec![S::ZERO; n * m];
        for t in 0..n {
            let q = &qd[t * d..(t + 1) * d];
            for s in 0..m {
                let k = &kd[s * d..(s + 1) * d];
                let mut acc = S::ZERO;
                for u in 0..d {
                    acc += wd[u] * (k[u] + q[u]).tanh();
                }
                out[t * m + s] = acc;
            }
        }
        let out = Tensor::new(vec![n, m], out)?;
        Ok(self.push(Op::AttnScores { keys, queries, w1 }, Some(out)))
    }

    pub fn seq_cross_entropy(&mut self, logits: Var, labels: &[usize], supervised: usize) -> Result<Var> {
        let (n, k) = self.dims2(logits, "seq_cross_entropy logits")?;
        if supervised == 0 || supervised > n || labels.len() < supervised {
            return Err(VlanError::Shape(format!(
                "seq_cross_entropy: supervised {supervised} invalid for {n} steps / {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels[..supervised].iter().find(|&&l| l >= k) {
            return Err(VlanError::Vocab(format!("label {bad} out of {k} classes")));
        }
        let ld = self.value(logits).data();
        let mut acc = S::ZERO;
        for t in 0..supervised {
            let row = &ld[t * k..(t + 1) * k];
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
            // -log softmax at the gold class.
            acc += sum.ln() + max - row[labels[t]];
        }
        let loss = acc / S::from_f64(supervised as f64);
        let out = Tensor::scalar(loss);
        Ok(self.push(
            Op::SeqCrossEntropy { logits, labels: labels[..supervised].to_vec(), supervised },
            Some(out),
        ))
    }

    pub fn weighted_sum(&mut self, terms: &[(Var, S)]) -> Result<Var> {
        let mut acc = S::ZERO;
        for &(v, k) in terms {
            acc += self.value(v).item()? * k;
        }
        Ok(self.push(Op::WeightedSum { terms: terms.to_vec() }, Some(Tensor::scalar(acc))))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let mut acc = S::ZERO;
        for &v in self.value(x).data() {
            acc += v;
        }
        self.push(Op::SumAll { x }, Some(Tensor::scalar(acc)))
    }

    /// Runs the backward pass from a scalar root and returns per-parameter
    /// gradients in first-use order.
    pub fn backward(&self, root: Var) -> Result<Vec<(ParamId, Tensor<S>)>> {
        if self.value(root).numel() != 1 {
            return Err(VlanError::Shape("backward root must be scalar".into()));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0 as usize] = Some(Tensor::scalar(S::ONE));

        for idx in (0..=root.0 as usize).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            // Re-store for potential inspection unless it's an interior node
            // we no longer need; parameters keep theirs below.
            grads[idx] = Some(g);
        }

        let mut out = Vec::new();
        for id in self.touched_params() {
            let leaf = self.leaf_of[&id];
            let g = grads[leaf.0 as usize]
                .take()
                .unwrap_or_else(|| Tensor::zeros(self.params.value(id).shape().to_vec()));
            out.push((id, g));
        }
        Ok(out)
    }

    fn accumulate(grads: &mut [Option<Tensor<S>>], target: Var, shape: &[usize], add: impl FnOnce(&mut [S])) {
        let slot = &mut grads[target.0 as usize];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(shape.to_vec()));
        }
        add(slot.as_mut().unwrap().data_mut());
    }

    #[allow(clippy::too_many_lines)]
    fn propagate(&self, idx: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Param(_) | Op::Const => {}
            Op::Matmul { a, b } => {
                let (m, k) = self.value(*a).dims2()?;
                let n = self.value(*b).dims2()?.1;
                let (av, bv) = (self.value(*a), self.value(*b));
                Self::accumulate(grads, *a, &[m, k], |da| {
                    kernels::matmul_bt_acc(g.data(), bv.data(), da, m, n, k, S::ONE);
                });
                Self::accumulate(grads, *b, &[k, n], |db| {
                    kernels::matmul_at_acc(av.data(), g.data(), db, k, m, n, S::ONE);
                });
            }
            Op::MatmulBt { a, b } => {
                let (m, k) = self.value(*a).dims2()?;
                let n = self.value(*b).dims2()?.0;
                let (av, bv) = (self.value(*a), self.value(*b));
                Self::accumulate(grads, *a, &[m, k], |da| {
                    kernels::matmul_acc(g.data(), bv.data(), da, m, n, k, S::ONE);
                });
                Self::accumulate(grads, *b, &[n, k], |db| {
                    kernels::matmul_at_acc(g.data(), av.data(), db, n, m, k, S::ONE);
                });
            }
            Op::Add { a, b } => {
                for &t in &[*a, *b] {
                    Self::accumulate(grads, t, g.shape(), |d| {
                        for (x, &gg) in d.iter_mut().zip(g.data().iter()) {
                            *x += gg;
                        }
                    });
                }
            }
            Op::AddRow { x, row } => {
                let (m, n) = self.value(*x).dims2()?;
                Self::accumulate(grads, *x, &[m, n], |d| {
                    for (x2, &gg) in d.iter_mut().zip(g.data().iter()) {
                        *x2 += gg;
                    }
                });
                let row_shape = self.value(*row).shape().to_vec();
                Self::accumulate(grads, *row, &row_shape, |d| {
                    for i in 0..m {
                        for (dj, &gg) in d.iter_mut().zip(g.data()[i * n..(i + 1) * n].iter()) {
                            *dj += gg;
                        }
                    }
                });
            }
            Op::AddScalar { x } => {
                Self::accumulate(grads, *x, g.shape(), |d| {
                    for (x2, &gg) in d.iter_mut().zip(g.data().iter()) {
                        *x2 += gg;
                    }
                });
            }
            Op::Scale { x, k } => {
                let k = *k;
                Self::accumulate(grads, *x, g.shape(), |d| {
                    for (x2, &gg) in d.iter_mut().zip(g.data().iter()) {
                        *x2 += gg * k;
                    }
                });
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                Self::accumulate(grads, *a, av.shape(), |d| {
                    for ((x, &gg), &y) in d.iter_mut().zip(g.data().iter()).zip(bv.data().iter()) {
                        *x += gg * y;
                    }
                });
                Self::accumulate(grads, *b, bv.shape(), |d| {
                    for ((x, &gg), &y) in d.iter_mut().zip(g.data().iter()).zip(av.data().iter()) {
                        *x += gg * y;
                    }
                });
            }
            Op::MulCol { x, col } => {
                let (m, n) = self.value(*x).dims2()?;
                let (xv, cv) = (self.value(*x), self.value(*col));
                Self::accumulate(grads, *x, &[m, n], |d| {
                    for i in 0..m {
                        let c = cv.data()[i];
                        for (x2, &gg) in d[i * n..(i + 1) * n].iter_mut().zip(g.data()[i * n..(i + 1) * n].iter()) {
                            *x2 += gg * c;
                        }
                    }
                });
                let col_shape = cv.shape().to_vec();
                Self::accumulate(grads, *col, &col_shape, |d| {
                    for (i, dc) in d.iter_mut().enumerate() {
                        let mut acc = S::ZERO;
                        for (&gg, &xx) in g.data()[i * n..(i + 1) * n].iter().zip(xv.data()[i * n..(i + 1) * n].iter()) {
                            acc += gg * xx;
                        }
                        *dc += acc;
                    }
                });
            }
            Op::Tanh { x } => {
                let y = node.value.as_ref().unwrap();
                Self::accumulate(grads, *x, y.shape(), |d| {
                    for ((x2, &gg), &yy) in d.iter_mut().zip(g.data().iter()).zip(y.data().iter()) {
                        *x2 += gg * (S::ONE - yy * yy);
                    }
                });
            }
            Op::Sigmoid { x } => {
                let y = node.value.as_ref().unwrap();
                Self::accumulate(grads, *x, y.shape(), |d| {
                    for ((x2, &gg), &yy) in d.iter_mut().zip(g.data().iter()).zip(y.data().iter()) {
                        *x2 += gg * yy * (S::ONE - yy);
                    }
                });
            }
            Op::Relu { x } => {
                let y = node.value.as_ref().unwrap();
                Self::accumulate(grads, *x, y.shape(), |d| {
                    for ((x2, &gg), &yy) in d.iter_mut().zip(g.data().iter()).zip(y.data().iter()) {
                        if yy > S::ZERO {
                            *x2 += gg;
                        }
                    }
                });
            }
            Op::RowSoftmax { x } => {
                let y = node.value.as_ref().unwrap();
                let (m, n) = y.dims2()?;
                Self::accumulate(grads, *x, &[m, n], |d| {
                    for i in 0..m {
                        let yr = &y.data()[i * n..(i + 1) * n];
                        let gr = &g.data()[i * n..(i + 1) * n];
                        let mut dot = S::ZERO;
                        for (&gg, &yy) in gr.iter().zip(yr.iter()) {
                            dot += gg * yy;
                        }
                        for ((x2, &gg), &yy) in d[i * n..(i + 1) * n].iter_mut().zip(gr.iter()).zip(yr.iter()) {
                            *x2 += yy * (gg - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let (m, n) = self.value(*x).dims2()?;
                let xv = self.value(*x);
                let gv = self.value(*gain);
                let inv_n = S::ONE / S::from_f64(n as f64);
                // Recompute per-row statistics.
                let mut xhat = vec![S::ZERO; m * n];
                let mut rstds = vec![S::ZERO; m];
                for i in 0..m {
                    let row = &xv.data()[i * n..(i + 1) * n];
                    let mut mean = S::ZERO;
                    for &v in row {
                        mean += v;
                    }
                    mean *= inv_n;
                    let mut var = S::ZERO;
                    for &v in row {
                        let dd = v - mean;
                        var += dd * dd;
                    }
                    var *= inv_n;
                    let rstd = S::ONE / (var + *eps).sqrt();
                    rstds[i] = rstd;
                    for (o, &v) in xhat[i * n..(i + 1) * n].iter_mut().zip(row.iter()) {
                        *o = (v - mean) * rstd;
                    }
                }
                Self::accumulate(grads, *gain, &[n], |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[j] += g.data()[i * n + j] * xhat[i * n + j];
                        }
                    }
                });
                Self::accumulate(grads, *bias, &[n], |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[j] += g.data()[i * n + j];
                        }
                    }
                });
                Self::accumulate(grads, *x, &[m, n], |d| {
                    for i in 0..m {
                        let gr = &g.data()[i * n..(i + 1) * n];
                        let xh = &xhat[i * n..(i + 1) * n];
                        let mut mean_dy = S::ZERO;
                        let mut mean_dy_xhat = S::ZERO;
                        for j in 0..n {
                            let dy = gr[j] * gv.data()[j];
                            mean_dy += dy;
                            mean_dy_xhat += dy * xh[j];
                        }
                        mean_dy *= inv_n;
                        mean_dy_xhat *= inv_n;
                        for j in 0..n {
                            let dy = gr[j] * gv.data()[j];
                            d[i * n + j] += rstds[i] * (dy - mean_dy - xh[j] * mean_dy_xhat);
                        }
                    }
                });
            }
            Op::ChannelNorm { x, gain, bias, eps } => {
                let [c, h, w] = match self.value(*x).shape() {
                    [a, b, d] => [*a, *b, *d],
                    _ => unreachable!(),
                };
                let hw = h * w;
                let xv = self.value(*x);
                let gv = self.value(*gain);
                let inv_c = S::ONE / S::from_f64(c as f64);
                let mut xhat = vec![S::ZERO; c * hw];
                let mut rstds = vec![S::ZERO; hw];
                for p in 0..hw {
                    let mut mean = S::ZERO;
                    for ch in 0..c {
                        mean += xv.data()[ch * hw + p];
                    }
                    mean *= inv_c;
                    let mut var = S::ZERO;
                    for ch in 0..c {
                        let dd = xv.data()[ch * hw + p] - mean;
                        var += dd * dd;
                    }
                    var *= inv_c;
                    let rstd = S::ONE / (var + *eps).sqrt();
                    rstds[p] = rstd;
                    for ch in 0..c {
                        xhat[ch * hw + p] = (xv.data()[ch * hw + p] - mean) * rstd;
                    }
                }
                Self::accumulate(grads, *gain, &[c], |d| {
                    for ch in 0..c {
                        let mut acc = S::ZERO;
                        for p in 0..hw {
                            acc += g.data()[ch * hw + p] * xhat[ch * hw + p];
                        }
                        d[ch] += acc;
                    }
                });
                Self::accumulate(grads, *bias, &[c], |d| {
                    for ch in 0..c {
                        let mut acc = S::ZERO;
                        for p in 0..hw {
                            acc += g.data()[ch * hw + p];
                        }
                        d[ch] += acc;
                    }
                });
                Self::accumulate(grads, *x, &[c, h, w], |d| {
                    for p in 0..hw {
                        let mut mean_dy = S::ZERO;
                        let mut mean_dy_xhat = S::ZERO;
                        for ch in 0..c {
                            let dy = g.data()[ch * hw + p] * gv.data()[ch];
                            mean_dy += dy;
                            mean_dy_xhat += dy * xhat[ch * hw + p];
                        }
                        mean_dy *= inv_c;
                        mean_dy_xhat *= inv_c;
                        for ch in 0..c {
                            let dy = g.data()[ch * hw + p] * gv.data()[ch];
                            d[ch * hw + p] += rstds[p] * (dy - mean_dy - xhat[ch * hw + p] * mean_dy_xhat);
                        }
                    }
                });
            }
            Op::Conv2d { x, w, b, spec } => {
                let [cin, h, wd] = match self.value(*x).shape() {
                    [a, b2, d] => [*a, *b2, *d],
                    _ => unreachable!(),
                };
                let ws = self.value(*w).shape().to_vec();
                let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
                let (ho, wo) = conv_out_dims(h, wd, kh, kw, *spec)?;
                let dims = ConvDims { cin, h, w: wd, cout, kh, kw, ho, wo, spec: *spec };
                let (xv, wv) = (self.value(*x), self.value(*w));
                // conv backward touches x, w and b simultaneously; stage local
                // buffers and merge to keep the borrow checker satisfied.
                let mut dx = vec![S::ZERO; cin * h * wd];
                let mut dw = vec![S::ZERO; self.value(*w).numel()];
                let mut db = vec![S::ZERO; cout];
                kernels::conv2d_backward(xv.data(), wv.data(), g.data(), &mut dx, &mut dw, &mut db, dims);
                Self::accumulate(grads, *x, &[cin, h, wd], |d| {
                    for (o, &v) in d.iter_mut().zip(dx.iter()) {
                        *o += v;
                    }
                });
                Self::accumulate(grads, *w, &ws, |d| {
                    for (o, &v) in d.iter_mut().zip(dw.iter()) {
                        *o += v;
                    }
                });
                Self::accumulate(grads, *b, &[cout], |d| {
                    for (o, &v) in d.iter_mut().zip(db.iter()) {
                        *o += v;
                    }
                });
            }
            Op::ChwToHwc { x } => {
                let [c, h, w] = match self.value(*x).shape() {
                    [a, b, d] => [*a, *b, *d],
                    _ => unreachable!(),
                };
                let hw = h * w;
                Self::accumulate(grads, *x, &[c, h, w], |d| {
                    for ch in 0..c {
                        for p in 0..hw {
                            d[ch * hw + p] += g.data()[p * c + ch];
                        }
                    }
                });
            }
            Op::Transpose { x } => {
                let (m, n) = self.value(*x).dims2()?;
                Self::accumulate(grads, *x, &[m, n], |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[i * n + j] += g.data()[j * m + i];
                        }
                    }
                });
            }
            Op::GatherRow { table, row } => {
                let (rows, cols) = self.value(*table).dims2()?;
                let row = *row;
                Self::accumulate(grads, *table, &[rows, cols], |d| {
                    for (o, &gg) in d[row * cols..(row + 1) * cols].iter_mut().zip(g.data().iter()) {
                        *o += gg;
                    }
                });
            }
            Op::ConcatCols { parts } => {
                let total = self.value(Var(idx as u32)).dims2()?.1;
                let mut offset = 0;
                for &p in parts {
                    let (m, w) = self.value(p).dims2()?;
                    Self::accumulate(grads, p, &[m, w], |d| {
                        for i in 0..m {
                            for j in 0..w {
                                d[i * w + j] += g.data()[i * total + offset + j];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::AttnScores { keys, queries, w1 } => {
                let (m, d) = self.value(*keys).dims2()?;
                let n = self.value(*queries).dims2()?.0;
                let kv = self.value(*keys);
                let qv = self.value(*queries);
                let wv = self.value(*w1);
                let mut dk = vec![S::ZERO; m * d];
                let mut dq = vec![S::ZERO; n * d];
                let mut dw = vec![S::ZERO; d];
                for t in 0..n {
                    let q = &qv.data()[t * d..(t + 1) * d];
                    for s in 0..m {
                        let gg = g.data()[t * m + s];
                        if gg == S::ZERO {
                            continue;
                        }
                        let k = &kv.data()[s * d..(s + 1) * d];
                        for u in 0..d {
                            let z = (k[u] + q[u]).tanh();
                            let dz = gg * wv.data()[u] * (S::ONE - z * z);
                            dk[s * d + u] += dz;
                            dq[t * d + u] += dz;
                            dw[u] += gg * z;
                        }
                    }
                }
                Self::accumulate(grads, *keys, &[m, d], |dst| {
                    for (o, &v) in dst.iter_mut().zip(dk.iter()) {
                        *o += v;
                    }
                });
                Self::accumulate(grads, *queries, &[n, d], |dst| {
                    for (o, &v) in dst.iter_mut().zip(dq.iter()) {
                        *o += v;
                    }
                });
                let w1_shape = wv.shape().to_vec();
                Self::accumulate(grads, *w1, &w1_shape, |dst| {
                    for (o, &v) in dst.iter_mut().zip(dw.iter()) {
                        *o += v;
                    }
                });
            }
            Op::SeqCrossEntropy { logits, labels, supervised } => {
                let (n, k) = self.value(*logits).dims2()?;
                let lv = self.value(*logits);
                let gs = g.data()[0];
                let inv = S::ONE / S::from_f64(*supervised as f64);
                Self::accumulate(grads, *logits, &[n, k], |d| {
                    for (t, &label) in labels.iter().enumerate() {
                        let row = &lv.data()[t * k..(t + 1) * k];
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
                        for j in 0..k {
                            let p = (row[j] - max).exp() / sum;
                            let delta = if j == label { S::ONE } else { S::ZERO };
                            d[t * k + j] += gs * inv * (p - delta);
                        }
                    }
                });
            }
            Op::WeightedSum { terms } => {
                let gs = g.data()[0];
                for &(v, k) in terms {
                    Self::accumulate(grads, v, &[1], |d| {
                        d[0] += gs * k;
                    });
                }
            }
            Op::SumAll { x } => {
                let gs = g.data()[0];
                let shape = self.value(*x).shape().to_vec();
                Self::accumulate(grads, *x, &shape, |d| {
                    for o in d.iter_mut() {
                        *o += gs;
                    }
                });
            }
        }
        Ok(())
    }
}
