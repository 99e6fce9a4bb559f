//! Wengert tape: values are computed eagerly as ops are recorded, then the
//! recording is replayed in reverse to accumulate gradients.

use crate::compute::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Index of a value node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Input or parameter; nothing to propagate.
    Leaf,
    /// input [T×Cin], weight [K×Cin×Cout], bias [Cout] → [T'×Cout].
    Conv1d { input: NodeId, weight: NodeId, bias: NodeId, stride: usize, padding: usize },
    /// input [N×Din] or [Din], weight [Din×Dout], bias [Dout].
    Linear { input: NodeId, weight: NodeId, bias: NodeId },
    Relu { input: NodeId },
    /// Elementwise sum of two same-shape tensors.
    Add { a: NodeId, b: NodeId },
    /// Multiply every element by a constant.
    Scale { input: NodeId, factor: f64 },
    /// [T×(C·r)] → [(T·r)×C] with out[t·r+j, c] = in[t, j·C+c].
    PixelShuffle { input: NodeId, r: usize },
    /// [T×C] → [(T/w)×C], mean over non-overlapping windows.
    AvgPool { input: NodeId, window: usize },
    /// [T×C] → [C], mean over rows.
    MeanOverTime { input: NodeId },
    /// [T×C1] ++ broadcast [C2] → [T×(C1+C2)].
    ConcatBroadcast { seq: NodeId, vec: NodeId },
    /// Euclidean norm of the flattened difference → scalar.
    L2Distance { a: NodeId, b: NodeId },
    /// logits [K], one-hot target → scalar cross-entropy.
    SoftmaxXent { logits: NodeId, target: usize },
    /// Sum of scalar nodes → scalar.
    SumScalars { terms: Vec<NodeId> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
    grad: Option<Vec<T>>,
}

/// Reverse-mode gradient tape over `Real` scalars.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op, grad: None });
        id
    }

    /// Register a leaf (input data or parameter value).
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Accumulated gradient for a node, if any reached it during backward.
    pub fn grad(&self, id: NodeId) -> Option<&[T]> {
        self.nodes[id.0].grad.as_deref()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    // ── ops ──────────────────────────────────────────────────────────

    /// 1-D convolution over time. `input` is [T×Cin] (or [T] for Cin=1 via
    /// shape [T,1]), `weight` is [K×Cin×Cout], `bias` is [Cout].
    /// Output length T' = floor((T + 2·padding − K)/stride) + 1.
    pub fn conv1d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let (t_in, c_in) = expect_2d(self.value(input), "conv1d input")?;
        let w = self.value(weight);
        if w.shape().len() != 3 {
            return Err(Error::Shape(format!(
                "conv1d weight must be [K,Cin,Cout], got {:?}",
                w.shape()
            )));
        }
        let (k, w_cin, c_out) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        if w_cin != c_in {
            return Err(Error::Shape(format!(
                "conv1d input has {c_in} channels, weight expects {w_cin}"
            )));
        }
        let b = self.value(bias);
        if b.shape() != [c_out] {
            return Err(Error::Shape(format!(
                "conv1d bias shape {:?} does not match Cout={c_out}",
                b.shape()
            )));
        }
        if k < 1 || stride < 1 {
            return Err(Error::Argument(format!(
                "conv1d needs kernel ≥ 1 and stride ≥ 1, got kernel={k} stride={stride}"
            )));
        }
        if t_in + 2 * padding < k {
            return Err(Error::Shape(format!(
                "conv1d input too short: T={t_in} + 2·pad={padding} < kernel={k}"
            )));
        }
        let t_out = (t_in + 2 * padding - k) / stride + 1;

        let col = im2col(self.value(input).data(), t_in, c_in, k, stride, padding, t_out);
        let mut out = vec![T::zero(); t_out * c_out];
        // out = col [T'×(K·Cin)] @ weight [(K·Cin)×Cout]
        T::gemm_strided(
            t_out,
            k * c_in,
            c_out,
            T::one(),
            &col,
            (k * c_in) as isize,
            1,
            self.value(weight).data(),
            c_out as isize,
            1,
            T::zero(),
            &mut out,
        );
        let bias_data = self.value(bias).data().to_vec();
        for row in out.chunks_exact_mut(c_out) {
            for (o, bv) in row.iter_mut().zip(&bias_data) {
                *o += *bv;
            }
        }
        let value = Tensor::new(vec![t_out, c_out], out)?;
        Ok(self.push(value, Op::Conv1d { input, weight, bias, stride, padding }))
    }

    /// Affine map on the trailing dimension. `weight` is [Din×Dout].
    pub fn linear(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let inp = self.value(input);
        let d_in = inp.cols();
        let n = inp.rows();
        let w = self.value(weight);
        if w.shape().len() != 2 || w.shape()[0] != d_in {
            return Err(Error::Shape(format!(
                "linear: input trailing dim {d_in} vs weight shape {:?}",
                w.shape()
            )));
        }
        let d_out = w.shape()[1];
        let b = self.value(bias);
        if b.shape() != [d_out] {
            return Err(Error::Shape(format!(
                "linear bias shape {:?} does not match Dout={d_out}",
                b.shape()
            )));
        }
        let mut out = vec![T::zero(); n * d_out];
        T::gemm_strided(
            n,
            d_in,
            d_out,
            T::one(),
            self.value(input).data(),
            d_in as isize,
            1,
            self.value(weight).data(),
            d_out as isize,
            1,
            T::zero(),
            &mut out,
        );
        let bias_data = self.value(bias).data().to_vec();
        for row in out.chunks_exact_mut(d_out) {
            for (o, bv) in row.iter_mut().zip(&bias_data) {
                *o += *bv;
            }
        }
        let shape = if inp.shape().len() == 1 { vec![d_out] } else { vec![n, d_out] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Linear { input, weight, bias }))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let v = self.value(input);
        let data = v.data().iter().map(|&x| x.max(T::zero())).collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu { input })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape(format!(
                "add: shape {:?} vs {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let v = self.value(input);
        let f = T::from_f64(factor);
        let data = v.data().iter().map(|&x| x * f).collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale { input, factor })
    }

    /// Sub-pixel rearrangement: [T×(C·r)] → [(T·r)×C] with
    /// out[t·r+j, c] = in[t, j·C+c]. Exact inverse is `pixel_unshuffle_1d`.
    pub fn pixel_shuffle_1d(&mut self, input: NodeId, r: usize) -> Result<NodeId> {
        let (t, c_in) = expect_2d(self.value(input), "pixel_shuffle_1d input")?;
        if r == 0 || c_in % r != 0 {
            return Err(Error::Shape(format!(
                "pixel_shuffle_1d: channel count {c_in} not divisible by r={r}"
            )));
        }
        let c_out = c_in / r;
        let src = self.value(input).data();
        let mut data = vec![T::zero(); t * c_in];
        for ti in 0..t {
            for j in 0..r {
                let dst_row = ti * r + j;
                for c in 0..c_out {
                    data[dst_row * c_out + c] = src[ti * c_in + j * c_out + c];
                }
            }
        }
        let value = Tensor::new(vec![t * r, c_out], data)?;
        Ok(self.push(value, Op::PixelShuffle { input, r }))
    }

    /// Non-overlapping mean pooling over time with kernel = stride = window.
    pub fn avg_pool_1d(&mut self, input: NodeId, window: usize) -> Result<NodeId> {
        let (t, c) = expect_2d(self.value(input), "avg_pool_1d input")?;
        if window == 0 || t % window != 0 {
            return Err(Error::Shape(format!(
                "avg_pool_1d: T={t} not divisible by window={window}"
            )));
        }
        let t_out = t / window;
        let src = self.value(input).data();
        let inv = T::from_f64(1.0 / window as f64);
        let mut data = vec![T::zero(); t_out * c];
        for to in 0..t_out {
            for ti in to * window..(to + 1) * window {
                for ci in 0..c {
                    data[to * c + ci] += src[ti * c + ci];
                }
            }
            for ci in 0..c {
                data[to * c + ci] *= inv;
            }
        }
        let value = Tensor::new(vec![t_out, c], data)?;
        Ok(self.push(value, Op::AvgPool { input, window }))
    }

    /// Temporal mean pooling: [T×C] → [C].
    pub fn mean_over_time(&mut self, input: NodeId) -> Result<NodeId> {
        let (t, c) = expect_2d(self.value(input), "mean_over_time input")?;
        let src = self.value(input).data();
        let inv = T::from_f64(1.0 / t as f64);
        let mut data = vec![T::zero(); c];
        for row in src.chunks_exact(c) {
            for (d, &x) in data.iter_mut().zip(row) {
                *d += x;
            }
        }
        for d in &mut data {
            *d *= inv;
        }
        let value = Tensor::new(vec![c], data)?;
        Ok(self.push(value, Op::MeanOverTime { input }))
    }

    /// Concatenate a broadcast vector onto every row: [T×C1],[C2] → [T×(C1+C2)].
    pub fn concat_broadcast(&mut self, seq: NodeId, vec_node: NodeId) -> Result<NodeId> {
        let (t, c1) = expect_2d(self.value(seq), "concat_broadcast seq")?;
        let v = self.value(vec_node);
        if v.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "concat_broadcast vector must be 1-D, got {:?}",
                v.shape()
            )));
        }
        let c2 = v.len();
        let (s, vd) = (self.value(seq).data(), self.value(vec_node).data());
        let mut data = vec![T::zero(); t * (c1 + c2)];
        for ti in 0..t {
            let dst = &mut data[ti * (c1 + c2)..(ti + 1) * (c1 + c2)];
            dst[..c1].copy_from_slice(&s[ti * c1..(ti + 1) * c1]);
            dst[c1..].copy_from_slice(vd);
        }
        let value = Tensor::new(vec![t, c1 + c2], data)?;
        Ok(self.push(value, Op::ConcatBroadcast { seq, vec: vec_node }))
    }

    /// Euclidean norm of the flattened difference (whole-tensor L2 distance).
    pub fn l2_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape(format!(
                "l2_distance: shape {:?} vs {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let mut sum = T::zero();
        for (&x, &y) in va.data().iter().zip(vb.data()) {
            let d = x - y;
            sum += d * d;
        }
        let value = Tensor::scalar(sum.sqrt());
        Ok(self.push(value, Op::L2Distance { a, b }))
    }

    /// Cross-entropy of softmax(logits) against a one-hot target index.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let v = self.value(logits);
        if v.shape().len() != 1 || v.len() < 2 {
            return Err(Error::Shape(format!(
                "softmax_cross_entropy expects 1-D logits of length ≥ 2, got {:?}",
                v.shape()
            )));
        }
        if target >= v.len() {
            return Err(Error::Argument(format!(
                "softmax_cross_entropy target {target} out of range for K={}",
                v.len()
            )));
        }
        let data = v.data();
        let max = data.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum_exp = T::zero();
        for &x in data {
            sum_exp += (x - max).exp();
        }
        let loss = sum_exp.ln() + max - data[target];
        let value = Tensor::scalar(loss);
        Ok(self.push(value, Op::SoftmaxXent { logits, target }))
    }

    /// Sum of scalar nodes.
    pub fn sum_scalars(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        if terms.is_empty() {
            return Err(Error::Argument("sum_scalars needs at least one term".into()));
        }
        let mut total = T::zero();
        for &t in terms {
            total += self.value(t).item()?;
        }
        let value = Tensor::scalar(total);
        Ok(self.push(value, Op::SumScalars { terms: terms.to_vec() }))
    }

    // ── backward ─────────────────────────────────────────────────────

    fn accumulate(&mut self, id: NodeId, contribution: &[T]) {
        let node = &mut self.nodes[id.0];
        match &mut node.grad {
            Some(g) => {
                for (gi, &ci) in g.iter_mut().zip(contribution) {
                    *gi += ci;
                }
            }
            None => node.grad = Some(contribution.to_vec()),
        }
    }

    /// Run the reverse pass from a scalar loss node. Gradients accumulate on
    /// every node the loss depends on; read them off leaves with `grad`.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.nodes[loss.0].grad = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(d_out) = self.nodes[idx].grad.clone() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::Conv1d { input, weight, bias, stride, padding } => {
                    self.backward_conv1d(idx, input, weight, bias, stride, padding, &d_out);
                }
                Op::Linear { input, weight, bias } => {
                    self.backward_linear(idx, input, weight, bias, &d_out);
                }
                Op::Relu { input } => {
                    let x = self.nodes[input.0].value.data();
                    let d: Vec<T> = d_out
                        .iter()
                        .zip(x)
                        .map(|(&g, &xi)| if xi > T::zero() { g } else { T::zero() })
                        .collect();
                    self.accumulate(input, &d);
                }
                Op::Add { a, b } => {
                    self.accumulate(a, &d_out);
                    self.accumulate(b, &d_out);
                }
                Op::Scale { input, factor } => {
                    let f = T::from_f64(factor);
                    let d: Vec<T> = d_out.iter().map(|&g| g * f).collect();
                    self.accumulate(input, &d);
                }
                Op::PixelShuffle { input, r } => {
                    let (t_out, c_out) = (self.nodes[idx].value.shape()[0], self.nodes[idx].value.shape()[1]);
                    let t_in = t_out / r;
                    let c_in = c_out * r;
                    let mut d = vec![T::zero(); t_in * c_in];
                    for ti in 0..t_in {
                        for j in 0..r {
                            for c in 0..c_out {
                                d[ti * c_in + j * c_out + c] = d_out[(ti * r + j) * c_out + c];
                            }
                        }
                    }
                    self.accumulate(input, &d);
                }
                Op::AvgPool { input, window } => {
                    let (t_in, c) = (self.nodes[input.0].value.shape()[0], self.nodes[input.0].value.shape()[1]);
                    let inv = T::from_f64(1.0 / window as f64);
                    let mut d = vec![T::zero(); t_in * c];
                    for ti in 0..t_in {
                        let to = ti / window;
                        for ci in 0..c {
                            d[ti * c + ci] = d_out[to * c + ci] * inv;
                        }
                    }
                    self.accumulate(input, &d);
                }
                Op::MeanOverTime { input } => {
                    let (t, c) = (self.nodes[input.0].value.shape()[0], self.nodes[input.0].value.shape()[1]);
                    let inv = T::from_f64(1.0 / t as f64);
                    let mut d = vec![T::zero(); t * c];
                    for ti in 0..t {
                        for ci in 0..c {
                            d[ti * c + ci] = d_out[ci] * inv;
                        }
                    }
                    self.accumulate(input, &d);
                }
                Op::ConcatBroadcast { seq, vec: vec_node } => {
                    let (t, c1) = (self.nodes[seq.0].value.shape()[0], self.nodes[seq.0].value.shape()[1]);
                    let c2 = self.nodes[vec_node.0].value.len();
                    let mut d_seq = vec![T::zero(); t * c1];
                    let mut d_vec = vec![T::zero(); c2];
                    for ti in 0..t {
                        let row = &d_out[ti * (c1 + c2)..(ti + 1) * (c1 + c2)];
                        d_seq[ti * c1..(ti + 1) * c1].copy_from_slice(&row[..c1]);
                        for (dv, &g) in d_vec.iter_mut().zip(&row[c1..]) {
                            *dv += g;
                        }
                    }
                    self.accumulate(seq, &d_seq);
                    self.accumulate(vec_node, &d_vec);
                }
                Op::L2Distance { a, b } => {
                    let dist = self.nodes[idx].value.data()[0];
                    let g = d_out[0];
                    let tiny = T::from_f64(1e-12);
                    if dist > tiny {
                        let scale = g / dist;
                        let (va, vb) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                        let d_a: Vec<T> =
                            va.iter().zip(vb).map(|(&x, &y)| (x - y) * scale).collect();
                        let d_b: Vec<T> = d_a.iter().map(|&x| -x).collect();
                        self.accumulate(a, &d_a);
                        self.accumulate(b, &d_b);
                    }
                    // dist == 0: subgradient 0 by convention.
                }
                Op::SoftmaxXent { logits, target } => {
                    let data = self.nodes[logits.0].value.data();
                    let g = d_out[0];
                    let max = data.iter().cloned().fold(T::neg_infinity(), T::max);
                    let mut exps: Vec<T> = data.iter().map(|&x| (x - max).exp()).collect();
                    let sum: T = exps.iter().cloned().fold(T::zero(), |a, b| a + b);
                    for e in &mut exps {
                        *e = *e / sum * g;
                    }
                    exps[target] -= g;
                    self.accumulate(logits, &exps);
                }
                Op::SumScalars { terms } => {
                    for t in terms {
                        self.accumulate(t, &d_out);
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_conv1d(
        &mut self,
        out_idx: usize,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
        d_out: &[T],
    ) {
        let (t_out, c_out) = (
            self.nodes[out_idx].value.shape()[0],
            self.nodes[out_idx].value.shape()[1],
        );
        let (t_in, c_in) = (
            self.nodes[input.0].value.shape()[0],
            self.nodes[input.0].value.shape()[1],
        );
        let k = self.nodes[weight.0].value.shape()[0];

        // bias gradient: column sums of d_out
        let mut d_bias = vec![T::zero(); c_out];
        for row in d_out.chunks_exact(c_out) {
            for (db, &g) in d_bias.iter_mut().zip(row) {
                *db += g;
            }
        }
        self.accumulate(bias, &d_bias);

        // weight gradient: colᵀ [K·Cin × T'] @ d_out [T'×Cout]
        let col = im2col(
            self.nodes[input.0].value.data(),
            t_in,
            c_in,
            k,
            stride,
            padding,
            t_out,
        );
        let mut d_w = vec![T::zero(); k * c_in * c_out];
        T::gemm_strided(
            k * c_in,
            t_out,
            c_out,
            T::one(),
            &col,
            1,
            (k * c_in) as isize,
            d_out,
            c_out as isize,
            1,
            T::zero(),
            &mut d_w,
        );
        self.accumulate(weight, &d_w);

        // input gradient: d_col = d_out [T'×Cout] @ Wᵀ [Cout × K·Cin], then col2im
        let mut d_col = vec![T::zero(); t_out * k * c_in];
        T::gemm_strided(
            t_out,
            c_out,
            k * c_in,
            T::one(),
            d_out,
            c_out as isize,
            1,
            self.nodes[weight.0].value.data(),
            1,
            c_out as isize,
            T::zero(),
            &mut d_col,
        );
        let mut d_in = vec![T::zero(); t_in * c_in];
        for to in 0..t_out {
            let base = to * stride;
            for ki in 0..k {
                let ti = base + ki;
                if ti < padding || ti - padding >= t_in {
                    continue;
                }
                let ti = ti - padding;
                let src = &d_col[to * k * c_in + ki * c_in..to * k * c_in + (ki + 1) * c_in];
                let dst = &mut d_in[ti * c_in..(ti + 1) * c_in];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        self.accumulate(input, &d_in);
    }

    fn backward_linear(
        &mut self,
        _out_idx: usize,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        d_out: &[T],
    ) {
        let inp = &self.nodes[input.0].value;
        let n = inp.rows();
        let d_in_dim = inp.cols();
        let d_out_dim = self.nodes[weight.0].value.shape()[1];

        let mut d_bias = vec![T::zero(); d_out_dim];
        for row in d_out.chunks_exact(d_out_dim) {
            for (db, &g) in d_bias.iter_mut().zip(row) {
                *db += g;
            }
        }
        self.accumulate(bias, &d_bias);

        // dW = inᵀ [Din×N] @ d_out [N×Dout]
        let mut d_w = vec![T::zero(); d_in_dim * d_out_dim];
        T::gemm_strided(
            d_in_dim,
            n,
            d_out_dim,
            T::one(),
            self.nodes[input.0].value.data(),
            1,
            d_in_dim as isize,
            d_out,
            d_out_dim as isize,
            1,
            T::zero(),
            &mut d_w,
        );
        self.accumulate(weight, &d_w);

        // dIn = d_out [N×Dout] @ Wᵀ [Dout×Din]
        let mut d_in = vec![T::zero(); n * d_in_dim];
        T::gemm_strided(
            n,
            d_out_dim,
            d_in_dim,
            T::one(),
            d_out,
            d_out_dim as isize,
            1,
            self.nodes[weight.0].value.data(),
            1,
            d_out_dim as isize,
            T::zero(),
            &mut d_in,
        );
        self.accumulate(input, &d_in);
    }
}

/// Expand [T×Cin] into the convolution patch matrix [T'×(K·Cin)], columns
/// ordered kernel-position-major to line up with a [K,Cin,Cout] weight.
fn im2col<T: Real>(
    input: &[T],
    t_in: usize,
    c_in: usize,
    k: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
) -> Vec<T> {
    let mut col = vec![T::zero(); t_out * k * c_in];
    for to in 0..t_out {
        let base = to * stride;
        for ki in 0..k {
            let ti = base + ki;
            if ti < padding || ti - padding >= t_in {
                continue;
            }
            let ti = ti - padding;
            let dst = &mut col[to * k * c_in + ki * c_in..to * k * c_in + (ki + 1) * c_in];
            dst.copy_from_slice(&input[ti * c_in..(ti + 1) * c_in]);
        }
    }
    col
}

fn expect_2d<T: Real>(t: &Tensor<T>, what: &str) -> Result<(usize, usize)> {
    if t.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "{what} must be 2-D [T×C], got {:?}",
            t.shape()
        )));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

/// Exact inverse of `pixel_shuffle_1d` on plain tensors (test/oracle helper).
pub fn pixel_unshuffle_1d<T: Real>(t: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (t_out, c_out) = expect_2d(t, "pixel_unshuffle_1d input")?;
    if r == 0 || t_out % r != 0 {
        return Err(Error::Shape(format!(
            "pixel_unshuffle_1d: T={t_out} not divisible by r={r}"
        )));
    }
    let t_in = t_out / r;
    let c_in = c_out * r;
    let src = t.data();
    let mut data = vec![T::zero(); t_in * c_in];
    for ti in 0..t_in {
        for j in 0..r {
            for c in 0..c_out {
                data[ti * c_in + j * c_out + c] = src[(ti * r + j) * c_out + c];
            }
        }
    }
    Tensor::new(vec![t_in, c_in], data)
}
