//! Reverse-mode automatic differentiation over dense 2-D tensors.
//!
//! A [`Tape`] is an append-only arena of nodes. Every operation evaluates
//! eagerly, stores its value, and records which nodes it read so that
//! [`Tape::backward`] can replay the graph in reverse. Nodes are appended in
//! evaluation order, which is already a topological order.
//!
//! Backward passes accumulate into the `grad` of leaves that require
//! gradients and never overwrite them; intermediate gradients live only for
//! the duration of one pass. Running `backward` twice therefore doubles every
//! leaf gradient.

use crate::counter::{self, MacCategory};
use crate::error::{Result, TensorError};
use crate::fourier::fourier_mix_counted;
use crate::scalar::Scalar;
use crate::tensor::{dot, gemm, gemm_at, gemm_bt, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How the right operand of a binary elementwise op is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// `1×cols` right operand repeated over every row.
    Row,
    /// `1×1` right operand.
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Relu,
}

#[derive(Debug)]
struct AttentionCache<T> {
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    window: usize,
    scale: T,
    /// Row-softmax probabilities for each (head, segment), segment-major.
    probs: Vec<Vec<T>>,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Transpose(Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, T),
    Gelu(Var),
    Relu(Var),
    LogSoftmaxRows(Var),
    FourierMix(Var),
    NormalizeRows { input: Var, inv_std: Vec<T> },
    PoolRows { input: Var, ranges: Vec<(usize, usize)> },
    WeightedSum { input: Var, weights: Tensor<T> },
    ScaledConst { coeff: Var, index: usize, matrix: Tensor<T> },
    ConcatRows(Vec<Var>),
    SliceRows { input: Var, start: usize },
    Attention(Box<AttentionCache<T>>),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
    category: MacCategory,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

const GELU_COEFF: f64 = 0.044_715;

fn gelu_scalar<T: Scalar>(x: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let u = c * (x + T::lit(GELU_COEFF) * x * x * x);
    T::lit(0.5) * x * (T::one() + u.tanh())
}

fn gelu_derivative<T: Scalar>(x: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let u = c * (x + T::lit(GELU_COEFF) * x * x * x);
    let t = u.tanh();
    let du = c * (T::one() + T::lit(3.0 * GELU_COEFF) * x * x);
    T::lit(0.5) * (T::one() + t) + T::lit(0.5) * x * (T::one() - t * t) * du
}

/// Applies an activation outside any tape.
pub fn activate<T: Scalar>(kind: Activation, x: T) -> T {
    match kind {
        Activation::Gelu => gelu_scalar(x),
        Activation::Relu => x.max(T::zero()),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Trainable input.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Clears every accumulated leaf gradient.
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
            category: counter::active(),
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn broadcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok(Broadcast::Same)
        } else if sb == (1, 1) {
            Ok(Broadcast::Scalar)
        } else if sb.0 == 1 && sb.1 == sa.1 {
            Ok(Broadcast::Row)
        } else {
            Err(TensorError::Shape {
                op,
                left: sa,
                right: sb,
            })
        }
    }

    fn binary(&self, a: Var, b: Var, kind: Broadcast, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let av = self.value(a);
        let bv = self.value(b);
        let cols = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match kind {
                    Broadcast::Same => bv.data()[i],
                    Broadcast::Row => bv.data()[i % cols],
                    Broadcast::Scalar => bv.data()[0],
                };
                f(x, y)
            })
            .collect();
        Tensor::from_vec(av.rows(), cols, data).expect("shape preserved")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, p) = self.shape(b);
        if k != k2 {
            return Err(TensorError::Shape {
                op: "matmul",
                left: (m, k),
                right: (k2, p),
            });
        }
        let data = gemm(self.value(a).data(), self.value(b).data(), m, k, p, counter::active());
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::from_vec(m, p, data)?, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (p, k2) = self.shape(b);
        if k != k2 {
            return Err(TensorError::Shape {
                op: "matmul_bt",
                left: (m, k),
                right: (p, k2),
            });
        }
        let data = gemm_bt(self.value(a).data(), self.value(b).data(), m, k, p, counter::active());
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::from_vec(m, p, data)?, Op::MatMulBt(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast_kind("add", a, b)?;
        let value = self.binary(a, b, kind, |x, y| x + y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b, kind), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast_kind("sub", a, b)?;
        let value = self.binary(a, b, kind, |x, y| x - y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b, kind), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast_kind("mul", a, b)?;
        let value = self.binary(a, b, kind, |x, y| x * y);
        counter::record(counter::active(), value.len() as u64);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b, kind), rg))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let value = self.value(a).map(|x| x * factor);
        counter::record(counter::active(), value.len() as u64);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, factor), rg)
    }

    /// GELU, tanh approximation:
    /// `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(gelu_scalar);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Gelu(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(T::zero()));
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        match kind {
            Activation::Gelu => self.gelu(a),
            Activation::Relu => self.relu(a),
        }
    }

    /// Row-wise `x - logsumexp(x)`, stabilized by subtracting the row max.
    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..x.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let shift = if max.is_finite() { max } else { T::zero() };
            let lse = row.iter().map(|&v| (v - shift).exp()).sum::<T>().ln() + shift;
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let rg = self.any_grad(&[a]);
        self.push(out, Op::LogSoftmaxRows(a), rg)
    }

    pub fn fourier_mix(&mut self, a: Var) -> Var {
        let value = fourier_mix_counted(self.value(a), counter::active());
        let rg = self.any_grad(&[a]);
        self.push(value, Op::FourierMix(a), rg)
    }

    /// Row standardization `(x - mean) / sqrt(var + eps)` without affine terms.
    pub fn normalize_rows(&mut self, a: Var, eps: T) -> Var {
        let x = self.value(a);
        let cols = x.cols();
        let n = T::lit(cols as f64);
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = out.row_mut(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
            inv_std.push(inv);
        }
        counter::record(counter::active(), 2 * out.len() as u64);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::NormalizeRows { input: a, inv_std }, rg)
    }

    /// One output row per `[start, end)` range: the mean of those input rows.
    pub fn pool_rows(&mut self, a: Var, ranges: &[(usize, usize)]) -> Result<Var> {
        let x = self.value(a);
        let mut out = Tensor::zeros(ranges.len(), x.cols());
        for (i, &(start, end)) in ranges.iter().enumerate() {
            if start >= end || end > x.rows() {
                return Err(TensorError::Index {
                    op: "pool_rows",
                    index: end,
                    bound: x.rows(),
                });
            }
            let inv = T::one() / T::lit((end - start) as f64);
            let dst = out.row_mut(i);
            for r in start..end {
                for (o, &v) in dst.iter_mut().zip(x.row(r)) {
                    *o += v;
                }
            }
            dst.iter_mut().for_each(|o| *o *= inv);
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            out,
            Op::PoolRows {
                input: a,
                ranges: ranges.to_vec(),
            },
            rg,
        ))
    }

    /// `Σ a ⊙ weights` as a 1×1 tensor; `weights` is a constant.
    pub fn weighted_sum(&mut self, a: Var, weights: Tensor<T>) -> Result<Var> {
        let x = self.value(a);
        if x.shape() != weights.shape() {
            return Err(TensorError::Shape {
                op: "weighted_sum",
                left: x.shape(),
                right: weights.shape(),
            });
        }
        let s = dot(x.data(), weights.data());
        counter::record(counter::active(), x.len() as u64);
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum { input: a, weights },
            rg,
        ))
    }

    /// `coeff[index] · matrix`, differentiable in the selected coefficient.
    pub fn scaled_const(&mut self, coeff: Var, index: usize, matrix: Tensor<T>) -> Result<Var> {
        let c = self.value(coeff);
        if index >= c.len() {
            return Err(TensorError::Index {
                op: "scaled_const",
                index,
                bound: c.len(),
            });
        }
        let factor = c.data()[index];
        let value = matrix.map(|m| m * factor);
        counter::record(counter::active(), value.len() as u64);
        let rg = self.any_grad(&[coeff]);
        Ok(self.push(value, Op::ScaledConst { coeff, index, matrix }, rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(TensorError::Shape {
                    op: "concat_rows",
                    left: (rows, cols),
                    right: v.shape(),
                });
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let rg = self.any_grad(parts);
        Ok(self.push(Tensor::from_vec(rows, cols, data)?, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        if start > end || end > x.rows() {
            return Err(TensorError::Index {
                op: "slice_rows",
                index: end,
                bound: x.rows(),
            });
        }
        let cols = x.cols();
        let value = Tensor::from_vec(end - start, cols, x.data()[start * cols..end * cols].to_vec())?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::SliceRows { input: a, start }, rg))
    }

    /// Multi-head scaled dot-product self-attention restricted to disjoint
    /// segments of `window` rows. `q`, `k`, `v` are `n×d` with `d` divisible
    /// by `heads`; head `h` reads columns `[h·d/heads, (h+1)·d/heads)`.
    pub fn windowed_attention(&mut self, q: Var, k: Var, v: Var, heads: usize, window: usize) -> Result<Var> {
        let (n, d) = self.shape(q);
        for other in [k, v] {
            if self.shape(other) != (n, d) {
                return Err(TensorError::Shape {
                    op: "windowed_attention",
                    left: (n, d),
                    right: self.shape(other),
                });
            }
        }
        if heads == 0 || d % heads != 0 || window == 0 {
            return Err(TensorError::Invalid(format!(
                "attention needs window >= 1 and width {d} divisible by {heads} heads"
            )));
        }
        let dh = d / heads;
        let scale = T::one() / T::lit(dh as f64).sqrt();
        let cat = counter::active();
        let qh = split_heads(self.value(q), heads);
        let kh = split_heads(self.value(k), heads);
        let vh = split_heads(self.value(v), heads);
        let mut out = Tensor::zeros(n, d);
        let mut probs = Vec::new();
        for (h, ((qm, km), vm)) in qh.iter().zip(&kh).zip(&vh).enumerate() {
            for (s0, s1) in segments(n, window) {
                let s = s1 - s0;
                let qs = &qm[s0 * dh..s1 * dh];
                let ks = &km[s0 * dh..s1 * dh];
                let vs = &vm[s0 * dh..s1 * dh];
                let mut p = gemm_bt(qs, ks, s, dh, s, cat);
                for row in p.chunks_mut(s) {
                    let max = row.iter().copied().fold(T::neg_infinity(), T::max) * scale;
                    let mut total = T::zero();
                    for x in row.iter_mut() {
                        *x = (*x * scale - max).exp();
                        total += *x;
                    }
                    row.iter_mut().for_each(|x| *x /= total);
                }
                let o = gemm(&p, vs, s, s, dh, cat);
                for (i, orow) in o.chunks(dh).enumerate() {
                    out.row_mut(s0 + i)[h * dh..(h + 1) * dh].copy_from_slice(orow);
                }
                probs.push(p);
            }
        }
        let rg = self.any_grad(&[q, k, v]);
        let cache = AttentionCache {
            q,
            k,
            v,
            heads,
            window,
            scale,
            probs,
        };
        Ok(self.push(out, Op::Attention(Box::new(cache)), rg))
    }

    /// Reverse pass from `output`, seeded with ones.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let seed = {
            let (r, c) = self.shape(output);
            Tensor::ones(r, c)
        };
        self.backward_with(output, seed)
    }

    /// Reverse pass from `output` with an explicit upstream gradient.
    pub fn backward_with(&mut self, output: Var, seed: Tensor<T>) -> Result<()> {
        if seed.shape() != self.shape(output) {
            return Err(TensorError::Shape {
                op: "backward",
                left: self.shape(output),
                right: seed.shape(),
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(acc) => acc.add_assign(&g)?,
                    None => node.grad = Some(g),
                }
                continue;
            }
            let contributions = self.local_grads(i, &g)?;
            for (var, contribution) in contributions {
                if !self.nodes[var.0].requires_grad {
                    continue;
                }
                match &mut grads[var.0] {
                    Some(acc) => acc.add_assign(&contribution)?,
                    slot @ None => *slot = Some(contribution),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let node = &self.nodes[i];
        let cat = node.category;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let p = self.shape(*b).1;
                if needs(*a) {
                    let da = gemm_bt(g.data(), self.value(*b).data(), m, p, k, cat);
                    out.push((*a, Tensor::from_vec(m, k, da)?));
                }
                if needs(*b) {
                    let db = gemm_at(self.value(*a).data(), g.data(), m, k, p, cat);
                    out.push((*b, Tensor::from_vec(k, p, db)?));
                }
            }
            Op::MatMulBt(a, b) => {
                let (m, k) = self.shape(*a);
                let p = self.shape(*b).0;
                if needs(*a) {
                    let da = gemm(g.data(), self.value(*b).data(), m, p, k, cat);
                    out.push((*a, Tensor::from_vec(m, k, da)?));
                }
                if needs(*b) {
                    let db = gemm_at(g.data(), self.value(*a).data(), m, p, k, cat);
                    out.push((*b, Tensor::from_vec(p, k, db)?));
                }
            }
            Op::Transpose(a) => out.push((*a, g.transpose())),
            Op::Add(a, b, kind) => {
                out.push((*a, g.clone()));
                if needs(*b) {
                    out.push((*b, reduce_broadcast(g, *kind)));
                }
            }
            Op::Sub(a, b, kind) => {
                out.push((*a, g.clone()));
                if needs(*b) {
                    out.push((*b, reduce_broadcast(&g.map(|x| -x), *kind)));
                }
            }
            Op::Mul(a, b, kind) => {
                if needs(*a) {
                    let gb = self.binary_with(g, *b, *kind, |x, y| x * y);
                    out.push((*a, gb));
                }
                if needs(*b) {
                    let av = self.value(*a);
                    let prod = Tensor::from_vec(
                        g.rows(),
                        g.cols(),
                        g.data().iter().zip(av.data()).map(|(&x, &y)| x * y).collect(),
                    )?;
                    out.push((*b, reduce_broadcast(&prod, *kind)));
                }
                counter::record(cat, 2 * g.len() as u64);
            }
            Op::Scale(a, factor) => {
                let f = *factor;
                out.push((*a, g.map(|x| x * f)));
                counter::record(cat, g.len() as u64);
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                out.push((*a, zip_map(g, x, |gi, xi| gi * gelu_derivative(xi))));
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                out.push((*a, zip_map(g, x, |gi, xi| if xi > T::zero() { gi } else { T::zero() })));
            }
            Op::LogSoftmaxRows(a) => {
                let y = &node.value;
                let mut dx = g.clone();
                for r in 0..y.rows() {
                    let total: T = g.row(r).iter().copied().sum();
                    for (d, &yv) in dx.row_mut(r).iter_mut().zip(y.row(r)) {
                        *d -= yv.exp() * total;
                    }
                }
                out.push((*a, dx));
            }
            Op::FourierMix(a) => out.push((*a, fourier_mix_counted(g, cat))),
            Op::NormalizeRows { input, inv_std } => {
                let y = &node.value;
                let n = T::lit(y.cols() as f64);
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let gr = g.row(r);
                    let yr = y.row(r);
                    let mean_g = gr.iter().copied().sum::<T>() / n;
                    let mean_gy = dot(gr, yr) / n;
                    for ((d, &gv), &yv) in dx.row_mut(r).iter_mut().zip(gr).zip(yr) {
                        *d = inv_std[r] * (gv - mean_g - yv * mean_gy);
                    }
                }
                counter::record(cat, 3 * g.len() as u64);
                out.push((*input, dx));
            }
            Op::PoolRows { input, ranges } => {
                let (rows, cols) = self.shape(*input);
                let mut dx = Tensor::zeros(rows, cols);
                for (i, &(start, end)) in ranges.iter().enumerate() {
                    let inv = T::one() / T::lit((end - start) as f64);
                    for r in start..end {
                        for (d, &gv) in dx.row_mut(r).iter_mut().zip(g.row(i)) {
                            *d += gv * inv;
                        }
                    }
                }
                out.push((*input, dx));
            }
            Op::WeightedSum { input, weights } => {
                let g0 = g.data()[0];
                out.push((*input, weights.map(|w| w * g0)));
                counter::record(cat, weights.len() as u64);
            }
            Op::ScaledConst { coeff, index, matrix } => {
                let (r, c) = self.shape(*coeff);
                let mut dc = Tensor::zeros(r, c);
                dc.data_mut()[*index] = dot(g.data(), matrix.data());
                counter::record(cat, matrix.len() as u64);
                out.push((*coeff, dc));
            }
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    let slice = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                    out.push((p, Tensor::from_vec(rows, cols, slice)?));
                    offset += rows;
                }
            }
            Op::SliceRows { input, start } => {
                let (rows, cols) = self.shape(*input);
                let mut dx = Tensor::zeros(rows, cols);
                dx.data_mut()[start * cols..start * cols + g.len()].copy_from_slice(g.data());
                out.push((*input, dx));
            }
            Op::Attention(cache) => out.extend(self.attention_grads(cache, g, cat)?),
        }
        Ok(out)
    }

    fn binary_with(&self, g: &Tensor<T>, b: Var, kind: Broadcast, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let bv = self.value(b);
        let cols = g.cols();
        let data = g
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match kind {
                    Broadcast::Same => bv.data()[i],
                    Broadcast::Row => bv.data()[i % cols],
                    Broadcast::Scalar => bv.data()[0],
                };
                f(x, y)
            })
            .collect();
        Tensor::from_vec(g.rows(), cols, data).expect("shape preserved")
    }

    fn attention_grads(&self, cache: &AttentionCache<T>, g: &Tensor<T>, cat: MacCategory) -> Result<Vec<(Var, Tensor<T>)>> {
        let (n, d) = self.shape(cache.q);
        let heads = cache.heads;
        let dh = d / heads;
        let scale = cache.scale;
        let qh = split_heads(self.value(cache.q), heads);
        let kh = split_heads(self.value(cache.k), heads);
        let vh = split_heads(self.value(cache.v), heads);
        let gh = split_heads(g, heads);
        let mut dq = vec![vec![T::zero(); n * dh]; heads];
        let mut dk = vec![vec![T::zero(); n * dh]; heads];
        let mut dv = vec![vec![T::zero(); n * dh]; heads];
        let segs = segments(n, cache.window);
        let mut probs = cache.probs.iter();
        let mut dp_row = Vec::new();
        let mut macs = 0u64;
        for h in 0..heads {
            for &(s0, s1) in &segs {
                let s = s1 - s0;
                let p = probs.next().expect("one probability block per head and segment");
                let qs = &qh[h][s0 * dh..s1 * dh];
                let ks = &kh[h][s0 * dh..s1 * dh];
                let vs = &vh[h][s0 * dh..s1 * dh];
                let gs = &gh[h][s0 * dh..s1 * dh];
                // dV = Pᵀ · dO
                let dvs = gemm_at(p, gs, s, s, dh, cat);
                for (acc, x) in dv[h][s0 * dh..s1 * dh].iter_mut().zip(dvs) {
                    *acc += x;
                }
                for i in 0..s {
                    let go = &gs[i * dh..(i + 1) * dh];
                    let prow = &p[i * s..(i + 1) * s];
                    dp_row.clear();
                    dp_row.extend((0..s).map(|j| dot(go, &vs[j * dh..(j + 1) * dh])));
                    let inner = dot(&dp_row, prow);
                    let qi = &qs[i * dh..(i + 1) * dh];
                    let dq_row = &mut dq[h][(s0 + i) * dh..(s0 + i + 1) * dh];
                    for j in 0..s {
                        let ds = prow[j] * (dp_row[j] - inner) * scale;
                        if ds == T::zero() {
                            continue;
                        }
                        let kj = &ks[j * dh..(j + 1) * dh];
                        for (acc, &kv) in dq_row.iter_mut().zip(kj) {
                            *acc += ds * kv;
                        }
                        let dk_row = &mut dk[h][(s0 + j) * dh..(s0 + j + 1) * dh];
                        for (acc, &qv) in dk_row.iter_mut().zip(qi) {
                            *acc += ds * qv;
                        }
                    }
                }
                macs += (3 * s * s * dh + s * s) as u64;
            }
        }
        counter::record(cat, macs);
        Ok(vec![
            (cache.q, merge_heads(&dq, n, d)),
            (cache.k, merge_heads(&dk, n, d)),
            (cache.v, merge_heads(&dv, n, d)),
        ])
    }
}

/// Disjoint `[start, end)` row ranges of at most `window` rows covering `0..n`.
pub fn segments(n: usize, window: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(window))
        .map(|s| (s * window, ((s + 1) * window).min(n)))
        .collect()
}

fn split_heads<T: Scalar>(x: &Tensor<T>, heads: usize) -> Vec<Vec<T>> {
    let (n, d) = x.shape();
    let dh = d / heads;
    (0..heads)
        .map(|h| {
            let mut m = Vec::with_capacity(n * dh);
            for r in 0..n {
                m.extend_from_slice(&x.row(r)[h * dh..(h + 1) * dh]);
            }
            m
        })
        .collect()
}

fn merge_heads<T: Scalar>(parts: &[Vec<T>], n: usize, d: usize) -> Tensor<T> {
    let dh = d / parts.len();
    let mut out = Tensor::zeros(n, d);
    for (h, part) in parts.iter().enumerate() {
        for r in 0..n {
            out.row_mut(r)[h * dh..(h + 1) * dh].copy_from_slice(&part[r * dh..(r + 1) * dh]);
        }
    }
    out
}

fn reduce_broadcast<T: Scalar>(g: &Tensor<T>, kind: Broadcast) -> Tensor<T> {
    match kind {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => Tensor::scalar(g.sum()),
        Broadcast::Row => {
            let mut acc = Tensor::zeros(1, g.cols());
            for r in 0..g.rows() {
                for (a, &v) in acc.data_mut().iter_mut().zip(g.row(r)) {
                    *a += v;
                }
            }
            acc
        }
    }
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("shape preserved")
}
