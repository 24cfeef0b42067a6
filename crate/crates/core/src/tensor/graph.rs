use super::conv::{conv_same, conv_same_backward, gemm};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Square(Var),
    Sqrt(Var),
    MatMul(Var, Var),
    Conv(Var, Var),
    Reshape(Var),
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Concat {
        xs: Vec<Var>,
        axis: usize,
    },
    Repeat {
        x: Var,
        axis: usize,
        times: usize,
    },
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    ChannelAffine {
        x: Var,
        scale: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Per-channel statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// A tape of tensor operations. Values are computed eagerly as ops are
/// recorded; [`Graph::backward`] replays the tape in reverse.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input tensor. Whether it receives a gradient is decided
    /// by the `wrt` set passed to [`Graph::backward`].
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        Ok(self.push(value, op))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push_checked("add", v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push_checked("sub", v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push_checked("mul", v, Op::Mul(a, b))
    }

    /// Adds a per-channel bias `b: (c)` along the last axis of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape();
        let bs = self.value(b).shape();
        let c = *xs.last().unwrap_or(&0);
        if bs != [c] {
            return Err(Error::shape("add_bias", &[c], bs));
        }
        let bias = self.value(b).data().to_vec();
        let mut v = self.value(x).clone();
        for chunk in v.data_mut().chunks_mut(c) {
            for (o, bb) in chunk.iter_mut().zip(&bias) {
                *o += bb;
            }
        }
        self.push_checked("add_bias", v, Op::AddBias(x, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let v = self.value(x).map(|a| a * s);
        self.push_checked("scale", v, Op::Scale(x, s))
    }

    /// `x + c` for a constant scalar `c`.
    pub fn offset(&mut self, x: Var, c: f64) -> Result<Var> {
        let v = self.value(x).map(|a| a + c);
        self.push_checked("offset", v, Op::Offset(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(sigmoid);
        self.push_checked("sigmoid", v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(f64::tanh);
        self.push_checked("tanh", v, Op::Tanh(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let v = self.value(x).map(|a| if a >= 0.0 { a } else { slope * a });
        self.push_checked("leaky_relu", v, Op::LeakyRelu(x, slope))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(f64::exp);
        self.push_checked("exp", v, Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|a| a * a);
        self.push_checked("square", v, Op::Square(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        if self.value(x).data().iter().any(|&a| a < 0.0) {
            return Err(Error::NonFinite("sqrt"));
        }
        let v = self.value(x).map(f64::sqrt);
        self.push_checked("sqrt", v, Op::Sqrt(x))
    }

    /// `(r, k) · (k, n) -> (r, n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (r, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; r * n];
        gemm(r, k, n, self.value(a).data(), false, self.value(b).data(), false, 0.0, &mut out);
        let v = Tensor::new(vec![r, n], out)?;
        self.push_checked("matmul", v, Op::MatMul(a, b))
    }

    /// Same-padded stride-1 cross-correlation; see [`conv_same`].
    pub fn conv(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let v = conv_same(self.value(x), self.value(kernel))?;
        self.push_checked("conv", v, Op::Conv(x, kernel))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape)?;
        Ok(self.push(v, Op::Reshape(x)))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {}) on axis {axis} of shape {shape:?}",
                start + len
            )));
        }
        let (outer, ax, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * ax + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = len;
        let v = Tensor::new(new_shape, out)?;
        Ok(self.push(v, Op::Slice { x, axis, start }))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let base_shape = self.value(*first).shape().to_vec();
        if axis >= base_shape.len() {
            return Err(Error::InvalidArgument(format!(
                "concat axis {axis} out of range for {base_shape:?}"
            )));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.value(v).shape();
            let compatible = s.len() == base_shape.len()
                && s.iter()
                    .zip(&base_shape)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &base_shape, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base_shape, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let t = self.value(v);
                let ax = t.shape()[axis];
                out.extend_from_slice(&t.data()[o * ax * inner..(o + 1) * ax * inner]);
            }
        }
        let mut shape = base_shape;
        shape[axis] = total;
        let v = Tensor::new(shape, out)?;
        Ok(self.push(v, Op::Concat { xs: xs.to_vec(), axis }))
    }

    /// Inserts a new axis at `axis` holding `times` copies of the trailing block.
    pub fn repeat(&mut self, x: Var, axis: usize, times: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if axis > shape.len() {
            return Err(Error::InvalidArgument(format!(
                "repeat axis {axis} out of range for {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis..].iter().product();
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * times * inner);
        for o in 0..outer {
            for _ in 0..times {
                out.extend_from_slice(&src[o * inner..(o + 1) * inner]);
            }
        }
        let mut new_shape = shape;
        new_shape.insert(axis, times);
        let v = Tensor::new(new_shape, out)?;
        Ok(self.push(v, Op::Repeat { x, axis, times }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(x).sum());
        self.push_checked("sum", v, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let v = Tensor::scalar(t.sum() / t.len().max(1) as f64);
        self.push_checked("mean", v, Op::Mean(x))
    }

    /// Sums everything except the leading axis: `(b, ...) -> (b)`.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let b = *t.shape().first().ok_or(Error::InvalidArgument(
            "sum_rows on a scalar".into(),
        ))?;
        let per = t.len() / b.max(1);
        let out = (0..b)
            .map(|i| t.data()[i * per..(i + 1) * per].iter().sum())
            .collect();
        let v = Tensor::new(vec![b], out)?;
        self.push_checked("sum_rows", v, Op::SumRows(x))
    }

    /// Training-mode batch norm over every axis except the last (channel)
    /// axis. Returns the normalized output and the batch statistics used.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats)> {
        let t = self.value(x);
        let c = *t.shape().last().unwrap_or(&0);
        for p in [gamma, beta] {
            if self.value(p).shape() != [c] {
                return Err(Error::shape("batch_norm", &[c], self.value(p).shape()));
            }
        }
        let n = t.len() / c.max(1);
        if n == 0 {
            return Err(Error::InvalidArgument("batch_norm over an empty batch".into()));
        }
        let mut mean = vec![0.0; c];
        for row in t.data().chunks(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; c];
        for row in t.data().chunks(c) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = t.clone();
        for row in xhat.data_mut().chunks_mut(c) {
            for ((v, m), s) in row.iter_mut().zip(&mean).zip(&inv_std) {
                *v = (*v - m) * s;
            }
        }
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut y = xhat.clone();
        for row in y.data_mut().chunks_mut(c) {
            for ((v, gg), bb) in row.iter_mut().zip(g).zip(b) {
                *v = *v * gg + bb;
            }
        }
        let var_out = self.push_checked(
            "batch_norm",
            y,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )?;
        Ok((var_out, BatchStats { mean, var }))
    }

    /// Fixed per-channel affine map `x · scale + shift` (inference-mode batch norm).
    pub fn channel_affine(&mut self, x: Var, scale: &[f64], shift: &[f64]) -> Result<Var> {
        let c = *self.value(x).shape().last().unwrap_or(&0);
        if scale.len() != c || shift.len() != c {
            return Err(Error::shape("channel_affine", &[c], &[scale.len()]));
        }
        let mut v = self.value(x).clone();
        for row in v.data_mut().chunks_mut(c) {
            for ((a, s), h) in row.iter_mut().zip(scale).zip(shift) {
                *a = *a * s + h;
            }
        }
        self.push_checked(
            "channel_affine",
            v,
            Op::ChannelAffine {
                x,
                scale: scale.to_vec(),
            },
        )
    }

    fn inputs(op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::Conv(a, b) => {
                vec![*a, *b]
            }
            Op::AddBias(x, b) => vec![*x, *b],
            Op::Scale(x, _)
            | Op::Offset(x)
            | Op::Sigmoid(x)
            | Op::Tanh(x)
            | Op::LeakyRelu(x, _)
            | Op::Exp(x)
            | Op::Square(x)
            | Op::Sqrt(x)
            | Op::Reshape(x)
            | Op::Slice { x, .. }
            | Op::Repeat { x, .. }
            | Op::Sum(x)
            | Op::Mean(x)
            | Op::SumRows(x)
            | Op::ChannelAffine { x, .. } => vec![*x],
            Op::Concat { xs, .. } => xs.clone(),
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
        }
    }

    /// Reverse-mode gradients of the scalar `loss` with respect to `wrt`.
    ///
    /// Only nodes on a path from some `wrt` leaf to `loss` are visited, so
    /// inputs outside `wrt` behave as constants.
    pub fn backward(&self, loss: Var, wrt: &[Var]) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = loss.0 + 1;
        let mut relevant = vec![false; n];
        for w in wrt {
            if w.0 < n {
                relevant[w.0] = true;
            }
        }
        for i in 0..n {
            if !relevant[i] {
                relevant[i] = Self::inputs(&self.nodes[i].op).iter().any(|v| relevant[v.0]);
            }
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if !relevant[loss.0] {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for i in (0..n).rev() {
            if !relevant[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |v: Var, t: Tensor| {
                if relevant[v.0] {
                    match &mut grads[v.0] {
                        Some(existing) => existing.add_assign(&t),
                        slot @ None => *slot = Some(t),
                    }
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|x| -x));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    if relevant[a.0] {
                        acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                    }
                    if relevant[b.0] {
                        acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
                    }
                }
                Op::AddBias(x, b) => {
                    if relevant[b.0] {
                        let c = self.value(*b).len();
                        let mut gb = vec![0.0; c];
                        for row in g.data().chunks(c) {
                            for (s, v) in gb.iter_mut().zip(row) {
                                *s += v;
                            }
                        }
                        acc(*b, Tensor::new(vec![c], gb)?);
                    }
                    acc(*x, g);
                }
                Op::Scale(x, s) => acc(*x, g.map(|v| v * s)),
                Op::Offset(x) => acc(*x, g),
                Op::Sigmoid(x) => acc(*x, g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y))),
                Op::Tanh(x) => acc(*x, g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y))),
                Op::LeakyRelu(x, slope) => acc(
                    *x,
                    g.zip_map(self.value(*x), |gv, a| if a >= 0.0 { gv } else { gv * slope }),
                ),
                Op::Exp(x) => acc(*x, g.zip_map(&node.value, |gv, y| gv * y)),
                Op::Square(x) => acc(*x, g.zip_map(self.value(*x), |gv, a| 2.0 * gv * a)),
                Op::Sqrt(x) => acc(
                    *x,
                    g.zip_map(&node.value, |gv, y| if y > 0.0 { 0.5 * gv / y } else { 0.0 }),
                ),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (r, k, nn) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    if relevant[a.0] {
                        let mut ga = vec![0.0; r * k];
                        gemm(r, nn, k, g.data(), false, tb.data(), true, 0.0, &mut ga);
                        acc(*a, Tensor::new(vec![r, k], ga)?);
                    }
                    if relevant[b.0] {
                        let mut gb = vec![0.0; k * nn];
                        gemm(k, r, nn, ta.data(), true, g.data(), false, 0.0, &mut gb);
                        acc(*b, Tensor::new(vec![k, nn], gb)?);
                    }
                }
                Op::Conv(x, k) => {
                    let (gx, gk) = conv_same_backward(
                        self.value(*x),
                        self.value(*k),
                        &g,
                        relevant[x.0],
                        relevant[k.0],
                    )?;
                    if let Some(gx) = gx {
                        acc(*x, gx);
                    }
                    if let Some(gk) = gk {
                        acc(*k, gk);
                    }
                }
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    acc(*x, g.reshape(&shape)?);
                }
                Op::Slice { x, axis, start } => {
                    let shape = self.value(*x).shape().to_vec();
                    let (outer, ax, inner) = split_axis(&shape, *axis);
                    let len = node.value.shape()[*axis];
                    let mut gx = Tensor::zeros(&shape);
                    for o in 0..outer {
                        let dst = (o * ax + start) * inner;
                        gx.data_mut()[dst..dst + len * inner]
                            .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
                    }
                    acc(*x, gx);
                }
                Op::Concat { xs, axis } => {
                    let total = node.value.shape()[*axis];
                    let (outer, _, inner) = split_axis(node.value.shape(), *axis);
                    let mut offset = 0;
                    for &v in xs {
                        let shape = self.value(v).shape().to_vec();
                        let ax = shape[*axis];
                        if relevant[v.0] {
                            let mut gv = Vec::with_capacity(outer * ax * inner);
                            for o in 0..outer {
                                let src = (o * total + offset) * inner;
                                gv.extend_from_slice(&g.data()[src..src + ax * inner]);
                            }
                            acc(v, Tensor::new(shape, gv)?);
                        }
                        offset += ax;
                    }
                }
                Op::Repeat { x, axis, times } => {
                    let shape = self.value(*x).shape().to_vec();
                    let outer: usize = shape[..*axis].iter().product();
                    let inner: usize = shape[*axis..].iter().product();
                    let mut gx = Tensor::zeros(&shape);
                    for o in 0..outer {
                        for t in 0..*times {
                            let src = (o * times + t) * inner;
                            for (d, s) in gx.data_mut()[o * inner..(o + 1) * inner]
                                .iter_mut()
                                .zip(&g.data()[src..src + inner])
                            {
                                *d += s;
                            }
                        }
                    }
                    acc(*x, gx);
                }
                Op::Sum(x) => {
                    let s = g.item();
                    acc(*x, Tensor::full(self.value(*x).shape(), s));
                }
                Op::Mean(x) => {
                    let t = self.value(*x);
                    let s = g.item() / t.len().max(1) as f64;
                    acc(*x, Tensor::full(t.shape(), s));
                }
                Op::SumRows(x) => {
                    let t = self.value(*x);
                    let b = t.shape()[0];
                    let per = t.len() / b.max(1);
                    let gx = Tensor::from_fn(t.shape(), |i| g.data()[i / per]);
                    acc(*x, gx);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let c = inv_std.len();
                    let nn = (xhat.len() / c) as f64;
                    let mut sum_g = vec![0.0; c];
                    let mut sum_gx = vec![0.0; c];
                    for (gr, xr) in g.data().chunks(c).zip(xhat.data().chunks(c)) {
                        for j in 0..c {
                            sum_g[j] += gr[j];
                            sum_gx[j] += gr[j] * xr[j];
                        }
                    }
                    if relevant[x.0] {
                        let gam = self.value(*gamma).data();
                        let mut gx = g.clone();
                        for (row, xr) in gx.data_mut().chunks_mut(c).zip(xhat.data().chunks(c)) {
                            for j in 0..c {
                                row[j] = gam[j] * inv_std[j] / nn
                                    * (nn * row[j] - sum_g[j] - xr[j] * sum_gx[j]);
                            }
                        }
                        acc(*x, gx);
                    }
                    if relevant[gamma.0] {
                        acc(*gamma, Tensor::new(vec![c], sum_gx)?);
                    }
                    if relevant[beta.0] {
                        acc(*beta, Tensor::new(vec![c], sum_g)?);
                    }
                }
                Op::ChannelAffine { x, scale } => {
                    let c = scale.len();
                    let mut gx = g;
                    for row in gx.data_mut().chunks_mut(c) {
                        for (v, s) in row.iter_mut().zip(scale) {
                            *v *= s;
                        }
                    }
                    acc(*x, gx);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
