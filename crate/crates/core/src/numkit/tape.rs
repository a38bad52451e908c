//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the nodes in reverse and accumulates adjoints into the inputs.

use crate::error::{Error, Result};
use crate::numkit::matrix::{self, gemm_nn, gemm_nt, gemm_tn, Matrix};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Matrix<T>),
    Scale(Var, T),
    Softmax(Var),
    Gelu(Var),
    Sigmoid(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Matrix<T>,
        inv_std: Vec<T>,
    },
    ConcatCols(Vec<Var>),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    MeanRows(Var),
    SumAll(Var),
    WeightedBce {
        probs: Var,
        targets: Matrix<T>,
        weights: Matrix<T>,
        eps: T,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    param: bool,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu<T: Scalar>(x: T) -> T {
    let c = T::lit(GELU_C);
    let a = T::lit(GELU_A);
    let half = T::lit(0.5);
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::lit(GELU_C);
    let a = T::lit(GELU_A);
    let half = T::lit(0.5);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * a * x * x)
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            param: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that receives no gradient report.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a trainable parameter; `backward` reports a gradient for it
    /// (exactly zero when the loss does not depend on it).
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].param = true;
        v
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matrix::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matrix::matmul_t(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds a 1×c row to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::shape("add_row", xv.shape(), bv.shape()));
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for (o, &c) in value.row_mut(i).iter_mut().zip(bv.data()) {
                *o += c;
            }
        }
        Ok(self.push(value, Op::AddRow(x, b)))
    }

    /// `x · w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Elementwise product with a constant (e.g. a dropout mask).
    pub fn mul_const(&mut self, a: Var, c: Matrix<T>) -> Result<Var> {
        let value = self.value(a).zip_map(&c, |x, y| x * y)?;
        Ok(self.push(value, Op::MulConst(a, c)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        self.softmax_rows_masked(a, false)
    }

    /// Row softmax; with `causal`, entries right of the diagonal get zero mass.
    pub fn softmax_rows_masked(&mut self, a: Var, causal: bool) -> Var {
        let value = matrix::softmax_rows_masked(self.value(a), causal);
        self.push(value, Op::Softmax(a))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(gelu);
        self.push(value, Op::Gelu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// Per-row normalization to zero mean and unit variance, then `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        for p in [gain, bias] {
            let pv = self.value(p);
            if pv.shape() != (1, cols) {
                return Err(Error::shape("layer_norm", xv.shape(), pv.shape()));
            }
        }
        let n = T::from_usize(cols).unwrap();
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let row = xv.row(i);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            for (h, &v) in xhat.row_mut(i).iter_mut().zip(row) {
                *h = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let (g, b) = (self.value(gain), self.value(bias));
        let mut value = xhat.clone();
        for i in 0..rows {
            for (j, o) in value.row_mut(i).iter_mut().enumerate() {
                *o = *o * g.data()[j] + b.data()[j];
            }
        }
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    /// Horizontal concatenation; all parts must share a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::shape("concat_cols", self.shape(parts[0]), s));
            }
            cols += s.1;
        }
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let pv = &self.nodes[p.0].value;
            let w = pv.cols();
            for i in 0..rows {
                value.row_mut(i)[offset..offset + w].copy_from_slice(pv.row(i));
            }
            offset += w;
        }
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Selects rows of `table` by index (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        let mut value = Matrix::zeros(ids.len(), tv.cols());
        for (i, &id) in ids.iter().enumerate() {
            if id >= tv.rows() {
                return Err(Error::shape("gather_rows", tv.shape(), (id, 1)));
            }
            value.row_mut(i).copy_from_slice(tv.row(id));
        }
        Ok(self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Column means, a 1×c row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = T::from_usize(av.rows().max(1)).unwrap();
        let mut value = Matrix::zeros(1, av.cols());
        for i in 0..av.rows() {
            for (o, &v) in value.row_mut(0).iter_mut().zip(av.row(i)) {
                *o += v;
            }
        }
        let value = value.scale(T::one() / n);
        self.push(value, Op::MeanRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Matrix::filled(1, 1, s), Op::SumAll(a))
    }

    /// `Σ w·BCE(clamp(p), y)` over all elements, returned as 1×1.
    /// Clamped elements pass no gradient.
    pub fn weighted_bce(&mut self, probs: Var, targets: Matrix<T>, weights: Matrix<T>, eps: T) -> Result<Var> {
        let pv = self.value(probs);
        pv.check_same_shape("weighted_bce targets", &targets)?;
        pv.check_same_shape("weighted_bce weights", &weights)?;
        let total = crate::training::loss::weighted_bce_sum(pv.data(), targets.data(), weights.data(), eps);
        Ok(self.push(
            Matrix::filled(1, 1, total),
            Op::WeightedBce {
                probs,
                targets,
                weights,
                eps,
            },
        ))
    }

    /// Adjoints of the 1×1 `loss` with respect to every recorded node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("backward", self.shape(loss), (1, 1)));
        }
        let mut grads: Vec<Option<Matrix<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Matrix::filled(1, 1, T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        // Leaf adjoints survive the `take` above because leaves are skipped.
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.param)
            .map(|(i, _)| i)
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<T>, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                with_grad(grads, *a, av.shape(), |da| gemm_nt(g.data(), bv.data(), da, m, n, k));
                with_grad(grads, *b, bv.shape(), |db| gemm_tn(av.data(), g.data(), db, m, k, n));
            }
            Op::MatMulT(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.rows());
                with_grad(grads, *a, av.shape(), |da| gemm_nn(g.data(), bv.data(), da, m, n, k));
                with_grad(grads, *b, bv.shape(), |db| gemm_tn(g.data(), av.data(), db, m, n, k));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                accumulate(grads, *b, g);
            }
            Op::AddRow(x, b) => {
                accumulate(grads, *x, g);
                with_grad(grads, *b, (1, g.cols()), |db| {
                    for i in 0..g.rows() {
                        for (d, &v) in db.iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                with_grad(grads, *a, av.shape(), |da| {
                    for ((d, &gv), &y) in da.iter_mut().zip(g.data()).zip(bv.data()) {
                        *d += gv * y;
                    }
                });
                with_grad(grads, *b, bv.shape(), |db| {
                    for ((d, &gv), &x) in db.iter_mut().zip(g.data()).zip(av.data()) {
                        *d += gv * x;
                    }
                });
            }
            Op::MulConst(a, c) => {
                with_grad(grads, *a, c.shape(), |da| {
                    for ((d, &gv), &y) in da.iter_mut().zip(g.data()).zip(c.data()) {
                        *d += gv * y;
                    }
                });
            }
            Op::Scale(a, s) => {
                with_grad(grads, *a, g.shape(), |da| {
                    for (d, &gv) in da.iter_mut().zip(g.data()) {
                        *d += gv * *s;
                    }
                });
            }
            Op::Softmax(a) => {
                let y = &node.value;
                with_grad(grads, *a, y.shape(), |da| {
                    let cols = y.cols();
                    for i in 0..y.rows() {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for j in 0..cols {
                            da[i * cols + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::Gelu(a) => {
                let av = self.value(*a);
                with_grad(grads, *a, av.shape(), |da| {
                    for ((d, &gv), &x) in da.iter_mut().zip(g.data()).zip(av.data()) {
                        *d += gv * gelu_grad(x);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                with_grad(grads, *a, y.shape(), |da| {
                    for ((d, &gv), &p) in da.iter_mut().zip(g.data()).zip(y.data()) {
                        *d += gv * p * (T::one() - p);
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (rows, cols) = xhat.shape();
                let gv = self.value(*gain);
                with_grad(grads, *gain, (1, cols), |dg| {
                    for i in 0..rows {
                        for j in 0..cols {
                            dg[j] += g[(i, j)] * xhat[(i, j)];
                        }
                    }
                });
                with_grad(grads, *bias, (1, cols), |db| {
                    for i in 0..rows {
                        for (d, &v) in db.iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                });
                let n = T::from_usize(cols).unwrap();
                with_grad(grads, *x, (rows, cols), |dx| {
                    let mut dxhat = vec![T::zero(); cols];
                    for i in 0..rows {
                        let mut sum = T::zero();
                        let mut sum_h = T::zero();
                        for j in 0..cols {
                            dxhat[j] = g[(i, j)] * gv.data()[j];
                            sum += dxhat[j];
                            sum_h += dxhat[j] * xhat[(i, j)];
                        }
                        let k = inv_std[i] / n;
                        for j in 0..cols {
                            dx[i * cols + j] += k * (n * dxhat[j] - sum - xhat[(i, j)] * sum_h);
                        }
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let s = self.shape(p);
                    with_grad(grads, p, s, |dp| {
                        for i in 0..s.0 {
                            let src = &g.row(i)[offset..offset + s.1];
                            for (d, &v) in dp[i * s.1..(i + 1) * s.1].iter_mut().zip(src) {
                                *d += v;
                            }
                        }
                    });
                    offset += s.1;
                }
            }
            Op::Gather { table, ids } => {
                let s = self.shape(*table);
                with_grad(grads, *table, s, |dt| {
                    for (i, &id) in ids.iter().enumerate() {
                        for (d, &v) in dt[id * s.1..(id + 1) * s.1].iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                });
            }
            Op::MeanRows(a) => {
                let s = self.shape(*a);
                let inv = T::one() / T::from_usize(s.0.max(1)).unwrap();
                with_grad(grads, *a, s, |da| {
                    for i in 0..s.0 {
                        for (d, &v) in da[i * s.1..(i + 1) * s.1].iter_mut().zip(g.row(0)) {
                            *d += v * inv;
                        }
                    }
                });
            }
            Op::SumAll(a) => {
                let s = self.shape(*a);
                let gv = g[(0, 0)];
                with_grad(grads, *a, s, |da| {
                    for d in da.iter_mut() {
                        *d += gv;
                    }
                });
            }
            Op::WeightedBce {
                probs,
                targets,
                weights,
                eps,
            } => {
                let pv = self.value(*probs);
                let gv = g[(0, 0)];
                let hi = T::one() - *eps;
                with_grad(grads, *probs, pv.shape(), |dp| {
                    for (((d, &p), &y), &w) in dp.iter_mut().zip(pv.data()).zip(targets.data()).zip(weights.data()) {
                        if p > *eps && p < hi {
                            *d += gv * w * (-y / p + (T::one() - y) / (T::one() - p));
                        }
                    }
                });
            }
        }
    }
}

fn with_grad<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, shape: (usize, usize), f: impl FnOnce(&mut [T])) {
    let slot = grads[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
    f(slot.data_mut());
}

fn accumulate<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: &Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(g),
        slot @ None => *slot = Some(g.clone()),
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
    params: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`, or `None` if the loss never reached it.
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `v`, zeros when the loss does not depend on it.
    pub fn wrt(&self, tape: &Tape<T>, v: Var) -> Matrix<T> {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.shape(v);
                Matrix::zeros(r, c)
            }
        }
    }

    /// Number of registered parameters on the originating tape.
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Moves the gradient for `v` out, zeros when absent.
    pub fn take(&mut self, tape: &Tape<T>, v: Var) -> Matrix<T> {
        match self.grads.get_mut(v.0).and_then(|g| g.take()) {
            Some(g) => g,
            None => {
                let (r, c) = tape.shape(v);
                Matrix::zeros(r, c)
            }
        }
    }
}
