//! Dense 2-D tensors with tape-based reverse-mode differentiation.
//!
//! Every value is a row-major `f64` [`Matrix`]. Operations on a [`Tape`]
//! record how each result was produced; [`Tape::backward`] walks the record in
//! reverse and returns the gradient of a scalar with respect to every node.
//! Parameters live in a [`ParamStore`] outside the tape and are bound to a
//! tape with [`Tape::param`]; their gradients are folded back into the store
//! with [`Tape::accumulate_param_grads`].

pub mod checkpoint;
pub mod gradcheck;
pub mod nn;
pub mod optim;

use std::collections::HashMap;

use thiserror::Error;

pub use nn::{GruCell, Linear, Mlp, ParamId, ParamStore};
pub use optim::AdamState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("index {index} out of range for {len} in {op}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("parameter {0} has no gradient")]
    MissingGrad(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TensorError::ShapeMismatch { op: "from_vec", left: (rows, cols), right: (data.len(), 1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self { rows: 1, cols: data.len(), data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch { op: "matmul", left: self.shape(), right: other.shape() });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`
    fn matmul_nt(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                out.data[i * other.rows + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// `self^T * other`
    fn matmul_tn(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.cols, other.cols);
        let n = other.cols;
        for k in 0..self.rows {
            let b_row = other.row(k);
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i];
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulColumn(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    SumRows(Var),
    Sum(Var),
    LogSoftmaxRows(Var),
    Pick(Var, usize, usize),
    BceWithLogits(Var, Vec<f64>),
    Reshape(Var),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Records operations for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch { op, left: a.shape(), right: b.shape() });
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}

pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Constant input; receives a gradient but is not a parameter.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a stored parameter to this tape (once per tape).
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x - y).collect();
        let value = Matrix { rows: va.rows, cols: va.cols, data };
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
        let value = Matrix { rows: va.rows, cols: va.cols, data };
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Adds a `1 x c` row to every row of an `r x c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows != 1 || vr.cols != va.cols {
            return Err(TensorError::ShapeMismatch { op: "add_row", left: va.shape(), right: vr.shape() });
        }
        let mut value = va.clone();
        for r in 0..value.rows {
            for (o, b) in value.data[r * value.cols..(r + 1) * value.cols].iter_mut().zip(&vr.data) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    /// Scales row `i` of an `r x c` matrix by entry `i` of an `r x 1` column.
    pub fn mul_column(&mut self, a: Var, column: Var) -> Result<Var> {
        let (va, vc) = (self.value(a), self.value(column));
        if vc.cols != 1 || vc.rows != va.rows {
            return Err(TensorError::ShapeMismatch { op: "mul_column", left: va.shape(), right: vc.shape() });
        }
        let mut value = va.clone();
        for r in 0..value.rows {
            let g = vc.data[r];
            for o in &mut value.data[r * value.cols..(r + 1) * value.cols] {
                *o *= g;
            }
        }
        Ok(self.push(value, Op::MulColumn(a, column)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 - x);
        self.push(value, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows;
        for &p in parts {
            if self.value(p).rows != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.value(parts[0]).shape(),
                    right: self.value(p).shape(),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Matrix { rows, cols, data }, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.value(parts[0]).shape(),
                    right: v.shape(),
                });
            }
            data.extend_from_slice(&v.data);
            rows += v.rows;
        }
        Ok(self.push(Matrix { rows, cols, data }, Op::ConcatRows(parts.to_vec())))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        if start > end || end > va.cols {
            return Err(TensorError::IndexOutOfRange { op: "slice_cols", index: end, len: va.cols });
        }
        let mut data = Vec::with_capacity(va.rows * (end - start));
        for r in 0..va.rows {
            data.extend_from_slice(&va.row(r)[start..end]);
        }
        let value = Matrix { rows: va.rows, cols: end - start, data };
        Ok(self.push(value, Op::SliceCols(a, start)))
    }

    /// Row `i` of the result is row `index[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let va = self.value(a);
        let mut data = Vec::with_capacity(index.len() * va.cols);
        for &i in index {
            if i >= va.rows {
                return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: i, len: va.rows });
            }
            data.extend_from_slice(va.row(i));
        }
        let value = Matrix { rows: index.len(), cols: va.cols, data };
        Ok(self.push(value, Op::GatherRows(a, index.to_vec())))
    }

    /// Sums row `i` of `a` into row `index[i]` of a fresh `rows x c` matrix.
    pub fn scatter_add_rows(&mut self, a: Var, index: &[usize], rows: usize) -> Result<Var> {
        let va = self.value(a);
        if index.len() != va.rows {
            return Err(TensorError::ShapeMismatch { op: "scatter_add_rows", left: va.shape(), right: (index.len(), 1) });
        }
        let mut value = Matrix::zeros(rows, va.cols);
        for (r, &i) in index.iter().enumerate() {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { op: "scatter_add_rows", index: i, len: rows });
            }
            for (o, x) in value.data[i * va.cols..(i + 1) * va.cols].iter_mut().zip(va.row(r)) {
                *o += x;
            }
        }
        Ok(self.push(value, Op::ScatterAddRows(a, index.to_vec())))
    }

    /// Same row-major data viewed as `rows x cols`.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let va = self.value(a);
        if va.data.len() != rows * cols {
            return Err(TensorError::ShapeMismatch { op: "reshape", left: va.shape(), right: (rows, cols) });
        }
        let value = Matrix { rows, cols, data: va.data.clone() };
        Ok(self.push(value, Op::Reshape(a)))
    }

    /// Column sums as a `1 x c` row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut value = Matrix::zeros(1, va.cols);
        for r in 0..va.rows {
            for (o, x) in value.data.iter_mut().zip(va.row(r)) {
                *o += x;
            }
        }
        self.push(value, Op::SumRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data.iter().sum();
        self.push(Matrix::row_vector(vec![total]), Op::Sum(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut value = va.clone();
        for r in 0..va.rows {
            let row = &mut value.data[r * va.cols..(r + 1) * va.cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        self.push(value, Op::LogSoftmaxRows(a))
    }

    /// Row-wise softmax values (forward only).
    pub fn softmax_values(&self, a: Var) -> Matrix {
        softmax_rows(self.value(a))
    }

    /// The single entry `(r, c)` as a `1 x 1` node.
    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> Result<Var> {
        let va = self.value(a);
        if r >= va.rows || c >= va.cols {
            return Err(TensorError::IndexOutOfRange { op: "pick", index: r * va.cols + c, len: va.data.len() });
        }
        let value = Matrix::row_vector(vec![va.get(r, c)]);
        Ok(self.push(value, Op::Pick(a, r, c)))
    }

    /// Categorical negative log-likelihood of `class` under a `1 x k` row of logits.
    pub fn cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let cols = self.value(logits).cols;
        if class >= cols {
            return Err(TensorError::IndexOutOfRange { op: "cross_entropy", index: class, len: cols });
        }
        let lp = self.log_softmax_rows(logits);
        let picked = self.pick(lp, 0, class)?;
        Ok(self.scale(picked, -1.0))
    }

    /// Sum of independent sigmoid cross-entropies against `bits`.
    pub fn bernoulli_ce(&mut self, logits: Var, bits: &[f64]) -> Result<Var> {
        let va = self.value(logits);
        if va.data.len() != bits.len() {
            return Err(TensorError::ShapeMismatch { op: "bernoulli_ce", left: va.shape(), right: (1, bits.len()) });
        }
        if let Some(i) = bits.iter().position(|&b| b != 0.0 && b != 1.0) {
            return Err(TensorError::IndexOutOfRange { op: "bernoulli_ce", index: i, len: bits.len() });
        }
        let loss: f64 = va
            .data
            .iter()
            .zip(bits)
            .map(|(&x, &t)| if t == 1.0 { softplus(-x) } else { softplus(x) })
            .sum();
        Ok(self.push(Matrix::row_vector(vec![loss]), Op::BceWithLogits(logits, bits.to_vec())))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, out: &Matrix, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, d: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_nt(self.value(*b)));
                acc(*b, self.value(*a).matmul_tn(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let da = Matrix { rows: g.rows, cols: g.cols, data: g.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect() };
                let db = Matrix { rows: g.rows, cols: g.cols, data: g.data.iter().zip(&va.data).map(|(x, y)| x * y).collect() };
                acc(*a, da);
                acc(*b, db);
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let mut dr = Matrix::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (o, x) in dr.data.iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(*row, dr);
            }
            Op::MulColumn(a, column) => {
                let (va, vc) = (self.value(*a), self.value(*column));
                let mut da = g.clone();
                let mut dc = Matrix::zeros(vc.rows, 1);
                for r in 0..g.rows {
                    let gr = g.row(r);
                    dc.data[r] = gr.iter().zip(va.row(r)).map(|(x, y)| x * y).sum();
                    for o in &mut da.data[r * g.cols..(r + 1) * g.cols] {
                        *o *= vc.data[r];
                    }
                }
                acc(*a, da);
                acc(*column, dc);
            }
            Op::Scale(a, f) => acc(*a, g.map(|x| x * f)),
            Op::OneMinus(a) => acc(*a, g.map(|x| -x)),
            Op::Sigmoid(a) => {
                let data = g.data.iter().zip(&out.data).map(|(d, s)| d * s * (1.0 - s)).collect();
                acc(*a, Matrix { rows: g.rows, cols: g.cols, data });
            }
            Op::Tanh(a) => {
                let data = g.data.iter().zip(&out.data).map(|(d, t)| d * (1.0 - t * t)).collect();
                acc(*a, Matrix { rows: g.rows, cols: g.cols, data });
            }
            Op::Relu(a) => {
                let va = self.value(*a);
                let data = g.data.iter().zip(&va.data).map(|(d, x)| if *x > 0.0 { *d } else { 0.0 }).collect();
                acc(*a, Matrix { rows: g.rows, cols: g.cols, data });
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols;
                    let mut d = Matrix::zeros(g.rows, c);
                    for r in 0..g.rows {
                        d.data[r * c..(r + 1) * c].copy_from_slice(&g.row(r)[offset..offset + c]);
                    }
                    offset += c;
                    acc(p, d);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows;
                    let d = Matrix { rows, cols: g.cols, data: g.data[offset * g.cols..(offset + rows) * g.cols].to_vec() };
                    offset += rows;
                    acc(p, d);
                }
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for r in 0..g.rows {
                    d.data[r * va.cols + start..r * va.cols + start + g.cols].copy_from_slice(g.row(r));
                }
                acc(*a, d);
            }
            Op::GatherRows(a, index) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for (r, &i) in index.iter().enumerate() {
                    for (o, x) in d.data[i * va.cols..(i + 1) * va.cols].iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(*a, d);
            }
            Op::ScatterAddRows(a, index) => {
                let mut d = Matrix::zeros(index.len(), g.cols);
                for (r, &i) in index.iter().enumerate() {
                    d.data[r * g.cols..(r + 1) * g.cols].copy_from_slice(g.row(i));
                }
                acc(*a, d);
            }
            Op::Reshape(a) => {
                let (rows, cols) = self.shape(*a);
                acc(*a, Matrix { rows, cols, data: g.data.clone() });
            }
            Op::SumRows(a) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for r in 0..va.rows {
                    d.data[r * va.cols..(r + 1) * va.cols].copy_from_slice(&g.data);
                }
                acc(*a, d);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                acc(*a, Matrix::filled(r, c, g.data[0]));
            }
            Op::LogSoftmaxRows(a) => {
                let mut d = g.clone();
                for r in 0..g.rows {
                    let gsum: f64 = g.row(r).iter().sum();
                    for (c, o) in d.data[r * g.cols..(r + 1) * g.cols].iter_mut().enumerate() {
                        *o -= out.get(r, c).exp() * gsum;
                    }
                }
                acc(*a, d);
            }
            Op::Pick(a, r, c) => {
                let (rows, cols) = self.shape(*a);
                let mut d = Matrix::zeros(rows, cols);
                d.set(*r, *c, g.data[0]);
                acc(*a, d);
            }
            Op::BceWithLogits(a, bits) => {
                let va = self.value(*a);
                let data = va.data.iter().zip(bits).map(|(&x, &t)| g.data[0] * (sigmoid(x) - t)).collect();
                acc(*a, Matrix { rows: va.rows, cols: va.cols, data });
            }
        }
    }

    /// Adds the gradients of every bound parameter into `store`.
    pub fn accumulate_param_grads(&self, grads: &Gradients, store: &mut ParamStore) {
        let mut bound: Vec<(&ParamId, &Var)> = self.params.iter().collect();
        bound.sort_by_key(|(id, _)| **id);
        for (&id, &var) in bound {
            if let Some(g) = grads.get(var) {
                store.accumulate_grad(id, g);
            }
        }
    }
}

#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows {
        let row = &mut out.data[r * m.cols..(r + 1) * m.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    out
}
