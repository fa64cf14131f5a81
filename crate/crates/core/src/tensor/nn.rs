//! Parameters and the layers built from them.

use std::collections::HashMap;

use rand::Rng;

use super::{Matrix, Result, Tape, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Option<Matrix>,
    /// Fan-in used for initialization; zero for zero-initialized tensors.
    pub fan_in: usize,
}

/// Named parameter tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&Matrix> {
        self.params[id.0].grad.as_ref()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name.get(name).copied().ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    /// Registers a tensor. Panics on a duplicate name.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix, fan_in: usize) -> ParamId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate parameter name {name}");
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, value, grad: None, fan_in });
        id
    }

    /// Weight drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn insert_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        let bound = 1.0 / (rows.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Matrix { rows, cols, data }, rows)
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.insert(name, Matrix::zeros(rows, cols), 0)
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &Matrix) {
        let p = &mut self.params[id.0];
        match &mut p.grad {
            Some(existing) => existing.add_assign(g),
            None => p.grad = Some(g.clone()),
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            if let Some(g) = &mut p.grad {
                for x in g.data_mut() {
                    *x *= factor;
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Sets every parameter to zero; used to build degenerate heads in tests.
    pub fn zero_all(&mut self) {
        for p in &mut self.params {
            p.value.data_mut().fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let weight = store.insert_uniform(format!("{name}.weight"), input, output, rng);
        let bias = store.insert_zeros(format!("{name}.bias"), 1, output);
        Self { weight, bias, input, output }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Affine layers with an activation after every hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `sizes` lists the widths from input to output, e.g. `[in, hidden, out]`.
    pub fn new(store: &mut ParamStore, name: &str, sizes: &[usize], activation: Activation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers, activation }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let width = tape.shape(x).1;
        if width != self.input_width() {
            return Err(TensorError::ShapeMismatch { op: "mlp", left: tape.shape(x), right: (1, self.input_width()) });
        }
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i + 1 < self.layers.len() {
                h = self.activation.apply(tape, h);
            }
        }
        Ok(h)
    }
}

/// Gated recurrent unit over a batch of rows.
///
/// `r = sig(x Wr + h Ur + br)`, `z = sig(x Wz + h Uz + bz)`,
/// `n = tanh(x Wn + bn + r * (h Un + cn))`, `h' = (1 - z) * n + z * h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub input_bias: ParamId,
    pub hidden_bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let input_weight = store.insert_uniform(format!("{name}.w_input"), input, 3 * hidden, rng);
        let hidden_weight = store.insert_uniform(format!("{name}.w_hidden"), hidden, 3 * hidden, rng);
        let input_bias = store.insert_zeros(format!("{name}.b_input"), 1, 3 * hidden);
        let hidden_bias = store.insert_zeros(format!("{name}.b_hidden"), 1, 3 * hidden);
        Self { input_weight, hidden_weight, input_bias, hidden_bias, input, hidden }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var> {
        if tape.shape(x).0 != tape.shape(h).0 {
            return Err(TensorError::ShapeMismatch { op: "gru", left: tape.shape(x), right: tape.shape(h) });
        }
        let hd = self.hidden;
        let wi = tape.param(store, self.input_weight);
        let wh = tape.param(store, self.hidden_weight);
        let bi = tape.param(store, self.input_bias);
        let bh = tape.param(store, self.hidden_bias);
        let gi = tape.matmul(x, wi)?;
        let gi = tape.add_row(gi, bi)?;
        let gh = tape.matmul(h, wh)?;
        let gh = tape.add_row(gh, bh)?;
        let (i_r, i_z, i_n) = (tape.slice_cols(gi, 0, hd)?, tape.slice_cols(gi, hd, 2 * hd)?, tape.slice_cols(gi, 2 * hd, 3 * hd)?);
        let (h_r, h_z, h_n) = (tape.slice_cols(gh, 0, hd)?, tape.slice_cols(gh, hd, 2 * hd)?, tape.slice_cols(gh, 2 * hd, 3 * hd)?);
        let r = tape.add(i_r, h_r)?;
        let r = tape.sigmoid(r);
        let z = tape.add(i_z, h_z)?;
        let z = tape.sigmoid(z);
        let rn = tape.mul(r, h_n)?;
        let n = tape.add(i_n, rn)?;
        let n = tape.tanh(n);
        let keep = tape.mul(z, h)?;
        let one_minus_z = tape.one_minus(z);
        let fresh = tape.mul(one_minus_z, n)?;
        tape.add(fresh, keep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn zero_mlp_outputs_zero() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 5, 2], Activation::Relu, &mut rng());
        store.zero_all();
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(vec![1.0, -2.0, 3.0]));
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 3], Activation::Relu, &mut rng());
        *store.value_mut(mlp.layers[0].weight) = Matrix::identity(3);
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(vec![1.0, -2.0, 3.0]));
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn mlp_rejects_wrong_width() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 2], Activation::Tanh, &mut rng());
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::zeros(1, 4));
        assert!(matches!(mlp.forward(&mut tape, &store, x), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn mlp_matches_straight_line_arithmetic() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[2, 3, 1], Activation::Tanh, &mut rng());
        let x = [0.3, -0.7];
        let (w0, b0) = (store.value(mlp.layers[0].weight).clone(), store.value(mlp.layers[0].bias).clone());
        let (w1, b1) = (store.value(mlp.layers[1].weight).clone(), store.value(mlp.layers[1].bias).clone());
        let mut expected = b1.get(0, 0);
        for j in 0..3 {
            let pre = x[0] * w0.get(0, j) + x[1] * w0.get(1, j) + b0.get(0, j);
            expected += pre.tanh() * w1.get(j, 0);
        }
        let mut tape = Tape::new();
        let xv = tape.constant(Matrix::row_vector(x.to_vec()));
        let y = mlp.forward(&mut tape, &store, xv).unwrap();
        assert!((tape.scalar(y) - expected).abs() < 1e-14);
    }

    #[test]
    fn gru_zero_everything_gives_zero() {
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", 2, 3, &mut rng());
        store.zero_all();
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::zeros(1, 2));
        let h = tape.constant(Matrix::zeros(1, 3));
        let out = gru.forward(&mut tape, &store, x, h).unwrap();
        assert_eq!(tape.value(out).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn gru_saturated_update_gate_keeps_hidden() {
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", 2, 3, &mut rng());
        let bias = store.value_mut(gru.input_bias);
        for c in 3..6 {
            bias.set(0, c, 60.0);
        }
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(vec![0.4, -0.1]));
        let h0 = Matrix::row_vector(vec![0.2, -0.5, 0.9]);
        let h = tape.constant(h0.clone());
        let out = gru.forward(&mut tape, &store, x, h).unwrap();
        for (a, b) in tape.value(out).data().iter().zip(h0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_matches_scalar_reimplementation() {
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", 2, 2, &mut rng());
        for id in [gru.input_bias, gru.hidden_bias] {
            for (i, v) in store.value_mut(id).data_mut().iter_mut().enumerate() {
                *v = 0.05 * i as f64 - 0.1;
            }
        }
        let x = [0.5, -0.25];
        let h = [0.1, 0.7];
        let wi = store.value(gru.input_weight).clone();
        let wh = store.value(gru.hidden_weight).clone();
        let bi = store.value(gru.input_bias).clone();
        let bh = store.value(gru.hidden_bias).clone();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let lin = |c: usize| {
            let a = x[0] * wi.get(0, c) + x[1] * wi.get(1, c) + bi.get(0, c);
            let b = h[0] * wh.get(0, c) + h[1] * wh.get(1, c) + bh.get(0, c);
            (a, b)
        };
        let mut expected = [0.0; 2];
        for j in 0..2 {
            let (ar, br) = lin(j);
            let (az, bz) = lin(2 + j);
            let (an, bn) = lin(4 + j);
            let r = sig(ar + br);
            let z = sig(az + bz);
            let n = (an + r * bn).tanh();
            expected[j] = (1.0 - z) * n + z * h[j];
        }
        let mut tape = Tape::new();
        let xv = tape.constant(Matrix::row_vector(x.to_vec()));
        let hv = tape.constant(Matrix::row_vector(h.to_vec()));
        let out = gru.forward(&mut tape, &store, xv, hv).unwrap();
        for (a, b) in tape.value(out).data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
