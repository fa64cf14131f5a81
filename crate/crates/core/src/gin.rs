//! Graph Isomorphism Network over the undirected brick skeleton.
//!
//! Node features are the orientation one-hot followed by in- and out-degree
//! divided by four. Each layer applies `relu(MLP(h_v + sum_{u ~ v} h_u))`;
//! the graph embedding concatenates the sum-pooled output of every layer and
//! a linear map of it gives the class logits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LegoGraph, Orientation};
use crate::tensor::checkpoint::{Checkpoint, CheckpointError};
use crate::tensor::nn::{Activation, Linear, Mlp, ParamStore};
use crate::tensor::optim::AdamState;
use crate::tensor::{Matrix, Tape, TensorError, Var};

pub const CHECKPOINT_KIND: &str = "gin";
/// Orientation one-hot plus two degree channels.
pub const FEATURE_WIDTH: usize = Orientation::ALL.len() + 2;

#[derive(Debug, Error)]
pub enum GinError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("training needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("graph {index} has no class label")]
    MissingLabel { index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, GinError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    SumPerLayerConcat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GinConfig {
    pub num_layers: usize,
    pub hidden: usize,
    /// Fixed self-weight offset; the aggregation uses `(1 + epsilon) h_v`.
    pub epsilon: f64,
    pub readout: Readout,
    pub num_classes: usize,
}

impl Default for GinConfig {
    fn default() -> Self {
        Self { num_layers: 3, hidden: 64, epsilon: 0.0, readout: Readout::SumPerLayerConcat, num_classes: 12 }
    }
}

impl GinConfig {
    pub fn embedding_width(&self) -> usize {
        self.num_layers * self.hidden
    }
}

/// Per-node input features, one row per node.
pub fn graph_features(g: &LegoGraph) -> Matrix {
    let (ins, outs) = (g.in_degrees(), g.out_degrees());
    let mut m = Matrix::zeros(g.node_count(), FEATURE_WIDTH);
    for (v, o) in g.nodes().iter().enumerate() {
        m.set(v, o.index(), 1.0);
        m.set(v, 2, ins[v] as f64 / 4.0);
        m.set(v, 3, outs[v] as f64 / 4.0);
    }
    m
}

#[derive(Debug, Clone)]
pub struct Gin {
    pub config: GinConfig,
    pub store: ParamStore,
    layers: Vec<Mlp>,
    classifier: Linear,
}

impl Gin {
    pub fn new(config: GinConfig, seed: u64) -> Result<Self> {
        if config.num_layers < 1 || config.hidden < 1 || config.num_classes < 1 {
            return Err(GinError::Config("layers, width and classes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut layers = Vec::new();
        let mut width = FEATURE_WIDTH;
        for l in 0..config.num_layers {
            layers.push(Mlp::new(&mut store, &format!("gin{l}"), &[width, config.hidden, config.hidden], Activation::Relu, &mut rng));
            width = config.hidden;
        }
        let classifier = Linear::new(&mut store, "classifier", config.embedding_width(), config.num_classes, &mut rng);
        Ok(Self { config, store, layers, classifier })
    }

    /// `(embedding, logits)` as `1 x L*W` and `1 x C` nodes on `tape`.
    pub fn forward_on(&self, tape: &mut Tape, store: &ParamStore, g: &LegoGraph) -> Result<(Var, Var)> {
        let n = g.node_count();
        if n == 0 {
            return Err(GinError::EmptyGraph);
        }
        let mut from = Vec::with_capacity(2 * g.edge_count());
        let mut to = Vec::with_capacity(2 * g.edge_count());
        for e in g.edges() {
            from.extend([e.src, e.dst]);
            to.extend([e.dst, e.src]);
        }
        let mut h = tape.constant(graph_features(g));
        let mut pooled = Vec::with_capacity(self.layers.len());
        for mlp in &self.layers {
            let own = if self.config.epsilon == 0.0 { h } else { tape.scale(h, 1.0 + self.config.epsilon) };
            let agg = if from.is_empty() {
                own
            } else {
                let msgs = tape.gather_rows(h, &from)?;
                let neigh = tape.scatter_add_rows(msgs, &to, n)?;
                tape.add(own, neigh)?
            };
            let out = mlp.forward(tape, store, agg)?;
            h = tape.relu(out);
            pooled.push(tape.sum_rows(h));
        }
        let emb = tape.concat_cols(&pooled)?;
        let logits = self.classifier.forward(tape, store, emb)?;
        Ok((emb, logits))
    }

    pub fn forward(&self, g: &LegoGraph) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::new();
        let (e, l) = self.forward_on(&mut tape, &self.store, g)?;
        Ok((tape.value(e).data().to_vec(), tape.value(l).data().to_vec()))
    }

    pub fn embed(&self, g: &LegoGraph) -> Result<Vec<f64>> {
        Ok(self.forward(g)?.0)
    }

    pub fn predict(&self, g: &LegoGraph) -> Result<usize> {
        let logits = self.forward(g)?.1;
        Ok(argmax(&logits))
    }

    /// One embedding row per graph.
    pub fn embed_set(&self, graphs: &[LegoGraph]) -> Result<Vec<Vec<f64>>> {
        graphs.iter().map(|g| self.embed(g)).collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_value(&self.config).expect("config serialises");
        Checkpoint::from_store(CHECKPOINT_KIND, config, &self.store)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(GinError::Config(format!("checkpoint kind {:?}, expected {CHECKPOINT_KIND:?}", ck.kind)));
        }
        let config: GinConfig = serde_json::from_value(ck.config.clone()).map_err(|e| GinError::Config(e.to_string()))?;
        let mut gin = Self::new(config, 0)?;
        ck.load_into(&mut gin.store)?;
        Ok(gin)
    }
}

/// First index of the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    xs.iter().enumerate().fold(0, |best, (i, &x)| if x > xs[best] { i } else { best })
}

/// Fraction of graphs whose predicted class equals `labels[i]`.
pub fn gin_accuracy(gin: &Gin, graphs: &[LegoGraph], labels: &[usize]) -> Result<f64> {
    if graphs.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for (g, &y) in graphs.iter().zip(labels) {
        if !g.is_empty() && gin.predict(g)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / graphs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GinTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for GinTrainConfig {
    fn default() -> Self {
        Self { epochs: 150, batch_size: 16, lr: 1e-3, train_fraction: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub epoch_losses: Vec<f64>,
}

/// Per-class shuffled split; `round(fraction * n_c)` of each class trains.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_class {
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64) * fraction).round() as usize;
        train.extend_from_slice(&idx[..k.min(idx.len())]);
        test.extend_from_slice(&idx[k.min(idx.len())..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Trains a classifier on labelled graphs with a stratified hold-out.
pub fn train_gin(graphs: &[LegoGraph], labels: &[usize], config: GinConfig, tc: &GinTrainConfig) -> Result<(Gin, GinReport)> {
    let classes: std::collections::BTreeSet<_> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(GinError::TooFewClasses(classes.len()));
    }
    if let Some(&max) = classes.iter().next_back() {
        if max >= config.num_classes {
            return Err(GinError::Config(format!("label {max} outside {} classes", config.num_classes)));
        }
    }
    if let Some(index) = graphs.iter().position(|g| g.is_empty()) {
        return Err(GinError::Config(format!("graph {index} is empty")));
    }
    let mut gin = Gin::new(config, tc.seed)?;
    let (train_idx, test_idx) = stratified_split(labels, tc.train_fraction, tc.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(1));
    let mut adam = AdamState::new(&gin.store, tc.lr);
    let mut order = train_idx.clone();
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    for _ in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(tc.batch_size.max(1)) {
            gin.store.zero_grads();
            for &i in chunk {
                let mut tape = Tape::new();
                let (_, logits) = gin.forward_on(&mut tape, &gin.store, &graphs[i])?;
                let loss = tape.cross_entropy(logits, labels[i])?;
                total += tape.scalar(loss);
                let grads = tape.backward(loss)?;
                tape.accumulate_param_grads(&grads, &mut gin.store);
            }
            gin.store.scale_grads(1.0 / chunk.len() as f64);
            adam.step(&mut gin.store)?;
        }
        epoch_losses.push(total / order.len().max(1) as f64);
    }
    let subset = |idx: &[usize]| -> (Vec<LegoGraph>, Vec<usize>) { (idx.iter().map(|&i| graphs[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect()) };
    let (tg, tl) = subset(&train_idx);
    let (vg, vl) = subset(&test_idx);
    let report = GinReport {
        train_accuracy: gin_accuracy(&gin, &tg, &tl)?,
        test_accuracy: if vg.is_empty() { 0.0 } else { gin_accuracy(&gin, &vg, &vl)? },
        train_size: tg.len(),
        test_size: vg.len(),
        epoch_losses,
    };
    Ok((gin, report))
}

/// Embeddings as CSV, one row per graph, header `e0,e1,...`.
pub fn embeddings_csv(rows: &[Vec<f64>]) -> String {
    let width = rows.first().map_or(0, Vec::len);
    let mut out = (0..width).map(|i| format!("e{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        let line = r.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{line}");
    }
    out
}
