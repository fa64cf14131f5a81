//! Sequential generator of LEGO graphs.
//!
//! A structure is grown one decision at a time: add a brick (or stop), add
//! edges from the newest brick to existing ones, choose each edge's partner
//! and its stud offset. Node states are refreshed by `T` rounds of message
//! passing after every structural change, and every head reads the gated
//! graph summary together with a one-hot class vector.

mod sample;
mod train;

pub use sample::{sample, SampleOptions, Sampled};
pub use train::{train, EpochStats, TrainConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Decision, DecisionTrace};
use crate::geometry::{EdgeDirection, EdgeLabel, GeometryError, LegoGraph, Orientation, OFFSET_COUNT};
use crate::tensor::checkpoint::{Checkpoint, CheckpointError};
use crate::tensor::nn::{Activation, GruCell, Linear, Mlp, ParamStore};
use crate::tensor::{Matrix, Tape, TensorError, Var};

pub const CHECKPOINT_KIND: &str = "dgmlg";

/// Outcomes of the add-node head: one per orientation, then stop.
pub const ADD_NODE_OUTCOMES: usize = 3;
pub const STOP_NODES: usize = 2;
/// Outcomes of the add-edge head.
pub const NO_EDGE: usize = 0;
pub const ADD_EDGE_OUTCOMES: usize = 3;

/// Ordinal thresholds per offset axis in thermometer mode.
pub const THERMOMETER_BITS: usize = OFFSET_COUNT - 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("decision {step} ({decision:?}) does not fit the generation state: {reason}")]
    InvalidTrace { step: usize, decision: Decision, reason: &'static str },
    #[error("class id {0} outside the configured {1} classes")]
    ClassOutOfRange(usize, usize),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffsetHead {
    Categorical,
    Thermometer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub node_dim: usize,
    pub edge_dim: usize,
    pub graph_dim: usize,
    pub rounds: usize,
    pub num_classes: usize,
    pub offset_head: OffsetHead,
    pub max_nodes: usize,
    pub head_hidden: Vec<usize>,
    /// Names of the conditioning classes, by id; informational.
    pub class_names: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            node_dim: 64,
            edge_dim: 16,
            graph_dim: 128,
            rounds: 2,
            num_classes: 12,
            offset_head: OffsetHead::Categorical,
            max_nodes: 150,
            head_hidden: vec![128],
            class_names: Vec::new(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(ModelError::Config("rounds must be at least 1".into()));
        }
        if self.num_classes < 1 || self.node_dim < 1 || self.edge_dim < 1 || self.graph_dim < 1 {
            return Err(ModelError::Config("dimensions and class count must be positive".into()));
        }
        Ok(())
    }

    fn message_dim(&self) -> usize {
        2 * self.node_dim
    }

    fn offset_outputs(&self) -> usize {
        match self.offset_head {
            OffsetHead::Categorical => OFFSET_COUNT,
            OffsetHead::Thermometer => THERMOMETER_BITS,
        }
    }
}

/// Width of an edge's type feature: two offset one-hots and a direction bit.
const EDGE_FEATURES: usize = 2 * OFFSET_COUNT + 1;

/// Layer handles; parameter values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Network {
    pub config: ModelConfig,
    node_init: Linear,
    edge_init: Linear,
    messages: Vec<Linear>,
    updates: Vec<GruCell>,
    gate: Linear,
    project: Linear,
    add_node: Mlp,
    add_edge: Mlp,
    dest: Mlp,
    offset_x: Mlp,
    offset_y: Mlp,
}

fn head_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

impl Network {
    pub fn new(config: ModelConfig, store: &mut ParamStore, rng: &mut impl rand::Rng) -> Result<Self> {
        config.validate()?;
        let (h, s, g, c) = (config.node_dim, config.edge_dim, config.graph_dim, config.num_classes);
        let m = config.message_dim();
        let node_init = Linear::new(store, "node_init", Orientation::ALL.len() + c, h, rng);
        let edge_init = Linear::new(store, "edge_init", EDGE_FEATURES, s, rng);
        let mut messages = Vec::new();
        let mut updates = Vec::new();
        for t in 0..config.rounds {
            messages.push(Linear::new(store, &format!("round{t}.message"), 2 * h + s + 1, m, rng));
            updates.push(GruCell::new(store, &format!("round{t}.update"), m, h, rng));
        }
        let gate = Linear::new(store, "readout.gate", h, g, rng);
        let project = Linear::new(store, "readout.project", h, g, rng);
        let hid = &config.head_hidden;
        let add_node = Mlp::new(store, "head.add_node", &head_sizes(g + c, hid, ADD_NODE_OUTCOMES), Activation::Relu, rng);
        let add_edge = Mlp::new(store, "head.add_edge", &head_sizes(g + h + c, hid, ADD_EDGE_OUTCOMES), Activation::Relu, rng);
        let dest = Mlp::new(store, "head.dest", &head_sizes(2 * h + c, hid, 1), Activation::Relu, rng);
        let off = config.offset_outputs();
        let offset_x = Mlp::new(store, "head.offset_x", &head_sizes(2 * h + c, hid, off), Activation::Relu, rng);
        let offset_y = Mlp::new(store, "head.offset_y", &head_sizes(2 * h + c, hid, off), Activation::Relu, rng);
        Ok(Self { config, node_init, edge_init, messages, updates, gate, project, add_node, add_edge, dest, offset_x, offset_y })
    }

    pub fn start(&self, tape: &mut Tape, class_id: usize) -> Result<GenerationState> {
        let c = self.config.num_classes;
        if class_id >= c {
            return Err(ModelError::ClassOutOfRange(class_id, c));
        }
        let mut onehot = vec![0.0; c];
        onehot[class_id] = 1.0;
        let cond_value = Matrix::row_vector(onehot);
        let cond = tape.constant(cond_value.clone());
        let mut graph = LegoGraph::new();
        graph.set_class_label(Some(class_id));
        Ok(GenerationState { graph, h: None, cond, cond_value, class_id })
    }

    /// Adds a brick, initialises its state and propagates.
    pub fn add_node(&self, tape: &mut Tape, store: &ParamStore, st: &mut GenerationState, o: Orientation) -> Result<usize> {
        let mut feat = vec![0.0; Orientation::ALL.len()];
        feat[o.index()] = 1.0;
        let onehot = tape.constant(Matrix::row_vector(feat));
        let x = tape.concat_cols(&[onehot, st.cond])?;
        let h_new = self.node_init.forward(tape, store, x)?;
        st.h = Some(match st.h {
            Some(h) => tape.concat_rows(&[h, h_new])?,
            None => h_new,
        });
        let v = st.graph.add_node(o);
        self.propagate(tape, store, st, self.config.rounds)?;
        Ok(v)
    }

    pub fn add_edge(&self, tape: &mut Tape, store: &ParamStore, st: &mut GenerationState, src: usize, dst: usize, label: EdgeLabel) -> Result<()> {
        st.graph.add_edge(src, dst, label)?;
        self.propagate(tape, store, st, self.config.rounds)
    }

    /// `rounds` of message passing over both edge directions.
    pub fn propagate(&self, tape: &mut Tape, store: &ParamStore, st: &mut GenerationState, rounds: usize) -> Result<()> {
        let Some(mut h) = st.h else { return Ok(()) };
        let n = st.graph.node_count();
        let edges = st.graph.edges();
        let e = edges.len();
        let mut feats = Matrix::zeros(e, EDGE_FEATURES);
        for (i, edge) in edges.iter().enumerate() {
            feats.set(i, edge.label.dx_index(), 1.0);
            feats.set(i, OFFSET_COUNT + edge.label.dy_index(), 1.0);
            if edge.src > edge.dst {
                feats.set(i, 2 * OFFSET_COUNT, 1.0);
            }
        }
        let mut others = Vec::with_capacity(2 * e);
        let mut selves = Vec::with_capacity(2 * e);
        for edge in edges {
            others.push(edge.src);
            selves.push(edge.dst);
        }
        for edge in edges {
            others.push(edge.dst);
            selves.push(edge.src);
        }
        let mut flags = Matrix::zeros(2 * e, 1);
        for r in e..2 * e {
            flags.set(r, 0, 1.0);
        }
        let edge_state = if e > 0 {
            let f = tape.constant(feats);
            let s = self.edge_init.forward(tape, store, f)?;
            let both = tape.concat_rows(&[s, s])?;
            let flag = tape.constant(flags);
            Some(tape.concat_cols(&[both, flag])?)
        } else {
            None
        };
        for t in 0..rounds {
            let a = match edge_state {
                Some(sf) => {
                    let from = tape.gather_rows(h, &others)?;
                    let to = tape.gather_rows(h, &selves)?;
                    let input = tape.concat_cols(&[from, to, sf])?;
                    let msg = self.messages[t].forward(tape, store, input)?;
                    tape.scatter_add_rows(msg, &selves, n)?
                }
                None => tape.constant(Matrix::zeros(n, self.config.message_dim())),
            };
            h = self.updates[t].forward(tape, store, a, h)?;
        }
        st.h = Some(h);
        Ok(())
    }

    /// Gated sum of node states; zero for the empty graph.
    pub fn graph_embedding(&self, tape: &mut Tape, store: &ParamStore, st: &GenerationState) -> Result<Var> {
        let Some(h) = st.h else {
            return Ok(tape.constant(Matrix::zeros(1, self.config.graph_dim)));
        };
        let g = self.gate.forward(tape, store, h)?;
        let g = tape.sigmoid(g);
        let f = self.project.forward(tape, store, h)?;
        let gf = tape.mul(g, f)?;
        Ok(tape.sum_rows(gf))
    }

    pub fn add_node_logits(&self, tape: &mut Tape, store: &ParamStore, st: &GenerationState) -> Result<Var> {
        let hg = self.graph_embedding(tape, store, st)?;
        let x = tape.concat_cols(&[hg, st.cond])?;
        Ok(self.add_node.forward(tape, store, x)?)
    }

    pub fn add_edge_logits(&self, tape: &mut Tape, store: &ParamStore, st: &GenerationState, v: usize) -> Result<Var> {
        let hg = self.graph_embedding(tape, store, st)?;
        let hv = tape.gather_rows(st.node_states(), &[v])?;
        let x = tape.concat_cols(&[hg, hv, st.cond])?;
        Ok(self.add_edge.forward(tape, store, x)?)
    }

    /// One score per candidate as a `1 x k` row.
    pub fn dest_logits(&self, tape: &mut Tape, store: &ParamStore, st: &GenerationState, v: usize, dir: EdgeDirection, candidates: &[usize]) -> Result<Var> {
        let (srcs, dsts): (Vec<usize>, Vec<usize>) = candidates.iter().map(|&u| dir.endpoints(v, u)).unzip();
        let h = st.node_states();
        let hs = tape.gather_rows(h, &srcs)?;
        let hd = tape.gather_rows(h, &dsts)?;
        let cond = tape.gather_rows(st.cond, &vec![0; candidates.len()])?;
        let x = tape.concat_cols(&[hs, hd, cond])?;
        let scores = self.dest.forward(tape, store, x)?;
        Ok(tape.reshape(scores, 1, candidates.len())?)
    }

    pub fn offset_logits(&self, tape: &mut Tape, store: &ParamStore, st: &GenerationState, src: usize, dst: usize) -> Result<(Var, Var)> {
        let h = st.node_states();
        let hs = tape.gather_rows(h, &[src])?;
        let hd = tape.gather_rows(h, &[dst])?;
        let x = tape.concat_cols(&[hs, hd, st.cond])?;
        let lx = self.offset_x.forward(tape, store, x)?;
        let ly = self.offset_y.forward(tape, store, x)?;
        Ok((lx, ly))
    }

    /// Negative log-likelihood of one offset axis index under its head.
    fn offset_nll(&self, tape: &mut Tape, logits: Var, index: usize) -> Result<Var> {
        Ok(match self.config.offset_head {
            OffsetHead::Categorical => tape.cross_entropy(logits, index)?,
            OffsetHead::Thermometer => tape.bernoulli_ce(logits, &thermometer_bits(index))?,
        })
    }

    /// Probabilities over the offset axis values.
    pub fn offset_distribution(&self, logits: &[f64]) -> [f64; OFFSET_COUNT] {
        match self.config.offset_head {
            OffsetHead::Categorical => {
                let p = crate::tensor::softmax_rows(&Matrix::row_vector(logits.to_vec()));
                let mut out = [0.0; OFFSET_COUNT];
                out.copy_from_slice(p.data());
                out
            }
            OffsetHead::Thermometer => thermometer_distribution(logits),
        }
    }

    /// Teacher-forced negative log-likelihood of `trace` on `tape`.
    pub fn trace_loss(&self, tape: &mut Tape, store: &ParamStore, trace: &DecisionTrace, class_id: usize) -> Result<(Var, StepLogProbs)> {
        let mut st = self.start(tape, class_id)?;
        let mut losses: Vec<Var> = Vec::with_capacity(trace.len());
        let mut steps = StepLogProbs::default();
        let mut newest: Option<usize> = None;
        let mut pending: Option<(EdgeDirection, Option<usize>)> = None;
        let mut nodes_done = false;
        let bad = |step: usize, decision: Decision, reason: &'static str| ModelError::InvalidTrace { step, decision, reason };
        for (i, &d) in trace.decisions.iter().enumerate() {
            if nodes_done {
                return Err(bad(i, d, "decision after StopNodes"));
            }
            let (kind, choice, loss) = match d {
                Decision::AddNode(_) | Decision::StopNodes => {
                    if newest.is_some() || pending.is_some() {
                        return Err(bad(i, d, "edge phase of the previous node not finished"));
                    }
                    let choice = match d {
                        Decision::AddNode(o) => o.index(),
                        _ => STOP_NODES,
                    };
                    let logits = self.add_node_logits(tape, store, &st)?;
                    (DecisionKind::AddNode, choice, tape.cross_entropy(logits, choice)?)
                }
                Decision::AddEdge(dir) => {
                    let v = newest.ok_or_else(|| bad(i, d, "no node to attach"))?;
                    if pending.is_some() {
                        return Err(bad(i, d, "previous edge incomplete"));
                    }
                    let logits = self.add_edge_logits(tape, store, &st, v)?;
                    pending = Some((dir, None));
                    let choice = 1 + dir.index();
                    (DecisionKind::AddEdge, choice, tape.cross_entropy(logits, choice)?)
                }
                Decision::StopEdges => {
                    let v = newest.ok_or_else(|| bad(i, d, "no node to stop"))?;
                    if pending.is_some() {
                        return Err(bad(i, d, "previous edge incomplete"));
                    }
                    let logits = self.add_edge_logits(tape, store, &st, v)?;
                    (DecisionKind::AddEdge, NO_EDGE, tape.cross_entropy(logits, NO_EDGE)?)
                }
                Decision::ChooseDest(u) => {
                    let v = newest.ok_or_else(|| bad(i, d, "no node"))?;
                    let Some((dir, None)) = pending else { return Err(bad(i, d, "destination without AddEdge")) };
                    let cands = candidates(&st.graph, v);
                    let pos = cands.iter().position(|&c| c == u).ok_or_else(|| bad(i, d, "destination not a candidate"))?;
                    let logits = self.dest_logits(tape, store, &st, v, dir, &cands)?;
                    pending = Some((dir, Some(u)));
                    (DecisionKind::ChooseDest, pos, tape.cross_entropy(logits, pos)?)
                }
                Decision::ChooseOffset(label) => {
                    let v = newest.ok_or_else(|| bad(i, d, "no node"))?;
                    let Some((dir, Some(u))) = pending else { return Err(bad(i, d, "offset without destination")) };
                    let (src, dst) = dir.endpoints(v, u);
                    let (lx, ly) = self.offset_logits(tape, store, &st, src, dst)?;
                    let nx = self.offset_nll(tape, lx, label.dx_index())?;
                    let ny = self.offset_nll(tape, ly, label.dy_index())?;
                    let loss = tape.add(nx, ny)?;
                    let choice = label.dx_index() * OFFSET_COUNT + label.dy_index();
                    (DecisionKind::ChooseOffset, choice, loss)
                }
            };
            steps.push(StepLogProb { kind, choice, log_p: -tape.scalar(loss) });
            losses.push(loss);
            match d {
                Decision::AddNode(o) => newest = Some(self.add_node(tape, store, &mut st, o)?),
                Decision::StopNodes => nodes_done = true,
                Decision::StopEdges => newest = None,
                Decision::ChooseOffset(label) => {
                    let (dir, u) = match pending.take() {
                        Some((dir, Some(u))) => (dir, u),
                        _ => unreachable!("checked above"),
                    };
                    let (src, dst) = dir.endpoints(newest.expect("checked above"), u);
                    self.add_edge(tape, store, &mut st, src, dst, label)?;
                }
                _ => {}
            }
        }
        if !nodes_done {
            return Err(ModelError::InvalidTrace { step: trace.len(), decision: Decision::StopNodes, reason: "trace does not end with StopNodes" });
        }
        let all = tape.concat_cols(&losses)?;
        Ok((tape.sum(all), steps))
    }
}

/// Nodes the newest node `v` may still link to, ascending.
pub fn candidates(g: &LegoGraph, v: usize) -> Vec<usize> {
    let mut linked = vec![false; g.node_count()];
    for e in g.edges() {
        if e.src == v {
            linked[e.dst] = true;
        } else if e.dst == v {
            linked[e.src] = true;
        }
    }
    (0..g.node_count()).filter(|&u| u != v && !linked[u]).collect()
}

/// Partial structure plus its node states on the current tape.
#[derive(Debug, Clone)]
pub struct GenerationState {
    pub graph: LegoGraph,
    h: Option<Var>,
    cond: Var,
    cond_value: Matrix,
    pub class_id: usize,
}

impl GenerationState {
    fn node_states(&self) -> Var {
        self.h.expect("node states exist once a node was added")
    }

    /// Current node states, one row per node.
    pub fn node_state_values(&self, tape: &Tape) -> Option<Matrix> {
        self.h.map(|h| tape.value(h).clone())
    }

    /// Moves the state onto a fresh tape as constants, dropping history.
    pub fn detach(&mut self, tape: &mut Tape) {
        let h = self.node_state_values(tape);
        *tape = Tape::new();
        self.cond = tape.constant(self.cond_value.clone());
        self.h = h.map(|m| tape.constant(m));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionKind {
    AddNode,
    AddEdge,
    ChooseDest,
    ChooseOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLogProb {
    pub kind: DecisionKind,
    /// Head outcome index; offsets use `dx_index * 7 + dy_index`.
    pub choice: usize,
    pub log_p: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLogProbs {
    pub steps: Vec<StepLogProb>,
}

impl StepLogProbs {
    pub fn push(&mut self, s: StepLogProb) {
        self.steps.push(s);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.steps.iter().map(|s| s.log_p).sum()
    }
}

/// `k` leading ones followed by zeros.
pub fn thermometer_bits(k: usize) -> [f64; THERMOMETER_BITS] {
    let mut t = [0.0; THERMOMETER_BITS];
    for b in t.iter_mut().take(k) {
        *b = 1.0;
    }
    t
}

/// Probability of stopping at each index when reading bits until a zero.
pub fn thermometer_distribution(logits: &[f64]) -> [f64; OFFSET_COUNT] {
    let mut out = [0.0; OFFSET_COUNT];
    let mut run = 1.0;
    for (k, &x) in logits.iter().enumerate().take(THERMOMETER_BITS) {
        let s = crate::tensor::sigmoid_scalar(x);
        out[k] = run * (1.0 - s);
        run *= s;
    }
    out[THERMOMETER_BITS] = run;
    out
}

/// Index read off thresholded bits: the number of leading ones.
pub fn thermometer_decode(bits: &[f64]) -> usize {
    bits.iter().take_while(|&&b| b >= 0.5).count()
}

/// Network plus its parameters.
#[derive(Debug, Clone)]
pub struct Dgmlg {
    pub net: Network,
    pub store: ParamStore,
}

impl Dgmlg {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let net = Network::new(config, &mut store, &mut rng)?;
        Ok(Self { net, store })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    /// Total teacher-forced NLL and the per-decision log-probabilities.
    pub fn sequence_nll(&self, trace: &DecisionTrace, class_id: usize) -> Result<(f64, StepLogProbs)> {
        let mut tape = Tape::new();
        let (loss, steps) = self.net.trace_loss(&mut tape, &self.store, trace, class_id)?;
        Ok((tape.scalar(loss), steps))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_value(&self.net.config).expect("config serialises");
        Checkpoint::from_store(CHECKPOINT_KIND, config, &self.store)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(ModelError::Config(format!("checkpoint kind {:?}, expected {CHECKPOINT_KIND:?}", ck.kind)));
        }
        let config: ModelConfig = serde_json::from_value(ck.config.clone()).map_err(|e| ModelError::Config(e.to_string()))?;
        let mut model = Self::new(config, 0)?;
        ck.load_into(&mut model.store)?;
        Ok(model)
    }
}
