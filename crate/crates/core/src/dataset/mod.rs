//! Build-sequence datasets.
//!
//! Records are stored as JSON Lines, one structure per line:
//!
//! ```text
//! {"class":"wall","nodes":[{"o":"x"},{"o":"x"}],"edges":[{"s":0,"d":1,"dx":2,"dy":0}]}
//! ```
//!
//! Node order is assembly order. Generated sample sets use the same schema
//! with an extra `meta` object.

pub mod synth;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{canonical_key, check_validity, rotate, EdgeLabel, GeometryError, LegoGraph, Orientation};

pub use synth::{synth_dataset, synth_generate, SynthParams, ARCHETYPES};
pub use trace::{derive_decision_trace, replay_trace, trace_for_graph, Decision, DecisionTrace, ReplayError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("record {record} (line {line}): {message}")]
    Validation { record: usize, line: usize, message: String },
    #[error("record {record}: node {node} has no edge to an earlier node")]
    AssemblyOrder { record: usize, node: usize },
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeJson {
    o: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EdgeJson {
    s: usize,
    d: usize,
    dx: i32,
    dy: i32,
}

/// On-disk form of one line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordJson {
    class: String,
    nodes: Vec<NodeJson>,
    edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl RecordJson {
    pub fn from_graph(class: &str, g: &LegoGraph, meta: Option<serde_json::Value>) -> Self {
        Self {
            class: class.to_string(),
            nodes: g.nodes().iter().map(|o| NodeJson { o: o.code().to_string() }).collect(),
            edges: g.edges().iter().map(|e| EdgeJson { s: e.src, d: e.dst, dx: e.label.dx(), dy: e.label.dy() }).collect(),
            meta,
        }
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn meta(&self) -> Option<&serde_json::Value> {
        self.meta.as_ref()
    }

    /// Builds the graph without any validity requirement beyond well-formed edges.
    pub fn to_graph(&self) -> Result<LegoGraph, String> {
        let mut g = LegoGraph::new();
        for n in &self.nodes {
            g.add_node(Orientation::from_code(&n.o).ok_or_else(|| format!("bad orientation {:?}", n.o))?);
        }
        for e in &self.edges {
            let label = EdgeLabel::new(e.dx, e.dy).map_err(|err| err.to_string())?;
            g.add_edge(e.s, e.d, label).map_err(|err| err.to_string())?;
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildRecord {
    pub class_name: String,
    pub class_id: usize,
    pub graph: LegoGraph,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<BuildRecord>,
    pub class_names: Vec<String>,
}

/// Returns the first non-root node lacking an edge to an earlier node.
pub fn assembly_order_violation(g: &LegoGraph) -> Option<usize> {
    let mut has_earlier = vec![false; g.node_count()];
    for e in g.edges() {
        let (lo, hi) = (e.src.min(e.dst), e.src.max(e.dst));
        if lo < hi {
            has_earlier[hi] = true;
        }
    }
    (1..g.node_count()).find(|&v| !has_earlier[v])
}

impl Dataset {
    /// Assigns dense class ids in sorted class-name order.
    pub fn from_graphs(items: Vec<(String, LegoGraph)>) -> Self {
        let class_names: Vec<String> = items.iter().map(|(c, _)| c.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let records = items
            .into_iter()
            .map(|(class_name, mut graph)| {
                let class_id = class_names.binary_search(&class_name).expect("collected above");
                graph.set_class_label(Some(class_id));
                BuildRecord { class_name, class_id, graph }
            })
            .collect();
        Self { records, class_names }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn graphs(&self) -> Vec<LegoGraph> {
        self.records.iter().map(|r| r.graph.clone()).collect()
    }

    /// Canonical serialization: one JSON object per line, `\n` terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(&RecordJson::from_graph(&r.class_name, &r.graph, None)).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// Parses and validates JSON Lines text.
    pub fn parse_jsonl(text: &str) -> Result<Self, DatasetError> {
        let raw = parse_records(text)?;
        let mut items = Vec::with_capacity(raw.len());
        for (record, (line, json)) in raw.into_iter().enumerate() {
            let graph = json.to_graph().map_err(|message| DatasetError::Validation { record, line, message })?;
            let report = check_validity(&graph);
            if !report.valid {
                return Err(DatasetError::Validation { record, line, message: format!("invalid structure: {report:?}") });
            }
            if let Some(node) = assembly_order_violation(&graph) {
                return Err(DatasetError::AssemblyOrder { record, node });
            }
            items.push((json.class, graph));
        }
        Ok(Self::from_graphs(items))
    }
}

/// Parses JSON Lines without validating structures; returns `(line, record)`.
pub fn parse_records(text: &str) -> Result<Vec<(usize, RecordJson)>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordJson =
            serde_json::from_str(line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    Dataset::parse_jsonl(&std::fs::read_to_string(path)?)
}

/// Reads a sample file whose graphs may be invalid.
pub fn load_samples(path: &Path) -> Result<Vec<RecordJson>, DatasetError> {
    Ok(parse_records(&std::fs::read_to_string(path)?)?.into_iter().map(|(_, r)| r).collect())
}

pub fn save_samples(path: &Path, records: &[RecordJson]) -> Result<(), DatasetError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Adds the 90, 180 and 270 degree rotations of every record (record-major
/// order). With `dedup`, records whose class and canonical key were already
/// emitted are skipped.
pub fn augment_rotations(d: &Dataset, dedup: bool) -> Result<Dataset, DatasetError> {
    let mut seen: HashSet<(usize, String)> = HashSet::new();
    let mut records = Vec::with_capacity(d.len() * 4);
    for r in &d.records {
        for turns in 0..4 {
            let graph = rotate(&r.graph, turns)?;
            if dedup {
                // Keys are rotation-invariant; dedup on the exact graph instead
                // so distinct rotations survive while repeats do not.
                let key = format!("{:?}", (graph.nodes(), graph.edges()));
                if !seen.insert((r.class_id, key)) {
                    continue;
                }
            }
            records.push(BuildRecord { class_name: r.class_name.clone(), class_id: r.class_id, graph });
        }
    }
    Ok(Dataset { records, class_names: d.class_names.clone() })
}

/// Number of physically distinct structures (by canonical key) per dataset.
pub fn distinct_structures(d: &Dataset) -> Result<usize, DatasetError> {
    let mut keys = HashSet::new();
    for r in &d.records {
        keys.insert(canonical_key(&r.graph)?);
    }
    Ok(keys.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub records: usize,
    pub classes: usize,
    pub per_class: BTreeMap<String, usize>,
    pub mean_nodes: f64,
    pub mean_edges: f64,
    pub validity_rate: f64,
}

pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    let n = d.len();
    let mut per_class = BTreeMap::new();
    for r in &d.records {
        *per_class.entry(r.class_name.clone()).or_insert(0) += 1;
    }
    let mean = |f: &dyn Fn(&BuildRecord) -> f64| if n == 0 { 0.0 } else { d.records.iter().map(f).sum::<f64>() / n as f64 };
    DatasetStats {
        records: n,
        classes: d.class_names.len(),
        per_class,
        mean_nodes: mean(&|r| r.graph.node_count() as f64),
        mean_edges: mean(&|r| r.graph.edge_count() as f64),
        validity_rate: mean(&|r| if check_validity(&r.graph).valid { 1.0 } else { 0.0 }),
    }
}
