//! Experiment pipelines: permutation drift, generation evaluation and model
//! selection.

mod plot;

pub use plot::svg_line_charts;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::dgmlg::{sample, Dgmlg, ModelError, SampleOptions};
use crate::geometry::{check_validity, valid_options, with_implied_edges, EdgeDirection, GeometryError, LegoGraph, Orientation};
use crate::gin::{gin_accuracy, Gin, GinError};
use crate::metrics::{degree_mmd, pct_novel, pct_valid, training_keys, EmbeddingSet, MetricError, MetricReport, Source, DEFAULT_K};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Gin(#[from] GinError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Either deletes a random brick (never one whose removal disconnects the
/// structure) or attaches a brick of random orientation to a random existing
/// brick with a random direction and valid offset, then adds every implied
/// edge. Single-brick graphs always grow.
pub fn permute_once(g: &LegoGraph, rng: &mut impl Rng) -> Result<LegoGraph> {
    let report = check_validity(g);
    if !report.valid || g.is_empty() {
        return Err(GeometryError::Invalid(report).into());
    }
    if g.node_count() > 1 && rng.gen_bool(0.5) {
        let mut order: Vec<usize> = (0..g.node_count()).collect();
        order.shuffle(rng);
        for v in order {
            let mut h = g.clone();
            h.remove_node(v);
            if check_validity(&h).valid {
                return Ok(h);
            }
        }
    }
    add_random_brick(g, rng)
}

/// Attaches one brick at a uniformly random valid spot next to a uniformly
/// random existing brick, with implied edges added.
pub fn add_random_brick(g: &LegoGraph, rng: &mut impl Rng) -> Result<LegoGraph> {
    let orientation = Orientation::ALL[rng.gen_range(0..2)];
    let mut h = g.clone();
    let v = h.add_node(orientation);
    let mut pairs: Vec<(usize, EdgeDirection)> = (0..g.node_count()).flat_map(|u| [(u, EdgeDirection::Incoming), (u, EdgeDirection::Outgoing)]).collect();
    pairs.shuffle(rng);
    let options = [EdgeDirection::Incoming, EdgeDirection::Outgoing].map(|d| valid_options(&h, v, d));
    for (u, dir) in pairs {
        if let Some(labels) = options[dir.index()].offsets.get(&u) {
            let label = labels[rng.gen_range(0..labels.len())];
            let (src, dst) = dir.endpoints(v, u);
            h.add_edge(src, dst, label)?;
            return Ok(with_implied_edges(&h)?);
        }
    }
    Err(HarnessError::Input("no free spot next to any brick".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermutationConfig {
    pub iterations: usize,
    /// Degree MMD is computed when `iteration % mmd_every == 0`.
    pub mmd_every: usize,
    pub seed: u64,
    pub k: usize,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self { iterations: 500, mmd_every: 25, seed: 0, k: DEFAULT_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRow {
    pub iteration: usize,
    pub fd: f64,
    pub kd: f64,
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
    pub gin_acc: f64,
    pub degree_mmd: Option<f64>,
    pub mean_nodes: f64,
}

pub const PERMUTATION_COLUMNS: [&str; 10] = ["iteration", "fd", "kd", "precision", "recall", "density", "coverage", "gin_acc", "degree_mmd", "mean_nodes"];

impl PermutationRow {
    pub fn csv(&self) -> String {
        let mmd = self.degree_mmd.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iteration, self.fd, self.kd, self.precision, self.recall, self.density, self.coverage, self.gin_acc, mmd, self.mean_nodes
        )
    }
}

pub fn permutation_csv(rows: &[PermutationRow]) -> String {
    let mut out = PERMUTATION_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// Drifts a copy of `dataset` one permutation per graph per iteration and
/// scores it against the untouched original. Row 0 is the undrifted copy.
/// `on_row` sees each row as soon as it is computed.
pub fn run_permutation_analysis<F>(dataset: &Dataset, gin: &Gin, cfg: &PermutationConfig, mut on_row: F) -> Result<Vec<PermutationRow>>
where
    F: FnMut(&PermutationRow),
{
    if dataset.is_empty() {
        return Err(HarnessError::Input("empty dataset".into()));
    }
    let reference = dataset.graphs();
    let labels: Vec<usize> = dataset.records.iter().map(|r| r.class_id).collect();
    let ref_set = EmbeddingSet::from_rows(&gin.embed_set(&reference)?, Source::Reference)?;
    let mut copies = reference.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.iterations + 1);
    for iteration in 0..=cfg.iterations {
        if iteration > 0 {
            for g in copies.iter_mut() {
                *g = permute_once(g, &mut rng)?;
            }
        }
        let gen_set = EmbeddingSet::from_rows(&gin.embed_set(&copies)?, Source::Generated)?;
        let m = MetricReport::from_embeddings(&ref_set, &gen_set, cfg.k)?;
        let mmd = (cfg.mmd_every > 0 && iteration % cfg.mmd_every == 0).then(|| degree_mmd(&reference, &copies, 1.0));
        let row = PermutationRow {
            iteration,
            fd: m.fd.unwrap_or_default(),
            kd: m.kd.unwrap_or_default(),
            precision: m.precision.unwrap_or_default(),
            recall: m.recall.unwrap_or_default(),
            density: m.density.unwrap_or_default(),
            coverage: m.coverage.unwrap_or_default(),
            gin_acc: gin_accuracy(gin, &copies, &labels)?,
            degree_mmd: mmd,
            mean_nodes: copies.iter().map(|g| g.node_count() as f64).sum::<f64>() / copies.len() as f64,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Hex SHA-256 of the given byte strings, in order.
pub fn content_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Append-only experiment record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog<R> {
    pub config: serde_json::Value,
    pub input_hash: String,
    pub rows: Vec<R>,
}

/// Class id per sample, proportional to the dataset's class frequencies
/// (largest remainders, ties to the lower id), grouped by class.
pub fn class_schedule(dataset: &Dataset, n: usize) -> Vec<usize> {
    let mut counts = vec![0usize; dataset.num_classes()];
    for r in &dataset.records {
        counts[r.class_id] += 1;
    }
    let total = dataset.len().max(1) as f64;
    let quotas: Vec<f64> = counts.iter().map(|&c| c as f64 * n as f64 / total).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..alloc.len()).collect();
    rest.sort_by(|&a, &b| (quotas[b] - alloc[b] as f64).total_cmp(&(quotas[a] - alloc[a] as f64)).then(a.cmp(&b)));
    let missing = n - alloc.iter().sum::<usize>();
    for &c in rest.iter().take(missing) {
        alloc[c] += 1;
    }
    alloc.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(c, k)).collect()
}

/// Random valid assemblies: each sample copies the size of a random training
/// record of its class and grows from one random brick by uniformly random
/// valid attachments.
pub fn random_assembly_baseline(dataset: &Dataset, schedule: &[usize], seed: u64) -> Result<Vec<LegoGraph>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in &dataset.records {
        sizes.entry(r.class_id).or_default().push(r.graph.node_count());
    }
    schedule
        .iter()
        .map(|&c| {
            let pool = sizes.get(&c).ok_or_else(|| HarnessError::Input(format!("class {c} has no records")))?;
            let target = pool[rng.gen_range(0..pool.len())].max(1);
            let mut g = LegoGraph::with_class(c);
            g.add_node(Orientation::ALL[rng.gen_range(0..2)]);
            while g.node_count() < target {
                g = add_random_brick(&g, &mut rng)?;
            }
            g.set_class_label(Some(c));
            Ok(g)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class_id: usize,
    pub class_name: String,
    pub samples: usize,
    pub mean_nodes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEval {
    pub report: MetricReport,
    pub per_class: Vec<ClassSummary>,
    pub mean_nodes: f64,
}

/// Scores generated graphs (with their conditioning labels) against the
/// whole dataset as reference.
pub fn score_samples(samples: &[LegoGraph], labels: &[usize], dataset: &Dataset, gin: &Gin, k: usize) -> Result<GenerationEval> {
    let reference = dataset.graphs();
    let ref_set = EmbeddingSet::from_rows(&gin.embed_set(&reference)?, Source::Reference)?;
    let gen_set = EmbeddingSet::from_rows(&gin.embed_set(samples)?, Source::Generated)?;
    let mut report = MetricReport::from_embeddings(&ref_set, &gen_set, k)?;
    report.gin_accuracy = Some(gin_accuracy(gin, samples, labels)?);
    report.pct_valid = Some(pct_valid(samples));
    report.pct_novel = Some(pct_novel(samples, &training_keys(&reference)).pct_novel);
    report.degree_mmd = Some(degree_mmd(&reference, samples, 1.0));
    let mut per_class = Vec::new();
    for (c, name) in dataset.class_names.iter().enumerate() {
        let sizes: Vec<usize> = samples.iter().zip(labels).filter(|(_, &l)| l == c).map(|(g, _)| g.node_count()).collect();
        if sizes.is_empty() {
            continue;
        }
        per_class.push(ClassSummary { class_id: c, class_name: name.clone(), samples: sizes.len(), mean_nodes: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64 });
    }
    let mean_nodes = samples.iter().map(|g| g.node_count() as f64).sum::<f64>() / samples.len().max(1) as f64;
    Ok(GenerationEval { report, per_class, mean_nodes })
}

/// Draws `n` class-proportional samples from the model.
pub fn generate_samples(model: &Dgmlg, dataset: &Dataset, n: usize, opts: SampleOptions, seed: u64) -> Result<(Vec<LegoGraph>, Vec<usize>)> {
    let schedule = class_schedule(dataset, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(n);
    for &c in &schedule {
        let mut g = sample(model, c, opts, &mut rng)?.graph;
        g.set_class_label(Some(c));
        graphs.push(g);
    }
    Ok((graphs, schedule))
}

pub fn run_generation_eval(model: &Dgmlg, gin: &Gin, dataset: &Dataset, n: usize, opts: SampleOptions, seed: u64) -> Result<GenerationEval> {
    let (graphs, labels) = generate_samples(model, dataset, n, opts, seed)?;
    score_samples(&graphs, &labels, dataset, gin, DEFAULT_K)
}

/// Epoch with the highest density/coverage harmonic mean; earliest on ties.
pub fn select_best_epoch(reports: &[MetricReport]) -> Result<usize> {
    if reports.is_empty() {
        return Err(HarnessError::Input("no epoch reports".into()));
    }
    let score = |r: &MetricReport| r.dc_harmonic_mean.unwrap_or(0.0);
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if score(r) > score(&reports[best]) {
            best = i;
        }
    }
    Ok(best)
}
