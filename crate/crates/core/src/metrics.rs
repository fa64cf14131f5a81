//! Sample-set metrics over graph embeddings and raw graphs.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{canonical_key, check_validity, LegoGraph};

/// Neighbour rank for the manifold metrics.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("embedding widths differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("need more than {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("covariance product has eigenvalue {0}, below the clamp tolerance")]
    NegativeEigenvalue(f64),
    #[error("ragged embedding rows")]
    Ragged,
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Reference,
    Generated,
}

/// `N x D` feature matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub data: DMatrix<f64>,
    pub source: Source,
}

impl EmbeddingSet {
    pub fn from_rows(rows: &[Vec<f64>], source: Source) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(MetricError::Ragged);
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(MetricError::NonFinite("embedding"));
        }
        let data = DMatrix::from_row_iterator(rows.len(), d, rows.iter().flatten().copied());
        Ok(Self { data, source })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

fn same_dim(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

fn need_rows(s: &EmbeddingSet, more_than: usize) -> Result<()> {
    if s.len() <= more_than {
        return Err(MetricError::TooFewRows { needed: more_than, got: s.len() });
    }
    Ok(())
}

fn mean_and_cov(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1.0);
    (mean, cov)
}

/// Eigen-decomposition of a symmetric matrix with tiny negative eigenvalues
/// clamped to zero; larger negative ones are an error.
fn psd_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (&m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &l| a.max(l.abs()));
    for l in eig.eigenvalues.iter_mut() {
        if *l < -1e-8 * scale {
            return Err(MetricError::NegativeEigenvalue(*l));
        }
        *l = l.max(0.0);
    }
    Ok(eig)
}

/// `|mu - mu'|^2 + Tr(S + S' - 2 (S S')^{1/2})` with the trace of the root
/// taken from the spectrum of `S^{1/2} S' S^{1/2}`.
pub fn frechet_distance(reference: &EmbeddingSet, generated: &EmbeddingSet) -> Result<f64> {
    same_dim(reference, generated)?;
    need_rows(reference, 1)?;
    need_rows(generated, 1)?;
    let (m1, s1) = mean_and_cov(&reference.data);
    let (m2, s2) = mean_and_cov(&generated.data);
    let e1 = psd_eigen(s1.clone())?;
    let root = &e1.eigenvectors * DMatrix::from_diagonal(&e1.eigenvalues.map(f64::sqrt)) * e1.eigenvectors.transpose();
    let inner = psd_eigen(&root * &s2 * &root)?;
    let tr_root: f64 = inner.eigenvalues.iter().map(|l| l.sqrt()).sum();
    let diff = m1 - m2;
    let fd = diff.dot(&diff) + s1.trace() + s2.trace() - 2.0 * tr_root;
    if !fd.is_finite() {
        return Err(MetricError::NonFinite("frechet distance"));
    }
    Ok(fd.max(0.0))
}

fn poly_kernel(a: &[f64], b: &[f64]) -> f64 {
    let d = a.len() as f64;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / d + 1.0).powi(3)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Unbiased squared MMD under `k(x, y) = (x.y / D + 1)^3`.
///
/// Equal-sized sets use the paired statistic
/// `1/(m(m-1)) sum_{i != j} [k(x_i,x_j) + k(y_i,y_j) - k(x_i,y_j) - k(x_j,y_i)]`,
/// which is exactly zero when the sets coincide row for row; otherwise the
/// cross term averages over all pairs.
pub fn kernel_distance(reference: &EmbeddingSet, generated: &EmbeddingSet) -> Result<f64> {
    same_dim(reference, generated)?;
    need_rows(reference, 1)?;
    need_rows(generated, 1)?;
    let (x, y) = (rows(&reference.data), rows(&generated.data));
    let (m, n) = (x.len(), y.len());
    let within = |s: &[Vec<f64>]| {
        let mut t = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    t += poly_kernel(&s[i], &s[j]);
                }
            }
        }
        t
    };
    let (kxx, kyy) = (within(&x), within(&y));
    let mut kxy = 0.0;
    let mut kxy_diag = 0.0;
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            let k = poly_kernel(xi, yj);
            kxy += k;
            if i == j {
                kxy_diag += k;
            }
        }
    }
    let kd = if m == n {
        let norm = (m * (m - 1)) as f64;
        (kxx + kyy - 2.0 * (kxy - kxy_diag)) / norm
    } else {
        kxx / (m * (m - 1)) as f64 + kyy / (n * (n - 1)) as f64 - 2.0 * kxy / (m * n) as f64
    };
    if !kd.is_finite() {
        return Err(MetricError::NonFinite("kernel distance"));
    }
    Ok(kd)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from each row to its `k`-th nearest other row.
fn knn_radii(s: &[Vec<f64>], k: usize) -> Vec<f64> {
    s.iter()
        .enumerate()
        .map(|(i, a)| {
            let mut d: Vec<f64> = s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, b)| sq_dist(a, b)).collect();
            d.sort_by(|p, q| p.total_cmp(q));
            d[k - 1].sqrt()
        })
        .collect()
}

/// Rows of `probe` inside the union of `k`-NN balls around `support`.
fn inside_fraction(support: &[Vec<f64>], radii: &[f64], probe: &[Vec<f64>]) -> f64 {
    let hits = probe.iter().filter(|p| support.iter().zip(radii).any(|(s, &r)| sq_dist(p, s).sqrt() <= r)).count();
    hits as f64 / probe.len() as f64
}

/// `(precision, recall)` with `k`-NN manifold estimates.
pub fn precision_recall(reference: &EmbeddingSet, generated: &EmbeddingSet, k: usize) -> Result<(f64, f64)> {
    same_dim(reference, generated)?;
    need_rows(reference, k)?;
    need_rows(generated, k)?;
    let (r, g) = (rows(&reference.data), rows(&generated.data));
    let (rr, gr) = (knn_radii(&r, k), knn_radii(&g, k));
    Ok((inside_fraction(&r, &rr, &g), inside_fraction(&g, &gr, &r)))
}

/// `(density, coverage)` against the reference `k`-NN balls.
pub fn density_coverage(reference: &EmbeddingSet, generated: &EmbeddingSet, k: usize) -> Result<(f64, f64)> {
    same_dim(reference, generated)?;
    need_rows(reference, k)?;
    need_rows(generated, k.saturating_sub(1))?;
    let (r, g) = (rows(&reference.data), rows(&generated.data));
    let radii = knn_radii(&r, k);
    let mut within = 0usize;
    let mut covered = vec![false; r.len()];
    for p in &g {
        for (i, (s, &rad)) in r.iter().zip(&radii).enumerate() {
            if sq_dist(p, s).sqrt() <= rad {
                within += 1;
                covered[i] = true;
            }
        }
    }
    let density = within as f64 / (k as f64 * g.len() as f64);
    let coverage = covered.iter().filter(|&&c| c).count() as f64 / r.len() as f64;
    Ok((density, coverage))
}

pub fn dc_harmonic_mean(density: f64, coverage: f64) -> f64 {
    if density <= 0.0 || coverage <= 0.0 {
        return 0.0;
    }
    2.0 * density * coverage / (density + coverage)
}

pub fn pct_valid(graphs: &[LegoGraph]) -> f64 {
    if graphs.is_empty() {
        return 0.0;
    }
    100.0 * graphs.iter().filter(|g| check_validity(g).valid).count() as f64 / graphs.len() as f64
}

/// Canonical keys of every valid training graph.
pub fn training_keys<'a>(training: impl IntoIterator<Item = &'a LegoGraph>) -> HashSet<String> {
    training.into_iter().filter_map(|g| canonical_key(g).ok()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Novelty {
    pub pct_novel: f64,
    /// Invalid graphs, all counted as novel.
    pub invalid: usize,
}

/// Share of graphs whose canonical key is not a training key.
pub fn pct_novel(graphs: &[LegoGraph], keys: &HashSet<String>) -> Novelty {
    if graphs.is_empty() {
        return Novelty { pct_novel: 0.0, invalid: 0 };
    }
    let mut invalid = 0;
    let mut novel = 0;
    for g in graphs {
        match canonical_key(g) {
            Ok(k) => {
                if !keys.contains(&k) {
                    novel += 1;
                }
            }
            Err(_) => {
                invalid += 1;
                novel += 1;
            }
        }
    }
    Novelty { pct_novel: 100.0 * novel as f64 / graphs.len() as f64, invalid }
}

/// Index of the closest training row; ties go to the lowest index.
pub fn nearest_neighbour(query: &[f64], training: &[Vec<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in training.iter().enumerate() {
        let d = sq_dist(query, t);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Normalised histogram of undirected node degrees.
pub fn degree_histogram(g: &LegoGraph) -> Vec<f64> {
    let adj = g.undirected_adjacency();
    let max = adj.iter().map(Vec::len).max().unwrap_or(0);
    let mut h = vec![0.0; max + 1];
    for a in &adj {
        h[a.len()] += 1.0;
    }
    let n = adj.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// First Wasserstein distance between histograms on `0, 1, 2, ...`.
pub fn wasserstein1(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let (mut cp, mut cq, mut total) = (0.0, 0.0, 0.0);
    for i in 0..len {
        cp += p.get(i).copied().unwrap_or(0.0);
        cq += q.get(i).copied().unwrap_or(0.0);
        total += (cp - cq).abs();
    }
    total
}

/// Squared MMD between degree histograms with `exp(-W1^2 / (2 sigma^2))`.
pub fn degree_mmd(reference: &[LegoGraph], generated: &[LegoGraph], sigma: f64) -> f64 {
    if reference.is_empty() || generated.is_empty() {
        return 0.0;
    }
    let hr: Vec<_> = reference.iter().map(degree_histogram).collect();
    let hg: Vec<_> = generated.iter().map(degree_histogram).collect();
    let kernel = |p: &[f64], q: &[f64]| {
        let w = wasserstein1(p, q);
        (-w * w / (2.0 * sigma * sigma)).exp()
    };
    let mean = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut t = 0.0;
        for x in a {
            for y in b {
                t += kernel(x, y);
            }
        }
        t / (a.len() * b.len()) as f64
    };
    mean(&hr, &hr) + mean(&hg, &hg) - 2.0 * mean(&hr, &hg)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fd: Option<f64>,
    pub kd: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub density: Option<f64>,
    pub coverage: Option<f64>,
    pub dc_harmonic_mean: Option<f64>,
    pub gin_accuracy: Option<f64>,
    pub pct_valid: Option<f64>,
    pub pct_novel: Option<f64>,
    pub degree_mmd: Option<f64>,
    pub n_reference: usize,
    pub n_generated: usize,
    pub k: usize,
}

impl MetricReport {
    pub const CSV_COLUMNS: [&'static str; 14] = [
        "fd", "kd", "precision", "recall", "density", "coverage", "dc_harmonic_mean", "gin_accuracy", "pct_valid", "pct_novel", "degree_mmd", "n_reference", "n_generated", "k",
    ];

    /// FD, KD and the manifold metrics of two embedding sets.
    pub fn from_embeddings(reference: &EmbeddingSet, generated: &EmbeddingSet, k: usize) -> Result<Self> {
        let (p, r) = precision_recall(reference, generated, k)?;
        let (d, c) = density_coverage(reference, generated, k)?;
        Ok(Self {
            fd: Some(frechet_distance(reference, generated)?),
            kd: Some(kernel_distance(reference, generated)?),
            precision: Some(p),
            recall: Some(r),
            density: Some(d),
            coverage: Some(c),
            dc_harmonic_mean: Some(dc_harmonic_mean(d, c)),
            n_reference: reference.len(),
            n_generated: generated.len(),
            k,
            ..Default::default()
        })
    }

    pub fn csv_header() -> String {
        Self::CSV_COLUMNS.join(",")
    }

    /// Missing values are left blank.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut cells: Vec<String> = [
            self.fd, self.kd, self.precision, self.recall, self.density, self.coverage, self.dc_harmonic_mean, self.gin_accuracy, self.pct_valid, self.pct_novel, self.degree_mmd,
        ]
        .into_iter()
        .map(opt)
        .collect();
        cells.extend([self.n_reference.to_string(), self.n_generated.to_string(), self.k.to_string()]);
        cells.join(",")
    }
}
