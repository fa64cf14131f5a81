//! Procedural stand-ins for the twelve structure classes.
//!
//! Each archetype places bricks directly in world coordinates; the graph is
//! then derived from physical support pairs, restricted to the largest
//! connected component, and ordered bottom-up along the connected frontier
//! so that every brick after the first attaches to an earlier one.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BuildRecord, Dataset, DatasetError};
use crate::geometry::{support_pairs, LegoGraph, Orientation, Placement};

/// Class names, alphabetical; the index is the synthetic class id.
pub const ARCHETYPES: [&str; 12] =
    ["bar", "bench", "car", "cuboid", "cup", "hollow", "line", "plate", "pyramid", "sofa", "table", "wall"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub min_bricks: usize,
    pub max_bricks: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { min_bricks: 20, max_bricks: 90 }
    }
}

use Orientation::{AlongX, AlongY};

/// Collision-checked brick collector.
#[derive(Default)]
struct Builder {
    bricks: Vec<Placement>,
    cells: HashSet<(i32, i32, i32)>,
}

impl Builder {
    fn place(&mut self, x: i32, y: i32, z: i32, o: Orientation) -> bool {
        let p = Placement::new(x, y, z, o);
        if p.cells().any(|c| self.cells.contains(&c)) {
            return false;
        }
        self.cells.extend(p.cells());
        self.bricks.push(p);
        true
    }

    /// Solid rectangle `w x d` (multiples of 4). Even layers are AlongX rows
    /// in running bond overhanging two studs on shifted rows; odd layers are
    /// AlongY columns set in by one stud so every brick spans three below.
    fn solid_layer(&mut self, x0: i32, y0: i32, w: i32, d: i32, z: i32) {
        if z % 2 == 0 {
            for b in 0..d / 2 {
                let shifted = b % 2 == 1 && w >= 8;
                let (mut x, end) = if shifted { (x0 - 2, x0 + w + 2) } else { (x0, x0 + w) };
                while x + 4 <= end {
                    self.place(x, y0 + 2 * b, z, AlongX);
                    x += 4;
                }
            }
        } else {
            for i in 0..(w / 2 - 1).max(0) {
                let (mut y, end) = if d < 8 {
                    (y0, y0 + d)
                } else if i % 2 == 1 {
                    (y0 - 1, y0 + d + 1)
                } else {
                    (y0 + 1, y0 + d + 1)
                };
                while y + 4 <= end {
                    self.place(x0 + 1 + 2 * i, y, z, AlongY);
                    y += 4;
                }
            }
        }
    }

    /// Rectangular ring of 2-stud walls; corners alternate owner per layer.
    fn ring_layer(&mut self, x0: i32, y0: i32, w: i32, d: i32, z: i32) {
        if z % 2 == 0 {
            for y in [y0, y0 + d - 2] {
                let mut x = x0;
                while x + 4 <= x0 + w {
                    self.place(x, y, z, AlongX);
                    x += 4;
                }
            }
            for x in [x0, x0 + w - 2] {
                let mut y = y0 + 2;
                while y + 4 <= y0 + d - 2 {
                    self.place(x, y, z, AlongY);
                    y += 4;
                }
            }
        } else {
            for x in [x0, x0 + w - 2] {
                let mut y = y0;
                while y + 4 <= y0 + d {
                    self.place(x, y, z, AlongY);
                    y += 4;
                }
            }
            for y in [y0, y0 + d - 2] {
                let mut x = x0 + 2;
                while x + 4 <= x0 + w - 2 {
                    self.place(x, y, z, AlongX);
                    x += 4;
                }
            }
        }
    }

    /// Crossed column inside the 4x4 box at `(x0, y0)`.
    fn pillar(&mut self, x0: i32, y0: i32, z0: i32, height: i32) {
        for z in z0..z0 + height {
            if z % 2 == 0 {
                self.place(x0, y0 + 1, z, AlongX);
            } else {
                self.place(x0 + 1, y0, z, AlongY);
            }
        }
    }

    /// Straight running-bond wall along x, 2 studs deep.
    fn wall_row(&mut self, x0: i32, y: i32, w: i32, z: i32) {
        let mut x = x0 + if z % 2 == 1 { 2 } else { 0 };
        while x + 4 <= x0 + w {
            self.place(x, y, z, AlongX);
            x += 4;
        }
    }
}

fn round4(v: f64, min: i32) -> i32 {
    ((v / 4.0).round() as i32 * 4).max(min)
}

fn build(class: &str, target: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Placement>, DatasetError> {
    let n = target as f64;
    let mut b = Builder::default();
    match class {
        "bar" => {
            // Tall crossed column; occasional layers repeat the orientation
            // shifted along their long axis.
            let mut z = 0;
            let start = rng.gen_range(0..2);
            while (b.bricks.len()) < target {
                let o = if (z + start) % 2 == 0 { AlongX } else { AlongY };
                let jitter = if rng.gen_bool(0.2) { rng.gen_range(-1..=1) } else { 0 };
                match o {
                    AlongX => b.place(jitter, 1, z, AlongX),
                    AlongY => b.place(1, jitter, z, AlongY),
                };
                z += 1;
            }
        }
        "line" => {
            // Consecutive steps must sum to at least 4 so same-layer bricks
            // never touch.
            let (mut x, mut prev) = (0, 2);
            for i in 0..target {
                b.place(x, 0, (i % 2) as i32, AlongX);
                prev = if rng.gen_bool(0.7) { 2.max(4 - prev) } else { rng.gen_range((4 - prev).max(1)..=3) };
                x += prev;
            }
        }
        "wall" => {
            let per_row = rng.gen_range(3..=6);
            let rows = ((n / per_row as f64).round() as i32).max(2);
            for z in 0..rows {
                b.wall_row(0, 0, 4 * per_row, z);
                if z % 2 == 1 {
                    b.place(4 * per_row - 2, 0, z, AlongX);
                }
            }
        }
        "cuboid" => {
            let w = 4 * rng.gen_range(2..=3);
            let d = 4 * rng.gen_range(2..=3);
            let per_layer = (w * d) as f64 / 8.0;
            let layers = ((n / per_layer).round() as i32).max(2);
            for z in 0..layers {
                b.solid_layer(0, 0, w, d, z);
            }
        }
        "plate" => {
            let area = 4.0 * n;
            let w = round4(area.sqrt() * rng.gen_range(0.8..1.25), 8);
            let d = round4(area / w as f64, 8);
            b.solid_layer(0, 0, w, d, 0);
            b.solid_layer(0, 0, w, d, 1);
        }
        "pyramid" => {
            let aspect = if rng.gen_bool(0.5) { 0 } else { 4 };
            let stack = |base: i32| {
                let mut p = Builder::default();
                let mut k = 0;
                while base - 4 * k >= 4 {
                    p.solid_layer(2 * k, 2 * k, base - 4 * k, base + aspect - 4 * k, k);
                    k += 1;
                }
                p
            };
            let best = (2..=10).map(|s| stack(4 * s)).min_by_key(|p| p.bricks.len().abs_diff(target)).expect("non-empty range");
            b = best;
        }
        "table" => {
            let w = 4 * rng.gen_range(3..=5);
            let d = 4 * rng.gen_range(2..=4);
            let slab = (w * d / 4) as f64;
            let legs = (((n - slab) / 4.0).round() as i32).clamp(2, 12);
            for (x, y) in [(0, 0), (w - 4, 0), (0, d - 4), (w - 4, d - 4)] {
                b.pillar(x, y, 0, legs);
            }
            b.solid_layer(0, 0, w, d, legs);
            b.solid_layer(0, 0, w, d, legs + 1);
        }
        "bench" => {
            let legs = rng.gen_range(2..=4);
            let w = round4(n - 2.0 * legs as f64, 12);
            for x in [0, w - 4] {
                b.pillar(x, 0, 0, legs);
            }
            b.solid_layer(0, 0, w, 4, legs);
            b.solid_layer(0, 0, w, 4, legs + 1);
        }
        "sofa" => {
            let d = 8;
            let back = rng.gen_range(2..=5);
            let arm = rng.gen_range(1..=2);
            let per_w = 2.0 * d as f64 / 8.0 + back as f64 / 4.0;
            let w = round4((n - 2.0 * arm as f64) / per_w * 1.0, 12);
            b.solid_layer(0, 0, w, d, 0);
            b.solid_layer(0, 0, w, d, 1);
            for z in 2..2 + back {
                b.wall_row(0, d - 2, w, z);
            }
            for x in [0, w - 4] {
                b.pillar(x, 0, 2, arm);
            }
        }
        "cup" => {
            let side = round4((n / 3.0).sqrt() * 2.0, 8);
            let w = side;
            let d = side;
            b.solid_layer(0, 0, w, d, 0);
            b.solid_layer(0, 0, w, d, 1);
            let ring = (w + d) as f64 / 2.0 - 2.0;
            let base = (w * d / 4) as f64;
            let walls = (((n - base) / ring).round() as i32).max(2);
            for z in 2..2 + walls {
                b.ring_layer(0, 0, w, d, z);
            }
        }
        "hollow" => {
            let w = 4 * rng.gen_range(2..=4);
            let d = 4 * rng.gen_range(2..=4);
            let ring = (w + d) as f64 / 2.0 - 2.0;
            let layers = ((n / ring).round() as i32).max(2);
            for z in 0..layers {
                b.ring_layer(0, 0, w, d, z);
            }
        }
        "car" => {
            let d = 8;
            let cabin_layers = rng.gen_range(1..=2);
            let w = round4((n - 4.0) / (2.0 + cabin_layers as f64 * 0.5) * 8.0 / d as f64, 12);
            for (x, y) in [(0, 0), (w - 2, 0), (0, d - 4), (w - 2, d - 4)] {
                b.place(x, y, 0, AlongY);
            }
            b.solid_layer(0, 0, w, d, 1);
            b.solid_layer(0, 0, w, d, 2);
            let cw = round4(w as f64 / 2.0, 4);
            let cx = round4((w - cw) as f64 / 2.0, 0);
            for z in 3..3 + cabin_layers {
                b.solid_layer(cx, 0, cw, d, z);
            }
        }
        other => return Err(DatasetError::UnknownClass(other.to_string())),
    }
    Ok(b.bricks)
}

/// Largest connected component in frontier assembly order, as a graph whose
/// edges are every physical support pair, listed in assembly order.
pub fn assemble(placements: &[Placement]) -> LegoGraph {
    let n = placements.len();
    let pairs = support_pairs(placements);
    let mut adj = vec![Vec::new(); n];
    for e in &pairs {
        adj[e.src].push(e.dst);
        adj[e.dst].push(e.src);
    }
    // Largest component (lowest member index breaks ties).
    let mut comp = vec![usize::MAX; n];
    let mut best = (0usize, 0usize);
    let mut count = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = count;
        let mut size = 0;
        while let Some(u) = stack.pop() {
            size += 1;
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = count;
                    stack.push(v);
                }
            }
        }
        if size > best.0 {
            best = (size, count);
        }
        count += 1;
    }
    let key = |i: usize| {
        let p = placements[i];
        (p.z, p.y, p.x, i)
    };
    let members: Vec<usize> = (0..n).filter(|&i| comp[i] == best.1).collect();
    let Some(&start) = members.iter().min_by_key(|&&i| key(i)) else {
        return LegoGraph::new();
    };
    let mut order = vec![start];
    let mut placed = vec![false; n];
    placed[start] = true;
    let mut frontier: BTreeSet<(i32, i32, i32, usize)> = adj[start].iter().map(|&v| key(v)).collect();
    while let Some(next) = frontier.pop_first() {
        let v = next.3;
        if placed[v] {
            continue;
        }
        placed[v] = true;
        order.push(v);
        for &u in &adj[v] {
            if !placed[u] {
                frontier.insert(key(u));
            }
        }
    }
    let mut new_id = vec![usize::MAX; n];
    for (i, &old) in order.iter().enumerate() {
        new_id[old] = i;
    }
    let mut g = LegoGraph::new();
    for &old in &order {
        g.add_node(placements[old].orientation);
    }
    let mut edges: Vec<_> = pairs
        .iter()
        .filter(|e| placed[e.src] && placed[e.dst])
        .map(|e| (new_id[e.src], new_id[e.dst], e.label))
        .collect();
    edges.sort_by_key(|&(s, d, _)| (s.max(d), s.min(d)));
    for (s, d, label) in edges {
        g.add_edge(s, d, label).expect("support pairs are unique");
    }
    g
}

/// One synthetic build of the named archetype.
pub fn synth_generate(class_name: &str, params: SynthParams, seed: u64) -> Result<BuildRecord, DatasetError> {
    let class_id = ARCHETYPES.iter().position(|c| *c == class_name).ok_or_else(|| DatasetError::UnknownClass(class_name.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let lo = params.min_bricks.max(1);
    let hi = params.max_bricks.max(lo);
    let target = rng.gen_range(lo..=hi);
    let placements = build(class_name, target, &mut rng)?;
    let mut graph = assemble(&placements);
    graph.set_class_label(Some(class_id));
    Ok(BuildRecord { class_name: class_name.to_string(), class_id, graph })
}

/// `per_class` builds of every listed class, class ids dense in list order
/// sorted alphabetically.
pub fn synth_dataset(classes: &[&str], per_class: usize, params: SynthParams, seed: u64) -> Result<Dataset, DatasetError> {
    let mut items = Vec::with_capacity(classes.len() * per_class);
    for class in classes {
        for i in 0..per_class {
            let r = synth_generate(class, params, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?;
            items.push((r.class_name, r.graph));
        }
    }
    Ok(Dataset::from_graphs(items))
}
