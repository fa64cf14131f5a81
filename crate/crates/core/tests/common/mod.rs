//! Brute-force voxel oracle and random graph generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use legogen::geometry::{Edge, EdgeLabel, LegoGraph, Orientation, Placement, ValidityReport};
use rand::seq::SliceRandom;
use rand::Rng;

/// Footprint width and depth, written out independently of the library.
pub fn footprint(o: Orientation) -> (i32, i32) {
    match o {
        Orientation::AlongX => (4, 2),
        Orientation::AlongY => (2, 4),
    }
}

pub fn voxels(x: i32, y: i32, z: i32, o: Orientation) -> Vec<(i32, i32, i32)> {
    let (w, d) = footprint(o);
    let mut v = Vec::new();
    for i in 0..w {
        for j in 0..d {
            v.push((x + i, y + j, z));
        }
    }
    v
}

fn columns(x: i32, y: i32, o: Orientation) -> BTreeSet<(i32, i32)> {
    voxels(x, y, 0, o).into_iter().map(|(a, b, _)| (a, b)).collect()
}

pub fn studs_touch(a: (i32, i32, Orientation), b: (i32, i32, Orientation)) -> bool {
    !columns(a.0, a.1, a.2).is_disjoint(&columns(b.0, b.1, b.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub report: ValidityReport,
    /// Positions with node 0 at the origin, when connected and consistent.
    pub positions: Option<Vec<(i32, i32, i32)>>,
    /// Physical contacts missing from the edge list, when valid.
    pub implied: Option<Vec<(usize, usize, i32, i32)>>,
}

/// Relaxation-based resolution: repeatedly sweep all edges, placing any
/// endpoint whose partner is placed, until nothing changes.
pub fn oracle(g: &LegoGraph) -> OracleResult {
    let n = g.node_count();
    let nodes = g.nodes();
    let edges = g.edges();
    let mut component = vec![usize::MAX; n];
    let mut pos: Vec<Option<(i32, i32, i32)>> = vec![None; n];
    let mut comps = 0;
    for root in 0..n {
        if pos[root].is_some() {
            continue;
        }
        pos[root] = Some((0, 0, 0));
        component[root] = comps;
        loop {
            let mut changed = false;
            for e in edges {
                let (dx, dy) = (e.label.dx(), e.label.dy());
                match (pos[e.src], pos[e.dst]) {
                    (Some((x, y, z)), None) if component[e.src] == comps => {
                        pos[e.dst] = Some((x + dx, y + dy, z + 1));
                        component[e.dst] = comps;
                        changed = true;
                    }
                    (None, Some((x, y, z))) if component[e.dst] == comps => {
                        pos[e.src] = Some((x - dx, y - dy, z - 1));
                        component[e.src] = comps;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
        comps += 1;
    }
    let pos: Vec<(i32, i32, i32)> = pos.into_iter().map(|p| p.unwrap()).collect();
    let connected = comps <= 1;
    let resolvable = edges.iter().all(|e| {
        let (x, y, z) = pos[e.src];
        pos[e.dst] == (x + e.label.dx(), y + e.label.dy(), z + 1)
    });
    let offsets_connectable = edges.iter().all(|e| studs_touch((0, 0, nodes[e.src]), (e.label.dx(), e.label.dy(), nodes[e.dst])));
    let mut grid: HashMap<(usize, i32, i32, i32), usize> = HashMap::new();
    for v in 0..n {
        let (x, y, z) = pos[v];
        for c in voxels(x, y, z, nodes[v]) {
            *grid.entry((component[v], c.0, c.1, c.2)).or_default() += 1;
        }
    }
    let collision_free = grid.values().all(|&k| k == 1);
    let valid = connected && resolvable && collision_free && offsets_connectable;
    let report = ValidityReport { connected, resolvable, collision_free, offsets_connectable, valid };
    let positions = (n > 0 && connected && resolvable).then(|| pos.clone());
    let implied = (n > 0 && valid).then(|| {
        let explicit: BTreeSet<(usize, usize)> = edges.iter().map(|e| (e.src, e.dst)).collect();
        let mut out = Vec::new();
        for u in 0..n {
            for v in 0..n {
                let (pu, pv) = (pos[u], pos[v]);
                if pv.2 == pu.2 + 1 && studs_touch((pu.0, pu.1, nodes[u]), (pv.0, pv.1, nodes[v])) && !explicit.contains(&(u, v)) {
                    out.push((u, v, pv.0 - pu.0, pv.1 - pu.1));
                }
            }
        }
        out
    });
    OracleResult { report, positions, implied }
}

pub fn edge_tuples(edges: &[Edge]) -> Vec<(usize, usize, i32, i32)> {
    edges.iter().map(|e| (e.src, e.dst, e.label.dx(), e.label.dy())).collect()
}

fn random_orientation(rng: &mut impl Rng) -> Orientation {
    if rng.gen_bool(0.5) {
        Orientation::AlongX
    } else {
        Orientation::AlongY
    }
}

fn random_label(rng: &mut impl Rng) -> EdgeLabel {
    EdgeLabel::new(rng.gen_range(-3..=3), rng.gen_range(-3..=3)).unwrap()
}

/// Bricks grown one at a time onto (or under) a random earlier brick, with
/// collisions allowed, joined by a random spanning subset of their physical
/// contacts. Node order is shuffled.
pub fn random_physical_graph(n: usize, rng: &mut impl Rng) -> Option<LegoGraph> {
    let mut bricks: Vec<(i32, i32, i32, Orientation)> = vec![(0, 0, 0, random_orientation(rng))];
    while bricks.len() < n {
        let (x, y, z, o) = bricks[rng.gen_range(0..bricks.len())];
        let dz = if rng.gen_bool(0.5) { 1 } else { -1 };
        let orientation = random_orientation(rng);
        let (dx, dy) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
        if studs_touch((x, y, o), (x + dx, y + dy, orientation)) {
            bricks.push((x + dx, y + dy, z + dz, orientation));
        }
    }
    bricks.shuffle(rng);
    let mut contacts = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let (a, b) = (bricks[u], bricks[v]);
            if b.2 == a.2 + 1 && studs_touch((a.0, a.1, a.3), (b.0, b.1, b.3)) {
                contacts.push((u, v, b.0 - a.0, b.1 - a.1));
            }
        }
    }
    contacts.shuffle(rng);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut chosen = Vec::new();
    let mut extra = Vec::new();
    for c in contacts {
        let (a, b) = (find(&mut parent, c.0), find(&mut parent, c.1));
        if a != b {
            parent[a] = b;
            chosen.push(c);
        } else {
            extra.push(c);
        }
    }
    for c in extra {
        if rng.gen_bool(0.4) {
            chosen.push(c);
        }
    }
    if chosen.len() > 1 && rng.gen_bool(0.1) {
        chosen.remove(rng.gen_range(0..chosen.len()));
    }
    let mut g = LegoGraph::new();
    for b in &bricks {
        g.add_node(b.3);
    }
    for (u, v, dx, dy) in chosen {
        g.add_edge(u, v, EdgeLabel::new(dx, dy).ok()?).ok()?;
    }
    Some(g)
}

/// Arbitrary orientations and edges with uniformly random labels.
pub fn random_noise_graph(n: usize, rng: &mut impl Rng) -> LegoGraph {
    let mut g = LegoGraph::new();
    for _ in 0..n {
        g.add_node(random_orientation(rng));
    }
    if n < 2 {
        return g;
    }
    for _ in 0..rng.gen_range(0..=n + 2) {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && !g.has_edge(u, v) && !g.has_edge(v, u) {
            g.add_edge(u, v, random_label(rng)).unwrap();
        }
    }
    g
}

/// A label whose footprints share a stud column, or any label.
fn perturbed_label(src: Orientation, dst: Orientation, rng: &mut impl Rng) -> EdgeLabel {
    loop {
        let l = random_label(rng);
        if rng.gen_bool(0.2) || studs_touch((0, 0, src), (l.dx(), l.dy(), dst)) {
            return l;
        }
    }
}

/// A physical graph with one label replaced or one random edge added.
pub fn perturbed_graph(n: usize, rng: &mut impl Rng) -> Option<LegoGraph> {
    let g = random_physical_graph(n, rng)?;
    let mut edges: Vec<Edge> = g.edges().to_vec();
    if !edges.is_empty() && rng.gen_bool(0.5) {
        let i = rng.gen_range(0..edges.len());
        edges[i].label = perturbed_label(g.nodes()[edges[i].src], g.nodes()[edges[i].dst], rng);
    } else if n >= 2 {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && !g.has_edge(u, v) && !g.has_edge(v, u) {
            edges.push(Edge { src: u, dst: v, label: perturbed_label(g.nodes()[u], g.nodes()[v], rng) });
        }
    }
    let mut h = LegoGraph::new();
    for &o in g.nodes() {
        h.add_node(o);
    }
    for e in edges {
        h.add_edge(e.src, e.dst, e.label).ok()?;
    }
    Some(h)
}

/// Mixture of the three generators with 1 to `max_nodes` bricks.
pub fn random_graph(max_nodes: usize, rng: &mut impl Rng) -> LegoGraph {
    loop {
        let n = rng.gen_range(1..=max_nodes);
        let g = match rng.gen_range(0..10) {
            0..=4 => random_physical_graph(n, rng),
            5..=7 => perturbed_graph(n, rng),
            _ => Some(random_noise_graph(n, rng)),
        };
        if let Some(g) = g {
            return g;
        }
    }
}

/// Placements of a valid graph as plain tuples, for comparisons.
pub fn placement_tuples(p: &[Placement]) -> Vec<(i32, i32, i32)> {
    p.iter().map(|p| (p.x, p.y, p.z)).collect()
}

/// Counts how often each validity failure mode occurs.
pub fn failure_histogram(reports: &[ValidityReport]) -> BTreeMap<&'static str, usize> {
    let mut h = BTreeMap::new();
    for r in reports {
        let key = if r.valid {
            "valid"
        } else if !r.connected {
            "disconnected"
        } else if !r.offsets_connectable {
            "unconnectable_offset"
        } else if !r.resolvable {
            "overconstrained"
        } else {
            "collision"
        };
        *h.entry(key).or_default() += 1;
    }
    h
}
