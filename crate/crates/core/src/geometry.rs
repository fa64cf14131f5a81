//! LEGO graphs and their physical interpretation.
//!
//! A [`LegoGraph`] stores bricks as nodes (labelled by [`Orientation`]) and
//! stud connections as directed edges `src -> dst` meaning `dst` sits on top
//! of `src`. Each edge carries the anchor-to-anchor offset `(dx, dy)` in studs.
//! The anchor of a brick is the minimum-coordinate stud of its footprint.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest representable offset along either axis.
pub const OFFSET_MIN: i32 = -3;
/// Largest representable offset along either axis.
pub const OFFSET_MAX: i32 = 3;
/// Number of offset values per axis.
pub const OFFSET_COUNT: usize = (OFFSET_MAX - OFFSET_MIN + 1) as usize;

/// Cells covered by one 2x4 brick.
pub const BRICK_CELLS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("graph has no nodes")]
    Empty,
    #[error("edge {src}->{dst} contradicts an already resolved placement")]
    Overconstraint { src: usize, dst: usize },
    #[error("node {node} is not reachable from node 0")]
    Disconnected { node: usize },
    #[error("graph is not a valid structure: {0:?}")]
    Invalid(ValidityReport),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {src}->{dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("node id {id} out of range for graph with {count} nodes")]
    NodeOutOfRange { id: usize, count: usize },
    #[error("offset ({dx}, {dy}) outside [{OFFSET_MIN}, {OFFSET_MAX}]")]
    OffsetOutOfRange { dx: i32, dy: i32 },
}

/// Long axis of a 2x4 brick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    AlongX,
    AlongY,
}

impl Orientation {
    pub const ALL: [Orientation; 2] = [Orientation::AlongX, Orientation::AlongY];

    /// Footprint size `(x extent, y extent)` in studs.
    pub fn extent(self) -> (i32, i32) {
        match self {
            Orientation::AlongX => (4, 2),
            Orientation::AlongY => (2, 4),
        }
    }

    pub fn toggled(self) -> Self {
        match self {
            Orientation::AlongX => Orientation::AlongY,
            Orientation::AlongY => Orientation::AlongX,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Orientation::AlongX => 0,
            Orientation::AlongY => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Orientation::AlongX => "x",
            Orientation::AlongY => "y",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "x" => Some(Orientation::AlongX),
            "y" => Some(Orientation::AlongY),
            _ => None,
        }
    }
}

/// Anchor-to-anchor stud offset carried by an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeLabel {
    dx: i32,
    dy: i32,
}

impl EdgeLabel {
    pub fn new(dx: i32, dy: i32) -> Result<Self, GeometryError> {
        if (OFFSET_MIN..=OFFSET_MAX).contains(&dx) && (OFFSET_MIN..=OFFSET_MAX).contains(&dy) {
            Ok(Self { dx, dy })
        } else {
            Err(GeometryError::OffsetOutOfRange { dx, dy })
        }
    }

    pub fn dx(self) -> i32 {
        self.dx
    }

    pub fn dy(self) -> i32 {
        self.dy
    }

    /// Position of `dx` in the offset vocabulary (0..7).
    pub fn dx_index(self) -> usize {
        (self.dx - OFFSET_MIN) as usize
    }

    pub fn dy_index(self) -> usize {
        (self.dy - OFFSET_MIN) as usize
    }

    pub fn from_indices(dx_index: usize, dy_index: usize) -> Result<Self, GeometryError> {
        Self::new(dx_index as i32 + OFFSET_MIN, dy_index as i32 + OFFSET_MIN)
    }

    /// All 49 labels in row-major `(dx, dy)` order.
    pub fn all() -> impl Iterator<Item = EdgeLabel> {
        (OFFSET_MIN..=OFFSET_MAX)
            .flat_map(|dx| (OFFSET_MIN..=OFFSET_MAX).map(move |dy| EdgeLabel { dx, dy }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub label: EdgeLabel,
}

/// Directed, labelled brick graph. Node order is assembly order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LegoGraph {
    nodes: Vec<Orientation>,
    edges: Vec<Edge>,
    class_label: Option<usize>,
}

impl LegoGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_class(class_label: usize) -> Self {
        Self { class_label: Some(class_label), ..Self::default() }
    }

    pub fn nodes(&self) -> &[Orientation] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn class_label(&self) -> Option<usize> {
        self.class_label
    }

    pub fn set_class_label(&mut self, class_label: Option<usize>) {
        self.class_label = class_label;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_node(&mut self, orientation: Orientation) -> usize {
        self.nodes.push(orientation);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, label: EdgeLabel) -> Result<(), GeometryError> {
        let count = self.nodes.len();
        for id in [src, dst] {
            if id >= count {
                return Err(GeometryError::NodeOutOfRange { id, count });
            }
        }
        if src == dst {
            return Err(GeometryError::SelfLoop(src));
        }
        if self.has_edge(src, dst) {
            return Err(GeometryError::DuplicateEdge { src, dst });
        }
        self.edges.push(Edge { src, dst, label });
        Ok(())
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    /// Removes a node and its edges; ids above `node` shift down by one.
    pub fn remove_node(&mut self, node: usize) {
        assert!(node < self.nodes.len(), "node {node} out of range");
        self.nodes.remove(node);
        self.edges.retain(|e| e.src != node && e.dst != node);
        for e in &mut self.edges {
            if e.src > node {
                e.src -= 1;
            }
            if e.dst > node {
                e.dst -= 1;
            }
        }
    }

    /// Undirected adjacency lists, each sorted ascending.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.dst] += 1;
        }
        deg
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.src] += 1;
        }
        deg
    }
}

/// World placement of one brick; `(x, y)` is the anchor stud, `z` the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placement {
    pub x: i32,
    pub y: i32,
    pub z: i32,
    pub orientation: Orientation,
}

impl Placement {
    pub fn new(x: i32, y: i32, z: i32, orientation: Orientation) -> Self {
        Self { x, y, z, orientation }
    }

    pub fn cells(&self) -> impl Iterator<Item = (i32, i32, i32)> + '_ {
        let (w, h) = self.orientation.extent();
        let (x0, y0, z) = (self.x, self.y, self.z);
        (0..w).flat_map(move |i| (0..h).map(move |j| (x0 + i, y0 + j, z)))
    }

    /// True when the two footprints share at least one stud column.
    pub fn overlaps_xy(&self, other: &Placement) -> bool {
        let (w1, h1) = self.orientation.extent();
        let (w2, h2) = other.orientation.extent();
        self.x < other.x + w2 && other.x < self.x + w1 && self.y < other.y + h2 && other.y < self.y + h1
    }

    /// Placement of a brick connected through `label`, one layer up (`up`) or down.
    pub fn offset_by(&self, label: EdgeLabel, orientation: Orientation, up: bool) -> Placement {
        if up {
            Placement::new(self.x + label.dx, self.y + label.dy, self.z + 1, orientation)
        } else {
            Placement::new(self.x - label.dx, self.y - label.dy, self.z - 1, orientation)
        }
    }

    /// Quarter turn counter-clockwise about the z axis.
    pub fn rotated_quarter(&self) -> Placement {
        let (_, h) = self.orientation.extent();
        Placement::new(-self.y - h, self.x, self.z, self.orientation.toggled())
    }
}

/// True when a brick of orientation `dst` offset by `label` from a brick of
/// orientation `src` shares at least one stud column with it.
pub fn label_connects(src: Orientation, dst: Orientation, label: EdgeLabel) -> bool {
    let a = Placement::new(0, 0, 0, src);
    let b = Placement::new(label.dx, label.dy, 1, dst);
    a.overlaps_xy(&b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedStructure {
    pub placements: Vec<Placement>,
    pub occupied: BTreeSet<(i32, i32, i32)>,
}

/// Outcome of [`check_validity`]. `valid` is the conjunction of the other flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub connected: bool,
    pub resolvable: bool,
    pub collision_free: bool,
    pub offsets_connectable: bool,
    pub valid: bool,
}

impl ValidityReport {
    fn from_flags(connected: bool, resolvable: bool, collision_free: bool, offsets_connectable: bool) -> Self {
        Self {
            connected,
            resolvable,
            collision_free,
            offsets_connectable,
            valid: connected && resolvable && collision_free && offsets_connectable,
        }
    }
}

/// Breadth-first placement of every component, each rooted at its lowest node
/// id placed at the origin. The first assignment of a node wins; edges that
/// disagree with it are collected in `conflicts`.
struct ComponentResolution {
    placements: Vec<Placement>,
    component: Vec<usize>,
    component_count: usize,
    conflicts: Vec<usize>,
}

fn resolve_components(g: &LegoGraph) -> ComponentResolution {
    let n = g.node_count();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in g.edges.iter().enumerate() {
        incident[e.src].push(i);
        incident[e.dst].push(i);
    }
    let mut placements: Vec<Option<Placement>> = vec![None; n];
    let mut component = vec![usize::MAX; n];
    let mut component_count = 0;
    let mut queue = VecDeque::new();
    for root in 0..n {
        if placements[root].is_some() {
            continue;
        }
        placements[root] = Some(Placement::new(0, 0, 0, g.nodes[root]));
        component[root] = component_count;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let here = placements[u].expect("queued nodes are placed");
            let mut next: Vec<(usize, Placement)> = incident[u]
                .iter()
                .map(|&ei| {
                    let e = g.edges[ei];
                    if e.src == u {
                        (e.dst, here.offset_by(e.label, g.nodes[e.dst], true))
                    } else {
                        (e.src, here.offset_by(e.label, g.nodes[e.src], false))
                    }
                })
                .collect();
            next.sort_by_key(|&(v, _)| v);
            for (v, p) in next {
                if placements[v].is_none() {
                    placements[v] = Some(p);
                    component[v] = component_count;
                    queue.push_back(v);
                }
            }
        }
        component_count += 1;
    }
    let placements: Vec<Placement> = placements.into_iter().map(|p| p.expect("all placed")).collect();
    let conflicts = g
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            placements[e.src].offset_by(e.label, g.nodes[e.dst], true) != placements[e.dst]
        })
        .map(|(i, _)| i)
        .collect();
    ComponentResolution { placements, component, component_count, conflicts }
}

/// Places every brick in world coordinates with node 0 at the origin.
pub fn resolve_placements(g: &LegoGraph) -> Result<ResolvedStructure, GeometryError> {
    if g.is_empty() {
        return Err(GeometryError::Empty);
    }
    let res = resolve_components(g);
    if let Some(&ei) = res.conflicts.first() {
        let e = g.edges[ei];
        return Err(GeometryError::Overconstraint { src: e.src, dst: e.dst });
    }
    if let Some(node) = res.component.iter().position(|&c| c != 0) {
        return Err(GeometryError::Disconnected { node });
    }
    let occupied = res.placements.iter().flat_map(|p| p.cells().collect::<Vec<_>>()).collect();
    Ok(ResolvedStructure { placements: res.placements, occupied })
}

/// Reports connectivity, resolvability, collisions and offset feasibility.
///
/// Disconnected graphs are resolved per component; collisions are only
/// meaningful inside a component and are checked there.
pub fn check_validity(g: &LegoGraph) -> ValidityReport {
    if g.is_empty() {
        return ValidityReport::from_flags(true, true, true, true);
    }
    let res = resolve_components(g);
    let connected = res.component_count == 1;
    let resolvable = res.conflicts.is_empty();
    let offsets_connectable = g
        .edges
        .iter()
        .all(|e| label_connects(g.nodes[e.src], g.nodes[e.dst], e.label));
    let mut seen: HashSet<(usize, i32, i32, i32)> = HashSet::with_capacity(g.node_count() * BRICK_CELLS);
    let mut collision_free = true;
    'outer: for (v, p) in res.placements.iter().enumerate() {
        for (x, y, z) in p.cells() {
            if !seen.insert((res.component[v], x, y, z)) {
                collision_free = false;
                break 'outer;
            }
        }
    }
    ValidityReport::from_flags(connected, resolvable, collision_free, offsets_connectable)
}

fn require_valid(g: &LegoGraph) -> Result<ResolvedStructure, GeometryError> {
    let report = check_validity(g);
    if !report.valid || g.is_empty() {
        return Err(if g.is_empty() { GeometryError::Empty } else { GeometryError::Invalid(report) });
    }
    resolve_placements(g)
}

/// Physical support pairs `(u below, v above)` with overlapping footprints,
/// in ascending `(src, dst)` order.
pub fn support_pairs(placements: &[Placement]) -> Vec<Edge> {
    let mut by_level: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, p) in placements.iter().enumerate() {
        by_level.entry(p.z).or_default().push(i);
    }
    let mut out = Vec::new();
    for (z, lower) in &by_level {
        let Some(upper) = by_level.get(&(z + 1)) else { continue };
        for &u in lower {
            for &v in upper {
                let (pu, pv) = (placements[u], placements[v]);
                if pu.overlaps_xy(&pv) {
                    let label = EdgeLabel::new(pv.x - pu.x, pv.y - pu.y)
                        .expect("overlapping 2x4 footprints stay inside the offset vocabulary");
                    out.push(Edge { src: u, dst: v, label });
                }
            }
        }
    }
    out.sort_by_key(|e| (e.src, e.dst));
    out
}

/// Physical connections not stored as explicit edges.
pub fn implied_edges(g: &LegoGraph) -> Result<Vec<Edge>, GeometryError> {
    let resolved = require_valid(g)?;
    let explicit: HashSet<(usize, usize)> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
    Ok(support_pairs(&resolved.placements)
        .into_iter()
        .filter(|e| !explicit.contains(&(e.src, e.dst)))
        .collect())
}

/// Returns `g` with all implied edges appended.
pub fn with_implied_edges(g: &LegoGraph) -> Result<LegoGraph, GeometryError> {
    let mut out = g.clone();
    for e in implied_edges(g)? {
        out.add_edge(e.src, e.dst, e.label)?;
    }
    Ok(out)
}

/// Which way a new edge attaches to the newest node `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeDirection {
    /// `u -> v`: the new brick sits on `u`.
    Incoming,
    /// `v -> u`: the new brick supports `u`.
    Outgoing,
}

impl EdgeDirection {
    pub fn index(self) -> usize {
        match self {
            EdgeDirection::Incoming => 0,
            EdgeDirection::Outgoing => 1,
        }
    }

    /// `(src, dst)` of an edge between the new node and `other`.
    pub fn endpoints(self, new_node: usize, other: usize) -> (usize, usize) {
        match self {
            EdgeDirection::Incoming => (other, new_node),
            EdgeDirection::Outgoing => (new_node, other),
        }
    }
}

/// Destinations and offsets that keep the graph valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidOptions {
    pub offsets: BTreeMap<usize, Vec<EdgeLabel>>,
}

impl ValidOptions {
    pub fn destinations(&self) -> BTreeSet<usize> {
        self.offsets.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, dest: usize, label: EdgeLabel) -> bool {
        self.offsets.get(&dest).is_some_and(|v| v.contains(&label))
    }
}

/// Enumerates every `(destination, offset)` for a new edge at `new_node`
/// such that the augmented graph is valid.
pub fn valid_options(g: &LegoGraph, new_node: usize, direction: EdgeDirection) -> ValidOptions {
    let n = g.node_count();
    if new_node >= n || n < 2 {
        return ValidOptions::default();
    }
    let res = resolve_components(g);
    let isolated = !g.edges.iter().any(|e| e.src == new_node || e.dst == new_node);
    if !check_validity_without(g, new_node, isolated) {
        return valid_options_exhaustive(g, new_node, direction);
    }

    let mut occupied: HashSet<(i32, i32, i32)> = HashSet::with_capacity(n * BRICK_CELLS);
    for (v, p) in res.placements.iter().enumerate() {
        if v != new_node {
            occupied.extend(p.cells());
        }
    }
    let orient = g.nodes[new_node];
    let mut out = ValidOptions::default();
    for u in 0..n {
        if u == new_node {
            continue;
        }
        let (src, dst) = direction.endpoints(new_node, u);
        if g.has_edge(src, dst) || g.has_edge(dst, src) {
            continue;
        }
        let pu = res.placements[u];
        let mut labels = Vec::new();
        for label in EdgeLabel::all() {
            if !label_connects(g.nodes[src], g.nodes[dst], label) {
                continue;
            }
            let candidate = match direction {
                EdgeDirection::Incoming => pu.offset_by(label, orient, true),
                EdgeDirection::Outgoing => pu.offset_by(label, orient, false),
            };
            let ok = if isolated {
                candidate.cells().all(|c| !occupied.contains(&c))
            } else {
                candidate == res.placements[new_node]
            };
            if ok {
                labels.push(label);
            }
        }
        if !labels.is_empty() {
            out.offsets.insert(u, labels);
        }
    }
    out
}

/// Validity of the graph with `new_node` left out when it is isolated.
fn check_validity_without(g: &LegoGraph, new_node: usize, isolated: bool) -> bool {
    if !isolated {
        return check_validity(g).valid;
    }
    let mut rest = g.clone();
    rest.remove_node(new_node);
    check_validity(&rest).valid
}

/// Reference implementation: try every label against every node and keep
/// the ones for which [`check_validity`] accepts the augmented graph.
pub fn valid_options_exhaustive(g: &LegoGraph, new_node: usize, direction: EdgeDirection) -> ValidOptions {
    let mut out = ValidOptions::default();
    for u in 0..g.node_count() {
        if u == new_node {
            continue;
        }
        let (src, dst) = direction.endpoints(new_node, u);
        let mut labels = Vec::new();
        for label in EdgeLabel::all() {
            let mut aug = g.clone();
            if aug.add_edge(src, dst, label).is_ok() && check_validity(&aug).valid {
                labels.push(label);
            }
        }
        if !labels.is_empty() {
            out.offsets.insert(u, labels);
        }
    }
    out
}

/// Rotates a valid graph by `quarter_turns` counter-clockwise quarter turns.
pub fn rotate(g: &LegoGraph, quarter_turns: u32) -> Result<LegoGraph, GeometryError> {
    require_valid(g)?;
    let mut out = g.clone();
    for _ in 0..quarter_turns % 4 {
        out = rotate_quarter_unchecked(&out);
    }
    Ok(out)
}

fn rotate_quarter_unchecked(g: &LegoGraph) -> LegoGraph {
    let mut out = LegoGraph { nodes: Vec::with_capacity(g.node_count()), edges: Vec::new(), class_label: g.class_label };
    out.nodes.extend(g.nodes.iter().map(|o| o.toggled()));
    out.edges = g
        .edges
        .iter()
        .map(|e| {
            let h_src = g.nodes[e.src].extent().1;
            let h_dst = g.nodes[e.dst].extent().1;
            let label = EdgeLabel::new(-e.label.dy - h_dst + h_src, e.label.dx)
                .expect("rotation keeps overlapping offsets in range");
            Edge { src: e.src, dst: e.dst, label }
        })
        .collect();
    out
}

/// Translation- and rotation-normalized fingerprint of the physical structure.
///
/// The key lists every brick as `x,y,z,o` after translating the minimum
/// occupied corner to the origin, sorted; the lexicographically smallest of
/// the four rotations wins. The occupied-cell set is a function of this list.
pub fn canonical_key(g: &LegoGraph) -> Result<String, GeometryError> {
    let resolved = require_valid(g)?;
    Ok(canonical_key_of_placements(&resolved.placements))
}

pub fn canonical_key_of_placements(placements: &[Placement]) -> String {
    let mut current: Vec<Placement> = placements.to_vec();
    let mut best: Option<String> = None;
    for _ in 0..4 {
        let key = placement_key(&current);
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
        current = current.iter().map(Placement::rotated_quarter).collect();
    }
    best.unwrap_or_default()
}

fn placement_key(placements: &[Placement]) -> String {
    let min_x = placements.iter().map(|p| p.x).min().unwrap_or(0);
    let min_y = placements.iter().map(|p| p.y).min().unwrap_or(0);
    let min_z = placements.iter().map(|p| p.z).min().unwrap_or(0);
    let mut bricks: Vec<(i32, i32, i32, &str)> = placements
        .iter()
        .map(|p| (p.z - min_z, p.y - min_y, p.x - min_x, p.orientation.code()))
        .collect();
    bricks.sort_unstable();
    let mut key = String::with_capacity(bricks.len() * 10);
    for (z, y, x, o) in bricks {
        if !key.is_empty() {
            key.push(';');
        }
        key.push_str(&format!("{x},{y},{z},{o}"));
    }
    key
}

/// Builds a graph from world placements with an edge for every physical
/// support pair. Returns `None` when bricks collide.
pub fn graph_from_placements(placements: &[Placement]) -> Option<LegoGraph> {
    let mut cells = HashSet::new();
    for p in placements {
        for c in p.cells() {
            if !cells.insert(c) {
                return None;
            }
        }
    }
    let mut g = LegoGraph::new();
    for p in placements {
        g.add_node(p.orientation);
    }
    for e in support_pairs(placements) {
        g.add_edge(e.src, e.dst, e.label).ok()?;
    }
    Some(g)
}

/// Map from occupied cell to the brick covering it.
pub fn occupancy(placements: &[Placement]) -> HashMap<(i32, i32, i32), usize> {
    let mut map = HashMap::with_capacity(placements.len() * BRICK_CELLS);
    for (i, p) in placements.iter().enumerate() {
        for c in p.cells() {
            map.insert(c, i);
        }
    }
    map
}
