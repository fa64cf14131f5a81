mod common;

use common::{edge_tuples, oracle, placement_tuples, random_graph, random_physical_graph};
use legogen::geometry::{
    canonical_key, canonical_key_of_placements, check_validity, implied_edges, resolve_placements, rotate, valid_options, valid_options_exhaustive,
    with_implied_edges, EdgeDirection, LegoGraph, Orientation, Placement,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn relabel(g: &LegoGraph, perm: &[usize]) -> LegoGraph {
    // perm[old] = new
    let mut nodes = vec![Orientation::AlongX; g.node_count()];
    for (old, &o) in g.nodes().iter().enumerate() {
        nodes[perm[old]] = o;
    }
    let mut h = LegoGraph::new();
    for o in nodes {
        h.add_node(o);
    }
    for e in g.edges() {
        h.add_edge(perm[e.src], perm[e.dst], e.label).unwrap();
    }
    h
}

fn valid_graph(seed: u64, max_nodes: usize) -> LegoGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rand::Rng::gen_range(&mut rng, 1..=max_nodes);
        if let Some(g) = random_physical_graph(n, &mut rng) {
            if check_validity(&g).valid {
                return g;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_with_voxel_oracle(seed in any::<u64>()) {
        let g = random_graph(6, &mut ChaCha8Rng::seed_from_u64(seed));
        let want = oracle(&g);
        let got = check_validity(&g);
        if want.report.resolvable {
            prop_assert_eq!(got, want.report);
        } else {
            prop_assert_eq!((got.connected, got.resolvable, got.offsets_connectable, got.valid), (want.report.connected, false, want.report.offsets_connectable, false));
        }
        match want.positions {
            Some(p) => prop_assert_eq!(placement_tuples(&resolve_placements(&g).unwrap().placements), p),
            None => prop_assert!(resolve_placements(&g).is_err()),
        }
        match want.implied {
            Some(i) => prop_assert_eq!(edge_tuples(&implied_edges(&g).unwrap()), i),
            None => prop_assert!(implied_edges(&g).is_err()),
        }
    }

    #[test]
    fn node_order_does_not_change_the_structure(seed in any::<u64>()) {
        let g = valid_graph(seed, 8);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let h = relabel(&g, &perm);
        prop_assert!(check_validity(&h).valid);
        prop_assert_eq!(canonical_key(&g).unwrap(), canonical_key(&h).unwrap());
        prop_assert_eq!(implied_edges(&g).unwrap().len(), implied_edges(&h).unwrap().len());
    }

    #[test]
    fn key_ignores_translation(seed in any::<u64>(), dx in -20i32..20, dy in -20i32..20, dz in -5i32..5) {
        let g = valid_graph(seed, 8);
        let p = resolve_placements(&g).unwrap().placements;
        let moved: Vec<Placement> = p.iter().map(|q| Placement::new(q.x + dx, q.y + dy, q.z + dz, q.orientation)).collect();
        prop_assert_eq!(canonical_key_of_placements(&p), canonical_key_of_placements(&moved));
    }

    #[test]
    fn implied_closure_is_idempotent(seed in any::<u64>()) {
        let g = valid_graph(seed, 8);
        let closed = with_implied_edges(&g).unwrap();
        prop_assert!(check_validity(&closed).valid);
        prop_assert!(implied_edges(&closed).unwrap().is_empty());
        prop_assert_eq!(with_implied_edges(&closed).unwrap(), closed.clone());
        prop_assert_eq!(canonical_key(&closed).unwrap(), canonical_key(&g).unwrap());
    }

    #[test]
    fn rotation_preserves_structure(seed in any::<u64>(), turns in 0u32..4) {
        let g = valid_graph(seed, 8);
        let r = rotate(&g, turns).unwrap();
        prop_assert!(check_validity(&r).valid);
        prop_assert_eq!(canonical_key(&r).unwrap(), canonical_key(&g).unwrap());
        prop_assert_eq!(rotate(&r, 4 - turns).unwrap(), g.clone());
        let turned: Vec<Placement> = (0..turns).fold(resolve_placements(&g).unwrap().placements, |p, _| p.iter().map(Placement::rotated_quarter).collect());
        let got = resolve_placements(&r).unwrap().placements;
        let shift = (turned[0].x - got[0].x, turned[0].y - got[0].y);
        for (a, b) in turned.iter().zip(&got) {
            prop_assert_eq!((a.x - b.x, a.y - b.y, a.z, a.orientation), (shift.0, shift.1, b.z, b.orientation));
        }
    }

    #[test]
    fn fast_options_match_exhaustive(seed in any::<u64>(), o in 0usize..2) {
        let mut g = valid_graph(seed, 6);
        let v = g.add_node(Orientation::ALL[o]);
        for dir in [EdgeDirection::Incoming, EdgeDirection::Outgoing] {
            let fast = valid_options(&g, v, dir);
            prop_assert_eq!(&fast, &valid_options_exhaustive(&g, v, dir));
            for (&u, labels) in &fast.offsets {
                for &l in labels {
                    let mut h = g.clone();
                    let (s, d) = dir.endpoints(v, u);
                    h.add_edge(s, d, l).unwrap();
                    prop_assert!(check_validity(&h).valid);
                }
            }
        }
    }
}

#[test]
fn oracle_exercises_every_failure_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let reports: Vec<_> = (0..2000).map(|_| oracle(&random_graph(6, &mut rng)).report).collect();
    let hist = common::failure_histogram(&reports);
    for mode in ["valid", "disconnected", "unconnectable_offset", "overconstrained", "collision"] {
        assert!(hist.get(mode).copied().unwrap_or(0) >= 20, "{mode}: {hist:?}");
    }
}

#[test]
fn overconstrained_triangle_is_rejected() {
    let mut g = LegoGraph::new();
    for _ in 0..3 {
        g.add_node(Orientation::AlongX);
    }
    let l = |dx, dy| legogen::geometry::EdgeLabel::new(dx, dy).unwrap();
    g.add_edge(0, 1, l(0, 0)).unwrap();
    g.add_edge(1, 2, l(1, 0)).unwrap();
    g.add_edge(0, 2, l(0, 0)).unwrap();
    let r = check_validity(&g);
    assert!(!r.resolvable && !r.valid);
    assert!(resolve_placements(&g).is_err());
}
