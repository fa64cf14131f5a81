use legogen::dataset::{
    augment_rotations, dataset_stats, derive_decision_trace, distinct_structures, load_dataset, load_samples, replay_trace, save_samples, synth_dataset,
    Dataset, Decision, RecordJson, SynthParams, ARCHETYPES,
};
use legogen::geometry::{canonical_key, check_validity, with_implied_edges};
use legogen::ldraw::{to_ldraw, BrickColors};
use proptest::prelude::*;

fn unlabelled(g: &legogen::geometry::LegoGraph) -> legogen::geometry::LegoGraph {
    let mut g = with_implied_edges(g).unwrap();
    g.set_class_label(None);
    g
}

fn small(classes: &[&str], per_class: usize, seed: u64) -> Dataset {
    synth_dataset(classes, per_class, SynthParams { min_bricks: 8, max_bricks: 24 }, seed).unwrap()
}

#[test]
fn jsonl_round_trip_through_disk() {
    let d = small(&ARCHETYPES, 2, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    d.save(&path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.to_jsonl(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn invalid_lines_are_reported_with_position() {
    let good = small(&["wall"], 1, 0).to_jsonl();
    let text = format!("{good}{{\"class\":\"wall\",\"nodes\":[{{\"o\":\"x\"}},{{\"o\":\"x\"}}],\"edges\":[{{\"s\":0,\"d\":1,\"dx\":3,\"dy\":3}}]}}\n");
    let err = Dataset::parse_jsonl(&text).unwrap_err().to_string();
    assert!(err.contains("record 1") || err.contains("line 2"), "{err}");
    assert!(Dataset::parse_jsonl("{not json").is_err());
}

#[test]
fn traces_replay_to_the_closed_structure() {
    for r in &small(&ARCHETYPES, 2, 11).records {
        let trace = derive_decision_trace(r).unwrap();
        assert_eq!(trace.decisions.last(), Some(&Decision::StopNodes));
        let nodes = trace.decisions.iter().filter(|d| matches!(d, Decision::AddNode(_))).count();
        assert_eq!(nodes, r.graph.node_count());
        let g = replay_trace(&trace).unwrap();
        assert_eq!(g, unlabelled(&r.graph));
    }
}

#[test]
fn rotation_augmentation() {
    let d = small(&["wall", "table"], 3, 1);
    let all = augment_rotations(&d, false).unwrap();
    assert_eq!(all.len(), 4 * d.len());
    for (i, r) in all.records.iter().enumerate() {
        let src = &d.records[i / 4];
        assert_eq!(r.class_id, src.class_id);
        assert!(check_validity(&r.graph).valid);
        assert_eq!(canonical_key(&r.graph).unwrap(), canonical_key(&src.graph).unwrap());
    }
    let dedup = augment_rotations(&all, true).unwrap();
    assert_eq!(dedup.len(), all.len());
    assert_eq!(distinct_structures(&dedup).unwrap(), distinct_structures(&d).unwrap());
}

#[test]
fn stats_summarise_the_dataset() {
    let d = small(&["bar", "wall"], 4, 0);
    let s = dataset_stats(&d);
    assert_eq!((s.records, s.classes, s.validity_rate), (8, 2, 1.0));
    assert_eq!(s.per_class["bar"], 4);
    assert!(s.mean_edges >= s.mean_nodes - 1.0);
}

#[test]
fn samples_keep_invalid_graphs_and_meta() {
    let rec = RecordJson::from_graph("wall", &small(&["wall"], 1, 0).records[0].graph, Some(serde_json::json!({"seed": 4})));
    let broken: RecordJson = serde_json::from_str("{\"class\":\"wall\",\"nodes\":[{\"o\":\"x\"},{\"o\":\"y\"}],\"edges\":[]}").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    save_samples(&path, &[rec.clone(), broken.clone()]).unwrap();
    let back = load_samples(&path).unwrap();
    assert_eq!(back, vec![rec, broken]);
    assert_eq!(back[0].meta().unwrap()["seed"], 4);
    assert!(!check_validity(&back[1].to_graph().unwrap()).valid);
}

#[test]
fn ldraw_has_one_part_per_brick() {
    let g = &small(&["cup"], 1, 2).records[0].graph;
    let text = to_ldraw(g, &BrickColors::Random { seed: 1 }).unwrap();
    let parts: Vec<&str> = text.lines().filter(|l| l.starts_with("1 ")).collect();
    assert_eq!(parts.len(), g.node_count());
    assert!(parts.iter().all(|l| l.ends_with("3001.dat") && l.split_whitespace().count() == 15));
    assert_eq!(text, to_ldraw(g, &BrickColors::Random { seed: 1 }).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_records_round_trip(seed in any::<u64>(), class in 0usize..12) {
        let d = small(&[ARCHETYPES[class]], 1, seed);
        let r = &d.records[0];
        let json = RecordJson::from_graph(&r.class_name, &r.graph, None);
        let text = serde_json::to_string(&json).unwrap();
        let back: RecordJson = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(with_implied_edges(&back.to_graph().unwrap()).unwrap(), unlabelled(&r.graph));
        prop_assert_eq!(replay_trace(&derive_decision_trace(r).unwrap()).unwrap(), unlabelled(&r.graph));
    }
}
