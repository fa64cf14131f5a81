use legogen::dataset::{synth_dataset, SynthParams};
use legogen::gin::{graph_features, stratified_split, train_gin, Gin, GinConfig, GinTrainConfig};
use legogen::metrics::{
    degree_mmd, density_coverage, frechet_distance, kernel_distance, nearest_neighbour, pct_novel, precision_recall, training_keys, EmbeddingSet,
    Source,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn set(rows: &[Vec<f64>], source: Source) -> EmbeddingSet {
    EmbeddingSet::from_rows(rows, source).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metrics_ignore_row_order(seed in any::<u64>(), m in 8usize..24, n in 8usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = cloud(m, 3, &mut rng);
        let g: Vec<Vec<f64>> = cloud(n, 3, &mut rng).into_iter().map(|v| v.iter().map(|x| x * 1.3 + 0.2).collect()).collect();
        let (mut r2, mut g2) = (r.clone(), g.clone());
        r2.shuffle(&mut rng);
        g2.shuffle(&mut rng);
        let (a, b) = (set(&r, Source::Reference), set(&g, Source::Generated));
        let (a2, b2) = (set(&r2, Source::Reference), set(&g2, Source::Generated));
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
        prop_assert!(close(frechet_distance(&a, &b).unwrap(), frechet_distance(&a2, &b2).unwrap()));
        prop_assert_eq!(precision_recall(&a, &b, 3).unwrap(), precision_recall(&a2, &b2, 3).unwrap());
        prop_assert_eq!(density_coverage(&a, &b, 3).unwrap(), density_coverage(&a2, &b2, 3).unwrap());
        if m != n {
            prop_assert!(close(kernel_distance(&a, &b).unwrap(), kernel_distance(&a2, &b2).unwrap()));
        }
        // Same permutation applied to both sides keeps the paired statistic.
        let mut perm: Vec<usize> = (0..m.min(n)).collect();
        perm.shuffle(&mut rng);
        let pr: Vec<Vec<f64>> = perm.iter().map(|&i| r[i].clone()).collect();
        let pg: Vec<Vec<f64>> = perm.iter().map(|&i| g[i].clone()).collect();
        let (ur, ug) = (&r[..m.min(n)], &g[..m.min(n)]);
        prop_assert!(close(
            kernel_distance(&set(ur, Source::Reference), &set(ug, Source::Generated)).unwrap(),
            kernel_distance(&set(&pr, Source::Reference), &set(&pg, Source::Generated)).unwrap()
        ));
    }

    #[test]
    fn identical_sets_are_perfect(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cloud(30, 4, &mut rng);
        let (a, b) = (set(&x, Source::Reference), set(&x, Source::Generated));
        prop_assert!(frechet_distance(&a, &b).unwrap() <= 1e-8);
        prop_assert!(kernel_distance(&a, &b).unwrap().abs() <= 1e-12);
        prop_assert_eq!(precision_recall(&a, &b, 5).unwrap(), (1.0, 1.0));
        prop_assert_eq!(density_coverage(&a, &b, 5).unwrap().1, 1.0);
    }
}

#[test]
fn fd_of_a_shift_is_the_squared_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = cloud(400, 3, &mut rng);
    let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] + 1.0, v[1] - 2.0, v[2]]).collect();
    let fd = frechet_distance(&set(&x, Source::Reference), &set(&y, Source::Generated)).unwrap();
    assert!((fd - 5.0).abs() < 1e-8, "{fd}");
}

#[test]
fn mismatched_widths_and_small_sets_are_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = set(&cloud(10, 3, &mut rng), Source::Reference);
    let b = set(&cloud(10, 2, &mut rng), Source::Generated);
    assert!(frechet_distance(&a, &b).is_err());
    let tiny = set(&cloud(3, 3, &mut rng), Source::Generated);
    assert!(precision_recall(&a, &tiny, 5).is_err());
    assert!(EmbeddingSet::from_rows(&[vec![1.0], vec![f64::NAN]], Source::Reference).is_err());
}

#[test]
fn nearest_neighbour_prefers_lowest_index_on_ties() {
    let train = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    assert_eq!(nearest_neighbour(&[0.9, 0.0], &train), Some(0));
    assert_eq!(nearest_neighbour(&[0.5, 0.5], &train), Some(0));
    assert_eq!(nearest_neighbour(&[0.0, 0.9], &train), Some(1));
    assert_eq!(nearest_neighbour(&[0.0, 0.0], &[]), None);
}

#[test]
fn graph_metrics_on_synthetic_data() {
    let params = SynthParams { min_bricks: 8, max_bricks: 16 };
    let d = synth_dataset(&["wall", "table"], 4, params, 0).unwrap();
    let other = synth_dataset(&["wall", "table"], 4, params, 1).unwrap();
    let graphs = d.graphs();
    let keys = training_keys(&graphs);
    assert_eq!(pct_novel(&graphs, &keys).pct_novel, 0.0);
    assert!(degree_mmd(&graphs, &graphs, 1.0).abs() < 1e-12);
    assert!(degree_mmd(&graphs, &other.graphs(), 1.0) >= 0.0);
}

#[test]
fn gin_features_and_training() {
    let d = synth_dataset(&["bar", "plate", "cup"], 10, SynthParams { min_bricks: 10, max_bricks: 20 }, 4).unwrap();
    let graphs = d.graphs();
    let labels: Vec<usize> = d.records.iter().map(|r| r.class_id).collect();
    let f = graph_features(&graphs[0]);
    assert_eq!((f.rows(), f.cols()), (graphs[0].node_count(), 4));
    let (train, test) = stratified_split(&labels, 0.8, 0);
    assert_eq!((train.len(), test.len()), (24, 6));
    let cfg = GinConfig { num_classes: 3, hidden: 16, ..Default::default() };
    let tc = GinTrainConfig { epochs: 40, seed: 1, ..Default::default() };
    let (gin, report) = train_gin(&graphs, &labels, cfg.clone(), &tc).unwrap();
    assert!(report.train_accuracy >= 0.9, "{report:?}");
    let back = Gin::from_checkpoint(&gin.to_checkpoint()).unwrap();
    assert_eq!(back.embed(&graphs[3]).unwrap(), gin.embed(&graphs[3]).unwrap());
    assert_eq!(gin.embed(&graphs[3]).unwrap().len(), cfg.embedding_width());
    let (again, _) = train_gin(&graphs, &labels, cfg, &tc).unwrap();
    assert_eq!(again.to_checkpoint(), gin.to_checkpoint());
}
