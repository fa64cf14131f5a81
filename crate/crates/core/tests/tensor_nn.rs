use legogen::tensor::checkpoint::Checkpoint;
use legogen::tensor::gradcheck::check_params;
use legogen::tensor::nn::Activation;
use legogen::tensor::{AdamState, GruCell, Linear, Matrix, Mlp, ParamStore, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randomize(store: &mut ParamStore, rng: &mut impl Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.value_mut(id).data_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn gru_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (inp, hid, rows) = (3, 4, 2);
    let mut store = ParamStore::new();
    let cell = GruCell::new(&mut store, "gru", inp, hid, &mut rng);
    randomize(&mut store, &mut rng);
    let x = random_matrix(rows, inp, &mut rng);
    let h = random_matrix(rows, hid, &mut rng);
    let mut tape = Tape::new();
    let (xv, hv) = (tape.constant(x.clone()), tape.constant(h.clone()));
    let out = cell.forward(&mut tape, &store, xv, hv).unwrap();
    let got = tape.value(out).clone();

    let (wi, wh) = (store.value(cell.input_weight), store.value(cell.hidden_weight));
    let (bi, bh) = (store.value(cell.input_bias), store.value(cell.hidden_bias));
    for r in 0..rows {
        let gate = |w: &Matrix, b: &Matrix, v: &Matrix, width: usize, col: usize| (0..width).map(|k| v.get(r, k) * w.get(k, col)).sum::<f64>() + b.get(0, col);
        for j in 0..hid {
            let rg = sigmoid(gate(wi, bi, &x, inp, j) + gate(wh, bh, &h, hid, j));
            let zg = sigmoid(gate(wi, bi, &x, inp, hid + j) + gate(wh, bh, &h, hid, hid + j));
            let n = (gate(wi, bi, &x, inp, 2 * hid + j) + rg * gate(wh, bh, &h, hid, 2 * hid + j)).tanh();
            let want = (1.0 - zg) * n + zg * h.get(r, j);
            assert!((got.get(r, j) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn layers_pass_gradient_checks() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "lin", 5, 4, &mut rng);
        let mlp = Mlp::new(&mut store, "mlp", &[4, 6, 3], Activation::Tanh, &mut rng);
        let gru = GruCell::new(&mut store, "gru", 3, 3, &mut rng);
        randomize(&mut store, &mut rng);
        let x = random_matrix(3, 5, &mut rng);
        let h0 = random_matrix(3, 3, &mut rng);
        let report = check_params(
            &store,
            |tape, store| {
                let xv = tape.constant(x.clone());
                let a = lin.forward(tape, store, xv)?;
                let b = mlp.forward(tape, store, a)?;
                let hv = tape.constant(h0.clone());
                let c = gru.forward(tape, store, b, hv)?;
                let pooled = tape.sum_rows(c);
                tape.cross_entropy(pooled, 1)
            },
            6,
            1e-5,
            &mut rng,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}

#[test]
fn graph_ops_pass_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::new();
    let w = store.insert_uniform("w", 4, 3, &mut rng);
    randomize(&mut store, &mut rng);
    let report = check_params(
        &store,
        |tape, store| {
            let p = tape.param(store, w);
            let g = tape.gather_rows(p, &[2, 0, 2, 1])?;
            let s = tape.scatter_add_rows(g, &[1, 1, 0, 2], 3)?;
            let r = tape.reshape(s, 1, 9)?;
            let half = tape.slice_cols(r, 0, 6)?;
            let both = tape.concat_cols(&[half, r])?;
            let ls = tape.log_softmax_rows(both);
            let pick = tape.pick(ls, 0, 4)?;
            let bits = tape.slice_cols(r, 3, 9)?;
            let bce = tape.bernoulli_ce(bits, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0])?;
            tape.sub(bce, pick)
        },
        12,
        1e-5,
        &mut rng,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn adam_first_step_and_convergence() {
    let mut store = ParamStore::new();
    let id = store.insert("x", Matrix::row_vector(vec![3.0, -2.0]), 1);
    let mut adam = AdamState::new(&store, 0.1);
    for step in 0..500 {
        store.zero_grads();
        let v = store.value(id).clone();
        // d/dx of (x - 1)^2
        let g = Matrix::row_vector(v.data().iter().map(|x| 2.0 * (x - 1.0)).collect());
        store.accumulate_grad(id, &g);
        adam.step(&mut store).unwrap();
        if step == 0 {
            // First bias-corrected update is lr * g / (|g| + eps).
            assert!((store.value(id).data()[0] - (3.0 - 0.1)).abs() < 1e-6);
            assert!((store.value(id).data()[1] - (-2.0 + 0.1)).abs() < 1e-6);
        }
    }
    assert!(store.value(id).data().iter().all(|x| (x - 1.0).abs() < 1e-3));
    assert!(adam.step(&mut store).is_err(), "no gradients left");
}

#[test]
fn checkpoint_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    Mlp::new(&mut store, "m", &[3, 5, 2], Activation::Relu, &mut rng);
    randomize(&mut store, &mut rng);
    let ck = Checkpoint::from_store("test", serde_json::json!({"sizes": [3, 5, 2]}), &store);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);

    let mut fresh = ParamStore::new();
    Mlp::new(&mut fresh, "m", &[3, 5, 2], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(2));
    back.load_into(&mut fresh).unwrap();
    for id in store.ids() {
        assert_eq!(store.value(id), fresh.value(id));
    }
    let mut other = ParamStore::new();
    Mlp::new(&mut other, "m", &[3, 4, 2], Activation::Relu, &mut rng);
    assert!(back.load_into(&mut other).is_err());
}

#[test]
fn shape_errors_are_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", &[3, 2], Activation::Relu, &mut rng);
    let mut tape = Tape::new();
    let x = tape.constant(Matrix::zeros(1, 4));
    assert!(mlp.forward(&mut tape, &store, x).is_err());
    let y = tape.constant(Matrix::zeros(2, 2));
    assert!(tape.backward(y).is_err());
}
