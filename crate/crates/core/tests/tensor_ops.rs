use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdg_core::tensor::*;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn naive_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            for p in 0..k {
                out[i * m + j] += a[i * k + p] * b[p * m + j];
            }
        }
    }
    out
}

#[test]
fn softmax_of_zeros_is_uniform() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::vector(vec![0.0; 3]));
    let y = t.softmax(x);
    for &v in t.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn leaky_relu_negative_slope() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::vector(vec![-1.0, 2.0]));
    let y = t.leaky_relu(x, 0.2);
    assert_eq!(t.value(y).data(), &[-0.2, 2.0]);
}

#[test]
fn sum_and_dot_gradients() {
    let mut p = Params::<f64>::new();
    let w = p.insert("w", Tensor::vector(vec![1.0, 2.0]));
    let u = p.insert("u", Tensor::vector(vec![5.0, 6.0, 7.0]));

    let mut t = Tape::new();
    let uv = t.param(&p, u);
    let s = t.sum(uv);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(u).unwrap().data(), &[1.0, 1.0, 1.0]);
    assert!(g.get(w).is_none());
    assert_eq!(g.get_or_zero(&p, w).data(), &[0.0, 0.0]);

    let mut t = Tape::new();
    let wv = t.param(&p, w);
    let d = t.dot(wv, wv).unwrap();
    assert_eq!(t.value(d).item(), 5.0);
    let g = t.backward(d).unwrap();
    assert_eq!(g.get(w).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn backward_needs_scalar() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(t.backward(x), Err(TensorError::NotScalarLoss(_))));
}

#[test]
fn shape_errors_are_reported() {
    let mut t = Tape::<f64>::new();
    let a = t.constant(Tensor::zeros(&[2, 3]));
    let b = t.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(
        t.matmul(a, b),
        Err(TensorError::ShapeMismatch { .. })
    ));
    assert!(matches!(
        t.gather_rows(a, &[5]),
        Err(TensorError::IndexOutOfRange { .. })
    ));
}

#[test]
fn segment_softmax_normalizes_each_group() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::matrix(5, 1, vec![1.0, 2.0, 3.0, 0.5, -1.0]).unwrap());
    let y = t.segment_softmax(x, &[0, 0, 1, 1, 1], 2).unwrap();
    let d = t.value(y).data();
    assert!((d[0] + d[1] - 1.0).abs() < 1e-12);
    assert!((d[2] + d[3] + d[4] - 1.0).abs() < 1e-12);
}

#[test]
fn cross_entropy_uniform_is_log_c() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::zeros(&[2, 4]));
    let l = t.cross_entropy(x, &[0, 3]).unwrap();
    assert!((t.value(l).item() - 4f64.ln()).abs() < 1e-12);
}

/// Every differentiable op composed into one scalar, checked against
/// central differences.
#[test]
fn finite_differences_all_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut p = Params::<f64>::new();
    let a = p.insert("a", rand_tensor(&mut rng, &[4, 3]));
    let w = p.insert("w", rand_tensor(&mut rng, &[3, 5]));
    let b = p.insert("b", rand_tensor(&mut rng, &[5]));
    let e = p.insert("e", rand_tensor(&mut rng, &[6, 5]));
    let q = p.insert("q", rand_tensor(&mut rng, &[4, 5]));
    let r = p.insert("r", rand_tensor(&mut rng, &[4, 1]));
    let pos = p.insert("pos", Tensor::vector(vec![0.5, 1.5, 2.0, 0.7]));

    let report = gradient_check(&p, 1e-5, 1e-6, |t, p| {
        let a = t.param(p, a);
        let w = t.param(p, w);
        let b = t.param(p, b);
        let e = t.param(p, e);
        let q = t.param(p, q);
        let r = t.param(p, r);
        let pos = t.param(p, pos);
        let h = t.matmul(a, w)?;
        let h = t.add_row(h, b)?;
        let h = t.leaky_relu(h, 0.2);
        let g = t.gather_rows(e, &[0, 2, 2, 5])?;
        let h = t.add(h, g)?;
        let h2 = t.mul(h, q)?;
        let h = t.sub(h2, h)?;
        let att = t.row_dot(h, q)?;
        let att = t.segment_softmax(att, &[0, 0, 1, 1], 2)?;
        let h = t.mul_col(h, att)?;
        let h = t.mul_col(h, r)?;
        let s = t.scatter_add_rows(h, &[1, 0, 1, 2], 3)?;
        let c = t.concat_cols(&[s, s])?;
        let c = t.concat_rows(&[c, c])?;
        let sm = t.softmax(c);
        let l1 = t.log(sm);
        let l1 = t.mean(l1);
        let ce = t.cross_entropy(c, &[0, 1, 2, 3, 4, 5])?;
        let lg = t.log(pos);
        let lg = t.sum(lg);
        let rs = t.reshape(pos, &[2, 2])?;
        let rs = t.log_softmax(rs);
        let rs = t.pick_cols(rs, &[1, 0])?;
        let rs = t.sum(rs);
        let rs = t.scale(rs, 0.3);
        let tot = t.add(l1, ce)?;
        let tot = t.add(tot, lg)?;
        t.add(tot, rs)
    })
    .unwrap();
    assert!(report.checked > 80);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn shared_param_accumulates() {
    let mut p = Params::<f64>::new();
    let w = p.insert("w", Tensor::vector(vec![3.0]));
    let mut t = Tape::new();
    let a = t.param(&p, w);
    let b = t.param(&p, w);
    assert_eq!(a, b);
    let s = t.mul(a, b).unwrap();
    let s = t.add(s, a).unwrap();
    let s = t.sum(s);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(w).unwrap().data(), &[7.0]);
}

#[test]
fn adam_single_step_matches_hand_computation() {
    let cfg = AdamConfig {
        weight_decay: 0.0,
        ..AdamConfig::default()
    };
    let mut p = Params::<f64>::new();
    let w = p.insert("w", Tensor::vector(vec![1.0, -2.0]));
    let mut t = Tape::new();
    let wv = t.param(&p, w);
    let c = t.constant(Tensor::vector(vec![0.5, 3.0]));
    let l = t.dot(wv, c).unwrap();
    let g = t.backward(l).unwrap();
    let mut st = AdamState::new(cfg);
    st.step(&mut p, &g, 0.1);
    // First step with bias correction: m_hat = g, v_hat = g^2, so the update
    // is lr * g / (|g| + eps).
    let expect = |x: f64, g: f64| x - 0.1 * g / (g.abs() + 1e-8);
    let d = p.get(w).data();
    assert!((d[0] - expect(1.0, 0.5)).abs() < 1e-12);
    assert!((d[1] - expect(-2.0, 3.0)).abs() < 1e-12);
    assert_eq!(st.steps(w), 1);

    // Second step, computed by hand.
    let g2 = [0.5, 3.0];
    let mut m = [0.0; 2];
    let mut v = [0.0; 2];
    let mut x = [1.0, -2.0];
    for step in 1..=2 {
        for i in 0..2 {
            m[i] = 0.9 * m[i] + 0.1 * g2[i];
            v[i] = 0.999 * v[i] + 0.001 * g2[i] * g2[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(step));
            let vh = v[i] / (1.0 - 0.999f64.powi(step));
            x[i] -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
    }
    st.step(&mut p, &g, 0.1);
    let d = p.get(w).data();
    assert!((d[0] - x[0]).abs() < 1e-12);
    assert!((d[1] - x[1]).abs() < 1e-12);
}

#[test]
fn adam_skips_untouched_params() {
    let mut p = Params::<f64>::new();
    let w = p.insert("w", Tensor::vector(vec![1.0]));
    let u = p.insert("u", Tensor::vector(vec![4.0]));
    let mut t = Tape::new();
    let wv = t.param(&p, w);
    let l = t.sum(wv);
    let g = t.backward(l).unwrap();
    let mut st = AdamState::new(AdamConfig::default());
    st.step(&mut p, &g, 0.01);
    assert_eq!(p.get(u).data(), &[4.0]);
    assert_eq!(st.steps(u), 0);
}

#[test]
fn adam_zero_gradient_without_decay_is_noop() {
    let cfg = AdamConfig {
        weight_decay: 0.0,
        ..AdamConfig::default()
    };
    let mut p = Params::<f64>::new();
    let w = p.insert("w", Tensor::vector(vec![1.5, -0.5]));
    let mut t = Tape::new();
    let wv = t.param(&p, w);
    let z = t.scale(wv, 0.0);
    let l = t.sum(z);
    let g = t.backward(l).unwrap();
    let mut st = AdamState::new(cfg);
    st.step(&mut p, &g, 0.1);
    assert_eq!(p.get(w).data(), &[1.5, -0.5]);
}

#[test]
fn decoupled_decay_shrinks_by_lr_times_decay() {
    let cfg = AdamConfig {
        decay_mode: WeightDecay::Decoupled,
        ..AdamConfig::default()
    };
    let mut p = Params::<f64>::new();
    let w = p.insert("w", Tensor::vector(vec![2.0]));
    let mut t = Tape::new();
    let wv = t.param(&p, w);
    let z = t.scale(wv, 0.0);
    let l = t.sum(z);
    let g = t.backward(l).unwrap();
    let mut st = AdamState::new(cfg);
    st.step(&mut p, &g, 1e-3);
    let expect = 2.0 - 1e-3 * 1e-4 * 2.0;
    assert!((p.get(w).data()[0] - expect).abs() < 1e-15);
}

#[test]
fn checkpoint_round_trip() {
    let mut p = Params::<f32>::new();
    p.insert(
        "a/b",
        Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.5]).unwrap(),
    );
    p.insert("c", Tensor::vector(vec![-0.25]));
    let ck = Checkpoint::from_params(&p, 9, serde_json::json!({"k": 6}));
    let back = Checkpoint::from_json(&ck.to_json()).unwrap();
    assert_eq!(back, ck);
    let q: Params<f32> = back.to_params().unwrap();
    assert_eq!(q, p);

    let mut bad = ck.clone();
    bad.format_version = 99;
    assert!(matches!(
        Checkpoint::from_json(&bad.to_json()),
        Err(CheckpointError::Version(99))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matmul_matches_naive(n in 1usize..6, k in 1usize..6, m in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_tensor(&mut rng, &[n, k]);
        let b = rand_tensor(&mut rng, &[k, m]);
        let expect = naive_matmul(a.data(), b.data(), n, k, m);
        let mut t = Tape::new();
        let av = t.constant(a);
        let bv = t.constant(b);
        let c = t.matmul(av, bv).unwrap();
        for (x, y) in t.value(c).data().iter().zip(&expect) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..5, cols in 1usize..8, scale in 0.1f64..50.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[rows, cols]).map(|v| v * scale);
        let mut t = Tape::new();
        let xv = t.constant(x);
        let y = t.softmax(xv);
        for r in 0..rows {
            let row = t.value(y).row(r);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scatter_is_adjoint_of_gather(n in 1usize..6, m in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
        let x = rand_tensor(&mut rng, &[n, 3]);
        let y = rand_tensor(&mut rng, &[m, 3]);
        let mut t = Tape::new();
        let xv = t.constant(x);
        let yv = t.constant(y);
        let g = t.gather_rows(xv, &idx).unwrap();
        let s = t.scatter_add_rows(yv, &idx, n).unwrap();
        let lhs = t.dot(g, yv).unwrap();
        let rhs = t.dot(xv, s).unwrap();
        prop_assert!((t.value(lhs).item() - t.value(rhs).item()).abs() < 1e-9);
    }
}
