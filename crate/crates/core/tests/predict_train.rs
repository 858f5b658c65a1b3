mod common;

use common::*;
use proptest::prelude::*;
use tdg_core::eval::{generate_corpus, SyntheticSpec};
use tdg_core::gnn::ParameterStore;
use tdg_core::predictor::*;
use tdg_core::tensor::*;
use tdg_core::trainer::*;

const LIB: &[&str] = &["number", "string", "boolean", "Date"];

fn zero_output_layer<F: Real>(s: &mut ParameterStore<F>) {
    for p in ["predict/l4/w", "predict/l4/b"] {
        let id = s.pid(p).unwrap();
        for x in s.params.get_mut(id).data_mut() {
            *x = F::from_f64(0.0);
        }
    }
}

fn network_project() -> Project {
    Project {
        name: "network".into(),
        graph: network_graph(),
    }
}

#[test]
fn candidates_are_lib_then_user_types() {
    let g = network_graph();
    let lib: Vec<String> = LIB.iter().map(|s| s.to_string()).collect();
    let c = CandidateSet::for_graph(&lib, &g);
    assert_eq!(c.len(), 5);
    assert_eq!(c.name(4), "MyNetwork");
    assert!(c.is_user(4) && !c.is_user(0));
    assert_eq!(c.index_of("string"), Some(1));
    assert_eq!(CandidateSet::lib_only(&lib).index_of("MyNetwork"), None);
}

#[test]
fn uniform_scores_give_uniform_distribution_and_ln5_loss() {
    let mut g = network_graph();
    let keep = *g
        .annotations
        .iter()
        .find(|(_, t)| *t == "number")
        .unwrap()
        .0;
    g.annotations.retain(|&n, _| n == keep);
    let mut s: ParameterStore<f64> = store(2, 8, LIB, 1);
    zero_output_layer(&mut s);

    let mut tape = Tape::new();
    let l = project_loss(&mut tape, &s, &g, None, 0).unwrap();
    assert_eq!(l.terms, 1);
    assert!((tape.value(l.loss).item() - 5f64.ln()).abs() < 1e-12);

    let cands = CandidateSet::for_graph(&s.lib_types, &g);
    let p = predict(&s, &g, &[keep], &cands, 0).unwrap();
    for &q in &p.rows[0].probs {
        assert!((q - 0.2).abs() < 1e-12);
    }
    // Ties go to the earlier candidate.
    assert_eq!(p.rows[0].ranking, vec![0, 1, 2, 3, 4]);
    assert!(!p.rows[0].strictly_best(0));
}

#[test]
fn project_without_annotations_is_rejected() {
    let mut g = network_graph();
    g.annotations.clear();
    let s: ParameterStore<f64> = store(1, 4, LIB, 1);
    let mut tape = Tape::new();
    assert!(matches!(
        project_loss(&mut tape, &s, &g, None, 0),
        Err(TrainError::NoAnnotations(_))
    ));
    let cands = CandidateSet::lib_only(&[]);
    assert!(matches!(
        predict(&s, &g, &[0], &cands, 0),
        Err(PredictError::EmptyCandidateSet)
    ));
}

#[test]
fn downsampling_keeps_exactly_cap_terms() {
    let c = generate_corpus(&SyntheticSpec::default(), 3)
        .compile()
        .unwrap();
    let lib = library_types(&c.train, 100);
    let g = c
        .train
        .iter()
        .map(|p| &p.graph)
        .find(|g| targets(g, &CandidateSet::for_graph(&lib, g)).len() >= 8)
        .unwrap();
    let n = targets(g, &CandidateSet::for_graph(&lib, g)).len();
    let cap = n / 2;
    let s: ParameterStore<f64> =
        store(1, 4, &lib.iter().map(String::as_str).collect::<Vec<_>>(), 1);
    let mut tape = Tape::new();
    let l = project_loss(&mut tape, &s, g, Some(cap), 5).unwrap();
    assert_eq!(l.terms, cap);
    let mut tape = Tape::new();
    assert_eq!(
        project_loss(&mut tape, &s, g, Some(n * 2), 5)
            .unwrap()
            .terms,
        n
    );

    let t: Vec<(usize, usize)> = (0..20).map(|i| (i, 0)).collect();
    let a = downsample(t.clone(), Some(7), 9);
    assert_eq!(a.len(), 7);
    assert_eq!(a, downsample(t.clone(), Some(7), 9));
    assert!(a.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn near_perfect_scores_drive_loss_to_zero() {
    let mut tape = Tape::<f64>::new();
    let logits = tape.constant(Tensor::matrix(1, 3, vec![40.0, 0.0, 0.0]).unwrap());
    let l = tape.cross_entropy(logits, &[0]).unwrap();
    assert!(tape.value(l).item() < 1e-15);
}

#[test]
fn lr_schedule_is_linear_then_flat() {
    let c = TrainConfig::default();
    assert!((c.lr_at(0) - 1e-3).abs() < 1e-15);
    assert!((c.lr_at(15) - 5.5e-4).abs() < 1e-15);
    assert!((c.lr_at(30) - 1e-4).abs() < 1e-15);
    assert!((c.lr_at(90) - 1e-4).abs() < 1e-15);
    assert_eq!(c.model.k, 6);
    assert_eq!(c.model.dim, 32);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = TrainConfig {
        lr_end: 1e-2,
        ..TrainConfig::default()
    };
    assert!(c.validate().is_err());
    c.lr_end = 1e-4;
    c.model.dim = 0;
    assert!(c.validate().is_err());
}

#[test]
fn library_list_ranks_by_frequency_then_name() {
    let c = generate_corpus(&SyntheticSpec::default(), 1)
        .compile()
        .unwrap();
    let lib = library_types(&c.train, 3);
    assert_eq!(lib.len(), 3);
    assert!(lib.iter().all(|t| c
        .train
        .iter()
        .all(|p| !p.graph.user_type_nodes.contains_key(t))));
    assert_eq!(library_types(&c.train, 100)[..3], lib[..]);
}

#[test]
fn median_batch_is_lower_median() {
    let mut a = network_project();
    let mut b = network_project();
    a.graph.annotations.retain(|_, t| t == "number");
    b.graph.annotations.retain(|_, t| t != "Tensor");
    let lib: Vec<String> = LIB.iter().map(|s| s.to_string()).collect();
    let na = targets(&a.graph, &CandidateSet::for_graph(&lib, &a.graph)).len();
    let nb = targets(&b.graph, &CandidateSet::for_graph(&lib, &b.graph)).len();
    assert!(na < nb);
    assert_eq!(median_batch(&[a, b], &lib), na);
}

#[test]
fn score_gradient_matches_finite_differences() {
    let s: ParameterStore<f64> = store(1, 6, LIB, 4);
    let mut params = Params::<f64>::new();
    let mut r = rng(2);
    use rand::Rng;
    let v = params.insert(
        "v",
        Tensor::new(vec![1, 6], (0..6).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap(),
    );
    let u = params.insert(
        "u",
        Tensor::new(vec![1, 6], (0..6).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap(),
    );
    let report = gradient_check(&params, 1e-6, 1e-8, |tape, p| {
        let v = tape.param(p, v);
        let u = tape.param(p, u);
        score(tape, &s, v, u).map_err(|e| match e {
            PredictError::Gnn(tdg_core::gnn::GnnError::Tensor(t)) => t,
            other => panic!("{other}"),
        })
    })
    .unwrap();
    assert_eq!(report.checked, 12);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn user_type_score_uses_the_class_node_embedding() {
    let g = network_graph();
    let s: ParameterStore<f64> = store(2, 8, LIB, 3);
    let cands = CandidateSet::for_graph(&s.lib_types, &g);
    let class = g.user_type_nodes["MyNetwork"];
    let var = g.nodes.iter().find(|n| n.name == "network").unwrap().id;
    let mut tape = Tape::new();
    let run = tdg_core::gnn::run_gnn(&mut tape, &s, &g, 0).unwrap();
    let m = score_matrix(&mut tape, &s, run.last(), &[var], &cands).unwrap();
    let vn = tape.gather_rows(run.last(), &[var]).unwrap();
    let uc = tape.gather_rows(run.last(), &[class]).unwrap();
    let direct = score(&mut tape, &s, vn, uc).unwrap();
    assert!((tape.value(m).get(0, 4) - tape.value(direct).item()).abs() < 1e-12);
}

#[test]
fn prediction_json_top1_is_prefix_of_top5() {
    let g = network_graph();
    let s: ParameterStore<f32> = store(2, 8, LIB, 3);
    let cands = CandidateSet::for_graph(&s.lib_types, &g);
    let p = predict(&s, &g, &declared_nodes(&g), &cands, EVAL_RUN_SEED).unwrap();
    let one = p.to_json(1);
    let five = p.to_json(5);
    assert_eq!(one.len(), five.len());
    for (a, b) in one.iter().zip(&five) {
        assert_eq!(a.topk.len(), 1);
        assert_eq!(b.topk.len(), 5);
        assert_eq!(a.topk[0].ty, b.topk[0].ty);
        assert!(b.topk.windows(2).all(|w| w[0].prob >= w[1].prob));
    }
    let v = serde_json::to_value(&five[0]).unwrap();
    assert!(v["topk"][0]["type"].is_string());
    assert!(v.get("source_span").is_some());
}

#[test]
fn declared_nodes_exclude_classes() {
    let g = network_graph();
    let d = declared_nodes(&g);
    assert!(!d.contains(&g.user_type_nodes["MyNetwork"]));
    for n in g.annotations.keys() {
        assert!(d.contains(n));
    }
}

#[test]
fn training_log_and_best_epoch() {
    let corpus = Corpus {
        train: vec![network_project()],
        val: vec![network_project()],
        test: vec![],
    };
    let config = TrainConfig {
        model: tdg_core::gnn::ModelConfig {
            dim: 8,
            k: 1,
            hidden: 8,
            ..Default::default()
        },
        max_epochs: 4,
        deterministic: true,
        seed: 2,
        ..TrainConfig::default()
    };
    let out = train(&corpus, &config).unwrap();
    assert_eq!(out.log.rows.len(), 4);
    let csv = out.log.to_csv();
    assert!(csv.starts_with("epoch,train_loss,val_loss,val_top1,lr,wall_time\n"));
    assert!(out
        .log
        .rows
        .iter()
        .all(|r| r.wall_time == 0.0 && r.train_loss.is_finite()));
    let best = out
        .log
        .rows
        .iter()
        .map(|r| r.val_loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(out.log.rows[out.best_epoch].val_loss, best);
    let again = train(&corpus, &config).unwrap();
    assert_eq!(again.log, out.log);
    assert_eq!(
        again.store.to_checkpoint(2).to_json(),
        out.store.to_checkpoint(2).to_json()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn distributions_are_normalized_and_ranked(seed in any::<u64>()) {
        let g = network_graph();
        let s: ParameterStore<f64> = store(1, 4, LIB, seed);
        let cands = CandidateSet::for_graph(&s.lib_types, &g);
        let p = predict(&s, &g, &declared_nodes(&g), &cands, seed).unwrap();
        for row in &p.rows {
            prop_assert!((row.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.top(5).starts_with(row.top(1)));
            for w in row.ranking.windows(2) {
                let (a, b) = (row.probs[w[0]], row.probs[w[1]]);
                prop_assert!(a > b || (a == b && w[0] < w[1]));
            }
        }
    }

    #[test]
    fn shifting_scores_keeps_argmax_and_more_candidates_lower_probs(
        logits in proptest::collection::vec(-5.0f64..5.0, 2..8),
        shift in -10.0f64..10.0,
        extra in -5.0f64..5.0,
    ) {
        let g = network_graph();
        let a = prediction_from_scores(&g, 0, logits.clone());
        let b = prediction_from_scores(&g, 0, logits.iter().map(|x| x + shift).collect());
        prop_assert_eq!(a.top(1), b.top(1));
        let mut more = logits.clone();
        more.push(extra);
        let c = prediction_from_scores(&g, 0, more);
        for i in 0..logits.len() {
            prop_assert!(c.probs[i] <= a.probs[i] + 1e-15);
        }
    }
}
