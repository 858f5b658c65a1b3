//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Extra arguments filter the
//! criteria by name, e.g. `cargo test -p tdg-cli --test acceptance -- overfit`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{random_graph, rng, store};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;
use tdg_core::eval::*;
use tdg_core::frontend::{compile_project, SourceProject};
use tdg_core::gnn::*;
use tdg_core::graph::*;
use tdg_core::predictor::*;
use tdg_core::tensor::*;
use tdg_core::trainer::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(rel: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn graph_from(text: &str) -> TypeDependencyGraph {
    let src = SourceProject::single("fixture", "main.ts", text);
    build_graph(
        &compile_project(&src).expect("fixture compiles"),
        &LibraryManifest::default(),
    )
}

// Golden extraction

fn golden_extraction() -> Outcome {
    let text = fixture("motivating/network.ts");
    let start = Instant::now();
    let g = graph_from(&text);
    let took = start.elapsed();
    // Golden edges number type variables from 1; node ids start at 0.
    let tau = |t: usize| t - 1;
    let idents = |e: &Hyperedge| -> Vec<String> {
        e.labels
            .iter()
            .filter_map(|l| match l {
                EdgeLabel::Ident(s) => Some(s.clone()),
                EdgeLabel::Position(_) => None,
            })
            .collect()
    };
    let find =
        |kind: EdgeKind, args: &[usize]| g.edges.iter().find(|e| e.kind == kind && e.args == args);

    ensure(
        find(EdgeKind::Subtype, &[tau(13), tau(5)]).is_some(),
        || "Subtype(t13, t5) missing".into(),
    )?;
    let obj = find(EdgeKind::Object, &[tau(8), tau(1), tau(2), tau(9)])
        .ok_or("Object(t8, t1, t2, t9) missing")?;
    ensure(idents(obj) == ["name", "time", "forward"], || {
        format!("Object labels {:?}", idents(obj))
    })?;
    let name = find(EdgeKind::Name, &[tau(14)]).ok_or("Name(t14) missing")?;
    ensure(idents(name) == ["restore"], || {
        format!("Name label {:?}", idents(name))
    })?;
    let usage = g
        .edges
        .iter()
        .find(|e| e.kind == EdgeKind::Usage && e.args[..2] == [tau(6), tau(15)])
        .ok_or("Usage with head (t6, t15) missing")?;
    ensure(usage.ident_label() == Some("time"), || {
        "Usage label is not `time`".into()
    })?;
    ensure(usage.usage_pairs().any(|p| p == (tau(8), tau(2))), || {
        "pair (t8, t2) missing".into()
    })?;
    ensure(took < Duration::from_secs(1), || {
        format!("extraction took {took:?}")
    })?;
    Ok(format!(
        "{} nodes, {} edges, extracted in {:.1} ms",
        g.nodes.len(),
        g.edges.len(),
        took.as_secs_f64() * 1e3
    ))
}

// Gradient suite

fn rand_tensor(r: &mut rand_chacha::ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn ops_check() -> Result<GradCheck, TensorError> {
    let mut r = rng(7);
    let mut p = Params::<f64>::new();
    let a = p.insert("a", rand_tensor(&mut r, &[4, 3]));
    let w = p.insert("w", rand_tensor(&mut r, &[3, 5]));
    let b = p.insert("b", rand_tensor(&mut r, &[5]));
    let e = p.insert("e", rand_tensor(&mut r, &[6, 5]));
    let q = p.insert("q", rand_tensor(&mut r, &[4, 5]));
    let c = p.insert("c", rand_tensor(&mut r, &[4, 1]));
    let pos = p.insert("pos", Tensor::vector(vec![0.5, 1.5, 2.0, 0.7]));
    gradient_check(&p, 1e-5, 1e-6, |t, p| {
        let [a, w, b, e, q, c, pos] = [a, w, b, e, q, c, pos].map(|id| t.param(p, id));
        let h = t.matmul(a, w)?;
        let h = t.add_row(h, b)?;
        let h = t.leaky_relu(h, 0.2);
        let g = t.gather_rows(e, &[0, 2, 2, 5])?;
        let emb = t.embedding_lookup(e, &[1, 1, 3, 4])?;
        let h = t.add(h, g)?;
        let h = t.sub(h, emb)?;
        let h = t.mul(h, q)?;
        let att = t.row_dot(h, q)?;
        let att = t.segment_softmax(att, &[0, 0, 1, 1], 2)?;
        let h = t.mul_col(h, att)?;
        let h = t.mul_col(h, c)?;
        let s = t.scatter_add_rows(h, &[1, 0, 1, 2], 3)?;
        let cc = t.concat_cols(&[s, s])?;
        let cc = t.concat_rows(&[cc, cc])?;
        let sm = t.softmax(cc);
        let l1 = t.log(sm);
        let l1 = t.mean(l1);
        let ce = t.cross_entropy(cc, &[0, 1, 2, 3, 4, 5])?;
        let lg = t.log(pos);
        let lg = t.sum(lg);
        let rs = t.reshape(pos, &[2, 2])?;
        let rs = t.log_softmax(rs);
        let rs = t.pick_cols(rs, &[1, 0])?;
        let rs = t.sum(rs);
        let rs = t.scale(rs, 0.3);
        let d = t.dot(pos, pos)?;
        let mut tot = t.add(l1, ce)?;
        for x in [lg, rs, d] {
            tot = t.add(tot, x)?;
        }
        Ok(tot)
    })
}

fn gradient_suite() -> Outcome {
    let ops = ops_check().map_err(|e| e.to_string())?;
    ensure(ops.max_rel_error < 1e-4, || format!("tensor ops: {ops:?}"))?;

    let g = graph_from(&fixture("gradient/point.ts"));
    ensure(g.nodes.len() == 20, || {
        format!("fixture has {} nodes", g.nodes.len())
    })?;
    let mut s: ParameterStore<f64> = store(2, 6, &["number", "string", "boolean"], 3);
    s.vocab = Vocab::from_graphs([&g]);
    let s = ParameterStore::new(s.config, s.vocab.clone(), s.lib_types.clone(), 3);
    let loss = gradient_check(&s.params, 1e-5, 1e-6, |tape, p| {
        let st = ParameterStore {
            params: p.clone(),
            ..s.clone()
        };
        match project_loss(tape, &st, &g, None, 11) {
            Ok(l) => Ok(l.loss),
            Err(TrainError::Predict(PredictError::Gnn(GnnError::Tensor(e)))) => Err(e),
            Err(e) => panic!("{e}"),
        }
    })
    .map_err(|e| e.to_string())?;
    ensure(loss.max_rel_error < 1e-4, || {
        format!("project_loss: {loss:?}")
    })?;
    Ok(format!(
        "ops: {} scalars, max rel err {:.1e}; project_loss: {} scalars, max rel err {:.1e}",
        ops.checked, ops.max_rel_error, loss.checked, loss.max_rel_error
    ))
}

// Invariant suite

const CASES: u32 = 100;

fn prop<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn random_state(r: &mut rand_chacha::ChaCha8Rng, n: usize, d: usize) -> Tensor<f64> {
    rand_tensor(r, &[n, d])
}

fn usage_edge(alphas: &[usize], betas: &[usize]) -> Hyperedge {
    let mut args = vec![0, 1];
    for (a, b) in alphas.iter().zip(betas) {
        args.extend([*a, *b]);
    }
    Hyperedge {
        kind: EdgeKind::Usage,
        args,
        labels: vec![EdgeLabel::Ident("m".into())],
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn invariant_suite() -> Outcome {
    let mut names = Vec::new();
    let mut run = |name: &'static str, r: Result<(), String>| -> Result<(), String> {
        names.push(name);
        r
    };

    run(
        "constant pinning",
        prop(
            "constant pinning",
            (any::<u64>(), 2usize..14, 0usize..20),
            |(seed, n, m)| {
                let g = random_graph(&mut rng(seed), n, m);
                let s: ParameterStore<f64> = store(3, 4, &[], seed);
                let states = embed_graph(&s, &g, seed).unwrap();
                for st in &states {
                    for node in g.nodes.iter().filter(|n| n.is_constant()) {
                        prop_assert_eq!(st.matrix.row(node.id), states[0].matrix.row(node.id));
                    }
                }
                Ok(())
            },
        ),
    )?;

    run(
        "empty aggregation",
        prop(
            "empty aggregation",
            (any::<u64>(), 1usize..8),
            |(seed, d)| {
                let s: ParameterStore<f64> = store(1, d, &[], seed);
                let mut tape = Tape::new();
                let v = tape.constant(random_state(&mut rng(seed), 1, d));
                let out = aggregate(&mut tape, &s, 1, v, &[], false).unwrap();
                prop_assert_eq!(tape.value(out), tape.value(v));
                Ok(())
            },
        ),
    )?;

    run(
        "npairs normalization",
        prop(
            "npairs normalization",
            (any::<u64>(), 1usize..6),
            |(seed, k)| {
                let mut r = rng(seed);
                let mut st = random_state(&mut r, 2 + 2 * k, 4);
                let alphas: Vec<usize> = (0..k).map(|j| 2 + 2 * j).collect();
                let betas: Vec<usize> = (0..k).map(|j| 3 + 2 * j).collect();
                let shared: Vec<f64> = st.row(3).to_vec();
                for &b in &betas {
                    st.data_mut()[b * 4..b * 4 + 4].copy_from_slice(&shared);
                }
                let mut tape = Tape::<f64>::new();
                let state = tape.constant(st);
                let msgs =
                    msg_npairs(&mut tape, state, &usage_edge(&alphas, &betas), false).unwrap();
                prop_assert!(close(tape.value(msgs[0].value).data(), &shared, 1e-9));
                Ok(())
            },
        ),
    )?;

    run(
        "npairs single pair",
        prop("npairs single pair", any::<u64>(), |seed| {
            let st = random_state(&mut rng(seed), 4, 5);
            let mut tape = Tape::<f64>::new();
            let state = tape.constant(st.clone());
            let msgs = msg_npairs(&mut tape, state, &usage_edge(&[2], &[3]), false).unwrap();
            prop_assert!(close(tape.value(msgs[0].value).data(), st.row(3), 1e-12));
            prop_assert!(close(tape.value(msgs[1].value).data(), st.row(2), 1e-12));
            Ok(())
        }),
    )?;

    run(
        "nary beta independence",
        prop(
            "nary beta independence",
            (any::<u64>(), 2usize..6, 0usize..6, 0usize..3),
            |(seed, k, i, kind)| {
                let i = i % k;
                let kind = [EdgeKind::Function, EdgeKind::Call, EdgeKind::Object][kind];
                let labels = (0..k)
                    .map(|j| {
                        if kind == EdgeKind::Object {
                            EdgeLabel::Ident(format!("m{j}"))
                        } else {
                            EdgeLabel::Position(j)
                        }
                    })
                    .collect();
                let edge = Hyperedge {
                    kind,
                    args: (0..=k).collect(),
                    labels,
                };
                let s: ParameterStore<f64> = store(1, 4, &[], seed);
                let st = random_state(&mut rng(seed), k + 1, 4);
                let mut moved = st.clone();
                for x in &mut moved.data_mut()[(1 + i) * 4..(2 + i) * 4] {
                    *x += 0.75;
                }
                let mut tape = Tape::new();
                let names: Vec<String> = (0..k).map(|j| format!("m{j}")).collect();
                let idents =
                    IdentTable::build(&mut tape, &s, names.iter().map(String::as_str), 0).unwrap();
                let (a, b) = (tape.constant(st), tape.constant(moved));
                let ma = msg_nary(&mut tape, &s, a, &edge, 1, &idents).unwrap();
                let mb = msg_nary(&mut tape, &s, b, &edge, 1, &idents).unwrap();
                for (x, y) in ma.iter().zip(&mb) {
                    if x.target != 0 && x.target != 1 + i {
                        prop_assert_eq!(tape.value(x.value), tape.value(y.value));
                    }
                }
                Ok(())
            },
        ),
    )?;

    run(
        "permutation equivariance",
        prop(
            "permutation equivariance",
            (any::<u64>(), 2usize..12, 0usize..16),
            |(seed, n, m)| {
                let mut r = rng(seed);
                let g = random_graph(&mut r, n, m);
                let mut perm: Vec<usize> = (0..n).collect();
                rand::seq::SliceRandom::shuffle(&mut perm[..], &mut r);
                let mut h = g.clone();
                for (old, node) in g.nodes.iter().enumerate() {
                    h.nodes[perm[old]] = TypeNode {
                        id: perm[old],
                        ..node.clone()
                    };
                }
                for e in &mut h.edges {
                    for a in &mut e.args {
                        *a = perm[*a];
                    }
                }
                let s: ParameterStore<f64> = store(2, 4, &[], seed);
                let a = embed_graph(&s, &g, seed).unwrap();
                let b = embed_graph(&s, &h, seed).unwrap();
                let (a, b) = (&a.last().unwrap().matrix, &b.last().unwrap().matrix);
                for (old, &new) in perm.iter().enumerate() {
                    prop_assert!(close(a.row(old), b.row(new), 1e-9));
                }
                Ok(())
            },
        ),
    )?;

    run(
        "softmax",
        prop(
            "softmax",
            (
                proptest::collection::vec(-20.0f64..20.0, 1..10),
                -50.0f64..50.0,
            ),
            |(xs, shift)| {
                let n = xs.len();
                let mut tape = Tape::<f64>::new();
                let a = tape.constant(Tensor::matrix(1, n, xs.clone()).unwrap());
                let b = tape.constant(
                    Tensor::matrix(1, n, xs.iter().map(|x| x + shift).collect()).unwrap(),
                );
                let (sa, sb) = (tape.softmax(a), tape.softmax(b));
                let pa = tape.value(sa).data().to_vec();
                prop_assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(pa.iter().all(|p| *p >= 0.0));
                prop_assert!(close(&pa, tape.value(sb).data(), 1e-12));
                Ok(())
            },
        ),
    )?;

    run(
        "metrics",
        prop(
            "metrics",
            proptest::collection::vec(
                (
                    proptest::collection::vec(-3.0f64..3.0, 6),
                    0usize..6,
                    1u32..5,
                ),
                1..20,
            ),
            |rows| {
                let mut g = TypeDependencyGraph::default();
                for i in 0..rows.len() {
                    g.nodes.push(TypeNode {
                        id: i,
                        kind: NodeKind::Variable,
                        origin: NodeOrigin::Local,
                        name: format!("v{i}"),
                        name_tokens: vec![format!("v{i}")],
                        span: None,
                    });
                }
                let lib: Vec<String> = ["A", "B", "C", "D", "E", "F"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                let cands = CandidateSet::lib_only(&lib);
                let user: BTreeSet<String> = ["A".to_string(), "B".to_string()].into();
                let mut truth = BTreeMap::new();
                let mut occ = BTreeMap::new();
                let mut preds = Vec::new();
                for (i, (logits, t, o)) in rows.iter().enumerate() {
                    truth.insert(i, lib[*t].clone());
                    occ.insert(i, *o);
                    preds.push(prediction_from_scores(&g, i, logits.clone()));
                }
                for p in &preds {
                    prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!(p.top(5).starts_with(p.top(1)));
                }
                let preds = PredictionResult {
                    candidates: cands,
                    rows: preds,
                };
                let c = accuracy(&preds, &truth, &user, &occ).unwrap();
                for level in [c.declaration, c.occurrence] {
                    let (u, l, o) = (level.user, level.lib, level.overall());
                    prop_assert!(o.top5 >= o.top1 && o.top1 >= o.strict1);
                    let mixed = (u.total * u.acc1() + l.total * l.acc1()) / (u.total + l.total);
                    prop_assert!((mixed - o.acc1()).abs() < 1e-12);
                }
                Ok(())
            },
        ),
    )?;

    Ok(format!(
        "{} properties x {CASES} cases: {}",
        names.len(),
        names.join(", ")
    ))
}

// Training criteria

fn overfit() -> Outcome {
    let spec = SyntheticSpec::default();
    let (name, project) = (0..200u64)
        .map(|seed| {
            let p = generate_project(&spec, "overfit", seed);
            let ir = compile_project(&p.to_source()).expect("generated code compiles");
            (seed, build_graph(&ir, &LibraryManifest::default()))
        })
        .find(|(_, g)| (28..=32).contains(&g.annotations.len()))
        .map(|(seed, g)| {
            (
                format!("seed {seed}"),
                Project {
                    name: "overfit".into(),
                    graph: g,
                },
            )
        })
        .ok_or("no generated project with about 30 annotations")?;
    let n = project.graph.annotations.len();
    let corpus = Corpus {
        train: vec![project],
        val: vec![],
        test: vec![],
    };
    let config = TrainConfig {
        max_epochs: 200,
        lr_start: 3e-3,
        lr_end: 3e-4,
        deterministic: true,
        ..TrainConfig::default()
    };
    ensure(config.model.k == 6 && config.model.dim == 32, || {
        "model is not K=6, d=32".into()
    })?;
    let out = train(&corpus, &config).map_err(|e| e.to_string())?;
    let m = evaluate_split(&out.store, &corpus.train).map_err(|e| e.to_string())?;
    ensure(m.top1 >= 0.95, || {
        format!(
            "training top-1 {:.1}% after {} epochs",
            100.0 * m.top1,
            out.log.rows.len()
        )
    })?;
    Ok(format!(
        "{n} annotations ({name}), training top-1 {:.1}% after {} epochs",
        100.0 * m.top1,
        out.log.rows.len()
    ))
}

struct Desk {
    corpus: Corpus,
    config: TrainConfig,
    full: EvalReport,
}

fn desk_corpus() -> Corpus {
    generate_corpus(&SyntheticSpec::default(), 1)
        .compile()
        .expect("generated corpus compiles")
}

fn desk_scale(desk: &mut Option<Desk>) -> Outcome {
    let corpus = desk_corpus();
    let config = TrainConfig {
        seed: 0,
        deterministic: true,
        ..TrainConfig::default()
    };
    let out = train(&corpus, &config).map_err(|e| e.to_string())?;
    let model =
        evaluate_model("model", &out.store, &corpus.test, false).map_err(|e| e.to_string())?;
    let fallback = most_frequent_type(&corpus.train);
    let base = evaluate_baseline(&corpus.test, &out.store.lib_types, fallback.as_deref())
        .map_err(|e| e.to_string())?;
    let (m1, m5, b1) = (
        100.0 * model.overall().acc1(),
        100.0 * model.overall().acc5(),
        100.0 * base.overall().acc1(),
    );
    let summary = format!(
        "{}/{}/{} projects, best epoch {}: model top-1 {m1:.1} top-5 {m5:.1}, SimilarName top-1 {b1:.1}",
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len(),
        out.best_epoch
    );
    println!("{}", format_table(&[model.clone(), base]).trim_end());
    *desk = Some(Desk {
        corpus,
        config,
        full: model,
    });
    ensure(m1 >= b1 + 10.0, || {
        format!("{summary}: top-1 margin over baseline below 10 points")
    })?;
    ensure(m5 >= m1 + 10.0, || {
        format!("{summary}: top-5 not 10 points above top-1")
    })?;
    Ok(summary)
}

fn ablations(desk: &mut Option<Desk>) -> Outcome {
    if desk.is_none() {
        desk_scale(desk).map_err(|e| format!("base run failed: {e}"))?;
    }
    let Desk {
        corpus,
        config,
        full,
    } = desk.as_ref().expect("base run");
    let mut top1 = Vec::new();
    let mut reports = Vec::new();
    let mut k0_user = None;
    for k in [0usize, 1, 2] {
        let r = run_ablation(corpus, config, AblationVariant::K(k)).map_err(|e| e.to_string())?;
        if k == 0 {
            k0_user = Some(r.report.user());
        }
        top1.push((k, 100.0 * r.report.overall().acc1()));
        reports.push(r.report);
    }
    top1.push((6, 100.0 * full.overall().acc1()));
    let no_ctx = run_ablation(
        corpus,
        config,
        AblationVariant::parse("no-contextual").unwrap(),
    )
    .map_err(|e| e.to_string())?
    .report;
    reports.push(EvalReport {
        name: "full".into(),
        ..full.clone()
    });
    reports.push(no_ctx.clone());
    println!("{}", format_table(&reports).trim_end());

    let curve: Vec<String> = top1.iter().map(|(k, a)| format!("K={k}: {a:.1}")).collect();
    let curve = curve.join(", ");
    for w in top1.windows(2) {
        ensure(w[1].1 >= w[0].1 - 2.0, || {
            format!("top-1 drops from K={} to K={}: {curve}", w[0].0, w[1].0)
        })?;
    }
    let k0 = k0_user.expect("K=0 ran");
    ensure(k0.strict_acc1() == 0.0, || {
        format!(
            "K=0 user top-1 strictly above every other candidate on {:.1}%",
            100.0 * k0.strict_acc1()
        )
    })?;
    let (fu, nu) = (100.0 * full.user().acc1(), 100.0 * no_ctx.user().acc1());
    ensure(nu < fu, || {
        format!("NoContextual user top-1 {nu:.1} not below full {fu:.1}")
    })?;
    Ok(format!(
        "{curve}; K=0 user top-1 {:.1} (strict {:.1}); user top-1 full {fu:.1} vs NoContextual {nu:.1}",
        100.0 * k0.acc1(),
        100.0 * k0.strict_acc1()
    ))
}

// Determinism of the command-line training run

fn tdg(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tdg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "tdg {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    tdg(&[
        "gen-corpus",
        &p("corpus"),
        "--train",
        "6",
        "--val",
        "2",
        "--test",
        "2",
        "--seed",
        "5",
    ])?;
    for run in ["a", "b"] {
        tdg(&[
            "train",
            &p("corpus"),
            "--out",
            &p(run),
            "--deterministic",
            "--seed",
            "7",
            "--max-epochs",
            "4",
        ])?;
    }
    let mut bytes = 0;
    for file in ["model.ckpt.json", "train_log.csv", "manifest.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.path().join("b").join(file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{file} differs between runs"))?;
        bytes += a.len();
    }
    Ok(format!(
        "checkpoint, log and manifest identical ({bytes} bytes)"
    ))
}

const CRITERIA: [&str; 7] = [
    "golden-extraction",
    "gradient-suite",
    "invariant-suite",
    "overfit",
    "determinism",
    "desk-scale",
    "ablations",
];

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut desk = None;
    let (mut ran, mut failed) = (0, 0);
    for name in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = match name {
            "golden-extraction" => golden_extraction(),
            "gradient-suite" => gradient_suite(),
            "invariant-suite" => invariant_suite(),
            "overfit" => overfit(),
            "determinism" => determinism(),
            "desk-scale" => desk_scale(&mut desk),
            _ => ablations(&mut desk),
        };
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
