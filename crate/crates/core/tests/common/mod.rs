#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdg_core::frontend::{compile_project, SourceFile, SourceProject};
use tdg_core::gnn::{ModelConfig, ParameterStore, Vocab};
use tdg_core::graph::*;
use tdg_core::tensor::Real;

pub const NETWORK_TS: &str = include_str!("../fixtures/motivating/network.ts");

pub fn project(files: &[(&str, &str)]) -> SourceProject {
    SourceProject {
        project_id: "test".into(),
        files: files
            .iter()
            .map(|(p, t)| SourceFile {
                path: p.to_string(),
                text: t.to_string(),
            })
            .collect(),
    }
}

pub fn graph_of(text: &str) -> TypeDependencyGraph {
    let ir = compile_project(&project(&[("main.ts", text)])).expect("fixture compiles");
    build_graph(&ir, &LibraryManifest::default())
}

pub fn network_graph() -> TypeDependencyGraph {
    graph_of(NETWORK_TS)
}

pub fn store<F: Real>(k: usize, dim: usize, lib: &[&str], seed: u64) -> ParameterStore<F> {
    let config = ModelConfig {
        dim,
        k,
        hidden: dim,
        ..ModelConfig::default()
    };
    let vocab = Vocab::new(
        ["my", "network", "time", "name", "restore", "x", "y"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    ParameterStore::new(
        config,
        vocab,
        lib.iter().map(|s| s.to_string()).collect(),
        seed,
    )
}

fn node(id: NodeId, constant: Option<&str>, name: &str) -> TypeNode {
    TypeNode {
        id,
        kind: match constant {
            Some(c) => NodeKind::Constant(c.to_string()),
            None => NodeKind::Variable,
        },
        origin: if constant.is_some() {
            NodeOrigin::Literal
        } else {
            NodeOrigin::Local
        },
        name: name.to_string(),
        name_tokens: tokenize_identifier(name),
        span: None,
    }
}

const NAMES: &[&str] = &[
    "count",
    "myNetwork",
    "time",
    "",
    "labelText",
    "x",
    "itemCount",
    "",
];
const LABELS: &[&str] = &["time", "name", "forward", "size"];

/// A graph with `n` nodes (roughly a fifth constants) and `m` edges of
/// random kinds with valid signatures.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> TypeDependencyGraph {
    let mut g = TypeDependencyGraph::default();
    for i in 0..n {
        let c = if rng.gen_bool(0.2) {
            Some(CONSTANT_KINDS[rng.gen_range(0..CONSTANT_KINDS.len())])
        } else {
            None
        };
        let name = if c.is_some() {
            ""
        } else {
            NAMES[rng.gen_range(0..NAMES.len())]
        };
        g.nodes.push(node(i, c, name));
    }
    let pick = |rng: &mut ChaCha8Rng| rng.gen_range(0..n);
    for _ in 0..m {
        let kind = EdgeKind::ALL[rng.gen_range(0..EdgeKind::ALL.len())];
        let (args, labels) = match kind {
            EdgeKind::Bool => (vec![pick(rng)], vec![]),
            EdgeKind::Name => {
                let a = pick(rng);
                let l = if g.nodes[a].name.is_empty() {
                    "anon".to_string()
                } else {
                    g.nodes[a].name.clone()
                };
                (vec![a], vec![EdgeLabel::Ident(l)])
            }
            EdgeKind::Subtype | EdgeKind::Assign | EdgeKind::NameSimilar => {
                (vec![pick(rng), pick(rng)], vec![])
            }
            EdgeKind::Access => (
                vec![pick(rng), pick(rng)],
                vec![EdgeLabel::Ident(
                    LABELS[rng.gen_range(0..LABELS.len())].into(),
                )],
            ),
            EdgeKind::Function | EdgeKind::Call => {
                let k = rng.gen_range(1..5);
                let args: Vec<NodeId> = (0..=k).map(|_| pick(rng)).collect();
                let labels = (0..k).map(|j| EdgeLabel::Position(j * 5)).collect();
                (args, labels)
            }
            EdgeKind::Object => {
                let k = rng.gen_range(0..4);
                let args: Vec<NodeId> = (0..=k).map(|_| pick(rng)).collect();
                let labels = (0..k)
                    .map(|_| EdgeLabel::Ident(LABELS[rng.gen_range(0..LABELS.len())].into()))
                    .collect();
                (args, labels)
            }
            EdgeKind::Usage => {
                let k = rng.gen_range(1..4);
                let args: Vec<NodeId> = (0..2 + 2 * k).map(|_| pick(rng)).collect();
                (args, vec![EdgeLabel::Ident("time".into())])
            }
        };
        g.edges.push(Hyperedge { kind, args, labels });
    }
    g.validate().expect("random graph is valid");
    g
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
