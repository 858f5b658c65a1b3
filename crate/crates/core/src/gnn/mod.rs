//! Message passing over type dependency graphs.

mod ident;
pub(crate) mod layers;
mod run;

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeCategory, EdgeKind, TypeDependencyGraph, CONSTANT_KINDS};
use crate::tensor::{ParamId, Params, Real, Tensor, TensorError};

pub use ident::{embed_identifier, unknown_bucket, IdentTable};
pub use layers::{aggregate, msg_fixed, msg_nary, msg_npairs, Message};
pub use run::{
    embed_graph, init_embeddings, run_gnn, run_gnn_reference, states_to_csv, EmbeddingState, GnnRun,
};

/// Number of shared slots for out-of-vocabulary tokens.
pub const UNKNOWN_BUCKETS: usize = 50;
/// Positions `0..MAX_POSITION` get their own label vector; larger ones share
/// the overflow slot.
pub const MAX_POSITION: usize = 16;
/// Hidden sizes of the candidate scoring MLP.
pub const PREDICT_HIDDEN: [usize; 3] = [32, 16, 8];
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("unknown constant kind `{0}`")]
    UnknownConstantKind(String),
    #[error("{kind} edge has {got} arguments")]
    ArityMismatch { kind: EdgeKind, got: usize },
    #[error("usage edge without pairs")]
    EmptyPairList,
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Switches for the ablation study. All off is the full model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub no_contextual: bool,
    pub no_logical: bool,
    pub no_npair_attention: bool,
    pub simple_aggregation: bool,
}

impl Ablation {
    pub const NAMES: [&'static str; 5] = [
        "none",
        "no-contextual",
        "no-logical",
        "no-npair-attention",
        "simple-aggregation",
    ];

    pub fn parse(name: &str) -> Option<Ablation> {
        let mut a = Ablation::default();
        match name {
            "none" | "full" => {}
            "no-contextual" => a.no_contextual = true,
            "no-logical" => a.no_logical = true,
            "no-npair-attention" => a.no_npair_attention = true,
            "simple-aggregation" => a.simple_aggregation = true,
            _ => return None,
        }
        Some(a)
    }

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.no_contextual {
            parts.push("no-contextual");
        }
        if self.no_logical {
            parts.push("no-logical");
        }
        if self.no_npair_attention {
            parts.push("no-npair-attention");
        }
        if self.simple_aggregation {
            parts.push("simple-aggregation");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }

    pub fn keeps(&self, kind: EdgeKind) -> bool {
        if kind.is_contextual() {
            !self.no_contextual
        } else {
            !self.no_logical
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    /// Message passing rounds.
    pub k: usize,
    /// Hidden width of the message MLPs.
    pub hidden: usize,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 32,
            k: 6,
            hidden: 32,
            ablation: Ablation::default(),
        }
    }
}

/// Identifier tokens with their own embedding row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(mut tokens: Vec<String>) -> Self {
        tokens.sort();
        tokens.dedup();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Tokens seen more than once across the given graphs. Every named node
    /// and every member label counts as one occurrence of each of its tokens.
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a TypeDependencyGraph>) -> Self {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for g in graphs {
            for n in &g.nodes {
                for t in &n.name_tokens {
                    *counts.entry(t.clone()).or_default() += 1;
                }
            }
            for e in &g.edges {
                if matches!(e.kind, EdgeKind::Access | EdgeKind::Object) {
                    for l in &e.labels {
                        if let crate::graph::EdgeLabel::Ident(s) = l {
                            for t in crate::graph::tokenize_identifier(s) {
                                *counts.entry(t).or_default() += 1;
                            }
                        }
                    }
                }
            }
        }
        Vocab::new(
            counts
                .into_iter()
                .filter(|(_, c)| *c > 1)
                .map(|(t, _)| t)
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Row in the identifier table for `token` under the given run seed.
    pub fn row(&self, token: &str, run_seed: u64) -> usize {
        self.get(token)
            .unwrap_or_else(|| self.len() + unknown_bucket(run_seed, token))
    }

    pub fn no_name_row(&self) -> usize {
        self.len() + UNKNOWN_BUCKETS
    }

    /// Total rows: vocabulary, unknown buckets and `<NoName>`.
    pub fn table_rows(&self) -> usize {
        self.len() + UNKNOWN_BUCKETS + 1
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

/// Model weights plus everything needed to interpret them.
#[derive(Debug, Clone)]
pub struct ParameterStore<F: Real = f32> {
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// Library candidate types, in candidate order.
    pub lib_types: Vec<String>,
    pub params: Params<F>,
}

#[derive(Serialize, Deserialize)]
struct StoreMeta {
    config: ModelConfig,
    vocab: Vocab,
    lib_types: Vec<String>,
}

impl<F: Real> ParameterStore<F> {
    /// Fresh weights: Xavier-uniform matrices, zero biases, small uniform
    /// embedding rows.
    pub fn new(config: ModelConfig, vocab: Vocab, lib_types: Vec<String>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::new();
        let d = config.dim;
        let h = config.hidden;
        let emb = |rng: &mut ChaCha8Rng, rows: usize| uniform(rng, &[rows, d], 0.5);

        p.insert("init/generic", emb(&mut rng, 1));
        p.insert("init/const", emb(&mut rng, CONSTANT_KINDS.len()));
        p.insert("ident/tokens", emb(&mut rng, vocab.table_rows()));
        p.insert("ident/positions", emb(&mut rng, MAX_POSITION + 1));

        for t in 1..=config.k {
            for kind in EdgeKind::ALL {
                match kind.category() {
                    EdgeCategory::Fixed => {
                        let arity = kind.fixed_arity().expect("fixed kind");
                        let input = (arity + kind.has_identifier_label() as usize) * d;
                        for j in 0..arity {
                            let prefix = format!("step{t}/fixed/{kind}/arg{j}");
                            insert_mlp(&mut p, &mut rng, &prefix, &[input, h, d]);
                        }
                    }
                    EdgeCategory::NAry => {
                        for side in ["alpha", "beta"] {
                            let prefix = format!("step{t}/nary/{kind}/{side}");
                            insert_mlp(&mut p, &mut rng, &prefix, &[2 * d, h, d]);
                        }
                    }
                    EdgeCategory::NPairs => {}
                }
            }
            p.insert(format!("step{t}/aggr/m1"), xavier(&mut rng, d, d));
            p.insert(format!("step{t}/aggr/m2"), xavier(&mut rng, d, d));
        }

        let mut sizes = vec![2 * d];
        sizes.extend(PREDICT_HIDDEN);
        sizes.push(1);
        insert_mlp(&mut p, &mut rng, "predict", &sizes);
        p.insert("lib_types", emb(&mut rng, lib_types.len()));

        ParameterStore {
            config,
            vocab,
            lib_types,
            params: p,
        }
    }

    pub fn pid(&self, path: &str) -> Result<ParamId, GnnError> {
        self.params
            .id(path)
            .ok_or_else(|| GnnError::MissingParam(path.to_string()))
    }

    pub fn meta_json(&self) -> serde_json::Value {
        serde_json::to_value(StoreMeta {
            config: self.config,
            vocab: self.vocab.clone(),
            lib_types: self.lib_types.clone(),
        })
        .expect("meta serializes")
    }

    pub fn to_checkpoint(&self, seed: u64) -> crate::tensor::Checkpoint {
        crate::tensor::Checkpoint::from_params(&self.params, seed, self.meta_json())
    }

    pub fn from_checkpoint(
        ck: &crate::tensor::Checkpoint,
    ) -> Result<Self, crate::tensor::CheckpointError> {
        let meta: StoreMeta = serde_json::from_value(ck.meta.clone())?;
        let mut vocab = meta.vocab;
        vocab.rebuild_index();
        let store = ParameterStore {
            config: meta.config,
            vocab,
            lib_types: meta.lib_types,
            params: ck.to_params()?,
        };
        // Shapes must agree with a freshly built store of the same config.
        let fresh = ParameterStore::<F>::new(
            store.config,
            store.vocab.clone(),
            store.lib_types.clone(),
            0,
        );
        for (_, path, t) in fresh.params.iter() {
            match store.params.by_path(path) {
                Some(have) if have.shape() == t.shape() => {}
                _ => {
                    return Err(crate::tensor::CheckpointError::Param {
                        path: path.to_string(),
                        message: format!("missing or not of shape {:?}", t.shape()),
                    })
                }
            }
        }
        Ok(store)
    }

    pub fn cast<G: Real>(&self) -> ParameterStore<G> {
        ParameterStore {
            config: self.config,
            vocab: self.vocab.clone(),
            lib_types: self.lib_types.clone(),
            params: self.params.cast(),
        }
    }
}

fn uniform<F: Real>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<F> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| F::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

fn xavier<F: Real>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor<F> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_in, fan_out], bound)
}

fn insert_mlp<F: Real>(p: &mut Params<F>, rng: &mut ChaCha8Rng, prefix: &str, sizes: &[usize]) {
    for (i, w) in sizes.windows(2).enumerate() {
        p.insert(format!("{prefix}/l{}/w", i + 1), xavier(rng, w[0], w[1]));
        p.insert(format!("{prefix}/l{}/b", i + 1), Tensor::zeros(&[w[1]]));
    }
}
