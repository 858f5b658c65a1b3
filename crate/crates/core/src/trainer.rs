//! Per-project minibatch training.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnn::{run_gnn, GnnError, ModelConfig, ParameterStore, Vocab};
use crate::graph::{NodeId, TypeDependencyGraph};
use crate::predictor::{score_matrix, CandidateSet, PredictError};
use crate::tensor::{AdamConfig, AdamState, Real, Tape, Value, WeightDecay};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("project `{0}` has no annotation with a candidate type")]
    NoAnnotations(String),
    #[error("training split is empty")]
    EmptyCorpus,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

impl From<GnnError> for TrainError {
    fn from(e: GnnError) -> Self {
        TrainError::Predict(e.into())
    }
}

impl From<crate::tensor::TensorError> for TrainError {
    fn from(e: crate::tensor::TensorError) -> Self {
        TrainError::Predict(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lr_decay_until_epoch: usize,
    pub weight_decay: f64,
    pub decay_mode: WeightDecay,
    pub max_epochs: usize,
    /// First epoch to run; nonzero when resuming from a checkpoint so the
    /// schedule and shuffles continue where they left off.
    #[serde(default)]
    pub start_epoch: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Annotations per minibatch; `None` uses the median over training
    /// projects.
    pub batch_cap: Option<usize>,
    pub lib_top_n: usize,
    pub seed: u64,
    /// Zero the wall-clock column so logs are byte-identical across runs.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            lr_start: 1e-3,
            lr_end: 1e-4,
            lr_decay_until_epoch: 30,
            weight_decay: 1e-4,
            decay_mode: WeightDecay::Coupled,
            max_epochs: 100,
            start_epoch: 0,
            patience: 5,
            batch_cap: None,
            lib_top_n: 100,
            seed: 0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.model.dim == 0 || self.model.hidden == 0 {
            return bad("dimensions must be positive");
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.lr_end > self.lr_start {
            return bad("lr_end must not exceed lr_start");
        }
        if self.weight_decay < 0.0 {
            return bad("weight decay must be non-negative");
        }
        if self.max_epochs <= self.start_epoch {
            return bad("max_epochs must exceed start_epoch");
        }
        if self.batch_cap == Some(0) {
            return bad("batch cap must be positive");
        }
        Ok(())
    }

    /// Linear interpolation from `lr_start` at epoch 0 to `lr_end` at
    /// `lr_decay_until_epoch`, constant afterwards.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.lr_decay_until_epoch == 0 || epoch >= self.lr_decay_until_epoch {
            return self.lr_end;
        }
        let f = epoch as f64 / self.lr_decay_until_epoch as f64;
        self.lr_start + (self.lr_end - self.lr_start) * f
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            weight_decay: self.weight_decay,
            decay_mode: self.decay_mode,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub name: String,
    pub graph: TypeDependencyGraph,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub train: Vec<Project>,
    pub val: Vec<Project>,
    pub test: Vec<Project>,
}

/// The `n` most frequent annotation types in `projects` that are not
/// declared by the annotating project; ties in name order.
pub fn library_types(projects: &[Project], n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in projects {
        for ty in p.graph.annotations.values() {
            if !p.graph.user_type_nodes.contains_key(ty) {
                *counts.entry(ty).or_default() += 1;
            }
        }
    }
    let mut v: Vec<(&str, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(n).map(|(t, _)| t.to_string()).collect()
}

/// Annotated nodes whose type is a candidate, with the candidate index.
pub fn targets(g: &TypeDependencyGraph, cands: &CandidateSet) -> Vec<(NodeId, usize)> {
    g.annotations
        .iter()
        .filter_map(|(&n, ty)| cands.index_of(ty).map(|i| (n, i)))
        .collect()
}

/// Median of the per-project target counts (lower median for even counts).
pub fn median_batch(projects: &[Project], lib_types: &[String]) -> usize {
    let mut counts: Vec<usize> = projects
        .iter()
        .map(|p| targets(&p.graph, &CandidateSet::for_graph(lib_types, &p.graph)).len())
        .filter(|&c| c > 0)
        .collect();
    if counts.is_empty() {
        return 1;
    }
    counts.sort_unstable();
    counts[(counts.len() - 1) / 2]
}

/// Uniform sample of `cap` targets without replacement, in node order.
pub fn downsample(
    mut t: Vec<(NodeId, usize)>,
    cap: Option<usize>,
    run_seed: u64,
) -> Vec<(NodeId, usize)> {
    match cap {
        Some(cap) if t.len() > cap => {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed ^ 0x5eed_d0e5);
            let mut keep = rand::seq::index::sample(&mut rng, t.len(), cap).into_vec();
            keep.sort_unstable();
            let picked = keep.iter().map(|&i| t[i]).collect();
            t.clear();
            picked
        }
        _ => t,
    }
}

pub struct ProjectLoss {
    pub loss: Value,
    /// Number of annotations contributing to the loss.
    pub terms: usize,
}

/// Mean negative log-probability of the ground-truth types of `g`, over at
/// most `cap` annotations.
pub fn project_loss<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    g: &TypeDependencyGraph,
    cap: Option<usize>,
    run_seed: u64,
) -> Result<ProjectLoss, TrainError> {
    let cands = CandidateSet::for_graph(&store.lib_types, g);
    let t = downsample(targets(g, &cands), cap, run_seed);
    if t.is_empty() {
        return Err(TrainError::NoAnnotations(String::new()));
    }
    let run = run_gnn(tape, store, g, run_seed)?;
    let nodes: Vec<NodeId> = t.iter().map(|x| x.0).collect();
    let labels: Vec<usize> = t.iter().map(|x| x.1).collect();
    let s = score_matrix(tape, store, run.last(), &nodes, &cands)?;
    let loss = tape.cross_entropy(s, &labels)?;
    Ok(ProjectLoss {
        loss,
        terms: t.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top1: f64,
    pub lr: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_top1,lr,wall_time\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6e},{:.3}\n",
                r.epoch, r.train_loss, r.val_loss, r.val_top1, r.lr, r.wall_time
            ));
        }
        s
    }
}

/// Seed of the forward pass for one project in one epoch. Identifier
/// buckets and downsampling both derive from it.
pub fn run_seed(seed: u64, epoch: usize, project: usize) -> u64 {
    let mut x = seed ^ ((epoch as u64) << 32) ^ project as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Fixed seed for evaluation passes.
pub const EVAL_RUN_SEED: u64 = 0x00e7_a100;

pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub store: ParameterStore<f32>,
    pub log: TrainLog,
    pub best_epoch: usize,
    pub batch_cap: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitMetrics {
    pub loss: f64,
    pub top1: f64,
}

/// Mean loss and top-1 over every usable annotation of `projects`.
pub fn evaluate_split(
    store: &ParameterStore<f32>,
    projects: &[Project],
) -> Result<SplitMetrics, TrainError> {
    let mut loss = 0.0;
    let mut hits = 0usize;
    let mut total = 0usize;
    for p in projects {
        let cands = CandidateSet::for_graph(&store.lib_types, &p.graph);
        let t = targets(&p.graph, &cands);
        if t.is_empty() {
            continue;
        }
        let mut tape = Tape::inference();
        let run = run_gnn(&mut tape, store, &p.graph, EVAL_RUN_SEED)?;
        let nodes: Vec<NodeId> = t.iter().map(|x| x.0).collect();
        let labels: Vec<usize> = t.iter().map(|x| x.1).collect();
        let s = score_matrix(&mut tape, store, run.last(), &nodes, &cands)?;
        let l = tape.cross_entropy(s, &labels)?;
        loss += tape.value(l).item().as_f64() * t.len() as f64;
        let scores = tape.value(s);
        for (i, &y) in labels.iter().enumerate() {
            let row = scores.row(i);
            // First maximum in candidate order wins ties.
            let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
            hits += (best == y) as usize;
        }
        total += t.len();
    }
    let n = total.max(1) as f64;
    Ok(SplitMetrics {
        loss: loss / n,
        top1: hits as f64 / n,
    })
}

/// Builds a fresh store for `corpus` with vocabulary and library types
/// taken from the training split.
pub fn init_store(corpus: &Corpus, config: &TrainConfig) -> ParameterStore<f32> {
    let vocab = Vocab::from_graphs(corpus.train.iter().map(|p| &p.graph));
    let lib = library_types(&corpus.train, config.lib_top_n);
    ParameterStore::new(config.model, vocab, lib, config.seed)
}

pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_from(corpus, config, init_store(corpus, config), |_| {})
}

/// Trains starting from `store`, calling `on_epoch` after each epoch.
pub fn train_from(
    corpus: &Corpus,
    config: &TrainConfig,
    mut store: ParameterStore<f32>,
    mut on_epoch: impl FnMut(&LogRow),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if corpus.train.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let batch_cap = config
        .batch_cap
        .unwrap_or_else(|| median_batch(&corpus.train, &store.lib_types));
    let usable: Vec<usize> = (0..corpus.train.len())
        .filter(|&i| {
            let g = &corpus.train[i].graph;
            !targets(g, &CandidateSet::for_graph(&store.lib_types, g)).is_empty()
        })
        .collect();
    if usable.is_empty() {
        return Err(TrainError::NoAnnotations(corpus.train[0].name.clone()));
    }

    let mut adam = AdamState::new(config.adam());
    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, ParameterStore<f32>)> = None;
    let mut since_best = 0;
    let start = Instant::now();

    for epoch in config.start_epoch..config.max_epochs {
        let lr = config.lr_at(epoch);
        let mut order = usable.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);

        let mut train_loss = 0.0;
        for &i in &order {
            let p = &corpus.train[i];
            let mut tape = Tape::new();
            let pl = project_loss(
                &mut tape,
                &store,
                &p.graph,
                Some(batch_cap),
                run_seed(config.seed, epoch, i),
            )
            .map_err(|e| match e {
                TrainError::NoAnnotations(_) => TrainError::NoAnnotations(p.name.clone()),
                e => e,
            })?;
            train_loss += tape.value(pl.loss).item() as f64;
            let grads = tape.backward(pl.loss)?;
            adam.step(&mut store.params, &grads, lr);
        }
        train_loss /= order.len() as f64;

        let (val_loss, val_top1) = if corpus.val.is_empty() {
            (train_loss, f64::NAN)
        } else {
            let m = evaluate_split(&store, &corpus.val)?;
            (m.loss, m.top1)
        };
        let wall_time = if config.deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        };
        let row = LogRow {
            epoch,
            train_loss,
            val_loss,
            val_top1,
            lr,
            wall_time,
        };
        log::info!(
            "epoch {epoch} train_loss {train_loss:.4} val_loss {val_loss:.4} val_top1 {val_top1:.4} lr {lr:.2e}"
        );
        on_epoch(&row);
        log.rows.push(row);

        let improved = best.as_ref().is_none_or(|(l, _, _)| val_loss < *l);
        if improved {
            best = Some((val_loss, epoch, store.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if !corpus.val.is_empty() && since_best >= config.patience {
                break;
            }
        }
    }

    let (best_epoch, store) = if corpus.val.is_empty() {
        (log.rows.last().expect("at least one epoch").epoch, store)
    } else {
        let (_, e, s) = best.expect("at least one epoch");
        (e, s)
    };
    Ok(TrainOutcome {
        store,
        log,
        best_epoch,
        batch_cap,
    })
}
