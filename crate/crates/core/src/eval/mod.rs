//! Accuracy metrics, the name-similarity baseline, ablations and the
//! synthetic corpus generator.

mod generate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{
    generate_corpus, generate_project, GeneratedCorpus, SyntheticProject, SyntheticSpec,
};

use crate::gnn::{Ablation, ParameterStore};
use crate::graph::{tokenize_identifier, NodeId, TypeDependencyGraph};
use crate::predictor::{predict, CandidateSet, NodePrediction, PredictError, PredictionResult};
use crate::trainer::{train, Corpus, Project, TrainConfig, TrainError, EVAL_RUN_SEED};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for annotated node {0}")]
    MissingPrediction(NodeId),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Weighted hit counts for one slice of the annotations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub top1: f64,
    pub top5: f64,
    /// Top-1 hits where the truth scores strictly above every other
    /// candidate, so a lucky tie-break does not count.
    pub strict1: f64,
    pub total: f64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.top1 += o.top1;
        self.top5 += o.top5;
        self.strict1 += o.strict1;
        self.total += o.total;
    }

    fn ratio(x: f64, n: f64) -> f64 {
        if n == 0.0 {
            0.0
        } else {
            x / n
        }
    }

    pub fn acc1(&self) -> f64 {
        Self::ratio(self.top1, self.total)
    }

    pub fn acc5(&self) -> f64 {
        Self::ratio(self.top5, self.total)
    }

    pub fn strict_acc1(&self) -> f64 {
        Self::ratio(self.strict1, self.total)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelTally {
    pub user: Tally,
    pub lib: Tally,
}

impl LevelTally {
    pub fn overall(&self) -> Tally {
        let mut t = self.user;
        t.add(&self.lib);
        t
    }

    fn add(&mut self, o: &LevelTally) {
        self.user.add(&o.user);
        self.lib.add(&o.lib);
    }
}

/// Counts at declaration level (one per annotated variable) and occurrence
/// level (weighted by source occurrences).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub declaration: LevelTally,
    pub occurrence: LevelTally,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.declaration.add(&o.declaration);
        self.occurrence.add(&o.occurrence);
    }
}

/// Scores predictions against `truth`. A truth type that is not among the
/// candidates counts as a miss. Types in `user_types` go to the user split.
pub fn accuracy(
    preds: &PredictionResult,
    truth: &BTreeMap<NodeId, String>,
    user_types: &BTreeSet<String>,
    occurrences: &BTreeMap<NodeId, u32>,
) -> Result<Counts, EvalError> {
    let mut c = Counts::default();
    for (&node, ty) in truth {
        let row = preds.get(node).ok_or(EvalError::MissingPrediction(node))?;
        let idx = preds.candidates.index_of(ty);
        let hit = |n: usize| idx.is_some_and(|i| row.top(n).contains(&i));
        let t = Tally {
            top1: hit(1) as u8 as f64,
            top5: hit(5) as u8 as f64,
            strict1: idx.is_some_and(|i| row.strictly_best(i)) as u8 as f64,
            total: 1.0,
        };
        let w = occurrences.get(&node).copied().unwrap_or(1) as f64;
        let tw = Tally {
            top1: t.top1 * w,
            top5: t.top5 * w,
            strict1: t.strict1 * w,
            total: w,
        };
        let user = user_types.contains(ty);
        for (level, t) in [(&mut c.declaration, t), (&mut c.occurrence, tw)] {
            if user {
                level.user.add(&t);
            } else {
                level.lib.add(&t);
            }
        }
    }
    Ok(c)
}

pub fn graph_counts(
    preds: &PredictionResult,
    g: &TypeDependencyGraph,
) -> Result<Counts, EvalError> {
    let users: BTreeSet<String> = g.user_type_nodes.keys().cloned().collect();
    accuracy(preds, &g.annotations, &users, &g.occurrences)
}

/// Most frequent annotation type over `projects`; the baseline's fallback.
pub fn most_frequent_type(projects: &[Project]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in projects {
        for ty in p.graph.annotations.values() {
            *counts.entry(ty).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(t, _)| t.to_string())
}

/// Ranks candidates by the number of name tokens they share with the
/// variable, ties in type-name order. When nothing overlaps the fallback
/// type is ranked first.
pub fn similar_name_baseline(
    g: &TypeDependencyGraph,
    nodes: &[NodeId],
    cands: &CandidateSet,
    fallback: Option<&str>,
) -> PredictionResult {
    let type_tokens: Vec<BTreeSet<String>> = (0..cands.len())
        .map(|i| tokenize_identifier(cands.name(i)).into_iter().collect())
        .collect();
    let fallback_idx = fallback.and_then(|f| cands.index_of(f));
    let rows = nodes
        .iter()
        .map(|&n| {
            let node = &g.nodes[n];
            let vt: BTreeSet<&str> = node.name_tokens.iter().map(String::as_str).collect();
            let overlap: Vec<usize> = type_tokens
                .iter()
                .map(|tt| tt.iter().filter(|t| vt.contains(t.as_str())).count())
                .collect();
            let mut ranking: Vec<usize> = (0..cands.len()).collect();
            ranking.sort_by(|&a, &b| {
                overlap[b]
                    .cmp(&overlap[a])
                    .then(cands.name(a).cmp(cands.name(b)))
            });
            if overlap.iter().all(|&o| o == 0) {
                if let Some(f) = fallback_idx {
                    ranking.retain(|&i| i != f);
                    ranking.insert(0, f);
                }
            }
            let mut logits = vec![0.0; cands.len()];
            for (r, &i) in ranking.iter().enumerate() {
                logits[i] = -(r as f64);
            }
            let z: f64 = logits.iter().map(|x: &f64| x.exp()).sum();
            NodePrediction {
                node_id: n,
                variable_name: node.name.clone(),
                source_span: node.span,
                probs: logits.iter().map(|x| x.exp() / z).collect(),
                logits,
                ranking,
            }
        })
        .collect();
    PredictionResult {
        candidates: cands.clone(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectReport {
    pub project: String,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub counts: Counts,
    pub per_project: Vec<ProjectReport>,
}

#[derive(Serialize)]
struct SliceJson {
    top1: f64,
    top5: f64,
    count: f64,
}

impl From<Tally> for SliceJson {
    fn from(t: Tally) -> Self {
        SliceJson {
            top1: t.acc1(),
            top5: t.acc5(),
            count: t.total,
        }
    }
}

impl EvalReport {
    fn from_projects(name: &str, per_project: Vec<ProjectReport>) -> Self {
        let mut counts = Counts::default();
        for p in &per_project {
            counts.add(&p.counts);
        }
        EvalReport {
            name: name.to_string(),
            counts,
            per_project,
        }
    }

    pub fn overall(&self) -> Tally {
        self.counts.declaration.overall()
    }

    pub fn user(&self) -> Tally {
        self.counts.declaration.user
    }

    pub fn lib(&self) -> Tally {
        self.counts.declaration.lib
    }

    pub fn to_json(&self) -> serde_json::Value {
        let level = |l: &LevelTally| {
            serde_json::json!({
                "user": SliceJson::from(l.user),
                "lib": SliceJson::from(l.lib),
                "overall": SliceJson::from(l.overall()),
            })
        };
        serde_json::json!({
            "name": self.name,
            "declaration": level(&self.counts.declaration),
            "occurrence": level(&self.counts.occurrence),
            "per_project": self.per_project.iter().map(|p| serde_json::json!({
                "project": p.project,
                "declaration": level(&p.counts.declaration),
                "occurrence": level(&p.counts.occurrence),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Accuracy table, one row per report, in percent.
pub fn format_table(reports: &[EvalReport]) -> String {
    let w = reports
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(4)
        .max(6);
    let mut s = String::new();
    for (level, pick) in [
        (
            "declaration",
            (|c: &Counts| c.declaration) as fn(&Counts) -> LevelTally,
        ),
        ("occurrence", |c: &Counts| c.occurrence),
    ] {
        let _ = writeln!(
            s,
            "{:<w$}  {:>13}  {:>13}  {:>13}   ({level})",
            "model", "user t1/t5", "lib t1/t5", "overall t1/t5"
        );
        for r in reports {
            let l = pick(&r.counts);
            let cell = |t: Tally| format!("{:5.1} / {:5.1}", 100.0 * t.acc1(), 100.0 * t.acc5());
            let _ = writeln!(
                s,
                "{:<w$}  {}  {}  {}",
                r.name,
                cell(l.user),
                cell(l.lib),
                cell(l.overall())
            );
        }
        s.push('\n');
    }
    s
}

/// Model predictions for the annotated nodes of every project.
pub fn evaluate_model(
    name: &str,
    store: &ParameterStore<f32>,
    projects: &[Project],
    lib_only: bool,
) -> Result<EvalReport, EvalError> {
    let mut per = Vec::new();
    for p in projects {
        let cands = if lib_only {
            CandidateSet::lib_only(&store.lib_types)
        } else {
            CandidateSet::for_graph(&store.lib_types, &p.graph)
        };
        let nodes: Vec<NodeId> = p.graph.annotations.keys().copied().collect();
        let preds = predict(store, &p.graph, &nodes, &cands, EVAL_RUN_SEED)?;
        per.push(ProjectReport {
            project: p.name.clone(),
            counts: graph_counts(&preds, &p.graph)?,
        });
    }
    Ok(EvalReport::from_projects(name, per))
}

pub fn evaluate_baseline(
    projects: &[Project],
    lib_types: &[String],
    fallback: Option<&str>,
) -> Result<EvalReport, EvalError> {
    let mut per = Vec::new();
    for p in projects {
        let cands = CandidateSet::for_graph(lib_types, &p.graph);
        let nodes: Vec<NodeId> = p.graph.annotations.keys().copied().collect();
        let preds = similar_name_baseline(&p.graph, &nodes, &cands, fallback);
        per.push(ProjectReport {
            project: p.name.clone(),
            counts: graph_counts(&preds, &p.graph)?,
        });
    }
    Ok(EvalReport::from_projects("SimilarName", per))
}

/// One configuration change relative to the base run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationVariant {
    Full,
    K(usize),
    Toggle(Ablation),
}

impl AblationVariant {
    pub fn parse(s: &str) -> Option<Self> {
        if let Some(k) = s.strip_prefix("k=").or_else(|| s.strip_prefix("k")) {
            return k.parse().ok().map(AblationVariant::K);
        }
        match Ablation::parse(s)? {
            a if a == Ablation::default() => Some(AblationVariant::Full),
            a => Some(AblationVariant::Toggle(a)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AblationVariant::Full => "full".into(),
            AblationVariant::K(k) => format!("K={k}"),
            AblationVariant::Toggle(a) => a.name(),
        }
    }

    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::K(k) => c.model.k = *k,
            AblationVariant::Toggle(a) => c.model.ablation = *a,
        }
        c
    }
}

pub struct AblationRun {
    pub variant: AblationVariant,
    pub store: ParameterStore<f32>,
    pub report: EvalReport,
}

/// Trains `variant` of `base` on the corpus and evaluates on the test split.
pub fn run_ablation(
    corpus: &Corpus,
    base: &TrainConfig,
    variant: AblationVariant,
) -> Result<AblationRun, EvalError> {
    let config = variant.apply(base);
    let out = train(corpus, &config)?;
    let report = evaluate_model(&variant.name(), &out.store, &corpus.test, false)?;
    Ok(AblationRun {
        variant,
        store: out.store,
        report,
    })
}
