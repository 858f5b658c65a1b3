//! Scoring type variables against library and project-defined types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::Span;
use crate::gnn::layers::mlp_from;
use crate::gnn::{run_gnn, GnnError, ParameterStore, LEAKY_SLOPE};
use crate::graph::{NodeId, NodeOrigin, TypeDependencyGraph};
use crate::tensor::{Real, Tape, Value};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("empty candidate set")]
    EmptyCandidateSet,
    #[error(transparent)]
    Gnn(#[from] GnnError),
}

impl From<crate::tensor::TensorError> for PredictError {
    fn from(e: crate::tensor::TensorError) -> Self {
        PredictError::Gnn(e.into())
    }
}

/// Library types first, then the project's classes. Candidate indices
/// follow this order and ties are broken towards the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub lib_types: Vec<String>,
    pub user_types: Vec<(String, NodeId)>,
}

impl CandidateSet {
    pub fn for_graph(lib_types: &[String], g: &TypeDependencyGraph) -> Self {
        CandidateSet {
            lib_types: lib_types.to_vec(),
            user_types: g
                .user_type_nodes
                .iter()
                .map(|(n, &id)| (n.clone(), id))
                .collect(),
        }
    }

    pub fn lib_only(lib_types: &[String]) -> Self {
        CandidateSet {
            lib_types: lib_types.to_vec(),
            user_types: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.lib_types.len() + self.user_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self, i: usize) -> &str {
        if i < self.lib_types.len() {
            &self.lib_types[i]
        } else {
            &self.user_types[i - self.lib_types.len()].0
        }
    }

    pub fn is_user(&self, i: usize) -> bool {
        i >= self.lib_types.len()
    }

    /// Index of a ground-truth type. A project class shadows a library type
    /// of the same name.
    pub fn index_of(&self, ty: &str) -> Option<usize> {
        if let Some(j) = self.user_types.iter().position(|(n, _)| n == ty) {
            return Some(self.lib_types.len() + j);
        }
        self.lib_types.iter().position(|n| n == ty)
    }
}

/// Compatibility score of one node row and one candidate row, both `[1, d]`.
pub fn score<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    v_n: Value,
    u_c: Value,
) -> Result<Value, PredictError> {
    let x = tape.concat_cols(&[v_n, u_c])?;
    Ok(mlp_from(tape, store, "predict", x, 1)?)
}

/// Candidate rows `[C, d]`: the library table followed by the embeddings
/// of the project's class nodes taken from `state`.
fn candidate_rows<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    state: Value,
    cands: &CandidateSet,
) -> Result<Value, PredictError> {
    let mut parts = Vec::new();
    if !cands.lib_types.is_empty() {
        let table = tape.param(&store.params, store.pid("lib_types")?);
        let rows: Vec<usize> = cands
            .lib_types
            .iter()
            .map(|n| {
                store
                    .lib_types
                    .iter()
                    .position(|m| m == n)
                    .expect("library type in store")
            })
            .collect();
        parts.push(tape.gather_rows(table, &rows)?);
    }
    if !cands.user_types.is_empty() {
        let ids: Vec<NodeId> = cands.user_types.iter().map(|(_, id)| *id).collect();
        parts.push(tape.gather_rows(state, &ids)?);
    }
    Ok(tape.concat_rows(&parts)?)
}

/// Scores `[nodes.len(), C]` for every node against every candidate. The
/// first layer of the scoring MLP is split into its node and candidate
/// halves so each half is applied once per row instead of once per pair.
pub fn score_matrix<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    state: Value,
    nodes: &[NodeId],
    cands: &CandidateSet,
) -> Result<Value, PredictError> {
    if cands.is_empty() {
        return Err(PredictError::EmptyCandidateSet);
    }
    let d = store.config.dim;
    let c = cands.len();
    let n = nodes.len();
    let u = candidate_rows(tape, store, state, cands)?;
    let v = tape.gather_rows(state, nodes)?;
    let w1 = tape.param(&store.params, store.pid("predict/l1/w")?);
    let b1 = tape.param(&store.params, store.pid("predict/l1/b")?);
    let w_node = tape.gather_rows(w1, &(0..d).collect::<Vec<_>>())?;
    let w_cand = tape.gather_rows(w1, &(d..2 * d).collect::<Vec<_>>())?;
    let a = tape.matmul(v, w_node)?;
    let b = tape.matmul(u, w_cand)?;
    let rep_n: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, c)).collect();
    let rep_c: Vec<usize> = (0..n).flat_map(|_| 0..c).collect();
    let a = tape.gather_rows(a, &rep_n)?;
    let b = tape.gather_rows(b, &rep_c)?;
    let h = tape.add(a, b)?;
    let h = tape.add_row(h, b1)?;
    let h = tape.leaky_relu(h, LEAKY_SLOPE);
    let s = mlp_from(tape, store, "predict", h, 2)?;
    Ok(tape.reshape(s, &[n, c])?)
}

/// Distribution over candidates for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePrediction {
    pub node_id: NodeId,
    pub variable_name: String,
    pub source_span: Option<Span>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Candidate indices by descending score, ties in candidate order.
    pub ranking: Vec<usize>,
}

impl NodePrediction {
    fn new(node_id: NodeId, g: &TypeDependencyGraph, logits: Vec<f64>) -> Self {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let probs = e.iter().map(|x| x / z).collect();
        let mut ranking: Vec<usize> = (0..logits.len()).collect();
        ranking.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]));
        let node = &g.nodes[node_id];
        NodePrediction {
            node_id,
            variable_name: node.name.clone(),
            source_span: node.span,
            logits,
            probs,
            ranking,
        }
    }

    pub fn top(&self, n: usize) -> &[usize] {
        &self.ranking[..n.min(self.ranking.len())]
    }

    /// `true` when `i` scores strictly above every other candidate.
    pub fn strictly_best(&self, i: usize) -> bool {
        self.logits
            .iter()
            .enumerate()
            .all(|(j, &x)| j == i || x < self.logits[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub candidates: CandidateSet,
    pub rows: Vec<NodePrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedType {
    #[serde(rename = "type")]
    pub ty: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionJson {
    pub node_id: NodeId,
    pub source_span: Option<Span>,
    pub variable_name: String,
    pub topk: Vec<RankedType>,
}

impl PredictionResult {
    pub fn get(&self, node: NodeId) -> Option<&NodePrediction> {
        self.rows.iter().find(|r| r.node_id == node)
    }

    pub fn to_json(&self, top_n: usize) -> Vec<PredictionJson> {
        self.rows
            .iter()
            .map(|r| PredictionJson {
                node_id: r.node_id,
                source_span: r.source_span,
                variable_name: r.variable_name.clone(),
                topk: r
                    .top(top_n)
                    .iter()
                    .map(|&i| RankedType {
                        ty: self.candidates.name(i).to_string(),
                        prob: r.probs[i],
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Variables a user would annotate: fields, parameters, return slots and
/// locals.
pub fn declared_nodes(g: &TypeDependencyGraph) -> Vec<NodeId> {
    g.nodes
        .iter()
        .filter(|n| {
            matches!(
                n.origin,
                NodeOrigin::Field | NodeOrigin::Param | NodeOrigin::Return | NodeOrigin::Local
            )
        })
        .map(|n| n.id)
        .collect()
}

/// Runs the network on `g` and ranks candidates for each of `nodes`.
pub fn predict<F: Real>(
    store: &ParameterStore<F>,
    g: &TypeDependencyGraph,
    nodes: &[NodeId],
    cands: &CandidateSet,
    run_seed: u64,
) -> Result<PredictionResult, PredictError> {
    if cands.is_empty() {
        return Err(PredictError::EmptyCandidateSet);
    }
    let mut tape = Tape::inference();
    let run = run_gnn(&mut tape, store, g, run_seed)?;
    let rows = if nodes.is_empty() {
        Vec::new()
    } else {
        let s = score_matrix(&mut tape, store, run.last(), nodes, cands)?;
        let t = tape.value(s);
        nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| NodePrediction::new(n, g, t.row(i).iter().map(|x| x.as_f64()).collect()))
            .collect()
    };
    Ok(PredictionResult {
        candidates: cands.clone(),
        rows,
    })
}

/// Builds a prediction row from externally computed scores, e.g. a baseline.
pub fn prediction_from_scores(
    g: &TypeDependencyGraph,
    node: NodeId,
    logits: Vec<f64>,
) -> NodePrediction {
    NodePrediction::new(node, g, logits)
}
