use std::fmt::Write as _;

use super::layers::{mlp, position_slot};
use super::{
    aggregate, msg_fixed, msg_nary, msg_npairs, GnnError, IdentTable, ParameterStore, LEAKY_SLOPE,
    MAX_POSITION,
};
use crate::graph::{
    constant_kind_index, EdgeCategory, EdgeKind, EdgeLabel, Hyperedge, NodeId, TypeDependencyGraph,
};
use crate::tensor::{Real, Tape, Tensor, Value};

/// Node embeddings after `step` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState<F: Real = f32> {
    pub step: usize,
    pub matrix: Tensor<F>,
}

/// Tape handles of the `[num_nodes, d]` state after each round, `states[0]`
/// being the initial one.
#[derive(Debug, Clone)]
pub struct GnnRun {
    pub states: Vec<Value>,
}

impl GnnRun {
    pub fn last(&self) -> Value {
        *self.states.last().expect("at least the initial state")
    }
}

/// Constant nodes start at their kind's vector, every variable node at the
/// shared generic vector.
pub fn init_embeddings<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    g: &TypeDependencyGraph,
) -> Result<Value, GnnError> {
    let generic = tape.param(&store.params, store.pid("init/generic")?);
    let consts = tape.param(&store.params, store.pid("init/const")?);
    let table = tape.concat_rows(&[generic, consts])?;
    let mut idx = Vec::with_capacity(g.nodes.len());
    for n in &g.nodes {
        idx.push(match n.constant_type() {
            None => 0,
            Some(k) => {
                1 + constant_kind_index(k)
                    .ok_or_else(|| GnnError::UnknownConstantKind(k.to_string()))?
            }
        });
    }
    if idx.is_empty() {
        return Ok(tape.constant(Tensor::zeros(&[0, store.config.dim])));
    }
    Ok(tape.gather_rows(table, &idx)?)
}

fn active_edges<'g, F: Real>(
    store: &ParameterStore<F>,
    g: &'g TypeDependencyGraph,
) -> Vec<&'g Hyperedge> {
    g.edges
        .iter()
        .filter(|e| store.config.ablation.keeps(e.kind))
        .collect()
}

fn ident_labels<'a, 'g: 'a>(edges: &'a [&'g Hyperedge]) -> impl Iterator<Item = &'g str> + 'a {
    edges.iter().flat_map(|e| {
        e.labels.iter().filter_map(|l| match l {
            EdgeLabel::Ident(s) => Some(s.as_str()),
            EdgeLabel::Position(_) => None,
        })
    })
}

/// Collects message rows and their targets, dropping rows aimed at constant
/// nodes so those stay pinned.
struct Inbox<'g> {
    g: &'g TypeDependencyGraph,
    rows: Vec<Value>,
    targets: Vec<NodeId>,
}

impl Inbox<'_> {
    fn push<F: Real>(
        &mut self,
        tape: &mut Tape<F>,
        value: Value,
        targets: &[NodeId],
    ) -> Result<(), GnnError> {
        let keep: Vec<usize> = (0..targets.len())
            .filter(|&i| !self.g.nodes[targets[i]].is_constant())
            .collect();
        if keep.is_empty() {
            return Ok(());
        }
        let value = if keep.len() == targets.len() {
            value
        } else {
            tape.gather_rows(value, &keep)?
        };
        self.rows.push(value);
        self.targets.extend(keep.iter().map(|&i| targets[i]));
        Ok(())
    }
}

/// `K` rounds of message passing, all edges of a kind batched together.
pub fn run_gnn<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    g: &TypeDependencyGraph,
    run_seed: u64,
) -> Result<GnnRun, GnnError> {
    let n = g.nodes.len();
    let ablation = store.config.ablation;
    let edges = active_edges(store, g);
    let mut state = init_embeddings(tape, store, g)?;
    let mut states = vec![state];
    if store.config.k == 0 || edges.is_empty() {
        states.resize(store.config.k + 1, state);
        return Ok(GnnRun { states });
    }

    let idents = IdentTable::build(tape, store, ident_labels(&edges), run_seed)?;
    let positions = tape.param(&store.params, store.pid("ident/positions")?);
    let labels = tape.concat_rows(&[positions, idents.rows])?;
    let label_row = |l: &EdgeLabel| match l {
        EdgeLabel::Position(p) => position_slot(*p),
        EdgeLabel::Ident(s) => MAX_POSITION + 1 + idents.row(s),
    };

    let by_kind: Vec<(EdgeKind, Vec<&Hyperedge>)> = EdgeKind::ALL
        .iter()
        .map(|&k| {
            (
                k,
                edges
                    .iter()
                    .copied()
                    .filter(|e| e.kind == k)
                    .collect::<Vec<_>>(),
            )
        })
        .filter(|(_, es)| !es.is_empty())
        .collect();
    for (kind, es) in &by_kind {
        for e in es {
            let ok = match kind.category() {
                EdgeCategory::Fixed => Some(e.args.len()) == kind.fixed_arity(),
                EdgeCategory::NAry => !e.args.is_empty() && e.labels.len() + 1 == e.args.len(),
                EdgeCategory::NPairs => e.args.len() >= 2 && e.args.len() % 2 == 0,
            };
            if !ok {
                return Err(GnnError::ArityMismatch {
                    kind: *kind,
                    got: e.args.len(),
                });
            }
            if kind.category() == EdgeCategory::NPairs && e.args.len() == 2 {
                return Err(GnnError::EmptyPairList);
            }
        }
    }

    for t in 1..=store.config.k {
        let mut inbox = Inbox {
            g,
            rows: Vec::new(),
            targets: Vec::new(),
        };
        for (kind, es) in &by_kind {
            match kind.category() {
                EdgeCategory::Fixed => {
                    let arity = kind.fixed_arity().expect("fixed kind");
                    let slots: Vec<Vec<NodeId>> = (0..arity)
                        .map(|j| es.iter().map(|e| e.args[j]).collect())
                        .collect();
                    let mut parts = Vec::new();
                    for s in &slots {
                        parts.push(tape.gather_rows(state, s)?);
                    }
                    if kind.has_identifier_label() {
                        let rows: Vec<usize> = es
                            .iter()
                            .map(|e| idents.row(e.ident_label().unwrap_or_default()))
                            .collect();
                        parts.push(tape.gather_rows(idents.rows, &rows)?);
                    }
                    let input = tape.concat_cols(&parts)?;
                    for (j, s) in slots.iter().enumerate() {
                        let m = mlp(tape, store, &format!("step{t}/fixed/{kind}/arg{j}"), input)?;
                        inbox.push(tape, m, s)?;
                    }
                }
                EdgeCategory::NAry => {
                    let mut alphas = Vec::new();
                    let mut betas = Vec::new();
                    let mut lrows = Vec::new();
                    for e in es {
                        for (l, &b) in e.labels.iter().zip(&e.args[1..]) {
                            alphas.push(e.args[0]);
                            betas.push(b);
                            lrows.push(label_row(l));
                        }
                    }
                    if alphas.is_empty() {
                        continue;
                    }
                    let l = tape.gather_rows(labels, &lrows)?;
                    let vb = tape.gather_rows(state, &betas)?;
                    let va = tape.gather_rows(state, &alphas)?;
                    let xa = tape.concat_cols(&[l, vb])?;
                    let ma = mlp(tape, store, &format!("step{t}/nary/{kind}/alpha"), xa)?;
                    inbox.push(tape, ma, &alphas)?;
                    let xb = tape.concat_cols(&[l, va])?;
                    let mb = mlp(tape, store, &format!("step{t}/nary/{kind}/beta"), xb)?;
                    inbox.push(tape, mb, &betas)?;
                }
                EdgeCategory::NPairs => {
                    let mut alphas = Vec::new();
                    let mut betas = Vec::new();
                    let mut seg = Vec::new();
                    let mut counts = Vec::new();
                    for (i, e) in es.iter().enumerate() {
                        let before = alphas.len();
                        for (a, b) in e.usage_pairs() {
                            alphas.push(a);
                            betas.push(b);
                            seg.push(i);
                        }
                        counts.push(alphas.len() - before);
                    }
                    let heads_a: Vec<NodeId> = es.iter().map(|e| e.args[0]).collect();
                    let heads_b: Vec<NodeId> = es.iter().map(|e| e.args[1]).collect();
                    let va = tape.gather_rows(state, &alphas)?;
                    let vb = tape.gather_rows(state, &betas)?;
                    let uniform = if ablation.no_npair_attention {
                        let w = seg
                            .iter()
                            .map(|&s| F::from_f64(1.0 / counts[s] as f64))
                            .collect();
                        Some(tape.constant(Tensor::matrix(seg.len(), 1, w)?))
                    } else {
                        None
                    };
                    for (query, keys, values, targets) in
                        [(&heads_a, va, vb, &heads_b), (&heads_b, vb, va, &heads_a)]
                    {
                        let w = match uniform {
                            Some(w) => w,
                            None => {
                                let qi: Vec<NodeId> = seg.iter().map(|&s| query[s]).collect();
                                let q = tape.gather_rows(state, &qi)?;
                                let a = tape.row_dot(keys, q)?;
                                tape.segment_softmax(a, &seg, es.len())?
                            }
                        };
                        let weighted = tape.mul_col(values, w)?;
                        let m = tape.scatter_add_rows(weighted, &seg, es.len())?;
                        inbox.push(tape, m, targets)?;
                    }
                }
            }
        }

        if !inbox.rows.is_empty() {
            let m = tape.concat_rows(&inbox.rows)?;
            let targets = inbox.targets;
            let m1 = tape.param(&store.params, store.pid(&format!("step{t}/aggr/m1"))?);
            let p1 = tape.matmul(m, m1)?;
            let w = if ablation.simple_aggregation {
                let mut counts = vec![0usize; n];
                for &x in &targets {
                    counts[x] += 1;
                }
                let w = targets
                    .iter()
                    .map(|&x| F::from_f64(1.0 / counts[x] as f64))
                    .collect();
                tape.constant(Tensor::matrix(targets.len(), 1, w)?)
            } else {
                let m2 = tape.param(&store.params, store.pid(&format!("step{t}/aggr/m2"))?);
                let p2 = tape.matmul(m, m2)?;
                let vt = tape.gather_rows(state, &targets)?;
                let a = tape.row_dot(vt, p2)?;
                let a = tape.leaky_relu(a, LEAKY_SLOPE);
                tape.segment_softmax(a, &targets, n)?
            };
            let weighted = tape.mul_col(p1, w)?;
            let sum = tape.scatter_add_rows(weighted, &targets, n)?;
            state = tape.add(state, sum)?;
        }
        states.push(state);
    }
    Ok(GnnRun { states })
}

/// The same computation as [`run_gnn`], one edge and one node at a time
/// through the single-edge operators. Slow; used as a test oracle.
pub fn run_gnn_reference<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    g: &TypeDependencyGraph,
    run_seed: u64,
) -> Result<GnnRun, GnnError> {
    let ablation = store.config.ablation;
    let edges = active_edges(store, g);
    let mut state = init_embeddings(tape, store, g)?;
    let mut states = vec![state];
    let idents = IdentTable::build(tape, store, ident_labels(&edges), run_seed)?;
    for t in 1..=store.config.k {
        let mut inbox: Vec<Vec<Value>> = vec![Vec::new(); g.nodes.len()];
        for e in &edges {
            let msgs = match e.category() {
                EdgeCategory::Fixed => msg_fixed(tape, store, state, e, t, &idents)?,
                EdgeCategory::NAry => msg_nary(tape, store, state, e, t, &idents)?,
                EdgeCategory::NPairs => msg_npairs(tape, state, e, ablation.no_npair_attention)?,
            };
            for m in msgs {
                if !g.nodes[m.target].is_constant() {
                    inbox[m.target].push(m.value);
                }
            }
        }
        let mut rows = Vec::with_capacity(g.nodes.len());
        for (i, msgs) in inbox.iter().enumerate() {
            let v = tape.gather_rows(state, &[i])?;
            rows.push(aggregate(
                tape,
                store,
                t,
                v,
                msgs,
                ablation.simple_aggregation,
            )?);
        }
        if !rows.is_empty() {
            state = tape.concat_rows(&rows)?;
        }
        states.push(state);
    }
    Ok(GnnRun { states })
}

/// Runs the network without recording gradients and returns every state.
pub fn embed_graph<F: Real>(
    store: &ParameterStore<F>,
    g: &TypeDependencyGraph,
    run_seed: u64,
) -> Result<Vec<EmbeddingState<F>>, GnnError> {
    let mut tape = Tape::inference();
    let run = run_gnn(&mut tape, store, g, run_seed)?;
    Ok(run
        .states
        .iter()
        .enumerate()
        .map(|(step, v)| EmbeddingState {
            step,
            matrix: tape.value(*v).clone(),
        })
        .collect())
}

/// Debug dump: one `node_id,step,x0..x{d-1}` line per node and step.
pub fn states_to_csv<F: Real>(states: &[EmbeddingState<F>]) -> String {
    let mut out = String::new();
    let d = states.first().map_or(0, |s| s.matrix.cols());
    out.push_str("node_id,step");
    for i in 0..d {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for s in states {
        for r in 0..s.matrix.rows() {
            let _ = write!(out, "{r},{}", s.step);
            for x in s.matrix.row(r) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
    }
    out
}
