//! Single-edge message operators and the per-node aggregation.
//!
//! These work one edge at a time on `[1, d]` rows. The batched pass in
//! `run.rs` computes the same quantities for all edges of a kind at once.

use super::{GnnError, IdentTable, ParameterStore, LEAKY_SLOPE, MAX_POSITION};
use crate::graph::{EdgeCategory, EdgeLabel, Hyperedge, NodeId};
use crate::tensor::{Real, Tape, Tensor, Value};

/// A message row headed for `target`.
#[derive(Debug, Clone, Copy)]
pub struct Message {
    pub target: NodeId,
    pub value: Value,
}

/// Runs the MLP stored under `prefix/l1`, `prefix/l2`, ... on the rows of
/// `x`, with leaky ReLU between layers and a linear output.
pub(crate) fn mlp<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    prefix: &str,
    x: Value,
) -> Result<Value, GnnError> {
    mlp_from(tape, store, prefix, x, 1)
}

/// Like [`mlp`] but starting at layer `first`.
pub(crate) fn mlp_from<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    prefix: &str,
    x: Value,
    first: usize,
) -> Result<Value, GnnError> {
    let mut h = x;
    let mut i = first;
    while let Some(w) = store.params.id(&format!("{prefix}/l{i}/w")) {
        let b = store.pid(&format!("{prefix}/l{i}/b"))?;
        let w = tape.param(&store.params, w);
        let b = tape.param(&store.params, b);
        h = tape.matmul(h, w)?;
        h = tape.add_row(h, b)?;
        if store.params.id(&format!("{prefix}/l{}/w", i + 1)).is_some() {
            h = tape.leaky_relu(h, LEAKY_SLOPE);
        }
        i += 1;
    }
    if i == first {
        return Err(GnnError::MissingParam(format!("{prefix}/l{first}/w")));
    }
    Ok(h)
}

pub(crate) fn position_slot(p: usize) -> usize {
    p.min(MAX_POSITION)
}

fn row<F: Real>(tape: &mut Tape<F>, state: Value, n: NodeId) -> Result<Value, GnnError> {
    Ok(tape.gather_rows(state, &[n])?)
}

/// One message per argument of a `Fixed` edge, each from its own MLP over
/// the concatenated argument rows (plus the label embedding for `Access`
/// and `Name`).
pub fn msg_fixed<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    state: Value,
    edge: &Hyperedge,
    t: usize,
    idents: &IdentTable,
) -> Result<Vec<Message>, GnnError> {
    let kind = edge.kind;
    if kind.category() != EdgeCategory::Fixed || Some(edge.args.len()) != kind.fixed_arity() {
        return Err(GnnError::ArityMismatch {
            kind,
            got: edge.args.len(),
        });
    }
    let mut parts = Vec::new();
    for &a in &edge.args {
        parts.push(row(tape, state, a)?);
    }
    if kind.has_identifier_label() {
        let label = edge.ident_label().unwrap_or_default();
        parts.push(tape.gather_rows(idents.rows, &[idents.row(label)])?);
    }
    let input = tape.concat_cols(&parts)?;
    let mut out = Vec::new();
    for (j, &target) in edge.args.iter().enumerate() {
        let value = mlp(tape, store, &format!("step{t}/fixed/{kind}/arg{j}"), input)?;
        out.push(Message { target, value });
    }
    Ok(out)
}

/// Rows of the label vectors of an `NAry` edge, one per non-head argument.
pub(crate) fn label_rows<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    edge: &Hyperedge,
    idents: &IdentTable,
) -> Result<Vec<Value>, GnnError> {
    let positions = tape.param(&store.params, store.pid("ident/positions")?);
    let mut out = Vec::new();
    for l in &edge.labels {
        let v = match l {
            EdgeLabel::Position(p) => tape.gather_rows(positions, &[position_slot(*p)])?,
            EdgeLabel::Ident(s) => tape.gather_rows(idents.rows, &[idents.row(s)])?,
        };
        out.push(v);
    }
    Ok(out)
}

/// `k` messages to the head `α` and one message to each `β_j`.
pub fn msg_nary<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    state: Value,
    edge: &Hyperedge,
    t: usize,
    idents: &IdentTable,
) -> Result<Vec<Message>, GnnError> {
    let kind = edge.kind;
    if kind.category() != EdgeCategory::NAry
        || edge.args.is_empty()
        || edge.labels.len() + 1 != edge.args.len()
    {
        return Err(GnnError::ArityMismatch {
            kind,
            got: edge.args.len(),
        });
    }
    let alpha = edge.args[0];
    let va = row(tape, state, alpha)?;
    let labels = label_rows(tape, store, edge, idents)?;
    let mut out = Vec::new();
    for (l, &beta) in labels.into_iter().zip(&edge.args[1..]) {
        let vb = row(tape, state, beta)?;
        let xa = tape.concat_cols(&[l, vb])?;
        let value = mlp(tape, store, &format!("step{t}/nary/{kind}/alpha"), xa)?;
        out.push(Message {
            target: alpha,
            value,
        });
        let xb = tape.concat_cols(&[l, va])?;
        let value = mlp(tape, store, &format!("step{t}/nary/{kind}/beta"), xb)?;
        out.push(Message {
            target: beta,
            value,
        });
    }
    Ok(out)
}

/// Attention messages of a `Usage` edge: `β*` attends over the `α_j` with
/// query `α*` and reads the `β_j`; `α*` does the converse. With
/// `uniform` set the weights are a plain mean.
pub fn msg_npairs<F: Real>(
    tape: &mut Tape<F>,
    state: Value,
    edge: &Hyperedge,
    uniform: bool,
) -> Result<Vec<Message>, GnnError> {
    if edge.args.len() < 2 || !edge.args.len().is_multiple_of(2) {
        return Err(GnnError::ArityMismatch {
            kind: edge.kind,
            got: edge.args.len(),
        });
    }
    if edge.args.len() == 2 {
        return Err(GnnError::EmptyPairList);
    }
    let (alphas, betas): (Vec<NodeId>, Vec<NodeId>) = edge.usage_pairs().unzip();
    let k = alphas.len();
    let va = tape.gather_rows(state, &alphas)?;
    let vb = tape.gather_rows(state, &betas)?;
    let to_beta = attend(tape, state, edge.args[0], va, vb, k, uniform)?;
    let to_alpha = attend(tape, state, edge.args[1], vb, va, k, uniform)?;
    Ok(vec![
        Message {
            target: edge.args[1],
            value: to_beta,
        },
        Message {
            target: edge.args[0],
            value: to_alpha,
        },
    ])
}

fn attend<F: Real>(
    tape: &mut Tape<F>,
    state: Value,
    query: NodeId,
    keys: Value,
    values: Value,
    k: usize,
    uniform: bool,
) -> Result<Value, GnnError> {
    let w = if uniform {
        tape.constant(Tensor::filled(&[k, 1], F::from_f64(1.0 / k as f64)))
    } else {
        let q = tape.gather_rows(state, &vec![query; k])?;
        let a = tape.row_dot(keys, q)?;
        tape.segment_softmax(a, &vec![0; k], 1)?
    };
    let weighted = tape.mul_col(values, w)?;
    Ok(tape.scatter_add_rows(weighted, &vec![0; k], 1)?)
}

/// `v + Σ_e w_e M1 m_e` with `w` the softmax over incoming messages of
/// `LeakyReLU(v · M2 m_e)`, or the plain mean when `simple` is set.
pub fn aggregate<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    t: usize,
    v_prev: Value,
    messages: &[Value],
    simple: bool,
) -> Result<Value, GnnError> {
    if messages.is_empty() {
        return Ok(v_prev);
    }
    let n = messages.len();
    let m = tape.concat_rows(messages)?;
    let m1 = tape.param(&store.params, store.pid(&format!("step{t}/aggr/m1"))?);
    let p1 = tape.matmul(m, m1)?;
    let w = if simple {
        tape.constant(Tensor::filled(&[n, 1], F::from_f64(1.0 / n as f64)))
    } else {
        let m2 = tape.param(&store.params, store.pid(&format!("step{t}/aggr/m2"))?);
        let p2 = tape.matmul(m, m2)?;
        let v = tape.gather_rows(v_prev, &vec![0; n])?;
        let a = tape.row_dot(v, p2)?;
        let a = tape.leaky_relu(a, LEAKY_SLOPE);
        tape.segment_softmax(a, &vec![0; n], 1)?
    };
    let weighted = tape.mul_col(p1, w)?;
    let sum = tape.scatter_add_rows(weighted, &vec![0; n], 1)?;
    Ok(tape.add(v_prev, sum)?)
}
