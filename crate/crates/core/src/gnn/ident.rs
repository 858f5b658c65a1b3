use std::collections::HashMap;

use super::{GnnError, ParameterStore, UNKNOWN_BUCKETS};
use crate::graph::tokenize_identifier;
use crate::tensor::{Real, Tape, Tensor, Value};

/// `<Unknown-i>` slot for an out-of-vocabulary token. The assignment is a
/// hash of the run seed and the token, so it is stable within one run and
/// reshuffled across runs.
pub fn unknown_bucket(run_seed: u64, token: &str) -> usize {
    // FNV-1a over the seed bytes followed by the token bytes.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in run_seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // Final avalanche so nearby seeds spread over all buckets.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    (h % UNKNOWN_BUCKETS as u64) as usize
}

/// Embeddings of identifier labels for one forward pass: each distinct label
/// is the mean of its token rows.
pub struct IdentTable {
    pub rows: Value,
    index: HashMap<String, usize>,
}

impl IdentTable {
    pub fn build<'a, F: Real>(
        tape: &mut Tape<F>,
        store: &ParameterStore<F>,
        labels: impl IntoIterator<Item = &'a str>,
        run_seed: u64,
    ) -> Result<Self, GnnError> {
        let mut index = HashMap::new();
        let mut flat = Vec::new();
        let mut seg = Vec::new();
        let mut inv = Vec::new();
        for label in labels {
            if index.contains_key(label) {
                continue;
            }
            let r = index.len();
            index.insert(label.to_string(), r);
            let rows = token_rows(store, &tokenize_identifier(label), run_seed);
            inv.push(F::from_f64(1.0 / rows.len() as f64));
            for row in rows {
                flat.push(row);
                seg.push(r);
            }
        }
        let table = tape.param(&store.params, store.pid("ident/tokens")?);
        let n = index.len();
        let rows = if n == 0 {
            tape.constant(Tensor::zeros(&[0, store.config.dim]))
        } else {
            let g = tape.gather_rows(table, &flat)?;
            let s = tape.scatter_add_rows(g, &seg, n)?;
            let w = tape.constant(Tensor::matrix(n, 1, inv)?);
            tape.mul_col(s, w)?
        };
        Ok(IdentTable { rows, index })
    }

    pub fn row(&self, label: &str) -> usize {
        self.index[label]
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

fn token_rows<F: Real>(store: &ParameterStore<F>, tokens: &[String], run_seed: u64) -> Vec<usize> {
    if tokens.is_empty() {
        vec![store.vocab.no_name_row()]
    } else {
        tokens
            .iter()
            .map(|t| store.vocab.row(t, run_seed))
            .collect()
    }
}

/// Embedding of a single token list as a `[1, d]` row.
pub fn embed_identifier<F: Real>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    tokens: &[String],
    run_seed: u64,
) -> Result<Value, GnnError> {
    let rows = token_rows(store, tokens, run_seed);
    let table = tape.param(&store.params, store.pid("ident/tokens")?);
    let g = tape.gather_rows(table, &rows)?;
    let s = tape.scatter_add_rows(g, &vec![0; rows.len()], 1)?;
    Ok(tape.scale(s, 1.0 / rows.len() as f64))
}
