use std::collections::HashMap;

use super::{Real, Tensor};

pub type ParamId = usize;

/// Named trainable tensors, addressed by stable path strings such as
/// `step3/aggr/m1`. Insertion order is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F: Real = f32> {
    paths: Vec<String>,
    index: HashMap<String, ParamId>,
    tensors: Vec<Tensor<F>>,
}

impl<F: Real> Default for Params<F> {
    fn default() -> Self {
        Params {
            paths: Vec::new(),
            index: HashMap::new(),
            tensors: Vec::new(),
        }
    }
}

impl<F: Real> Params<F> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter; panics on a duplicate path, which is a model
    /// construction bug.
    pub fn insert(&mut self, path: impl Into<String>, t: Tensor<F>) -> ParamId {
        let path = path.into();
        assert!(
            !self.index.contains_key(&path),
            "duplicate parameter path {path}"
        );
        let id = self.tensors.len();
        self.index.insert(path.clone(), id);
        self.paths.push(path);
        self.tensors.push(t);
        id
    }

    pub fn id(&self, path: &str) -> Option<ParamId> {
        self.index.get(path).copied()
    }

    pub fn path(&self, id: ParamId) -> &str {
        &self.paths[id]
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.tensors[id]
    }

    pub fn by_path(&self, path: &str) -> Option<&Tensor<F>> {
        self.id(path).map(|id| &self.tensors[id])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<F>)> {
        self.paths
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (p, t))| (i, p.as_str(), t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        Params {
            paths: self.paths.clone(),
            index: self.index.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}
