//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! Every operation works on a row-major matrix view of its operands: the last
//! dimension is the column count and all leading dimensions fold into rows.
//! Training runs in `f32`; gradient checks instantiate the same code in `f64`.

mod adam;
mod checkpoint;
mod params;
mod tape;

use std::fmt::{Debug, Display};

use thiserror::Error;

pub use adam::{AdamConfig, AdamState, WeightDecay};
pub use checkpoint::{Checkpoint, CheckpointError, ParamEntry, CHECKPOINT_FORMAT_VERSION};
pub use params::{ParamId, Params};
pub use tape::{Gradients, Tape, Value};

/// Floating point element type.
pub trait Real:
    num_traits::Float + Default + Debug + Display + Send + Sync + std::iter::Sum + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch, got {got:?}, expected {expected}")]
    ShapeMismatch {
        op: &'static str,
        got: Vec<usize>,
        expected: String,
    },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalarLoss(Vec<usize>),
}

pub(crate) fn mismatch(
    op: &'static str,
    got: &[usize],
    expected: impl Into<String>,
) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        got: got.to_vec(),
        expected: expected.into(),
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self, TensorError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(mismatch("new", &shape, format!("{} elements", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    /// Row vector of shape `[n]`.
    pub fn vector(v: Vec<F>) -> Self {
        Tensor {
            shape: vec![v.len()],
            data: v,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<F>) -> Result<Self, TensorError> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self, TensorError> {
        Tensor::new(
            shape.to_vec(),
            data.iter().map(|&x| F::from_f64(x)).collect(),
        )
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn rows(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            self.shape[..self.shape.len() - 1].iter().product()
        }
    }

    pub fn row(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols() + c]
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> F {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Self, TensorError> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| G::from_f64(x.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

impl<F: Real> Debug for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape, self.data)
    }
}

impl<F: Real> Display for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.rows() {
            let row: Vec<String> = self.row(r).iter().map(|x| format!("{x:.4}")).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Compares tape gradients with central finite differences.
///
/// `f` builds a scalar loss from `params` on a fresh tape. Every scalar of
/// every parameter is perturbed by `h`; the result is the largest relative
/// error `|a - n| / max(|a| + |n|, floor)`.
pub fn gradient_check<F>(
    params: &Params<f64>,
    h: f64,
    floor: f64,
    mut f: F,
) -> Result<GradCheck, TensorError>
where
    F: FnMut(&mut Tape<f64>, &Params<f64>) -> Result<Value, TensorError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    let grads = tape.backward(loss)?;
    let mut report = GradCheck::default();
    let mut p = params.clone();
    for (id, path, t) in params.iter() {
        let analytic = grads.get_or_zero(params, id);
        for i in 0..t.len() {
            let orig = t.data()[i];
            p.get_mut(id).data_mut()[i] = orig + h;
            let mut tp = Tape::new();
            let lp = f(&mut tp, &p)?;
            let up = tp.value(lp).item();
            p.get_mut(id).data_mut()[i] = orig - h;
            let mut tm = Tape::new();
            let lm = f(&mut tm, &p)?;
            let down = tm.value(lm).item();
            p.get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(floor);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((path.to_string(), i, a, numeric));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Path, flat index, analytic and numeric value of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}
