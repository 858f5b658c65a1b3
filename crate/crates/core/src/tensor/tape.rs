//! Operation tape and reverse sweep.
//!
//! Nodes are appended in evaluation order, so every parent index is smaller
//! than its child's and a reverse index walk is a valid topological order.

use std::collections::HashMap;
use std::rc::Rc;

use super::{mismatch, ParamId, Params, Real, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Value, Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    AddRow(Value, Value),
    Scale(Value, f64),
    LeakyRelu(Value, f64),
    ConcatCols(Vec<Value>),
    ConcatRows(Vec<Value>),
    GatherRows(Value, Rc<[usize]>),
    ScatterAddRows(Value, Rc<[usize]>),
    RowDot(Value, Value),
    MulCol(Value, Value),
    SegmentSoftmax(Value, Rc<[usize]>),
    Softmax(Value),
    LogSoftmax(Value),
    Log(Value),
    Sum(Value),
    Mean(Value),
    PickCols(Value, Rc<[usize]>),
    Reshape(Value),
}

struct Node<F> {
    value: Tensor<F>,
    op: Op,
}

/// Smallest argument accepted by `log`; keeps the output finite.
const LOG_FLOOR: f64 = 1e-30;

pub struct Tape<F: Real = f32> {
    nodes: Vec<Node<F>>,
    params: HashMap<ParamId, Value>,
    grad_enabled: bool,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

type TResult<T> = Result<T, TensorError>;

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: HashMap::new(),
            grad_enabled: true,
        }
    }

    /// A tape that keeps values only; `backward` sees every result as a leaf.
    pub fn inference() -> Self {
        Tape {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Value) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Value) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor<F>, op: Op) -> Value {
        let op = if self.grad_enabled { op } else { Op::Leaf };
        self.nodes.push(Node { value, op });
        Value(self.nodes.len() - 1)
    }

    /// Records a constant input.
    pub fn constant(&mut self, t: Tensor<F>) -> Value {
        self.push(t, Op::Leaf)
    }

    /// Records a trainable parameter. Repeated calls for the same id return
    /// the same node so gradients accumulate in one place.
    pub fn param(&mut self, params: &Params<F>, id: ParamId) -> Value {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        let v = self.push(params.get(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    fn dims(&self, v: Value) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> TResult<Value> {
        let (n, k) = self.dims(a);
        let (k2, m) = self.dims(b);
        if k != k2 {
            return Err(mismatch("matmul", self.shape(b), format!("{k} rows")));
        }
        let out = matmul_nn(self.value(a).data(), self.value(b).data(), n, k, m);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Value, b: Value) -> TResult<()> {
        if self.value(a).len() != self.value(b).len() || self.dims(a) != self.dims(b) {
            return Err(mismatch(op, self.shape(b), format!("{:?}", self.shape(a))));
        }
        Ok(())
    }

    fn zip(&mut self, a: Value, b: Value, f: impl Fn(F, F) -> F, op: Op) -> Value {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    pub fn add(&mut self, a: Value, b: Value) -> TResult<Value> {
        self.same_shape("add", a, b)?;
        Ok(self.zip(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> TResult<Value> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Value, b: Value) -> TResult<Value> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// Adds the row vector `bias` (`[1, c]` or `[c]`) to every row of `a`.
    pub fn add_row(&mut self, a: Value, bias: Value) -> TResult<Value> {
        let (n, c) = self.dims(a);
        if self.value(bias).len() != c {
            return Err(mismatch(
                "add_row",
                self.shape(bias),
                format!("{c} elements"),
            ));
        }
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(a).data().to_vec();
        for r in 0..n {
            for (o, &bv) in out[r * c..(r + 1) * c].iter_mut().zip(&b) {
                *o = *o + bv;
            }
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Value, s: f64) -> Value {
        let k = F::from_f64(s);
        let t = self.value(a).map(|x| x * k);
        self.push(t, Op::Scale(a, s))
    }

    pub fn leaky_relu(&mut self, a: Value, slope: f64) -> Value {
        let k = F::from_f64(slope);
        let t = self.value(a).map(|x| if x > F::zero() { x } else { x * k });
        self.push(t, Op::LeakyRelu(a, slope))
    }

    /// Concatenates along columns; all parts need the same row count.
    pub fn concat_cols(&mut self, parts: &[Value]) -> TResult<Value> {
        let n = self.dims(parts[0]).0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != n {
                return Err(mismatch("concat_cols", self.shape(p), format!("{n} rows")));
            }
            total += c;
        }
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(
            Tensor::matrix(n, total, out)?,
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    /// Stacks along rows; all parts need the same column count.
    pub fn concat_rows(&mut self, parts: &[Value]) -> TResult<Value> {
        let c = self.dims(parts[0]).1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, pc) = self.dims(p);
            if pc != c {
                return Err(mismatch(
                    "concat_rows",
                    self.shape(p),
                    format!("{c} columns"),
                ));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(
            Tensor::matrix(rows, c, out)?,
            Op::ConcatRows(parts.to_vec()),
        ))
    }

    /// Selects rows of `a`; also the embedding lookup.
    pub fn gather_rows(&mut self, a: Value, idx: &[usize]) -> TResult<Value> {
        let (n, c) = self.dims(a);
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= n {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: n,
                });
            }
            out.extend_from_slice(self.value(a).row(i));
        }
        Ok(self.push(
            Tensor::matrix(idx.len(), c, out)?,
            Op::GatherRows(a, idx.into()),
        ))
    }

    pub fn embedding_lookup(&mut self, table: Value, idx: &[usize]) -> TResult<Value> {
        self.gather_rows(table, idx)
    }

    /// `out[idx[i]] += a[i]` into an `[n, c]` zero matrix.
    pub fn scatter_add_rows(&mut self, a: Value, idx: &[usize], n: usize) -> TResult<Value> {
        let (m, c) = self.dims(a);
        if idx.len() != m {
            return Err(mismatch(
                "scatter_add_rows",
                self.shape(a),
                format!("{} rows", idx.len()),
            ));
        }
        let mut out = vec![F::zero(); n * c];
        for (r, &i) in idx.iter().enumerate() {
            if i >= n {
                return Err(TensorError::IndexOutOfRange {
                    op: "scatter_add_rows",
                    index: i,
                    len: n,
                });
            }
            for (o, &x) in out[i * c..(i + 1) * c].iter_mut().zip(self.value(a).row(r)) {
                *o = *o + x;
            }
        }
        Ok(self.push(
            Tensor::matrix(n, c, out)?,
            Op::ScatterAddRows(a, idx.into()),
        ))
    }

    /// Row-wise inner products, `[n, c] x [n, c] -> [n, 1]`.
    pub fn row_dot(&mut self, a: Value, b: Value) -> TResult<Value> {
        self.same_shape("row_dot", a, b)?;
        let (n, _) = self.dims(a);
        let out = (0..n)
            .map(|r| dot(self.value(a).row(r), self.value(b).row(r)))
            .collect();
        Ok(self.push(Tensor::matrix(n, 1, out)?, Op::RowDot(a, b)))
    }

    /// Scales row `r` of `a` by `w[r]`.
    pub fn mul_col(&mut self, a: Value, w: Value) -> TResult<Value> {
        let (n, c) = self.dims(a);
        if self.value(w).len() != n {
            return Err(mismatch("mul_col", self.shape(w), format!("{n} elements")));
        }
        let mut out = self.value(a).data().to_vec();
        for r in 0..n {
            let k = self.value(w).data()[r];
            out[r * c..(r + 1) * c].iter_mut().for_each(|x| *x = *x * k);
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::MulCol(a, w)))
    }

    /// Softmax of a column of logits within groups: entries sharing a
    /// segment id are normalized together.
    pub fn segment_softmax(
        &mut self,
        a: Value,
        seg: &[usize],
        num_segments: usize,
    ) -> TResult<Value> {
        let x = self.value(a).data();
        if x.len() != seg.len() {
            return Err(mismatch(
                "segment_softmax",
                self.shape(a),
                format!("{} elements", seg.len()),
            ));
        }
        let mut max = vec![F::neg_infinity(); num_segments];
        for (&s, &v) in seg.iter().zip(x) {
            if s >= num_segments {
                return Err(TensorError::IndexOutOfRange {
                    op: "segment_softmax",
                    index: s,
                    len: num_segments,
                });
            }
            max[s] = max[s].max(v);
        }
        let e: Vec<F> = seg
            .iter()
            .zip(x)
            .map(|(&s, &v)| (v - max[s]).exp())
            .collect();
        let mut sum = vec![F::zero(); num_segments];
        for (&s, &v) in seg.iter().zip(&e) {
            sum[s] = sum[s] + v;
        }
        let out = seg.iter().zip(&e).map(|(&s, &v)| v / sum[s]).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::SegmentSoftmax(a, seg.into())))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Value) -> Value {
        let t = self.value(a);
        let mut out = t.data().to_vec();
        let c = t.cols();
        for row in out.chunks_mut(c.max(1)) {
            softmax_in_place(row);
        }
        let t = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        self.push(t, Op::Softmax(a))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Value) -> Value {
        let t = self.value(a);
        let mut out = t.data().to_vec();
        let c = t.cols();
        for row in out.chunks_mut(c.max(1)) {
            let m = row.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<F>().ln();
            row.iter_mut().for_each(|x| *x = *x - lse);
        }
        let t = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        self.push(t, Op::LogSoftmax(a))
    }

    /// Natural log with the argument clamped below at a tiny positive floor.
    pub fn log(&mut self, a: Value) -> Value {
        let floor = F::from_f64(LOG_FLOOR);
        let t = self.value(a).map(|x| x.max(floor).ln());
        self.push(t, Op::Log(a))
    }

    pub fn sum(&mut self, a: Value) -> Value {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Value) -> Value {
        let t = self.value(a);
        let n = F::from_f64(t.len().max(1) as f64);
        let s = t.data().iter().copied().sum::<F>() / n;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Inner product of two equally sized tensors, as a scalar.
    pub fn dot(&mut self, a: Value, b: Value) -> TResult<Value> {
        if self.value(a).len() != self.value(b).len() {
            return Err(mismatch(
                "dot",
                self.shape(b),
                format!("{:?}", self.shape(a)),
            ));
        }
        let a2 = self.reshape(a, &[1, self.value(a).len()])?;
        let b2 = self.reshape(b, &[1, self.value(b).len()])?;
        let d = self.row_dot(a2, b2)?;
        self.reshape(d, &[])
    }

    /// `out[r] = a[r, idx[r]]`, shape `[n, 1]`.
    pub fn pick_cols(&mut self, a: Value, idx: &[usize]) -> TResult<Value> {
        let (n, c) = self.dims(a);
        if idx.len() != n {
            return Err(mismatch(
                "pick_cols",
                self.shape(a),
                format!("{} rows", idx.len()),
            ));
        }
        let mut out = Vec::with_capacity(n);
        for (r, &i) in idx.iter().enumerate() {
            if i >= c {
                return Err(TensorError::IndexOutOfRange {
                    op: "pick_cols",
                    index: i,
                    len: c,
                });
            }
            out.push(self.value(a).get(r, i));
        }
        Ok(self.push(Tensor::matrix(n, 1, out)?, Op::PickCols(a, idx.into())))
    }

    pub fn reshape(&mut self, a: Value, shape: &[usize]) -> TResult<Value> {
        let t = self.value(a).reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits` (`[n, c]`).
    pub fn cross_entropy(&mut self, logits: Value, targets: &[usize]) -> TResult<Value> {
        let lp = self.log_softmax(logits);
        let picked = self.pick_cols(lp, targets)?;
        let m = self.mean(picked);
        Ok(self.scale(m, -1.0))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Value) -> TResult<Gradients<F>> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(TensorError::NotScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<F>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![F::one()]);
        let mut param_grads = HashMap::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    param_grads.insert(*id, Tensor::new(node.value.shape().to_vec(), g.clone())?);
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.dims(*a);
                    let m = self.dims(*b).1;
                    let da = matmul_nt(&g, self.value(*b).data(), n, m, k);
                    let db = matmul_tn(self.value(*a).data(), &g, n, k, m);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.iter().map(|&x| -x).collect());
                }
                Op::Mul(a, b) => {
                    let va = self.value(*a).data();
                    let vb = self.value(*b).data();
                    acc(
                        &mut grads,
                        *a,
                        g.iter().zip(vb).map(|(&x, &y)| x * y).collect(),
                    );
                    acc(
                        &mut grads,
                        *b,
                        g.iter().zip(va).map(|(&x, &y)| x * y).collect(),
                    );
                }
                Op::AddRow(a, bias) => {
                    let c = self.value(*bias).len();
                    let mut db = vec![F::zero(); c];
                    for row in g.chunks(c) {
                        for (d, &x) in db.iter_mut().zip(row) {
                            *d = *d + x;
                        }
                    }
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *bias, db);
                }
                Op::Scale(a, s) => {
                    let k = F::from_f64(*s);
                    acc(&mut grads, *a, g.iter().map(|&x| x * k).collect());
                }
                Op::LeakyRelu(a, slope) => {
                    let k = F::from_f64(*slope);
                    let da = g
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(&x, &v)| if v > F::zero() { x } else { x * k })
                        .collect();
                    acc(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let n = node.value.rows();
                    let total = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.dims(p).1;
                        let mut dp = Vec::with_capacity(n * c);
                        for r in 0..n {
                            dp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                        }
                        acc(&mut grads, p, dp);
                        offset += c;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        acc(&mut grads, p, g[offset..offset + len].to_vec());
                        offset += len;
                    }
                }
                Op::GatherRows(a, idx) => {
                    let (n, c) = self.dims(*a);
                    let mut da = vec![F::zero(); n * c];
                    for (r, &i) in idx.iter().enumerate() {
                        for (d, &x) in da[i * c..(i + 1) * c]
                            .iter_mut()
                            .zip(&g[r * c..(r + 1) * c])
                        {
                            *d = *d + x;
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::ScatterAddRows(a, idx) => {
                    let c = node.value.cols();
                    let mut da = Vec::with_capacity(idx.len() * c);
                    for &i in idx.iter() {
                        da.extend_from_slice(&g[i * c..(i + 1) * c]);
                    }
                    acc(&mut grads, *a, da);
                }
                Op::RowDot(a, b) => {
                    let (n, c) = self.dims(*a);
                    let va = self.value(*a).data();
                    let vb = self.value(*b).data();
                    let mut da = Vec::with_capacity(n * c);
                    let mut db = Vec::with_capacity(n * c);
                    for r in 0..n {
                        for j in 0..c {
                            da.push(g[r] * vb[r * c + j]);
                            db.push(g[r] * va[r * c + j]);
                        }
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MulCol(a, w) => {
                    let (n, c) = self.dims(*a);
                    let va = self.value(*a).data();
                    let vw = self.value(*w).data();
                    let mut da = Vec::with_capacity(n * c);
                    let mut dw = Vec::with_capacity(n);
                    for r in 0..n {
                        let mut s = F::zero();
                        for j in 0..c {
                            da.push(g[r * c + j] * vw[r]);
                            s = s + g[r * c + j] * va[r * c + j];
                        }
                        dw.push(s);
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *w, dw);
                }
                Op::SegmentSoftmax(a, seg) => {
                    let y = node.value.data();
                    let n_seg = seg.iter().max().map_or(0, |m| m + 1);
                    let mut dots = vec![F::zero(); n_seg];
                    for ((&s, &gi), &yi) in seg.iter().zip(&g).zip(y) {
                        dots[s] = dots[s] + gi * yi;
                    }
                    let da = seg
                        .iter()
                        .zip(&g)
                        .zip(y)
                        .map(|((&s, &gi), &yi)| yi * (gi - dots[s]))
                        .collect();
                    acc(&mut grads, *a, da);
                }
                Op::Softmax(a) => {
                    let c = node.value.cols().max(1);
                    let y = node.value.data();
                    let mut da = Vec::with_capacity(y.len());
                    for (yr, gr) in y.chunks(c).zip(g.chunks(c)) {
                        let d: F = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        da.extend(yr.iter().zip(gr).map(|(&yi, &gi)| yi * (gi - d)));
                    }
                    acc(&mut grads, *a, da);
                }
                Op::LogSoftmax(a) => {
                    let c = node.value.cols().max(1);
                    let y = node.value.data();
                    let mut da = Vec::with_capacity(y.len());
                    for (yr, gr) in y.chunks(c).zip(g.chunks(c)) {
                        let gs: F = gr.iter().copied().sum();
                        da.extend(yr.iter().zip(gr).map(|(&yi, &gi)| gi - yi.exp() * gs));
                    }
                    acc(&mut grads, *a, da);
                }
                Op::Log(a) => {
                    let floor = F::from_f64(LOG_FLOOR);
                    let da = g
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(&gi, &x)| if x > floor { gi / x } else { F::zero() })
                        .collect();
                    acc(&mut grads, *a, da);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    acc(&mut grads, *a, vec![g[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len();
                    let k = g[0] / F::from_f64(n.max(1) as f64);
                    acc(&mut grads, *a, vec![k; n]);
                }
                Op::PickCols(a, idx) => {
                    let (n, c) = self.dims(*a);
                    let mut da = vec![F::zero(); n * c];
                    for (r, &i) in idx.iter().enumerate() {
                        da[r * c + i] = g[r];
                    }
                    acc(&mut grads, *a, da);
                }
                Op::Reshape(a) => acc(&mut grads, *a, g),
            }
        }
        Ok(Gradients {
            params: param_grads,
        })
    }
}

fn acc<F: Real>(grads: &mut [Option<Vec<F>>], v: Value, g: Vec<F>) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(e, x)| *e = *e + x),
        slot @ None => *slot = Some(g),
    }
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (&x, &y)| s + x * y)
}

pub(crate) fn softmax_in_place<F: Real>(row: &mut [F]) {
    let m = row.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
    let mut s = F::zero();
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        s = s + *x;
    }
    row.iter_mut().for_each(|x| *x = *x / s);
}

/// `[n, k] x [k, m]`
fn matmul_nn<F: Real>(a: &[F], b: &[F], n: usize, k: usize, m: usize) -> Vec<F> {
    let mut out = vec![F::zero(); n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aik = a[i * k + p];
            if aik == F::zero() {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *o = *o + aik * bv;
            }
        }
    }
    out
}

/// `[n, m] x [k, m]^T -> [n, k]`
fn matmul_nt<F: Real>(a: &[F], b: &[F], n: usize, m: usize, k: usize) -> Vec<F> {
    let mut out = vec![F::zero(); n * k];
    for i in 0..n {
        let arow = &a[i * m..(i + 1) * m];
        for j in 0..k {
            out[i * k + j] = dot(arow, &b[j * m..(j + 1) * m]);
        }
    }
    out
}

/// `[n, k]^T x [n, m] -> [k, m]`
fn matmul_tn<F: Real>(a: &[F], b: &[F], n: usize, k: usize, m: usize) -> Vec<F> {
    let mut out = vec![F::zero(); k * m];
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == F::zero() {
                continue;
            }
            for (o, &bv) in out[p * m..(p + 1) * m].iter_mut().zip(brow) {
                *o = *o + aip * bv;
            }
        }
    }
    out
}

/// Parameter gradients from one reverse sweep.
#[derive(Debug, Clone, Default)]
pub struct Gradients<F: Real = f32> {
    params: HashMap<ParamId, Tensor<F>>,
}

impl<F: Real> Gradients<F> {
    /// Gradient of a parameter the loss depends on, `None` when unreachable.
    pub fn get(&self, id: ParamId) -> Option<&Tensor<F>> {
        self.params.get(&id)
    }

    /// Gradient with unreachable parameters reported as zeros.
    pub fn get_or_zero(&self, params: &Params<F>, id: ParamId) -> Tensor<F> {
        self.params
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(params.get(id).shape()))
    }

    pub fn touched(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Global L2 norm over every reached parameter.
    pub fn norm(&self) -> f64 {
        self.params
            .values()
            .flat_map(|t| t.data().iter())
            .map(|x| x.as_f64() * x.as_f64())
            .sum::<f64>()
            .sqrt()
    }
}
