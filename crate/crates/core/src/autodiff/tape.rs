use super::{ParamId, Params, Scalar, Tensor};
use crate::error::{Error, Result};

/// Index of a node on a [`Tape`]. Cheap to copy; only valid for the tape
/// that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<F: Scalar> {
    Leaf { param: Option<ParamId> },
    MatVec(Var, Var),
    VecMat(Var, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, F),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Row { src: Var, index: usize },
    StackRows(Vec<Var>),
    Softmax { src: Var, mask: Option<Vec<bool>> },
    LogSoftmax(Var),
    Pick { src: Var, index: usize },
    CrossEntropyLogits { logits: Var, target: usize },
    Sum(Var),
    MaxPairs(Var),
}

struct Node<F: Scalar> {
    op: Op<F>,
    value: Tensor<F>,
}

/// Flat Wengert list. Every op records its parents (always earlier nodes),
/// so one reverse sweep from the loss visits each node exactly once.
/// Gradients accumulate; nothing is zeroed implicitly.
pub struct Tape<F: Scalar> {
    nodes: Vec<Node<F>>,
    grads: Vec<Option<Vec<F>>>,
    ran_backward: bool,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            ran_backward: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<F>, value: Tensor<F>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Value computed for a node during the forward pass.
    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss w.r.t. this node, if it was
    /// reached by the reverse sweep.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Constant input. Participates in backward (its gradient is computed)
    /// but is not tied to any parameter store.
    pub fn leaf(&mut self, value: Tensor<F>) -> Var {
        self.push(Op::Leaf { param: None }, value)
    }

    /// Copies a parameter onto the tape. Bind each parameter at most once
    /// per tape so all uses share one node and gradients pool there.
    pub fn param(&mut self, params: &Params<F>, id: ParamId) -> Var {
        let mut t = params.value(id).clone();
        // The tape keeps its own grad bookkeeping; drop the param buffer copy.
        t.zero_grad();
        self.push(Op::Leaf { param: Some(id) }, t)
    }

    // ---- elementwise and linear ops ----

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Op::Add(a, b), Tensor::new(shape, data)?))
    }

    pub fn add3(&mut self, a: Var, b: Var, c: Var) -> Result<Var> {
        let ab = self.add(a, b)?;
        self.add(ab, c)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch {
                op: "sub",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x - y).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Op::Sub(a, b), Tensor::new(shape, data)?))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Op::Mul(a, b), Tensor::new(shape, data)?))
    }

    pub fn scale(&mut self, a: Var, k: F) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x * k).collect();
        let shape = ta.shape().to_vec();
        let t = Tensor::new(shape, data).expect("same shape as input");
        self.push(Op::Scale(a, k), t)
    }

    /// Matrix [r,c] times vector [c] giving [r].
    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let (tm, tv) = (self.value(m), self.value(v));
        if !tm.is_matrix() || !tv.is_vector() || tm.cols() != tv.len() {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: tm.shape().to_vec(),
                rhs: tv.shape().to_vec(),
            });
        }
        let (r, c) = (tm.rows(), tm.cols());
        let mut data = vec![F::zero(); r];
        for i in 0..r {
            let row = &tm.data()[i * c..(i + 1) * c];
            let mut acc = F::zero();
            for (x, y) in row.iter().zip(tv.data()) {
                acc = acc + *x * *y;
            }
            data[i] = acc;
        }
        Ok(self.push(Op::MatVec(m, v), Tensor::vector(data)))
    }

    /// Row vector [r] times matrix [r,c] giving [c]. This is the attention
    /// context: weights against stacked annotations.
    pub fn vecmat(&mut self, v: Var, m: Var) -> Result<Var> {
        let (tv, tm) = (self.value(v), self.value(m));
        if !tv.is_vector() || !tm.is_matrix() || tv.len() != tm.rows() {
            return Err(Error::ShapeMismatch {
                op: "vecmat",
                lhs: tv.shape().to_vec(),
                rhs: tm.shape().to_vec(),
            });
        }
        let (r, c) = (tm.rows(), tm.cols());
        let mut data = vec![F::zero(); c];
        for i in 0..r {
            let w = tv.data()[i];
            let row = &tm.data()[i * c..(i + 1) * c];
            for (out, x) in data.iter_mut().zip(row) {
                *out = *out + w * *x;
            }
        }
        Ok(self.push(Op::VecMat(v, m), Tensor::vector(data)))
    }

    /// Matrix product [m,k]x[k,n] -> [m,n].
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.is_matrix() || !tb.is_matrix() || ta.cols() != tb.rows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut data = vec![F::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = ta.data()[i * k + p];
                let brow = &tb.data()[p * n..(p + 1) * n];
                let orow = i * n;
                for j in 0..n {
                    data[orow + j] = data[orow + j] + aip * brow[j];
                }
            }
        }
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(m, n, data)?))
    }

    /// Adds a vector [c] to every row of a matrix [r,c].
    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (tm, tv) = (self.value(m), self.value(v));
        if !tm.is_matrix() || !tv.is_vector() || tm.cols() != tv.len() {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: tm.shape().to_vec(),
                rhs: tv.shape().to_vec(),
            });
        }
        let (r, c) = (tm.rows(), tm.cols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(tm.data()[i * c + j] + tv.data()[j]);
            }
        }
        Ok(self.push(Op::AddRow(m, v), Tensor::matrix(r, c, data)?))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x.tanh()).collect();
        let shape = ta.shape().to_vec();
        let t = Tensor::new(shape, data).expect("same shape as input");
        self.push(Op::Tanh(a), t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let one = F::one();
        let data = ta.data().iter().map(|&x| one / (one + (-x).exp())).collect();
        let shape = ta.shape().to_vec();
        let t = Tensor::new(shape, data).expect("same shape as input");
        self.push(Op::Sigmoid(a), t)
    }

    /// Elementwise natural log. Inputs must be positive (probabilities).
    pub fn log(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x.ln()).collect();
        let shape = ta.shape().to_vec();
        let t = Tensor::new(shape, data).expect("same shape as input");
        self.push(Op::Log(a), t)
    }

    /// Concatenates vectors in order into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty(), "concat of nothing");
        let mut data = Vec::new();
        for &p in parts {
            let tp = self.value(p);
            if !tp.is_vector() {
                return Err(Error::InvalidShape {
                    what: "concat input",
                    shape: tp.shape().to_vec(),
                    msg: "concat takes vectors".into(),
                });
            }
            data.extend_from_slice(tp.data());
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data)))
    }

    /// Contiguous sub-vector `[start, start+len)` of a vector.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let ts = self.value(src);
        if !ts.is_vector() || start + len > ts.len() {
            return Err(Error::IndexOutOfRange {
                what: "slice",
                index: start + len,
                size: ts.len(),
            });
        }
        let data = ts.data()[start..start + len].to_vec();
        Ok(self.push(Op::Slice { src, start }, Tensor::vector(data)))
    }

    /// Row `index` of a matrix as a vector. Backward scatters into that row,
    /// which is exactly an embedding lookup.
    pub fn row(&mut self, src: Var, index: usize) -> Result<Var> {
        let ts = self.value(src);
        if !ts.is_matrix() || index >= ts.rows() {
            return Err(Error::IndexOutOfRange {
                what: "matrix row",
                index,
                size: if ts.is_matrix() { ts.rows() } else { 0 },
            });
        }
        let c = ts.cols();
        let data = ts.data()[index * c..(index + 1) * c].to_vec();
        Ok(self.push(Op::Row { src, index }, Tensor::vector(data)))
    }

    /// Stacks equal-length vectors as matrix rows.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        assert!(!rows.is_empty(), "stack_rows of nothing");
        let c = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            let tr = self.value(r);
            if !tr.is_vector() || tr.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    lhs: vec![c],
                    rhs: tr.shape().to_vec(),
                });
            }
            data.extend_from_slice(tr.data());
        }
        Ok(self.push(Op::StackRows(rows.to_vec()), Tensor::matrix(rows.len(), c, data)?))
    }

    /// Softmax over a vector with max subtraction. With a mask, only `true`
    /// positions participate; masked outputs are exactly zero.
    pub fn softmax(&mut self, src: Var) -> Result<Var> {
        self.softmax_impl(src, None)
    }

    pub fn softmax_masked(&mut self, src: Var, mask: &[bool]) -> Result<Var> {
        let n = self.value(src).len();
        if mask.len() != n {
            return Err(Error::LengthMismatch {
                what: "softmax mask",
                lhs: mask.len(),
                rhs: n,
            });
        }
        self.softmax_impl(src, Some(mask.to_vec()))
    }

    fn softmax_impl(&mut self, src: Var, mask: Option<Vec<bool>>) -> Result<Var> {
        let ts = self.value(src);
        if !ts.is_vector() {
            return Err(Error::InvalidShape {
                what: "softmax input",
                shape: ts.shape().to_vec(),
                msg: "softmax takes a vector".into(),
            });
        }
        let data = softmax_values(ts.data(), mask.as_deref())?;
        Ok(self.push(Op::Softmax { src, mask }, Tensor::vector(data)))
    }

    /// Numerically stable log-softmax of a vector.
    pub fn log_softmax(&mut self, src: Var) -> Result<Var> {
        let ts = self.value(src);
        if !ts.is_vector() {
            return Err(Error::InvalidShape {
                what: "log_softmax input",
                shape: ts.shape().to_vec(),
                msg: "log_softmax takes a vector".into(),
            });
        }
        let lse = log_sum_exp(ts.data())?;
        let data = ts.data().iter().map(|&x| x - lse).collect();
        Ok(self.push(Op::LogSoftmax(src), Tensor::vector(data)))
    }

    /// Selects one element of a vector as a scalar.
    pub fn pick(&mut self, src: Var, index: usize) -> Result<Var> {
        let ts = self.value(src);
        if !ts.is_vector() || index >= ts.len() {
            return Err(Error::IndexOutOfRange {
                what: "pick",
                index,
                size: ts.len(),
            });
        }
        let x = ts.data()[index];
        Ok(self.push(Op::Pick { src, index }, Tensor::scalar(x)))
    }

    /// Fused `-log softmax(logits)[target]`, computed as
    /// `logsumexp(logits) - logits[target]`. Never materializes the
    /// probability, so tiny targets cannot round to `-inf`.
    pub fn cross_entropy_logits(&mut self, logits: Var, target: usize) -> Result<Var> {
        let tl = self.value(logits);
        if !tl.is_vector() || target >= tl.len() {
            return Err(Error::IndexOutOfRange {
                what: "cross-entropy target",
                index: target,
                size: tl.len(),
            });
        }
        let lse = log_sum_exp(tl.data())?;
        let out = lse - tl.data()[target];
        Ok(self.push(Op::CrossEntropyLogits { logits, target }, Tensor::scalar(out)))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().copied().sum();
        self.push(Op::Sum(a), Tensor::scalar(total))
    }

    /// Maxout over adjacent pairs: [2k] -> [k]. Ties pick the even index.
    pub fn max_pairs(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if !ta.is_vector() || ta.len() % 2 != 0 {
            return Err(Error::InvalidShape {
                what: "max_pairs input",
                shape: ta.shape().to_vec(),
                msg: "needs an even-length vector".into(),
            });
        }
        let data = ta
            .data()
            .chunks_exact(2)
            .map(|p| if p[0] >= p[1] { p[0] } else { p[1] })
            .collect();
        Ok(self.push(Op::MaxPairs(a), Tensor::vector(data)))
    }

    /// `matvec(w, x) + b`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
    }

    // ---- reverse pass ----

    /// Runs the reverse sweep from a scalar loss. May be called once per
    /// tape; node gradients stay readable afterwards via [`grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.ran_backward {
            return Err(Error::BackwardTwice);
        }
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        self.ran_backward = true;
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            let g = match &self.grads[i] {
                Some(g) => g.clone(),
                None => continue,
            };
            self.apply_backward(i, &g);
        }
        Ok(())
    }

    fn acc(&mut self, v: Var, f: impl FnOnce(&mut [F])) {
        if self.grads[v.0].is_none() {
            self.grads[v.0] = Some(vec![F::zero(); self.nodes[v.0].value.len()]);
        }
        f(self.grads[v.0].as_mut().expect("just allocated"));
    }

    fn apply_backward(&mut self, i: usize, g: &[F]) {
        // Values needed for local derivatives are cheap clones of small
        // tensors; it keeps the borrow structure trivial.
        match &self.nodes[i].op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.acc(a, |d| axpy(d, F::one(), g));
                self.acc(b, |d| axpy(d, F::one(), g));
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                self.acc(a, |d| axpy(d, F::one(), g));
                self.acc(b, |d| axpy(d, -F::one(), g));
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let va = self.nodes[a.0].value.data().to_vec();
                let vb = self.nodes[b.0].value.data().to_vec();
                self.acc(a, |d| {
                    for k in 0..d.len() {
                        d[k] = d[k] + g[k] * vb[k];
                    }
                });
                self.acc(b, |d| {
                    for k in 0..d.len() {
                        d[k] = d[k] + g[k] * va[k];
                    }
                });
            }
            Op::Scale(a, k) => {
                let (a, k) = (*a, *k);
                self.acc(a, |d| axpy(d, k, g));
            }
            Op::MatVec(m, v) => {
                let (m, v) = (*m, *v);
                let tm = &self.nodes[m.0].value;
                let (r, c) = (tm.rows(), tm.cols());
                let mdat = tm.data().to_vec();
                let vdat = self.nodes[v.0].value.data().to_vec();
                self.acc(m, |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] = d[i * c + j] + g[i] * vdat[j];
                        }
                    }
                });
                self.acc(v, |d| {
                    for j in 0..c {
                        let mut acc = F::zero();
                        for i in 0..r {
                            acc = acc + mdat[i * c + j] * g[i];
                        }
                        d[j] = d[j] + acc;
                    }
                });
            }
            Op::VecMat(v, m) => {
                let (v, m) = (*v, *m);
                let tm = &self.nodes[m.0].value;
                let (r, c) = (tm.rows(), tm.cols());
                let mdat = tm.data().to_vec();
                let vdat = self.nodes[v.0].value.data().to_vec();
                self.acc(v, |d| {
                    for i in 0..r {
                        let mut acc = F::zero();
                        for j in 0..c {
                            acc = acc + mdat[i * c + j] * g[j];
                        }
                        d[i] = d[i] + acc;
                    }
                });
                self.acc(m, |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] = d[i * c + j] + vdat[i] * g[j];
                        }
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                let ta = &self.nodes[a.0].value;
                let tb = &self.nodes[b.0].value;
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                let adat = ta.data().to_vec();
                let bdat = tb.data().to_vec();
                self.acc(a, |d| {
                    // dA = G * B^T
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = F::zero();
                            for j in 0..n {
                                acc = acc + g[i * n + j] * bdat[p * n + j];
                            }
                            d[i * k + p] = d[i * k + p] + acc;
                        }
                    }
                });
                self.acc(b, |d| {
                    // dB = A^T * G
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc = F::zero();
                            for i in 0..m {
                                acc = acc + adat[i * k + p] * g[i * n + j];
                            }
                            d[p * n + j] = d[p * n + j] + acc;
                        }
                    }
                });
            }
            Op::AddRow(m, v) => {
                let (m, v) = (*m, *v);
                let tm = &self.nodes[m.0].value;
                let (r, c) = (tm.rows(), tm.cols());
                self.acc(m, |d| axpy(d, F::one(), g));
                self.acc(v, |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[j] = d[j] + g[i * c + j];
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let a = *a;
                let y = self.nodes[i].value.data().to_vec();
                self.acc(a, |d| {
                    for k in 0..d.len() {
                        d[k] = d[k] + g[k] * (F::one() - y[k] * y[k]);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let a = *a;
                let y = self.nodes[i].value.data().to_vec();
                self.acc(a, |d| {
                    for k in 0..d.len() {
                        d[k] = d[k] + g[k] * y[k] * (F::one() - y[k]);
                    }
                });
            }
            Op::Log(a) => {
                let a = *a;
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc(a, |d| {
                    for k in 0..d.len() {
                        d[k] = d[k] + g[k] / x[k];
                    }
                });
            }
            Op::Concat(parts) => {
                let parts = parts.clone();
                let mut off = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.len();
                    let seg = g[off..off + n].to_vec();
                    self.acc(p, |d| axpy(d, F::one(), &seg));
                    off += n;
                }
            }
            Op::Slice { src, start } => {
                let (src, start) = (*src, *start);
                self.acc(src, |d| {
                    for (k, &gk) in g.iter().enumerate() {
                        d[start + k] = d[start + k] + gk;
                    }
                });
            }
            Op::Row { src, index } => {
                let (src, index) = (*src, *index);
                let c = self.nodes[src.0].value.cols();
                self.acc(src, |d| {
                    for j in 0..c {
                        d[index * c + j] = d[index * c + j] + g[j];
                    }
                });
            }
            Op::StackRows(rows) => {
                let rows = rows.clone();
                let c = self.nodes[i].value.cols();
                for (r, v) in rows.into_iter().enumerate() {
                    let seg = g[r * c..(r + 1) * c].to_vec();
                    self.acc(v, |d| axpy(d, F::one(), &seg));
                }
            }
            Op::Softmax { src, mask } => {
                let src = *src;
                let mask = mask.clone();
                let y = self.nodes[i].value.data().to_vec();
                let mut dot = F::zero();
                for k in 0..y.len() {
                    dot = dot + g[k] * y[k];
                }
                self.acc(src, |d| {
                    for k in 0..y.len() {
                        let live = mask.as_ref().map_or(true, |m| m[k]);
                        if live {
                            d[k] = d[k] + y[k] * (g[k] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let a = *a;
                let y = self.nodes[i].value.data().to_vec();
                let gsum: F = g.iter().copied().sum();
                self.acc(a, |d| {
                    for k in 0..y.len() {
                        d[k] = d[k] + g[k] - y[k].exp() * gsum;
                    }
                });
            }
            Op::Pick { src, index } => {
                let (src, index) = (*src, *index);
                let g0 = g[0];
                self.acc(src, |d| {
                    d[index] = d[index] + g0;
                });
            }
            Op::CrossEntropyLogits { logits, target } => {
                let (logits, target) = (*logits, *target);
                let x = self.nodes[logits.0].value.data();
                let p = softmax_values(x, None).expect("checked finite at forward");
                let g0 = g[0];
                self.acc(logits, |d| {
                    for k in 0..p.len() {
                        let delta = if k == target { F::one() } else { F::zero() };
                        d[k] = d[k] + g0 * (p[k] - delta);
                    }
                });
            }
            Op::Sum(a) => {
                let a = *a;
                let g0 = g[0];
                self.acc(a, |d| {
                    for x in d.iter_mut() {
                        *x = *x + g0;
                    }
                });
            }
            Op::MaxPairs(a) => {
                let a = *a;
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc(a, |d| {
                    for (k, &gk) in g.iter().enumerate() {
                        let win = if x[2 * k] >= x[2 * k + 1] { 2 * k } else { 2 * k + 1 };
                        d[win] = d[win] + gk;
                    }
                });
            }
        }
    }

    /// Adds every parameter-leaf gradient into its store. Call after
    /// `backward`; safe to call for tapes where some parameters never got
    /// gradients (they simply contribute nothing).
    pub fn accumulate_into(&self, params: &mut Params<F>) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(id) } = node.op {
                if let Some(Some(g)) = self.grads.get(i) {
                    params.accumulate_grad(id, g);
                }
            }
        }
    }
}

fn axpy<F: Scalar>(dst: &mut [F], k: F, src: &[F]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + k * *s;
    }
}

/// Stable softmax used by both the op and the fused cross-entropy backward.
/// Masked-out entries get exactly zero. Errors on non-finite inputs and on
/// fully-masked vectors.
pub(crate) fn softmax_values<F: Scalar>(x: &[F], mask: Option<&[bool]>) -> Result<Vec<F>> {
    let live = |k: usize| mask.map_or(true, |m| m[k]);
    let mut mx: Option<F> = None;
    for (k, &v) in x.iter().enumerate() {
        if !live(k) {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::NonFiniteLogits);
        }
        mx = Some(match mx {
            Some(m) if m >= v => m,
            _ => v,
        });
    }
    let mx = mx.ok_or_else(|| Error::Config("softmax with every position masked".into()))?;
    let mut out = vec![F::zero(); x.len()];
    let mut denom = F::zero();
    for (k, &v) in x.iter().enumerate() {
        if live(k) {
            let e = (v - mx).exp();
            out[k] = e;
            denom = denom + e;
        }
    }
    for o in out.iter_mut() {
        *o = *o / denom;
    }
    Ok(out)
}

pub(crate) fn log_sum_exp<F: Scalar>(x: &[F]) -> Result<F> {
    let mut mx = F::neg_infinity();
    for &v in x {
        if !v.is_finite() {
            return Err(Error::NonFiniteLogits);
        }
        if v > mx {
            mx = v;
        }
    }
    let mut acc = F::zero();
    for &v in x {
        acc = acc + (v - mx).exp();
    }
    Ok(mx + acc.ln())
}
