//! Eager-forward tape with reverse-mode gradient accumulation.
//!
//! Nodes are appended in construction order, which is already a topological
//! order, so `backward` is a single reverse sweep visiting each node once.

use super::params::ParamStore;
use super::{Scalar, SparseMatrix, Tensor};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Handle to a registered sparse matrix.
#[derive(Debug, Clone, Copy)]
pub struct SparseId(usize);

enum Op<S: Scalar> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Relu(Var),
    RowSoftmax(Var),
    RowLogSoftmax(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, S, S),
    Min(Var, Var),
    Spmm(SparseId, Var),
    SegmentSum(Var, Vec<u32>),
    SelectColumn(Var, Vec<u32>),
    SumAll(Var),
}

struct Node<S: Scalar> {
    op: Op<S>,
    value: Tensor<S>,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
    sparse: Vec<SparseMatrix<S>>,
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            sparse: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.push(Op::Leaf, t)
    }

    /// Registers a sparse matrix for use in [`Tape::spmm`].
    pub fn register_sparse(&mut self, a: SparseMatrix<S>) -> SparseId {
        self.sparse.push(a);
        SparseId(self.sparse.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, ka) = self.value(a).shape();
        let (kb, n) = self.value(b).shape();
        assert_eq!(
            ka, kb,
            "matmul shape mismatch: {}x{} times {}x{}",
            m, ka, kb, n
        );
        let mut out = Tensor::zeros(m, n);
        dense_gemm(
            self.value(a),
            false,
            self.value(b),
            false,
            S::ZERO,
            &mut out,
        );
        self.push(Op::MatMul(a, b), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, "add", |x, y| x + y);
        self.push(Op::Add(a, b), out)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, "sub", |x, y| x - y);
        self.push(Op::Sub(a, b), out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, "mul", |x, y| x * y);
        self.push(Op::Mul(a, b), out)
    }

    pub fn scale(&mut self, a: Var, s: S) -> Var {
        let out = self.map(a, |x| x * s);
        self.push(Op::Scale(a, s), out)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| x.maximum(S::ZERO));
        self.push(Op::Relu(a), out)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| x.exp());
        self.push(Op::Exp(a), out)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| x.ln());
        self.push(Op::Log(a), out)
    }

    pub fn clamp(&mut self, a: Var, lo: S, hi: S) -> Var {
        let out = self.map(a, |x| x.maximum(lo).minimum(hi));
        self.push(Op::Clamp(a, lo, hi), out)
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, "min", |x, y| x.minimum(y));
        self.push(Op::Min(a, b), out)
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let row = &x.data[r * x.cols..(r + 1) * x.cols];
            let out_row = &mut out.data[r * x.cols..(r + 1) * x.cols];
            softmax_row(row, out_row);
        }
        self.push(Op::RowSoftmax(a), out)
    }

    pub fn row_log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let row = &x.data[r * x.cols..(r + 1) * x.cols];
            let max = row.iter().fold(row[0], |acc, &v| acc.maximum(v));
            let mut sum = S::ZERO;
            for &v in row {
                sum += (v - max).exp();
            }
            let lse = max + sum.ln();
            for (o, &v) in out.data[r * x.cols..(r + 1) * x.cols].iter_mut().zip(row) {
                *o = v - lse;
            }
        }
        self.push(Op::RowLogSoftmax(a), out)
    }

    /// A·H for a registered sparse A. Backward relies on A being symmetric,
    /// which holds for normalized adjacencies and their block diagonals.
    pub fn spmm(&mut self, a: SparseId, h: Var) -> Var {
        let mat = &self.sparse[a.0];
        let x = self.value(h);
        let mut out = Tensor::zeros(mat.n, x.cols);
        mat.mul_dense(x, &mut out);
        self.push(Op::Spmm(a, h), out)
    }

    /// Sums rows sharing a segment id; output has `num_segments` rows.
    pub fn segment_sum(&mut self, a: Var, segments: &[u32], num_segments: usize) -> Var {
        let x = self.value(a);
        assert_eq!(
            segments.len(),
            x.rows,
            "segment_sum: {} ids for {} rows",
            segments.len(),
            x.rows
        );
        let mut out = Tensor::zeros(num_segments, x.cols);
        for (r, &s) in segments.iter().enumerate() {
            assert!((s as usize) < num_segments, "segment id out of range");
            for c in 0..x.cols {
                let v = x.get(r, c);
                out.data[s as usize * x.cols + c] += v;
            }
        }
        self.push(Op::SegmentSum(a, segments.to_vec()), out)
    }

    /// Picks one column per row; output is rows×1.
    pub fn select_column(&mut self, a: Var, idx: &[u32]) -> Var {
        let x = self.value(a);
        assert_eq!(
            idx.len(),
            x.rows,
            "select_column: {} indices for {} rows",
            idx.len(),
            x.rows
        );
        let mut out = Tensor::zeros(x.rows, 1);
        for (r, &c) in idx.iter().enumerate() {
            assert!((c as usize) < x.cols, "column index out of range");
            out.data[r] = x.get(r, c as usize);
        }
        self.push(Op::SelectColumn(a, idx.to_vec()), out)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let mut total = S::ZERO;
        for &v in &self.value(a).data {
            total += v;
        }
        self.push(Op::SumAll(a), Tensor::scalar(total))
    }

    fn map(&self, a: Var, f: impl Fn(S) -> S) -> Tensor<S> {
        let x = self.value(a);
        Tensor {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, a: Var, b: Var, what: &str, f: impl Fn(S, S) -> S) -> Tensor<S> {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(
            x.shape(),
            y.shape(),
            "{what} shape mismatch: {}x{} vs {}x{}",
            x.rows,
            x.cols,
            y.rows,
            y.cols
        );
        Tensor {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&y.data).map(|(&u, &v)| f(u, v)).collect(),
        }
    }

    /// Reverse sweep from a scalar root; gradients accumulate per node and
    /// stay readable through [`Tape::grad`] until the next backward call.
    pub fn backward(&mut self, root: Var) {
        assert_eq!(
            self.value(root).shape(),
            (1, 1),
            "backward root must be a scalar"
        );
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(S::ONE));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads;
    }

    fn accumulate(&self, i: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                {
                    let da = add_into(&mut grads[a.0], av.shape());
                    dense_gemm(g, false, bv, true, S::ONE, da);
                }
                let db = add_into(&mut grads[b.0], bv.shape());
                dense_gemm(av, true, g, false, S::ONE, db);
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    let d = add_into(&mut grads[v.0], g.shape());
                    for (o, &x) in d.data.iter_mut().zip(&g.data) {
                        *o += x;
                    }
                }
            }
            Op::Sub(a, b) => {
                {
                    let da = add_into(&mut grads[a.0], g.shape());
                    for (o, &x) in da.data.iter_mut().zip(&g.data) {
                        *o += x;
                    }
                }
                let db = add_into(&mut grads[b.0], g.shape());
                for (o, &x) in db.data.iter_mut().zip(&g.data) {
                    *o += -x;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).clone(), self.value(*b).clone());
                {
                    let da = add_into(&mut grads[a.0], av.shape());
                    for ((o, &x), &y) in da.data.iter_mut().zip(&g.data).zip(&bv.data) {
                        *o += x * y;
                    }
                }
                let db = add_into(&mut grads[b.0], bv.shape());
                for ((o, &x), &y) in db.data.iter_mut().zip(&g.data).zip(&av.data) {
                    *o += x * y;
                }
            }
            Op::Scale(a, s) => {
                let da = add_into(&mut grads[a.0], g.shape());
                for (o, &x) in da.data.iter_mut().zip(&g.data) {
                    *o += x * *s;
                }
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let da = add_into(&mut grads[a.0], av.shape());
                for ((o, &x), &inp) in da.data.iter_mut().zip(&g.data).zip(&av.data) {
                    if inp > S::ZERO {
                        *o += x;
                    }
                }
            }
            Op::RowSoftmax(a) => {
                // dZ = P ⊙ (G − ⟨G,P⟩_row)
                let p = &self.nodes[i].value;
                let da = add_into(&mut grads[a.0], p.shape());
                for r in 0..p.rows {
                    let span = r * p.cols..(r + 1) * p.cols;
                    let mut dot = S::ZERO;
                    for (gx, px) in g.data[span.clone()].iter().zip(&p.data[span.clone()]) {
                        dot += *gx * *px;
                    }
                    for ((o, gx), px) in da.data[span.clone()]
                        .iter_mut()
                        .zip(&g.data[span.clone()])
                        .zip(&p.data[span])
                    {
                        *o += *px * (*gx - dot);
                    }
                }
            }
            Op::RowLogSoftmax(a) => {
                // dZ = G − P ⊙ Σ_row G, with P = exp(out)
                let l = &self.nodes[i].value;
                let da = add_into(&mut grads[a.0], l.shape());
                for r in 0..l.rows {
                    let span = r * l.cols..(r + 1) * l.cols;
                    let mut rowsum = S::ZERO;
                    for gx in &g.data[span.clone()] {
                        rowsum += *gx;
                    }
                    for ((o, gx), lx) in da.data[span.clone()]
                        .iter_mut()
                        .zip(&g.data[span.clone()])
                        .zip(&l.data[span])
                    {
                        *o += *gx - lx.exp() * rowsum;
                    }
                }
            }
            Op::Exp(a) => {
                let out = &self.nodes[i].value;
                let da = add_into(&mut grads[a.0], out.shape());
                for ((o, &x), &e) in da.data.iter_mut().zip(&g.data).zip(&out.data) {
                    *o += x * e;
                }
            }
            Op::Log(a) => {
                let av = self.value(*a);
                let da = add_into(&mut grads[a.0], av.shape());
                for ((o, &x), &inp) in da.data.iter_mut().zip(&g.data).zip(&av.data) {
                    *o += x / inp;
                }
            }
            Op::Clamp(a, lo, hi) => {
                let av = self.value(*a);
                let da = add_into(&mut grads[a.0], av.shape());
                for ((o, &x), &inp) in da.data.iter_mut().zip(&g.data).zip(&av.data) {
                    if inp > *lo && inp < *hi {
                        *o += x;
                    }
                }
            }
            Op::Min(a, b) => {
                let (av, bv) = (self.value(*a).clone(), self.value(*b).clone());
                {
                    let da = add_into(&mut grads[a.0], av.shape());
                    for (k, (o, &x)) in da.data.iter_mut().zip(&g.data).enumerate() {
                        if av.data[k] <= bv.data[k] {
                            *o += x;
                        }
                    }
                }
                let db = add_into(&mut grads[b.0], bv.shape());
                for (k, (o, &x)) in db.data.iter_mut().zip(&g.data).enumerate() {
                    if bv.data[k] < av.data[k] {
                        *o += x;
                    }
                }
            }
            Op::Spmm(id, h) => {
                let mat = &self.sparse[id.0];
                let hv = self.value(*h);
                let mut tmp = Tensor::zeros(mat.n, hv.cols);
                mat.mul_dense(g, &mut tmp);
                let dh = add_into(&mut grads[h.0], hv.shape());
                for (o, &x) in dh.data.iter_mut().zip(&tmp.data) {
                    *o += x;
                }
            }
            Op::SegmentSum(a, segments) => {
                let av = self.value(*a);
                let da = add_into(&mut grads[a.0], av.shape());
                let c = av.cols;
                for (r, &s) in segments.iter().enumerate() {
                    for k in 0..c {
                        let v = g.data[s as usize * c + k];
                        da.data[r * c + k] += v;
                    }
                }
            }
            Op::SelectColumn(a, idx) => {
                let av = self.value(*a);
                let da = add_into(&mut grads[a.0], av.shape());
                for (r, &c) in idx.iter().enumerate() {
                    da.data[r * av.cols + c as usize] += g.data[r];
                }
            }
            Op::SumAll(a) => {
                let av = self.value(*a);
                let da = add_into(&mut grads[a.0], av.shape());
                let x = g.item();
                for o in da.data.iter_mut() {
                    *o += x;
                }
            }
        }
    }
}

fn softmax_row<S: Scalar>(row: &[S], out: &mut [S]) {
    let max = row.iter().fold(row[0], |acc, &v| acc.maximum(v));
    let mut sum = S::ZERO;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

fn add_into<S: Scalar>(slot: &mut Option<Tensor<S>>, shape: (usize, usize)) -> &mut Tensor<S> {
    slot.get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
}

/// C ← alpha·op(A)·op(B) + beta·C with optional transposes.
fn dense_gemm<S: Scalar>(
    a: &Tensor<S>,
    ta: bool,
    b: &Tensor<S>,
    tb: bool,
    beta: S,
    c: &mut Tensor<S>,
) {
    let (m, k) = if ta {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (kb, n) = if tb {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    assert_eq!(k, kb, "gemm inner dimension mismatch: {k} vs {kb}");
    assert_eq!(c.shape(), (m, n), "gemm output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == S::ZERO {
            for v in c.data.iter_mut() {
                *v = S::ZERO;
            }
        }
        return;
    }
    let (rsa, csa) = if ta {
        (1, a.cols as isize)
    } else {
        (a.cols as isize, 1)
    };
    let (rsb, csb) = if tb {
        (1, b.cols as isize)
    } else {
        (b.cols as isize, 1)
    };
    unsafe {
        S::gemm(
            m,
            k,
            n,
            S::ONE,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Named parameter leaves bound to a tape, in store order.
pub struct ParamVars {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl ParamVars {
    /// Copies every parameter of the store onto the tape as a leaf.
    pub fn bind<S: Scalar>(tape: &mut Tape<S>, store: &ParamStore) -> Self {
        let mut names = Vec::new();
        let mut vars = Vec::new();
        for (name, value) in store.iter() {
            names.push(name.to_string());
            vars.push(tape.leaf(value.cast()));
        }
        ParamVars { names, vars }
    }

    /// Like [`ParamVars::bind`] but from already-materialized tensors, so
    /// callers can perturb values without touching a store.
    pub fn bind_values<S: Scalar>(tape: &mut Tape<S>, values: &[(String, Tensor<S>)]) -> Self {
        let mut names = Vec::new();
        let mut vars = Vec::new();
        for (name, value) in values {
            names.push(name.clone());
            vars.push(tape.leaf(value.clone()));
        }
        ParamVars { names, vars }
    }

    pub fn get(&self, name: &str) -> Var {
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.vars[i],
            None => panic!("unknown parameter `{name}`"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.vars.iter().copied())
    }

    /// Adds the tape's leaf gradients into the store's gradient buffers.
    pub fn accumulate_grads(&self, tape: &Tape<f32>, store: &mut ParamStore) {
        for (name, var) in self.iter() {
            if let Some(g) = tape.grad(var) {
                store.add_grad(name, g);
            }
        }
    }
}
