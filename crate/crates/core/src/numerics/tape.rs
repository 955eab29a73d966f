//! Reverse-mode gradient tape over matrix values.
//!
//! The tape records the handful of operations the fixed architecture needs
//! (dense layers, gather/scatter for graph message passing, concatenation,
//! elementwise product, max pooling). Backward consumes the tape, so a tape
//! cannot be replayed after its gradients have been taken.

use super::matrix::{Matrix, Scalar};
use rand::Rng;

/// Named trainable parameters. Gradient slots and optimizer state are kept
/// aligned with the insertion order.
#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Matrix<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix<T>) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name `{name}`"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.values[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix<T>)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (ParamId(i), self.names[i].as_str(), v))
    }

    /// Total number of scalar entries across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.data().len()).sum()
    }
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-parameter gradient accumulator aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Grads<T> {
    slots: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Grads {
            slots: vec![None; store.len()],
        }
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &Matrix<T>) {
        match &mut self.slots[id.0] {
            Some(acc) => acc.add_assign(grad),
            slot @ None => *slot = Some(grad.clone()),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix<T>> {
        self.slots[id.0].as_ref()
    }

    /// Fold another accumulator in; call in a fixed order for reproducible
    /// floating-point results.
    pub fn merge(&mut self, other: Grads<T>) {
        for (slot, incoming) in self.slots.iter_mut().zip(other.slots) {
            match (slot.as_mut(), incoming) {
                (Some(acc), Some(g)) => acc.add_assign(&g),
                (None, Some(g)) => *slot = Some(g),
                _ => {}
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for slot in self.slots.iter_mut().flatten() {
            slot.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().flatten().all(|m| m.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

enum Payload<T> {
    Owned(Matrix<T>),
    Param(ParamId),
}

enum Op<T> {
    Leaf,
    Param,
    MatMul { a: Value, b: Value },
    AddRow { x: Value, bias: Value },
    Relu { x: Value },
    Dropout { x: Value, mask: Vec<T> },
    ConcatCols { parts: Vec<Value> },
    GatherRows { x: Value, idx: Vec<u32> },
    ScatterMeanRows { x: Value, idx: Vec<u32>, divisor: Vec<T> },
    Add { a: Value, b: Value },
    MulElem { a: Value, b: Value },
    MaxPoolRows { x: Value, argmax: Vec<u32> },
}

struct Node<T> {
    payload: Payload<T>,
    op: Op<T>,
}

/// Records a forward computation against a read-only parameter store.
pub struct Tape<'s, T: Scalar> {
    store: &'s ParamStore<T>,
    nodes: Vec<Node<T>>,
}

impl<'s, T: Scalar> Tape<'s, T> {
    pub fn new(store: &'s ParamStore<T>) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, v: Value) -> &Matrix<T> {
        match &self.nodes[v.0].payload {
            Payload::Owned(m) => m,
            Payload::Param(id) => self.store.value(*id),
        }
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Value {
        debug_assert!(value.is_finite(), "non-finite value produced by tape op");
        self.nodes.push(Node {
            payload: Payload::Owned(value),
            op,
        });
        Value(self.nodes.len() - 1)
    }

    /// Constant input; no gradient is tracked for it, but its gradient can
    /// still be read back after [`Tape::backward`].
    pub fn leaf(&mut self, value: Matrix<T>) -> Value {
        self.push(value, Op::Leaf)
    }

    /// Trainable parameter reference (no copy of the data is made).
    pub fn param(&mut self, id: ParamId) -> Value {
        self.nodes.push(Node {
            payload: Payload::Param(id),
            op: Op::Param,
        });
        Value(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Value {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul { a, b })
    }

    /// Broadcast-add a 1×c bias row onto every row of x.
    pub fn add_row(&mut self, x: Value, bias: Value) -> Value {
        let xm = self.value(x);
        let bm = self.value(bias);
        assert_eq!(bm.rows(), 1, "bias must be a row vector");
        assert_eq!(xm.cols(), bm.cols(), "bias width mismatch");
        let mut out = xm.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (o, b) in row.iter_mut().zip(bm.row(0)) {
                *o += *b;
            }
        }
        self.push(out, Op::AddRow { x, bias })
    }

    pub fn relu(&mut self, x: Value) -> Value {
        let out = self.value(x).map(|v| v.maximum(T::ZERO));
        self.push(out, Op::Relu { x })
    }

    /// Inverted dropout: keep with probability `keep`, scale survivors by
    /// 1/keep. Mask decisions are drawn in f64 so both precisions see the
    /// same pattern for the same rng stream.
    pub fn dropout(&mut self, x: Value, keep: f64, rng: &mut impl Rng) -> Value {
        assert!(keep > 0.0 && keep <= 1.0, "keep probability out of range");
        let xm = self.value(x);
        let inv = T::from_f64(1.0 / keep);
        let mask: Vec<T> = (0..xm.data().len())
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    inv
                } else {
                    T::ZERO
                }
            })
            .collect();
        let data: Vec<T> = xm
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let out = Matrix::from_vec(xm.rows(), xm.cols(), data);
        self.push(out, Op::Dropout { x, mask })
    }

    pub fn concat_cols(&mut self, parts: &[Value]) -> Value {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, total);
        for i in 0..rows {
            let mut at = 0;
            for &p in parts {
                let pm = self.value(p);
                assert_eq!(pm.rows(), rows, "concat row mismatch");
                let c = pm.cols();
                out.row_mut(i)[at..at + c].copy_from_slice(pm.row(i));
                at += c;
            }
        }
        self.push(out, Op::ConcatCols { parts: parts.to_vec() })
    }

    /// out[r] = x[idx[r]].
    pub fn gather_rows(&mut self, x: Value, idx: &[u32]) -> Value {
        let xm = self.value(x);
        let mut out = Matrix::zeros(idx.len(), xm.cols());
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(xm.row(i as usize));
        }
        self.push(out, Op::GatherRows { x, idx: idx.to_vec() })
    }

    /// out[i] = mean of rows r with idx[r] == i; rows with no contribution
    /// stay zero. The mean denominator is the delivery count, not the number
    /// of distinct sources.
    pub fn scatter_mean_rows(&mut self, x: Value, idx: &[u32], n_out: usize) -> Value {
        let xm = self.value(x);
        assert_eq!(xm.rows(), idx.len(), "scatter index length mismatch");
        let mut counts = vec![0usize; n_out];
        for &i in idx {
            counts[i as usize] += 1;
        }
        let divisor: Vec<T> = counts
            .iter()
            .map(|&c| if c == 0 { T::ZERO } else { T::from_f64(c as f64) })
            .collect();
        let mut out = Matrix::zeros(n_out, xm.cols());
        for (r, &i) in idx.iter().enumerate() {
            let src = xm.row(r);
            let dst = out.row_mut(i as usize);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
        for i in 0..n_out {
            if counts[i] > 0 {
                let d = divisor[i];
                for v in out.row_mut(i) {
                    *v = *v / d;
                }
            }
        }
        self.push(out, Op::ScatterMeanRows { x, idx: idx.to_vec(), divisor })
    }

    pub fn add(&mut self, a: Value, b: Value) -> Value {
        let am = self.value(a);
        let bm = self.value(b);
        assert_eq!(am.shape(), bm.shape(), "add shape mismatch");
        let data = am
            .data()
            .iter()
            .zip(bm.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = Matrix::from_vec(am.rows(), am.cols(), data);
        self.push(out, Op::Add { a, b })
    }

    pub fn mul_elem(&mut self, a: Value, b: Value) -> Value {
        let am = self.value(a);
        let bm = self.value(b);
        assert_eq!(am.shape(), bm.shape(), "mul shape mismatch");
        let data = am
            .data()
            .iter()
            .zip(bm.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Matrix::from_vec(am.rows(), am.cols(), data);
        self.push(out, Op::MulElem { a, b })
    }

    /// Column-wise max over rows, producing a 1×c row. Ties resolve to the
    /// lowest row index.
    pub fn max_pool_rows(&mut self, x: Value) -> Value {
        let xm = self.value(x);
        assert!(xm.rows() > 0, "max pool over empty matrix");
        let cols = xm.cols();
        let mut best = xm.row(0).to_vec();
        let mut argmax = vec![0u32; cols];
        for r in 1..xm.rows() {
            for (j, &v) in xm.row(r).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = r as u32;
                }
            }
        }
        let out = Matrix::from_vec(1, cols, best);
        self.push(out, Op::MaxPoolRows { x, argmax })
    }

    /// Run reverse-mode accumulation from the given seed gradients.
    /// Parameter gradients are folded into `param_grads`; gradients of any
    /// other node (e.g. leaves) can be read from the returned structure.
    pub fn backward(self, seeds: &[(Value, Matrix<T>)], param_grads: &mut Grads<T>) -> NodeGrads<T> {
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, seed) in seeds {
            assert_eq!(
                self.value(*v).shape(),
                seed.shape(),
                "seed gradient shape mismatch"
            );
            match &mut grads[v.0] {
                Some(g) => g.add_assign(seed),
                slot @ None => *slot = Some(seed.clone()),
            }
        }

        macro_rules! add_grad {
            ($idx:expr, $g:expr) => {{
                let g = $g;
                match &mut grads[$idx] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }};
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(gy) = grads[i].take() else { continue };
            debug_assert!(gy.is_finite(), "non-finite gradient at node {i}");
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(gy); // keep for caller reads
                }
                Op::Param => {
                    if let Payload::Param(id) = &self.nodes[i].payload {
                        param_grads.accumulate(*id, &gy);
                    }
                    grads[i] = Some(gy);
                }
                Op::MatMul { a, b } => {
                    let da = gy.matmul_nt(self.value(*b));
                    let db = self.value(*a).matmul_tn(&gy);
                    add_grad!(a.0, da);
                    add_grad!(b.0, db);
                }
                Op::AddRow { x, bias } => {
                    let mut db = Matrix::zeros(1, gy.cols());
                    for r in 0..gy.rows() {
                        let dst = db.row_mut(0);
                        for (d, s) in dst.iter_mut().zip(gy.row(r)) {
                            *d += *s;
                        }
                    }
                    add_grad!(bias.0, db);
                    add_grad!(x.0, gy);
                }
                Op::Relu { x } => {
                    let y = match &self.nodes[i].payload {
                        Payload::Owned(m) => m,
                        Payload::Param(_) => unreachable!(),
                    };
                    let data = gy
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(&g, &v)| if v > T::ZERO { g } else { T::ZERO })
                        .collect();
                    add_grad!(x.0, Matrix::from_vec(gy.rows(), gy.cols(), data));
                }
                Op::Dropout { x, mask } => {
                    let data = gy
                        .data()
                        .iter()
                        .zip(mask)
                        .map(|(&g, &m)| g * m)
                        .collect();
                    add_grad!(x.0, Matrix::from_vec(gy.rows(), gy.cols(), data));
                }
                Op::ConcatCols { parts } => {
                    let mut at = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        let mut dp = Matrix::zeros(gy.rows(), c);
                        for r in 0..gy.rows() {
                            dp.row_mut(r).copy_from_slice(&gy.row(r)[at..at + c]);
                        }
                        add_grad!(p.0, dp);
                        at += c;
                    }
                }
                Op::GatherRows { x, idx } => {
                    let xm = self.value(*x);
                    let mut dx = Matrix::zeros(xm.rows(), xm.cols());
                    for (r, &srci) in idx.iter().enumerate() {
                        let dst = dx.row_mut(srci as usize);
                        for (d, s) in dst.iter_mut().zip(gy.row(r)) {
                            *d += *s;
                        }
                    }
                    add_grad!(x.0, dx);
                }
                Op::ScatterMeanRows { x, idx, divisor } => {
                    let mut dx = Matrix::zeros(idx.len(), gy.cols());
                    for (r, &dsti) in idx.iter().enumerate() {
                        let d = divisor[dsti as usize];
                        let src = gy.row(dsti as usize);
                        let dst = dx.row_mut(r);
                        for (o, s) in dst.iter_mut().zip(src) {
                            *o = *s / d;
                        }
                    }
                    add_grad!(x.0, dx);
                }
                Op::Add { a, b } => {
                    add_grad!(a.0, gy.clone());
                    add_grad!(b.0, gy);
                }
                Op::MulElem { a, b } => {
                    let bm = self.value(*b);
                    let da = Matrix::from_vec(
                        gy.rows(),
                        gy.cols(),
                        gy.data()
                            .iter()
                            .zip(bm.data())
                            .map(|(&g, &v)| g * v)
                            .collect(),
                    );
                    let am = self.value(*a);
                    let db = Matrix::from_vec(
                        gy.rows(),
                        gy.cols(),
                        gy.data()
                            .iter()
                            .zip(am.data())
                            .map(|(&g, &v)| g * v)
                            .collect(),
                    );
                    add_grad!(a.0, da);
                    add_grad!(b.0, db);
                }
                Op::MaxPoolRows { x, argmax } => {
                    let xm = self.value(*x);
                    let mut dx = Matrix::zeros(xm.rows(), xm.cols());
                    for (j, &r) in argmax.iter().enumerate() {
                        let v = dx.get(r as usize, j) + gy.get(0, j);
                        dx.set(r as usize, j, v);
                    }
                    add_grad!(x.0, dx);
                }
            }
        }

        NodeGrads { grads }
    }
}

/// Gradients of individual tape nodes, kept after backward for reading out
/// leaf gradients (e.g. the gradient flowing into a graph embedding).
pub struct NodeGrads<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> NodeGrads<T> {
    pub fn get(&self, v: Value) -> Option<&Matrix<T>> {
        self.grads[v.0].as_ref()
    }
}
