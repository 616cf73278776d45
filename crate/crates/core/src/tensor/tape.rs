use super::{numel, Element, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    ScaleRows(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    MatMul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Abs(Var),
    Exp(Var),
    Log(Var),
    Recip(Var),
    ClampMin(Var, T),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Concat(Vec<Var>, usize),
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    StraightThrough(Var),
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Ordered record of primitive operations. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order for the
/// backward sweep.
#[derive(Debug)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of the `requires_grad` leaves produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T = f32> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<T>> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

fn add_into<T: Element>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
}

/// Outer/axis/inner decomposition for axis-wise slicing and concatenation.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        if n.shape.is_empty() {
            Tensor::scalar(n.value[0])
        } else {
            Tensor::new(&n.shape, n.value.clone()).expect("recorded shapes are valid")
        }
    }

    /// Records a leaf; its trainability follows `tensor.is_trainable()`.
    pub fn leaf(&mut self, tensor: &Tensor<T>) -> Var {
        self.push(
            tensor.shape().to_vec(),
            tensor.data().to_vec(),
            Op::Leaf,
            tensor.is_trainable(),
        )
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        if numel(shape) != data.len() {
            return Err(Error::Shape {
                op: "constant",
                shapes: format!("{shape:?} with {} values", data.len()),
            });
        }
        Ok(self.push(shape.to_vec(), data, Op::Leaf, false))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, &[sa, sb]));
        }
        Ok(())
    }

    fn zip_map(&mut self, op: Op<T>, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Var {
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(&[a, b]);
        self.push(shape, value, op, rg)
    }

    fn map(&mut self, op: Op<T>, x: Var, f: impl Fn(T) -> T) -> Var {
        let value = self.nodes[x.0].value.iter().map(|&v| f(v)).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.rg(&[x]);
        self.push(shape, value, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_map(Op::Add(a, b), a, b, |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_map(Op::Sub(a, b), a, b, |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_map(Op::Mul(a, b), a, b, |x, y| x * y))
    }

    /// Adds a bias vector over the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sx.is_empty() || sb.len() != 1 || sb[0] != sx[sx.len() - 1] {
            return Err(Error::shape("add_bias", &[sx, sb]));
        }
        let n = sb[0];
        let b = &self.nodes[bias.0].value;
        let mut value = self.nodes[x.0].value.clone();
        for row in value.chunks_exact_mut(n) {
            add_into(row, b);
        }
        let shape = sx.to_vec();
        let rg = self.rg(&[x, bias]);
        Ok(self.push(shape, value, Op::AddBias(x, bias), rg))
    }

    /// Multiplies each row of an `[m, n]` matrix by the matching entry of an
    /// `[m]` vector.
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (sx, ss) = (self.shape(x), self.shape(s));
        if sx.len() != 2 || ss.len() != 1 || ss[0] != sx[0] {
            return Err(Error::shape("scale_rows", &[sx, ss]));
        }
        let n = sx[1];
        let sv = &self.nodes[s.0].value;
        let mut value = self.nodes[x.0].value.clone();
        for (row, &c) in value.chunks_exact_mut(n).zip(sv) {
            row.iter_mut().for_each(|v| *v = *v * c);
        }
        let shape = sx.to_vec();
        let rg = self.rg(&[x, s]);
        Ok(self.push(shape, value, Op::ScaleRows(x, s), rg))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.map(Op::Scale(x, c), x, |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        self.map(Op::AddScalar(x), x, |v| v + c)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", &[sa, sb]));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut value = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            &self.nodes[a.0].value,
            false,
            &self.nodes[b.0].value,
            false,
            T::zero(),
            &mut value,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![m, n], value, Op::MatMul(a, b), rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(Op::Sigmoid(x), x, |v| T::one() / (T::one() + (-v).exp()))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(Op::Tanh(x), x, |v| v.tanh())
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(Op::Relu(x), x, |v| v.max(T::zero()))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.map(Op::Abs(x), x, |v| v.abs())
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map(Op::Exp(x), x, |v| v.exp())
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.map(Op::Log(x), x, |v| v.ln())
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.map(Op::Recip(x), x, |v| v.recip())
    }

    /// `max(x, lo)`; the gradient is zero wherever the floor is active.
    pub fn clamp_min(&mut self, x: Var, lo: T) -> Var {
        self.map(Op::ClampMin(x, lo), x, |v| v.max(lo))
    }

    fn last_axis(&self, op: &'static str, x: Var) -> Result<(usize, usize)> {
        let s = self.shape(x);
        match s.last() {
            Some(&n) => Ok((numel(s) / n, n)),
            None => Err(Error::shape(op, &[s])),
        }
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let (rows, n) = self.last_axis("softmax", x)?;
        let src = &self.nodes[x.0].value;
        let mut value = vec![T::zero(); src.len()];
        for r in 0..rows {
            softmax_row(&src[r * n..(r + 1) * n], &mut value[r * n..(r + 1) * n]);
        }
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(shape, value, Op::Softmax(x), rg))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let (rows, n) = self.last_axis("log_softmax", x)?;
        let src = &self.nodes[x.0].value;
        let mut value = vec![T::zero(); src.len()];
        for r in 0..rows {
            let row = &src[r * n..(r + 1) * n];
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = row
                .iter()
                .map(|&v| (v - max).to_f64().unwrap().exp())
                .sum::<f64>()
                .ln();
            let lse = max + T::from_f64_lossy(lse);
            for (o, &v) in value[r * n..(r + 1) * n].iter_mut().zip(row) {
                *o = v - lse;
            }
        }
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(shape, value, Op::LogSoftmax(x), rg))
    }

    fn reduce(&mut self, op: Op<T>, x: Var, mean: bool) -> Var {
        let src = &self.nodes[x.0].value;
        let mut acc: f64 = src.iter().map(|v| v.to_f64().unwrap()).sum();
        if mean {
            acc /= src.len() as f64;
        }
        let rg = self.rg(&[x]);
        self.push(Vec::new(), vec![T::from_f64_lossy(acc)], op, rg)
    }

    /// Sum of all elements (accumulated in f64).
    pub fn sum(&mut self, x: Var) -> Var {
        self.reduce(Op::Sum(x), x, false)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        self.reduce(Op::Mean(x), x, true)
    }

    /// Sum over the last axis: `[.., n] -> [..]`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let (rows, n) = self.last_axis("row_sum", x)?;
        let src = &self.nodes[x.0].value;
        let value = (0..rows)
            .map(|r| {
                let s: f64 = src[r * n..(r + 1) * n]
                    .iter()
                    .map(|v| v.to_f64().unwrap())
                    .sum();
                T::from_f64_lossy(s)
            })
            .collect();
        let mut shape = self.shape(x).to_vec();
        shape.pop();
        if shape.is_empty() {
            shape.push(1);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(shape, value, Op::RowSum(x), rg))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = *xs
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", &[&base]));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &[&base, s]));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_at_axis(&base, axis);
        let mut value = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let len = self.nodes[v.0].shape[axis] * inner;
                value.extend_from_slice(&self.nodes[v.0].value[o * len..(o + 1) * len]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.rg(xs);
        Ok(self.push(shape, value, Op::Concat(xs.to_vec(), axis), rg))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || len == 0 || start + len > s[axis] {
            return Err(Error::Shape {
                op: "slice",
                shapes: format!("{s:?} axis {axis} range {start}..{}", start + len),
            });
        }
        let (outer, dim, inner) = split_at_axis(&s, axis);
        let src = &self.nodes[x.0].value;
        let mut value = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * dim + start) * inner;
            value.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let rg = self.rg(&[x]);
        Ok(self.push(shape, value, Op::Slice { x, axis, start }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let s = self.shape(x);
        if numel(s) != numel(shape) || shape.contains(&0) {
            return Err(Error::shape("reshape", &[s, shape]));
        }
        let value = self.nodes[x.0].value.clone();
        let rg = self.rg(&[x]);
        Ok(self.push(shape.to_vec(), value, Op::Reshape(x), rg))
    }

    /// Gathers rows of a `[v, e]` table: output `[ids.len(), e]`.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table);
        if s.len() != 2 || ids.is_empty() {
            return Err(Error::shape("embedding_lookup", &[s]));
        }
        let (rows, e) = (s[0], s[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape {
                op: "embedding_lookup",
                shapes: format!("{s:?} indexed by id {bad}"),
            });
        }
        let src = &self.nodes[table.0].value;
        let mut value = Vec::with_capacity(ids.len() * e);
        for &i in ids {
            value.extend_from_slice(&src[i * e..(i + 1) * e]);
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            vec![ids.len(), e],
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Elementwise product with a fixed mask (inverted-dropout scaling is the
    /// caller's business: mask entries are `0` or `1/(1-p)`).
    pub fn dropout_mask_apply(&mut self, x: Var, mask: Vec<T>) -> Result<Var> {
        let s = self.shape(x);
        if mask.len() != numel(s) {
            return Err(Error::Shape {
                op: "dropout_mask_apply",
                shapes: format!("{s:?} vs mask of {}", mask.len()),
            });
        }
        let value = self.nodes[x.0]
            .value
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let shape = s.to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(shape, value, Op::Dropout { x, mask }, rg))
    }

    /// Forward value `hard`, backward identity into `soft`.
    pub fn straight_through(&mut self, soft: Var, hard: Vec<T>) -> Result<Var> {
        let s = self.shape(soft);
        if hard.len() != numel(s) {
            return Err(Error::Shape {
                op: "straight_through",
                shapes: format!("{s:?} vs {} hard values", hard.len()),
            });
        }
        let shape = s.to_vec();
        let rg = self.rg(&[soft]);
        Ok(self.push(shape, hard, Op::StraightThrough(soft), rg))
    }

    /// Reverse sweep from a scalar `loss`. Returns gradients for every
    /// trainable leaf (zeros for leaves the loss does not reach) and clears
    /// the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("backward on an empty tape"));
        }
        let ls = self.shape(loss);
        if numel(ls) != 1 {
            return Err(Error::NonScalarLoss(ls.to_vec()));
        }
        let nodes = std::mem::take(&mut self.nodes);
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            backprop(&nodes, i, &g, &mut grads);
        }

        let out = nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| {
                if matches!(n.op, Op::Leaf) && n.requires_grad {
                    Some(g.unwrap_or_else(|| vec![T::zero(); n.value.len()]))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { grads: out })
    }
}

pub(crate) fn softmax_row<T: Element>(src: &[T], dst: &mut [T]) {
    let max = src.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut total = 0f64;
    for (o, &v) in dst.iter_mut().zip(src) {
        let e = (v - max).exp();
        total += e.to_f64().unwrap();
        *o = e;
    }
    let inv = T::from_f64_lossy(1.0 / total);
    dst.iter_mut().for_each(|o| *o = *o * inv);
}

fn grad_slot<'g, T: Element>(
    nodes: &[Node<T>],
    grads: &'g mut [Option<Vec<T>>],
    v: Var,
) -> Option<&'g mut Vec<T>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let len = nodes[v.0].value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
}

fn backprop<T: Element>(nodes: &[Node<T>], i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let node = &nodes[i];
    let y = &node.value;
    let val = |v: Var| -> &[T] { &nodes[v.0].value };
    macro_rules! slot {
        ($v:expr) => {
            grad_slot(nodes, grads, $v)
        };
    }
    let unary = |grads: &mut [Option<Vec<T>>], x: Var, f: &dyn Fn(usize) -> T| {
        if let Some(gx) = grad_slot(nodes, grads, x) {
            for (j, d) in gx.iter_mut().enumerate() {
                *d = *d + g[j] * f(j);
            }
        }
    };

    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            if let Some(ga) = slot!(*a) {
                add_into(ga, g);
            }
            if let Some(gb) = slot!(*b) {
                add_into(gb, g);
            }
        }
        Op::Sub(a, b) => {
            if let Some(ga) = slot!(*a) {
                add_into(ga, g);
            }
            if let Some(gb) = slot!(*b) {
                gb.iter_mut().zip(g).for_each(|(d, &s)| *d = *d - s);
            }
        }
        Op::Mul(a, b) => {
            let (va, vb) = (val(*a), val(*b));
            if let Some(ga) = slot!(*a) {
                for j in 0..g.len() {
                    ga[j] = ga[j] + g[j] * vb[j];
                }
            }
            if let Some(gb) = slot!(*b) {
                for j in 0..g.len() {
                    gb[j] = gb[j] + g[j] * va[j];
                }
            }
        }
        Op::AddBias(x, b) => {
            if let Some(gx) = slot!(*x) {
                add_into(gx, g);
            }
            if let Some(gb) = slot!(*b) {
                let n = gb.len();
                for row in g.chunks_exact(n) {
                    add_into(gb, row);
                }
            }
        }
        Op::ScaleRows(x, s) => {
            let n = node.shape[1];
            let (vx, vs) = (val(*x), val(*s));
            if let Some(gx) = slot!(*x) {
                for ((dst, src), &c) in gx.chunks_exact_mut(n).zip(g.chunks_exact(n)).zip(vs) {
                    dst.iter_mut().zip(src).for_each(|(d, &v)| *d = *d + v * c);
                }
            }
            if let Some(gs) = slot!(*s) {
                for ((d, src), xs) in gs.iter_mut().zip(g.chunks_exact(n)).zip(vx.chunks_exact(n)) {
                    *d = *d + src.iter().zip(xs).map(|(&a, &b)| a * b).fold(T::zero(), |acc, v| acc + v);
                }
            }
        }
        Op::Scale(x, c) => unary(grads, *x, &|_| *c),
        Op::AddScalar(x) => unary(grads, *x, &|_| T::one()),
        Op::MatMul(a, b) => {
            let (m, n) = (node.shape[0], node.shape[1]);
            let k = nodes[a.0].shape[1];
            if let Some(ga) = slot!(*a) {
                // dA = G * B^T
                T::gemm(m, n, k, g, false, val(*b), true, T::one(), ga);
            }
            if let Some(gb) = slot!(*b) {
                // dB = A^T * G
                T::gemm(k, m, n, val(*a), true, g, false, T::one(), gb);
            }
        }
        Op::Sigmoid(x) => unary(grads, *x, &|j| y[j] * (T::one() - y[j])),
        Op::Tanh(x) => unary(grads, *x, &|j| T::one() - y[j] * y[j]),
        Op::Relu(x) => {
            let vx = val(*x);
            unary(grads, *x, &|j| {
                if vx[j] > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            })
        }
        Op::Abs(x) => {
            let vx = val(*x);
            unary(grads, *x, &|j| {
                if vx[j] > T::zero() {
                    T::one()
                } else if vx[j] < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            })
        }
        Op::Exp(x) => unary(grads, *x, &|j| y[j]),
        Op::Log(x) => {
            let vx = val(*x);
            unary(grads, *x, &|j| vx[j].recip())
        }
        Op::Recip(x) => unary(grads, *x, &|j| -(y[j] * y[j])),
        Op::ClampMin(x, lo) => {
            let vx = val(*x);
            unary(grads, *x, &|j| if vx[j] > *lo { T::one() } else { T::zero() })
        }
        Op::Softmax(x) => {
            let n = *node.shape.last().unwrap();
            if let Some(gx) = slot!(*x) {
                for r in 0..g.len() / n {
                    let range = r * n..(r + 1) * n;
                    let dot: T = g[range.clone()]
                        .iter()
                        .zip(&y[range.clone()])
                        .map(|(&a, &b)| a * b)
                        .sum();
                    for j in range {
                        gx[j] = gx[j] + y[j] * (g[j] - dot);
                    }
                }
            }
        }
        Op::LogSoftmax(x) => {
            let n = *node.shape.last().unwrap();
            if let Some(gx) = slot!(*x) {
                for r in 0..g.len() / n {
                    let range = r * n..(r + 1) * n;
                    let total: T = g[range.clone()].iter().copied().sum();
                    for j in range {
                        gx[j] = gx[j] + g[j] - y[j].exp() * total;
                    }
                }
            }
        }
        Op::Sum(x) => {
            if let Some(gx) = slot!(*x) {
                gx.iter_mut().for_each(|d| *d = *d + g[0]);
            }
        }
        Op::Mean(x) => {
            let inv = T::one() / T::from_usize(val(*x).len()).unwrap();
            if let Some(gx) = slot!(*x) {
                gx.iter_mut().for_each(|d| *d = *d + g[0] * inv);
            }
        }
        Op::RowSum(x) => {
            let n = *nodes[x.0].shape.last().unwrap();
            if let Some(gx) = slot!(*x) {
                for (j, d) in gx.iter_mut().enumerate() {
                    *d = *d + g[j / n];
                }
            }
        }
        Op::Concat(xs, axis) => {
            let (outer, total, inner) = split_at_axis(&node.shape, *axis);
            let mut offset = 0;
            for &v in xs {
                let dim = nodes[v.0].shape[*axis];
                if let Some(gv) = slot!(v) {
                    for o in 0..outer {
                        let src = (o * total + offset) * inner;
                        add_into(
                            &mut gv[o * dim * inner..(o + 1) * dim * inner],
                            &g[src..src + dim * inner],
                        );
                    }
                }
                offset += dim;
            }
        }
        Op::Slice { x, axis, start } => {
            let (outer, dim, inner) = split_at_axis(&nodes[x.0].shape, *axis);
            let len = node.shape[*axis];
            if let Some(gx) = slot!(*x) {
                for o in 0..outer {
                    let dst = (o * dim + start) * inner;
                    add_into(
                        &mut gx[dst..dst + len * inner],
                        &g[o * len * inner..(o + 1) * len * inner],
                    );
                }
            }
        }
        Op::Reshape(x) => {
            if let Some(gx) = slot!(*x) {
                add_into(gx, g);
            }
        }
        Op::Embedding { table, ids } => {
            let e = node.shape[1];
            if let Some(gt) = slot!(*table) {
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * e..(id + 1) * e], &g[r * e..(r + 1) * e]);
                }
            }
        }
        Op::Dropout { x, mask } => unary(grads, *x, &|j| mask[j]),
        Op::StraightThrough(soft) => {
            if let Some(gs) = slot!(*soft) {
                add_into(gs, g);
            }
        }
    }
}
