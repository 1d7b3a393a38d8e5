//! Reverse-mode differentiation over a linear tape of coarse tensor ops.
//!
//! Every op appends one node holding its output value. Nodes are created in
//! topological order by construction, so the backward pass is a single
//! reverse sweep that visits each node at most once.

use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
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
    MatMul { a: Var, b: Var, trans_b: bool },
    Add { a: Var, b: Var, broadcast: bool },
    Mul { a: Var, b: Var },
    Scale { a: Var, factor: T },
    SoftmaxRows { a: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<T>, rstd: Vec<T> },
    Gelu { a: Var },
    Embedding { table: Var, indices: Vec<usize> },
    ConcatRows { parts: Vec<Var> },
    SliceRows { a: Var, start: usize },
    ConcatCols { parts: Vec<Var> },
    SliceCols { a: Var, start: usize },
    Sum { a: Var },
    Mse { a: Var, target: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients of a scalar loss with respect to every leaf that requires them.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Takes ownership of a leaf gradient, zero-filled when the loss does not
    /// depend on it.
    pub fn take_or_zeros(&mut self, var: Var, len: usize) -> Vec<T> {
        self.grads
            .get_mut(var.0)
            .and_then(Option::take)
            .unwrap_or_else(|| vec![T::zero(); len])
    }
}

/// Records tensor operations for a single forward/backward pass.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    checked: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn gelu_inner<T: Scalar>(x: T) -> (T, T) {
    // tanh approximation; returns (value, derivative)
    let c = T::from_f64_lossy((2.0 / std::f64::consts::PI).sqrt());
    let k = T::from_f64_lossy(0.044715);
    let half = T::from_f64_lossy(0.5);
    let one = T::one();
    let three = T::from_f64_lossy(3.0);
    let u = c * (x + k * x * x * x);
    let th = u.tanh();
    let value = half * x * (one + th);
    let du = c * (one + three * k * x * x);
    let deriv = half * (one + th) + half * x * (one - th * th) * du;
    (value, deriv)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            checked: false,
        }
    }

    /// A tape that rejects any op producing a non-finite value.
    pub fn checked() -> Self {
        Self {
            nodes: Vec::new(),
            checked: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Input or parameter.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if self.checked && !value.all_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    /// `a·b`, or `a·bᵀ` when `trans_b` is set.
    pub fn matmul_opt(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (br, bc) = self.dims(b);
        let (kb, n) = if trans_b { (bc, br) } else { (br, bc) };
        if k != kb {
            return Err(Error::shape(
                "matmul",
                format!("({m}×{k}) · ({kb}×{n}){}", if trans_b { " [b transposed]" } else { "" }),
            ));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            self.nodes[a.0].value.data(),
            false,
            self.nodes[b.0].value.data(),
            trans_b,
            T::zero(),
            &mut out,
        );
        let value = Tensor::new(vec![m, n], out)?;
        self.push("matmul", value, Op::MatMul { a, b, trans_b }, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_opt(a, b, false)
    }

    /// `a·bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_opt(a, b, true)
    }

    /// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.nodes[a.0].value.shape().to_vec();
        let (ra, ca) = self.dims(a);
        let (rb, cb) = self.dims(b);
        let broadcast = if sa == self.nodes[b.0].value.shape() {
            false
        } else if rb == 1 && cb == ca {
            true
        } else {
            return Err(Error::shape("add", format!("({ra}×{ca}) + ({rb}×{cb})")));
        };
        let av = self.nodes[a.0].value.data();
        let bv = self.nodes[b.0].value.data();
        let data: Vec<T> = if broadcast {
            av.iter()
                .enumerate()
                .map(|(i, &x)| x + bv[i % ca])
                .collect()
        } else {
            av.iter().zip(bv).map(|(&x, &y)| x + y).collect()
        };
        let value = Tensor::new(sa, data)?;
        self.push("add", value, Op::Add { a, b, broadcast }, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.nodes[a.0].value.shape().to_vec();
        if sa != self.nodes[b.0].value.shape() {
            return Err(Error::shape(
                "mul",
                format!("{sa:?} vs {:?}", self.nodes[b.0].value.shape()),
            ));
        }
        let data = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::new(sa, data)?;
        self.push("mul", value, Op::Mul { a, b }, &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let factor = T::from_f64_lossy(factor);
        let src = &self.nodes[a.0].value;
        let value = Tensor::new(
            src.shape().to_vec(),
            src.data().iter().map(|&x| x * factor).collect(),
        )?;
        self.push("scale", value, Op::Scale { a, factor }, &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let src = self.nodes[a.0].value.data();
        let mut out = vec![T::zero(); r * c];
        for (row_in, row_out) in src.chunks(c).zip(out.chunks_mut(c)) {
            let max = row_in.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            let mut total = T::zero();
            for (o, &x) in row_out.iter_mut().zip(row_in) {
                *o = (x - max).exp();
                total = total + *o;
            }
            for o in row_out.iter_mut() {
                *o = *o / total;
            }
        }
        let value = Tensor::new(self.nodes[a.0].value.shape().to_vec(), out)?;
        self.push("softmax_rows", value, Op::SoftmaxRows { a }, &[a])
    }

    /// Row-wise layer normalization with learned gain and bias vectors.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (r, c) = self.dims(x);
        if self.nodes[gain.0].value.len() != c || self.nodes[bias.0].value.len() != c {
            return Err(Error::shape("layer_norm", format!("row width {c} vs gain/bias")));
        }
        let eps = T::from_f64_lossy(eps);
        let n = T::from_usize(c).expect("width fits");
        let src = self.nodes[x.0].value.data();
        let g = self.nodes[gain.0].value.data();
        let b = self.nodes[bias.0].value.data();
        let mut xhat = vec![T::zero(); r * c];
        let mut rstd = vec![T::zero(); r];
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            let row = &src[i * c..(i + 1) * c];
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let rs = T::one() / (var + eps).sqrt();
            rstd[i] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[i * c + j] = h;
                out[i * c + j] = h * g[j] + b[j];
            }
        }
        let value = Tensor::new(self.nodes[x.0].value.shape().to_vec(), out)?;
        self.push(
            "layer_norm",
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            &[x, gain, bias],
        )
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let src = &self.nodes[a.0].value;
        let value = Tensor::new(
            src.shape().to_vec(),
            src.data().iter().map(|&x| gelu_inner(x).0).collect(),
        )?;
        self.push("gelu", value, Op::Gelu { a }, &[a])
    }

    /// Gathers rows of `table`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (r, c) = self.dims(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= r) {
            return Err(Error::shape("embedding", format!("index {bad} into {r} rows")));
        }
        let src = self.nodes[table.0].value.data();
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let value = Tensor::new(vec![indices.len(), c], out)?;
        self.push(
            "embedding",
            value,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let c = parts
            .first()
            .map(|&p| self.dims(p).1)
            .ok_or_else(|| Error::shape("concat_rows", "no inputs"))?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, pc) = self.dims(p);
            if pc != c {
                return Err(Error::shape("concat_rows", format!("width {pc} vs {c}")));
            }
            rows += r;
            out.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::new(vec![rows, c], out)?;
        self.push(
            "concat_rows",
            value,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            parts,
        )
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if start >= end || end > r {
            return Err(Error::shape("slice_rows", format!("{start}..{end} of {r} rows")));
        }
        let data = self.nodes[a.0].value.data()[start * c..end * c].to_vec();
        let value = Tensor::new(vec![end - start, c], data)?;
        self.push("slice_rows", value, Op::SliceRows { a, start }, &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let r = parts
            .first()
            .map(|&p| self.dims(p).0)
            .ok_or_else(|| Error::shape("concat_cols", "no inputs"))?;
        let mut total = 0;
        for &p in parts {
            let (pr, pc) = self.dims(p);
            if pr != r {
                return Err(Error::shape("concat_cols", format!("rows {pr} vs {r}")));
            }
            total += pc;
        }
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                let pc = self.dims(p).1;
                out.extend_from_slice(&self.nodes[p.0].value.data()[i * pc..(i + 1) * pc]);
            }
        }
        let value = Tensor::new(vec![r, total], out)?;
        self.push(
            "concat_cols",
            value,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
            parts,
        )
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if start >= end || end > c {
            return Err(Error::shape("slice_cols", format!("{start}..{end} of {c} cols")));
        }
        let src = self.nodes[a.0].value.data();
        let mut out = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            out.extend_from_slice(&src[i * c + start..i * c + end]);
        }
        let value = Tensor::new(vec![r, end - start], out)?;
        self.push("slice_cols", value, Op::SliceCols { a, start }, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.nodes[a.0].value.data().iter().copied().sum::<T>();
        self.push("sum", Tensor::scalar(total), Op::Sum { a }, &[a])
    }

    /// Mean squared error against a constant target of the same size.
    pub fn mse(&mut self, a: Var, target: &[T]) -> Result<Var> {
        let src = self.nodes[a.0].value.data();
        if src.len() != target.len() {
            return Err(Error::shape("mse", format!("{} vs {}", src.len(), target.len())));
        }
        let n = T::from_usize(src.len()).expect("length fits");
        let total = src
            .iter()
            .zip(target)
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum::<T>()
            / n;
        self.push(
            "mse",
            Tensor::scalar(total),
            Op::Mse {
                a,
                target: target.to_vec(),
            },
            &[a],
        )
    }

    /// Back-propagates from a scalar `loss`, returning gradients of every leaf
    /// marked `requires_grad`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.nodes[loss.0].value.shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let len_of = |v: Var| self.nodes[v.0].value.len();
        macro_rules! acc {
            ($v:expr) => {{
                let v: Var = $v;
                let n = len_of(v);
                grads[v.0].get_or_insert_with(|| vec![T::zero(); n])
            }};
        }

        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, trans_b } => {
                let (m, k) = self.dims(*a);
                let n = node.value.cols();
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                if self.wants(*a) {
                    // dA = dC · Bᵀ (B stored k×n) or dC · B (B stored n×k)
                    let ga = acc!(*a);
                    T::gemm(m, n, k, g, false, bv, !*trans_b, T::one(), ga);
                }
                if self.wants(*b) {
                    let gb = acc!(*b);
                    if *trans_b {
                        // dB (n×k) = dCᵀ · A
                        T::gemm(n, m, k, g, true, av, false, T::one(), gb);
                    } else {
                        // dB (k×n) = Aᵀ · dC
                        T::gemm(k, m, n, av, true, g, false, T::one(), gb);
                    }
                }
            }
            Op::Add { a, b, broadcast } => {
                if self.wants(*a) {
                    for (d, &x) in acc!(*a).iter_mut().zip(g) {
                        *d = *d + x;
                    }
                }
                if self.wants(*b) {
                    let gb = acc!(*b);
                    if *broadcast {
                        let c = gb.len();
                        for row in g.chunks(c) {
                            for (d, &x) in gb.iter_mut().zip(row) {
                                *d = *d + x;
                            }
                        }
                    } else {
                        for (d, &x) in gb.iter_mut().zip(g) {
                            *d = *d + x;
                        }
                    }
                }
            }
            Op::Mul { a, b } => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                if self.wants(*a) {
                    for ((d, &x), &y) in acc!(*a).iter_mut().zip(g).zip(bv) {
                        *d = *d + x * y;
                    }
                }
                if self.wants(*b) {
                    for ((d, &x), &y) in acc!(*b).iter_mut().zip(g).zip(av) {
                        *d = *d + x * y;
                    }
                }
            }
            Op::Scale { a, factor } => {
                for (d, &x) in acc!(*a).iter_mut().zip(g) {
                    *d = *d + x * *factor;
                }
            }
            Op::SoftmaxRows { a } => {
                let c = node.value.cols();
                let p = node.value.data();
                let ga = acc!(*a);
                for ((prow, grow), drow) in p.chunks(c).zip(g.chunks(c)).zip(ga.chunks_mut(c)) {
                    let dot = prow.iter().zip(grow).map(|(&pi, &gi)| pi * gi).sum::<T>();
                    for ((d, &pi), &gi) in drow.iter_mut().zip(prow).zip(grow) {
                        *d = *d + pi * (gi - dot);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let c = node.value.cols();
                let n = T::from_usize(c).expect("width fits");
                let gv = self.nodes[gain.0].value.data();
                if self.wants(*x) {
                    let gx = acc!(*x);
                    for (i, grow) in g.chunks(c).enumerate() {
                        let h = &xhat[i * c..(i + 1) * c];
                        let mut mean_d = T::zero();
                        let mut mean_dh = T::zero();
                        for j in 0..c {
                            let d = grow[j] * gv[j];
                            mean_d = mean_d + d;
                            mean_dh = mean_dh + d * h[j];
                        }
                        mean_d = mean_d / n;
                        mean_dh = mean_dh / n;
                        for j in 0..c {
                            let d = grow[j] * gv[j];
                            let dx = rstd[i] * (d - mean_d - h[j] * mean_dh);
                            gx[i * c + j] = gx[i * c + j] + dx;
                        }
                    }
                }
                if self.wants(*gain) {
                    let gg = acc!(*gain);
                    for (grow, hrow) in g.chunks(c).zip(xhat.chunks(c)) {
                        for ((d, &gi), &hi) in gg.iter_mut().zip(grow).zip(hrow) {
                            *d = *d + gi * hi;
                        }
                    }
                }
                if self.wants(*bias) {
                    let gbias = acc!(*bias);
                    for grow in g.chunks(c) {
                        for (d, &gi) in gbias.iter_mut().zip(grow) {
                            *d = *d + gi;
                        }
                    }
                }
            }
            Op::Gelu { a } => {
                let av = self.nodes[a.0].value.data();
                for ((d, &gi), &x) in acc!(*a).iter_mut().zip(g).zip(av) {
                    *d = *d + gi * gelu_inner(x).1;
                }
            }
            Op::Embedding { table, indices } => {
                let c = node.value.cols();
                let gt = acc!(*table);
                for (row, &i) in g.chunks(c).zip(indices) {
                    for (d, &gi) in gt[i * c..(i + 1) * c].iter_mut().zip(row) {
                        *d = *d + gi;
                    }
                }
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let n = len_of(p);
                    if self.wants(p) {
                        for (d, &gi) in acc!(p).iter_mut().zip(&g[offset..offset + n]) {
                            *d = *d + gi;
                        }
                    }
                    offset += n;
                }
            }
            Op::SliceRows { a, start } => {
                let c = node.value.cols();
                let ga = acc!(*a);
                for (d, &gi) in ga[start * c..start * c + g.len()].iter_mut().zip(g) {
                    *d = *d + gi;
                }
            }
            Op::ConcatCols { parts } => {
                let total = node.value.cols();
                let mut col = 0;
                for &p in parts {
                    let pc = self.dims(p).1;
                    if self.wants(p) {
                        let gp = acc!(p);
                        for (i, drow) in gp.chunks_mut(pc).enumerate() {
                            let src = &g[i * total + col..i * total + col + pc];
                            for (d, &gi) in drow.iter_mut().zip(src) {
                                *d = *d + gi;
                            }
                        }
                    }
                    col += pc;
                }
            }
            Op::SliceCols { a, start } => {
                let c = self.dims(*a).1;
                let w = node.value.cols();
                let ga = acc!(*a);
                for (i, grow) in g.chunks(w).enumerate() {
                    for (d, &gi) in ga[i * c + start..i * c + start + w].iter_mut().zip(grow) {
                        *d = *d + gi;
                    }
                }
            }
            Op::Sum { a } => {
                let g0 = g[0];
                for d in acc!(*a).iter_mut() {
                    *d = *d + g0;
                }
            }
            Op::Mse { a, target } => {
                let av = self.nodes[a.0].value.data();
                let n = T::from_usize(av.len()).expect("length fits");
                let two = T::from_f64_lossy(2.0);
                let g0 = g[0];
                for ((d, &p), &t) in acc!(*a).iter_mut().zip(av).zip(target) {
                    *d = *d + g0 * two * (p - t) / n;
                }
            }
        }
    }
}
