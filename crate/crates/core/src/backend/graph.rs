//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and enough saved
//! state to compute the vector-Jacobian product later. Nodes only reference
//! earlier nodes, so insertion order is a topological order and the tape is
//! acyclic by construction. `backward` walks it once in reverse.

use rand::Rng;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{lit, Real, Tensor};
use crate::error::{shape_err, Error, Result};

/// Epsilon inside the layer-norm denominator.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of a user-supplied unary primitive:
/// `(input, output, output_grad) -> input_grad`.
pub type VjpFn<T> = Box<dyn Fn(&Tensor<T>, &Tensor<T>, &[T]) -> Vec<T>>;

#[derive(Clone, Copy, Debug)]
struct MatDims {
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    a_stride: usize,
    b_stride: usize,
    // (row stride, col stride) of op(A) and op(B)
    sa: (isize, isize),
    sb: (isize, isize),
}

enum Op<T> {
    Leaf,
    Matmul { a: Var, b: Var, dims: MatDims },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    MulRows(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Elu1(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Option<Var>, beta: Option<Var>, xhat: Vec<T>, rstd: Vec<T> },
    NormalizeSum { x: Var, sums: Vec<T> },
    SetContract { w: Var, v: Var, batch: usize, m: usize, n: usize, d: usize },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Reshape(Var),
    Transpose(Var),
    Outer(Var, Var),
    Dropout { x: Var, mask: Vec<T> },
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<T> },
    Sum(Var),
    Custom { x: Var, vjp: VjpFn<T> },
}

/// A recorded computation.
pub struct Graph<T: Real> {
    values: Vec<Tensor<T>>,
    ops: Vec<Op<T>>,
    requires_grad: Vec<bool>,
    grads: Vec<Option<Vec<T>>>,
    param_vars: Vec<Option<Var>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            values: Vec::new(),
            ops: Vec::new(),
            requires_grad: Vec::new(),
            grads: Vec::new(),
            param_vars: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.requires_grad.push(requires_grad);
        Var(self.values.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.requires_grad[v.0])
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.values[v.0]
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.values[v.0].shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.requires_grad[v.0]
    }

    /// Gradient of the last `backward` call with respect to `v`, if any
    /// flowed into it.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::from_vec(self.values[v.0].shape(), g.clone()).expect("grad shape"))
    }

    // ---------------------------------------------------------------- leaves

    /// A constant input that never receives gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf that receives gradient.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Registers a parameter from `store` as a gradient-tracking leaf. Repeated
    /// calls for the same id return the same node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let idx = id.index();
        if self.param_vars.len() <= idx {
            self.param_vars.resize(idx + 1, None);
        }
        if let Some(v) = self.param_vars[idx] {
            return v;
        }
        let v = self.leaf(store.get(id).clone());
        self.param_vars[idx] = Some(v);
        v
    }

    /// Collects gradients of every registered parameter, zeros for unused ones.
    pub fn param_grads(&self, store: &ParamStore<T>) -> Grads<T> {
        let mut grads = Grads::zeros_like(store);
        for (idx, v) in self.param_vars.iter().enumerate() {
            if let Some(v) = v {
                if let Some(Some(g)) = self.grads.get(v.0) {
                    grads.slot_mut(idx).copy_from_slice(g);
                }
            }
        }
        grads
    }

    // ---------------------------------------------------------------- linear algebra

    /// Matrix product `op(a) @ op(b)` where `op` optionally transposes the
    /// last two axes.
    ///
    /// Supported layouts: `[.., m, k] @ [k, n]` (leading axes of `a` are
    /// flattened), and batched `[B, m, k] @ [B, k, n]` where either side may
    /// be rank 2 and is then broadcast over the batch.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let ash = self.shape(a).to_vec();
        let bsh = self.shape(b).to_vec();
        if ash.len() < 2 || bsh.len() < 2 || bsh.len() > 3 {
            return shape_err(format!("matmul of {ash:?} and {bsh:?}"));
        }
        let (bk, bn) = if tb { (bsh[bsh.len() - 1], bsh[bsh.len() - 2]) } else { (bsh[bsh.len() - 2], bsh[bsh.len() - 1]) };
        let b_cols = bsh[bsh.len() - 1];
        let sb = if tb { (1, b_cols as isize) } else { (b_cols as isize, 1) };

        let (dims, out_shape) = if !ta && bsh.len() == 2 {
            let k = *ash.last().unwrap();
            if k != bk {
                return shape_err(format!("matmul inner dims: {ash:?} @ {bsh:?} (tb={tb})"));
            }
            let m = ash.iter().product::<usize>() / k;
            let mut out = ash[..ash.len() - 1].to_vec();
            out.push(bn);
            let dims = MatDims { batch: 1, m, k, n: bn, a_stride: 0, b_stride: 0, sa: (k as isize, 1), sb };
            (dims, out)
        } else {
            if ash.len() > 3 {
                return shape_err(format!("batched matmul needs rank <= 3, got {ash:?}"));
            }
            let ab = if ash.len() == 3 { Some(ash[0]) } else { None };
            let bb = if bsh.len() == 3 { Some(bsh[0]) } else { None };
            let batch = match (ab, bb) {
                (Some(x), Some(y)) if x != y => {
                    return shape_err(format!("batch sizes differ: {ash:?} @ {bsh:?}"));
                }
                (Some(x), _) | (_, Some(x)) => x,
                (None, None) => 1,
            };
            let (ar, ac) = (ash[ash.len() - 2], ash[ash.len() - 1]);
            let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
            if k != bk {
                return shape_err(format!("matmul inner dims: {ash:?} (ta={ta}) @ {bsh:?} (tb={tb})"));
            }
            let sa = if ta { (1, ac as isize) } else { (ac as isize, 1) };
            let dims = MatDims {
                batch,
                m,
                k,
                n: bn,
                a_stride: if ab.is_some() { ar * ac } else { 0 },
                b_stride: if bb.is_some() { bsh[1] * bsh[2] } else { 0 },
                sa,
                sb,
            };
            let out = if ab.is_some() || bb.is_some() { vec![batch, m, bn] } else { vec![m, bn] };
            (dims, out)
        };

        let mut out = vec![T::zero(); dims.batch * dims.m * dims.n];
        {
            let av = self.values[a.0].data();
            let bv = self.values[b.0].data();
            for bi in 0..dims.batch {
                gemm(
                    (dims.m, dims.k, dims.n),
                    &av[bi * dims.a_stride..],
                    dims.sa,
                    &bv[bi * dims.b_stride..],
                    dims.sb,
                    &mut out[bi * dims.m * dims.n..],
                    (dims.n as isize, 1),
                    T::zero(),
                );
            }
        }
        let rg = self.rg(&[a, b]);
        let value = Tensor::from_vec(&out_shape, out)?;
        Ok(self.push(value, Op::Matmul { a, b, dims }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// Batched outer product over the last axis: `[.., m] x [.., n] -> [.., m, n]`.
    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if ash[..ash.len() - 1] != bsh[..bsh.len() - 1] {
            return shape_err(format!("outer of {ash:?} and {bsh:?}"));
        }
        let (m, n) = (*ash.last().unwrap(), *bsh.last().unwrap());
        let rows = self.values[a.0].numel() / m;
        let mut out = vec![T::zero(); rows * m * n];
        {
            let av = self.values[a.0].data();
            let bv = self.values[b.0].data();
            for r in 0..rows {
                let brow = &bv[r * n..(r + 1) * n];
                for i in 0..m {
                    let ai = av[r * m + i];
                    let dst = &mut out[(r * m + i) * n..(r * m + i + 1) * n];
                    for (d, &bj) in dst.iter_mut().zip(brow) {
                        *d = ai * bj;
                    }
                }
            }
        }
        let mut shape = ash.clone();
        shape.push(n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Outer(a, b), rg))
    }

    // ---------------------------------------------------------------- elementwise

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("{what}: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>, what: &str) -> Result<Var> {
        self.same_shape(a, b, what)?;
        let data = self.values[a.0]
            .data()
            .iter()
            .zip(self.values[b.0].data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::from_vec(self.shape(a), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    /// Adds `bias` (shape `[n]`) to every row of `x` (`[.., n]`).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = self.values[x.0].last_dim();
        if self.shape(bias) != [n] {
            return shape_err(format!("bias {:?} for input {:?}", self.shape(bias), self.shape(x)));
        }
        let mut value = self.values[x.0].clone();
        let b = self.values[bias.0].data().to_vec();
        for row in value.data_mut().chunks_mut(n) {
            for (v, &bj) in row.iter_mut().zip(&b) {
                *v += bj;
            }
        }
        let rg = self.rg(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), rg))
    }

    /// Scales row `r` of `x` (viewed as `[rows, n]`) by `s[r]`.
    pub fn mul_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let rows = self.values[x.0].rows();
        if self.values[s.0].numel() != rows {
            return shape_err(format!("row scale {:?} for {:?}", self.shape(s), self.shape(x)));
        }
        let n = self.values[x.0].last_dim();
        let mut value = self.values[x.0].clone();
        let sv = self.values[s.0].data().to_vec();
        for (row, &sr) in value.data_mut().chunks_mut(n).zip(&sv) {
            row.iter_mut().for_each(|v| *v *= sr);
        }
        let rg = self.rg(&[x, s]);
        Ok(self.push(value, Op::MulRows(x, s), rg))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value = self.values[x.0].map(|v| v * c);
        let rg = self.rg(&[x]);
        self.push(value, Op::Scale(x, c), rg)
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        let value = self.values[x.0].map(|v| v + c);
        let rg = self.rg(&[x]);
        self.push(value, Op::AddScalar(x), rg)
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.values[x.0].map(f);
        let rg = self.rg(&[x]);
        self.push(value, op, rg)
    }

    /// `ELU(x) + 1`: `x + 1` for `x >= 0`, `exp(x)` otherwise.
    pub fn elu_plus_one(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v >= T::zero() { v + T::one() } else { v.exp() }, Op::Elu1(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, |v| T::one() / (T::one() + (-v).exp()), Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.tanh(), Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.exp(), Op::Exp(x))
    }

    // ---------------------------------------------------------------- row-wise

    /// Softmax over the last axis, stabilized by max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = &self.values[x.0];
        if !xv.all_finite() {
            return Err(Error::NonFinite("softmax input".into()));
        }
        let n = xv.last_dim();
        let mut out = xv.clone();
        for row in out.data_mut().chunks_mut(n) {
            softmax_in_place(row);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Softmax(x), rg))
    }

    /// Layer normalization over the last axis with optional affine parameters.
    pub fn layer_norm(&mut self, x: Var, gamma: Option<Var>, beta: Option<Var>) -> Result<Var> {
        let xv = &self.values[x.0];
        let n = xv.last_dim();
        for p in [gamma, beta].into_iter().flatten() {
            if self.values[p.0].shape() != [n] {
                return shape_err(format!("layer norm affine {:?} for {:?}", self.shape(p), xv.shape()));
            }
        }
        let rows = xv.rows();
        let nf: T = lit(n as f64);
        let eps: T = lit(LAYER_NORM_EPS);
        let mut xhat = vec![T::zero(); xv.numel()];
        let mut rstd = vec![T::zero(); rows];
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for (h, &v) in xhat[r * n..(r + 1) * n].iter_mut().zip(row) {
                *h = (v - mean) * rs;
            }
        }
        let mut out = xhat.clone();
        if let Some(gm) = gamma {
            let gv = self.values[gm.0].data();
            for row in out.chunks_mut(n) {
                row.iter_mut().zip(gv).for_each(|(o, &g)| *o *= g);
            }
        }
        if let Some(bt) = beta {
            let bv = self.values[bt.0].data();
            for row in out.chunks_mut(n) {
                row.iter_mut().zip(bv).for_each(|(o, &b)| *o += b);
            }
        }
        let value = Tensor::from_vec(self.shape(x), out)?;
        let mut deps = vec![x];
        deps.extend(gamma);
        deps.extend(beta);
        let rg = self.rg(&deps);
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta, xhat, rstd }, rg))
    }

    /// Divides each row (last axis) by its sum. The sum does not depend on
    /// the order of the row's entries.
    pub fn normalize_sum(&mut self, x: Var) -> Result<Var> {
        let xv = &self.values[x.0];
        let n = xv.last_dim();
        let mut out = xv.clone();
        let mut sums = Vec::with_capacity(xv.rows());
        let mut scratch = Vec::with_capacity(n);
        for row in out.data_mut().chunks_mut(n) {
            scratch.clear();
            scratch.extend_from_slice(row);
            let s = ordered_sum(&mut scratch);
            if s == T::zero() {
                return Err(Error::NonFinite("normalize_sum over a zero-sum row".into()));
            }
            row.iter_mut().for_each(|v| *v /= s);
            sums.push(s);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::NormalizeSum { x, sums }, rg))
    }

    /// `w @ v` for `w [.., m, n]` and `v [.., n, d]` with equal leading axes,
    /// where each output is a sum over `n` that is bitwise independent of the
    /// order of the `n` axis. Intended for small set-valued reductions.
    pub fn set_contract(&mut self, w: Var, v: Var) -> Result<Var> {
        let (ws, vs) = (self.shape(w).to_vec(), self.shape(v).to_vec());
        let r = ws.len();
        if r < 2 || vs.len() != r || ws[..r - 2] != vs[..r - 2] || ws[r - 1] != vs[r - 2] {
            return shape_err(format!("set_contract {ws:?} with {vs:?}"));
        }
        let (m, n, d) = (ws[r - 2], ws[r - 1], vs[r - 1]);
        let batch: usize = ws[..r - 2].iter().product();
        let (wd, vd) = (self.values[w.0].data(), self.values[v.0].data());
        let mut out = Vec::with_capacity(batch * m * d);
        let mut terms = Vec::with_capacity(n);
        for b in 0..batch {
            let (wb, vb) = (&wd[b * m * n..(b + 1) * m * n], &vd[b * n * d..(b + 1) * n * d]);
            for j in 0..m {
                for c in 0..d {
                    terms.clear();
                    terms.extend((0..n).map(|i| wb[j * n + i] * vb[i * d + c]));
                    out.push(ordered_sum(&mut terms));
                }
            }
        }
        let mut shape = ws[..r - 1].to_vec();
        shape.push(d);
        let rg = self.rg(&[w, v]);
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::SetContract { w, v, batch, m, n, d }, rg))
    }

    // ---------------------------------------------------------------- structure

    /// Concatenates along the last axis; leading axes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s[..s.len() - 1] != lead[..] {
                return shape_err(format!("concat leading axes {:?} vs {lead:?}", s));
            }
            width += s[s.len() - 1];
        }
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.values[p.0].row(r));
            }
        }
        let mut shape = lead;
        shape.push(width);
        let rg = self.rg(parts);
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Concat(parts.to_vec()), rg))
    }

    /// Columns `[start, start + len)` of the last axis.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = &self.values[x.0];
        let n = xv.last_dim();
        if len == 0 || start + len > n {
            return shape_err(format!("slice [{start}, {}) of width {n}", start + len));
        }
        let mut out = Vec::with_capacity(xv.rows() * len);
        for row in xv.data().chunks(n) {
            out.extend_from_slice(&row[start..start + len]);
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Slice { x, start }, rg))
    }

    /// Splits the last axis into equal contiguous chunks.
    pub fn split_last(&mut self, x: Var, chunks: usize) -> Result<Vec<Var>> {
        let n = self.values[x.0].last_dim();
        if chunks == 0 || !n.is_multiple_of(chunks) {
            return shape_err(format!("cannot split width {n} into {chunks} chunks"));
        }
        let w = n / chunks;
        (0..chunks).map(|i| self.slice_last(x, i * w, w)).collect()
    }

    /// Row `j` of the second-to-last axis: `[.., n, d] -> [.., d]`.
    pub fn select_row(&mut self, x: Var, j: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 || j >= s[s.len() - 2] {
            return shape_err(format!("select row {j} of {s:?}"));
        }
        let d = s[s.len() - 1];
        let mut flat = s[..s.len() - 2].to_vec();
        flat.push(s[s.len() - 2] * d);
        let f = self.reshape(x, &flat)?;
        self.slice_last(f, j * d, d)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.values[x.0].clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 {
            return shape_err(format!("transpose of rank-{} tensor", s.len()));
        }
        let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
        let xv = self.values[x.0].data();
        let mut out = vec![T::zero(); xv.len()];
        for (src, dst) in xv.chunks(r * c).zip(out.chunks_mut(r * c)) {
            for i in 0..r {
                for j in 0..c {
                    dst[j * r + i] = src[i * c + j];
                }
            }
        }
        let mut shape = s;
        let l = shape.len();
        shape.swap(l - 1, l - 2);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Transpose(x), rg))
    }

    // ---------------------------------------------------------------- stochastic / lookup / loss

    /// Inverted dropout: zeroes entries with probability `p` and scales the
    /// survivors by `1 / (1 - p)`. The mask is recorded for the backward pass.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        if p == 0.0 {
            return Ok(x);
        }
        let keep: T = lit(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.values[x.0].numel())
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
            .collect();
        let data = self.values[x.0].data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::from_vec(self.shape(x), data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Dropout { x, mask }, rg))
    }

    /// Rows of `table` (`[vocab, d]`) selected by `ids`, giving `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = &self.values[table.0];
        if tv.rank() != 2 {
            return shape_err(format!("embedding table must be rank 2, got {:?}", tv.shape()));
        }
        let (vocab, d) = (tv.shape()[0], tv.shape()[1]);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(Error::UnknownWord(id));
            }
            out.extend_from_slice(tv.row(id));
        }
        let rg = self.rg(&[table]);
        let value = Tensor::from_vec(&[ids.len(), d], out)?;
        Ok(self.push(value, Op::Embedding { table, ids: ids.to_vec() }, rg))
    }

    /// Mean softmax cross-entropy of `logits` (`[rows, classes]`) against
    /// integer targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = &self.values[logits.0];
        let c = lv.last_dim();
        if lv.rows() != targets.len() {
            return shape_err(format!("{} targets for logits {:?}", targets.len(), lv.shape()));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return shape_err(format!("target {bad} out of range for {c} classes"));
        }
        let mut probs = lv.data().to_vec();
        let mut loss = T::zero();
        for (row, &t) in probs.chunks_mut(c).zip(targets) {
            let logit_t = row[t];
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            loss += lse - logit_t;
            softmax_in_place(row);
        }
        loss /= lit(targets.len() as f64);
        let rg = self.rg(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, targets: targets.to_vec(), probs }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.values[x.0].sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Applies a user-defined elementwise-or-otherwise unary primitive with
    /// its own vector-Jacobian product.
    pub fn custom_unary(&mut self, x: Var, forward: impl Fn(&Tensor<T>) -> Tensor<T>, vjp: VjpFn<T>) -> Var {
        let value = forward(&self.values[x.0]);
        let rg = self.rg(&[x]);
        self.push(value, Op::Custom { x, vjp }, rg)
    }

    // ---------------------------------------------------------------- backward

    /// Reverse-mode accumulation from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.values[loss.0].is_scalar() {
            return Err(Error::NotScalar(self.shape(loss).to_vec()));
        }
        let Graph { values, ops, requires_grad, grads, .. } = self;
        grads.clear();
        grads.resize(values.len(), None);
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            if !requires_grad[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut acc = Acc { grads, values, requires_grad };
            propagate(&ops[i], i, &g, &mut acc);
            grads[i] = Some(g);
        }
        Ok(())
    }
}

struct Acc<'a, T: Real> {
    grads: &'a mut [Option<Vec<T>>],
    values: &'a [Tensor<T>],
    requires_grad: &'a [bool],
}

impl<T: Real> Acc<'_, T> {
    /// Gradient buffer for `v`, allocated on first use; `None` if `v` does
    /// not track gradients.
    fn get(&mut self, v: Var) -> Option<&mut [T]> {
        if !self.requires_grad[v.0] {
            return None;
        }
        let n = self.values[v.0].numel();
        Some(self.grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn add_scaled(&mut self, v: Var, g: &[T], c: T) {
        if let Some(dst) = self.get(v) {
            dst.iter_mut().zip(g).for_each(|(d, &x)| *d += c * x);
        }
    }

    /// `dst += g * f(i)` elementwise where `f` reads saved state.
    fn add_map(&mut self, v: Var, g: &[T], f: impl Fn(usize) -> T) {
        if let Some(dst) = self.get(v) {
            for (i, (d, &x)) in dst.iter_mut().zip(g).enumerate() {
                *d += x * f(i);
            }
        }
    }
}

/// Sum whose result does not depend on the order of `terms` (which it sorts).
fn ordered_sum<T: Real>(terms: &mut [T]) -> T {
    terms.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    terms.iter().copied().sum()
}

fn propagate<T: Real>(op: &Op<T>, me: usize, g: &[T], acc: &mut Acc<'_, T>) {
    let vals = acc.values;
    let out = (vals[me].shape(), vals[me].data());
    match op {
        Op::Leaf => {}
        Op::Matmul { a, b, dims } => {
            let d = *dims;
            let dc_s = (d.n as isize, 1isize);
            if acc.requires_grad[a.0] {
                let bv = vals[b.0].data();
                let ga = acc.get(*a).unwrap();
                // dA_op = dC @ op(B)^T
                for bi in 0..d.batch {
                    gemm(
                        (d.m, d.n, d.k),
                        &g[bi * d.m * d.n..],
                        dc_s,
                        &bv[bi * d.b_stride..],
                        (d.sb.1, d.sb.0),
                        &mut ga[bi * d.a_stride..],
                        d.sa,
                        T::one(),
                    );
                }
            }
            if acc.requires_grad[b.0] {
                let av = vals[a.0].data();
                let gb = acc.get(*b).unwrap();
                // dB_op = op(A)^T @ dC
                for bi in 0..d.batch {
                    gemm(
                        (d.k, d.m, d.n),
                        &av[bi * d.a_stride..],
                        (d.sa.1, d.sa.0),
                        &g[bi * d.m * d.n..],
                        dc_s,
                        &mut gb[bi * d.b_stride..],
                        d.sb,
                        T::one(),
                    );
                }
            }
        }
        Op::Add(a, b) => {
            acc.add_scaled(*a, g, T::one());
            acc.add_scaled(*b, g, T::one());
        }
        Op::Sub(a, b) => {
            acc.add_scaled(*a, g, T::one());
            acc.add_scaled(*b, g, -T::one());
        }
        Op::Mul(a, b) => {
            let av = vals[a.0].data();
            let bv = vals[b.0].data();
            acc.add_map(*a, g, |i| bv[i]);
            acc.add_map(*b, g, |i| av[i]);
        }
        Op::AddBias(x, bias) => {
            acc.add_scaled(*x, g, T::one());
            if let Some(gb) = acc.get(*bias) {
                let n = gb.len();
                for row in g.chunks(n) {
                    gb.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
                }
            }
        }
        Op::MulRows(x, s) => {
            let xv = vals[x.0].data();
            let sv = vals[s.0].data();
            let n = xv.len() / sv.len();
            acc.add_map(*x, g, |i| sv[i / n]);
            if let Some(gs) = acc.get(*s) {
                for (r, d) in gs.iter_mut().enumerate() {
                    let row = r * n..(r + 1) * n;
                    *d += g[row.clone()].iter().zip(&xv[row]).map(|(&a, &b)| a * b).sum::<T>();
                }
            }
        }
        Op::Scale(x, c) => acc.add_scaled(*x, g, *c),
        Op::AddScalar(x) => acc.add_scaled(*x, g, T::one()),
        Op::Elu1(x) => {
            let xv = vals[x.0].data();
            acc.add_map(*x, g, |i| if xv[i] >= T::zero() { T::one() } else { out.1[i] });
        }
        Op::Relu(x) => {
            let xv = vals[x.0].data();
            acc.add_map(*x, g, |i| if xv[i] > T::zero() { T::one() } else { T::zero() });
        }
        Op::Sigmoid(x) => acc.add_map(*x, g, |i| out.1[i] * (T::one() - out.1[i])),
        Op::Tanh(x) => acc.add_map(*x, g, |i| T::one() - out.1[i] * out.1[i]),
        Op::Exp(x) => acc.add_map(*x, g, |i| out.1[i]),
        Op::Softmax(x) => {
            if let Some(gx) = acc.get(*x) {
                let n = *out.0.last().unwrap();
                for ((dst, gr), yr) in gx.chunks_mut(n).zip(g.chunks(n)).zip(out.1.chunks(n)) {
                    let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for ((d, &gi), &yi) in dst.iter_mut().zip(gr).zip(yr) {
                        *d += yi * (gi - dot);
                    }
                }
            }
        }
        Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
            let n = *out.0.last().unwrap();
            let nf: T = lit(n as f64);
            let gam = gamma.map(|gm| vals[gm.0].data());
            if let Some(gm) = gamma {
                if let Some(gg) = acc.get(*gm) {
                    for (gr, hr) in g.chunks(n).zip(xhat.chunks(n)) {
                        for ((d, &a), &h) in gg.iter_mut().zip(gr).zip(hr) {
                            *d += a * h;
                        }
                    }
                }
            }
            if let Some(bt) = beta {
                if let Some(gb) = acc.get(*bt) {
                    for gr in g.chunks(n) {
                        gb.iter_mut().zip(gr).for_each(|(d, &a)| *d += a);
                    }
                }
            }
            if let Some(gx) = acc.get(*x) {
                let mut dxhat = vec![T::zero(); n];
                for (r, ((dst, gr), hr)) in gx.chunks_mut(n).zip(g.chunks(n)).zip(xhat.chunks(n)).enumerate() {
                    for j in 0..n {
                        dxhat[j] = match &gam {
                            Some(gv) => gr[j] * gv[j],
                            None => gr[j],
                        };
                    }
                    let mean_d: T = dxhat.iter().copied().sum::<T>() / nf;
                    let mean_dh: T = dxhat.iter().zip(hr).map(|(&a, &b)| a * b).sum::<T>() / nf;
                    for j in 0..n {
                        dst[j] += rstd[r] * (dxhat[j] - mean_d - hr[j] * mean_dh);
                    }
                }
            }
        }
        Op::NormalizeSum { x, sums } => {
            if let Some(gx) = acc.get(*x) {
                let n = *out.0.last().unwrap();
                for (r, ((dst, gr), yr)) in gx.chunks_mut(n).zip(g.chunks(n)).zip(out.1.chunks(n)).enumerate() {
                    let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for (d, &gi) in dst.iter_mut().zip(gr) {
                        *d += (gi - dot) / sums[r];
                    }
                }
            }
        }
        Op::SetContract { w, v, batch, m, n, d } => {
            let (m, n, d) = (*m, *n, *d);
            let (wd, vd) = (vals[w.0].data(), vals[v.0].data());
            if let Some(gw) = acc.get(*w) {
                for b in 0..*batch {
                    for j in 0..m {
                        let gr = &g[(b * m + j) * d..(b * m + j + 1) * d];
                        for i in 0..n {
                            let vr = &vd[(b * n + i) * d..(b * n + i + 1) * d];
                            gw[(b * m + j) * n + i] += gr.iter().zip(vr).map(|(&a, &c)| a * c).sum::<T>();
                        }
                    }
                }
            }
            if let Some(gv) = acc.get(*v) {
                for b in 0..*batch {
                    for j in 0..m {
                        let gr = &g[(b * m + j) * d..(b * m + j + 1) * d];
                        for i in 0..n {
                            let wji = wd[(b * m + j) * n + i];
                            let dst = &mut gv[(b * n + i) * d..(b * n + i + 1) * d];
                            dst.iter_mut().zip(gr).for_each(|(x, &a)| *x += wji * a);
                        }
                    }
                }
            }
        }
        Op::Concat(parts) => {
            let widths: Vec<usize> = parts.iter().map(|p| vals[p.0].last_dim()).collect();
            let total: usize = widths.iter().sum();
            let mut offset = 0;
            for (p, &w) in parts.iter().zip(&widths) {
                if let Some(gp) = acc.get(*p) {
                    for (dst, gr) in gp.chunks_mut(w).zip(g.chunks(total)) {
                        dst.iter_mut().zip(&gr[offset..offset + w]).for_each(|(d, &a)| *d += a);
                    }
                }
                offset += w;
            }
        }
        Op::Slice { x, start } => {
            let n = vals[x.0].last_dim();
            let w = *out.0.last().unwrap();
            if let Some(gx) = acc.get(*x) {
                for (dst, gr) in gx.chunks_mut(n).zip(g.chunks(w)) {
                    dst[*start..start + w].iter_mut().zip(gr).for_each(|(d, &a)| *d += a);
                }
            }
        }
        Op::Reshape(x) => acc.add_scaled(*x, g, T::one()),
        Op::Transpose(x) => {
            let s = vals[x.0].shape().to_vec();
            let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
            if let Some(gx) = acc.get(*x) {
                for (dst, gr) in gx.chunks_mut(r * c).zip(g.chunks(r * c)) {
                    for i in 0..r {
                        for j in 0..c {
                            dst[i * c + j] += gr[j * r + i];
                        }
                    }
                }
            }
        }
        Op::Outer(a, b) => {
            let av = vals[a.0].data();
            let bv = vals[b.0].data();
            let m = vals[a.0].last_dim();
            let n = vals[b.0].last_dim();
            let rows = av.len() / m;
            if let Some(ga) = acc.get(*a) {
                for r in 0..rows {
                    let brow = &bv[r * n..(r + 1) * n];
                    for i in 0..m {
                        let grow = &g[(r * m + i) * n..(r * m + i + 1) * n];
                        ga[r * m + i] += grow.iter().zip(brow).map(|(&x, &y)| x * y).sum::<T>();
                    }
                }
            }
            if let Some(gb) = acc.get(*b) {
                for r in 0..rows {
                    let dst = &mut gb[r * n..(r + 1) * n];
                    for i in 0..m {
                        let ai = av[r * m + i];
                        let grow = &g[(r * m + i) * n..(r * m + i + 1) * n];
                        dst.iter_mut().zip(grow).for_each(|(d, &x)| *d += ai * x);
                    }
                }
            }
        }
        Op::Dropout { x, mask } => acc.add_map(*x, g, |i| mask[i]),
        Op::Embedding { table, ids } => {
            if let Some(gt) = acc.get(*table) {
                let d = *out.0.last().unwrap();
                for (r, &id) in ids.iter().enumerate() {
                    gt[id * d..(id + 1) * d].iter_mut().zip(&g[r * d..(r + 1) * d]).for_each(|(a, &b)| *a += b);
                }
            }
        }
        Op::CrossEntropy { logits, targets, probs } => {
            if let Some(gl) = acc.get(*logits) {
                let c = probs.len() / targets.len();
                let scale = g[0] / lit(targets.len() as f64);
                for (r, &t) in targets.iter().enumerate() {
                    for j in 0..c {
                        let onehot = if j == t { T::one() } else { T::zero() };
                        gl[r * c + j] += scale * (probs[r * c + j] - onehot);
                    }
                }
            }
        }
        Op::Sum(x) => {
            let g0 = g[0];
            if let Some(gx) = acc.get(*x) {
                gx.iter_mut().for_each(|d| *d += g0);
            }
        }
        Op::Custom { x, vjp } => {
            let gi = vjp(&vals[x.0], &vals[me], g);
            acc.add_scaled(*x, &gi, T::one());
        }
    }
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// Bounds-checked strided GEMM: `c = a @ b + beta * c` for an `m x k` by
/// `k x n` product.
#[allow(clippy::too_many_arguments)]
fn gemm<T: Real>(
    (m, k, n): (usize, usize, usize),
    a: &[T],
    sa: (isize, isize),
    b: &[T],
    sb: (isize, isize),
    c: &mut [T],
    sc: (isize, isize),
    beta: T,
) {
    let extent = |rows: usize, cols: usize, s: (isize, isize)| -> usize {
        ((rows.saturating_sub(1)) as isize * s.0 + (cols.saturating_sub(1)) as isize * s.1) as usize + 1
    };
    assert!(extent(m, k, sa) <= a.len(), "gemm: A out of bounds");
    assert!(extent(k, n, sb) <= b.len(), "gemm: B out of bounds");
    assert!(extent(m, n, sc) <= c.len(), "gemm: C out of bounds");
    // SAFETY: extents checked above; strides are non-negative.
    unsafe {
        T::gemm(m, k, n, T::one(), a.as_ptr(), sa.0, sa.1, b.as_ptr(), sb.0, sb.1, beta, c.as_mut_ptr(), sc.0, sc.1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecg(g: &mut Graph<f64>, xs: &[f64]) -> Var {
        g.leaf(Tensor::vector(xs.to_vec()))
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn outer_product_basis_and_small_case() {
        let mut g = Graph::<f64>::new();
        let e1 = vecg(&mut g, &[1.0, 0.0]);
        let e2 = vecg(&mut g, &[0.0, 1.0]);
        let o = g.outer(e1, e2).unwrap();
        assert_eq!(g.shape(o), &[2, 2]);
        assert_eq!(g.value(o).data(), &[0.0, 1.0, 0.0, 0.0]);
        let a = vecg(&mut g, &[1.0, 2.0]);
        let b = vecg(&mut g, &[3.0, 4.0]);
        let o = g.outer(a, b).unwrap();
        assert_eq!(g.value(o).data(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::<f64>::new();
        for c in [-3.0, 0.0, 17.5] {
            let x = vecg(&mut g, &[c, c]);
            let y = g.softmax(x).unwrap();
            assert!(close(g.value(y).data(), &[0.5, 0.5], 1e-15));
        }
        let x = vecg(&mut g, &[0.0, 3f64.ln()]);
        let y = g.softmax(x).unwrap();
        assert!(close(g.value(y).data(), &[0.25, 0.75], 1e-12));
        let x = vecg(&mut g, &[1000.0, 1000.0]);
        let y = g.softmax(x).unwrap();
        assert!(close(g.value(y).data(), &[0.5, 0.5], 1e-15));
        let x = vecg(&mut g, &[f64::NAN, 1.0]);
        assert!(matches!(g.softmax(x), Err(Error::NonFinite(_))));
        let x = vecg(&mut g, &[f64::INFINITY, 1.0]);
        assert!(g.softmax(x).is_err());
    }

    #[test]
    fn layer_norm_examples() {
        let mut g = Graph::<f64>::new();
        let ln = |g: &mut Graph<f64>, xs: &[f64]| {
            let x = g.leaf(Tensor::vector(xs.to_vec()));
            let gam = g.leaf(Tensor::full(&[xs.len()], 1.0));
            let bet = g.leaf(Tensor::zeros(&[xs.len()]));
            let y = g.layer_norm(x, Some(gam), Some(bet)).unwrap();
            g.value(y).data().to_vec()
        };
        assert!(close(&ln(&mut g, &[4.0, 4.0, 4.0]), &[0.0; 3], 0.0));
        // eps_ln = 1e-5 in the denominator: 1 / sqrt(1 + 1e-5)
        let s = 1.0 / (1.0 + LAYER_NORM_EPS).sqrt();
        assert!(close(&ln(&mut g, &[1.0, -1.0]), &[s, -s], 1e-12));
        assert!(close(&ln(&mut g, &[0.0, 2.0]), &[-s, s], 1e-12));
        assert!(close(&ln(&mut g, &[1.0, -1.0]), &[1.0, -1.0], 1e-5));
    }

    #[test]
    fn elu_plus_one_examples() {
        let mut g = Graph::<f64>::new();
        let x = vecg(&mut g, &[0.0, 2.0, -(2f64.ln())]);
        let y = g.elu_plus_one(x);
        assert!(close(g.value(y).data(), &[1.0, 3.0, 0.5], 1e-15));
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::<f64>::new();
        let x = vecg(&mut g, &[0.3, -1.0, 2.0]);
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);

        let mut g = Graph::<f64>::new();
        let x = vecg(&mut g, &[1.0, 2.0]);
        let xx = g.mul(x, x).unwrap();
        let d = g.sum(xx);
        g.backward(d).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::<f64>::new();
        let x = vecg(&mut g, &[1.0, 2.0]);
        let y = g.exp(x);
        assert!(matches!(g.backward(y), Err(Error::NotScalar(_))));
    }

    #[test]
    fn matmul_layouts() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(Tensor::from_f64(&[2, 3], &[1., 2., 3., 4., 5., 6.]).unwrap());
        let b = g.leaf(Tensor::from_f64(&[3, 2], &[1., 0., 0., 1., 1., 1.]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[4., 5., 10., 11.]);
        // a^T a via transpose flags
        let c = g.matmul_t(a, a, true, false).unwrap();
        assert_eq!(g.shape(c), &[3, 3]);
        assert_eq!(g.value(c).at(&[0, 0]), 17.0);
        assert_eq!(g.value(c).at(&[1, 2]), 2. * 3. + 5. * 6.);
        // a a^T
        let c = g.matmul_t(a, a, false, true).unwrap();
        assert_eq!(g.value(c).data(), &[14., 32., 32., 77.]);
        // batched with broadcast rhs
        let ab = g.leaf(Tensor::from_f64(&[2, 1, 3], &[1., 2., 3., 4., 5., 6.]).unwrap());
        let c = g.matmul_t(ab, b, false, false).unwrap();
        assert_eq!(g.shape(c), &[2, 1, 2]);
        assert_eq!(g.value(c).data(), &[4., 5., 10., 11.]);
        let bad = g.leaf(Tensor::zeros(&[4, 2]));
        assert!(g.matmul(a, bad).is_err());
    }

    #[test]
    fn dropout_is_inverted_and_recorded() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::full(&[1000], 1.0));
        let y = g.dropout(x, 0.5, &mut rng).unwrap();
        let vals = g.value(y).data().to_vec();
        assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = vals.iter().filter(|&&v| v == 2.0).count();
        assert!((400..600).contains(&kept));
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &vals[..]);
        let same = g.dropout(x, 0.0, &mut rng).unwrap();
        assert_eq!(same, x);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let mut g = Graph::<f64>::new();
        let l = g.leaf(Tensor::zeros(&[3, 5]));
        let loss = g.cross_entropy(l, &[0, 4, 2]).unwrap();
        assert!((g.value(loss).item() - 5f64.ln()).abs() < 1e-12);
        assert!(g.cross_entropy(l, &[0, 5, 2]).is_err());
    }
}
