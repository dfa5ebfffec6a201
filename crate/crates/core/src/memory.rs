//! Third-order TPR fast-weight memory.
//!
//! `F[a][b][c]` binds the role pair `(k1[a], k2[b])` to the filler `v[c]`.
//! The tensor is stored flat with index `(a * d + b) * d + c`, so `F` viewed
//! as a `[d * d, d]` matrix maps a flattened role product `k1 ⊗ k2` to a
//! filler by a single matrix product.
//!
//! [`TprMemory`] is a plain, non-differentiable implementation; the graph
//! functions below compute the same quantities on batches while recording
//! gradients. [`FactoredMemory`] keeps `F` as its list of rank-one writes
//! `k1_s ⊗ k2_s ⊗ δ_s`, so a read costs `O(writes * d)` instead of
//! `O(d^3)` and `F` is never materialized.

use crate::backend::{Graph, Real, Tensor, Var};
use crate::error::{shape_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TprMemory<T: Real> {
    d: usize,
    f: Vec<T>,
}

impl<T: Real> TprMemory<T> {
    /// An empty memory of width `d`.
    pub fn new(d: usize) -> Self {
        TprMemory { d, f: vec![T::zero(); d * d * d] }
    }

    pub fn d_mem(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[T] {
        &self.f
    }

    pub fn at(&self, a: usize, b: usize, c: usize) -> T {
        self.f[(a * self.d + b) * self.d + c]
    }

    pub fn reset(&mut self) {
        self.f.iter_mut().for_each(|x| *x = T::zero());
    }

    pub fn frobenius_norm(&self) -> T {
        self.f.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    fn check(&self, vs: &[&[T]]) -> Result<()> {
        match vs.iter().find(|v| v.len() != self.d) {
            Some(v) => shape_err(format!("vector of length {} for memory width {}", v.len(), self.d)),
            None => Ok(()),
        }
    }

    /// `out[c] = Σ_ab F[a][b][c] u1[a] u2[b]`.
    pub fn read(&self, u1: &[T], u2: &[T]) -> Result<Vec<T>> {
        self.check(&[u1, u2])?;
        let d = self.d;
        let mut out = vec![T::zero(); d];
        for (a, &x) in u1.iter().enumerate() {
            for (b, &y) in u2.iter().enumerate() {
                let w = x * y;
                let row = &self.f[(a * d + b) * d..(a * d + b + 1) * d];
                out.iter_mut().zip(row).for_each(|(o, &f)| *o += w * f);
            }
        }
        Ok(out)
    }

    /// `F += beta (v - read(F, k1, k2)) ⊗ k1 ⊗ k2`.
    pub fn write(&mut self, k1: &[T], k2: &[T], v: &[T], beta: T) -> Result<()> {
        self.check(&[v])?;
        let old = self.read(k1, k2)?;
        let delta: Vec<T> = v.iter().zip(&old).map(|(&n, &o)| beta * (n - o)).collect();
        let d = self.d;
        for (a, &x) in k1.iter().enumerate() {
            for (b, &y) in k2.iter().enumerate() {
                let w = x * y;
                let row = &mut self.f[(a * d + b) * d..(a * d + b + 1) * d];
                row.iter_mut().zip(&delta).for_each(|(f, &dv)| *f += w * dv);
            }
        }
        Ok(())
    }

    /// `s_0 = n0`, `s_i = layer_norm(read(F, s_{i-1}, e_i))` without affine.
    pub fn multihop_read(&self, n0: &[T], hops: &[&[T]]) -> Result<Vec<T>> {
        if hops.is_empty() {
            return shape_err("multihop read needs at least one hop");
        }
        let mut s = n0.to_vec();
        for e in hops {
            s = layer_norm_plain(&self.read(&s, e)?);
        }
        Ok(s)
    }
}

fn layer_norm_plain<T: Real>(x: &[T]) -> Vec<T> {
    let n = T::from(x.len()).unwrap();
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let rstd = (var + T::from(crate::backend::LAYER_NORM_EPS).unwrap()).sqrt().recip();
    x.iter().map(|&v| (v - mean) * rstd).collect()
}

/// A batch of empty memories, `[batch, d * d, d]`. Never receives gradient.
pub fn empty<T: Real>(g: &mut Graph<T>, batch: usize, d: usize) -> Var {
    g.input(Tensor::zeros(&[batch, d * d, d]))
}

fn check_batch<T: Real>(g: &Graph<T>, f: Var, vs: &[Var]) -> Result<(usize, usize)> {
    let fs = g.shape(f);
    if fs.len() != 3 || fs[1] != fs[2] * fs[2] {
        return shape_err(format!("memory must be [B, d*d, d], got {fs:?}"));
    }
    let (b, d) = (fs[0], fs[2]);
    for &v in vs {
        if g.shape(v) != [b, d] {
            return shape_err(format!("memory operand {:?} for memory {fs:?}", g.shape(v)));
        }
    }
    Ok((b, d))
}

/// Batched read: `F [B, d*d, d]`, `u1, u2 [B, d]` -> `[B, d]`.
pub fn read<T: Real>(g: &mut Graph<T>, f: Var, u1: Var, u2: Var) -> Result<Var> {
    let (b, d) = check_batch(g, f, &[u1, u2])?;
    let key = g.outer(u1, u2)?;
    let key = g.reshape(key, &[b, 1, d * d])?;
    let out = g.matmul(key, f)?;
    g.reshape(out, &[b, d])
}

/// Batched write; `beta` has one entry per batch element. Returns the new
/// memory.
pub fn write<T: Real>(g: &mut Graph<T>, f: Var, k1: Var, k2: Var, v: Var, beta: Var) -> Result<Var> {
    let (b, d) = check_batch(g, f, &[k1, k2, v])?;
    if g.value(beta).numel() != b {
        return shape_err(format!("beta {:?} for batch {b}", g.shape(beta)));
    }
    let key = g.outer(k1, k2)?;
    let key = g.reshape(key, &[b, 1, d * d])?;
    let old = g.matmul(key, f)?;
    let old = g.reshape(old, &[b, d])?;
    let diff = g.sub(v, old)?;
    let diff = g.mul_rows(diff, beta)?;
    let key = g.reshape(key, &[b, d * d])?;
    let delta = g.outer(key, diff)?;
    g.add(f, delta)
}

/// Batched multi-hop read; `hops` holds one `[B, d]` operand per hop.
pub fn multihop_read<T: Real>(g: &mut Graph<T>, f: Var, n0: Var, hops: &[Var]) -> Result<Var> {
    if hops.is_empty() {
        return shape_err("multihop read needs at least one hop");
    }
    let mut s = n0;
    for &e in hops {
        let r = read(g, f, s, e)?;
        s = g.layer_norm(r, None, None)?;
    }
    Ok(s)
}

/// A batch of memories stored as the sequence of their writes.
///
/// `F = Σ_s k1_s ⊗ k2_s ⊗ δ_s` with `δ_s = beta_s (v_s - read(F_{s-1}, k1_s, k2_s))`,
/// hence `read(F, u1, u2) = Σ_s (u1 · k1_s)(u2 · k2_s) δ_s`.
#[derive(Clone, Debug)]
pub struct FactoredMemory {
    batch: usize,
    d: usize,
    k1: Vec<Var>,
    k2: Vec<Var>,
    delta: Vec<Var>,
}

impl FactoredMemory {
    pub fn new(batch: usize, d: usize) -> Self {
        FactoredMemory { batch, d, k1: Vec::new(), k2: Vec::new(), delta: Vec::new() }
    }

    pub fn writes(&self) -> usize {
        self.delta.len()
    }

    fn check<T: Real>(&self, g: &Graph<T>, vs: &[Var]) -> Result<()> {
        for &v in vs {
            if g.shape(v) != [self.batch, self.d] {
                return shape_err(format!("memory operand {:?} for batch {} width {}", g.shape(v), self.batch, self.d));
            }
        }
        Ok(())
    }

    /// `[B, t, d]` stack of per-write vectors.
    fn stack<T: Real>(&self, g: &mut Graph<T>, parts: &[Var]) -> Result<Var> {
        let cat = if parts.len() == 1 { parts[0] } else { g.concat(parts)? };
        g.reshape(cat, &[self.batch, parts.len(), self.d])
    }

    /// Batched read, `u1, u2 [B, d]` -> `[B, d]`.
    pub fn read<T: Real>(&self, g: &mut Graph<T>, u1: Var, u2: Var) -> Result<Var> {
        self.check(g, &[u1, u2])?;
        let (b, d, t) = (self.batch, self.d, self.writes());
        if t == 0 {
            return Ok(g.input(Tensor::zeros(&[b, d])));
        }
        let k1 = self.stack(g, &self.k1)?;
        let k2 = self.stack(g, &self.k2)?;
        let delta = self.stack(g, &self.delta)?;
        let u1 = g.reshape(u1, &[b, d, 1])?;
        let u2 = g.reshape(u2, &[b, d, 1])?;
        let a1 = g.matmul(k1, u1)?;
        let a2 = g.matmul(k2, u2)?;
        let coef = g.mul(a1, a2)?;
        let coef = g.reshape(coef, &[b, 1, t])?;
        let out = g.matmul(coef, delta)?;
        g.reshape(out, &[b, d])
    }

    /// `F += beta (v - read(F, k1, k2)) ⊗ k1 ⊗ k2`, `beta` one entry per row.
    pub fn write<T: Real>(&mut self, g: &mut Graph<T>, k1: Var, k2: Var, v: Var, beta: Var) -> Result<()> {
        self.check(g, &[k1, k2, v])?;
        if g.value(beta).numel() != self.batch {
            return shape_err(format!("beta {:?} for batch {}", g.shape(beta), self.batch));
        }
        let old = self.read(g, k1, k2)?;
        let diff = g.sub(v, old)?;
        let delta = g.mul_rows(diff, beta)?;
        self.k1.push(k1);
        self.k2.push(k2);
        self.delta.push(delta);
        Ok(())
    }

    pub fn multihop_read<T: Real>(&self, g: &mut Graph<T>, n0: Var, hops: &[Var]) -> Result<Var> {
        if hops.is_empty() {
            return shape_err("multihop read needs at least one hop");
        }
        let mut s = n0;
        for &e in hops {
            let r = self.read(g, s, e)?;
            s = g.layer_norm(r, None, None)?;
        }
        Ok(s)
    }

    /// The dense `[B, d * d, d]` tensor these writes sum to.
    pub fn materialize<T: Real>(&self, g: &mut Graph<T>) -> Result<Var> {
        let (b, d) = (self.batch, self.d);
        let mut f = empty(g, b, d);
        for s in 0..self.writes() {
            let key = g.outer(self.k1[s], self.k2[s])?;
            let key = g.reshape(key, &[b, d * d])?;
            let term = g.outer(key, self.delta[s])?;
            f = g.add(f, term)?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_memory_reads_zero() {
        let m = TprMemory::<f64>::new(3);
        assert_eq!(m.read(&[1., 2., 3.], &[0.5, 0., 1.]).unwrap(), vec![0.0; 3]);
        assert_eq!(m.multihop_read(&[1., 0., 0.], &[&[0., 1., 0.]]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn unit_binding_recalls_filler() {
        let mut m = TprMemory::<f64>::new(2);
        m.write(&[1., 0.], &[0., 1.], &[0.3, -2.0], 1.0).unwrap();
        assert_eq!(m.read(&[1., 0.], &[0., 1.]).unwrap(), vec![0.3, -2.0]);
        assert_eq!(m.at(0, 1, 1), -2.0);
        assert!(m.read(&[1., 0., 0.], &[0., 1.]).is_err());
    }

    #[test]
    fn beta_zero_is_identity() {
        let mut m = TprMemory::<f64>::new(2);
        m.write(&[0.6, 0.8], &[1., 0.], &[1., 1.], 0.7).unwrap();
        let before = m.clone();
        m.write(&[0.3, 0.1], &[0.2, 0.9], &[5., -5.], 0.0).unwrap();
        assert_eq!(m, before);
    }
}
