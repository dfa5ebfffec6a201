//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use super::rng::{stream, streams};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    /// Finite-difference step.
    pub h: f64,
    /// Pass threshold on the maximum relative error.
    pub tol: f64,
    /// Denominator floor: `|a - n| / max(|a|, |n|, floor)`. Keeps coordinates
    /// whose true gradient is ~0 from dividing round-off by round-off.
    pub floor: f64,
    /// Sample at most this many coordinates per parameter tensor.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions { h: 1e-4, tol: 1e-5, floor: 1e-3, max_coords: None, seed: 0 }
    }
}

impl GradcheckOptions {
    pub fn with_tol(tol: f64) -> Self {
        GradcheckOptions { tol, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub pass: bool,
}

fn eval<F>(store: &ParamStore<f64>, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let v = g.value(out);
    if !v.is_scalar() {
        return Err(Error::NotScalar(v.shape().to_vec()));
    }
    Ok(v.item())
}

/// Compares the analytic gradient of `f` with respect to every parameter in
/// `store` against `(f(p + h) - f(p - h)) / 2h`.
pub fn gradcheck<F>(store: &ParamStore<f64>, f: F, opts: &GradcheckOptions) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let first = eval(store, &f)?;
    let second = eval(store, &f)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic(format!("f evaluated to {first} then {second}")));
    }

    let mut g = Graph::new();
    let loss = f(&mut g, store)?;
    g.backward(loss)?;
    let analytic = g.param_grads(store);

    let mut rng = stream(opts.seed, streams::ANALYSIS, 0);
    let mut work = store.clone();
    let mut report = GradcheckReport { max_rel_err: 0.0, worst: None, checked: 0, pass: true };
    for (slot, id) in store.ids().enumerate() {
        let n = store.get(id).numel();
        let coords: Vec<usize> = match opts.max_coords {
            Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = store.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + opts.h;
            let plus = eval(&work, &f)?;
            work.get_mut(id).data_mut()[i] = orig - opts.h;
            let minus = eval(&work, &f)?;
            work.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.h);
            let a = analytic.slot(slot)[i];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            let rel = (a - numeric).abs() / denom;
            let rel = if rel.is_nan() { f64::INFINITY } else { rel };
            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = rel;
                report.worst = Some((store.name(id).to_string(), i));
            }
        }
    }
    report.pass = report.max_rel_err < opts.tol;
    Ok(report)
}
