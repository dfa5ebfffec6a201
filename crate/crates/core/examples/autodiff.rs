//! Fits a small linear map with the reverse-mode graph and Adam, then checks
//! the analytic gradient against central differences.
//!
//! ```text
//! cargo run --release --example autodiff
//! ```

use aid_tpr::backend::{gradcheck, AdamState, GradcheckOptions, Graph, ParamStore, Tensor};
use aid_tpr::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let target = Tensor::from_vec(&[3, 2], vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.5])?;
    let xs = Tensor::from_vec(&[16, 3], (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let ys = {
        let mut g = Graph::<f64>::new();
        let (x, w) = (g.input(xs.clone()), g.input(target.clone()));
        let y = g.matmul(x, w)?;
        g.value(y).clone()
    };

    let mut store = ParamStore::<f64>::new();
    let w = store.add_uniform("w", &[3, 2], 3, &mut rng);
    let loss_fn = |g: &mut Graph<f64>, store: &ParamStore<f64>| {
        let (x, y) = (g.input(xs.clone()), g.input(ys.clone()));
        let wv = g.param(store, w);
        let pred = g.matmul(x, wv)?;
        let err = g.sub(pred, y)?;
        let sq = g.mul(err, err)?;
        let total = g.sum(sq);
        Ok(g.scale(total, 1.0 / 32.0))
    };

    let report = gradcheck(&store, loss_fn, &GradcheckOptions::default())?;
    println!("gradcheck at init: max rel err {:.2e} over {} coords", report.max_rel_err, report.checked);

    let mut adam = AdamState::new(&store, 0.05, 0.9, 0.98, 1e-8);
    for step in 0..=400 {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, &store)?;
        if step % 100 == 0 {
            println!("step {step:>3} loss {:.3e}", g.value(loss).item());
        }
        g.backward(loss)?;
        let grads = g.param_grads(&store);
        adam.step(&mut store, &grads)?;
    }
    println!("learned w = {:?}", store.get(w).data());
    println!("target  w = {:?}", target.data());
    Ok(())
}
