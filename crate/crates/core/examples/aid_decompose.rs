//! Decomposes a set of input features into routed components and shows the
//! competitive attention and its symmetry properties.
//!
//! ```text
//! cargo run --release --example aid_decompose
//! ```

use aid_tpr::aid::{attention_matrix, decompose, route_slots, AidConfig, AidParams, AttnActivation};
use aid_tpr::backend::{Graph, ParamStore, Tensor};
use aid_tpr::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor<f64>> {
    Tensor::from_vec(shape, (0..shape.iter().product()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn main() -> Result<()> {
    let cfg = AidConfig {
        n_com: 3,
        n_iter: 2,
        n_inputs: 4,
        d_inputs: 6,
        d_com: 5,
        d_mlp_update: (10, 5),
        d_mlp_final: 5,
        p_dropout: 0.0,
        eps_attn: 1e-8,
        use_query_residual: true,
        use_final_concat: true,
        attn_activation: AttnActivation::EluPlusOne,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let params = AidParams::new(&mut store, "aid", &cfg, &mut rng);
    println!("{} parameters", params.param_count(cfg.d_com));

    let inputs = random(&[4, 6], &mut rng)?;
    let init = random(&[3, 5], &mut rng)?;

    let mut g = Graph::<f64>::new();
    let key = g.input(random(&[4, 5], &mut rng)?);
    let query = g.input(random(&[3, 5], &mut rng)?);
    let attn = attention_matrix(&mut g, key, query)?;
    println!("attention (inputs x components), rows compete for components:");
    for r in 0..4 {
        let row = g.value(attn).row(r);
        println!("  {:?}  sum {:.6}", row.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(), row.iter().sum::<f64>());
    }

    let run = |inputs: &Tensor<f64>, init: &Tensor<f64>| -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let (x, c) = (g.input(inputs.clone()), g.input(init.clone()));
        let out = decompose(&mut g, &store, &params, &cfg, x, c, false, &mut ChaCha8Rng::seed_from_u64(0))?;
        let slots = route_slots(&mut g, out, &["role1", "role2", "filler"])?;
        for (name, v) in slots.iter() {
            println!("  {name:<6} {:?}", g.value(v).data().iter().map(|x| format!("{x:+.3}")).collect::<Vec<_>>());
        }
        Ok(g.value(out).data().to_vec())
    };

    println!("components:");
    let base = run(&inputs, &init)?;
    let shuffled_inputs = Tensor::from_vec(&[4, 6], [2, 0, 3, 1].iter().flat_map(|&r| inputs.row(r).to_vec()).collect())?;
    println!("components with the inputs shuffled:");
    let same = run(&shuffled_inputs, &init)? == base;
    let swapped_init = Tensor::from_vec(&[3, 5], [1, 0, 2].iter().flat_map(|&r| init.row(r).to_vec()).collect())?;
    println!("components with role1 and role2 initial vectors swapped:");
    let moved = run(&inputs, &swapped_init)? != base;
    println!("input order irrelevant: {same}; slot routing follows the initial components: {moved}");
    Ok(())
}
