//! Trains one model on the associative-recall task and prints the learning
//! curve on unseen `X1 × Y2` combinations.
//!
//! ```text
//! cargo run --release --example train_sar -- [p] [iters] [aid|baseline] [seed]
//! ```

use aid_tpr::train::{train_run, Experiment};

fn main() -> aid_tpr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let p: f64 = arg(0, "1.0").parse().expect("p is a number");
    let iters: usize = arg(1, "2000").parse().expect("iters is an integer");
    let use_aid = arg(2, "aid") == "aid";
    let seed: u64 = arg(3, "0").parse().expect("seed is an integer");

    let mut exp = Experiment::desk(p);
    exp.model.use_aid = use_aid;
    exp.train.iters = iters;
    exp.train.eval_every = (iters / 10).max(1);

    println!("p={p} use_aid={use_aid} seed={seed} iters={iters}");
    println!("{:>6} {:>8} {:>8}", "iter", "loss", "eval_acc");
    let t0 = std::time::Instant::now();
    let run = train_run::<f32>(&exp, seed, None, |pt| {
        println!("{:>6} {:>8.4} {:>8.4}", pt.iter, pt.loss, pt.eval_acc);
    })?;
    println!(
        "final {:.4} best {:.4} in {:.1}s",
        run.metrics.final_acc().unwrap_or(0.0),
        run.metrics.best_acc().unwrap_or(0.0),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}
