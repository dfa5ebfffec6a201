//! Trains a model briefly, then compares the roles it writes for a fixed `y`
//! against the unbinding operators it later uses to query each `x`.
//!
//! ```text
//! cargo run --release --example orthogonality -- [iters] [aid|baseline]
//! ```

use aid_tpr::analysis::{collect_traces, orthogonality_report, ortho_episodes};
use aid_tpr::sar::word_sets_for;
use aid_tpr::train::{train_run, Experiment};

fn main() -> aid_tpr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iters: usize = args.first().map_or(1500, |s| s.parse().expect("iters is an integer"));
    let use_aid = args.get(1).is_none_or(|s| s == "aid");

    let mut exp = Experiment::desk(0.5);
    exp.model.use_aid = use_aid;
    exp.train.iters = iters;
    exp.train.eval_every = iters;
    let run = train_run::<f32>(&exp, 0, None, |p| println!("trained {} iters, eval acc {:.3}", p.iter, p.eval_acc))?;

    let ws = word_sets_for(&exp.sar)?;
    let y = ws.y2[0];
    let xs: Vec<usize> = ws.x1.iter().take(8).copied().collect();
    let episodes = ortho_episodes(&ws, &exp.sar, y, &xs, 0)?;
    let traces = collect_traces(&run.model, &run.store, &ws, &episodes)?;
    let r = orthogonality_report(&traces, y)?;

    println!("cos(role of x_i, unbinding operator for x_j), y = {y}:");
    for (x, row) in r.xs.iter().zip(&r.role_unbind) {
        println!("  x={x:<3} {}", row.iter().map(|c| format!("{c:+.2}")).collect::<Vec<_>>().join(" "));
    }
    println!(
        "same x {:.3}, different x {:.3}, role/role off-diagonal {:.3}",
        r.mean_diag_role_unbind, r.mean_offdiag_role_unbind, r.mean_offdiag_role_role
    );
    Ok(())
}
