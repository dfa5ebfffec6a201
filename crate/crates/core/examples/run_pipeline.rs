//! The artifact pipeline behind the `aid` binary: settings from config text,
//! a short training run on disk, then evaluation and both analyses against
//! the saved checkpoint.
//!
//! ```text
//! cargo run --release --example run_pipeline -- [out_dir]
//! ```

use aid_tpr::analysis::ForestConfig;
use aid_tpr::config::Settings;
use aid_tpr::run::{self, EvalRequest, RunManifest, Which};

const CONFIG: &str = "\
# a short desk-scale run
p = 0.5
iters = 400
batch = 16
eval_every = 100
eval_episodes = 128
seeds = 1
run_name = pipeline
";

fn main() -> aid_tpr::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("aid-pipeline").display().to_string());
    let s = Settings::resolve(Some(CONFIG), &[("out".into(), out)])?;
    let outcomes = run::train_settings(&s, &|seed, p| println!("seed {seed} iter {:>4} loss {:.4} eval {:.3}", p.iter, p.loss, p.eval_acc))?;
    let dir = &outcomes[0].dir;

    for which in [Which::Final, Which::Best] {
        let acc = run::eval_run(dir, EvalRequest { which, ..Default::default() })?;
        println!("{which:?} checkpoint: eval acc {acc:.3}");
    }
    for n in 1..=3 {
        let acc = run::eval_run(dir, EvalRequest { n_iter_test: Some(n), ..Default::default() })?;
        println!("n_iter_test {n}: eval acc {acc:.3}");
    }
    let blind = run::eval_run(dir, EvalRequest { ablate_memory: true, ..Default::default() })?;
    println!("memory reads zeroed: eval acc {blind:.3}");

    let (dci, _) = run::dci_run(dir, 200, ForestConfig { n_trees: 20, ..ForestConfig::default() })?;
    println!("DCI D={:.3} C={:.3} I={:.3}", dci.d, dci.c, dci.i);
    let ortho = run::ortho_run(dir, None, 6)?;
    println!("role/unbinding cosine same x {:.3} vs different x {:.3}", ortho.mean_diag_role_unbind, ortho.mean_offdiag_role_unbind);

    let m = RunManifest::load(dir)?;
    println!("{} ({} params, revision {}):", dir.display(), m.param_count, m.revision);
    for a in &m.artifacts {
        println!("  {a}");
    }
    Ok(())
}
