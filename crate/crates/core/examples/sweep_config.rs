//! Layered settings and sweep expansion without training anything.
//!
//! ```text
//! cargo run --release --example sweep_config
//! ```

use aid_tpr::config::Settings;
use aid_tpr::run::{seed_dir, sweep_settings};

fn main() -> aid_tpr::Result<()> {
    let file = "p = 0.25\niters = 5000\nn_iter = 3\n";
    let flags = vec![("--iters".to_string(), "8000".to_string()), ("--seeds".to_string(), "3".to_string())];
    let s = Settings::resolve(Some(file), &flags)?;
    println!("p={} iters={} (flag beats file) n_iter={} lr={} (default)", s.exp.sar.p, s.exp.train.iters, s.exp.model.aid_enc.n_iter, s.exp.train.lr);
    print!("merged config:\n{}", s.to_config_text());

    for run in sweep_settings(&s, "p", &["0.0".into(), "0.5".into(), "1.0".into()])? {
        let dirs: Vec<String> = run.seeds.iter().map(|&k| seed_dir(&run, k).display().to_string()).collect();
        println!("{:<14} |X3|/|X2+X3|={:<4} -> {}", run.run_name, run.exp.sar.p, dirs.join(" "));
    }

    match Settings::resolve(Some("learning_rate = 0.1"), &[]) {
        Ok(_) => println!("unexpected: unknown key accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
