//! Finite-difference verification of every graph primitive, the memory, the
//! decomposition module and a full model episode in 64-bit.
//!
//! ```text
//! cargo run --release --example gradcheck -- [seed]
//! ```

use aid_tpr::verify::full_suite;

fn main() -> aid_tpr::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed is an integer"));
    let results = full_suite(seed)?;
    for r in &results {
        let worst = r.report.worst.as_ref().map_or(String::new(), |(n, i)| format!(" at {n}[{i}]"));
        println!(
            "{} {:<34} {:>4} coords  max rel err {:.2e}{worst}",
            if r.pass() { "ok  " } else { "FAIL" },
            r.name,
            r.report.checked,
            r.report.max_rel_err
        );
    }
    let failed = results.iter().filter(|r| !r.pass()).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(())
}
