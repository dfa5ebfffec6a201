//! Binds role pairs to fillers in a third-order fast-weight tensor, reads them
//! back, and follows a two-hop chain.
//!
//! ```text
//! cargo run --release --example tpr_memory
//! ```

use aid_tpr::memory::TprMemory;
use aid_tpr::Result;

fn basis(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
}

fn show(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:+.3}")).collect::<Vec<_>>().join(" ")
}

fn main() -> Result<()> {
    let d = 4;
    let mut m = TprMemory::<f64>::new(d);
    let fillers = [vec![0.9, -0.1, 0.3, 0.0], vec![-0.5, 0.5, 0.2, 0.8], vec![0.1, 0.7, -0.6, 0.4]];

    // orthonormal role pairs: each read returns its filler exactly
    for (i, f) in fillers.iter().enumerate() {
        m.write(&basis(d, i), &basis(d, (i + 1) % d), f, 1.0)?;
    }
    for (i, f) in fillers.iter().enumerate() {
        let got = m.read(&basis(d, i), &basis(d, (i + 1) % d))?;
        println!("read(e{i}, e{}) = {}   stored {}", (i + 1) % d, show(&got), show(f));
    }

    // overlapping keys interfere; the delta rule replaces rather than adds
    let k = vec![0.6, 0.8, 0.0, 0.0];
    m.write(&k, &basis(d, 1), &[1.0, 1.0, 1.0, 1.0], 1.0)?;
    println!("after an overlapping write, read(e0, e1) = {}", show(&m.read(&basis(d, 0), &basis(d, 1))?));
    println!("                            read(k,  e1) = {}", show(&m.read(&k, &basis(d, 1))?));

    // two hops: the first result is layer-normed and becomes the next key
    let mut chain = TprMemory::<f64>::new(d);
    let a = basis(d, 0);
    let b = vec![1.0, -1.0, 1.0, -1.0];
    let b_ln: Vec<f64> = b.iter().map(|x| x / (1.0f64 + 1e-5).sqrt()).collect();
    chain.write(&a, &basis(d, 2), &b, 1.0)?;
    chain.write(&b_ln, &basis(d, 3), &[2.0, 0.0, -2.0, 0.0], 1.0)?;
    let hop = chain.multihop_read(&a, &[&basis(d, 2), &basis(d, 3)])?;
    println!("a -e2-> b -e3-> {}", show(&hop));
    println!("|F| = {:.4}", chain.frobenius_norm());
    Ok(())
}
