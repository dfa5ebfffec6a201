//! Builds the word pools of the associative-recall task, samples training and
//! evaluation episodes, and writes them as JSON lines.
//!
//! ```text
//! cargo run --release --example sar_episodes -- [p] [out.jsonl]
//! ```

use std::collections::BTreeMap;
use std::io::BufWriter;

use aid_tpr::sar::{generate_episode, word_sets_for, write_episodes_jsonl, SarConfig, Split};
use aid_tpr::Result;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p: f64 = args.first().map_or(0.5, |s| s.parse().expect("p is a number"));
    let cfg = SarConfig::desk(p);
    let ws = word_sets_for(&cfg)?;
    println!(
        "p={p}: |X1|={} |X2|={} |X3|={} |Y1|={} |Y2|={} ({} words, {} classes)",
        ws.x1.len(),
        ws.x2.len(),
        ws.x3.len(),
        ws.y1.len(),
        ws.y2.len(),
        ws.n_words(),
        cfg.n_classes()
    );

    let pool = |w: usize| {
        [("X1", &ws.x1), ("X2", &ws.x2), ("X3", &ws.x3), ("Y1", &ws.y1), ("Y2", &ws.y2)]
            .iter()
            .find(|(_, s)| s.contains(&w))
            .map_or("?", |(n, _)| n)
    };
    let mut kinds = BTreeMap::new();
    for i in 0..2000 {
        for (x, y) in generate_episode(&ws, &cfg, Split::Train, 0, i)?.discovery {
            *kinds.entry(format!("{}x{}", pool(x), pool(y))).or_insert(0usize) += 1;
        }
    }
    println!("training pair kinds over 2000 episodes: {kinds:?}");

    let episodes: Vec<_> = (0..4).map(|i| generate_episode(&ws, &cfg, Split::Eval, 0, i)).collect::<Result<_>>()?;
    for ep in &episodes {
        println!("eval pairs {:?} queries {:?} targets {:?}", ep.discovery, ep.queries, ep.targets);
    }
    if let Some(path) = args.get(1) {
        write_episodes_jsonl(BufWriter::new(std::fs::File::create(path)?), &episodes)?;
        println!("wrote {path}");
    }
    Ok(())
}
