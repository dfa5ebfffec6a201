use std::collections::HashSet;

use aid_tpr::backend::Tensor;
use aid_tpr::sar::*;
use proptest::prelude::*;

fn membership(ws: &WordSets) -> (HashSet<usize>, HashSet<usize>) {
    (ws.x1.iter().copied().collect(), ws.y2.iter().copied().collect())
}

#[test]
fn split_soundness_over_ten_thousand_episodes() {
    for p in [0.0, 0.5, 1.0] {
        let cfg = SarConfig::desk(p);
        let ws = word_sets_for(&cfg).unwrap();
        let (x1, y2) = membership(&ws);
        for i in 0..10_000 {
            let tr = generate_episode(&ws, &cfg, Split::Train, 3, i).unwrap();
            assert!(tr.discovery.iter().all(|(x, y)| !(x1.contains(x) && y2.contains(y))), "p={p} episode {i}: {tr:?}");
            let ev = generate_episode(&ws, &cfg, Split::Eval, 3, i).unwrap();
            assert!(ev.discovery.iter().all(|(x, y)| x1.contains(x) && y2.contains(y)));
        }
    }
}

#[test]
fn train_pairs_come_from_legal_pools() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let set = |v: &[usize]| v.iter().copied().collect::<HashSet<_>>();
    let (x1, x2, x3, y1, y2) = (set(&ws.x1), set(&ws.x2), set(&ws.x3), set(&ws.y1), set(&ws.y2));
    let mut seen = [0usize; 3];
    for i in 0..2000 {
        for (x, y) in generate_episode(&ws, &cfg, Split::Train, 0, i).unwrap().discovery {
            let kind = if x1.contains(&x) && y1.contains(&y) {
                0
            } else if x2.contains(&x) && y2.contains(&y) {
                1
            } else if x3.contains(&x) && (y1.contains(&y) || y2.contains(&y)) {
                2
            } else {
                panic!("illegal train pair ({x}, {y})");
            };
            seen[kind] += 1;
        }
    }
    // Types are drawn uniformly, so each gets about a third of the pairs.
    for n in seen {
        assert!((n as f64 / 8000.0 - 1.0 / 3.0).abs() < 0.03, "{seen:?}");
    }
}

#[test]
fn word_sets_are_disjoint_and_cover_the_vocabulary() {
    for p in [0.0, 0.3, 1.0] {
        let ws = word_sets_for(&SarConfig::full(p)).unwrap();
        let all: Vec<usize> = [&ws.x1, &ws.x2, &ws.x3, &ws.y1, &ws.y2].into_iter().flatten().copied().collect();
        assert_eq!(all.len(), 1000);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 1000);
    }
}

#[test]
fn word_set_split_sizes() {
    let words: Vec<usize> = (0..1000).collect();
    let ws = build_word_sets(&words, [250; 4], 0.0, 9).unwrap();
    assert!(ws.x3.is_empty());
    let ws = build_word_sets(&words, [250; 4], 0.5, 9).unwrap();
    assert_eq!((ws.x2.len(), ws.x3.len()), (125, 125));
    let ws = build_word_sets(&words, [250; 4], 1.0, 9).unwrap();
    assert!(ws.x2.is_empty());
    assert!(build_word_sets(&words, [250, 250, 250, 251], 0.5, 9).is_err());
    assert!(build_word_sets(&words, [250; 4], 1.5, 9).is_err());
}

#[test]
fn build_word_sets_is_deterministic_per_seed() {
    let words: Vec<usize> = (0..1000).collect();
    let a = build_word_sets(&words, [250; 4], 0.5, 4).unwrap();
    assert_eq!(a, build_word_sets(&words, [250; 4], 0.5, 4).unwrap());
    assert_ne!(a.x3, build_word_sets(&words, [250; 4], 0.5, 5).unwrap().x3);
}

#[test]
fn episode_shape_and_bijection() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    for split in [Split::Train, Split::Eval] {
        for i in 0..500 {
            let ep = generate_episode(&ws, &cfg, split, 1, i).unwrap();
            assert_eq!((ep.discovery.len(), ep.queries.len(), ep.targets.len()), (4, 4, 4));
            assert_eq!(ep.len(), 8);
            let xs: HashSet<_> = ep.discovery.iter().map(|p| p.0).collect();
            let ys: HashSet<_> = ep.discovery.iter().map(|p| p.1).collect();
            assert_eq!((xs.len(), ys.len()), (4, 4));
            assert_eq!(ep.queries.iter().collect::<HashSet<_>>().len(), 4);
            for (q, t) in ep.queries.iter().zip(&ep.targets) {
                assert!(ep.discovery.contains(&(*q, *t)));
            }
        }
    }
}

#[test]
fn queries_are_reordered() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let same = (0..1000)
        .filter(|&i| {
            let ep = generate_episode(&ws, &cfg, Split::Train, 2, i).unwrap();
            ep.discovery.iter().map(|p| p.0).eq(ep.queries.iter().copied())
        })
        .count();
    // 1/24 of uniform permutations are the identity.
    assert!((10..90).contains(&same), "{same}");
}

#[test]
fn generation_is_deterministic_and_index_dependent() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let a = generate_episode(&ws, &cfg, Split::Train, 5, 17).unwrap();
    assert_eq!(a, generate_episode(&ws, &cfg, Split::Train, 5, 17).unwrap());
    assert_ne!(a, generate_episode(&ws, &cfg, Split::Train, 5, 18).unwrap());
    assert_ne!(a, generate_episode(&ws, &cfg, Split::Train, 6, 17).unwrap());
}

#[test]
fn encoding_layout() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let n = cfg.n_words();
    let emb = Tensor::<f64>::from_vec(&[n, 50], (0..n * 50).map(|i| i as f64 + 1.0).collect()).unwrap();
    let ep = generate_episode(&ws, &cfg, Split::Train, 0, 0).unwrap();
    let enc = encode_episode(&ep, &ws, &emb).unwrap();
    assert_eq!(enc.inputs.len(), 8);
    assert!(enc.inputs.iter().all(|v| v.len() == 102));
    assert_eq!(enc.loss_positions, vec![4, 5, 6, 7]);
    for (t, &(x, y)) in ep.discovery.iter().enumerate() {
        assert_eq!(&enc.inputs[t][..50], emb.row(x));
        assert_eq!(&enc.inputs[t][50..100], emb.row(y));
    }
    for (q, &x) in ep.queries.iter().enumerate() {
        let v = &enc.inputs[4 + q];
        assert_eq!(&v[..50], emb.row(x));
        assert!(v[50..100].iter().all(|&z| z == 0.0));
    }
    let flags: Vec<[f64; 2]> = enc.inputs.iter().map(|v| [v[100], v[101]]).collect();
    let mut expect = vec![[0.0; 2]; 8];
    expect[0] = [1.0, 0.0];
    expect[4] = [0.0, 1.0];
    assert_eq!(flags, expect);
    let classes: Vec<usize> = ep.targets.iter().map(|&y| ws.class_of(y).unwrap()).collect();
    assert_eq!(enc.targets, classes);
    assert!(classes.iter().zip(&ep.targets).all(|(&c, &y)| ws.word_of_class(c) == y));
}

#[test]
fn encoding_rejects_unknown_words() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let emb = Tensor::<f64>::zeros(&[10, 50]);
    let ep = Episode { split: Split::Eval, discovery: vec![(0, 150)], queries: vec![0], targets: vec![150] };
    assert!(encode_episode(&ep, &ws, &emb).is_err());
}

#[test]
fn batch_steps_match_episodes() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let eps: Vec<Episode> = (0..3).map(|i| generate_episode(&ws, &cfg, Split::Train, 0, i).unwrap()).collect();
    let (steps, targets) = batch_steps(&eps, &ws).unwrap();
    assert_eq!(steps.len(), 8);
    assert_eq!(targets.len(), 4);
    for (b, ep) in eps.iter().enumerate() {
        for t in 0..4 {
            assert_eq!(steps[t].x[b], ep.discovery[t].0);
            assert_eq!(steps[t].y.as_ref().unwrap()[b], ep.discovery[t].1);
            assert_eq!(steps[4 + t].x[b], ep.queries[t]);
            assert!(steps[4 + t].y.is_none());
            assert_eq!(ws.word_of_class(targets[t][b]), ep.targets[t]);
        }
    }
    assert_eq!(steps[0].flags, [1.0, 0.0]);
    assert_eq!(steps[4].flags, [0.0, 1.0]);
}

#[test]
fn jsonl_round_trip() {
    let cfg = SarConfig::desk(0.5);
    let ws = word_sets_for(&cfg).unwrap();
    let eps: Vec<Episode> = (0..5).map(|i| generate_episode(&ws, &cfg, Split::Eval, 0, i).unwrap()).collect();
    let mut buf = Vec::new();
    write_episodes_jsonl(&mut buf, &eps).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["split", "pairs", "queries", "targets"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    assert_eq!(first["split"], "eval");
    assert_eq!(read_episodes_jsonl(&buf[..]).unwrap(), eps);
}

#[test]
fn word_list_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("words.txt");
    std::fs::write(&path, "apple\nbanana\n\ncherry\n").unwrap();
    assert_eq!(read_word_list(&path).unwrap(), vec!["apple", "banana", "cherry"]);
    std::fs::write(&path, "apple\napple\n").unwrap();
    assert!(read_word_list(&path).is_err());
}

proptest! {
    #[test]
    fn p_round_trips(p in 0.0f64..=1.0, n in 1usize..300, seed in any::<u64>()) {
        let words: Vec<usize> = (0..n + 3).collect();
        let ws = build_word_sets(&words, [1, n, 1, 1], p, seed).unwrap();
        prop_assert!((ws.p() - p).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn train_never_shows_eval_combinations(p in 0.0f64..1.0, seed in any::<u64>(), index in any::<u64>()) {
        let cfg = SarConfig { p, ..SarConfig::desk(p) };
        let ws = word_sets_for(&cfg).unwrap();
        let (x1, y2) = membership(&ws);
        let ep = generate_episode(&ws, &cfg, Split::Train, seed, index).unwrap();
        prop_assert!(ep.discovery.iter().all(|(x, y)| !(x1.contains(x) && y2.contains(y))));
    }
}
