use std::collections::HashSet;

use aid_tpr::analysis::*;
use aid_tpr::sar::{generate_episode, word_sets_for, Split};
use aid_tpr::train::{init_model, Experiment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fast_forest() -> ForestConfig {
    ForestConfig { n_trees: 20, ..ForestConfig::default() }
}

#[test]
fn cosine_hand_values() {
    let m = cosine_matrix(&[vec![1.0, 0.0]], &[vec![1.0, 1.0], vec![0.0, 3.0], vec![0.0, 0.0]]);
    assert!((m[0][0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert_eq!(m[0][1], 0.0);
    assert_eq!(m[0][2], 0.0);
    let units = vec![vec![0.6, 0.8], vec![1.0, 0.0]];
    let m = cosine_matrix(&units, &units);
    assert!((m[0][0] - 1.0).abs() < 1e-12 && (m[1][1] - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn cosine_is_scale_invariant_and_bounded(
        a in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..5),
        b in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..5),
        c in 0.01f64..100.0,
    ) {
        let scaled: Vec<Vec<f64>> = a.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        let (m1, m2) = (cosine_matrix(&a, &b), cosine_matrix(&scaled, &b));
        for (r1, r2) in m1.iter().zip(&m2) {
            for (x, y) in r1.iter().zip(r2) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!(x.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn dci_scores_lie_in_unit_interval(r in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 3)) {
        prop_assume!(r.iter().flatten().sum::<f64>() > 1e-9);
        let (d, c) = dci_from_importance(&r).unwrap();
        prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&c));
    }
}

#[test]
fn one_hot_importance_gives_perfect_scores() {
    let r = vec![vec![0.5, 0.0], vec![0.0, 0.0], vec![0.0, 0.5]];
    assert_eq!(dci_from_importance(&r).unwrap(), (1.0, 1.0));
    let r = vec![vec![0.3, 0.0], vec![0.0, 0.7]];
    assert_eq!(dci_from_importance(&r).unwrap(), (1.0, 1.0));
}

#[test]
fn uniform_importance_gives_zero_scores() {
    let r = vec![vec![0.1; 2]; 3];
    let (d, c) = dci_from_importance(&r).unwrap();
    assert!(d.abs() < 1e-12 && c.abs() < 1e-12, "{d} {c}");
}

#[test]
fn dci_hand_computed_mixture() {
    // Block 0 splits 3:1 over factors, block 1 is pure factor 1.
    let r = vec![vec![0.3, 0.1], vec![0.0, 0.6]];
    let h = |p: &[f64]| -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>();
    let d = 0.4 * (1.0 - h(&[0.75, 0.25])) + 0.6;
    let c = ((1.0 - h(&[1.0, 0.0])) + (1.0 - h(&[1.0 / 7.0, 6.0 / 7.0]))) / 2.0;
    let (gd, gc) = dci_from_importance(&r).unwrap();
    assert!((gd - d).abs() < 1e-12 && (gc - c).abs() < 1e-12);
    assert!(dci_from_importance(&[vec![0.0, 0.0]]).is_err());
    assert!(dci_from_importance(&[vec![1.0], vec![1.0, 2.0]]).is_err());
}

/// Block 0 encodes x, block 1 is noise, block 2 encodes y.
fn synthetic(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut feats = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let (x, y) = (rng.gen_range(0..8), rng.gen_range(0..8));
        let mut f = code[x].clone();
        f.extend((0..3).map(|_| rng.gen_range(-1.0..1.0)));
        f.extend(code[y].iter().map(|v| -v));
        feats.push(f);
        xs.push(x);
        ys.push(y + 100);
    }
    (feats, vec![xs, ys])
}

#[test]
fn dci_recovers_planted_structure() {
    let (f, k) = synthetic(600, 1);
    let (s, r) = dci_block(&f, &k, &contiguous_blocks(3, 3), fast_forest(), 0).unwrap();
    assert!(s.i > 0.95, "{s:?}");
    assert!(r[1][0] < 0.05 && r[1][1] < 0.05, "{r:?}");
    let (d, c) = dci_from_importance(&[r[0].clone(), r[2].clone()]).unwrap();
    assert!(d > 0.9 && c > 0.85, "{d} {c} {r:?}");
}

#[test]
fn dci_is_stable_under_within_block_permutation() {
    let (f, k) = synthetic(600, 2);
    let perm = [2, 0, 1, 4, 5, 3, 8, 6, 7];
    let g: Vec<Vec<f64>> = f.iter().map(|r| perm.iter().map(|&i| r[i]).collect()).collect();
    let blocks = contiguous_blocks(3, 3);
    let (a, _) = dci_block(&f, &k, &blocks, fast_forest(), 3).unwrap();
    let (b, _) = dci_block(&g, &k, &blocks, fast_forest(), 3).unwrap();
    assert!((a.d - b.d).abs() < 0.05 && (a.c - b.c).abs() < 0.05, "{a:?} {b:?}");
}

#[test]
fn dci_rejects_constant_factor() {
    let (f, mut k) = synthetic(100, 3);
    k[1] = vec![7; 100];
    assert!(dci_block(&f, &k, &contiguous_blocks(3, 3), fast_forest(), 0).is_err());
}

#[test]
fn forest_learns_threshold_rule_and_ignores_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<Vec<f64>> = (0..400).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let y: Vec<usize> = x.iter().map(|r| usize::from(r[1] > 0.4) + usize::from(r[1] > 0.8)).collect();
    let forest = Forest::fit(&x, &y, 3, fast_forest(), &mut rng).unwrap();
    assert!(forest.accuracy(&x, &y) > 0.99);
    assert!((forest.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(forest.importances[1] > 0.9, "{:?}", forest.importances);
    assert_eq!(forest.predict(&[0.5, 0.1, 0.5]), 0);
    assert_eq!(forest.predict(&[0.5, 0.95, 0.5]), 2);
}

#[test]
fn single_stump_finds_the_midpoint_split() {
    // Separable on feature 0 between 2 and 3; every bootstrap sample that
    // contains both classes must split there.
    let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
    let y = vec![0, 0, 1, 1];
    let cfg = ForestConfig { n_trees: 50, max_depth: 1, ..ForestConfig::default() };
    let f = Forest::fit(&x, &y, 2, cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(f.predict(&[2.4]), 0);
    assert_eq!(f.predict(&[2.6]), 1);
}

#[test]
fn trace_counts_widths_and_factors() {
    let exp = Experiment::desk(0.5);
    let ws = word_sets_for(&exp.sar).unwrap();
    let (model, store) = init_model::<f32>(&exp, 0).unwrap();
    let eps: Vec<_> = (0..3).map(|i| generate_episode(&ws, &exp.sar, Split::Eval, 0, i).unwrap()).collect();
    let traces = collect_traces(&model, &store, &ws, &eps).unwrap();
    assert_eq!(traces.len(), 3 * 8);
    for (e, ep) in eps.iter().enumerate() {
        let mine: Vec<_> = traces.iter().filter(|t| t.episode == e).collect();
        let enc: Vec<_> = mine.iter().filter(|t| t.phase == Phase::Discovery).collect();
        let dec: Vec<_> = mine.iter().filter(|t| t.phase == Phase::Inference).collect();
        assert_eq!((enc.len(), dec.len()), (4, 4));
        for (t, r) in enc.iter().enumerate() {
            assert_eq!((r.x, r.y), ep.discovery[t]);
            assert_eq!(r.components.len(), 3);
            assert!(r.components.iter().all(|c| c.len() == exp.model.d_com()));
        }
        for (q, r) in dec.iter().enumerate() {
            assert_eq!((r.x, r.y), (ep.queries[q], ep.targets[q]));
            assert_eq!(r.components.len(), 1 + exp.model.n_read);
        }
    }
    let again = collect_traces(&model, &store, &ws, &eps).unwrap();
    assert_eq!(traces, again);

    let mut buf = Vec::new();
    write_traces(&mut buf, &traces).unwrap();
    let back = read_traces(&buf[..]).unwrap();
    assert_eq!(back, traces);
    assert!(read_traces("discovery,0,0,1,2,1,2,0.5\n".as_bytes()).is_err());
}

#[test]
fn orthogonality_on_planted_traces() {
    // Orthonormal roles, unbinding operators equal to the roles.
    let e = |i: usize| (0..4).map(|k| if k == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let mut traces = Vec::new();
    for x in 0..3 {
        let role = vec![e(x), e(0), e(3)];
        traces.push(ComponentTrace { phase: Phase::Discovery, episode: x, step: 0, x, y: 9, components: role.clone() });
        traces.push(ComponentTrace { phase: Phase::Inference, episode: x, step: 1, x, y: 9, components: vec![e(x), e(0)] });
    }
    let r = orthogonality_report(&traces, 9).unwrap();
    assert_eq!(r.xs, vec![0, 1, 2]);
    assert_eq!(r.mean_diag_role_unbind, 1.0);
    assert_eq!(r.mean_offdiag_role_unbind, 0.0);
    assert_eq!(r.mean_offdiag_role_role, 0.0);
    assert!(orthogonality_report(&traces, 8).is_err());
    assert!(orthogonality_report(&traces[..2], 9).is_err());
}

#[test]
fn probe_episodes_place_the_fixed_pair() {
    let exp = Experiment::desk(0.5);
    let ws = word_sets_for(&exp.sar).unwrap();
    let y = ws.y2[0];
    let xs: Vec<usize> = ws.x1[..10].to_vec();
    let eps = ortho_episodes(&ws, &exp.sar, y, &xs, 0).unwrap();
    for (ep, &x) in eps.iter().zip(&xs) {
        assert_eq!(ep.discovery[0], (x, y));
        let dx: HashSet<_> = ep.discovery.iter().map(|p| p.0).collect();
        let dy: HashSet<_> = ep.discovery.iter().map(|p| p.1).collect();
        assert_eq!((dx.len(), dy.len()), (4, 4));
        for (q, t) in ep.queries.iter().zip(&ep.targets) {
            assert!(ep.discovery.contains(&(*q, *t)));
        }
    }
}

#[test]
fn labeled_matrix_csv() {
    let mut buf = Vec::new();
    let labels = vec!["x1".to_string(), "x2".to_string()];
    write_labeled_matrix(&mut buf, &labels, &labels, &[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), ",x1,x2\nx1,1,0.5\nx2,0.5,1\n");
}
