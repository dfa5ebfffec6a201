use aid_tpr::backend::{gradcheck, GradcheckOptions, Graph, ParamStore, Tensor};
use aid_tpr::model::{Model, ModelConfig, RunOptions, StepTokens};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

/// Four words, four classes, memory width 4.
fn tiny(use_aid: bool) -> ModelConfig {
    let mut cfg = ModelConfig::sar(8, 4);
    cfg.d_embed = 3;
    cfg.d_sub = 2;
    cfg.d_lstm = 3;
    cfg.d_mem = 4;
    cfg.use_aid = use_aid;
    cfg.set_n_inputs(2);
    cfg.update_aid(|a| {
        a.d_inputs = 3;
        a.d_com = 4;
        a.d_mlp_update = (5, 4);
        a.d_mlp_final = 4;
    });
    cfg
}

fn build(cfg: ModelConfig, seed: u64) -> (ParamStore<f64>, Model) {
    let mut store = ParamStore::new();
    let model = Model::new(cfg, &mut store, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (store, model)
}

/// Two discovery items then two queries, for a batch of one.
fn mini_episode() -> Vec<(usize, Option<usize>, [f64; 2])> {
    vec![(0, Some(5), [1.0, 0.0]), (2, Some(4), [0.0, 0.0]), (2, None, [0.0, 1.0]), (0, None, [0.0, 0.0])]
}

fn as_tokens(ep: &[(usize, Option<usize>, [f64; 2])]) -> Vec<StepTokens> {
    ep.iter().map(|&(x, y, flags)| StepTokens { x: vec![x], y: y.map(|y| vec![y]), flags }).collect()
}

fn logits(model: &Model, store: &ParamStore<f64>, steps: &[StepTokens], opts: RunOptions) -> Vec<Vec<f64>> {
    let mut g = Graph::new();
    let out = model.forward(&mut g, store, steps, opts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    out.iter().map(|s| g.value(s.logits).data().to_vec()).collect()
}

#[test]
fn parameter_counts_differ_by_aid() {
    for cfg in [tiny(true), ModelConfig::sar(200, 80)] {
        let mut base_cfg = cfg.clone();
        base_cfg.use_aid = false;
        let (with, m) = build(cfg, 0);
        let (without, b) = build(base_cfg, 0);
        assert_eq!(with.count() - without.count(), m.aid_param_count());
        assert_eq!(b.aid_param_count(), 0);
        assert_eq!(with.count_prefix("aid."), m.aid_param_count());
    }
}

#[test]
fn partition_chunks_are_contiguous_slices() {
    let (store, model) = build(tiny(true), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..2 * model.cfg.d_step()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut g = Graph::new();
    let xv = g.input(Tensor::from_vec(&[2, model.cfg.d_step()], x.clone()).unwrap());
    let chunks = model.partition_transform(&mut g, &store, xv).unwrap();
    assert_eq!(g.shape(chunks), &[4, 2]);
    for b in 0..2 {
        let full = common::linear(&store, "partition", &x[b * 8..(b + 1) * 8]);
        for i in 0..2 {
            let got = g.value(chunks).row(b * 2 + i);
            assert!(got.iter().zip(&full[i * 2..(i + 1) * 2]).all(|(a, e)| (a - e).abs() < 1e-12));
        }
    }
    // zero input with zero bias gives zero chunks
    let mut zeroed = store.clone();
    zeroed.get_mut(zeroed.find("partition.bias").unwrap()).data_mut().iter_mut().for_each(|v| *v = 0.0);
    let mut g = Graph::new();
    let z = g.input(Tensor::zeros(&[1, 8]));
    let chunks = model.partition_transform(&mut g, &zeroed, z).unwrap();
    assert!(g.value(chunks).data().iter().all(|&v| v == 0.0));
}

#[test]
fn modular_lstm_matches_cell_oracle_and_shares_weights() {
    let mut cfg = tiny(true);
    cfg.d_sub = 2;
    cfg.d_lstm = 2;
    cfg.update_aid(|a| a.d_inputs = 2);
    let (store, model) = build(cfg, 3);
    let chunks = [vec![0.3, -0.8], vec![0.3, -0.8], vec![1.2, 0.1]];
    let hs = [vec![0.1, 0.2], vec![0.1, 0.2], vec![-0.4, 0.5]];
    let cs = [vec![0.0, -0.3], vec![0.0, -0.3], vec![0.2, 0.2]];
    let mut g = Graph::new();
    let x = g.input(Tensor::from_vec(&[3, 2], chunks.concat()).unwrap());
    let h = g.input(Tensor::from_vec(&[3, 2], hs.concat()).unwrap());
    let c = g.input(Tensor::from_vec(&[3, 2], cs.concat()).unwrap());
    let (h2, c2) = model.modular_lstm_step(&mut g, &store, x, h, c).unwrap();
    for r in 0..3 {
        let (eh, ec) = common::lstm_cell(&store, "lstm", &chunks[r], &hs[r], &cs[r]);
        assert!(g.value(h2).row(r).iter().zip(&eh).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!(g.value(c2).row(r).iter().zip(&ec).all(|(a, b)| (a - b).abs() < 1e-6));
    }
    assert_eq!(g.value(h2).row(0), g.value(h2).row(1));
    // permuting chunks and their states permutes the outputs
    let perm = [2, 0, 1];
    let px = g.input(Tensor::from_vec(&[3, 2], perm.iter().flat_map(|&i| chunks[i].clone()).collect()).unwrap());
    let ph = g.input(Tensor::from_vec(&[3, 2], perm.iter().flat_map(|&i| hs[i].clone()).collect()).unwrap());
    let pc = g.input(Tensor::from_vec(&[3, 2], perm.iter().flat_map(|&i| cs[i].clone()).collect()).unwrap());
    let (ph2, _) = model.modular_lstm_step(&mut g, &store, px, ph, pc).unwrap();
    for (r, &src) in perm.iter().enumerate() {
        assert_eq!(g.value(ph2).row(r), g.value(h2).row(src));
    }
}

#[test]
fn initial_components_reshape_row_major() {
    let cfg = ModelConfig::sar(200, 80);
    let (store, model) = build(cfg, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hcat: Vec<f64> = (0..255).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut g = Graph::new();
    let hv = g.input(Tensor::from_vec(&[1, 255], hcat.clone()).unwrap());
    let enc = model.make_initial_components(&mut g, &store, hv, false).unwrap();
    assert_eq!(g.shape(enc), &[1, 3, 32]);
    let flat = common::linear(&store, "init_enc", &hcat);
    for j in 0..3 {
        let row = &g.value(enc).data()[j * 32..(j + 1) * 32];
        assert!(row.iter().zip(&flat[j * 32..(j + 1) * 32]).all(|(a, b)| (a - b).abs() < 1e-12));
    }
    let dec = model.make_initial_components(&mut g, &store, hv, true).unwrap();
    assert_eq!(g.shape(dec), &[1, 2, 32]);
    let mut zeroed = store.clone();
    let b = zeroed.find("init_enc.bias").unwrap();
    zeroed.get_mut(b).data_mut().iter_mut().for_each(|v| *v = 0.0);
    let mut g = Graph::new();
    let z = g.input(Tensor::zeros(&[1, 255]));
    let enc = model.make_initial_components(&mut g, &zeroed, z, false).unwrap();
    assert!(g.value(enc).data().iter().all(|&v| v == 0.0));
}

#[test]
fn episode_matches_straight_line_oracle() {
    for use_aid in [true, false] {
        let (store, model) = build(tiny(use_aid), 6);
        let ep = mini_episode();
        let got = logits(&model, &store, &as_tokens(&ep), RunOptions::default());
        let want = common::model_oracle(&store, &model.cfg, &ep, false);
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.len(), 4);
            assert!(g.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-5), "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn ablated_memory_leaves_only_hidden_path() {
    let (store, model) = build(tiny(true), 7);
    let ep = mini_episode();
    let opts = RunOptions { ablate_memory: true, ..Default::default() };
    let got = logits(&model, &store, &as_tokens(&ep), opts);
    let want = common::model_oracle(&store, &model.cfg, &ep, true);
    for (g, w) in got.iter().zip(&want) {
        assert!(g.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-9));
    }
    // with the memory empty the read is zero, so readout weights on it are irrelevant
    let mut changed = store.clone();
    let w = changed.find("readout.weight").unwrap();
    let hcat = model.cfg.n_inputs * model.cfg.d_lstm;
    for (i, v) in changed.get_mut(w).data_mut().iter_mut().enumerate() {
        if i / model.cfg.n_classes >= hcat {
            *v += 1.0;
        }
    }
    assert_eq!(got, logits(&model, &changed, &as_tokens(&ep), opts));
    assert_ne!(logits(&model, &store, &as_tokens(&ep), RunOptions::default()), logits(&model, &changed, &as_tokens(&ep), RunOptions::default()));
}

#[test]
fn shared_aid_weights_feed_both_paths() {
    let (store, model) = build(tiny(true), 8);
    let steps = as_tokens(&mini_episode());
    let run = |s: &ParamStore<f64>| {
        let mut g = Graph::new();
        let out = model.forward(&mut g, s, &steps, RunOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let enc: Vec<f64> = g.value(out[0].role1).data().to_vec();
        let dec: Vec<f64> = g.value(out[0].n0).data().to_vec();
        (enc, dec)
    };
    let base = run(&store);
    let mut shared = store.clone();
    let q = shared.find("aid.q.weight").unwrap();
    shared.get_mut(q).data_mut()[0] += 0.5;
    let moved = run(&shared);
    assert_ne!(base.0, moved.0);
    assert_ne!(base.1, moved.1);
    // per-mode initial affines are independent
    let mut enc_only = store.clone();
    let e = enc_only.find("init_enc.bias").unwrap();
    enc_only.get_mut(e).data_mut()[0] += 0.5;
    let moved = run(&enc_only);
    assert_ne!(base.0, moved.0);
    assert_eq!(base.1, moved.1);
}

#[test]
fn step_is_deterministic_with_frozen_dropout() {
    let (store, model) = build(tiny(true), 9);
    let steps = as_tokens(&mini_episode());
    let opts = RunOptions { train: true, ..Default::default() };
    assert_eq!(logits(&model, &store, &steps, opts), logits(&model, &store, &steps, opts));
}

#[test]
fn batched_episode_matches_single() {
    let (store, model) = build(tiny(true), 10);
    let a = mini_episode();
    let b: Vec<_> = vec![(1, Some(4), [1.0, 0.0]), (3, Some(6), [0.0, 0.0]), (1, None, [0.0, 1.0]), (3, None, [0.0, 0.0])];
    let batched: Vec<StepTokens> = a
        .iter()
        .zip(&b)
        .map(|(p, q)| StepTokens { x: vec![p.0, q.0], y: p.1.map(|y| vec![y, q.1.unwrap()]), flags: p.2 })
        .collect();
    let both = logits(&model, &store, &batched, RunOptions::default());
    let la = logits(&model, &store, &as_tokens(&a), RunOptions::default());
    let lb = logits(&model, &store, &as_tokens(&b), RunOptions::default());
    for t in 0..4 {
        let want: Vec<f64> = la[t].iter().chain(&lb[t]).copied().collect();
        assert!(both[t].iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

#[test]
fn n_iter_override_keeps_parameters() {
    let (_, model) = build(tiny(true), 11);
    let mut cfg = model.cfg.clone();
    cfg.update_aid(|a| a.n_iter = 5);
    assert!(model.with_config(cfg).is_ok());
    let mut cfg = model.cfg.clone();
    cfg.update_aid(|a| a.use_final_concat = false);
    assert!(model.with_config(cfg).is_err());
}

#[test]
fn end_to_end_gradcheck() {
    for use_aid in [true, false] {
        let (store, model) = build(tiny(use_aid), 12);
        let steps = as_tokens(&mini_episode());
        let report = gradcheck(
            &store,
            |g, s| {
                let out = model.forward(g, s, &steps, RunOptions::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
                let l1 = g.cross_entropy(out[2].logits, &[1])?;
                let l2 = g.cross_entropy(out[3].logits, &[0])?;
                g.add(l1, l2)
            },
            &GradcheckOptions::with_tol(1e-4),
        )
        .unwrap();
        assert!(report.pass, "use_aid={use_aid} {report:?}");
    }
}
