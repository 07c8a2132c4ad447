use std::collections::BTreeMap;

use lrwt_core::corpus::{generate_corpus, CorpusConfig};
use lrwt_core::dataset::{generate_chains, generate_pairs, ChainConfig, ChainDataset, RewriteExample};
use lrwt_core::graph::{build_vocabulary, encode, Vocabulary};
use lrwt_core::rewrite::rewrite_calls;
use lrwt_core::{RewriteLimits, Split, TheoremDatabase};
use lrwt_eval::pca::project;
use lrwt_eval::report::{read_l2, read_metrics, read_projection, read_roc, write_l2, write_metrics, write_projection, write_roc};
use lrwt_eval::{
    propagate_step, roc_auc, usage_frequencies, EvalConfig, EvalError, Evaluator, Method, PropagationState,
};
use lrwt_models::zoo::{alpha_calls, e_prime_calls, AlphaConfig, CombinerConfig, ModelBundle, OmegaConfig, SigmaConfig};
use lrwt_models::{AlphaModel, OmegaModel, SigmaModel, TowerConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mann–Whitney U over P·N, counting every pair.
fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut u = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                u += 1.0;
            } else if p == n {
                u += 0.5;
            }
        }
    }
    u / (pos.len() * neg.len()) as f64
}

fn tied_scores(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25 - 3.0).collect()
}

#[test]
fn auc_equals_brute_force_mann_whitney() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let np = rng.random_range(1..=200);
        let nn = rng.random_range(1..=200);
        let levels = rng.random_range(1..40);
        let pos = tied_scores(&mut rng, np, levels);
        let neg = tied_scores(&mut rng, nn, levels);
        let c = roc_auc(&pos, &neg).unwrap();
        worst = worst.max((c.auc - brute_auc(&pos, &neg)).abs());
    }
    assert!(worst < 1e-12, "{worst}");
}

proptest! {
    #[test]
    fn roc_is_symmetric_and_monotone(seed in any::<u64>(), np in 1usize..80, nn in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = tied_scores(&mut rng, np, 12);
        let neg = tied_scores(&mut rng, nn, 12);
        let a = roc_auc(&pos, &neg).unwrap();
        let b = roc_auc(&neg, &pos).unwrap();
        prop_assert!((a.auc + b.auc - 1.0).abs() < 1e-12);
        prop_assert!((a.trapezoid_area() - a.auc).abs() < 1e-12);
        prop_assert_eq!(a.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(a.points.last().copied(), Some((1.0, 1.0)));
        for w in a.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&a.auc));
    }

    #[test]
    fn projection_orders_variances_and_centres(seed in any::<u64>(), n in 3usize..40, dim in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64 + 5.0).collect()).collect();
        let p = project(&vs).unwrap();
        prop_assert_eq!(p.coords.len(), n);
        prop_assert!(p.variances[0] + 1e-12 >= p.variances[1]);
        for k in 0..2 {
            let mean = p.coords.iter().map(|c| c[k]).sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-9, "{mean}");
        }
    }
}

#[test]
fn roc_rejects_empty_sides_and_nan() {
    assert!(matches!(roc_auc(&[], &[1.0]), Err(EvalError::EmptyRocSide { .. })));
    assert!(matches!(roc_auc(&[1.0], &[]), Err(EvalError::EmptyRocSide { .. })));
    assert!(roc_auc(&[f64::NAN], &[1.0]).is_err());
}

struct Fixture {
    db: TheoremDatabase,
    vocab: Vocabulary,
    chains: ChainDataset,
    pool: Vec<String>,
    pairs: Vec<RewriteExample>,
    models: ModelBundle,
}

fn fixture() -> &'static Fixture {
    static F: std::sync::OnceLock<Fixture> = std::sync::OnceLock::new();
    F.get_or_init(|| {
        let db = generate_corpus(7, 300, &CorpusConfig::default()).unwrap();
        let vocab = build_vocabulary(&db);
        let chains = generate_chains(&db, &ChainConfig::default(), RewriteLimits::default(), 7).unwrap();
        let pool = db.split(Split::Train).map(|t| t.name.clone()).collect();
        let pairs = generate_pairs(&db, Split::Train, RewriteLimits::default());
        let tower = TowerConfig {
            hops: 2,
            node_dim: 8,
            embed_dim: 6,
            vocab_size: vocab.len(),
        };
        let combiner = CombinerConfig { hidden: 8, layers: 2 };
        let models = ModelBundle {
            sigma: SigmaModel::new(SigmaConfig { tower, combiner }, 1).unwrap(),
            omega: OmegaModel::new(OmegaConfig { tower, combiner }, 2).unwrap(),
            alpha: AlphaModel::new(AlphaConfig { embed_dim: 6, hidden: 8 }, 3).unwrap(),
        };
        Fixture {
            db,
            vocab,
            chains,
            pool,
            pairs,
            models,
        }
    })
}

fn small_eval() -> EvalConfig {
    EvalConfig {
        max_statements: 6,
        ..EvalConfig::default()
    }
}

#[test]
fn depth_d_propagation_counts_calls() {
    let f = fixture();
    let m = &f.models;
    for depth in 1..=4 {
        let (_, path) = f.chains.path(depth, 0);
        assert_eq!(path.len(), depth);
        let root = &f.chains.layers[0][node_root(&f.chains, depth)].statement;
        let mut state = PropagationState::start(&m.omega, &encode(root, &f.vocab)).unwrap();
        let params: Vec<_> = path
            .iter()
            .map(|p| m.omega.pi.embed(&m.omega.store, &encode(&f.db.get(p).unwrap().statement, &f.vocab)).unwrap())
            .collect();
        let (e0, a0, r0) = (e_prime_calls(), alpha_calls(), rewrite_calls());
        for (name, p) in path.iter().zip(&params) {
            state = propagate_step(&state, &m.omega, &m.alpha, name, p).unwrap();
        }
        assert_eq!(e_prime_calls() - e0, depth as u64);
        assert_eq!(alpha_calls() - a0, depth as u64 - 1);
        assert_eq!(rewrite_calls() - r0, 0);
        assert_eq!(state.depth, depth);
        assert_eq!(state.chain, path);
        assert!(state.vec_l.is_some() && state.vec_lp().is_none());
    }
}

fn node_root(chains: &ChainDataset, mut layer: usize) -> usize {
    let mut idx = 0;
    while layer > 0 {
        idx = chains.layers[layer][idx].parent.unwrap();
        layer -= 1;
    }
    idx
}

#[test]
fn one_and_multi_step_agree_at_depth_one() {
    let f = fixture();
    let usage = usage_frequencies(&f.pairs);
    let mut ev = Evaluator::new(&f.db, &f.vocab, &f.chains, &f.pool, &usage, Some(&f.models), small_eval()).unwrap();
    let one = ev.evaluate_depths(Method::PredOneStep).unwrap();
    let multi = ev.evaluate_depths(Method::PredMultiStep).unwrap();
    assert_eq!(one[0].curve, multi[0].curve);
    let l2 = ev.l2_report().unwrap();
    assert_eq!(l2[0].mean_onestep, l2[0].mean_multistep);
    assert_eq!(l2.len(), 4);
}

#[test]
fn usage_baseline_needs_no_models() {
    let f = fixture();
    let usage = usage_frequencies(&f.pairs);
    let mut ev = Evaluator::new(&f.db, &f.vocab, &f.chains, &f.pool, &usage, None, small_eval()).unwrap();
    let r = ev.evaluate_depths(Method::UsageBaseline).unwrap();
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|d| d.n_pos > 0 && d.n_neg > 0));
    assert!(matches!(ev.evaluate_depths(Method::True), Err(EvalError::ModelsRequired("true"))));
}

#[test]
fn usage_frequencies_are_success_rates() {
    let f = fixture();
    let usage = usage_frequencies(&f.pairs);
    let mut counts: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for e in &f.pairs {
        let c = counts.entry(&e.param).or_default();
        c.0 += e.label as f64;
        c.1 += 1.0;
    }
    assert_eq!(usage.len(), counts.len());
    for (p, (s, n)) in counts {
        assert_eq!(usage[p], s / n);
    }
}

#[test]
fn evaluation_leaves_parameters_alone_and_is_repeatable() {
    let f = fixture();
    let before = f.models.checksum();
    let usage = usage_frequencies(&f.pairs);
    let run = || {
        let mut ev = Evaluator::new(&f.db, &f.vocab, &f.chains, &f.pool, &usage, Some(&f.models), small_eval()).unwrap();
        let mut all = Vec::new();
        for m in Method::ALL {
            all.extend(ev.evaluate_depths(m).unwrap());
        }
        (all, ev.l2_report().unwrap(), ev.projection().unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(f.models.checksum(), before);
    assert_eq!(a.0.len(), 4 * Method::ALL.len());
    assert_eq!(a.2.len(), 4 * 6);

    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    write_metrics(&p("m.csv"), &a.0).unwrap();
    write_roc(&p("r.csv"), &a.0).unwrap();
    write_l2(&p("l.csv"), &a.1).unwrap();
    write_projection(&p("p.csv"), &a.2).unwrap();
    let metrics = read_metrics(&p("m.csv")).unwrap();
    assert_eq!(metrics.len(), 20);
    let mut sorted = a.0.clone();
    sorted.sort_by_key(|r| (r.depth, r.method));
    for (row, r) in metrics.iter().zip(&sorted) {
        assert_eq!((row.depth, row.method, row.auc, row.n_pos, row.n_neg), (r.depth, r.method, r.curve.auc, r.n_pos, r.n_neg));
    }
    let roc = read_roc(&p("r.csv")).unwrap();
    assert_eq!(roc.len(), a.0.iter().map(|r| r.curve.points.len()).sum::<usize>());
    assert_eq!(read_l2(&p("l.csv")).unwrap(), a.1);
    assert_eq!(read_projection(&p("p.csv")).unwrap(), a.2);
}

#[test]
fn empty_inputs_are_rejected() {
    let f = fixture();
    let usage = BTreeMap::new();
    assert!(matches!(
        Evaluator::new(&f.db, &f.vocab, &f.chains, &[], &usage, None, small_eval()),
        Err(EvalError::EmptyPool)
    ));
    let mut chains = f.chains.clone();
    chains.layers[2].clear();
    assert!(matches!(
        Evaluator::new(&f.db, &f.vocab, &chains, &f.pool, &usage, None, small_eval()),
        Err(EvalError::EmptyLayer(2))
    ));
}

#[test]
fn method_names_parse_back() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        assert_eq!(m.name().replace('_', "-").parse::<Method>().unwrap(), m);
    }
    assert!("best".parse::<Method>().is_err());
}
