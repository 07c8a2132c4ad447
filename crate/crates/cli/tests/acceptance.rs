//! End-to-end acceptance checks on the shipped configuration (seed 7, 300
//! theorems, 64-wide towers, 4 hops). Prints one line per criterion and
//! exits non-zero if any fails. Two full pipeline runs make this slow.

use std::path::Path;
use std::rc::Rc;

use lrwt_autodiff::gradcheck::{check, random_store};
use lrwt_autodiff::{AutodiffError, Id, ParamStore, Tape, Tensor};
use lrwt_cli::{alignment_loss, alignment_terms, Run, RunConfig, METRICS_FILE};
use lrwt_core::dataset::ChainDataset;
use lrwt_core::graph::{build_vocabulary, encode, Vocabulary};
use lrwt_core::rewrite::rewrite_calls;
use lrwt_core::term::{TermKind, Var};
use lrwt_core::{parse_term, rewrite, RewriteLimits, RewriteOutcome, Split, Term, Theorem};
use lrwt_eval::report::{read_l2, read_metrics};
use lrwt_eval::{propagate_step, roc_auc, Method, PropagationState};
use lrwt_models::checkpoint;
use lrwt_models::train::{alignment_pairs, GraphCache};
use lrwt_models::zoo::{
    alpha_calls, e_prime_calls, omega_hidden, omega_loss, sigma_forward, sigma_loss, AlphaConfig, CombinerConfig,
    OmegaConfig, Pairs, SigmaConfig,
};
use lrwt_models::{AlphaModel, Embedding, GraphBatch, ModelBundle, ModelError, OmegaModel, SigmaModel, Space, TowerConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const GRAD_TOL: f64 = 1e-4;
const H: f64 = 1e-5;
const LOSS_WINDOW: usize = 200;
// windows of LOSS_WINDOW steps over which the mean loss must fall strictly
const SIGMA_WINDOWS: usize = 12;
const OMEGA_WINDOWS: usize = 12;
const ALPHA_WINDOWS: usize = 7;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- rewrite

fn eq_num(l: &str, r: &str) -> String {
    format!("(app (app (c = (fun num (fun num bool))) {l}) {r})")
}

fn forall_num(v: &str, body: &str) -> String {
    format!("(app (c ! (fun (fun num bool) bool)) (abs (v {v} num) {body}))")
}

fn bin(op: &str, a: &str, b: &str) -> String {
    format!("(app (app (c {op} (fun num (fun num num))) {a}) {b})")
}

fn theorem(name: &str, text: &str) -> Result<Theorem, String> {
    Ok(Theorem {
        name: name.into(),
        index: 0,
        statement: parse_term(text).map_err(err)?,
        split: Split::Train,
    })
}

fn rewrite_oracle() -> Outcome {
    let (x, y) = ("(v x num)", "(v y num)");
    let square = theorem("POW_2", &forall_num("x", &eq_num(&bin("^", x, "(c 2 num)"), &bin("*", x, x))))?;
    let comm = theorem("ADD_SYM", &forall_num("x", &forall_num("y", &eq_num(&bin("+", x, y), &bin("+", y, x)))))?;
    let goal = parse_term(&eq_num(&bin("^", "(c 3 num)", "(c 2 num)"), "(v z num)")).map_err(err)?;
    let want = parse_term(&eq_num(&bin("*", "(c 3 num)", "(c 3 num)"), "(v z num)")).map_err(err)?;
    let sum = parse_term(&eq_num(&bin("+", "(c a num)", "(c b num)"), "(c c num)")).map_err(err)?;
    let lim = RewriteLimits::default();
    let a = rewrite(&goal, &square, lim);
    let b = rewrite(&goal, &comm, lim);
    let c = rewrite(&sum, &comm, lim);
    ensure(a == RewriteOutcome::Changed(want), format!("3^2 = z with POW_2 gave {a:?}"))?;
    ensure(b == RewriteOutcome::Unchanged, format!("3^2 = z with ADD_SYM gave {b:?}"))?;
    ensure(c == RewriteOutcome::Diverged, format!("a + b = c with ADD_SYM gave {c:?}"))?;
    Ok("Changed / Unchanged / Diverged as expected".into())
}

// -------------------------------------------------------------- gradients

fn weighted_sum(t: &mut Tape, x: Id, seed: u64) -> Result<Id, AutodiffError> {
    let v = t.value(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Tensor::new(v.shape().to_vec(), Tensor::uniform(1, v.len(), 1.0, &mut rng).into_data())?;
    let w = t.leaf(w);
    let p = t.mul(x, w)?;
    Ok(t.sum_all(p))
}

type PrimCase = (&'static str, Vec<(&'static str, usize, usize)>, fn(&mut Tape, &[Id]) -> Result<Id, AutodiffError>);

fn primitive_cases() -> Vec<PrimCase> {
    vec![
        ("matmul", vec![("a", 4, 3), ("b", 3, 5)], |t, p| {
            let m = t.matmul(p[0], p[1])?;
            weighted_sum(t, m, 1)
        }),
        ("add", vec![("a", 3, 4), ("b", 3, 4)], |t, p| {
            let m = t.add(p[0], p[1])?;
            weighted_sum(t, m, 2)
        }),
        ("sub", vec![("a", 3, 4), ("b", 3, 4)], |t, p| {
            let m = t.sub(p[0], p[1])?;
            weighted_sum(t, m, 3)
        }),
        ("mul", vec![("a", 3, 4), ("b", 3, 4)], |t, p| {
            let m = t.mul(p[0], p[1])?;
            weighted_sum(t, m, 4)
        }),
        ("add_row", vec![("a", 3, 4), ("r", 1, 4)], |t, p| {
            let m = t.add_row(p[0], p[1])?;
            weighted_sum(t, m, 5)
        }),
        ("scale", vec![("a", 3, 4)], |t, p| {
            let m = t.scale(p[0], -2.5);
            weighted_sum(t, m, 6)
        }),
        ("relu", vec![("a", 4, 4)], |t, p| {
            let m = t.relu(p[0]);
            weighted_sum(t, m, 7)
        }),
        ("sigmoid", vec![("a", 3, 4)], |t, p| {
            let s = t.scale(p[0], 3.0);
            let m = t.sigmoid(s);
            weighted_sum(t, m, 8)
        }),
        ("square", vec![("a", 3, 4)], |t, p| {
            let m = t.square(p[0]);
            weighted_sum(t, m, 9)
        }),
        ("concat_cols", vec![("a", 3, 2), ("b", 3, 3)], |t, p| {
            let m = t.concat_cols(&[p[0], p[1], p[0]])?;
            weighted_sum(t, m, 10)
        }),
        ("sum_all", vec![("a", 3, 4)], |t, p| {
            let s = t.sum_all(p[0]);
            Ok(t.square(s))
        }),
        ("mean_all", vec![("a", 3, 4)], |t, p| {
            let s = t.mean_all(p[0]);
            Ok(t.square(s))
        }),
        ("segment_max", vec![("a", 7, 3)], |t, p| {
            let m = t.segment_max(p[0], &[0, 2, 3, 7])?;
            weighted_sum(t, m, 11)
        }),
        ("gather_rows", vec![("a", 5, 3)], |t, p| {
            let m = t.gather_rows(p[0], Rc::from(vec![4, 0, 0, 2, 1]))?;
            weighted_sum(t, m, 12)
        }),
        ("scatter_add_rows", vec![("a", 5, 3)], |t, p| {
            let m = t.scatter_add_rows(p[0], Rc::from(vec![1, 1, 0, 2, 1]), 3)?;
            weighted_sum(t, m, 13)
        }),
        ("neighbor_mean", vec![("a", 5, 3)], |t, p| {
            let lists: Vec<Vec<usize>> = vec![vec![1, 2, 3], vec![], vec![0, 4], vec![3], vec![0, 0, 1]];
            let m = t.neighbor_mean(p[0], Rc::from(lists))?;
            weighted_sum(t, m, 14)
        }),
        ("bce_with_logits", vec![("z", 1, 6)], |t, p| {
            let z = t.scale(p[0], 4.0);
            t.bce_with_logits(z, Rc::from(vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]))
        }),
    ]
}

/// Moves every parameter away from its initial value, so zero biases do not
/// put relu inputs exactly on the kink.
fn jitter(store: &mut ParamStore, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = store.names().map(String::from).collect();
    for n in names {
        let v = store.value(&n).map_err(err)?.clone();
        let noise = Tensor::uniform(v.rows(), v.cols(), 0.3, &mut rng);
        let moved: Vec<f64> = v.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect();
        store.set(&n, Tensor::new(v.shape().to_vec(), moved).map_err(err)?).map_err(err)?;
    }
    Ok(())
}

fn smallest_graphs(db: &lrwt_core::TheoremDatabase, vocab: &Vocabulary, n: usize) -> Vec<lrwt_core::FormulaGraph> {
    let mut ts: Vec<&Term> = db.theorems().iter().map(|t| &t.statement).collect();
    ts.sort_by_key(|t| t.size());
    ts.iter().take(n).map(|t| encode(t, vocab)).collect()
}

fn gradient_checks(db: &lrwt_core::TheoremDatabase, vocab: &Vocabulary) -> Outcome {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut note = |what: &str, e: f64| {
        if e >= worst.0 {
            worst = (e, what.to_string());
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cases = primitive_cases();
    let n_prims = cases.len();
    for (name, shapes, f) in cases {
        let store = random_store(&shapes, &mut rng);
        let names: Vec<&str> = shapes.iter().map(|s| s.0).collect();
        let r = check(&store, H, |t, s| {
            let ids = names.iter().map(|n| t.param(s, n)).collect::<Result<Vec<_>, _>>()?;
            f(t, &ids)
        })
        .map_err(err)?;
        note(name, r.max_rel_error);
    }

    let tower = TowerConfig {
        hops: 2,
        node_dim: 3,
        embed_dim: 4,
        vocab_size: vocab.len(),
    };
    let combiner = CombinerConfig { hidden: 5, layers: 2 };
    let gs = smallest_graphs(db, vocab, 5);
    let goals = GraphBatch::new(&gs[..2].iter().collect::<Vec<_>>());
    let params = GraphBatch::new(&gs[2..].iter().collect::<Vec<_>>());

    let scfg = SigmaConfig { tower, combiner };
    let mut sigma = SigmaModel::new(scfg, 5).map_err(err)?;
    jitter(&mut sigma.store, 1)?;
    let pairs = Pairs::cross(2, 3);
    let labels = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let r = check::<_, ModelError>(&sigma.store, H, |t, s| {
        let m = SigmaModel::from_store(scfg, s.clone())?;
        let z = sigma_forward(&m, t, &goals, &params, &pairs)?;
        sigma_loss(t, z, &labels)
    })
    .map_err(err)?;
    note("sigma", r.max_rel_error);

    let ocfg = OmegaConfig { tower, combiner };
    let mut omega = OmegaModel::new(ocfg, 6).map_err(err)?;
    jitter(&mut omega.store, 2)?;
    let labels = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    let mask = [true, false, true, false, true, false];
    let targets = Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).map_err(err)?;
    let targets_all = Tensor::matrix(6, 4, (0..24).map(|i| (i as f64 * 0.21).cos()).collect()).map_err(err)?;
    let heads: [(&str, u8); 3] = [("omega success head", 0), ("omega embedding head", 1), ("omega joint loss", 2)];
    for (head, which) in heads {
        let r = check::<_, ModelError>(&omega.store, H, |t, s| {
            let m = OmegaModel::from_store(ocfg, s.clone())?;
            let h = omega_hidden(&m, t, &goals, &params, &pairs)?;
            match which {
                0 => {
                    let z = m.success_head(t, h)?;
                    sigma_loss(t, z, &labels)
                }
                1 => {
                    let e = m.embedding_head(t, h)?;
                    let y = t.leaf(targets_all.clone());
                    let d = t.sub(e, y)?;
                    let sq = t.square(d);
                    Ok(t.sum_all(sq))
                }
                _ => {
                    let z = m.success_head(t, h)?;
                    let e = m.embedding_head(t, h)?;
                    omega_loss(t, z, &labels, e, &targets, &mask, 0.7)
                }
            }
        })
        .map_err(err)?;
        note(head, r.max_rel_error);
    }

    let acfg = AlphaConfig { embed_dim: 4, hidden: 6 };
    let mut alpha = AlphaModel::new(acfg, 7).map_err(err)?;
    jitter(&mut alpha.store, 3)?;
    let x = Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.7).cos()).collect()).map_err(err)?;
    let y = Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.3).sin()).collect()).map_err(err)?;
    let r = check::<_, ModelError>(&alpha.store, H, |t, s| {
        let m = AlphaModel::from_store(acfg, s.clone())?;
        let xi = t.leaf(x.clone());
        let out = m.forward(t, xi)?;
        let yi = t.leaf(y.clone());
        let d = t.sub(out, yi)?;
        let sq = t.square(d);
        Ok(t.sum_all(sq))
    })
    .map_err(err)?;
    note("alpha", r.max_rel_error);

    ensure(worst.0 < GRAD_TOL, format!("max relative error {:.3e} in {}", worst.0, worst.1))?;
    Ok(format!("{n_prims} primitives + sigma, omega (3 losses), alpha; max relative error {:.2e} ({})", worst.0, worst.1))
}

// -------------------------------------------------------------------- roc

fn roc_against_mann_whitney() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let levels = rng.random_range(1..50u32);
        let (np, nn) = (rng.random_range(1..=200usize), rng.random_range(1..=200usize));
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(0..levels) as f64 / 7.0).collect() };
        let (pos, neg) = (draw(np), draw(nn));
        let mut u = 0.0;
        for p in &pos {
            for n in &neg {
                u += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        let brute = u / (np * nn) as f64;
        let auc = roc_auc(&pos, &neg).map_err(err)?.auc;
        worst = worst.max((auc - brute).abs());
    }
    ensure(worst < 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("1000 tied score sets, max deviation {worst:.1e}"))
}

// ------------------------------------------------------------- invariance

fn rename_bound(t: &Term, tag: &str) -> Term {
    fn go(t: &Term, tag: &str, env: &mut Vec<(String, String)>, n: &mut usize) -> Term {
        match t.kind() {
            TermKind::Var(v) => match env.iter().rev().find(|(old, _)| *old == v.name) {
                Some((_, new)) => Term::var(new.clone(), v.ty.clone()),
                None => t.clone(),
            },
            TermKind::Const { .. } => t.clone(),
            TermKind::App(f, a) => Term::app(go(f, tag, env, n), go(a, tag, env, n)).expect("same types"),
            TermKind::Abs(v, b) => {
                *n += 1;
                let fresh = format!("{tag}{n}");
                env.push((v.name.clone(), fresh.clone()));
                let body = go(b, tag, env, n);
                env.pop();
                Term::abs(Var::new(fresh, v.ty.clone()), body)
            }
        }
    }
    go(t, tag, &mut Vec::new(), &mut 0)
}

fn bits(e: &Embedding) -> Vec<u64> {
    e.vec.iter().map(|x| x.to_bits()).collect()
}

fn invariances(db: &lrwt_core::TheoremDatabase, vocab: &Vocabulary, models: &ModelBundle) -> Outcome {
    let sigma = &models.sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut perms = 0;
    for t in db.theorems() {
        let g = encode(&t.statement, vocab);
        let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
        perm.shuffle(&mut rng);
        let mut p = g.permute(&perm);
        p.edges.shuffle(&mut rng);
        let towers = [
            (&sigma.gamma, &sigma.store),
            (&sigma.pi, &sigma.store),
            (&models.omega.gamma, &models.omega.store),
            (&models.omega.pi, &models.omega.store),
        ];
        for (tower, store) in towers {
            let a = tower.embed(store, &g).map_err(err)?;
            let b = tower.embed(store, &p).map_err(err)?;
            ensure(bits(&a) == bits(&b), format!("{} changes under node permutation", t.name))?;
            perms += 1;
        }
    }

    let mut renamed = 0;
    for t in db.theorems() {
        let r = rename_bound(&t.statement, "fresh_");
        if r == t.statement {
            continue;
        }
        let (ga, gb) = (encode(&t.statement, vocab), encode(&r, vocab));
        ensure(ga == gb, format!("{} encodes differently after renaming", t.name))?;
        let a = sigma.gamma.embed(&sigma.store, &ga).map_err(err)?;
        let b = sigma.gamma.embed(&sigma.store, &gb).map_err(err)?;
        ensure(bits(&a) == bits(&b), format!("{} embeds differently after renaming", t.name))?;
        renamed += 1;
    }
    ensure(renamed > 0, "no statement has a binder")?;

    let dim = sigma.config.tower.embed_dim;
    let v = |s: Space| Embedding::new(s, (0..dim).map(|i| (i as f64 * 0.1).sin()).collect());
    let (l, lp) = (Space::L, Space::LPrime);
    let (mut cases, mut raised) = (0, 0);
    let mut tally = |ok_expected: bool, ok: bool| -> Result<(), String> {
        if ok_expected {
            ensure(ok, "a well-tagged call failed")
        } else {
            cases += 1;
            raised += !ok as usize;
            Ok(())
        }
    };
    for g in [l, lp] {
        for p in [l, lp] {
            tally(g == l && p == l, sigma.score(&v(g), &v(p)).is_ok())?;
            tally(g == l && p == l, sigma.score_many(&v(g), &[v(p)]).is_ok())?;
            tally(g == lp && p == lp, models.omega.predict(&v(g), &v(p)).is_ok())?;
            tally(g == lp && p == lp, models.omega.predict_many(&v(g), &[v(p)]).is_ok())?;
            // a step from a state whose pending vector is tagged `g`
            let start = PropagationState::from_embedding(v(lp)).map_err(err)?;
            let mut state = propagate_step(&start, &models.omega, &models.alpha, "x", &v(lp)).map_err(err)?;
            state.vec_l = Some(v(g));
            tally(g == l && p == lp, propagate_step(&state, &models.omega, &models.alpha, "x", &v(p)).is_ok())?;
            tally(p == lp, propagate_step(&start, &models.omega, &models.alpha, "x", &v(p)).is_ok())?;
        }
        tally(g == l, models.alpha.translate(&v(g)).is_ok())?;
        tally(g == lp, PropagationState::from_embedding(v(g)).is_ok())?;
    }
    ensure(cases > 0 && raised == cases, format!("{raised}/{cases} mismatches raised"))?;
    Ok(format!("{perms} permuted embeddings bitwise equal, {renamed} renamed statements unchanged, {raised}/{cases} space mismatches raised"))
}

// ------------------------------------------------------------ propagation

fn root_of(chains: &ChainDataset, mut layer: usize, mut idx: usize) -> Result<usize, String> {
    while layer > 0 {
        idx = chains.layers[layer][idx].parent.ok_or("chain node without parent")?;
        layer -= 1;
    }
    Ok(idx)
}

fn call_counts(db: &lrwt_core::TheoremDatabase, vocab: &Vocabulary, chains: &ChainDataset, models: &ModelBundle) -> Outcome {
    let mut checked = 0;
    for depth in 1..=4 {
        for idx in 0..chains.layers[depth].len().min(10) {
            let (_, path) = chains.path(depth, idx);
            let root = &chains.layers[0][root_of(chains, depth, idx)?].statement;
            let params = path
                .iter()
                .map(|p| {
                    let t = db.get(p).ok_or_else(|| format!("unknown parameter {p}"))?;
                    models.omega.pi.embed(&models.omega.store, &encode(&t.statement, vocab)).map_err(err)
                })
                .collect::<Result<Vec<_>, String>>()?;
            let mut state = PropagationState::start(&models.omega, &encode(root, vocab)).map_err(err)?;
            let (e0, a0, r0) = (e_prime_calls(), alpha_calls(), rewrite_calls());
            for (name, p) in path.iter().zip(&params) {
                state = propagate_step(&state, &models.omega, &models.alpha, name, p).map_err(err)?;
            }
            let (e, a, r) = (e_prime_calls() - e0, alpha_calls() - a0, rewrite_calls() - r0);
            let d = depth as u64;
            ensure(
                e == d && a == d - 1 && r == 0,
                format!("depth {depth}: {e} e' calls, {a} alpha calls, {r} rewrites"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} chains of depth 1-4: d e' calls, d-1 alpha calls, 0 rewrites"))
}

// -------------------------------------------------------------- full runs

struct FullRun {
    run: Run,
    _dir: tempfile::TempDir,
}

fn full_run() -> Result<FullRun, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = RunConfig {
        out: Some(dir.path().join("run")),
        ..RunConfig::default()
    };
    let run = Run::create(config).map_err(err)?;
    run.run_all().map_err(err)?;
    Ok(FullRun { run, _dir: dir })
}

fn auc_table(path: &Path) -> Result<Vec<[f64; 5]>, String> {
    let rows = read_metrics(path).map_err(err)?;
    let mut table = vec![[f64::NAN; 5]; 4];
    for r in rows {
        let m = Method::ALL.iter().position(|&m| m == r.method).ok_or("unknown method")?;
        ensure((1..=4).contains(&r.depth), format!("unexpected depth {}", r.depth))?;
        table[r.depth - 1][m] = r.auc;
    }
    ensure(table.iter().flatten().all(|a| a.is_finite()), "metrics file is missing rows")?;
    Ok(table)
}

fn auc_trends(run: &Run) -> Outcome {
    let text = std::fs::read_to_string(run.path(METRICS_FILE)).map_err(err)?;
    ensure(text.lines().count() == 1 + 4 * 5, "metrics file does not have 4 x 5 rows")?;
    let t = auc_table(&run.path(METRICS_FILE))?;
    let col = |m: Method| Method::ALL.iter().position(|&x| x == m).unwrap();
    let (tr, multi, rnd, usage) = (col(Method::True), col(Method::PredMultiStep), col(Method::RandomBaseline), col(Method::UsageBaseline));
    for (d, row) in t.iter().enumerate() {
        ensure(row[tr] > row[rnd], format!("depth {}: true {:.4} <= random {:.4}", d + 1, row[tr], row[rnd]))?;
        ensure(row[multi] > row[rnd], format!("depth {}: multi {:.4} <= random {:.4}", d + 1, row[multi], row[rnd]))?;
        if d > 0 {
            ensure(
                row[multi] <= t[d - 1][multi] + 0.02,
                format!("multi-step AUC rises from {:.4} to {:.4} at depth {}", t[d - 1][multi], row[multi], d + 1),
            )?;
        }
    }
    ensure(t[0][tr] >= 0.80, format!("depth-1 true AUC {:.4} < 0.80", t[0][tr]))?;
    ensure(t[0][tr] > t[0][usage], format!("depth-1 true {:.4} <= usage {:.4}", t[0][tr], t[0][usage]))?;
    let fmt = |c: usize| t.iter().map(|r| format!("{:.3}", r[c])).collect::<Vec<_>>().join(" ");
    Ok(format!("true [{}] multi [{}] random [{}] usage [{}]", fmt(tr), fmt(multi), fmt(rnd), fmt(usage)))
}

fn l2_trends(run: &Run) -> Outcome {
    let rows = read_l2(&run.path(lrwt_cli::L2_FILE)).map_err(err)?;
    ensure(rows.len() == 4, format!("{} distance rows", rows.len()))?;
    for r in &rows {
        ensure(
            r.mean_multistep < r.mean_random,
            format!("depth {}: multi-step {:.4} >= random {:.4}", r.depth, r.mean_multistep, r.mean_random),
        )?;
        if r.depth >= 2 {
            ensure(
                r.mean_multistep >= r.mean_onestep,
                format!("depth {}: multi-step {:.4} < one-step {:.4}", r.depth, r.mean_multistep, r.mean_onestep),
            )?;
        }
    }
    let fmt = |f: fn(&lrwt_eval::L2Row) -> f64| rows.iter().map(|r| format!("{:.2}", f(r))).collect::<Vec<_>>().join(" ");
    Ok(format!(
        "one-step [{}] multi-step [{}] random [{}]",
        fmt(|r| r.mean_onestep),
        fmt(|r| r.mean_multistep),
        fmt(|r| r.mean_random)
    ))
}

fn determinism(a: &Run, b: &Run, db: &lrwt_core::TheoremDatabase, vocab: &Vocabulary, models: &ModelBundle) -> Outcome {
    for f in [METRICS_FILE, lrwt_cli::ROC_FILE, lrwt_cli::L2_FILE, lrwt_cli::PROJECTION_FILE] {
        let (x, y) = (std::fs::read(a.path(f)).map_err(err)?, std::fs::read(b.path(f)).map_err(err)?);
        ensure(x == y, format!("{f} differs between runs"))?;
    }
    let dir = tempfile::tempdir().map_err(err)?;
    let probe_goal = encode(&db.theorems()[0].statement, vocab);
    let probe_param = encode(&db.theorems()[1].statement, vocab);

    let s = &models.sigma;
    checkpoint::save(&dir.path().join("s"), &s.store, s.config.hash()).map_err(err)?;
    let s2 = SigmaModel::from_store(s.config, checkpoint::load(&dir.path().join("s"), s.config.hash()).map_err(err)?).map_err(err)?;
    let score = |m: &SigmaModel| -> Result<u64, String> {
        let g = m.gamma.embed(&m.store, &probe_goal).map_err(err)?;
        let p = m.pi.embed(&m.store, &probe_param).map_err(err)?;
        Ok(m.score(&g, &p).map_err(err)?.to_bits())
    };
    ensure(score(s)? == score(&s2)?, "sigma probe differs after reload")?;

    let o = &models.omega;
    checkpoint::save(&dir.path().join("o"), &o.store, o.config.hash()).map_err(err)?;
    let o2 = OmegaModel::from_store(o.config, checkpoint::load(&dir.path().join("o"), o.config.hash()).map_err(err)?).map_err(err)?;
    let predict = |m: &OmegaModel| -> Result<Vec<u64>, String> {
        let g = m.gamma.embed(&m.store, &probe_goal).map_err(err)?;
        let p = m.pi.embed(&m.store, &probe_param).map_err(err)?;
        let (z, e) = m.predict(&g, &p).map_err(err)?;
        Ok(std::iter::once(z.to_bits()).chain(bits(&e)).collect())
    };
    ensure(predict(o)? == predict(&o2)?, "omega probe differs after reload")?;

    let al = &models.alpha;
    checkpoint::save(&dir.path().join("a"), &al.store, al.config.hash()).map_err(err)?;
    let a2 = AlphaModel::from_store(al.config, checkpoint::load(&dir.path().join("a"), al.config.hash()).map_err(err)?).map_err(err)?;
    let x = s.gamma.embed(&s.store, &probe_goal).map_err(err)?;
    ensure(
        bits(&al.translate(&x).map_err(err)?) == bits(&a2.translate(&x).map_err(err)?),
        "alpha probe differs after reload",
    )?;
    Ok("metrics, roc, l2 and projection files byte-identical; sigma/omega/alpha probes bitwise equal after reload".into())
}

fn loss_windows(run: &Run) -> Outcome {
    let mut summary = Vec::new();
    for (name, windows) in [("sigma", SIGMA_WINDOWS), ("omega", OMEGA_WINDOWS), ("alpha", ALPHA_WINDOWS)] {
        let text = std::fs::read_to_string(run.path(&format!("{name}_loss.csv"))).map_err(err)?;
        let losses: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap_or("nan").parse().unwrap_or(f64::NAN)).collect();
        let means: Vec<f64> = losses.chunks_exact(LOSS_WINDOW).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        ensure(means.len() >= windows, format!("{name}: only {} windows", means.len()))?;
        for w in 1..windows {
            ensure(means[w] < means[w - 1], format!("{name}: window {w} mean {:.5} >= {:.5}", means[w], means[w - 1]))?;
        }
        summary.push(format!("{name} {:.3}->{:.3} over {windows}", means[0], means[windows - 1]));
    }
    Ok(summary.join(", "))
}

fn alpha_fit(run: &Run, db: &lrwt_core::TheoremDatabase, vocab: &Vocabulary, models: &ModelBundle) -> Outcome {
    let pairs = run.load_pairs().map_err(err)?;
    let terms = alignment_terms(db, &pairs);
    let mut graphs = GraphCache::new(db, vocab);
    let (xs, ys) = alignment_pairs(&models.sigma, &models.omega, &terms, &mut graphs).map_err(err)?;
    let init = AlphaModel::new(run.config.model.alpha(), run.config.alpha_init_seed()).map_err(err)?;
    let before = alignment_loss(&init, &xs, &ys).map_err(err)?;
    let after = alignment_loss(&models.alpha, &xs, &ys).map_err(err)?;
    ensure(after * 5.0 <= before, format!("alignment error {before:.4} -> {after:.4}"))?;
    Ok(format!("alignment error {before:.4} -> {after:.4} ({:.1}x)", before / after))
}

fn main() {
    let mut failures = 0;
    let mut report = |label: &str, o: Outcome| {
        match o {
            Ok(msg) => println!("PASS {label}: {msg}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {label}: {msg}");
            }
        }
    };

    report("1 rewrite oracle", rewrite_oracle());
    report("3 roc equals Mann-Whitney", roc_against_mann_whitney());

    let runs = full_run().and_then(|a| full_run().map(|b| (a, b)));
    let (a, b) = match runs {
        Ok(r) => r,
        Err(e) => {
            for label in ["2 gradient checks", "4 invariances", "5 auc trends", "6 l2 trends", "7 propagation calls", "8 determinism"] {
                report(label, Err(format!("pipeline failed: {e}")));
            }
            std::process::exit(1);
        }
    };
    let loaded = (|| -> Result<_, String> {
        let db = a.run.load_corpus().map_err(err)?;
        let vocab = build_vocabulary(&db);
        let models = a.run.load_models(&vocab).map_err(err)?;
        let chains = a.run.load_chains().map_err(err)?;
        Ok((db, vocab, models, chains))
    })();
    let (db, vocab, models, chains) = match loaded {
        Ok(x) => x,
        Err(e) => {
            report("run outputs", Err(e));
            std::process::exit(1);
        }
    };

    report("2 gradient checks", gradient_checks(&db, &vocab));
    report("4 invariances", invariances(&db, &vocab, &models));
    report("5 auc trends", auc_trends(&a.run));
    report("6 l2 trends", l2_trends(&a.run));
    report("7 propagation calls", call_counts(&db, &vocab, &chains, &models));
    report("8 determinism", determinism(&a.run, &b.run, &db, &vocab, &models));
    report("training loss windows", loss_windows(&a.run));
    report("alpha fit", alpha_fit(&a.run, &db, &vocab, &models));

    if failures > 0 {
        println!("{failures} acceptance check(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
