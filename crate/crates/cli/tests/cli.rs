use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrwt_cli::{ModelKind, Run, RunConfig, METRICS_FILE};
use lrwt_core::graph::build_vocabulary;
use lrwt_models::SigmaModel;

const SMALL: &str = r#"
[corpus]
size = 120
[model]
node_dim = 8
embed_dim = 8
sigma_hidden = 8
omega_hidden = 8
alpha_hidden = 8
[sigma]
steps = 20
[omega]
steps = 20
[alpha]
steps = 50
[eval]
max_statements = 8
"#;

fn lrwt(args: &[&str], dir: &Path) -> Output {
    let config = dir.join("small.toml");
    if !config.exists() {
        std::fs::write(&config, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_lrwt"))
        .arg("--config")
        .arg(&config)
        .args(args)
        .env("LRWT_OUT_ROOT", dir.join("runs"))
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn out_arg(dir: &Path, name: &str) -> (PathBuf, String) {
    let p = dir.join(name);
    let s = p.to_str().unwrap().to_string();
    (p, s)
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lrwt(&["--bogus", "run"], tmp.path())), 1);
    assert_eq!(code(&lrwt(&[], tmp.path())), 1);
    assert_eq!(code(&lrwt(&["train", "--model", "beta"], tmp.path())), 1);
    assert_eq!(code(&lrwt(&["eval", "--method", "oracle"], tmp.path())), 1);
    assert_eq!(code(&lrwt(&["--help"], tmp.path())), 0);
}

#[test]
fn io_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let blocked = file.join("run");
    let o = lrwt(&["--out", blocked.to_str().unwrap(), "gen-corpus"], tmp.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    // later stages need the files of earlier ones
    let (_, out) = out_arg(tmp.path(), "empty");
    assert_eq!(code(&lrwt(&["--out", &out, "gen-pairs"], tmp.path())), 2);
    assert_eq!(code(&lrwt(&["--out", &out, "eval", "--method", "usage"], tmp.path())), 2);
}

#[test]
fn bad_data_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "sed = 4\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lrwt"))
        .args(["--config", bad.to_str().unwrap(), "gen-corpus"])
        .env("LRWT_OUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    let (dir, out) = out_arg(tmp.path(), "r");
    assert_eq!(code(&lrwt(&["--out", &out, "gen-corpus"], tmp.path())), 0);
    std::fs::write(dir.join("corpus.txt"), "this is not a theorem\n").unwrap();
    assert_eq!(code(&lrwt(&["--out", &out, "gen-pairs"], tmp.path())), 3);
}

#[test]
fn corpus_generation_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, oa) = out_arg(tmp.path(), "a/nested/dirs");
    let (b, ob) = out_arg(tmp.path(), "b");
    assert_eq!(code(&lrwt(&["--out", &oa, "gen-corpus"], tmp.path())), 0);
    assert_eq!(code(&lrwt(&["--out", &ob, "gen-corpus"], tmp.path())), 0);
    let read = |d: &Path| std::fs::read(d.join("corpus.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    let (c, oc) = out_arg(tmp.path(), "c");
    assert_eq!(code(&lrwt(&["--out", &oc, "--seed", "8", "gen-corpus"], tmp.path())), 0);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn default_run_directory_is_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lrwt(&["--seed", "5", "gen-corpus"], tmp.path())), 0);
    let dir = tmp.path().join("runs/seed-5");
    assert!(dir.join("corpus.txt").exists());
    let resolved = RunConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(resolved.seed, 5);
    assert_eq!(resolved.corpus.size, 120);
    assert_eq!(resolved.out.as_deref(), Some(dir.as_path()));
}

#[test]
fn usage_baseline_runs_without_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, out) = out_arg(tmp.path(), "u");
    for stage in ["gen-corpus", "gen-pairs", "gen-chains"] {
        assert_eq!(code(&lrwt(&["--out", &out, stage], tmp.path())), 0);
    }
    let o = lrwt(&["--out", &out, "eval", "--method", "usage"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.join("sigma.ckpt").exists());
    let text = std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().skip(1).all(|l| l.contains(",usage,")));
    // the model-based methods do need them
    assert_eq!(code(&lrwt(&["--out", &out, "eval", "--method", "true"], tmp.path())), 2);
}

#[test]
fn zero_sigma_steps_write_the_initial_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, out) = out_arg(tmp.path(), "z");
    for args in [vec!["gen-corpus"], vec!["gen-pairs"], vec!["train", "--model", "sigma", "--steps", "0"]] {
        let mut a = vec!["--out", out.as_str()];
        a.extend(args);
        assert_eq!(code(&lrwt(&a, tmp.path())), 0);
    }
    let mut cfg = RunConfig::from_toml(SMALL).unwrap();
    cfg.out = Some(out.clone().into());
    let run = Run::create(cfg).unwrap();
    let vocab = build_vocabulary(&run.load_corpus().unwrap());
    let loaded = run.load_sigma(&vocab).unwrap();
    let init = SigmaModel::new(run.config.model.sigma(vocab.len()), run.config.sigma_init_seed()).unwrap();
    assert_eq!(loaded.store.checksum(), init.store.checksum());
    let trace = std::fs::read_to_string(run.path(&ModelKind::Sigma.loss_file())).unwrap();
    assert_eq!(trace.lines().count(), 1);
}

#[test]
fn full_small_run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, out) = out_arg(tmp.path(), "full");
    let o = lrwt(&["--out", &out, "run"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 4 * 5);
    assert_eq!(metrics.lines().next(), Some("depth,method,auc,n_pos,n_neg"));
    assert_eq!(std::fs::read_to_string(dir.join("l2.csv")).unwrap().lines().count(), 1 + 4);
    for f in ["scores.svg", "auc_by_depth.svg", "l2_by_depth.svg", "projection.svg"] {
        let svg = std::fs::read_to_string(dir.join("plots").join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"), "{f}");
    }
    // re-running evaluation alone reproduces the metrics
    assert_eq!(code(&lrwt(&["--out", &out, "eval"], tmp.path())), 0);
    assert_eq!(std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap(), metrics);
}
