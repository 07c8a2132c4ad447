use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrwt_cli::{CliError, ModelKind, Run, RunConfig};
use lrwt_eval::Method;

/// Rewrite-success prediction and multi-step reasoning in embedding space.
#[derive(Debug, Parser)]
#[command(name = "lrwt", version)]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory (default: `$LRWT_OUT_ROOT/seed-<seed>`, or `runs/seed-<seed>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic theorem database.
    GenCorpus {
        #[arg(long)]
        size: Option<usize>,
    },
    /// Label every ordered pair of training theorems with the rewrite engine.
    GenPairs,
    /// Build chains of rewrites starting from validation theorems.
    GenChains {
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Train one model and write its checkpoint and loss trace.
    Train {
        #[arg(long)]
        model: String,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score the chain statements and write metrics, ROC, distance and projection files.
    Eval {
        /// One of true, pred_one_step, pred_multi_step, random, usage.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        max_statements: Option<usize>,
    },
    /// Render SVG charts from the evaluation files.
    Plot,
    /// All stages in order.
    Run,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    match &cli.command {
        Command::GenCorpus { size: Some(n) } => cfg.corpus.size = *n,
        Command::GenChains { depth: Some(d) } => cfg.chains.depth = *d,
        Command::Train { model, steps: Some(s) } => match model.parse::<ModelKind>()? {
            ModelKind::Sigma => cfg.sigma.steps = *s,
            ModelKind::Omega => cfg.omega.steps = *s,
            ModelKind::Alpha => cfg.alpha.steps = *s,
        },
        Command::Eval {
            max_statements: Some(n), ..
        } => cfg.eval.max_statements = *n,
        _ => {}
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let run = Run::create(resolve(&cli)?)?;
    match cli.command {
        Command::GenCorpus { .. } => {
            run.gen_corpus()?;
        }
        Command::GenPairs => {
            run.gen_pairs()?;
        }
        Command::GenChains { .. } => {
            run.gen_chains()?;
        }
        Command::Train { model, .. } => {
            run.train(model.parse()?)?;
        }
        Command::Eval { method, .. } => {
            let m = method
                .map(|m| m.parse::<Method>().map_err(|e| CliError::Usage(e.to_string())))
                .transpose()?;
            run.eval(m)?;
        }
        Command::Plot => {
            run.plot()?;
        }
        Command::Run => {
            run.run_all()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
