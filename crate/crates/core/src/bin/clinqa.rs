use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use clinqa::cli::{self, RunConfig};
use clinqa::corpus::SyntheticSpec;
use clinqa::{Error, Result};

#[derive(Parser)]
#[command(name = "clinqa", about = "Multi-task clinical question answering", version)]
struct Args {
    /// JSON run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mix {
    Emrqa,
    Uniform,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as JSONL.
    Generate {
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, value_enum, default_value = "emrqa")]
        mix: Mix,
        /// Output file (default <out>/raw.jsonl).
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Label, tokenize, align and split a raw JSONL corpus.
    Preprocess {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Train on the preprocessed splits.
    Train {
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint on a split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Answer one question about one context.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        question: String,
        #[arg(long)]
        context: String,
    },
    /// Compare single-task and multi-task training.
    Ablate,
    /// Search the loss-weight grid.
    Grid,
}

fn run(args: Args) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    match args.command {
        Command::Generate { size, mix, path } => {
            let spec = match mix {
                Mix::Emrqa => SyntheticSpec::emrqa_mix(size, cfg.seed),
                Mix::Uniform => SyntheticSpec::uniform(size, cfg.seed),
            };
            let path = path.unwrap_or_else(|| cfg.out_dir.join("raw.jsonl"));
            let n = cli::cmd_generate(&cfg, &spec, &path)?;
            println!("wrote {n} records to {}", path.display());
        }
        Command::Preprocess { dataset, gazetteer } => {
            cfg.dataset = dataset.or(cfg.dataset);
            cfg.gazetteer = gazetteer.or(cfg.gazetteer);
            let s = cli::cmd_preprocess(&cfg)?;
            println!(
                "train {} / validation {} / test {}; vocabulary {}; skipped {}",
                s.n_train,
                s.n_validation,
                s.n_test,
                s.vocab_size,
                s.skipped.len()
            );
        }
        Command::Train { resume } => {
            cfg.resume = resume.or(cfg.resume);
            let out = cli::cmd_train(&cfg)?;
            println!(
                "best epoch {} (val loss {:.4}); checkpoint {}",
                out.best_epoch,
                out.best_val_loss,
                cfg.checkpoint_path().display()
            );
        }
        Command::Eval { checkpoint, split } => {
            let r = cli::cmd_eval(&cfg, checkpoint.as_deref(), split.as_deref())?;
            println!(
                "n {}  f1 {:.2}  em {:.2}  acc {:.2}  weighted f1 {:.2}",
                r.n_examples,
                r.qa.token_f1,
                r.qa.exact_match,
                r.classification.accuracy,
                r.classification.weighted_f1
            );
        }
        Command::Predict {
            checkpoint,
            question,
            context,
        } => {
            let p = cli::cmd_predict(&cfg, checkpoint.as_deref(), &question, &context)?;
            print_json(&p)?;
        }
        Command::Ablate => {
            let r = cli::cmd_ablate(&cfg)?;
            print!("{}", r.to_csv());
            println!("delta_f1 {:+.2}  delta_acc {:+.2}", r.delta_f1, r.delta_acc);
        }
        Command::Grid => {
            let r = cli::cmd_grid(&cfg)?;
            print_json(&r)?;
        }
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(Error::from)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
