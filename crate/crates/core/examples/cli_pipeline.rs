//! The command pipeline end to end in a scratch directory: generate,
//! preprocess, train, eval and predict, as the `clinqa` binary runs them.

use clinqa::cli::{cmd_eval, cmd_generate, cmd_predict, cmd_preprocess, cmd_train, RunConfig};
use clinqa::corpus::SyntheticSpec;

fn main() -> clinqa::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut cfg = RunConfig {
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cfg.dataset = Some(dir.path().join("raw.jsonl"));
    cfg.train.learning_rate = 1e-3;
    cfg.train.epochs = 10;
    cfg.train.batch_size = 8;

    let n = cmd_generate(&cfg, &SyntheticSpec::uniform(300, 5), cfg.dataset.as_ref().unwrap())?;
    println!("generated {n} records");

    let pre = cmd_preprocess(&cfg)?;
    println!("preprocess: {}", serde_json::to_string(&pre).unwrap());

    let outcome = cmd_train(&cfg)?;
    println!("trained {} epochs, best {}", outcome.log.len(), outcome.best_epoch);

    let report = cmd_eval(&cfg, None, None)?;
    println!("test F1 {:.1}, accuracy {:.1}", report.qa.token_f1, report.classification.accuracy);

    let answer = cmd_predict(
        &cfg,
        None,
        "What medication is the patient taking?",
        "The patient is taking lisinopril 10mg daily for blood pressure.",
    )?;
    println!("predict: {}", serde_json::to_string_pretty(&answer).unwrap());

    let mut files: Vec<_> = walk(dir.path());
    files.sort();
    println!("\nwritten:");
    for f in files {
        println!("  {}", f.strip_prefix(dir.path()).unwrap().display());
    }
    Ok(())
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap().flatten() {
        let p = entry.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
