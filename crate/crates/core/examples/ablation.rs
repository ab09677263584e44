//! Compare QA-only, classification-only and joint training from the same
//! initialization and print the ablation table as CSV.
//!
//! Short runs stop before the joint classifier catches up, so compare near
//! convergence.
//!
//! `cargo run --release --example ablation -- 1000 8`

use clinqa::categorizer::Gazetteer;
use clinqa::corpus::{generate_synthetic_corpus, stratified_split, SplitFractions, SyntheticSpec};
use clinqa::model::{init_params, EncoderConfig};
use clinqa::tokenizer::build_vocab;
use clinqa::training::{run_ablation, TrainConfig};

fn main() -> clinqa::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let size = args.next().flatten().unwrap_or(1000);
    let epochs = args.next().flatten().unwrap_or(8);

    let records = generate_synthetic_corpus(&SyntheticSpec::emrqa_mix(size, 0), &Gazetteer::fixture())?;
    let vocab = build_vocab(records.iter().flat_map(|r| [r.question.as_str(), r.context.as_str()]), 4000, 1)?;
    let split = stratified_split(&records, SplitFractions::default(), 0)?;
    let init = init_params(&EncoderConfig::desk(vocab.len()), 0)?;
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs,
        ..TrainConfig::default()
    };

    let report = run_ablation(&init, &split, &vocab, &config)?;
    print!("{}", report.to_csv());
    println!("joint - single-task: F1 {:+.2}, accuracy {:+.2}", report.delta_f1, report.delta_acc);
    Ok(())
}
