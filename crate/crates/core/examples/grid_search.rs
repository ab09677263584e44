//! Search the loss-weight grid and report validation scores per pair.
//!
//! `cargo run --release --example grid_search`

use clinqa::categorizer::Gazetteer;
use clinqa::corpus::{generate_synthetic_corpus, stratified_split, SplitFractions, SyntheticSpec};
use clinqa::model::{init_params, EncoderConfig};
use clinqa::tokenizer::build_vocab;
use clinqa::training::{grid_search_lambdas, TrainConfig};

fn main() -> clinqa::Result<()> {
    let records = generate_synthetic_corpus(&SyntheticSpec::uniform(300, 11), &Gazetteer::fixture())?;
    let vocab = build_vocab(records.iter().flat_map(|r| [r.question.as_str(), r.context.as_str()]), 4000, 1)?;
    let split = stratified_split(&records, SplitFractions::default(), 11)?;

    let mut encoder = EncoderConfig::desk(vocab.len());
    encoder.num_shared_layers = 1;
    let init = init_params(&encoder, 11)?;
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs: 8,
        batch_size: 8,
        seed: 11,
        grid: vec![(1.0, 0.5), (1.0, 1.0), (0.5, 1.0)],
        ..TrainConfig::default()
    };

    let result = grid_search_lambdas(&init, &split, &vocab, &config)?;
    println!("lambda_qa lambda_class  val F1  val acc  score");
    for r in &result.rows {
        println!(
            "{:>9} {:>12} {:>7.1} {:>8.1} {:>6.1}",
            r.lambda_qa, r.lambda_class, r.val_qa_f1, r.val_acc, r.score
        );
    }
    println!("selected: {:?}", result.best);
    Ok(())
}
