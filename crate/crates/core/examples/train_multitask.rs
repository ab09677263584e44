//! Train the joint model on a small synthetic corpus, save a checkpoint,
//! reload it and answer a question.
//!
//! `cargo run --release --example train_multitask -- 300 10`

use std::ops::ControlFlow;

use clinqa::categorizer::Gazetteer;
use clinqa::corpus::{generate_synthetic_corpus, stratified_split, SplitFractions, SyntheticSpec};
use clinqa::model::{init_params, Checkpoint, EncoderConfig, ModelParams};
use clinqa::tokenizer::build_vocab;
use clinqa::training::{evaluate_records, predict, train_with, EpochLog, TrainConfig, TrainHooks};

fn main() -> clinqa::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let size = args.next().flatten().unwrap_or(300);
    let epochs = args.next().flatten().unwrap_or(10);

    let records = generate_synthetic_corpus(&SyntheticSpec::uniform(size, 3), &Gazetteer::fixture())?;
    let vocab = build_vocab(records.iter().flat_map(|r| [r.question.as_str(), r.context.as_str()]), 4000, 1)?;
    let split = stratified_split(&records, SplitFractions::default(), 3)?;

    let params = init_params(&EncoderConfig::desk(vocab.len()), 3)?;
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs,
        seed: 3,
        ..TrainConfig::default()
    };

    println!("epoch  train   val    F1     EM    acc");
    let mut show = |e: &EpochLog, _: &ModelParams| {
        println!(
            "{:>5} {:.3} {:.3} {:>6.1} {:>6.1} {:>6.1}",
            e.epoch, e.train_loss, e.val_loss, e.val_qa_f1, e.val_em, e.val_acc
        );
        ControlFlow::Continue(())
    };
    let hooks = TrainHooks {
        start_step: 0,
        observer: Some(&mut show),
    };
    let outcome = train_with(params, &split, &vocab, &config, hooks)?;
    println!(
        "best epoch {} (val loss {:.4}), stopped early: {}",
        outcome.best_epoch, outcome.best_val_loss, outcome.stopped_early
    );

    let (report, _) = evaluate_records(&outcome.params, &vocab, &split.test, config.max_answer_len)?;
    println!(
        "test: F1 {:.1}  EM {:.1}  accuracy {:.1}  weighted F1 {:.1}",
        report.qa.token_f1, report.qa.exact_match, report.classification.accuracy, report.classification.weighted_f1
    );

    let path = std::env::temp_dir().join("clinqa_example.ckpt");
    Checkpoint::new(outcome.params, vocab, outcome.best_step, config.max_answer_len)?.save(&path)?;
    let ck = Checkpoint::load(&path)?;
    println!("checkpoint {} reloaded at step {}", path.display(), ck.step);

    let r = &split.test[0];
    let p = predict(&ck.params, &ck.vocab, &r.question, &r.context, ck.max_answer_len)?;
    println!("\nQ: {}\npredicted {:?} ({}), gold {:?} ({})", r.question, p.answer, p.label, r.answer_text, r.label);
    Ok(())
}
