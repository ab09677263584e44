//! Generate a synthetic clinical corpus, summarize it and split it.
//!
//! `cargo run --release --example synthetic_corpus -- 500`

use clinqa::categorizer::Gazetteer;
use clinqa::corpus::{
    compute_class_weights, dataset_statistics, generate_synthetic_corpus, stratified_split,
    SplitFractions, SyntheticSpec,
};

fn main() -> clinqa::Result<()> {
    let size: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let records = generate_synthetic_corpus(&SyntheticSpec::emrqa_mix(size, 7), &Gazetteer::fixture())?;

    let r = &records[0];
    println!("first record {}:", r.id);
    println!("  question: {}", r.question);
    println!("  answer:   {:?} [{}..{}] -> {}", r.answer_text, r.answer_char_start, r.answer_char_end, r.label);

    let stats = dataset_statistics(&records);
    println!("\n{:<12} {:>8} {:>9}", "category", "pairs", "entities");
    for (cat, s) in &stats.categories {
        println!("{:<12} {:>8} {:>9}", cat.as_str(), s.qa_pairs, s.unique_entities);
    }
    println!("{:<12} {:>8} {:>9}", "total", stats.total_qa_pairs, stats.total_unique_entities);

    let split = stratified_split(&records, SplitFractions::default(), 7)?;
    println!(
        "\nsplit: {} train / {} validation / {} test",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let weights = compute_class_weights(&split.train)?;
    println!("class weights from the training split:");
    for (cat, w) in &weights.weights {
        println!("  {:<12} {w:.3}", cat.as_str());
    }
    Ok(())
}
