//! Score hand-written predictions: span metrics, classification metrics and
//! the error taxonomy.

use clinqa::corpus::{CategoryLabel, QaRecord};
use clinqa::evaluation::{build_report, exact_match, token_f1, Prediction};
use clinqa::tokenizer::build_vocab;

fn record(id: &str, context: &str, answer: &str, label: CategoryLabel) -> QaRecord {
    let start = context.find(answer).unwrap();
    QaRecord {
        id: id.into(),
        question: "What was found?".into(),
        context: context.into(),
        answer_text: answer.into(),
        answer_char_start: start,
        answer_char_end: start + answer.len(),
        label,
        soft_labels: None,
        all_gold_answers: None,
        source_id: None,
        gazetteer_miss: false,
    }
}

fn main() -> clinqa::Result<()> {
    println!("F1('the chest pain', 'chest pain radiating') = {:.3}", token_f1("the chest pain", "chest pain radiating"));
    println!("EM('Aspirin.', 'aspirin') = {}", exact_match("Aspirin.", "aspirin"));

    use CategoryLabel::*;
    let gold = vec![
        record("a", "Started metformin 500mg.", "metformin 500mg", Medication),
        record("b", "History of atrial fibrillation.", "atrial fibrillation", Diagnosis),
        record("c", "Potassium was 5.9 today.", "Potassium was 5.9", LabReport),
        record("d", "Underwent appendectomy in 2010.", "appendectomy", Procedure),
        record("e", "Reports nausea overnight.", "nausea", Symptoms),
    ];
    let pred = |id: &str, answer: &str, label| Prediction {
        id: id.into(),
        answer: answer.into(),
        label,
        scores: [0.2; 5],
    };
    let preds = vec![
        pred("a", "metformin 500mg", Medication),
        pred("b", "atrial fibrillation", Symptoms),
        pred("c", "5.9", LabReport),
        pred("d", "appendectomy", Procedure),
        pred("e", "overnight", Symptoms),
    ];

    let vocab = build_vocab(gold.iter().map(|r| r.context.as_str()), 500, 1)?;
    let report = build_report(&preds, &gold, &vocab)?;
    println!("\nF1 {:.1}  EM {:.1}  accuracy {:.1}", report.qa.token_f1, report.qa.exact_match, report.classification.accuracy);
    print!("\n{}", report.per_class_csv());
    print!("\n{}", report.errors_csv());
    Ok(())
}
