mod common;

use clinqa::corpus::CategoryLabel::{self, *};
use clinqa::evaluation::*;
use clinqa::tokenizer::build_vocab;
use common::record;
use proptest::prelude::*;

fn pred(id: &str, answer: &str, label: CategoryLabel) -> Prediction {
    Prediction {
        id: id.into(),
        answer: answer.into(),
        label,
        scores: [0.2; 5],
    }
}

/// Ten predictions whose scores are worked out by hand below.
fn fixture() -> (Vec<Prediction>, Vec<clinqa::corpus::QaRecord>) {
    let q = "What was noted?";
    let mut gold = vec![
        record("1", q, "Started metformin 500mg.", "metformin 500mg", Medication),
        record("2", q, "History of atrial fibrillation.", "atrial fibrillation", Diagnosis),
        record("3", q, "Has chest pain radiating to arm.", "chest pain", Symptoms),
        record("4", q, "Underwent appendectomy as a child.", "appendectomy", Procedure),
        record("5", q, "Potassium 6.9 noted.", "6.9", LabReport),
        record("6", q, "Reports nausea and vomiting overnight.", "nausea", Symptoms),
        record("7", q, "Continue lisinopril at home.", "lisinopril", Medication),
        record("8", q, "Ordered a cbc this morning.", "cbc", LabReport),
        record("9", q, "Screening colonoscopy was normal.", "colonoscopy", Procedure),
        record("10", q, "History of asthma, not copd.", "asthma", Diagnosis),
    ];
    gold[5].all_gold_answers = Some(vec!["nausea".into(), "vomiting".into()]);
    let preds = vec![
        pred("1", "metformin 500mg", Medication),
        pred("2", "fibrillation", Diagnosis),
        pred("3", "chest pain radiating to arm", Symptoms),
        pred("4", "appendectomy", Diagnosis),
        pred("5", "noted", LabReport),
        pred("6", "vomiting", Symptoms),
        pred("7", "lisinopril", Medication),
        pred("8", "cbc", Medication),
        pred("9", "colonoscopy", Procedure),
        pred("10", "copd", Diagnosis),
    ];
    (preds, gold)
}

fn near(a: f64, b: f64) {
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn hand_scored_report() {
    let (preds, gold) = fixture();
    // Record 5's context is left out so its digits are out of vocabulary.
    let vocab = build_vocab(
        gold.iter().filter(|r| r.id != "5").map(|r| r.context.as_str()),
        1000,
        1,
    )
    .unwrap();
    let r = build_report(&preds, &gold, &vocab).unwrap();

    assert_eq!(r.n_examples, 10);
    near(r.qa.token_f1, 100.0 * (6.0 + 2.0 / 3.0 + 4.0 / 7.0) / 10.0);
    near(r.qa.exact_match, 60.0);
    near(r.qa.recall, 75.0);
    near(r.classification.accuracy, 80.0);
    near(r.classification.weighted_f1, 100.0 * (0.8 + 0.8 + 1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 5.0);
    near(r.classification.recall, 80.0);

    let pc = &r.per_class;
    assert_eq!(pc.len(), 5);
    near(pc[&Medication].precision, 200.0 / 3.0);
    near(pc[&Medication].recall, 100.0);
    near(pc[&Medication].f1, 80.0);
    near(pc[&Procedure].precision, 100.0);
    near(pc[&Procedure].recall, 50.0);
    near(pc[&Symptoms].f1, 100.0);
    assert!(pc.values().all(|m| m.support == 2));

    let count = |c| r.errors.get(&c).map_or(0, |e| e.count);
    assert_eq!(count(ErrorCategory::SpanBoundary), 2);
    assert_eq!(count(ErrorCategory::WrongClass), 2);
    assert_eq!(count(ErrorCategory::OovTerm), 1);
    assert_eq!(count(ErrorCategory::AmbiguousAnswer), 1);
    assert_eq!(count(ErrorCategory::Other), 1);
    assert_eq!(r.n_errors, 7);
    near(r.errors[&ErrorCategory::SpanBoundary].percentage, 200.0 / 7.0);
    near(r.errors.values().map(|e| e.percentage).sum::<f64>(), 100.0);
}

#[test]
fn report_files_have_expected_shape() {
    let (preds, gold) = fixture();
    let vocab = build_vocab(gold.iter().map(|r| r.context.as_str()), 1000, 1).unwrap();
    let r = build_report(&preds, &gold, &vocab).unwrap();
    let dir = tempfile::tempdir().unwrap();
    r.write_files(dir.path()).unwrap();

    let per_class = std::fs::read_to_string(dir.path().join("per_class.csv")).unwrap();
    let lines: Vec<_> = per_class.lines().collect();
    assert_eq!(lines[0], "category,precision,recall,f1,support");
    assert_eq!(lines.len(), 6);
    let errors = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(errors.starts_with("error_category,count,percentage\n"));
    let total: f64 = errors
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    // four-decimal rounding per row
    assert!((total - 100.0).abs() < 1e-3);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(json["qa"]["token_f1"].is_number());
    assert!(json["errors"]["span_boundary"]["count"].is_number());
}

#[test]
fn misaligned_predictions_are_rejected() {
    let (mut preds, gold) = fixture();
    let vocab = build_vocab(gold.iter().map(|r| r.context.as_str()), 1000, 1).unwrap();
    preds.swap(0, 1);
    assert!(build_report(&preds, &gold, &vocab).is_err());
    assert!(build_report(&preds[..3], &gold, &vocab).is_err());
    assert!(build_report(&[], &[], &vocab).is_err());
}

#[test]
fn normalization_ignores_case_punctuation_and_spacing() {
    assert_eq!(normalize_answer("  Lisinopril,  10MG daily. "), "lisinopril 10mg daily");
    assert_eq!(exact_match("Aspirin!", "aspirin"), 1);
    assert_eq!(token_f1("", ""), 1.0);
    assert_eq!(token_f1("a", ""), 0.0);
    // Repeated tokens only match as often as they occur in both.
    near(token_f1("pain pain pain", "pain"), 0.5);
}

#[test]
fn classification_metrics_handle_unseen_categories() {
    let m = classification_metrics(&[Medication, Medication], &[Medication, Diagnosis]).unwrap();
    assert_eq!(m.per_class.len(), 5);
    assert_eq!(m.per_class[&LabReport].support, 0);
    assert_eq!(m.per_class[&LabReport].f1, 0.0);
    near(m.accuracy, 0.5);
    assert!(classification_metrics(&[Medication], &[]).is_err());
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["pain", "chest", "the", "Mg", "10", "daily", "x-ray"]), 0..6)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn token_f1_is_symmetric_and_bounded(a in words(), b in words()) {
        let f = token_f1(&a, &b);
        prop_assert_eq!(f, token_f1(&b, &a));
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn exact_match_implies_full_f1(a in words(), b in words()) {
        if exact_match(&a, &b) == 1 {
            prop_assert_eq!(token_f1(&a, &b), 1.0);
        }
        prop_assert_eq!(exact_match(&a, &a), 1);
        prop_assert_eq!(token_f1(&a, &a.to_uppercase()), 1.0);
    }

    #[test]
    fn accuracy_matches_count(labels in prop::collection::vec((0usize..5, 0usize..5), 1..60)) {
        let pred: Vec<_> = labels.iter().map(|p| CategoryLabel::ALL[p.0]).collect();
        let gold: Vec<_> = labels.iter().map(|p| CategoryLabel::ALL[p.1]).collect();
        let m = classification_metrics(&pred, &gold).unwrap();
        let hits = labels.iter().filter(|p| p.0 == p.1).count();
        prop_assert_eq!(m.accuracy, hits as f64 / labels.len() as f64);
        // Support-weighted recall equals accuracy.
        prop_assert!((m.recall - m.accuracy).abs() < 1e-12);
        prop_assert_eq!(m.per_class.values().map(|c| c.support).sum::<usize>(), labels.len());
    }
}
