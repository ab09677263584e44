//! Answer-extraction and classification metrics, and the error taxonomy.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryLabel, QaRecord};
use crate::error::{Error, Result};
use crate::tokenizer::{basic_tokenize, wordpiece_tokenize, Vocabulary, UNK};

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn answer_tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Token-bag precision, recall and F1 of `predicted` against `gold`.
pub fn token_overlap(predicted: &str, gold: &str) -> (f64, f64, f64) {
    let p = answer_tokens(predicted);
    let g = answer_tokens(gold);
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0, 0.0),
        _ => {}
    }
    let mut bag: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *bag.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(n) = bag.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return (0.0, 0.0, 0.0);
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    // 2PR / (P + R) reduced to counts: one rounding instead of several.
    let f1 = (2 * common) as f64 / (p.len() + g.len()) as f64;
    (precision, recall, f1)
}

pub fn token_f1(predicted: &str, gold: &str) -> f64 {
    token_overlap(predicted, gold).2
}

pub fn exact_match(predicted: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(predicted) == normalize_answer(gold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// Support-weighted mean of per-class F1.
    pub weighted_f1: f64,
    /// Support-weighted mean of per-class recall.
    pub recall: f64,
    /// One row per category, including categories with zero support.
    pub per_class: BTreeMap<CategoryLabel, ClassMetrics>,
}

/// One-vs-rest metrics per category, as fractions in `[0, 1]`.
pub fn classification_metrics(
    pred: &[CategoryLabel],
    gold: &[CategoryLabel],
) -> Result<ClassificationMetrics> {
    if pred.len() != gold.len() {
        return Err(Error::Evaluation(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Evaluation("no examples to score".into()));
    }
    let k = CategoryLabel::COUNT;
    let mut confusion = vec![[0usize; CategoryLabel::COUNT]; k];
    for (p, g) in pred.iter().zip(gold) {
        confusion[g.index()][p.index()] += 1;
    }
    let n = gold.len() as f64;
    let mut per_class = BTreeMap::new();
    let (mut correct, mut weighted_f1, mut weighted_recall) = (0usize, 0.0, 0.0);
    for cat in CategoryLabel::ALL {
        let c = cat.index();
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        correct += tp;
        weighted_f1 += support as f64 * f1;
        weighted_recall += support as f64 * recall;
        per_class.insert(
            cat,
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / n,
        weighted_f1: weighted_f1 / n,
        recall: weighted_recall / n,
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    AmbiguousAnswer,
    SpanBoundary,
    WrongClass,
    #[serde(rename = "oov_term")]
    OovTerm,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::AmbiguousAnswer,
        ErrorCategory::SpanBoundary,
        ErrorCategory::WrongClass,
        ErrorCategory::OovTerm,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::AmbiguousAnswer => "ambiguous_answer",
            ErrorCategory::SpanBoundary => "span_boundary",
            ErrorCategory::WrongClass => "wrong_class",
            ErrorCategory::OovTerm => "oov_term",
            ErrorCategory::Other => "other",
        }
    }
}

/// Classifies a wrong prediction; `None` when span and label are both right.
///
/// Rules are tried in order: a prediction equal to a non-primary gold answer
/// is ambiguous; partial token overlap is a boundary error; a right span with
/// the wrong label is a classification error; a gold answer containing a word
/// the vocabulary maps to `[UNK]` is an OOV error; anything else is `Other`.
pub fn categorize_error(
    record: &QaRecord,
    pred_span: &str,
    pred_label: CategoryLabel,
    all_gold_answers: &[&str],
    vocab: &Vocabulary,
) -> Option<ErrorCategory> {
    let primary = record.answer_text.as_str();
    let span_ok = exact_match(pred_span, primary) == 1;
    let label_ok = pred_label == record.label;
    if span_ok && label_ok {
        return None;
    }
    let ambiguous = all_gold_answers
        .iter()
        .filter(|a| normalize_answer(a) != normalize_answer(primary))
        .any(|a| exact_match(pred_span, a) == 1);
    if !span_ok && ambiguous {
        return Some(ErrorCategory::AmbiguousAnswer);
    }
    if !span_ok && token_f1(pred_span, primary) > 0.0 {
        return Some(ErrorCategory::SpanBoundary);
    }
    if span_ok {
        return Some(ErrorCategory::WrongClass);
    }
    let has_oov = basic_tokenize(primary)
        .iter()
        .any(|w| wordpiece_tokenize(w, vocab).iter().any(|t| t == UNK));
    if has_oov {
        return Some(ErrorCategory::OovTerm);
    }
    Some(ErrorCategory::Other)
}

/// Model output for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub answer: String,
    pub label: CategoryLabel,
    /// Per-category probabilities, in category order.
    pub scores: [f64; CategoryLabel::COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaScores {
    pub token_f1: f64,
    pub exact_match: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCount {
    pub count: usize,
    pub percentage: f64,
}

/// Aggregate scores; every rate is a percentage in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub qa: QaScores,
    pub classification: ClassScores,
    pub per_class: BTreeMap<CategoryLabel, ClassMetrics>,
    /// Only categories that occurred; percentages are over errorful examples.
    pub errors: BTreeMap<ErrorCategory, ErrorCount>,
    pub n_errors: usize,
}

/// Best token overlap of `pred` over all acceptable answers, as `(p, r, f1, em)`.
fn best_overlap(pred: &str, golds: &[&str]) -> (f64, f64, f64, u8) {
    let mut best = (0.0, 0.0, 0.0, 0);
    for g in golds {
        let (p, r, f) = token_overlap(pred, g);
        let em = exact_match(pred, g);
        if (em, f) > (best.3, best.2) {
            best = (p, r, f, em);
        }
    }
    best
}

/// Scores predictions against their records, matched by position.
///
/// Span scores take the best match over every acceptable answer of a record.
pub fn build_report(
    predictions: &[Prediction],
    gold: &[QaRecord],
    vocab: &Vocabulary,
) -> Result<EvalReport> {
    if predictions.len() != gold.len() {
        return Err(Error::Evaluation(format!(
            "{} predictions for {} records",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Evaluation("no examples to score".into()));
    }
    let n = gold.len() as f64;
    let (mut f1_sum, mut em_sum, mut recall_sum) = (0.0, 0.0, 0.0);
    let mut error_counts: BTreeMap<ErrorCategory, usize> = BTreeMap::new();
    for (pred, rec) in predictions.iter().zip(gold) {
        if pred.id != rec.id {
            return Err(Error::Evaluation(format!(
                "prediction {} is aligned with record {}",
                pred.id, rec.id
            )));
        }
        let golds = rec.gold_answers();
        let (_, r, f, em) = best_overlap(&pred.answer, &golds);
        f1_sum += f;
        em_sum += em as f64;
        recall_sum += r;
        if let Some(cat) = categorize_error(rec, &pred.answer, pred.label, &golds, vocab) {
            *error_counts.entry(cat).or_default() += 1;
        }
    }
    let pred_labels: Vec<_> = predictions.iter().map(|p| p.label).collect();
    let gold_labels: Vec<_> = gold.iter().map(|r| r.label).collect();
    let cls = classification_metrics(&pred_labels, &gold_labels)?;
    let n_errors: usize = error_counts.values().sum();
    let errors = error_counts
        .into_iter()
        .map(|(cat, count)| {
            let percentage = 100.0 * count as f64 / n_errors as f64;
            (cat, ErrorCount { count, percentage })
        })
        .collect();
    let pct = |x: f64| 100.0 * x;
    Ok(EvalReport {
        n_examples: gold.len(),
        qa: QaScores {
            token_f1: pct(f1_sum / n),
            exact_match: pct(em_sum / n),
            recall: pct(recall_sum / n),
        },
        classification: ClassScores {
            accuracy: pct(cls.accuracy),
            weighted_f1: pct(cls.weighted_f1),
            recall: pct(cls.recall),
        },
        per_class: cls
            .per_class
            .into_iter()
            .map(|(cat, m)| {
                let m = ClassMetrics {
                    precision: pct(m.precision),
                    recall: pct(m.recall),
                    f1: pct(m.f1),
                    support: m.support,
                };
                (cat, m)
            })
            .collect(),
        errors,
        n_errors,
    })
}

impl EvalReport {
    /// `category,precision,recall,f1,support`, one row per category.
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("category,precision,recall,f1,support\n");
        for (cat, m) in &self.per_class {
            let _ = writeln!(
                out,
                "{cat},{:.4},{:.4},{:.4},{}",
                m.precision, m.recall, m.f1, m.support
            );
        }
        out
    }

    /// `error_category,count,percentage`, one row per observed category.
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("error_category,count,percentage\n");
        for (cat, e) in &self.errors {
            let _ = writeln!(out, "{},{},{:.4}", cat.as_str(), e.count, e.percentage);
        }
        out
    }

    /// Writes `report.json`, `per_class.csv` and `errors.csv` into `dir`.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("report.json", serde_json::to_string_pretty(self)? + "\n"),
            ("per_class.csv", self.per_class_csv()),
            ("errors.csv", self.errors_csv()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::build_vocab;
    use CategoryLabel::*;

    #[test]
    fn f1_of_partial_overlap() {
        let (p, r, f) = token_overlap("Lisinopril 10mg", "Lisinopril 10mg daily");
        assert_eq!(p, 1.0);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!((f - 0.8).abs() < 1e-12);
        assert_eq!(token_f1("a b", "a b"), 1.0);
        assert_eq!(token_f1("aspirin", "heparin"), 0.0);
        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("", "x"), 0.0);
    }

    #[test]
    fn exact_match_normalizes() {
        assert_eq!(exact_match("Tylenol 500mg", "Tylenol 500mg"), 1);
        assert_eq!(exact_match("Tylenol 500mg", "Tylenol"), 0);
        assert_eq!(exact_match("Tylenol,  500MG.", "tylenol 500mg"), 1);
    }

    #[test]
    fn two_class_confusion() {
        let gold = [Diagnosis, Diagnosis, Medication, Medication];
        let pred = [Diagnosis, Medication, Medication, Medication];
        let m = classification_metrics(&pred, &gold).unwrap();
        assert_eq!(m.accuracy, 0.75);
        let a = m.per_class[&Diagnosis];
        assert_eq!((a.precision, a.recall), (1.0, 0.5));
        let b = m.per_class[&Medication];
        assert!((b.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(b.recall, 1.0);
        assert!((m.weighted_f1 - (0.5 * 2.0 / 3.0 + 0.5 * 0.8)).abs() < 1e-12);
        assert_eq!(m.per_class[&Procedure].support, 0);
        assert!(classification_metrics(&pred[..3], &gold).is_err());
    }

    fn record(answer: &str, label: CategoryLabel) -> QaRecord {
        let context = format!("Patient notes: {answer}.");
        QaRecord {
            id: "r".into(),
            question: "What?".into(),
            answer_char_start: 15,
            answer_char_end: 15 + answer.chars().count(),
            context,
            answer_text: answer.into(),
            label,
            soft_labels: None,
            all_gold_answers: None,
            source_id: None,
            gazetteer_miss: false,
        }
    }

    #[test]
    fn error_rules_in_order() {
        let v = build_vocab(["lisinopril 10mg daily metformin"], 200, 1).unwrap();
        let rec = record("Lisinopril 10mg daily", Medication);
        let golds = ["Lisinopril 10mg daily", "Lisinopril"];
        assert_eq!(categorize_error(&rec, "lisinopril 10mg daily", Medication, &golds, &v), None);
        assert_eq!(
            categorize_error(&rec, "Lisinopril", Medication, &golds, &v),
            Some(ErrorCategory::AmbiguousAnswer)
        );
        assert_eq!(
            categorize_error(&rec, "Lisinopril 10mg", Medication, &golds, &v),
            Some(ErrorCategory::SpanBoundary)
        );
        assert_eq!(
            categorize_error(&rec, "Lisinopril 10mg daily", LabReport, &golds, &v),
            Some(ErrorCategory::WrongClass)
        );
        assert_eq!(
            categorize_error(&rec, "metformin", Medication, &golds, &v),
            Some(ErrorCategory::Other)
        );
        let oov = record("zzqx", Symptoms);
        assert_eq!(
            categorize_error(&oov, "metformin", Symptoms, &["zzqx"], &v),
            Some(ErrorCategory::OovTerm)
        );
    }

    #[test]
    fn single_perfect_prediction() {
        let v = build_vocab(["aspirin"], 50, 1).unwrap();
        let rec = record("aspirin", Medication);
        let pred = Prediction {
            id: "r".into(),
            answer: "aspirin".into(),
            label: Medication,
            scores: [0.0, 1.0, 0.0, 0.0, 0.0],
        };
        let r = build_report(&[pred], &[rec], &v).unwrap();
        assert_eq!(r.qa.token_f1, 100.0);
        assert_eq!(r.qa.exact_match, 100.0);
        assert_eq!(r.classification.accuracy, 100.0);
        assert!(r.errors.is_empty());
        assert_eq!(r.per_class.len(), 5);
        assert_eq!(r.per_class_csv().lines().count(), 6);
        assert!(build_report(&[], &[], &v).is_err());
    }
}
