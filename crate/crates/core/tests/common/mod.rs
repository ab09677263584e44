#![allow(dead_code)]

use clinqa::corpus::{CategoryLabel, ClassWeights, QaRecord};
use clinqa::model::{init_params, ClassificationMode, EncoderConfig, ModelParams};
use clinqa::tokenizer::{build_vocab, Vocabulary};
use clinqa::training::{loss_and_gradient, example_loss, prepare_example, Example, LossWeights};

pub fn record(id: &str, question: &str, context: &str, answer: &str, label: CategoryLabel) -> QaRecord {
    let byte = context.find(answer).expect("answer occurs in context");
    let start = context[..byte].chars().count();
    QaRecord {
        id: id.into(),
        question: question.into(),
        context: context.into(),
        answer_text: answer.into(),
        answer_char_start: start,
        answer_char_end: start + answer.chars().count(),
        label,
        soft_labels: None,
        all_gold_answers: None,
        source_id: None,
        gazetteer_miss: false,
    }
}

/// A tiny model (width 8, sequence 8) and one example that fits it.
pub fn tiny_setup(mode: ClassificationMode, seed: u64) -> (ModelParams, Example) {
    let rec = record(
        "g",
        "dose?",
        "took metformin daily",
        "metformin",
        CategoryLabel::Medication,
    );
    let vocab: Vocabulary = build_vocab([rec.question.as_str(), rec.context.as_str()], 60, 1).unwrap();
    let mut cfg = EncoderConfig::tiny(vocab.len());
    cfg.classification_mode = mode;
    let params = init_params(&cfg, seed).unwrap();
    let mut ex = prepare_example(&rec, &vocab, cfg.max_seq_len).unwrap().expect("answer fits");
    if mode == ClassificationMode::Sigmoid {
        ex.target = [0.0, 1.0, 0.0, 0.0, 1.0];
    }
    (params, ex)
}

pub fn weights(lq: f64, lc: f64) -> LossWeights {
    let mut cw = ClassWeights::uniform();
    cw.weights.insert(CategoryLabel::Medication, 1.7);
    LossWeights::new(lq, lc, cw).unwrap()
}

/// Worst per-group relative error between analytic and central-difference gradients.
pub fn gradient_check(params: &ModelParams, ex: &Example, lw: &LossWeights, h: f64) -> Vec<(String, f64)> {
    let (_, analytic) = loss_and_gradient(params, ex, lw).unwrap();
    let mut numeric = params.zeros_like();
    let mut probe = params.clone();
    let n_tensors = params.tensors().len();
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].data.len();
        for j in 0..len {
            let orig = params.tensors()[ti].data[j];
            probe.tensors_mut()[ti].data[j] = orig + h;
            let up = example_loss(&probe, ex, lw).unwrap().total;
            probe.tensors_mut()[ti].data[j] = orig - h;
            let down = example_loss(&probe, ex, lw).unwrap().total;
            probe.tensors_mut()[ti].data[j] = orig;
            numeric.tensors_mut()[ti].data[j] = (up - down) / (2.0 * h);
        }
    }
    let mut groups: std::collections::BTreeMap<String, (f64, f64, f64)> = Default::default();
    for (a, n) in analytic.tensors().iter().zip(numeric.tensors()) {
        let e = groups.entry(format!("{:?}", a.group)).or_default();
        for (x, y) in a.data.iter().zip(n.data) {
            e.0 += (x - y).powi(2);
            e.1 += x * x;
            e.2 += y * y;
        }
    }
    groups
        .into_iter()
        .map(|(g, (diff, a, n))| {
            let denom = a.sqrt().max(n.sqrt());
            let rel = if denom == 0.0 { 0.0 } else { diff.sqrt() / denom };
            (g, rel)
        })
        .collect()
}
