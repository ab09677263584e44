use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_loss_grad, classification_loss_grad, qa_loss_grad, LossWeights};
use super::optimizer::{adamw_step, AdamWConfig, TrainState};
use super::schedule::lr_schedule;
use crate::corpus::{compute_class_weights, oversample, CategoryLabel, ClassWeights, DatasetSplit, QaRecord};
use crate::error::{Error, Result};
use crate::evaluation::{build_report, EvalReport, Prediction};
use crate::model::{
    backward, decode_span, forward, ClassificationMode, Dropout, ModelParams, ParamGroup,
};
use crate::tokenizer::{align_answer_span, encode_pair, TokenizedPair, Vocabulary};

const K: usize = CategoryLabel::COUNT;

fn default_grid() -> Vec<(f64, f64)> {
    let values = [0.25, 0.5, 1.0];
    values
        .iter()
        .flat_map(|&q| values.iter().map(move |&c| (q, c)))
        .collect()
}

/// Optimization and loss settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    /// Epochs without validation improvement before stopping; `None` disables.
    pub early_stop_patience: Option<usize>,
    /// Smallest decrease in validation loss that counts as improvement.
    pub min_delta: f64,
    pub seed: u64,
    pub lambda_qa: f64,
    pub lambda_class: f64,
    /// Candidate `(lambda_qa, lambda_class)` pairs for grid search.
    pub grid: Vec<(f64, f64)>,
    /// Weight the classification loss by inverse category frequency.
    pub use_class_weights: bool,
    /// Duplicate minority-category training records up to the majority count.
    pub oversample: bool,
    /// Longest answer, in tokens, the decoder may return.
    pub max_answer_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            epochs: 5,
            batch_size: 16,
            warmup_fraction: 0.1,
            weight_decay: 0.01,
            early_stop_patience: Some(2),
            min_delta: 1e-4,
            seed: 0,
            lambda_qa: 1.0,
            lambda_class: 1.0,
            grid: default_grid(),
            use_class_weights: true,
            oversample: false,
            max_answer_len: 30,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warmup_fraction {} outside [0, 1)", self.warmup_fraction));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.weight_decay < 0.0 || self.min_delta < 0.0 {
            return bad("weight_decay and min_delta must be non-negative".into());
        }
        if self.max_answer_len == 0 {
            return bad("max_answer_len must be positive".into());
        }
        LossWeights::new(self.lambda_qa, self.lambda_class, ClassWeights::uniform())?;
        Ok(())
    }

    pub fn with_lambdas(&self, lambda_qa: f64, lambda_class: f64) -> TrainConfig {
        TrainConfig {
            lambda_qa,
            lambda_class,
            ..self.clone()
        }
    }
}

/// A record packed for the model, with its aligned gold span.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub record: QaRecord,
    pub pair: TokenizedPair,
    pub gold: (usize, usize),
    pub target: [f64; K],
}

/// Packs a record; `None` when truncation cut the answer out of the context.
pub fn prepare_example(record: &QaRecord, vocab: &Vocabulary, max_seq_len: usize) -> Result<Option<Example>> {
    let mut pair = encode_pair(&record.question, &record.context, vocab, max_seq_len).map_err(|e| {
        Error::Validation {
            id: record.id.clone(),
            message: e.to_string(),
        }
    })?;
    let Some(gold) = align_answer_span(&pair, (record.answer_char_start, record.answer_char_end)) else {
        return Ok(None);
    };
    pair.gold_span = Some(gold);
    Ok(Some(Example {
        record: record.clone(),
        pair,
        gold,
        target: record.soft_target(),
    }))
}

/// Packs every record, returning the examples and the ids of skipped records.
pub fn prepare_examples(
    records: &[QaRecord],
    vocab: &Vocabulary,
    max_seq_len: usize,
) -> Result<(Vec<Example>, Vec<String>)> {
    let mut examples = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for r in records {
        match prepare_example(r, vocab, max_seq_len)? {
            Some(ex) => examples.push(ex),
            None => skipped.push(r.id.clone()),
        }
    }
    Ok((examples, skipped))
}

/// Per-example loss split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub qa: f64,
    pub class: f64,
}

fn loss_and_grad(
    params: &ModelParams,
    ex: &Example,
    lw: &LossWeights,
    dropout: Option<Dropout>,
    want_grad: bool,
) -> Result<(LossParts, Option<ModelParams>)> {
    let f = forward(params, &ex.pair, dropout)?;
    let (lq, mut ds, mut de) = qa_loss_grad(&f.span, ex.gold)?;
    let (lc, mut dc) = match params.config.classification_mode {
        ClassificationMode::Softmax => {
            classification_loss_grad(&f.class, ex.record.label, &lw.class_weights)
        }
        ClassificationMode::Sigmoid => bce_loss_grad(&f.class, &ex.target),
    };
    let parts = LossParts {
        total: lw.lambda_qa * lq + lw.lambda_class * lc,
        qa: lq,
        class: lc,
    };
    if !want_grad {
        return Ok((parts, None));
    }
    ds.iter_mut().chain(de.iter_mut()).for_each(|g| *g *= lw.lambda_qa);
    dc.iter_mut().for_each(|g| *g *= lw.lambda_class);
    let span_grad = (lw.lambda_qa != 0.0).then_some((ds.as_slice(), de.as_slice()));
    let class_grad = (lw.lambda_class != 0.0).then_some(&dc);
    Ok((parts, Some(backward(params, &f.trace, span_grad, class_grad))))
}

/// Combined loss of one example with dropout off.
pub fn example_loss(params: &ModelParams, ex: &Example, lw: &LossWeights) -> Result<LossParts> {
    Ok(loss_and_grad(params, ex, lw, None, false)?.0)
}

/// Combined loss of one example and its gradient for every parameter, dropout off.
pub fn loss_and_gradient(params: &ModelParams, ex: &Example, lw: &LossWeights) -> Result<(LossParts, ModelParams)> {
    let (parts, grad) = loss_and_grad(params, ex, lw, None, true)?;
    Ok((parts, grad.expect("gradient requested")))
}

/// Model output for one question/context pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanPrediction {
    pub answer: String,
    pub token_span: (usize, usize),
    pub char_span: (usize, usize),
    pub label: CategoryLabel,
    /// Softmax or sigmoid scores, following the configured classification mode.
    pub scores: [f64; K],
    pub truncated: bool,
}

pub fn predict_pair(
    params: &ModelParams,
    pair: &TokenizedPair,
    context: &str,
    max_answer_len: usize,
) -> Result<SpanPrediction> {
    let f = forward(params, pair, None)?;
    let (s, e) = decode_span(&f.span, max_answer_len)?;
    let char_span = pair
        .char_range(s, e)
        .ok_or_else(|| Error::Model(format!("decoded span ({s}, {e}) has no character range")))?;
    let answer = pair.window_text(context, s, e).unwrap_or_default();
    let scores = match params.config.classification_mode {
        ClassificationMode::Softmax => f.class.softmax(),
        ClassificationMode::Sigmoid => f.class.sigmoid(),
    };
    Ok(SpanPrediction {
        answer,
        token_span: (s, e),
        char_span,
        label: f.class.argmax(),
        scores,
        truncated: pair.truncated,
    })
}

pub fn predict(
    params: &ModelParams,
    vocab: &Vocabulary,
    question: &str,
    context: &str,
    max_answer_len: usize,
) -> Result<SpanPrediction> {
    let pair = encode_pair(question, context, vocab, params.config.max_seq_len)?;
    predict_pair(params, &pair, context, max_answer_len)
}

/// Predicts every record (answers truncated away still get a prediction).
pub fn predict_records(
    params: &ModelParams,
    vocab: &Vocabulary,
    records: &[QaRecord],
    max_answer_len: usize,
) -> Result<Vec<Prediction>> {
    records
        .iter()
        .map(|r| {
            let p = predict(params, vocab, &r.question, &r.context, max_answer_len).map_err(|e| {
                Error::Validation {
                    id: r.id.clone(),
                    message: e.to_string(),
                }
            })?;
            Ok(Prediction {
                id: r.id.clone(),
                answer: p.answer,
                label: p.label,
                scores: p.scores,
            })
        })
        .collect()
}

pub fn evaluate_records(
    params: &ModelParams,
    vocab: &Vocabulary,
    records: &[QaRecord],
    max_answer_len: usize,
) -> Result<(EvalReport, Vec<Prediction>)> {
    let preds = predict_records(params, vocab, records, max_answer_len)?;
    Ok((build_report(&preds, records, vocab)?, preds))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_qa_f1: f64,
    pub val_em: f64,
    pub val_acc: f64,
    pub val_weighted_f1: f64,
    /// Learning rate after the epoch's last step.
    pub lr: f64,
}

/// Patience-based early stopping on a loss that should decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: Option<usize>,
    pub min_delta: f64,
    pub best: f64,
    pub best_epoch: Option<usize>,
    pub bad_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// New best; keep these parameters.
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: None,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if self.best_epoch.is_none() || loss < self.best - self.min_delta {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.bad_epochs = 0;
            return StopDecision::Improved;
        }
        self.bad_epochs += 1;
        match self.patience {
            Some(p) if self.bad_epochs >= p => StopDecision::Stop,
            _ => StopDecision::Continue,
        }
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Optimizer steps taken when the best parameters were recorded.
    pub best_step: u64,
    pub total_steps: u64,
    pub stopped_early: bool,
    pub class_weights: ClassWeights,
    /// Ids of records whose answer did not survive truncation.
    pub skipped: Vec<String>,
}

/// Extra controls for [`train_with`].
pub struct TrainHooks<'a> {
    /// Continue a run from this optimizer step (the schedule and data order
    /// pick up where they left off; optimizer moments restart at zero).
    pub start_step: u64,
    /// Called after every epoch; `Break` ends training early.
    pub observer: Option<&'a mut dyn FnMut(&EpochLog, &ModelParams) -> ControlFlow<()>>,
}

impl Default for TrainHooks<'_> {
    fn default() -> Self {
        TrainHooks {
            start_step: 0,
            observer: None,
        }
    }
}

/// Well-mixed 64-bit seed for a `(seed, a, b)` stream.
pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mean_loss(params: &ModelParams, examples: &[Example], lw: &LossWeights) -> Result<f64> {
    let mut sum = 0.0;
    for ex in examples {
        sum += example_loss(params, ex, lw)?.total;
    }
    Ok(sum / examples.len() as f64)
}

pub fn train(
    params: ModelParams,
    splits: &DatasetSplit,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(params, splits, vocab, config, TrainHooks::default())
}

/// Mini-batch AdamW training with validation after every epoch.
///
/// Returns the parameters with the lowest validation loss. When a task's
/// weight is zero its branch and head are frozen.
pub fn train_with(
    mut params: ModelParams,
    splits: &DatasetSplit,
    vocab: &Vocabulary,
    config: &TrainConfig,
    mut hooks: TrainHooks<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.config.validate()?;
    if params.config.vocab_size != vocab.len() {
        return Err(Error::Config(format!(
            "model vocabulary size {} differs from vocabulary of {}",
            params.config.vocab_size,
            vocab.len()
        )));
    }
    let seq = params.config.max_seq_len;
    let class_weights = if config.use_class_weights {
        compute_class_weights(&splits.train)?
    } else {
        ClassWeights::uniform()
    };
    let lw = LossWeights::new(config.lambda_qa, config.lambda_class, class_weights.clone())?;
    let train_records = if config.oversample {
        oversample(&splits.train, config.seed)?
    } else {
        splits.train.clone()
    };
    let (train_ex, mut skipped) = prepare_examples(&train_records, vocab, seq)?;
    let (val_ex, val_skipped) = prepare_examples(&splits.validation, vocab, seq)?;
    skipped.extend(val_skipped);
    if train_ex.is_empty() || val_ex.is_empty() {
        return Err(Error::Config(
            "training and validation splits need at least one usable record".into(),
        ));
    }
    if !skipped.is_empty() {
        log::warn!("{} records skipped: answer truncated away", skipped.len());
    }

    let mut frozen = Vec::new();
    if config.lambda_qa == 0.0 {
        frozen.extend(ParamGroup::QA_ONLY);
    }
    if config.lambda_class == 0.0 {
        frozen.extend(ParamGroup::CLASS_ONLY);
    }
    let adamw = AdamWConfig {
        weight_decay: config.weight_decay,
        ..AdamWConfig::default()
    };
    let steps_per_epoch = train_ex.len().div_ceil(config.batch_size) as u64;
    let total_steps = steps_per_epoch * config.epochs as u64;
    if hooks.start_step > total_steps {
        return Err(Error::Config(format!(
            "cannot resume at step {} of a {total_steps}-step run",
            hooks.start_step
        )));
    }
    let mut state = TrainState::new(&params, config.seed);
    state.step = hooks.start_step;
    let mut stopper = EarlyStopping::new(config.early_stop_patience, config.min_delta);
    let mut best = (params.clone(), 0usize, state.step);
    let mut log = Vec::new();
    let mut stopped_early = false;
    let first_epoch = (hooks.start_step / steps_per_epoch) as usize;
    let mut lr = 0.0;

    for epoch in first_epoch..config.epochs {
        let mut order: Vec<usize> = (0..train_ex.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let global = epoch as u64 * steps_per_epoch + b as u64;
            if global < hooks.start_step {
                continue;
            }
            lr = lr_schedule(global + 1, total_steps, config.learning_rate, config.warmup_fraction)?;
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in batch {
                let dropout = Dropout {
                    rate: params.config.dropout_rate,
                    rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2 + global, i as u64)),
                };
                let (parts, g) = loss_and_grad(&params, &train_ex[i], &lw, Some(dropout), true)?;
                batch_loss += parts.total;
                grads.add_assign(&g.expect("gradient requested"));
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    step: global + 1,
                    lr,
                    message: format!("batch loss is {batch_loss}"),
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            adamw_step(&mut params, &grads, &mut state, lr, &adamw, &frozen).map_err(|e| match e {
                Error::NonFiniteGradient(name) => Error::Divergence {
                    step: global + 1,
                    lr,
                    message: format!("non-finite gradient in {name}"),
                },
                other => other,
            })?;
            loss_sum += batch_loss;
            loss_count += batch.len();
        }

        let val_loss = mean_loss(&params, &val_ex, &lw)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                step: state.step,
                lr,
                message: format!("validation loss is {val_loss}"),
            });
        }
        let val_records: Vec<QaRecord> = val_ex.iter().map(|e| e.record.clone()).collect();
        let (report, _) = evaluate_records(&params, vocab, &val_records, config.max_answer_len)?;
        let entry = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / loss_count.max(1) as f64,
            val_loss,
            val_qa_f1: report.qa.token_f1,
            val_em: report.qa.exact_match,
            val_acc: report.classification.accuracy,
            val_weighted_f1: report.classification.weighted_f1,
            lr,
        };
        log::info!(
            "epoch {} train_loss {:.4} val_loss {:.4} f1 {:.1} acc {:.1}",
            entry.epoch,
            entry.train_loss,
            entry.val_loss,
            entry.val_qa_f1,
            entry.val_acc
        );
        let decision = stopper.observe(epoch + 1, val_loss);
        if decision == StopDecision::Improved {
            best = (params.clone(), epoch + 1, state.step);
        }
        let observer_break = match hooks.observer.as_mut() {
            Some(f) => f(&entry, &params).is_break(),
            None => false,
        };
        log.push(entry);
        if decision == StopDecision::Stop || observer_break {
            stopped_early = epoch + 1 < config.epochs;
            break;
        }
    }
    state.best_val_loss = stopper.best;
    state.epochs_without_improvement = stopper.bad_epochs;

    let (params, best_epoch, best_step) = best;
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
        best_val_loss: stopper.best,
        best_step,
        total_steps,
        stopped_early,
        class_weights,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_two_stops_on_third_evaluation() {
        let mut s = EarlyStopping::new(Some(2), 1e-4);
        assert_eq!(s.observe(1, 1.0), StopDecision::Improved);
        assert_eq!(s.observe(2, 1.1), StopDecision::Continue);
        assert_eq!(s.observe(3, 1.2), StopDecision::Stop);
        assert_eq!(s.best_epoch, Some(1));
    }

    #[test]
    fn improvements_below_min_delta_do_not_count() {
        let mut s = EarlyStopping::new(Some(1), 0.1);
        s.observe(1, 1.0);
        assert_eq!(s.observe(2, 0.95), StopDecision::Stop);
        let mut s = EarlyStopping::new(None, 0.0);
        s.observe(1, 1.0);
        for e in 2..10 {
            assert_eq!(s.observe(e, 2.0), StopDecision::Continue);
        }
    }

    #[test]
    fn default_grid_has_nine_pairs() {
        let g = TrainConfig::default().grid;
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|&(q, c)| q > 0.0 && c > 0.0));
    }

    #[test]
    fn config_round_trips_through_json_with_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.learning_rate, 5e-5);
        assert_eq!(c.early_stop_patience, Some(2));
        let bad = TrainConfig {
            warmup_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
        assert_ne!(derive_seed(0, 0, 0), derive_seed(0, 0, 1));
    }
}
