//! Loss-weight grid search and the single-task vs multi-task ablation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::trainer::{evaluate_records, train, TrainConfig};
use crate::corpus::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tokenizer::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub lambda_qa: f64,
    pub lambda_class: f64,
    pub val_qa_f1: f64,
    pub val_acc: f64,
    /// Mean of validation F1 and accuracy; the selection criterion.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: (f64, f64),
    pub rows: Vec<GridRow>,
}

/// Grid pairs with exact duplicates removed, first occurrence kept.
pub fn dedup_grid(grid: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for &pair in grid {
        if out.contains(&pair) {
            log::warn!("duplicate grid pair ({}, {}) ignored", pair.0, pair.1);
        } else {
            out.push(pair);
        }
    }
    out
}

/// Trains one model per `(lambda_qa, lambda_class)` pair, each from `init`,
/// and picks the pair with the best mean of validation F1 and accuracy.
/// Ties go to the earlier pair.
pub fn grid_search_lambdas(
    init: &ModelParams,
    splits: &DatasetSplit,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<GridSearchResult> {
    let grid = dedup_grid(&config.grid);
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (lq, lc) in grid {
        let out = train(init.clone(), splits, vocab, &config.with_lambdas(lq, lc))?;
        let (report, _) = evaluate_records(&out.params, vocab, &splits.validation, config.max_answer_len)?;
        let (f1, acc) = (report.qa.token_f1, report.classification.accuracy);
        log::info!("grid ({lq}, {lc}): val f1 {f1:.2} acc {acc:.2}");
        rows.push(GridRow {
            lambda_qa: lq,
            lambda_class: lc,
            val_qa_f1: f1,
            val_acc: acc,
            score: (f1 + acc) / 2.0,
        });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.score > rows[best].score {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best: (rows[best].lambda_qa, rows[best].lambda_class),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `qa_only`, `class_only` or `mtl`.
    pub config: String,
    pub lambda_qa: f64,
    pub lambda_class: f64,
    /// Test token F1 in percent; `None` when the span head was not trained.
    pub qa_f1: Option<f64>,
    /// Test accuracy in percent; `None` when the classifier was not trained.
    pub class_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Multi-task F1 minus QA-only F1, in points.
    pub delta_f1: f64,
    /// Multi-task accuracy minus classification-only accuracy, in points.
    pub delta_acc: f64,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let cell = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.4}"));
        let mut out = String::from("config,qa_f1,class_acc\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.config, cell(r.qa_f1), cell(r.class_acc));
        }
        out
    }
}

/// Trains QA-only `(1, 0)`, classification-only `(0, 1)` and multi-task
/// (`config`'s lambdas) models from the same initialization and splits, and
/// scores each on the test split.
pub fn run_ablation(
    init: &ModelParams,
    splits: &DatasetSplit,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<AblationReport> {
    let runs = [
        ("qa_only", 1.0, 0.0),
        ("class_only", 0.0, 1.0),
        ("mtl", config.lambda_qa, config.lambda_class),
    ];
    let mut rows = Vec::with_capacity(3);
    for (name, lq, lc) in runs {
        let out = train(init.clone(), splits, vocab, &config.with_lambdas(lq, lc))?;
        let (report, _) = evaluate_records(&out.params, vocab, &splits.test, config.max_answer_len)?;
        log::info!(
            "{name}: test f1 {:.2} acc {:.2}",
            report.qa.token_f1,
            report.classification.accuracy
        );
        rows.push(AblationRow {
            config: name.to_string(),
            lambda_qa: lq,
            lambda_class: lc,
            qa_f1: (lq > 0.0).then_some(report.qa.token_f1),
            class_acc: (lc > 0.0).then_some(report.classification.accuracy),
        });
    }
    let get = |i: usize, f: fn(&AblationRow) -> Option<f64>| f(&rows[i]).unwrap_or(f64::NAN);
    let delta_f1 = get(2, |r| r.qa_f1) - get(0, |r| r.qa_f1);
    let delta_acc = get(2, |r| r.class_acc) - get(1, |r| r.class_acc);
    Ok(AblationReport {
        rows,
        delta_f1,
        delta_acc,
    })
}
