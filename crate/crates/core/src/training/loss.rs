use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryLabel, ClassWeights};
use crate::error::{Error, Result};
use crate::model::{sigmoid, ClassLogits, SpanLogits};

const K: usize = CategoryLabel::COUNT;

/// Task weights of the combined objective, plus per-category CE weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_qa: f64,
    pub lambda_class: f64,
    pub class_weights: ClassWeights,
}

impl LossWeights {
    pub fn new(lambda_qa: f64, lambda_class: f64, class_weights: ClassWeights) -> Result<Self> {
        let lw = LossWeights {
            lambda_qa,
            lambda_class,
            class_weights,
        };
        lw.validate()?;
        Ok(lw)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_qa) || !ok(self.lambda_class) {
            return Err(Error::Config(format!(
                "loss weights must be finite and non-negative, got ({}, {})",
                self.lambda_qa, self.lambda_class
            )));
        }
        if self.lambda_qa == 0.0 && self.lambda_class == 0.0 {
            return Err(Error::Config("lambda_qa and lambda_class are both zero".into()));
        }
        Ok(())
    }
}

/// `-log softmax(logits)[gold]` over the `valid` positions, and its gradient.
fn masked_ce(logits: &[f64], valid: &[bool], gold: usize) -> (f64, Vec<f64>) {
    let max = logits
        .iter()
        .zip(valid)
        .filter(|(_, &v)| v)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits
        .iter()
        .zip(valid)
        .map(|(&z, &v)| if v { (z - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = exp.iter().sum();
    let loss = sum.ln() - (logits[gold] - max);
    let mut grad: Vec<f64> = exp.iter().map(|e| e / sum).collect();
    grad[gold] -= 1.0;
    (loss, grad)
}

fn check_gold(logits: &SpanLogits, gold: (usize, usize)) -> Result<()> {
    let n = logits.valid.len();
    for p in [gold.0, gold.1] {
        if p >= n || !logits.valid[p] {
            return Err(Error::Model(format!("gold position {p} is padding or out of range")));
        }
    }
    Ok(())
}

/// Mean of the start and end cross-entropies over non-pad positions.
pub fn qa_loss(logits: &SpanLogits, gold: (usize, usize)) -> Result<f64> {
    Ok(qa_loss_grad(logits, gold)?.0)
}

/// [`qa_loss`] with its gradients with respect to the start and end logits.
pub fn qa_loss_grad(logits: &SpanLogits, gold: (usize, usize)) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_gold(logits, gold)?;
    let (ls, mut gs) = masked_ce(&logits.start, &logits.valid, gold.0);
    let (le, mut ge) = masked_ce(&logits.end, &logits.valid, gold.1);
    gs.iter_mut().chain(ge.iter_mut()).for_each(|g| *g *= 0.5);
    Ok((0.5 * (ls + le), gs, ge))
}

/// `w_gold * -log softmax(logits)[gold]`.
pub fn classification_loss(logits: &ClassLogits, gold: CategoryLabel, weights: &ClassWeights) -> f64 {
    classification_loss_grad(logits, gold, weights).0
}

pub fn classification_loss_grad(
    logits: &ClassLogits,
    gold: CategoryLabel,
    weights: &ClassWeights,
) -> (f64, [f64; K]) {
    let w = weights.weight(gold);
    let (loss, grad) = masked_ce(&logits.0, &[true; K], gold.index());
    let mut g = [0.0; K];
    for (dst, src) in g.iter_mut().zip(grad) {
        *dst = w * src;
    }
    (w * loss, g)
}

/// Mean binary cross-entropy of sigmoid outputs against soft targets.
pub fn bce_loss(logits: &ClassLogits, targets: &[f64; K]) -> f64 {
    bce_loss_grad(logits, targets).0
}

pub fn bce_loss_grad(logits: &ClassLogits, targets: &[f64; K]) -> (f64, [f64; K]) {
    let mut loss = 0.0;
    let mut g = [0.0; K];
    for i in 0..K {
        let (z, t) = (logits.0[i], targets[i]);
        // -[t log s(z) + (1-t) log s(-z)] = max(z,0) - t z + log(1 + e^{-|z|})
        loss += z.max(0.0) - t * z + (-z.abs()).exp().ln_1p();
        g[i] = (sigmoid(z) - t) / K as f64;
    }
    (loss / K as f64, g)
}

/// `lambda_qa * l_qa + lambda_class * l_class`.
pub fn combined_loss(l_qa: f64, l_class: f64, lw: &LossWeights) -> f64 {
    lw.lambda_qa * l_qa + lw.lambda_class * l_class
}
