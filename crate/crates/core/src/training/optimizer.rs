use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamGroup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Optimizer moments and the bookkeeping the training loop carries between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Optimizer steps taken so far.
    pub step: u64,
    /// First moments, one buffer per tensor in canonical order.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub best_val_loss: f64,
    pub epochs_without_improvement: usize,
    /// Seed from which all shuffling and dropout streams are derived.
    pub seed: u64,
}

impl TrainState {
    pub fn new(params: &ModelParams, seed: u64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        TrainState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            best_val_loss: f64::INFINITY,
            epochs_without_improvement: 0,
            seed,
        }
    }
}

/// One AdamW update with decoupled weight decay.
///
/// Tensors in `frozen` groups are left untouched (moments included). Biases
/// and layer-norm parameters are not decayed. Every gradient is checked
/// before anything is modified, so a failed step leaves `params` and `state`
/// as they were.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut TrainState,
    lr: f64,
    config: &AdamWConfig,
    frozen: &[ParamGroup],
) -> Result<()> {
    let grad_tensors = grads.tensors();
    if grad_tensors.len() != state.m.len() {
        return Err(Error::Model(format!(
            "{} gradient tensors for {} optimizer slots",
            grad_tensors.len(),
            state.m.len()
        )));
    }
    for g in &grad_tensors {
        if g.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(g.name.clone()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for (i, (p, g)) in params.tensors_mut().into_iter().zip(&grad_tensors).enumerate() {
        if p.data.len() != g.data.len() {
            return Err(Error::Model(format!("gradient shape mismatch for {}", p.name)));
        }
        if frozen.contains(&p.group) {
            continue;
        }
        let decay = if p.decay { config.weight_decay } else { 0.0 };
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.data.len() {
            let gj = g.data[j];
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p.data[j] -= lr * (m_hat / (v_hat.sqrt() + config.eps) + decay * p.data[j]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, EncoderConfig};

    fn setup() -> (ModelParams, TrainState) {
        let p = init_params(&EncoderConfig::tiny(10), 0).unwrap();
        let s = TrainState::new(&p, 0);
        (p, s)
    }

    #[test]
    fn zero_gradient_without_decay_is_a_fixed_point() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let g = p.zeros_like();
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        adamw_step(&mut p, &g, &mut s, 1e-3, &cfg, &[]).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.span_head.layers[0].bias.fill(1.0);
        let cfg = AdamWConfig::default();
        adamw_step(&mut p, &g, &mut s, 0.1, &cfg, &[]).unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps); biases are not decayed.
        let expected = 0.1 / (1.0 + 1e-8);
        let diff = &before.span_head.layers[0].bias - &p.span_head.layers[0].bias;
        assert!(diff.iter().all(|d| (d - expected).abs() < 1e-15));
    }

    #[test]
    fn decay_only_scales_weights() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let g = p.zeros_like();
        let cfg = AdamWConfig::default();
        adamw_step(&mut p, &g, &mut s, 0.5, &cfg, &[]).unwrap();
        let w0 = &before.shared[0].query.weight;
        let w1 = &p.shared[0].query.weight;
        for (a, b) in w0.iter().zip(w1) {
            assert!((a * (1.0 - 0.5 * 0.01) - b).abs() < 1e-15);
        }
        assert_eq!(before.shared[0].query.bias, p.shared[0].query.bias);
        assert_eq!(before.shared[0].attn_norm.gain, p.shared[0].attn_norm.gain);
    }

    #[test]
    fn frozen_groups_do_not_move() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.add_assign(&before);
        adamw_step(&mut p, &g, &mut s, 0.1, &AdamWConfig::default(), &ParamGroup::CLASS_ONLY).unwrap();
        assert_eq!(p.cls_branch, before.cls_branch);
        assert_eq!(p.class_head, before.class_head);
        assert_ne!(p.qa_branch, before.qa_branch);
    }

    #[test]
    fn non_finite_gradient_names_the_tensor() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.qa_branch[0].key.weight[[0, 0]] = f64::NAN;
        let err = adamw_step(&mut p, &g, &mut s, 0.1, &AdamWConfig::default(), &[]).unwrap_err();
        assert!(err.to_string().contains("qa_branch.0.key.weight"), "{err}");
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }
}
