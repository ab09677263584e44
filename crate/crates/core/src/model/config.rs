use serde::{Deserialize, Serialize};

use crate::corpus::CategoryLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationMode {
    /// Single-label softmax trained with class-weighted cross-entropy.
    Softmax,
    /// Multi-label sigmoid trained with binary cross-entropy on soft labels.
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub num_shared_layers: usize,
    /// Layers in each task branch.
    pub num_task_layers: usize,
    pub feedforward_dim: usize,
    pub max_seq_len: usize,
    /// Hidden widths of the span head; a width-2 projection follows.
    pub span_head_dims: Vec<usize>,
    /// Widths of the classification head; the last must be 5.
    pub class_head_dims: Vec<usize>,
    pub classification_mode: ClassificationMode,
    pub dropout_rate: f64,
    #[serde(default = "default_ln_eps")]
    pub layer_norm_eps: f64,
}

fn default_ln_eps() -> f64 {
    1e-12
}

impl EncoderConfig {
    /// Laptop-sized model: 2 shared + 2 per-branch layers of width 64.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden_dim: 64,
            num_heads: 4,
            num_shared_layers: 2,
            num_task_layers: 2,
            feedforward_dim: 128,
            max_seq_len: 128,
            span_head_dims: vec![32, 16],
            class_head_dims: vec![32, 16, CategoryLabel::COUNT],
            classification_mode: ClassificationMode::Softmax,
            dropout_rate: 0.1,
            layer_norm_eps: default_ln_eps(),
        }
    }

    /// BERT-base geometry: 6 shared + 6 task-specific layers of width 768.
    /// Large; meant for shape and parameter-count checks.
    pub fn bert_base(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden_dim: 768,
            num_heads: 12,
            num_shared_layers: 6,
            num_task_layers: 6,
            feedforward_dim: 3072,
            max_seq_len: 512,
            span_head_dims: vec![512, 256],
            class_head_dims: vec![512, 256, CategoryLabel::COUNT],
            classification_mode: ClassificationMode::Softmax,
            dropout_rate: 0.1,
            layer_norm_eps: default_ln_eps(),
        }
    }

    /// Very small model for gradient checks: width 8, 2 shared + 1 + 1 layers.
    pub fn tiny(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden_dim: 8,
            num_heads: 2,
            num_shared_layers: 2,
            num_task_layers: 1,
            feedforward_dim: 16,
            max_seq_len: 8,
            span_head_dims: vec![6, 4],
            class_head_dims: vec![6, 4, CategoryLabel::COUNT],
            classification_mode: ClassificationMode::Softmax,
            dropout_rate: 0.0,
            layer_norm_eps: 1e-12,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.vocab_size,
            self.hidden_dim,
            self.num_heads,
            self.feedforward_dim,
            self.max_seq_len,
        ];
        if dims.contains(&0)
            || self.span_head_dims.contains(&0)
            || self.class_head_dims.contains(&0)
        {
            return Err(Error::Config("all model dimensions must be positive".into()));
        }
        if self.hidden_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} is not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.class_head_dims.last() != Some(&CategoryLabel::COUNT) {
            return Err(Error::Config(format!(
                "class head must end in width {}, got {:?}",
                CategoryLabel::COUNT,
                self.class_head_dims
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Total number of trainable scalars, computed from the geometry alone.
    pub fn parameter_count(&self) -> usize {
        let h = self.hidden_dim;
        let ff = self.feedforward_dim;
        let embeddings = (self.vocab_size + self.max_seq_len + 2) * h + 2 * h;
        let layer = 4 * (h * h + h) + (h * ff + ff) + (ff * h + h) + 4 * h;
        let mlp = |dims: &[usize]| {
            let mut n = 0;
            let mut fan_in = h;
            for &d in dims {
                n += fan_in * d + d;
                fan_in = d;
            }
            n
        };
        let mut span_dims = self.span_head_dims.clone();
        span_dims.push(2);
        embeddings
            + layer * (self.num_shared_layers + 2 * self.num_task_layers)
            + mlp(&span_dims)
            + mlp(&self.class_head_dims)
    }
}
