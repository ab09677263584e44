use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::EncoderConfig;
use crate::error::Result;

/// Which part of the network a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Embeddings,
    Shared,
    QaBranch,
    ClsBranch,
    SpanHead,
    ClassHead,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 6] = [
        ParamGroup::Embeddings,
        ParamGroup::Shared,
        ParamGroup::QaBranch,
        ParamGroup::ClsBranch,
        ParamGroup::SpanHead,
        ParamGroup::ClassHead,
    ];

    /// Groups that only the answer-span task uses.
    pub const QA_ONLY: [ParamGroup; 2] = [ParamGroup::QaBranch, ParamGroup::SpanHead];
    /// Groups that only the classification task uses.
    pub const CLASS_ONLY: [ParamGroup; 2] = [ParamGroup::ClsBranch, ParamGroup::ClassHead];
}

/// `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

impl LayerNorm {
    fn zeros(dim: usize) -> Self {
        LayerNorm {
            gain: Array1::zeros(dim),
            bias: Array1::zeros(dim),
        }
    }
}

/// Post-norm transformer layer: self-attention then a GELU feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub attn_norm: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub ff_norm: LayerNorm,
}

impl EncoderLayer {
    fn zeros(h: usize, ff: usize) -> Self {
        EncoderLayer {
            query: Linear::zeros(h, h),
            key: Linear::zeros(h, h),
            value: Linear::zeros(h, h),
            output: Linear::zeros(h, h),
            attn_norm: LayerNorm::zeros(h),
            ff_in: Linear::zeros(h, ff),
            ff_out: Linear::zeros(ff, h),
            ff_norm: LayerNorm::zeros(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub token: Array2<f64>,
    pub position: Array2<f64>,
    pub segment: Array2<f64>,
    pub norm: LayerNorm,
}

/// Fully connected stack with ReLU between layers (none after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    fn zeros(fan_in: usize, dims: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(dims.len());
        let mut prev = fan_in;
        for &d in dims {
            layers.push(Linear::zeros(prev, d));
            prev = d;
        }
        Mlp { layers }
    }
}

/// Every trainable tensor of the multi-task model.
///
/// The same type doubles as a gradient buffer (see [`ModelParams::zeros_like`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub embeddings: Embeddings,
    pub shared: Vec<EncoderLayer>,
    pub qa_branch: Vec<EncoderLayer>,
    pub cls_branch: Vec<EncoderLayer>,
    pub span_head: Mlp,
    pub class_head: Mlp,
}

/// Read-only view of one named tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub group: ParamGroup,
    pub shape: Vec<usize>,
    /// Weight decay applies (false for biases and layer-norm parameters).
    pub decay: bool,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub group: ParamGroup,
    pub shape: Vec<usize>,
    pub decay: bool,
    pub data: &'a mut [f64],
}

macro_rules! push_tensor {
    ($out:ident, $kind:ident, $as_slice:ident, $name:expr, $group:expr, $decay:expr, $arr:expr) => {{
        let shape = $arr.shape().to_vec();
        $out.push($kind {
            name: $name,
            group: $group,
            shape,
            decay: $decay,
            data: $arr.$as_slice().expect("parameters are contiguous"),
        });
    }};
}

macro_rules! collect_impl {
    ($fn_name:ident, $kind:ident, $as_slice:ident, $($mutability:tt)*) => {
        fn $fn_name<'a>(p: &'a $($mutability)* ModelParams) -> Vec<$kind<'a>> {
            let mut out = Vec::new();
            let e = &$($mutability)* p.embeddings;
            push_tensor!(out, $kind, $as_slice, "embeddings.token".into(), ParamGroup::Embeddings, true, e.token);
            push_tensor!(out, $kind, $as_slice, "embeddings.position".into(), ParamGroup::Embeddings, true, e.position);
            push_tensor!(out, $kind, $as_slice, "embeddings.segment".into(), ParamGroup::Embeddings, true, e.segment);
            push_tensor!(out, $kind, $as_slice, "embeddings.norm.gain".into(), ParamGroup::Embeddings, false, e.norm.gain);
            push_tensor!(out, $kind, $as_slice, "embeddings.norm.bias".into(), ParamGroup::Embeddings, false, e.norm.bias);
            let stacks = [
                ("shared", ParamGroup::Shared, & $($mutability)* p.shared),
                ("qa_branch", ParamGroup::QaBranch, & $($mutability)* p.qa_branch),
                ("cls_branch", ParamGroup::ClsBranch, & $($mutability)* p.cls_branch),
            ];
            for (prefix, group, layers) in stacks {
                for (i, l) in layers.into_iter().enumerate() {
                    let linears = [
                        ("query", & $($mutability)* l.query),
                        ("key", & $($mutability)* l.key),
                        ("value", & $($mutability)* l.value),
                        ("output", & $($mutability)* l.output),
                        ("ff_in", & $($mutability)* l.ff_in),
                        ("ff_out", & $($mutability)* l.ff_out),
                    ];
                    for (name, lin) in linears {
                        push_tensor!(out, $kind, $as_slice, format!("{prefix}.{i}.{name}.weight"), group, true, lin.weight);
                        push_tensor!(out, $kind, $as_slice, format!("{prefix}.{i}.{name}.bias"), group, false, lin.bias);
                    }
                    let norms = [
                        ("attn_norm", & $($mutability)* l.attn_norm),
                        ("ff_norm", & $($mutability)* l.ff_norm),
                    ];
                    for (name, ln) in norms {
                        push_tensor!(out, $kind, $as_slice, format!("{prefix}.{i}.{name}.gain"), group, false, ln.gain);
                        push_tensor!(out, $kind, $as_slice, format!("{prefix}.{i}.{name}.bias"), group, false, ln.bias);
                    }
                }
            }
            let heads = [
                ("span_head", ParamGroup::SpanHead, & $($mutability)* p.span_head),
                ("class_head", ParamGroup::ClassHead, & $($mutability)* p.class_head),
            ];
            for (prefix, group, mlp) in heads {
                for (i, lin) in (& $($mutability)* mlp.layers).into_iter().enumerate() {
                    push_tensor!(out, $kind, $as_slice, format!("{prefix}.{i}.weight"), group, true, lin.weight);
                    push_tensor!(out, $kind, $as_slice, format!("{prefix}.{i}.bias"), group, false, lin.bias);
                }
            }
            out
        }
    };
}

collect_impl!(collect_ref, TensorRef, as_slice,);
collect_impl!(collect_mut, TensorMut, as_slice_mut, mut);

impl ModelParams {
    /// All-zero parameters with the geometry of `config`.
    pub fn zeros(config: &EncoderConfig) -> Self {
        let h = config.hidden_dim;
        let ff = config.feedforward_dim;
        let layers = |n: usize| (0..n).map(|_| EncoderLayer::zeros(h, ff)).collect::<Vec<_>>();
        let mut span_dims = config.span_head_dims.clone();
        span_dims.push(2);
        ModelParams {
            config: config.clone(),
            embeddings: Embeddings {
                token: Array2::zeros((config.vocab_size, h)),
                position: Array2::zeros((config.max_seq_len, h)),
                segment: Array2::zeros((2, h)),
                norm: LayerNorm::zeros(h),
            },
            shared: layers(config.num_shared_layers),
            qa_branch: layers(config.num_task_layers),
            cls_branch: layers(config.num_task_layers),
            span_head: Mlp::zeros(h, &span_dims),
            class_head: Mlp::zeros(h, &config.class_head_dims),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(&self.config)
    }

    /// Tensors in canonical order (the order used by checkpoints and the optimizer).
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        collect_ref(self)
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        collect_mut(self)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += other`, tensor by tensor in canonical order.
    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t.data.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }
}

/// Scaled-uniform initialization, deterministic in `seed`.
///
/// Weights and biases of a linear map draw from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`;
/// embedding tables use `fan_in = hidden_dim`. Layer-norm gains start at 1,
/// biases at 0.
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut params = ModelParams::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.hidden_dim;
    for t in params.tensors_mut() {
        let is_norm = t.name.contains("norm.");
        if is_norm {
            let fill = if t.name.ends_with("gain") { 1.0 } else { 0.0 };
            t.data.iter_mut().for_each(|x| *x = fill);
            continue;
        }
        let fan_in = match (t.group, t.shape.len()) {
            (ParamGroup::Embeddings, _) => h,
            (_, 2) => t.shape[0],
            _ => bias_fan_in(config, &t.name),
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for x in t.data.iter_mut() {
            *x = dist.sample(&mut rng);
        }
    }
    Ok(params)
}

fn bias_fan_in(config: &EncoderConfig, name: &str) -> usize {
    let h = config.hidden_dim;
    if name.contains(".ff_out.") {
        return config.feedforward_dim;
    }
    let head_dims = |dims: &[usize], name: &str| {
        let idx: usize = name
            .split('.')
            .nth(1)
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        if idx == 0 {
            h
        } else {
            dims[idx - 1]
        }
    };
    if name.starts_with("span_head") {
        return head_dims(&config.span_head_dims, name);
    }
    if name.starts_with("class_head") {
        return head_dims(&config.class_head_dims, name);
    }
    h
}
