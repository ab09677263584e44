//! The multi-task network: embeddings, a shared transformer stack, two
//! parameter-disjoint task branches, a span head and a classification head.

mod checkpoint;
mod config;
mod decode;
mod encoder;
mod layers;
mod params;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{ClassificationMode, EncoderConfig};
pub use decode::decode_span;
pub use encoder::{
    class_head, forward_encoder, sigmoid, span_head, ClassLogits, EncoderOutput, SpanLogits,
    MASKED_LOGIT,
};
pub use params::{
    init_params, Embeddings, EncoderLayer, LayerNorm, Linear, Mlp, ModelParams, ParamGroup,
    TensorMut, TensorRef,
};

pub(crate) use encoder::{backward, forward};
pub(crate) use layers::Dropout;
