//! Shared encoder with two task branches, and its backward pass.
//!
//! Only attended positions are computed: the input is gathered down to its
//! real tokens (keeping their original position ids), run through the
//! stacks, and scattered back with zero rows at padding. Attention therefore
//! never sees padding, and padding content cannot influence real positions.

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::layers::{
    apply_mask, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward,
    mlp_backward, mlp_forward, softmax_rows, softmax_rows_backward, Dropout, MlpCache, NormCache,
};
use super::params::{EncoderLayer, ModelParams};
use crate::corpus::CategoryLabel;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizedPair;

/// Sentinel for masked logits: the most negative finite `f64`.
pub const MASKED_LOGIT: f64 = f64::MIN;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// Output of the shared stack, `seq x hidden`.
    pub shared: Array2<f64>,
    /// Output of the answer-span branch.
    pub qa: Array2<f64>,
    /// Output of the classification branch.
    pub cls: Array2<f64>,
    /// Classification feature: the classification branch at position 0.
    pub pooled: Array1<f64>,
    pub attention_mask: Vec<u8>,
    pub context_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanLogits {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// Non-pad positions.
    pub valid: Vec<bool>,
    /// Positions that may start or end an answer.
    pub context: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassLogits(pub [f64; CategoryLabel::COUNT]);

impl ClassLogits {
    pub fn softmax(&self) -> [f64; CategoryLabel::COUNT] {
        let max = self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p = self.0.map(|z| (z - max).exp());
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= sum);
        p
    }

    pub fn sigmoid(&self) -> [f64; CategoryLabel::COUNT] {
        self.0.map(sigmoid)
    }

    /// Highest logit, ties to the earlier category.
    pub fn argmax(&self) -> CategoryLabel {
        let mut best = 0;
        for i in 1..CategoryLabel::COUNT {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        CategoryLabel::from_index(best).expect("index below COUNT")
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct LayerTrace {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    attn_norm: NormCache,
    h1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    ff_norm: NormCache,
}

fn layer_forward(
    layer: &EncoderLayer,
    x: Array2<f64>,
    num_heads: usize,
    eps: f64,
    dropout: &mut Option<Dropout>,
) -> (Array2<f64>, LayerTrace) {
    let (len, hidden) = x.dim();
    let dh = hidden / num_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(&x, &layer.query);
    let k = linear(&x, &layer.key);
    let v = linear(&x, &layer.value);
    let mut context = Array2::zeros((len, hidden));
    let mut probs = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut scores);
        context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    let attn = linear(&context, &layer.output);
    let attn_mask = dropout.as_mut().and_then(|d| d.mask(len, hidden));
    let attn = apply_mask(attn, &attn_mask);
    let (h1, attn_norm) = layer_norm(&(&x + &attn), &layer.attn_norm, eps);

    let ff_pre = linear(&h1, &layer.ff_in);
    let ff_act = gelu(&ff_pre);
    let ff = linear(&ff_act, &layer.ff_out);
    let ff_mask = dropout.as_mut().and_then(|d| d.mask(len, hidden));
    let ff = apply_mask(ff, &ff_mask);
    let (out, ff_norm) = layer_norm(&(&h1 + &ff), &layer.ff_norm, eps);

    let trace = LayerTrace {
        input: x,
        q,
        k,
        v,
        probs,
        context,
        attn_mask,
        attn_norm,
        h1,
        ff_pre,
        ff_act,
        ff_mask,
        ff_norm,
    };
    (out, trace)
}

fn layer_backward(
    layer: &EncoderLayer,
    t: &LayerTrace,
    dout: &Array2<f64>,
    num_heads: usize,
    g: &mut EncoderLayer,
) -> Array2<f64> {
    let hidden = dout.ncols();
    let dh = hidden / num_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let dr2 = layer_norm_backward(&t.ff_norm, dout, &layer.ff_norm, &mut g.ff_norm);
    let dff = apply_mask(dr2.clone(), &t.ff_mask);
    let dff_act = linear_backward(&t.ff_act, &dff, &layer.ff_out, &mut g.ff_out);
    let dff_pre = dff_act * gelu_grad(&t.ff_pre);
    let dh1 = dr2 + linear_backward(&t.h1, &dff_pre, &layer.ff_in, &mut g.ff_in);

    let dr1 = layer_norm_backward(&t.attn_norm, &dh1, &layer.attn_norm, &mut g.attn_norm);
    let dattn = apply_mask(dr1.clone(), &t.attn_mask);
    let dcontext = linear_backward(&t.context, &dattn, &layer.output, &mut g.output);

    let mut dq = Array2::zeros(t.q.dim());
    let mut dk = Array2::zeros(t.k.dim());
    let mut dv = Array2::zeros(t.v.dim());
    for h in 0..num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let p = &t.probs[h];
        let dctx = dcontext.slice(cols);
        let dp = dctx.dot(&t.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&dctx));
        let ds = softmax_rows_backward(p, &dp) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&t.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&t.q.slice(cols)));
    }
    let mut dx = dr1;
    dx += &linear_backward(&t.input, &dq, &layer.query, &mut g.query);
    dx += &linear_backward(&t.input, &dk, &layer.key, &mut g.key);
    dx += &linear_backward(&t.input, &dv, &layer.value, &mut g.value);
    dx
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Trace {
    positions: Vec<usize>,
    token_ids: Vec<usize>,
    segment_ids: Vec<usize>,
    emb_norm: NormCache,
    emb_mask: Option<Array2<f64>>,
    shared: Vec<LayerTrace>,
    qa: Vec<LayerTrace>,
    cls: Vec<LayerTrace>,
    span_mlp: MlpCache,
    class_mlp: MlpCache,
    /// Row of the `[CLS]` position inside the compact matrices.
    pooled_row: Option<usize>,
}

pub(crate) struct ForwardResult {
    pub output: EncoderOutput,
    pub span: SpanLogits,
    pub class: ClassLogits,
    pub trace: Trace,
}

fn check_input(params: &ModelParams, pair: &TokenizedPair) -> Result<()> {
    let cfg = &params.config;
    if pair.len() != cfg.max_seq_len {
        return Err(Error::Model(format!(
            "input length {} does not match max_seq_len {}",
            pair.len(),
            cfg.max_seq_len
        )));
    }
    if let Some(&bad) = pair.input_ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(Error::Model(format!(
            "token id {bad} out of range for vocabulary of {}",
            cfg.vocab_size
        )));
    }
    if pair.segment_ids.iter().any(|&s| s > 1) {
        return Err(Error::Model("segment ids must be 0 or 1".into()));
    }
    Ok(())
}

fn scatter(compact: &Array2<f64>, positions: &[usize], seq: usize) -> Array2<f64> {
    let mut full = Array2::zeros((seq, compact.ncols()));
    for (row, &p) in positions.iter().enumerate() {
        full.row_mut(p).assign(&compact.row(row));
    }
    full
}

/// Full forward pass: encoder, both heads, and the trace for backward.
pub(crate) fn forward(
    params: &ModelParams,
    pair: &TokenizedPair,
    mut dropout: Option<Dropout>,
) -> Result<ForwardResult> {
    check_input(params, pair)?;
    let cfg = &params.config;
    let seq = cfg.max_seq_len;
    let hidden = cfg.hidden_dim;
    let eps = cfg.layer_norm_eps;
    let emb = &params.embeddings;

    let positions: Vec<usize> = (0..seq).filter(|&i| pair.attention_mask[i] == 1).collect();
    let token_ids: Vec<usize> = positions.iter().map(|&i| pair.input_ids[i] as usize).collect();
    let segment_ids: Vec<usize> = positions.iter().map(|&i| pair.segment_ids[i] as usize).collect();
    let len = positions.len();

    let mut x = Array2::zeros((len, hidden));
    for (row, &p) in positions.iter().enumerate() {
        let mut r = x.row_mut(row);
        r += &emb.token.row(token_ids[row]);
        r += &emb.position.row(p);
        r += &emb.segment.row(segment_ids[row]);
    }
    let (x, emb_norm) = layer_norm(&x, &emb.norm, eps);
    let emb_mask = dropout.as_mut().and_then(|d| d.mask(len, hidden));
    let mut h = apply_mask(x, &emb_mask);

    let mut run_stack = |layers: &[EncoderLayer], mut h: Array2<f64>| {
        let mut traces = Vec::with_capacity(layers.len());
        for layer in layers {
            let (out, t) = layer_forward(layer, h, cfg.num_heads, eps, &mut dropout);
            traces.push(t);
            h = out;
        }
        (h, traces)
    };
    let shared_traces;
    (h, shared_traces) = run_stack(&params.shared, h);
    let h_shared = h;
    let (h_qa, qa_traces) = run_stack(&params.qa_branch, h_shared.clone());
    let (h_cls, cls_traces) = run_stack(&params.cls_branch, h_shared.clone());

    let (span_out, span_mlp) = mlp_forward(&params.span_head, h_qa.clone());
    let pooled_row = positions.iter().position(|&p| p == 0);
    let pooled = match pooled_row {
        Some(r) => h_cls.row(r).to_owned(),
        None => Array1::zeros(hidden),
    };
    let (class_out, class_mlp) = mlp_forward(&params.class_head, pooled.clone().insert_axis(Axis(0)));

    let context_mask = pair.context_mask();
    let mut start = vec![MASKED_LOGIT; seq];
    let mut end = vec![MASKED_LOGIT; seq];
    for (row, &p) in positions.iter().enumerate() {
        start[p] = span_out[[row, 0]];
        end[p] = span_out[[row, 1]];
    }
    let mut class = [0.0; CategoryLabel::COUNT];
    class.copy_from_slice(class_out.row(0).as_slice().expect("contiguous row"));

    let output = EncoderOutput {
        shared: scatter(&h_shared, &positions, seq),
        qa: scatter(&h_qa, &positions, seq),
        cls: scatter(&h_cls, &positions, seq),
        pooled,
        attention_mask: pair.attention_mask.clone(),
        context_mask: context_mask.clone(),
    };
    let span = SpanLogits {
        start,
        end,
        valid: pair.attention_mask.iter().map(|&m| m == 1).collect(),
        context: context_mask,
    };
    Ok(ForwardResult {
        output,
        span,
        class: ClassLogits(class),
        trace: Trace {
            positions,
            token_ids,
            segment_ids,
            emb_norm,
            emb_mask,
            shared: shared_traces,
            qa: qa_traces,
            cls: cls_traces,
            span_mlp,
            class_mlp,
            pooled_row,
        },
    })
}

/// Gradients of a loss with respect to every parameter, given the loss
/// gradients at the logits.
///
/// `d_start`/`d_end` are indexed by sequence position. A task whose logit
/// gradient is `None` is skipped entirely, so its branch and head receive
/// exactly zero gradient.
pub(crate) fn backward(
    params: &ModelParams,
    trace: &Trace,
    span_grad: Option<(&[f64], &[f64])>,
    class_grad: Option<&[f64; CategoryLabel::COUNT]>,
) -> ModelParams {
    let cfg = &params.config;
    let heads = cfg.num_heads;
    let len = trace.positions.len();
    let hidden = cfg.hidden_dim;
    let mut g = params.zeros_like();
    let mut d_shared = Array2::<f64>::zeros((len, hidden));

    if let Some((d_start, d_end)) = span_grad {
        let mut dlogits = Array2::zeros((len, 2));
        for (row, &p) in trace.positions.iter().enumerate() {
            dlogits[[row, 0]] = d_start[p];
            dlogits[[row, 1]] = d_end[p];
        }
        let mut d = mlp_backward(&params.span_head, &trace.span_mlp, dlogits, &mut g.span_head);
        for i in (0..params.qa_branch.len()).rev() {
            d = layer_backward(&params.qa_branch[i], &trace.qa[i], &d, heads, &mut g.qa_branch[i]);
        }
        d_shared += &d;
    }

    if let (Some(dc), Some(row)) = (class_grad, trace.pooled_row) {
        let dlogits = Array2::from_shape_vec((1, CategoryLabel::COUNT), dc.to_vec())
            .expect("shape matches");
        let dpooled = mlp_backward(&params.class_head, &trace.class_mlp, dlogits, &mut g.class_head);
        let mut d = Array2::zeros((len, hidden));
        d.row_mut(row).assign(&dpooled.row(0));
        for i in (0..params.cls_branch.len()).rev() {
            d = layer_backward(&params.cls_branch[i], &trace.cls[i], &d, heads, &mut g.cls_branch[i]);
        }
        d_shared += &d;
    }

    let mut d = d_shared;
    for i in (0..params.shared.len()).rev() {
        d = layer_backward(&params.shared[i], &trace.shared[i], &d, heads, &mut g.shared[i]);
    }
    let d = apply_mask(d, &trace.emb_mask);
    let dx = layer_norm_backward(&trace.emb_norm, &d, &params.embeddings.norm, &mut g.embeddings.norm);
    for (row, &p) in trace.positions.iter().enumerate() {
        let r = dx.row(row);
        let mut t = g.embeddings.token.row_mut(trace.token_ids[row]);
        t += &r;
        let mut pos = g.embeddings.position.row_mut(p);
        pos += &r;
        let mut seg = g.embeddings.segment.row_mut(trace.segment_ids[row]);
        seg += &r;
    }
    g
}

/// Runs the embedding layer, the shared stack and both branches (no dropout).
pub fn forward_encoder(params: &ModelParams, pair: &TokenizedPair) -> Result<EncoderOutput> {
    Ok(forward(params, pair, None)?.output)
}

/// Start/end logits from the answer-span branch; padding gets [`MASKED_LOGIT`].
pub fn span_head(params: &ModelParams, out: &EncoderOutput) -> SpanLogits {
    let positions: Vec<usize> = (0..out.attention_mask.len())
        .filter(|&i| out.attention_mask[i] == 1)
        .collect();
    let compact = out.qa.select(Axis(0), &positions);
    let (logits, _) = mlp_forward(&params.span_head, compact);
    let seq = out.attention_mask.len();
    let mut start = vec![MASKED_LOGIT; seq];
    let mut end = vec![MASKED_LOGIT; seq];
    for (row, &p) in positions.iter().enumerate() {
        start[p] = logits[[row, 0]];
        end[p] = logits[[row, 1]];
    }
    SpanLogits {
        start,
        end,
        valid: out.attention_mask.iter().map(|&m| m == 1).collect(),
        context: out.context_mask.clone(),
    }
}

/// Raw category logits from the pooled classification feature.
pub fn class_head(params: &ModelParams, out: &EncoderOutput) -> ClassLogits {
    let (logits, _) = mlp_forward(&params.class_head, out.pooled.clone().insert_axis(Axis(0)));
    let mut z = [0.0; CategoryLabel::COUNT];
    z.copy_from_slice(logits.row(0).as_slice().expect("contiguous row"));
    ClassLogits(z)
}
