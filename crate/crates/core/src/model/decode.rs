use super::encoder::SpanLogits;
use crate::error::{Error, Result};

/// Best answer span `(start, end)` in token positions.
///
/// Maximizes `start[s] + end[e]` over `s <= e`, `e - s < max_answer_len`,
/// with both ends on real context tokens. Ties go to the smaller `s`, then
/// the smaller `e`.
pub fn decode_span(logits: &SpanLogits, max_answer_len: usize) -> Result<(usize, usize)> {
    if max_answer_len == 0 {
        return Err(Error::Model("max_answer_len must be positive".into()));
    }
    let n = logits.start.len();
    if logits.end.len() != n || logits.valid.len() != n || logits.context.len() != n {
        return Err(Error::Model("span logit vectors differ in length".into()));
    }
    let ok = |i: usize| logits.valid[i] && logits.context[i];
    let mut best: Option<(f64, usize, usize)> = None;
    for s in (0..n).filter(|&s| ok(s)) {
        let last = (s + max_answer_len).min(n);
        for e in (s..last).filter(|&e| ok(e)) {
            let score = logits.start[s] + logits.end[e];
            if best.map_or(true, |(b, _, _)| score > b) {
                best = Some((score, s, e));
            }
        }
    }
    best.map(|(_, s, e)| (s, e))
        .ok_or_else(|| Error::Model("no valid context position to decode".into()))
}
