use crate::error::{Error, Result};
use crate::model::encode::EncodedInput;
use crate::model::transformer::SpanLogits;
use crate::span::{Prediction, NBestList};

/// A scored token span `(start, end)`, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSpan {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Top `n` spans with both ends in `mask` and at most `max_answer_len`
/// tokens, scored by `start[s] + end[e]`. Ties go to the earlier start, then
/// the shorter span.
pub fn top_spans(logits: &SpanLogits, mask: &[bool], n: usize, max_answer_len: usize) -> Vec<ScoredSpan> {
    let len = logits.len().min(mask.len());
    let mut cands = Vec::new();
    for s in (0..len).filter(|&s| mask[s]) {
        let last = (s + max_answer_len).min(len);
        for e in (s..last).filter(|&e| mask[e]) {
            cands.push(ScoredSpan { start: s, end: e, score: logits.start[s] + logits.end[e] });
        }
    }
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.start.cmp(&b.start))
            .then((a.end - a.start).cmp(&(b.end - b.start)))
    });
    cands.truncate(n);
    cands
}

/// Decodes an n-best list of predictions with text and character offsets.
pub fn decode_nbest(
    logits: &SpanLogits,
    input: &EncodedInput,
    context: &str,
    example_id: &str,
    n: usize,
    max_answer_len: usize,
) -> Result<NBestList> {
    if n == 0 {
        return Err(Error::config("n-best size must be >= 1"));
    }
    top_spans(logits, &input.answer_mask, n, max_answer_len)
        .into_iter()
        .map(|c| {
            let span = input
                .char_span(c.start, c.end)
                .ok_or_else(|| Error::Inconsistent("decoded span outside context".into()))?;
            Prediction::from_span(example_id, context, span, c.score)
        })
        .collect()
}

/// Elementwise mean of several logit sets over the same input.
pub fn ensemble_logits(parts: &[SpanLogits]) -> Result<SpanLogits> {
    let first = parts.first().ok_or_else(|| Error::config("cannot ensemble zero models"))?;
    let len = first.len();
    for p in parts {
        if p.start.len() != len || p.end.len() != len {
            return Err(Error::LengthMismatch { left: len, right: p.start.len().max(p.end.len()) });
        }
    }
    let k = parts.len() as f64;
    let mean = |pick: fn(&SpanLogits) -> &Vec<f64>| -> Vec<f64> {
        (0..len).map(|i| parts.iter().map(|p| pick(p)[i]).sum::<f64>() / k).collect()
    };
    Ok(SpanLogits { start: mean(|p| &p.start), end: mean(|p| &p.end) })
}
