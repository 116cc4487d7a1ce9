//! Character-interval spans, answer normalization and the EM / token-F1 metrics.
//!
//! All offsets count Unicode scalar values (`char`s), never bytes, so spans read
//! from or written to JSON files stay valid for non-ASCII contexts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open character interval `[start, end)` into a context string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidSpan { start, end });
        }
        Ok(CharSpan { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// Checks `end <= len` for a context of `len` characters.
    pub fn check_within(&self, len: usize) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::InvalidSpan { start: self.start, end: self.end });
        }
        if self.end > len {
            return Err(Error::SpanOutOfBounds { start: self.start, end: self.end, len });
        }
        Ok(())
    }

    pub fn shifted(&self, by: usize) -> CharSpan {
        CharSpan { start: self.start + by, end: self.end + by }
    }

    pub fn contains(&self, other: &CharSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersects(&self, other: &CharSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl std::fmt::Display for CharSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Number of characters in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring of `text` covering the character span. Panics never; returns an
/// error if the span does not fit.
pub fn char_slice(text: &str, span: CharSpan) -> Result<&str> {
    let mut start_byte = None;
    let mut end_byte = None;
    for (ci, (bi, _)) in text.char_indices().enumerate() {
        if ci == span.start {
            start_byte = Some(bi);
        }
        if ci == span.end {
            end_byte = Some(bi);
            break;
        }
    }
    let len = char_len(text);
    if span.end == len {
        end_byte = Some(text.len());
    }
    match (start_byte, end_byte) {
        (Some(s), Some(e)) if span.start < span.end => Ok(&text[s..e]),
        _ => Err(Error::SpanOutOfBounds { start: span.start, end: span.end, len }),
    }
}

/// One gold answer, possibly made of several non-contiguous pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    spans: Vec<(CharSpan, String)>,
}

impl Annotation {
    /// Builds an annotation from spans of `context`, reading each surface text
    /// from the context. Spans are sorted; overlapping spans are rejected.
    pub fn from_spans(mut spans: Vec<CharSpan>, context: &str) -> Result<Self> {
        if spans.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        spans.sort();
        for w in spans.windows(2) {
            if w[0].end > w[1].start {
                return Err(Error::Inconsistent(format!(
                    "annotation spans {} and {} overlap",
                    w[0], w[1]
                )));
            }
        }
        let len = char_len(context);
        let mut out = Vec::with_capacity(spans.len());
        for s in spans {
            s.check_within(len)?;
            out.push((s, char_slice(context, s)?.to_string()));
        }
        Ok(Annotation { spans: out })
    }

    pub fn single(span: CharSpan, context: &str) -> Result<Self> {
        Self::from_spans(vec![span], context)
    }

    pub fn spans(&self) -> &[(CharSpan, String)] {
        &self.spans
    }

    pub fn first_span(&self) -> CharSpan {
        self.spans[0].0
    }

    pub fn is_multi_span(&self) -> bool {
        self.spans.len() > 1
    }

    /// Surface text used for scoring: pieces joined with single spaces.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.spans.iter().map(|(_, t)| t.as_str()).collect();
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrcExample {
    pub id: String,
    pub question: String,
    pub context: String,
    pub ground_truths: Vec<Annotation>,
}

impl MrcExample {
    pub fn gt_texts(&self) -> Vec<String> {
        self.ground_truths.iter().map(Annotation::text).collect()
    }

    /// First annotation with exactly one span, if any.
    pub fn first_single_span(&self) -> Option<&Annotation> {
        self.ground_truths.iter().find(|a| !a.is_multi_span())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ground_truths.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let len = char_len(&self.context);
        for a in &self.ground_truths {
            for (s, t) in a.spans() {
                s.check_within(len)?;
                if char_slice(&self.context, *s)? != t {
                    return Err(Error::data(format!(
                        "{}: annotation text {:?} does not match context at {}",
                        self.id, t, s
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A decoded answer. `score` is additive on the logit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub text: String,
    pub span: Option<CharSpan>,
    pub score: f64,
}

impl Prediction {
    pub fn from_span(example_id: &str, context: &str, span: CharSpan, score: f64) -> Result<Self> {
        span.check_within(char_len(context))?;
        Ok(Prediction {
            example_id: example_id.to_string(),
            text: char_slice(context, span)?.to_string(),
            span: Some(span),
            score,
        })
    }
}

/// Ranked decoder output for one example, best first.
pub type NBestList = Vec<Prediction>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Drop standalone "a", "an", "the". English only.
    pub strip_articles: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { strip_articles: true }
    }
}

pub fn normalize_text(s: &str) -> String {
    normalize_text_with(s, NormalizeOptions::default())
}

pub fn normalize_text_with(s: &str, opts: NormalizeOptions) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let words = no_punct
        .split_whitespace()
        .filter(|w| !(opts.strip_articles && matches!(*w, "a" | "an" | "the")));
    words.collect::<Vec<_>>().join(" ")
}

/// 1 if the normalized prediction equals any normalized gold text.
pub fn exact_match<S: AsRef<str>>(pred_text: &str, gt_texts: &[S]) -> Result<u8> {
    exact_match_with(pred_text, gt_texts, NormalizeOptions::default())
}

pub fn exact_match_with<S: AsRef<str>>(
    pred_text: &str,
    gt_texts: &[S],
    opts: NormalizeOptions,
) -> Result<u8> {
    if gt_texts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let p = normalize_text_with(pred_text, opts);
    Ok(gt_texts.iter().any(|g| normalize_text_with(g.as_ref(), opts) == p) as u8)
}

pub fn token_f1(pred_text: &str, gt_text: &str) -> f64 {
    token_f1_with(pred_text, gt_text, NormalizeOptions::default())
}

pub fn token_f1_with(pred_text: &str, gt_text: &str, opts: NormalizeOptions) -> f64 {
    let pred = normalize_text_with(pred_text, opts);
    let gold = normalize_text_with(gt_text, opts);
    let pred_toks: Vec<&str> = pred.split_whitespace().collect();
    let gold_toks: Vec<&str> = gold.split_whitespace().collect();
    if pred_toks.is_empty() || gold_toks.is_empty() {
        return if pred_toks.is_empty() && gold_toks.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold_toks {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pred_toks {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_toks.len() as f64;
    let recall = overlap as f64 / gold_toks.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best token F1 over all annotations (multi-span texts joined by spaces).
pub fn f1_max(pred_text: &str, annotations: &[Annotation]) -> Result<f64> {
    if annotations.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(annotations
        .iter()
        .map(|a| token_f1(pred_text, &a.text()))
        .fold(0.0, f64::max))
}

/// Finds `text` in `context`. With several occurrences, picks the one whose
/// start is closest to the hint's start (earliest on ties), or the earliest
/// when no hint is given.
pub fn locate(text: &str, context: &str, hint: Option<CharSpan>) -> Result<CharSpan> {
    let needle: Vec<char> = text.chars().collect();
    if needle.is_empty() {
        return Err(Error::NotFound(text.to_string()));
    }
    let hay: Vec<char> = context.chars().collect();
    if needle.len() > hay.len() {
        return Err(Error::NotFound(text.to_string()));
    }
    let mut best: Option<(usize, usize)> = None;
    for start in 0..=hay.len() - needle.len() {
        if hay[start..start + needle.len()] != needle[..] {
            continue;
        }
        let dist = hint.map_or(start, |h| start.abs_diff(h.start));
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, start));
        }
    }
    match best {
        Some((_, start)) => Ok(CharSpan { start, end: start + needle.len() }),
        None => Err(Error::NotFound(text.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanRelation {
    Equal,
    AContainsB,
    BContainsA,
    Overlap,
    Disjoint,
}

pub fn relation(a: CharSpan, b: CharSpan) -> SpanRelation {
    if a == b {
        SpanRelation::Equal
    } else if a.contains(&b) {
        SpanRelation::AContainsB
    } else if b.contains(&a) {
        SpanRelation::BContainsA
    } else if a.intersects(&b) {
        SpanRelation::Overlap
    } else {
        SpanRelation::Disjoint
    }
}
