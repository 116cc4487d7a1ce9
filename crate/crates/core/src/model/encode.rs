use crate::datagen::{insert_delimiters, TokenSpan};
use crate::error::Result;
use crate::model::vocab::{tokenize, Vocab, CLS, SEP, TD};
use crate::model::ModelConfig;
use crate::span::{char_len, CharSpan};

/// Model input: `[CLS] question [SEP] context [SEP]`, with two delimiter
/// tokens around the marked span when one is given.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    /// 0 for the question segment (including CLS and the first SEP), 1 after.
    pub segments: Vec<u8>,
    /// Character span of each context token; `None` everywhere else.
    pub offsets: Vec<Option<CharSpan>>,
    pub answer_mask: Vec<bool>,
    /// Positions of the two delimiters, if a span was marked.
    pub delimiters: Option<(usize, usize)>,
    /// Context tokens dropped to fit `max_seq_len`.
    pub truncated_tokens: usize,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Smallest range of context positions covering `span`.
    pub fn token_span_for(&self, span: CharSpan) -> Option<TokenSpan> {
        let mut first = None;
        let mut last = None;
        for (p, off) in self.offsets.iter().enumerate() {
            if let Some(o) = off {
                if o.end > span.start && o.start < span.end {
                    first.get_or_insert(p);
                    last = Some(p);
                }
            }
        }
        Some(TokenSpan { start: first?, end: last? })
    }

    /// Character span covered by positions `start..=end`.
    pub fn char_span(&self, start: usize, end: usize) -> Option<CharSpan> {
        let s = self.offsets.get(start).copied().flatten()?;
        let e = self.offsets.get(end).copied().flatten()?;
        Some(CharSpan { start: s.start, end: e.end })
    }
}

pub fn encode(
    question: &str,
    context: &str,
    marked: Option<CharSpan>,
    vocab: &Vocab,
    config: &ModelConfig,
) -> Result<EncodedInput> {
    if let Some(m) = marked {
        m.check_within(char_len(context))?;
    }
    let mut q_toks = tokenize(question);
    q_toks.truncate(config.max_query_len);
    let c_toks = tokenize(context);
    let extra = if marked.is_some() { 2 } else { 0 };
    let budget = config.max_seq_len.saturating_sub(3 + q_toks.len() + extra);
    let kept = c_toks.len().min(budget);
    let truncated_tokens = c_toks.len() - kept;

    let mut ids = Vec::with_capacity(q_toks.len() + kept + 3 + extra);
    let mut offsets = Vec::with_capacity(ids.capacity());
    ids.push(CLS);
    offsets.push(None);
    for t in &q_toks {
        ids.push(vocab.id(&t.text));
        offsets.push(None);
    }
    ids.push(SEP);
    offsets.push(None);
    let ctx_start = ids.len();
    for t in &c_toks[..kept] {
        ids.push(vocab.id(&t.text));
        offsets.push(Some(t.span));
    }
    let ctx_end = ids.len();
    ids.push(SEP);
    offsets.push(None);
    let n_question = ctx_start;

    let mut delimiters = None;
    if let Some(m) = marked {
        let mut covering = c_toks[..kept]
            .iter()
            .enumerate()
            .filter(|(_, t)| t.span.end > m.start && t.span.start < m.end)
            .map(|(i, _)| i);
        let first = covering.clone().next();
        let last = covering.next_back();
        if let (Some(a), Some(b)) = (first, last) {
            let span = TokenSpan { start: ctx_start + a, end: ctx_start + b };
            ids = insert_delimiters(&ids, ctx_start..ctx_end, span, TD)?;
            offsets.insert(span.end + 1, None);
            offsets.insert(span.start, None);
            delimiters = Some((span.start, span.end + 2));
        }
    }

    let segments = (0..ids.len()).map(|p| u8::from(p >= n_question)).collect();
    let answer_mask = offsets.iter().map(Option::is_some).collect();
    Ok(EncodedInput { ids, segments, offsets, answer_mask, delimiters, truncated_tokens })
}
