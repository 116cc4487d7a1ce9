use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::span::{CharSpan, MrcExample};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
/// Answer delimiter inserted around a marked span.
pub const TD: u32 = 4;

const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[Td]"];

/// A lowercased token and its character span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: CharSpan,
}

/// Splits on whitespace; runs of alphanumerics form one token, every other
/// character is a token by itself.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut cur_start = 0;
    let flush = |cur: &mut String, start: usize, end: usize, out: &mut Vec<Token>| {
        if !cur.is_empty() {
            out.push(Token { text: std::mem::take(cur), span: CharSpan { start, end } });
        }
    };
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            if cur.is_empty() {
                cur_start = i;
            }
            cur.extend(c.to_lowercase());
        } else {
            flush(&mut cur, cur_start, i, &mut out);
            if !c.is_whitespace() {
                out.push(Token { text: c.to_lowercase().collect(), span: CharSpan { start: i, end: i + 1 } });
            }
        }
    }
    flush(&mut cur, cur_start, n, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Counts question and context tokens; ids go by count desc, then token.
    pub fn build(corpus: &[MrcExample], min_count: usize) -> Vocab {
        Self::from_texts(corpus.iter().flat_map(|ex| [ex.question.as_str(), ex.context.as_str()]), min_count)
    }

    /// Same ordering rule as [`Vocab::build`] over arbitrary texts.
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I, min_count: usize) -> Vocab {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for t in tokenize(text) {
                *counts.entry(t.text).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(entries.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocab { tokens, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        match self.index.get(token) {
            Some(&i) if i as usize >= SPECIALS.len() => i,
            _ => UNK,
        }
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
