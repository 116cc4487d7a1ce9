//! Span extraction model used for both the reader and the corrector. The
//! corrector is the same architecture fed inputs with a delimited span.

pub mod checkpoint;
pub mod decode;
pub mod encode;
pub mod train;
pub mod transformer;
pub mod vocab;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{par_map, Exec};
use crate::span::{locate, MrcExample, NBestList, Prediction};

pub use decode::{decode_nbest, ensemble_logits, top_spans, ScoredSpan};
pub use encode::{encode, EncodedInput};
pub use train::{train, TrainConfig, TrainReport, TrainingExample};
pub use transformer::{Params, SpanLogits};
pub use vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub dim: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub max_query_len: usize,
    pub max_answer_len: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 2,
            heads: 2,
            dim: 64,
            ff_dim: 128,
            max_seq_len: 256,
            max_query_len: 30,
            max_answer_len: 30,
            dropout: 0.1,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.layers, self.heads, self.dim, self.ff_dim, self.max_seq_len, self.max_answer_len];
        if dims.contains(&0) {
            return Err(Error::config("model dimensions must be positive"));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.max_seq_len < self.max_query_len + 6 {
            return Err(Error::config("max_seq_len too small for max_query_len"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params,
}

impl SpanModel {
    /// Freshly initialized model; parameters depend only on `config.seed`.
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Params::init(&config, vocab.len(), &mut rng);
        Ok(SpanModel { config, vocab, params })
    }

    pub fn encode(&self, question: &str, context: &str, marked: Option<crate::span::CharSpan>) -> Result<EncodedInput> {
        encode(question, context, marked, &self.vocab, &self.config)
    }

    /// Inference-mode logits.
    pub fn forward(&self, input: &EncodedInput) -> SpanLogits {
        transformer::forward::<ChaCha8Rng>(&self.params, &self.config, &input.ids, &input.segments, None).0
    }

    pub fn nbest(&self, example: &MrcExample, marked: Option<crate::span::CharSpan>, n: usize) -> Result<NBestList> {
        let input = self.encode(&example.question, &example.context, marked)?;
        let logits = self.forward(&input);
        decode_nbest(&logits, &input, &example.context, &example.id, n, self.config.max_answer_len)
    }

    /// Reader n-best lists for every example, in input order.
    pub fn predict_all(&self, examples: &[MrcExample], n: usize, exec: Exec) -> Result<Vec<NBestList>> {
        par_map(exec, examples, |ex| self.nbest(ex, None, n)).into_iter().collect()
    }
}

/// N-best lists from the averaged logits of several readers sharing a vocabulary.
pub fn ensemble_nbest(models: &[&SpanModel], example: &MrcExample, n: usize) -> Result<NBestList> {
    let first = models.first().ok_or_else(|| Error::config("empty ensemble"))?;
    let input = first.encode(&example.question, &example.context, None)?;
    let mut parts = Vec::with_capacity(models.len());
    for m in models {
        if m.vocab != first.vocab || m.config.max_seq_len != first.config.max_seq_len {
            return Err(Error::config("ensembled models must share vocabulary and input layout"));
        }
        parts.push(m.forward(&input));
    }
    let logits = ensemble_logits(&parts)?;
    decode_nbest(&logits, &input, &example.context, &example.id, n, first.config.max_answer_len)
}

/// Re-predicts an answer with the reader's span delimited in the context.
pub fn correct(reader_prediction: &Prediction, example: &MrcExample, corrector: &SpanModel) -> Result<Prediction> {
    let span = match reader_prediction.span {
        Some(s) => s,
        None => locate(&reader_prediction.text, &example.context, None)?,
    };
    corrector
        .nbest(example, Some(span), 1)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::data(format!("{}: corrector produced no valid span", example.id)))
}

/// Applies [`correct`] to every example that has a reader prediction.
pub fn correct_all(
    reader: &[(&MrcExample, &Prediction)],
    corrector: &SpanModel,
    exec: Exec,
) -> Result<Vec<Prediction>> {
    par_map(exec, reader, |(ex, p)| correct(p, ex, corrector)).into_iter().collect()
}
