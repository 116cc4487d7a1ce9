use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::encode::EncodedInput;
use crate::model::transformer::{backward, forward, span_loss, Params};
use crate::model::SpanModel;
use crate::parallel::{par_map, Exec};
use crate::span::CharSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of all steps spent in linear warmup; the rest decays linearly to 0.
    pub warmup: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; 0 disables clipping.
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            batch_size: 32,
            learning_rate: 0.1,
            warmup: 0.1,
            seed: 0,
            optimizer: Optimizer::Sgd,
            max_grad_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.warmup) {
            return Err(Error::config("warmup fraction must be in [0, 1]"));
        }
        Ok(())
    }

    /// Learning rate at `step` (0-based) of `total`.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        let warm = (self.warmup * total as f64).ceil() as usize;
        if step < warm {
            self.learning_rate * (step + 1) as f64 / warm as f64
        } else {
            let rest = (total - warm).max(1) as f64;
            self.learning_rate * ((total - step) as f64 / rest).max(0.0)
        }
    }
}

/// An encoded input with its gold start / end positions.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub input: EncodedInput,
    pub start: usize,
    pub end: usize,
}

impl TrainingExample {
    /// Encodes and aligns `target` to token positions. `None` if the target
    /// does not land on valid answer positions (e.g. truncated away).
    pub fn new(
        model: &SpanModel,
        question: &str,
        context: &str,
        marked: Option<CharSpan>,
        target: CharSpan,
    ) -> Result<Option<Self>> {
        let input = model.encode(question, context, marked)?;
        let Some(ts) = input.token_span_for(target) else {
            return Ok(None);
        };
        let ok = input.answer_mask[ts.start]
            && input.answer_mask[ts.end]
            && ts.end - ts.start < model.config.max_answer_len
            && input.offsets[ts.end].is_some_and(|o| o.end >= target.end);
        Ok(ok.then_some(TrainingExample { input, start: ts.start, end: ts.end }))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    /// Mean batch loss at every step.
    pub losses: Vec<f64>,
}

/// Loss and parameter gradient for one example.
pub fn example_gradient(
    model: &SpanModel,
    ex: &TrainingExample,
    dropout_seed: Option<u64>,
) -> (f64, Params) {
    let cfg = &model.config;
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let drop = rng.as_mut().map(|r| (r, cfg.dropout));
    let (logits, cache) = forward(&model.params, cfg, &ex.input.ids, &ex.input.segments, drop);
    let (loss, ds, de) = span_loss(&logits, &ex.input.answer_mask, ex.start, ex.end);
    let mut grads = model.params.zeros_like();
    backward(&model.params, cfg, &cache, &ds, &de, &mut grads);
    (loss, grads)
}

/// Inference-mode loss, used by the finite-difference check.
pub fn example_loss(model: &SpanModel, ex: &TrainingExample) -> f64 {
    let logits = model.forward(&ex.input);
    span_loss(&logits, &ex.input.answer_mask, ex.start, ex.end).0
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the packed inputs
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

/// Trains `model` in place. Batch composition and dropout masks are pure
/// functions of `(seed, epoch, step)`; per-example gradients are summed in
/// batch order, so results do not depend on `exec`.
pub fn train(model: &mut SpanModel, data: &[TrainingExample], cfg: &TrainConfig, exec: Exec) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("no training examples"));
    }
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let mut report = TrainReport::default();
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(AdamState {
            m: model.params.named_slices().iter().map(|(_, s)| vec![0.0; s.len()]).collect(),
            v: model.params.named_slices().iter().map(|(_, s)| vec![0.0; s.len()]).collect(),
            t: 0,
        }),
        Optimizer::Sgd => None,
    };
    let dropout_on = model.config.dropout > 0.0;

    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64, 0)));
        for batch in order.chunks(cfg.batch_size) {
            let seeds: Vec<(usize, Option<u64>)> = batch
                .iter()
                .enumerate()
                .map(|(j, &i)| (i, dropout_on.then(|| mix(cfg.seed, step as u64 + 1, j as u64 + 1))))
                .collect();
            let model_ref: &SpanModel = model;
            let results = par_map(exec, &seeds, |&(i, ds)| example_gradient(model_ref, &data[i], ds));
            let mut grads = model.params.zeros_like();
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                grads.add_assign(g);
            }
            drop(results);
            let n = batch.len() as f64;
            grads.scale(1.0 / n);
            if cfg.max_grad_norm > 0.0 {
                let norm = grads.sq_norm().sqrt();
                if norm > cfg.max_grad_norm {
                    grads.scale(cfg.max_grad_norm / norm);
                }
            }
            let lr = cfg.lr_at(step, total);
            let gslices = grads.named_slices();
            match adam.as_mut() {
                None => {
                    for (p, (_, g)) in model.params.slices_mut().into_iter().zip(gslices) {
                        for (pv, gv) in p.iter_mut().zip(g) {
                            *pv -= lr * gv;
                        }
                    }
                }
                Some(st) => {
                    st.t += 1;
                    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                    let c1 = 1.0 - b1.powi(st.t);
                    let c2 = 1.0 - b2.powi(st.t);
                    for (((p, (_, g)), m), v) in model
                        .params
                        .slices_mut()
                        .into_iter()
                        .zip(gslices)
                        .zip(st.m.iter_mut())
                        .zip(st.v.iter_mut())
                    {
                        for i in 0..p.len() {
                            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                            p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                        }
                    }
                }
            }
            report.losses.push(loss / n);
            step += 1;
        }
    }
    report.steps = step;
    Ok(report)
}
