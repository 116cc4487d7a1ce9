//! Reader and corrector training on datasets, k-fold n-best generation and
//! EM/F1 evaluation.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::datagen::{make_fold_plan, CorrectorRecord};
use crate::error::{Error, Result};
use crate::io::{NBestMap, PredictionMap};
use crate::model::{correct, train, ModelConfig, SpanModel, TrainConfig, TrainReport, TrainingExample, Vocab};
use crate::parallel::{par_map, par_map_range, Exec};
use crate::span::{exact_match, f1_max, CharSpan, MrcExample};

/// Span the reader is trained to extract: the first single-span annotation,
/// or the stretch enclosing every piece of a multi-span one.
pub fn reader_target(ex: &MrcExample) -> Option<CharSpan> {
    if let Some(a) = ex.first_single_span() {
        return Some(a.first_span());
    }
    let a = ex.ground_truths.first()?;
    let spans = a.spans();
    Some(CharSpan { start: spans[0].0.start, end: spans[spans.len() - 1].0.end })
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SpanModel,
    pub report: TrainReport,
    /// Examples whose target could not be aligned to answer positions.
    pub rejected: usize,
}

fn fit(mut model: SpanModel, data: Vec<Option<TrainingExample>>, train_cfg: &TrainConfig, exec: Exec) -> Result<Trained> {
    let total = data.len();
    let data: Vec<TrainingExample> = data.into_iter().flatten().collect();
    let rejected = total - data.len();
    let report = train(&mut model, &data, train_cfg, exec)?;
    Ok(Trained { model, report, rejected })
}

pub fn train_reader(
    examples: &[MrcExample],
    vocab: Vocab,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    exec: Exec,
) -> Result<Trained> {
    let model = SpanModel::new(model_cfg.clone(), vocab)?;
    let data = par_map(exec, examples, |ex| match reader_target(ex) {
        Some(t) => TrainingExample::new(&model, &ex.question, &ex.context, None, t),
        None => Ok(None),
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    fit(model, data, train_cfg, exec)
}

pub fn reader_nbest(model: &SpanModel, examples: &[MrcExample], n: usize, exec: Exec) -> Result<NBestMap> {
    let lists = model.predict_all(examples, n, exec)?;
    Ok(examples.iter().map(|e| e.id.clone()).zip(lists).collect())
}

pub fn top1(nbest: &NBestMap) -> PredictionMap {
    nbest
        .iter()
        .filter_map(|(k, l)| l.first().map(|p| (k.clone(), p.clone())))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KFoldSummary {
    pub folds: usize,
    pub rejected: usize,
    pub final_losses: Vec<f64>,
}

/// Trains one reader per fold on the other folds and predicts n-best lists on
/// its holdout, so every example gets exactly one out-of-fold list. Fold `f`
/// uses model seed `seed + f`; the vocabulary is shared across folds.
pub fn kfold_nbest(
    examples: &[MrcExample],
    n_folds: usize,
    fold_seed: u64,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    n: usize,
    exec: Exec,
) -> Result<(NBestMap, KFoldSummary)> {
    let ids: Vec<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    let plan = make_fold_plan(&ids, n_folds, fold_seed)?;
    let vocab = Vocab::build(examples, 1);
    let runs = par_map_range(exec, n_folds, |f| -> Result<(NBestMap, usize, f64)> {
        let holdout: HashSet<&str> = plan.holdout(f).iter().map(String::as_str).collect();
        let (test, train_set): (Vec<MrcExample>, Vec<MrcExample>) =
            examples.iter().cloned().partition(|e| holdout.contains(e.id.as_str()));
        let cfg = ModelConfig { seed: model_cfg.seed.wrapping_add(f as u64), ..model_cfg.clone() };
        let tr = TrainConfig { seed: train_cfg.seed.wrapping_add(f as u64), ..train_cfg.clone() };
        let trained = train_reader(&train_set, vocab.clone(), &cfg, &tr, exec)?;
        let lists = reader_nbest(&trained.model, &test, n, exec)?;
        Ok((lists, trained.rejected, trained.report.losses.last().copied().unwrap_or(f64::NAN)))
    });
    let mut all = NBestMap::new();
    let mut summary = KFoldSummary { folds: n_folds, ..Default::default() };
    for r in runs {
        let (lists, rejected, loss) = r?;
        summary.rejected += rejected;
        summary.final_losses.push(loss);
        all.extend(lists);
    }
    if all.len() != examples.len() {
        return Err(Error::Inconsistent(format!("k-fold produced {} lists for {} examples", all.len(), examples.len())));
    }
    Ok((all, summary))
}

/// Vocabulary over the distinct questions and contexts of a record set.
pub fn corrector_vocab(records: &[CorrectorRecord]) -> Vocab {
    let mut seen = HashSet::new();
    let texts = records
        .iter()
        .filter(|r| seen.insert(r.source_id.as_str()))
        .flat_map(|r| [r.question.as_str(), r.context.as_str()]);
    Vocab::from_texts(texts, 1)
}

pub fn train_corrector(
    records: &[CorrectorRecord],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    exec: Exec,
) -> Result<Trained> {
    let model = SpanModel::new(model_cfg.clone(), corrector_vocab(records))?;
    let data = par_map(exec, records, |r| -> Result<Option<TrainingExample>> {
        TrainingExample::new(&model, &r.question, &r.context, Some(r.marked()?), r.target()?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    fit(model, data, train_cfg, exec)
}

/// Corrector output for every reader prediction. Examples without a reader
/// prediction are a data error.
pub fn correct_map(
    examples: &[MrcExample],
    reader: &PredictionMap,
    corrector: &SpanModel,
    exec: Exec,
) -> Result<PredictionMap> {
    let by_id: BTreeMap<&str, &MrcExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let pairs: Vec<(&MrcExample, &crate::span::Prediction)> = reader
        .iter()
        .map(|(id, p)| {
            by_id
                .get(id.as_str())
                .map(|e| (*e, p))
                .ok_or_else(|| Error::data(format!("prediction for unknown id {id:?}")))
        })
        .collect::<Result<_>>()?;
    let out = par_map(exec, &pairs, |(ex, p)| correct(p, ex, corrector));
    pairs.iter().zip(out).map(|((ex, _), r)| Ok((ex.id.clone(), r?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    /// Percent, 0 to 100.
    pub exact_match: f64,
    pub f1: f64,
}

/// Per-example EM and F1 in dataset order. Every example needs a prediction.
pub fn per_example_scores(examples: &[MrcExample], preds: &PredictionMap) -> Result<Vec<(f64, f64)>> {
    if preds.len() != examples.len() {
        return Err(Error::data(format!(
            "{} predictions for {} examples",
            preds.len(),
            examples.len()
        )));
    }
    examples
        .iter()
        .map(|ex| {
            let p = preds.get(&ex.id).ok_or_else(|| Error::data(format!("no prediction for {:?}", ex.id)))?;
            let em = exact_match(&p.text, &ex.gt_texts())?;
            Ok((em as f64, f1_max(&p.text, &ex.ground_truths)?))
        })
        .collect()
}

pub fn evaluate(examples: &[MrcExample], preds: &PredictionMap) -> Result<EvalSummary> {
    let scores = per_example_scores(examples, preds)?;
    let n = scores.len();
    let denom = n.max(1) as f64;
    Ok(EvalSummary {
        n,
        exact_match: 100.0 * scores.iter().map(|s| s.0).sum::<f64>() / denom,
        f1: 100.0 * scores.iter().map(|s| s.1).sum::<f64>() / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::Prediction;
    use crate::synth::{gen_corpus, SynthConfig};

    #[test]
    fn evaluate_identity_and_half() {
        let corpus = gen_corpus(&SynthConfig { n_examples: 10, weights: [0.0, 1.0, 1.0], ..Default::default() }).unwrap();
        let gold: PredictionMap = corpus
            .iter()
            .map(|e| (e.id.clone(), Prediction::from_span(&e.id, &e.context, reader_target(e).unwrap(), 0.0).unwrap()))
            .collect();
        let s = evaluate(&corpus, &gold).unwrap();
        assert_eq!((s.exact_match, s.f1), (100.0, 100.0));
        let mut half = gold.clone();
        for e in corpus.iter().take(5) {
            // the final "." never overlaps an answer
            let len = crate::span::char_len(&e.context);
            half.insert(e.id.clone(), Prediction::from_span(&e.id, &e.context, CharSpan::new(len - 1, len).unwrap(), 0.0).unwrap());
        }
        assert_eq!(evaluate(&corpus, &half).unwrap().exact_match, 50.0);
        half.remove(&corpus[0].id);
        assert!(evaluate(&corpus, &half).is_err());
    }

    #[test]
    fn kfold_covers_every_example_once() {
        let corpus = gen_corpus(&SynthConfig { n_examples: 20, ..Default::default() }).unwrap();
        let mcfg = ModelConfig { dim: 8, heads: 1, ff_dim: 8, layers: 1, ..Default::default() };
        let tcfg = TrainConfig { batch_size: 8, ..Default::default() };
        let (nb, summary) = kfold_nbest(&corpus, 5, 0, &mcfg, &tcfg, 3, Exec::default()).unwrap();
        assert_eq!(nb.len(), 20);
        assert_eq!(summary.final_losses.len(), 5);
        let (again, _) = kfold_nbest(&corpus, 5, 0, &mcfg, &tcfg, 3, Exec::Sequential).unwrap();
        assert_eq!(nb, again);
    }
}
