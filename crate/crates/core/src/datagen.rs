//! Corrector training data: fold plans for out-of-fold reader predictions,
//! delimiter insertion, and identity / correction example construction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{par_map, Exec};
use crate::span::{char_len, exact_match, locate, normalize_text, CharSpan, MrcExample, Prediction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
    /// Held-out ids per fold, in shuffled order.
    folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn holdout(&self, fold: usize) -> &[String] {
        &self.folds[fold]
    }

    /// Ids of every fold except `fold`.
    pub fn train(&self, fold: usize) -> Vec<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, ids)| ids.iter().cloned())
            .collect()
    }
}

/// Shuffles ids under `seed` and deals them round-robin into `n_folds` folds.
pub fn make_fold_plan<S: AsRef<str>>(ids: &[S], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::config(format!("n_folds must be >= 2, got {n_folds}")));
    }
    if n_folds > ids.len() {
        return Err(Error::config(format!(
            "n_folds ({n_folds}) exceeds number of examples ({})",
            ids.len()
        )));
    }
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_ref()) {
            return Err(Error::data(format!("duplicate example id {:?}", id.as_ref())));
        }
    }
    let mut order: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); n_folds];
    let mut assignments = BTreeMap::new();
    for (i, id) in order.into_iter().enumerate() {
        assignments.insert(id.clone(), i % n_folds);
        folds[i % n_folds].push(id);
    }
    Ok(FoldPlan { n_folds, seed, assignments, folds })
}

/// Inclusive token-position interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// Inserts `delimiter` right before `span.start` and right after `span.end`.
/// `context` is the position range of the context segment; the span must lie
/// inside it.
pub fn insert_delimiters(
    ids: &[u32],
    context: Range<usize>,
    span: TokenSpan,
    delimiter: u32,
) -> Result<Vec<u32>> {
    if span.start > span.end || span.end >= ids.len() || context.end > ids.len() {
        return Err(Error::data(format!(
            "token span [{}, {}] out of bounds for sequence of length {}",
            span.start,
            span.end,
            ids.len()
        )));
    }
    if span.start < context.start || span.end >= context.end {
        return Err(Error::SegmentCrossing);
    }
    let mut out = Vec::with_capacity(ids.len() + 2);
    out.extend_from_slice(&ids[..span.start]);
    out.push(delimiter);
    out.extend_from_slice(&ids[span.start..=span.end]);
    out.push(delimiter);
    out.extend_from_slice(&ids[span.end + 1..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorExample {
    pub source_example_id: String,
    pub marked_span: CharSpan,
    pub target_span: CharSpan,
    pub is_identity: bool,
    /// Reader score of the marked prediction; `None` for identity examples.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub examples: usize,
    pub usable: usize,
    pub skipped_multi_span: usize,
    pub identity: usize,
    pub corrections: usize,
    /// Usable examples that yielded fewer than `k` incorrect predictions.
    pub short_of_k: usize,
}

/// Identity example for the first single-span annotation, plus up to `k`
/// corrections from the highest-scoring n-best entries that miss every
/// annotation. Repeated normalized texts count once.
pub fn build_corrector_examples(
    example: &MrcExample,
    nbest: &[Prediction],
    k: usize,
) -> Vec<CorrectorExample> {
    let Some(ann) = example.first_single_span() else {
        return Vec::new();
    };
    let target = ann.first_span();
    let gt_texts = example.gt_texts();
    let mut out = vec![CorrectorExample {
        source_example_id: example.id.clone(),
        marked_span: target,
        target_span: target,
        is_identity: true,
        score: None,
    }];
    let mut seen = HashSet::new();
    let len = char_len(&example.context);
    for p in nbest {
        if out.len() > k {
            break;
        }
        if exact_match(&p.text, &gt_texts).unwrap_or(1) == 1 {
            continue;
        }
        if !seen.insert(normalize_text(&p.text)) {
            continue;
        }
        let span = match p.span {
            Some(s) => s,
            None => match locate(&p.text, &example.context, Some(target)) {
                Ok(s) => s,
                Err(_) => continue,
            },
        };
        if span.check_within(len).is_err() {
            continue;
        }
        out.push(CorrectorExample {
            source_example_id: example.id.clone(),
            marked_span: span,
            target_span: target,
            is_identity: false,
            score: Some(p.score),
        });
    }
    out
}

/// Runs [`build_corrector_examples`] over a dataset and returns the records in
/// file order: by source id, identity first, then by descending score.
pub fn generate(
    examples: &[MrcExample],
    nbest: &HashMap<String, Vec<Prediction>>,
    k: usize,
    exec: Exec,
) -> Result<(Vec<CorrectorExample>, GenerationSummary)> {
    for ex in examples {
        if !nbest.contains_key(&ex.id) {
            return Err(Error::data(format!("no n-best predictions for example {:?}", ex.id)));
        }
    }
    let per_example = par_map(exec, examples, |ex| build_corrector_examples(ex, &nbest[&ex.id], k));
    let mut summary = GenerationSummary { examples: examples.len(), ..Default::default() };
    let mut all = Vec::new();
    for (ex, out) in examples.iter().zip(per_example) {
        if ex.first_single_span().is_none() {
            summary.skipped_multi_span += 1;
            continue;
        }
        summary.usable += 1;
        let corrections = out.len() - 1;
        summary.identity += 1;
        summary.corrections += corrections;
        if corrections < k {
            summary.short_of_k += 1;
        }
        all.extend(out);
    }
    sort_records(&mut all);
    Ok((all, summary))
}

pub fn sort_records(records: &mut [CorrectorExample]) {
    records.sort_by(|a, b| {
        a.source_example_id
            .cmp(&b.source_example_id)
            .then_with(|| b.is_identity.cmp(&a.is_identity))
            .then_with(|| {
                let (sa, sb) = (a.score.unwrap_or(f64::INFINITY), b.score.unwrap_or(f64::INFINITY));
                sb.total_cmp(&sa)
            })
            .then_with(|| a.marked_span.cmp(&b.marked_span))
    });
}

/// One line of the corrector training file. Offsets are character offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorRecord {
    pub source_id: String,
    pub question: String,
    pub context: String,
    pub marked_start: usize,
    pub marked_end: usize,
    pub target_start: usize,
    pub target_end: usize,
    pub is_identity: bool,
}

impl CorrectorRecord {
    pub fn new(ex: &CorrectorExample, source: &MrcExample) -> Self {
        CorrectorRecord {
            source_id: ex.source_example_id.clone(),
            question: source.question.clone(),
            context: source.context.clone(),
            marked_start: ex.marked_span.start,
            marked_end: ex.marked_span.end,
            target_start: ex.target_span.start,
            target_end: ex.target_span.end,
            is_identity: ex.is_identity,
        }
    }

    pub fn marked(&self) -> Result<CharSpan> {
        let s = CharSpan::new(self.marked_start, self.marked_end)?;
        s.check_within(char_len(&self.context))?;
        Ok(s)
    }

    pub fn target(&self) -> Result<CharSpan> {
        let s = CharSpan::new(self.target_start, self.target_end)?;
        s.check_within(char_len(&self.context))?;
        Ok(s)
    }
}

pub fn to_records(examples: &[MrcExample], corr: &[CorrectorExample]) -> Result<Vec<CorrectorRecord>> {
    let by_id: HashMap<&str, &MrcExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    corr.iter()
        .map(|c| {
            by_id
                .get(c.source_example_id.as_str())
                .map(|src| CorrectorRecord::new(c, src))
                .ok_or_else(|| Error::data(format!("unknown source id {:?}", c.source_example_id)))
        })
        .collect()
}

pub fn records_to_jsonl(records: &[CorrectorRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<CorrectorRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
