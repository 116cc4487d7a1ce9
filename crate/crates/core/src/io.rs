//! File formats: SQuAD-style datasets, prediction and n-best maps, label
//! sidecars. Maps are keyed by id in sorted order so output is reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::{char_len, char_slice, locate, Annotation, CharSpan, MrcExample, NBestList, Prediction};
use crate::taxonomy::ErrorCategory;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: String,
    pub data: Vec<Article>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub context: String,
    pub qas: Vec<Qa>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qa {
    pub id: String,
    pub question: String,
    pub answers: Vec<AnswerEntry>,
    /// Pieces of one multi-span answer; `answers` then lists the piece texts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub text: String,
    pub answer_start: usize,
}

pub const DATASET_VERSION: &str = "spancorr-1";

/// Writes every annotation of each example. A multi-span annotation becomes
/// the `spans` field, so an example holds either single-span answers or one
/// multi-span answer.
pub fn dataset_to_file(examples: &[MrcExample]) -> Result<DatasetFile> {
    let mut paragraphs = Vec::with_capacity(examples.len());
    for ex in examples {
        let multi: Vec<&Annotation> = ex.ground_truths.iter().filter(|a| a.is_multi_span()).collect();
        let qa = if let Some(m) = multi.first() {
            if ex.ground_truths.len() > 1 {
                return Err(Error::data(format!(
                    "{}: a multi-span answer cannot be combined with other annotations in this format",
                    ex.id
                )));
            }
            Qa {
                id: ex.id.clone(),
                question: ex.question.clone(),
                answers: m
                    .spans()
                    .iter()
                    .map(|(s, t)| AnswerEntry { text: t.clone(), answer_start: s.start })
                    .collect(),
                spans: Some(m.spans().iter().map(|(s, _)| [s.start, s.end]).collect()),
            }
        } else {
            Qa {
                id: ex.id.clone(),
                question: ex.question.clone(),
                answers: ex
                    .ground_truths
                    .iter()
                    .map(|a| AnswerEntry { text: a.spans()[0].1.clone(), answer_start: a.first_span().start })
                    .collect(),
                spans: None,
            }
        };
        paragraphs.push(Paragraph { context: ex.context.clone(), qas: vec![qa] });
    }
    Ok(DatasetFile { version: DATASET_VERSION.into(), data: vec![Article { paragraphs }] })
}

pub fn dataset_from_file(file: &DatasetFile) -> Result<Vec<MrcExample>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for art in &file.data {
        for para in &art.paragraphs {
            let len = char_len(&para.context);
            for qa in &para.qas {
                if !seen.insert(qa.id.clone()) {
                    return Err(Error::data(format!("duplicate example id {:?}", qa.id)));
                }
                let ground_truths = match &qa.spans {
                    Some(spans) => {
                        let spans: Vec<CharSpan> =
                            spans.iter().map(|[s, e]| CharSpan::new(*s, *e)).collect::<Result<_>>()?;
                        let ann = Annotation::from_spans(spans, &para.context)?;
                        if !qa.answers.is_empty() {
                            let texts: Vec<&str> = ann.spans().iter().map(|(_, t)| t.as_str()).collect();
                            let given: Vec<&str> = qa.answers.iter().map(|a| a.text.as_str()).collect();
                            if texts != given {
                                return Err(Error::data(format!("{}: answers disagree with spans", qa.id)));
                            }
                        }
                        vec![ann]
                    }
                    None => qa
                        .answers
                        .iter()
                        .map(|a| {
                            let span = CharSpan::new(a.answer_start, a.answer_start + char_len(&a.text))?;
                            span.check_within(len)?;
                            if char_slice(&para.context, span)? != a.text {
                                return Err(Error::data(format!(
                                    "{}: answer {:?} not found at {}",
                                    qa.id, a.text, a.answer_start
                                )));
                            }
                            Annotation::single(span, &para.context)
                        })
                        .collect::<Result<_>>()?,
                };
                if ground_truths.is_empty() {
                    return Err(Error::data(format!("{}: no answers", qa.id)));
                }
                out.push(MrcExample {
                    id: qa.id.clone(),
                    question: qa.question.clone(),
                    context: para.context.clone(),
                    ground_truths,
                });
            }
        }
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<MrcExample>> {
    dataset_from_file(&read_json(path)?)
}

pub fn write_dataset(path: &Path, examples: &[MrcExample]) -> Result<()> {
    write_json(path, &dataset_to_file(examples)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredEntry {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    pub score: f64,
}

impl PredEntry {
    pub fn from_prediction(p: &Prediction) -> Self {
        PredEntry { text: p.text.clone(), start: p.span.map(|s| s.start), end: p.span.map(|s| s.end), score: p.score }
    }

    pub fn to_prediction(&self, id: &str) -> Result<Prediction> {
        let span = match (self.start, self.end) {
            (Some(s), Some(e)) => Some(CharSpan::new(s, e)?),
            (None, None) => None,
            _ => return Err(Error::data(format!("{id}: prediction has only one of start/end"))),
        };
        Ok(Prediction { example_id: id.to_string(), text: self.text.clone(), span, score: self.score })
    }
}

pub type PredictionMap = BTreeMap<String, Prediction>;
pub type NBestMap = BTreeMap<String, NBestList>;

pub fn predictions_to_json(preds: &PredictionMap) -> Result<String> {
    let m: BTreeMap<&str, PredEntry> = preds.iter().map(|(k, p)| (k.as_str(), PredEntry::from_prediction(p))).collect();
    Ok(serde_json::to_string_pretty(&m)? + "\n")
}

pub fn nbest_to_json(nbest: &NBestMap) -> Result<String> {
    let m: BTreeMap<&str, Vec<PredEntry>> = nbest
        .iter()
        .map(|(k, l)| (k.as_str(), l.iter().map(PredEntry::from_prediction).collect()))
        .collect();
    Ok(serde_json::to_string_pretty(&m)? + "\n")
}

pub fn read_predictions(path: &Path) -> Result<PredictionMap> {
    let m: BTreeMap<String, PredEntry> = read_json(path)?;
    m.into_iter().map(|(k, e)| Ok((k.clone(), e.to_prediction(&k)?))).collect()
}

pub fn read_nbest(path: &Path) -> Result<NBestMap> {
    let m: BTreeMap<String, Vec<PredEntry>> = read_json(path)?;
    m.into_iter()
        .map(|(k, l)| {
            let list = l.iter().map(|e| e.to_prediction(&k)).collect::<Result<Vec<_>>>()?;
            Ok((k, list))
        })
        .collect()
}

pub fn write_predictions(path: &Path, preds: &PredictionMap) -> Result<()> {
    write_text(path, &predictions_to_json(preds)?)
}

pub fn write_nbest(path: &Path, nbest: &NBestMap) -> Result<()> {
    write_text(path, &nbest_to_json(nbest)?)
}

/// Fills in missing spans by locating the text in its context, and checks
/// that present spans agree with the text.
pub fn resolve_spans(preds: &mut PredictionMap, examples: &[MrcExample]) -> Result<()> {
    let by_id: BTreeMap<&str, &MrcExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    for (id, p) in preds.iter_mut() {
        let ex = by_id.get(id.as_str()).ok_or_else(|| Error::data(format!("prediction for unknown id {id:?}")))?;
        match p.span {
            Some(s) => {
                if char_slice(&ex.context, s)? != p.text {
                    return Err(Error::data(format!("{id}: prediction text does not match its span")));
                }
            }
            None if p.text.is_empty() => {}
            None => p.span = Some(locate(&p.text, &ex.context, ex.ground_truths.first().map(|a| a.first_span()))?),
        }
    }
    Ok(())
}

pub fn labels_to_json(labels: &BTreeMap<String, ErrorCategory>) -> Result<String> {
    let m: BTreeMap<&str, &str> = labels.iter().map(|(k, c)| (k.as_str(), c.name())).collect();
    Ok(serde_json::to_string_pretty(&m)? + "\n")
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, ErrorCategory>> {
    let m: BTreeMap<String, String> = read_json(path)?;
    m.into_iter()
        .map(|(k, v)| {
            let c = ErrorCategory::parse(&v).ok_or_else(|| Error::data(format!("{k}: unknown category {v:?}")))?;
            Ok((k, c))
        })
        .collect()
}
