//! Analysis reports: what the corrector changed, how often each error
//! category got fixed, cross-lingual EM deltas and headline EM tables.
//! Each report renders as an aligned text table and as CSV with unrounded
//! values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::PredictionMap;
use crate::pipeline::EvalSummary;
use crate::span::{exact_match, f1_max, normalize_text, MrcExample, Prediction};
use crate::taxonomy::{
    is_partial_match, Classification, ErrorCategory, PartialCase, TaxonomyReport,
};

fn lookup<'a>(map: &'a PredictionMap, id: &str, what: &str) -> Result<&'a Prediction> {
    map.get(id).ok_or_else(|| Error::data(format!("{what} predictions lack id {id:?}")))
}

fn check_ids(examples: &[MrcExample], maps: &[(&PredictionMap, &str)]) -> Result<()> {
    for (m, what) in maps {
        if m.len() != examples.len() {
            return Err(Error::data(format!("{what} predictions cover {} ids, gold has {}", m.len(), examples.len())));
        }
        for ex in examples {
            lookup(m, &ex.id, what)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeStats {
    pub total: usize,
    pub changed: usize,
    pub correct_to_correct: usize,
    pub correct_to_incorrect: usize,
    pub incorrect_to_correct: usize,
    pub incorrect_to_incorrect: usize,
    pub f1_increased: usize,
    pub f1_decreased: usize,
    pub f1_unchanged: usize,
}

/// Counts over the examples whose corrector output differs from the reader's
/// after normalization.
pub fn change_stats(examples: &[MrcExample], reader: &PredictionMap, corrector: &PredictionMap) -> Result<ChangeStats> {
    check_ids(examples, &[(reader, "reader"), (corrector, "corrector")])?;
    let mut s = ChangeStats { total: examples.len(), ..Default::default() };
    for ex in examples {
        let r = lookup(reader, &ex.id, "reader")?;
        let c = lookup(corrector, &ex.id, "corrector")?;
        if normalize_text(&r.text) == normalize_text(&c.text) {
            continue;
        }
        s.changed += 1;
        let gts = ex.gt_texts();
        let r_ok = exact_match(&r.text, &gts)? == 1;
        let c_ok = exact_match(&c.text, &gts)? == 1;
        match (r_ok, c_ok) {
            (true, true) => s.correct_to_correct += 1,
            (true, false) => s.correct_to_incorrect += 1,
            (false, true) => s.incorrect_to_correct += 1,
            (false, false) => {
                s.incorrect_to_incorrect += 1;
                let rf = f1_max(&r.text, &ex.ground_truths)?;
                let cf = f1_max(&c.text, &ex.ground_truths)?;
                if cf > rf {
                    s.f1_increased += 1;
                } else if cf < rf {
                    s.f1_decreased += 1;
                } else {
                    s.f1_unchanged += 1;
                }
            }
        }
    }
    Ok(s)
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl ChangeStats {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Predictions changed by the corrector (compared after normalization)");
        let _ = writeln!(out, "Changed: {} of {} ({:.1}%)", self.changed, self.total, pct(self.changed, self.total));
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<12} {:>18} {:>10} {:>10}", "Reader", "Corrector", "Count", "%");
        let rows = [
            ("Correct", "Correct", self.correct_to_correct),
            ("Correct", "Incorrect", self.correct_to_incorrect),
            ("Incorrect", "Correct", self.incorrect_to_correct),
            ("Incorrect", "Incorrect", self.incorrect_to_incorrect),
        ];
        for (r, c, n) in rows {
            let _ = writeln!(out, "{:<12} {:>18} {:>10} {:>10.1}", r, c, n, pct(n, self.changed));
        }
        let subs = [
            ("F1 increased", self.f1_increased),
            ("F1 decreased", self.f1_decreased),
            ("F1 unchanged", self.f1_unchanged),
        ];
        for (name, n) in subs {
            let _ = writeln!(out, "{:<12} {:>18} {:>10} {:>10.1}", "", name, n, pct(n, self.changed));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("reader,corrector,count,percent_of_changed\n");
        let rows = [
            ("correct", "correct", self.correct_to_correct),
            ("correct", "incorrect", self.correct_to_incorrect),
            ("incorrect", "correct", self.incorrect_to_correct),
            ("incorrect", "incorrect", self.incorrect_to_incorrect),
            ("incorrect", "incorrect_f1_increased", self.f1_increased),
            ("incorrect", "incorrect_f1_decreased", self.f1_decreased),
            ("incorrect", "incorrect_f1_unchanged", self.f1_unchanged),
        ];
        for (r, c, n) in rows {
            let _ = writeln!(out, "{r},{c},{n},{}", pct(n, self.changed));
        }
        let _ = writeln!(out, "changed,all,{},{}", self.changed, pct(self.changed, self.total));
        out
    }
}

/// Taxonomy labels of the reader's partial matches, plus the number of
/// partial matches that fell into no category.
pub fn classify_partial_matches(
    examples: &[MrcExample],
    reader: &PredictionMap,
) -> Result<(BTreeMap<String, ErrorCategory>, usize)> {
    let mut labels = BTreeMap::new();
    let mut unresolved = 0;
    for ex in examples {
        let p = lookup(reader, &ex.id, "reader")?;
        let em = exact_match(&p.text, &ex.gt_texts())?;
        let f1 = f1_max(&p.text, &ex.ground_truths)?;
        if !is_partial_match(em, f1) {
            continue;
        }
        let case = PartialCase { prediction: p, annotations: &ex.ground_truths, context: &ex.context };
        match case.classify()? {
            Classification::Category(c) => {
                labels.insert(ex.id.clone(), c);
            }
            Classification::UnresolvedTextOverlap => unresolved += 1,
        }
    }
    Ok((labels, unresolved))
}

pub fn taxonomy_report(examples: &[MrcExample], reader: &PredictionMap) -> Result<TaxonomyReport> {
    let (labels, unresolved) = classify_partial_matches(examples, reader)?;
    let mut counts: BTreeMap<ErrorCategory, usize> = BTreeMap::new();
    for c in labels.values() {
        *counts.entry(*c).or_default() += 1;
    }
    Ok(TaxonomyReport::from_counts(&counts.into_iter().collect::<Vec<_>>(), unresolved))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub total: usize,
    /// `None` where correction is not applicable (multi-span GT).
    pub corrected: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCorrectionStats {
    pub rows: BTreeMap<ErrorCategory, CategoryRow>,
}

/// For each labelled partial match, whether the corrector reached EM = 1.
pub fn category_correction_stats(
    labels: &BTreeMap<String, ErrorCategory>,
    corrector: &PredictionMap,
    examples: &[MrcExample],
) -> Result<CategoryCorrectionStats> {
    let by_id: BTreeMap<&str, &MrcExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut rows: BTreeMap<ErrorCategory, CategoryRow> = ErrorCategory::ALL
        .into_iter()
        .map(|c| {
            let corrected = (c != ErrorCategory::MultiSpanGT).then_some(0);
            (c, CategoryRow { total: 0, corrected })
        })
        .collect();
    for (id, cat) in labels {
        let ex = by_id.get(id.as_str()).ok_or_else(|| Error::data(format!("label for unknown id {id:?}")))?;
        let p = lookup(corrector, id, "corrector")?;
        let row = rows.get_mut(cat).expect("all categories present");
        row.total += 1;
        if let Some(c) = row.corrected.as_mut() {
            *c += exact_match(&p.text, &ex.gt_texts())? as usize;
        }
    }
    Ok(CategoryCorrectionStats { rows })
}

impl CategoryCorrectionStats {
    pub fn total(&self) -> usize {
        self.rows.values().map(|r| r.total).sum()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>7} {:>10} {:>6}", "Error category", "Total", "Corrected", "%");
        for c in ErrorCategory::ALL {
            let r = &self.rows[&c];
            match r.corrected {
                Some(k) => {
                    let _ = writeln!(out, "{:<24} {:>7} {:>10} {:>6.1}", c.label(), r.total, k, pct(k, r.total));
                }
                None => {
                    let _ = writeln!(out, "{:<24} {:>7} {:>10} {:>6}", c.label(), r.total, "-", "-");
                }
            }
        }
        let _ = writeln!(out, "{:<24} {:>7}", "Total", self.total());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,total,corrected,percent\n");
        for c in ErrorCategory::ALL {
            let r = &self.rows[&c];
            match r.corrected {
                Some(k) => {
                    let _ = writeln!(out, "{},{},{},{}", c.name(), r.total, k, pct(k, r.total));
                }
                None => {
                    let _ = writeln!(out, "{},{},,", c.name(), r.total);
                }
            }
        }
        out
    }
}

pub type LangGrid = BTreeMap<(String, String), f64>;

/// EM deltas per (question language, context language).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMatrix {
    pub question_langs: Vec<String>,
    pub context_langs: Vec<String>,
    /// `cells[q][c]`, unrounded.
    pub cells: Vec<Vec<f64>>,
    pub column_means: Vec<f64>,
}

pub fn delta_matrix(baseline: &LangGrid, system: &LangGrid) -> Result<DeltaMatrix> {
    let keys: BTreeSet<&(String, String)> = baseline.keys().collect();
    if keys != system.keys().collect() {
        return Err(Error::data("baseline and system cover different language pairs"));
    }
    let qs: Vec<String> = keys.iter().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let cs: Vec<String> = keys.iter().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut cells = vec![vec![0.0; cs.len()]; qs.len()];
    for (i, q) in qs.iter().enumerate() {
        for (j, c) in cs.iter().enumerate() {
            let key = (q.clone(), c.clone());
            let (b, s) = match (baseline.get(&key), system.get(&key)) {
                (Some(b), Some(s)) => (b, s),
                _ => return Err(Error::data(format!("missing language pair {q}/{c}"))),
            };
            cells[i][j] = s - b;
        }
    }
    let column_means = (0..cs.len())
        .map(|j| cells.iter().map(|row| row[j]).sum::<f64>() / qs.len() as f64)
        .collect();
    Ok(DeltaMatrix { question_langs: qs, context_langs: cs, cells, column_means })
}

impl DeltaMatrix {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<6}", "q\\c");
        for c in &self.context_langs {
            let _ = write!(out, " {:>6}", c);
        }
        out.push('\n');
        for (q, row) in self.question_langs.iter().zip(&self.cells) {
            let _ = write!(out, "{:<6}", q);
            for v in row {
                let _ = write!(out, " {:>6.1}", v);
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<6}", "avg");
        for v in &self.column_means {
            let _ = write!(out, " {:>6.1}", v);
        }
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("question_lang,context_lang,delta\n");
        for (q, row) in self.question_langs.iter().zip(&self.cells) {
            for (c, v) in self.context_langs.iter().zip(row) {
                let _ = writeln!(out, "{q},{c},{v}");
            }
        }
        for (c, v) in self.context_langs.iter().zip(&self.column_means) {
            let _ = writeln!(out, "avg,{c},{v}");
        }
        out
    }
}

/// Headline table: one row per system with EM and F1.
pub fn em_table(rows: &[(String, EvalSummary)]) -> String {
    let width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} {:>6} {:>6}", "System", "EM", "F1");
    for (name, s) in rows {
        let _ = writeln!(out, "{:<width$} {:>6.1} {:>6.1}", name, s.exact_match, s.f1);
    }
    out
}

pub fn em_csv(rows: &[(String, EvalSummary)]) -> String {
    let mut out = String::from("system,n,exact_match,f1\n");
    for (name, s) in rows {
        let _ = writeln!(out, "{name},{},{},{}", s.n, s.exact_match, s.f1);
    }
    out
}
