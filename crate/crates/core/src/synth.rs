//! Synthetic reading-comprehension corpus and a "flawed reader" that deforms
//! gold spans into each partial-match error category at configured rates.
//!
//! Contexts are built from space-separated tokens (punctuation included), so
//! whitespace tokens coincide with model tokens and every deformation is a
//! token-aligned span.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::{
    char_len, exact_match, f1_max, relation, Annotation, CharSpan, MrcExample, NBestList, Prediction,
    SpanRelation,
};
use crate::taxonomy::ErrorCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Template {
    List,
    Qualified,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_examples: usize,
    pub seed: u64,
    /// Weights for list, qualified and plain-entity answers.
    pub weights: [f64; 3],
    /// Share of list answers annotated as one multi-span answer (one piece per item).
    pub multi_span_fraction: f64,
    pub entities: Vec<String>,
    pub qualifiers: Vec<String>,
    pub relations: Vec<String>,
    pub topics: Vec<String>,
    pub filler: Vec<String>,
    pub tails: Vec<String>,
    /// Inclusive range for the number of pure filler sentences.
    pub filler_sentences: (usize, usize),
    /// Inclusive range for words per filler sentence.
    pub filler_len: (usize, usize),
    /// Answer-shaped sentences about other relations.
    pub distractors: usize,
    pub id_prefix: String,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_examples: 2000,
            seed: 0,
            weights: [0.35, 0.35, 0.30],
            multi_span_fraction: 0.5,
            entities: strings(&[
                "Corvin", "Maelis", "Tobran", "Aldric", "Brena", "Cassio", "Delwyn", "Elara", "Fenwick",
                "Galen", "Hollis", "Isolde", "Jorah", "Kestrel", "Lorcan", "Mirela", "Nyssa", "Orrin",
                "Perrin", "Quillon", "Rowena", "Soren", "Talia", "Ulric", "Vesna", "Wendell", "Xander",
                "Yselle", "Zorin", "Anselm", "Bexley", "Calder", "Dorian", "Emrys", "Faelan", "Gideon",
                "Halvard", "Ingrid", "Jessamy", "Korrin",
            ]),
            qualifiers: strings(&[
                "of Dunmore", "of Ashford", "from Team Sherif", "of Kelross", "from Brightwater",
                "of Harrowgate", "from Team Velan", "of Osterby", "from Millbrook", "of Westmarch",
                "from Team Arden", "of Caer Lind",
            ]),
            relations: strings(&[
                "winner", "founder", "captain", "author", "owner", "designer", "mayor", "keeper",
                "builder", "champion", "leader", "editor", "sponsor", "coach", "judge", "patron",
            ]),
            topics: strings(&[
                "river cup", "iron league", "silver festival", "northern guild", "golden tournament",
                "harbor museum", "valley library", "stone council", "crystal academy", "maple gazette",
                "river guild", "iron academy", "silver council", "golden museum", "harbor league",
            ]),
            filler: strings(&[
                "people", "often", "gathered", "near", "old", "market", "square", "weather", "stayed",
                "mild", "during", "most", "weeks", "visitors", "came", "distant", "towns", "records",
                "were", "kept", "carefully", "hall", "opened", "early", "morning", "crowds", "cheered",
                "loudly", "roads", "busy", "season", "bells", "rang",
            ]),
            tails: strings(&[
                "in the spring", "for many years", "after a long vote", "according to local records",
                "during the last season", "by a wide margin", "before the winter", "with great support",
            ]),
            filler_sentences: (1, 2),
            filler_len: (4, 7),
            distractors: 1,
            id_prefix: "syn".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("template weights must be non-negative with a positive sum"));
        }
        if !(0.0..=1.0).contains(&self.multi_span_fraction) {
            return Err(Error::config("multi_span_fraction must be in [0, 1]"));
        }
        let pools = [
            ("entities", self.entities.len()),
            ("qualifiers", self.qualifiers.len()),
            ("relations", self.relations.len()),
            ("topics", self.topics.len()),
            ("filler", self.filler.len()),
            ("tails", self.tails.len()),
        ];
        for (name, n) in pools {
            if n == 0 {
                return Err(Error::config(format!("vocabulary pool {name} is empty")));
            }
        }
        if self.entities.len() < 4 {
            return Err(Error::config("need at least 4 entities for list answers"));
        }
        if self.relations.len() < 2 {
            return Err(Error::config("need at least 2 relations for distractor sentences"));
        }
        if self.filler_sentences.0 > self.filler_sentences.1 || self.filler_len.0 > self.filler_len.1 || self.filler_len.0 == 0 {
            return Err(Error::config("invalid filler ranges"));
        }
        Ok(())
    }
}

/// Splits `total` items into integer counts proportional to `weights`
/// (largest remainder, ties to the lower index).
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

fn mix(seed: u64, salt: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generated example with the template that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub example: MrcExample,
    pub template: Template,
}

struct Builder {
    words: Vec<String>,
}

impl Builder {
    fn push_words(&mut self, text: &str) -> (usize, usize) {
        let start = self.words.len();
        self.words.extend(text.split_whitespace().map(str::to_string));
        (start, self.words.len())
    }

    /// Character spans of each word when joined by single spaces.
    fn spans(&self) -> Vec<CharSpan> {
        let mut out = Vec::with_capacity(self.words.len());
        let mut pos = 0;
        for w in &self.words {
            let n = char_len(w);
            out.push(CharSpan { start: pos, end: pos + n });
            pos += n + 1;
        }
        out
    }
}

fn answer_text<R: Rng>(cfg: &SynthConfig, template: Template, rng: &mut R, multi: bool) -> (String, Vec<usize>) {
    match template {
        Template::Plain => (cfg.entities.choose(rng).unwrap().clone(), vec![0]),
        Template::Qualified => {
            let e = cfg.entities.choose(rng).unwrap();
            let q = cfg.qualifiers.choose(rng).unwrap();
            (format!("{e} {q}"), vec![0])
        }
        Template::List => {
            let n = rng.random_range(2..=4usize);
            let items: Vec<&String> = cfg.entities.choose_multiple(rng, n).collect();
            // item word positions within the answer, used for multi-span pieces
            let mut words = Vec::new();
            let mut item_pos = Vec::new();
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    if multi || i + 1 < n {
                        words.push(",".to_string());
                    } else {
                        words.push("and".to_string());
                    }
                }
                item_pos.push(words.len());
                words.push(it.to_string());
            }
            (words.join(" "), item_pos)
        }
    }
}

fn gen_example(cfg: &SynthConfig, index: usize, template: Template, multi: bool) -> Result<SynthExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 1, index as u64));
    let relation_i = rng.random_range(0..cfg.relations.len());
    let rel = &cfg.relations[relation_i];
    let topic = cfg.topics.choose(&mut rng).unwrap();
    let verbs = ["was", "is", "became", "remained"];

    let mut sentences: Vec<(bool, String)> = Vec::new();
    let (answer, item_pos) = answer_text(cfg, template, &mut rng, multi);
    let verb = verbs.choose(&mut rng).unwrap();
    let tail = cfg.tails.choose(&mut rng).unwrap();
    sentences.push((true, format!("the {rel} of the {topic} {verb}")));
    let tail_text = format!("{tail} .");

    for _ in 0..cfg.distractors {
        let mut other = rng.random_range(0..cfg.relations.len() - 1);
        if other >= relation_i {
            other += 1;
        }
        let t = if rng.random_bool(0.5) { topic.clone() } else { cfg.topics.choose(&mut rng).unwrap().clone() };
        let tmpl = if rng.random_bool(0.5) { Template::Plain } else { Template::Qualified };
        let (a, _) = answer_text(cfg, tmpl, &mut rng, false);
        let v = verbs.choose(&mut rng).unwrap();
        let tl = cfg.tails.choose(&mut rng).unwrap();
        sentences.push((false, format!("the {} of the {t} {v} {a} {tl} .", cfg.relations[other])));
    }
    let n_filler = rng.random_range(cfg.filler_sentences.0..=cfg.filler_sentences.1);
    for _ in 0..n_filler {
        let len = rng.random_range(cfg.filler_len.0..=cfg.filler_len.1);
        let words: Vec<&str> = (0..len).map(|_| cfg.filler.choose(&mut rng).unwrap().as_str()).collect();
        sentences.push((false, format!("{} .", words.join(" "))));
    }
    sentences.shuffle(&mut rng);

    let mut b = Builder { words: Vec::new() };
    let mut answer_words = (0, 0);
    for (is_answer, s) in &sentences {
        b.push_words(s);
        if *is_answer {
            answer_words = b.push_words(&answer);
            b.push_words(&tail_text);
        }
    }
    let spans = b.spans();
    let context = b.words.join(" ");
    let gt_spans: Vec<CharSpan> = if template == Template::List && multi {
        item_pos.iter().map(|&p| spans[answer_words.0 + p]).collect()
    } else {
        vec![CharSpan { start: spans[answer_words.0].start, end: spans[answer_words.1 - 1].end }]
    };
    let annotation = Annotation::from_spans(gt_spans, &context)?;
    let q_verb = if rng.random_bool(0.5) { "was" } else { "is" };
    let example = MrcExample {
        id: format!("{}-{:05}", cfg.id_prefix, index),
        question: format!("who {q_verb} the {rel} of the {topic}"),
        context,
        ground_truths: vec![annotation],
    };
    Ok(SynthExample { example, template })
}

/// Generates `n_examples` examples. Template counts follow the weights exactly
/// (largest remainder); which example gets which template is shuffled under
/// the seed, and each example draws from its own `(seed, index)` stream.
pub fn gen_corpus_labeled(cfg: &SynthConfig) -> Result<Vec<SynthExample>> {
    cfg.validate()?;
    let counts = apportion(cfg.n_examples, &cfg.weights);
    let mut templates: Vec<Template> = Vec::with_capacity(cfg.n_examples);
    for (t, n) in [Template::List, Template::Qualified, Template::Plain].into_iter().zip(&counts) {
        templates.extend(std::iter::repeat_n(t, *n));
    }
    templates.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0, 0)));
    let n_list = counts[0];
    let n_multi = (cfg.multi_span_fraction * n_list as f64).round() as usize;
    let mut list_seen = 0;
    let mut out = Vec::with_capacity(cfg.n_examples);
    for (i, t) in templates.into_iter().enumerate() {
        let multi = t == Template::List && {
            list_seen += 1;
            list_seen <= n_multi
        };
        out.push(gen_example(cfg, i, t, multi)?);
    }
    Ok(out)
}

pub fn gen_corpus(cfg: &SynthConfig) -> Result<Vec<MrcExample>> {
    Ok(gen_corpus_labeled(cfg)?.into_iter().map(|s| s.example).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorInjectionConfig {
    /// Share of examples whose top prediction is deformed.
    pub partial_rate: f64,
    pub pred_subset_gt: f64,
    pub gt_subset_pred: f64,
    pub partial_overlap: f64,
    pub multi_span_gt: f64,
    pub seed: u64,
    pub nbest_size: usize,
}

impl Default for ErrorInjectionConfig {
    fn default() -> Self {
        ErrorInjectionConfig {
            partial_rate: 0.4,
            pred_subset_gt: 0.33,
            gt_subset_pred: 0.28,
            partial_overlap: 0.06,
            multi_span_gt: 0.33,
            seed: 0,
            nbest_size: 5,
        }
    }
}

impl ErrorInjectionConfig {
    pub fn rate(&self, c: ErrorCategory) -> f64 {
        match c {
            ErrorCategory::PredSubsetGT => self.pred_subset_gt,
            ErrorCategory::GTSubsetPred => self.gt_subset_pred,
            ErrorCategory::PartialOverlap => self.partial_overlap,
            ErrorCategory::MultiSpanGT => self.multi_span_gt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.partial_rate, self.pred_subset_gt, self.gt_subset_pred, self.partial_overlap, self.multi_span_gt];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::config("injection rates must be in [0, 1]"));
        }
        let sum = self.pred_subset_gt + self.gt_subset_pred + self.partial_overlap + self.multi_span_gt;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("category rates must sum to 1, got {sum}")));
        }
        if self.nbest_size == 0 {
            return Err(Error::config("nbest_size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionSummary {
    pub examples: usize,
    pub injected: BTreeMap<String, usize>,
    /// Requested injections that no example could satisfy and were moved to
    /// another category.
    pub resampled: usize,
}

#[derive(Debug, Clone)]
pub struct FlawedOutput {
    pub predictions: Vec<Prediction>,
    pub nbest: Vec<NBestList>,
    /// Injected category per example id (absent for untouched examples).
    pub labels: BTreeMap<String, ErrorCategory>,
    pub summary: InjectionSummary,
}

/// Whitespace tokens of a context with their sentence index.
struct CtxTokens<'a> {
    text: Vec<&'a str>,
    spans: Vec<CharSpan>,
    sentence: Vec<usize>,
}

impl<'a> CtxTokens<'a> {
    fn new(context: &'a str) -> Self {
        let mut text = Vec::new();
        let mut spans = Vec::new();
        let mut sentence = Vec::new();
        let mut sent = 0;
        let mut pos = 0;
        let mut start = None;
        for (i, c) in context.chars().enumerate() {
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    spans.push(CharSpan { start: s, end: i });
                }
            } else if start.is_none() {
                start = Some(i);
            }
            pos = i + 1;
        }
        if let Some(s) = start {
            spans.push(CharSpan { start: s, end: pos });
        }
        let chars: Vec<(usize, char)> = context.char_indices().collect();
        for s in &spans {
            let b0 = chars[s.start].0;
            let b1 = if s.end < chars.len() { chars[s.end].0 } else { context.len() };
            let w = &context[b0..b1];
            text.push(w);
            sentence.push(sent);
            if w == "." {
                sent += 1;
            }
        }
        CtxTokens { text, spans, sentence }
    }

    fn range_of(&self, span: CharSpan) -> Option<(usize, usize)> {
        let first = self.spans.iter().position(|s| s.start == span.start)?;
        let last = self.spans.iter().position(|s| s.end == span.end)?;
        (first <= last).then_some((first, last))
    }

    fn span(&self, a: usize, b: usize) -> CharSpan {
        CharSpan { start: self.spans[a].start, end: self.spans[b].end }
    }

    /// Content word that may open or close a predicted span.
    fn edge_ok(&self, i: usize) -> bool {
        let w = self.text[i];
        w.chars().all(char::is_alphanumeric) && !matches!(w, "and" | "the" | "a" | "an" | "of" | "from")
    }

    fn sentence_bounds(&self, i: usize) -> (usize, usize) {
        let s = self.sentence[i];
        let first = (0..=i).rev().take_while(|&j| self.sentence[j] == s).last().unwrap_or(i);
        let mut last = i;
        while last + 1 < self.text.len() && self.sentence[last + 1] == s && self.text[last + 1] != "." {
            last += 1;
        }
        (first, last)
    }
}

/// Candidate deformed spans of the single-span GT `(g0, g1)` for a category.
fn candidates(t: &CtxTokens, g0: usize, g1: usize, cat: ErrorCategory) -> Vec<(usize, usize)> {
    let (s0, s1) = t.sentence_bounds(g0);
    let mut out = Vec::new();
    match cat {
        ErrorCategory::PredSubsetGT => {
            for j in g0..g1 {
                if t.edge_ok(j) && t.edge_ok(g0) {
                    out.push((g0, j));
                }
            }
            for i in g0 + 1..=g1 {
                if t.edge_ok(i) && t.edge_ok(g1) {
                    out.push((i, g1));
                }
            }
        }
        ErrorCategory::GTSubsetPred => {
            let lo = s0.max(g0.saturating_sub(4));
            let hi = s1.min(g1 + 4);
            for i in lo..=g0 {
                for j in g1..=hi {
                    if (i, j) != (g0, g1) && t.edge_ok(i) && t.edge_ok(j) {
                        out.push((i, j));
                    }
                }
            }
        }
        ErrorCategory::PartialOverlap => {
            let lo = s0.max(g0.saturating_sub(4));
            for i in lo..g0 {
                for j in g0..g1 {
                    if t.edge_ok(i) && t.edge_ok(j) {
                        out.push((i, j));
                    }
                }
            }
            let hi = s1.min(g1 + 4);
            for i in g0 + 1..=g1 {
                for j in g1 + 1..=hi {
                    if t.edge_ok(i) && t.edge_ok(j) {
                        out.push((i, j));
                    }
                }
            }
        }
        ErrorCategory::MultiSpanGT => {}
    }
    out
}

/// Partial-match spans for a multi-span annotation: single pieces and runs of
/// adjacent pieces short of the full list.
fn multi_candidates(t: &CtxTokens, ann: &Annotation) -> Vec<(usize, usize)> {
    let pieces: Vec<(usize, usize)> = ann.spans().iter().filter_map(|(s, _)| t.range_of(*s)).collect();
    let mut out = Vec::new();
    for a in 0..pieces.len() {
        for b in a..pieces.len() {
            if (a, b) != (0, pieces.len() - 1) {
                out.push((pieces[a].0, pieces[b].1));
            }
        }
    }
    out
}

fn is_partial(ex: &MrcExample, span: CharSpan) -> bool {
    let Ok(p) = Prediction::from_span(&ex.id, &ex.context, span, 0.0) else {
        return false;
    };
    exact_match(&p.text, &ex.gt_texts()).unwrap_or(1) == 0 && f1_max(&p.text, &ex.ground_truths).unwrap_or(0.0) > 0.0
}

/// Span the untouched reader predicts: the GT itself, or for a multi-span
/// answer the contiguous span enclosing all pieces.
fn gold_span(ex: &MrcExample) -> CharSpan {
    let ann = &ex.ground_truths[0];
    let spans = ann.spans();
    CharSpan { start: spans[0].0.start, end: spans[spans.len() - 1].0.end }
}

/// Deformations of `ex` that realize `cat` and are genuine partial matches.
fn valid_deformations(ex: &MrcExample, t: &CtxTokens, cat: ErrorCategory) -> Vec<CharSpan> {
    let ann = &ex.ground_truths[0];
    let raw = if ann.is_multi_span() {
        if cat != ErrorCategory::MultiSpanGT {
            return Vec::new();
        }
        multi_candidates(t, ann)
    } else {
        if cat == ErrorCategory::MultiSpanGT {
            return Vec::new();
        }
        let Some((g0, g1)) = t.range_of(ann.first_span()) else {
            return Vec::new();
        };
        candidates(t, g0, g1, cat)
    };
    let gt = ann.first_span();
    raw.into_iter()
        .map(|(a, b)| t.span(a, b))
        .filter(|s| is_partial(ex, *s))
        .filter(|s| {
            ann.is_multi_span()
                || matches!(
                    (cat, relation(*s, gt)),
                    (ErrorCategory::PredSubsetGT, SpanRelation::BContainsA)
                        | (ErrorCategory::GTSubsetPred, SpanRelation::AContainsB)
                        | (ErrorCategory::PartialOverlap, SpanRelation::Overlap)
                )
        })
        .collect()
}

/// Simulated reader. Exactly `round(partial_rate * n)` examples get a deformed
/// top prediction, split across categories by largest remainder; examples are
/// matched to categories they can realize in a seeded random order.
pub fn flawed_reader(examples: &[MrcExample], cfg: &ErrorInjectionConfig) -> Result<FlawedOutput> {
    cfg.validate()?;
    let n = examples.len();
    let toks: Vec<CtxTokens> = examples.iter().map(|e| CtxTokens::new(&e.context)).collect();
    let feasible: Vec<Vec<ErrorCategory>> = examples
        .iter()
        .zip(&toks)
        .map(|(e, t)| {
            if e.ground_truths.is_empty() {
                return Vec::new();
            }
            ErrorCategory::ALL
                .into_iter()
                .filter(|c| !valid_deformations(e, t, *c).is_empty())
                .collect()
        })
        .collect();

    let n_partial = (cfg.partial_rate * n as f64).round() as usize;
    let cats = [
        ErrorCategory::MultiSpanGT,
        ErrorCategory::PredSubsetGT,
        ErrorCategory::PartialOverlap,
        ErrorCategory::GTSubsetPred,
    ];
    let weights: Vec<f64> = cats.iter().map(|c| cfg.rate(*c)).collect();
    let quotas = apportion(n_partial, &weights);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, 2, 0)));
    let mut assigned: Vec<Option<ErrorCategory>> = vec![None; n];
    let mut summary = InjectionSummary { examples: n, ..Default::default() };
    let mut shortfall = 0;
    // most constrained categories first; GTSubsetPred accepts any single-span GT
    for (cat, quota) in cats.iter().zip(&quotas) {
        let mut want = *quota;
        if *cat == ErrorCategory::GTSubsetPred {
            want += shortfall;
        }
        for &i in &order {
            if want == 0 {
                break;
            }
            if assigned[i].is_none() && feasible[i].contains(cat) {
                assigned[i] = Some(*cat);
                want -= 1;
            }
        }
        if *cat == ErrorCategory::GTSubsetPred {
            if want > 0 {
                return Err(Error::data(format!(
                    "cannot inject {n_partial} partial matches: only {} examples can be deformed",
                    n_partial - want
                )));
            }
            summary.resampled = shortfall;
        } else {
            shortfall += want;
        }
    }

    let mut predictions = Vec::with_capacity(n);
    let mut nbest = Vec::with_capacity(n);
    let mut labels = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 3, i as u64));
        let gold = gold_span(ex);
        let top = match assigned[i] {
            Some(cat) => {
                labels.insert(ex.id.clone(), cat);
                *summary.injected.entry(cat.name().to_string()).or_default() += 1;
                *valid_deformations(ex, &toks[i], cat).choose(&mut rng).unwrap()
            }
            None => gold,
        };
        let mut spans = vec![top];
        let mut pool: Vec<CharSpan> = feasible[i]
            .iter()
            .flat_map(|c| valid_deformations(ex, &toks[i], *c))
            .collect();
        if top != gold && rng.random_bool(0.5) {
            pool.push(gold);
        }
        pool.shuffle(&mut rng);
        for s in pool {
            if spans.len() >= cfg.nbest_size {
                break;
            }
            if !spans.contains(&s) {
                spans.push(s);
            }
        }
        let mut score = 10.0;
        let mut list = Vec::with_capacity(spans.len());
        for s in spans {
            list.push(Prediction::from_span(&ex.id, &ex.context, s, score)?);
            score -= rng.random_range(0.2..1.5);
        }
        predictions.push(list[0].clone());
        nbest.push(list);
    }
    Ok(FlawedOutput { predictions, nbest, labels, summary })
}
