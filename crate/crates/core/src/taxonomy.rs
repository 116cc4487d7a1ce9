//! Partial-match error categories and their distribution report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::{locate, relation, token_f1, Annotation, Prediction, SpanRelation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    MultiSpanGT,
    PredSubsetGT,
    GTSubsetPred,
    PartialOverlap,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::PredSubsetGT,
        ErrorCategory::GTSubsetPred,
        ErrorCategory::PartialOverlap,
        ErrorCategory::MultiSpanGT,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ErrorCategory::MultiSpanGT => "MultiSpanGT",
            ErrorCategory::PredSubsetGT => "PredSubsetGT",
            ErrorCategory::GTSubsetPred => "GTSubsetPred",
            ErrorCategory::PartialOverlap => "PartialOverlap",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ErrorCategory::MultiSpanGT => "Multi-Span GT",
            ErrorCategory::PredSubsetGT => "Prediction ⊂ GT",
            ErrorCategory::GTSubsetPred => "GT ⊂ Prediction",
            ErrorCategory::PartialOverlap => "Prediction ∩ GT ≠ ∅",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Result of classifying one partial match. Text overlap without span overlap
/// (e.g. the prediction hits another occurrence of a GT word) is kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Category(ErrorCategory),
    UnresolvedTextOverlap,
}

pub fn is_partial_match(em: u8, f1: f64) -> bool {
    em == 0 && f1 > 0.0
}

/// The annotation closest to the prediction: highest token F1, then earliest
/// first-span start, then list order.
pub fn select_reference_annotation<'a>(
    pred: &Prediction,
    gts: &'a [Annotation],
) -> Result<&'a Annotation> {
    let mut best: Option<(f64, usize, &Annotation)> = None;
    for a in gts {
        let f1 = token_f1(&pred.text, &a.text());
        let start = a.first_span().start;
        let better = match best {
            None => true,
            Some((bf, bs, _)) => f1 > bf || (f1 == bf && start < bs),
        };
        if better {
            best = Some((f1, start, a));
        }
    }
    best.map(|(_, _, a)| a).ok_or(Error::EmptyGroundTruth)
}

pub fn classify(pred: &Prediction, reference: &Annotation, context: &str) -> Result<Classification> {
    if reference.is_multi_span() {
        return Ok(Classification::Category(ErrorCategory::MultiSpanGT));
    }
    let gt = reference.first_span();
    let pred_span = match pred.span {
        Some(s) => s,
        None => locate(&pred.text, context, Some(gt))?,
    };
    Ok(match relation(pred_span, gt) {
        SpanRelation::BContainsA => Classification::Category(ErrorCategory::PredSubsetGT),
        SpanRelation::AContainsB => Classification::Category(ErrorCategory::GTSubsetPred),
        SpanRelation::Overlap => Classification::Category(ErrorCategory::PartialOverlap),
        SpanRelation::Equal | SpanRelation::Disjoint => Classification::UnresolvedTextOverlap,
    })
}

/// One partial-match prediction together with its gold annotations and context.
#[derive(Debug, Clone)]
pub struct PartialCase<'a> {
    pub prediction: &'a Prediction,
    pub annotations: &'a [Annotation],
    pub context: &'a str,
}

impl PartialCase<'_> {
    pub fn classify(&self) -> Result<Classification> {
        let reference = select_reference_annotation(self.prediction, self.annotations)?;
        classify(self.prediction, reference, self.context)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyReport {
    pub multi_span_gt: usize,
    pub pred_subset_gt: usize,
    pub gt_subset_pred: usize,
    pub partial_overlap: usize,
    pub unresolved: usize,
    pub total: usize,
}

impl TaxonomyReport {
    pub fn from_counts(counts: &[(ErrorCategory, usize)], unresolved: usize) -> Self {
        let mut r = TaxonomyReport { unresolved, ..Default::default() };
        for (c, n) in counts {
            *r.slot(*c) += n;
        }
        r.total = r.multi_span_gt + r.pred_subset_gt + r.gt_subset_pred + r.partial_overlap + unresolved;
        r
    }

    fn slot(&mut self, c: ErrorCategory) -> &mut usize {
        match c {
            ErrorCategory::MultiSpanGT => &mut self.multi_span_gt,
            ErrorCategory::PredSubsetGT => &mut self.pred_subset_gt,
            ErrorCategory::GTSubsetPred => &mut self.gt_subset_pred,
            ErrorCategory::PartialOverlap => &mut self.partial_overlap,
        }
    }

    pub fn count(&self, c: ErrorCategory) -> usize {
        match c {
            ErrorCategory::MultiSpanGT => self.multi_span_gt,
            ErrorCategory::PredSubsetGT => self.pred_subset_gt,
            ErrorCategory::GTSubsetPred => self.gt_subset_pred,
            ErrorCategory::PartialOverlap => self.partial_overlap,
        }
    }

    pub fn percent_of(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.total as f64
        }
    }

    pub fn percent(&self, c: ErrorCategory) -> f64 {
        self.percent_of(self.count(c))
    }

    pub fn single_span(&self) -> usize {
        self.pred_subset_gt + self.gt_subset_pred + self.partial_overlap
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count,percent\n");
        for c in ErrorCategory::ALL {
            let _ = writeln!(out, "{},{},{}", c.name(), self.count(c), self.percent(c));
        }
        if self.unresolved > 0 {
            let _ = writeln!(
                out,
                "UnresolvedTextOverlap,{},{}",
                self.unresolved,
                self.percent_of(self.unresolved)
            );
        }
        out
    }

    /// Aligned table: single-span subtotal with indented categories, then multi-span.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Single-Span GT".to_string(), self.single_span()),
            (format!("  {}", ErrorCategory::PredSubsetGT.label()), self.pred_subset_gt),
            (format!("  {}", ErrorCategory::GTSubsetPred.label()), self.gt_subset_pred),
            (format!("  {}", ErrorCategory::PartialOverlap.label()), self.partial_overlap),
            (ErrorCategory::MultiSpanGT.label().to_string(), self.multi_span_gt),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>6} {:>5}", "Error", "Count", "%");
        let _ = writeln!(out, "{}", "-".repeat(37));
        for (name, n) in rows.iter() {
            let _ = writeln!(out, "{:<24} {:>6} {:>5.0}", name, n, self.percent_of(*n));
        }
        if self.unresolved > 0 {
            let _ = writeln!(
                out,
                "{:<24} {:>6} {:>5.0}",
                "Unresolved text overlap",
                self.unresolved,
                self.percent_of(self.unresolved)
            );
        }
        let _ = writeln!(out, "{}", "-".repeat(37));
        let _ = writeln!(out, "{:<24} {:>6} {:>5}", "Total", self.total, 100);
        out
    }
}

/// Classifies every case and tallies the categories.
pub fn distribution(cases: &[PartialCase<'_>]) -> Result<TaxonomyReport> {
    let mut counts = Vec::new();
    let mut unresolved = 0;
    for case in cases {
        match case.classify()? {
            Classification::Category(c) => counts.push((c, 1)),
            Classification::UnresolvedTextOverlap => unresolved += 1,
        }
    }
    Ok(TaxonomyReport::from_counts(&counts, unresolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::{exact_match, f1_max, CharSpan};

    fn case(context: &str, gt: &str, pred: &str) -> (Prediction, Annotation) {
        let g = locate(gt, context, None).unwrap();
        let ann = Annotation::single(g, context).unwrap();
        let p = locate(pred, context, Some(g)).unwrap();
        let pred = Prediction::from_span("q", context, p, 0.0).unwrap();
        (pred, ann)
    }

    #[test]
    fn partial_match_predicate() {
        assert!(is_partial_match(0, 0.5));
        assert!(!is_partial_match(1, 1.0));
        assert!(!is_partial_match(0, 0.0));
    }

    #[test]
    fn reference_selection() {
        let ctx = "a b c then x y";
        let anns = vec![
            Annotation::single(CharSpan::new(11, 14).unwrap(), ctx).unwrap(),
            Annotation::single(CharSpan::new(0, 5).unwrap(), ctx).unwrap(),
        ];
        let pred = Prediction { example_id: "q".into(), text: "b c".into(), span: None, score: 0.0 };
        assert_eq!(select_reference_annotation(&pred, &anns).unwrap().text(), "a b c");
        assert_eq!(select_reference_annotation(&pred, &anns[..1]).unwrap().text(), "x y");
        assert!(select_reference_annotation(&pred, &[]).is_err());

        // equal F1 (zero): earliest start wins regardless of list order
        let ctx = "aaaaa foo bar baz qux ddddddddddddddddddddddddddd zzz www";
        let a40 = Annotation::single(locate("zzz", ctx, None).unwrap(), ctx).unwrap();
        let a5 = Annotation::single(CharSpan::new(6, 9).unwrap(), ctx).unwrap();
        let pred = Prediction { example_id: "q".into(), text: "nothing".into(), span: None, score: 0.0 };
        let anns = vec![a40, a5.clone()];
        assert_eq!(select_reference_annotation(&pred, &anns).unwrap(), &a5);
    }

    #[test]
    fn table7_cases() {
        let ctx = "Title Winner : LAAB Crew From Team Sherif , 1st Runner-up : ADS kids From Team Sherif";
        let (p, g) = case(ctx, "LAAB Crew From Team Sherif", "LAAB Crew");
        assert_eq!(
            classify(&p, &g, ctx).unwrap(),
            Classification::Category(ErrorCategory::PredSubsetGT)
        );

        let ctx = "An unsaturated fat is a fat or fatty acid in which there is at least one double bond within the fatty acid chain.";
        let (p, g) = case(
            ctx,
            "at least one double bond",
            "An unsaturated fat is a fat or fatty acid in which there is at least one double bond",
        );
        assert_eq!(
            classify(&p, &g, ctx).unwrap(),
            Classification::Category(ErrorCategory::GTSubsetPred)
        );

        let ctx = "Freshwater algal blooms are the result of an excess of nutrients , particularly some phosphates. The excess";
        let (p, g) = case(
            ctx,
            "an excess of nutrients , particularly some phosphates",
            "Freshwater algal blooms are the result of an excess of nutrients",
        );
        assert_eq!(
            classify(&p, &g, ctx).unwrap(),
            Classification::Category(ErrorCategory::PartialOverlap)
        );
        assert_eq!(exact_match(&p.text, &[g.text()]).unwrap(), 0);
        assert!(f1_max(&p.text, &[g]).unwrap() > 0.0);
    }

    #[test]
    fn multi_span_checked_first() {
        let ctx = "x , y and z";
        let ann = Annotation::from_spans(
            vec![CharSpan::new(0, 1).unwrap(), CharSpan::new(10, 11).unwrap()],
            ctx,
        )
        .unwrap();
        let pred = Prediction::from_span("q", ctx, CharSpan::new(0, 1).unwrap(), 0.0).unwrap();
        assert_eq!(
            classify(&pred, &ann, ctx).unwrap(),
            Classification::Category(ErrorCategory::MultiSpanGT)
        );
    }

    #[test]
    fn other_occurrence_is_unresolved() {
        let ctx = "red fox and red hen";
        let ann = Annotation::single(locate("red hen", ctx, Some(CharSpan::new(12, 13).unwrap())).unwrap(), ctx).unwrap();
        let pred = Prediction::from_span("q", ctx, CharSpan::new(0, 3).unwrap(), 0.0).unwrap();
        assert_eq!(classify(&pred, &ann, ctx).unwrap(), Classification::UnresolvedTextOverlap);
    }

    #[test]
    fn swap_pred_and_gt() {
        let ctx = "one two three four five";
        let outer = CharSpan::new(4, 18).unwrap();
        let inner = CharSpan::new(8, 13).unwrap();
        let p_in = Prediction::from_span("q", ctx, inner, 0.0).unwrap();
        let g_out = Annotation::single(outer, ctx).unwrap();
        let p_out = Prediction::from_span("q", ctx, outer, 0.0).unwrap();
        let g_in = Annotation::single(inner, ctx).unwrap();
        assert_eq!(
            classify(&p_in, &g_out, ctx).unwrap(),
            Classification::Category(ErrorCategory::PredSubsetGT)
        );
        assert_eq!(
            classify(&p_out, &g_in, ctx).unwrap(),
            Classification::Category(ErrorCategory::GTSubsetPred)
        );
    }

    #[test]
    fn shift_invariance() {
        let ctx = "alpha beta gamma delta";
        let prefix = "some prefix text ";
        let shifted_ctx = format!("{prefix}{ctx}");
        let by = prefix.chars().count();
        for (p, g) in [((0, 10), (6, 16)), ((6, 22), (11, 16)), ((6, 10), (0, 16))] {
            let ps = CharSpan::new(p.0, p.1).unwrap();
            let gs = CharSpan::new(g.0, g.1).unwrap();
            let a = classify(
                &Prediction::from_span("q", ctx, ps, 0.0).unwrap(),
                &Annotation::single(gs, ctx).unwrap(),
                ctx,
            )
            .unwrap();
            let b = classify(
                &Prediction::from_span("q", &shifted_ctx, ps.shifted(by), 0.0).unwrap(),
                &Annotation::single(gs.shifted(by), &shifted_ctx).unwrap(),
                &shifted_ctx,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn distribution_singleton_and_empty() {
        let ctx = "LAAB Crew From Team Sherif";
        let (p, g) = case(ctx, "LAAB Crew From Team Sherif", "LAAB Crew");
        let anns = vec![g];
        let r = distribution(&[PartialCase { prediction: &p, annotations: &anns, context: ctx }]).unwrap();
        assert_eq!(r.pred_subset_gt, 1);
        assert_eq!(r.total, 1);
        assert_eq!(r.percent(ErrorCategory::PredSubsetGT), 100.0);
        assert_eq!(distribution(&[]).unwrap(), TaxonomyReport::default());
    }

    #[test]
    fn table_format_matches_published_counts() {
        let r = TaxonomyReport::from_counts(
            &[
                (ErrorCategory::GTSubsetPred, 165),
                (ErrorCategory::PredSubsetGT, 191),
                (ErrorCategory::PartialOverlap, 37),
                (ErrorCategory::MultiSpanGT, 194),
            ],
            0,
        );
        assert_eq!(r.total, 587);
        let table = r.to_table();
        let pct = |needle: &str| -> String {
            let line = table.lines().find(|l| l.contains(needle)).unwrap();
            line.split_whitespace().last().unwrap().to_string()
        };
        assert_eq!(pct("Single-Span GT"), "67");
        assert_eq!(pct("Prediction ⊂ GT"), "33");
        assert_eq!(pct("GT ⊂ Prediction"), "28");
        assert_eq!(pct("∩"), "6");
        assert_eq!(pct("Multi-Span GT"), "33");
        let csv = r.to_csv();
        assert!(csv.starts_with("category,count,percent\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
