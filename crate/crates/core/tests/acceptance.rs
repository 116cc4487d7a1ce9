//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits nonzero if any criterion failed.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spancorr::datagen::{generate, records_to_jsonl, to_records};
use spancorr::io::{labels_to_json, nbest_to_json, predictions_to_json, PredictionMap};
use spancorr::model::train::{example_gradient, example_loss, Optimizer};
use spancorr::model::{
    decode_nbest, ensemble_nbest, EncodedInput, ModelConfig, SpanLogits, SpanModel, TrainConfig, TrainingExample, Vocab,
};
use spancorr::parallel::Exec;
use spancorr::pipeline::{correct_map, evaluate, kfold_nbest, reader_nbest, top1, train_corrector, train_reader};
use spancorr::reporting::{category_correction_stats, change_stats, classify_partial_matches, taxonomy_report};
use spancorr::significance::{fisher_randomization, PairedScores, SigConfig};
use spancorr::span::{exact_match, f1_max, locate, token_f1, Annotation, CharSpan, MrcExample, Prediction};
use spancorr::synth::{flawed_reader, gen_corpus, ErrorInjectionConfig, SynthConfig};
use spancorr::taxonomy::{is_partial_match, Classification, ErrorCategory, PartialCase};

type Artifacts = Vec<(String, String)>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Suite {
    results: Vec<(u32, bool)>,
}

impl Suite {
    fn record(&mut self, id: u32, name: &str, limit: Option<Duration>, elapsed: Duration, o: Outcome) {
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = o.pass && in_time;
        let limit_note = match limit {
            Some(l) if !in_time => format!(", over the {}s limit", l.as_secs()),
            _ => String::new(),
        };
        println!(
            "{} criterion {id:>2}  {name}: {} [{:.1}s{limit_note}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
        self.results.push((id, pass));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn single_case(context: &str, gt: &str, pred: &str) -> (Prediction, Vec<Annotation>) {
    let g = locate(gt, context, None).unwrap();
    let p = locate(pred, context, Some(g)).unwrap();
    (
        Prediction::from_span("q", context, p, 0.0).unwrap(),
        vec![Annotation::single(g, context).unwrap()],
    )
}

fn classify_case(context: &str, gt: &str, pred: &str) -> Option<ErrorCategory> {
    let (p, anns) = single_case(context, gt, pred);
    let em = exact_match(&p.text, &[anns[0].text()]).unwrap();
    let f1 = f1_max(&p.text, &anns).unwrap();
    if !is_partial_match(em, f1) {
        return None;
    }
    match (PartialCase { prediction: &p, annotations: &anns, context }).classify().unwrap() {
        Classification::Category(c) => Some(c),
        Classification::UnresolvedTextOverlap => None,
    }
}

fn criterion_1() -> Outcome {
    let fixed = [
        (
            "... Title Winner : LAAB Crew From Team Sherif , 1st Runner-up : ADS kids From Team Sherif , 2nd Runner-up : Bipin and Princy From Team Jeffery ...",
            "LAAB Crew From Team Sherif",
            "LAAB Crew",
            ErrorCategory::PredSubsetGT,
        ),
        (
            "... An unsaturated fat is a fat or fatty acid in which there is at least one double bond within the fatty acid chain. A fatty acid chain is monounsaturated if it contains one double ...",
            "at least one double bond",
            "An unsaturated fat is a fat or fatty acid in which there is at least one double bond",
            ErrorCategory::GTSubsetPred,
        ),
        (
            "... colloquially as red tides. Freshwater algal blooms are the result of an excess of nutrients , particularly some phosphates. The excess of nutrients may originate from fertilizers ...",
            "an excess of nutrients , particularly some phosphates",
            "Freshwater algal blooms are the result of an excess of nutrients",
            ErrorCategory::PartialOverlap,
        ),
    ];
    // reader exact, corrector output becomes a partial match
    let broken = [
        (
            "... Cone cells, or cones, are one of three types of photoreceptor cells in the retina of mammalian eyes (e.g. the human eye). They are responsible for color vision ...",
            "in the retina",
            "retina",
            ErrorCategory::PredSubsetGT,
        ),
        (
            "... Jesse Frederick James Conaway (born 1948), known professionally as Jesse Frederick, is an American film and television composer and singer best known for writing ...",
            "Jesse Frederick James Conaway",
            "Jesse Frederick James Conaway (born 1948), known professionally as Jesse Frederick",
            ErrorCategory::GTSubsetPred,
        ),
    ];
    let mut ok = 0;
    for (ctx, gt, pred, want) in fixed {
        ok += usize::from(classify_case(ctx, gt, pred) == Some(want));
    }
    for (ctx, gt, pred, want) in broken {
        let reader_exact = exact_match(gt, &[gt]).unwrap() == 1;
        let g = locate(gt, ctx, None).unwrap();
        let ex = MrcExample {
            id: "q".into(),
            question: "q".into(),
            context: ctx.into(),
            ground_truths: vec![Annotation::single(g, ctx).unwrap()],
        };
        let r: PredictionMap = [("q".to_string(), Prediction::from_span("q", ctx, g, 0.0).unwrap())].into();
        let p = locate(pred, ctx, Some(g)).unwrap();
        let c: PredictionMap = [("q".to_string(), Prediction::from_span("q", ctx, p, 0.0).unwrap())].into();
        let stats = change_stats(std::slice::from_ref(&ex), &r, &c).unwrap();
        let introduced = reader_exact && stats.correct_to_incorrect == 1;
        ok += usize::from(introduced && classify_case(ctx, gt, pred) == Some(want));
    }
    outcome(ok == 5, format!("{ok}/5 fixture cases classified as expected"))
}

fn criterion_2() -> Outcome {
    // (prediction, gold, EM, F1), each worked out by hand
    let cases: [(&str, &str, u8, f64); 20] = [
        ("The Beatles", "Beatles", 1, 1.0),
        ("beatles!", "The Beatles", 1, 1.0),
        ("LAAB Crew", "LAAB Crew From Team Sherif", 0, 4.0 / 7.0),
        (
            "at least one double bond",
            "An unsaturated fat is a fat or fatty acid in which there is at least one double bond",
            0,
            10.0 / 21.0,
        ),
        ("cat", "dog", 0, 0.0),
        ("", "dog", 0, 0.0),
        ("", "", 1, 1.0),
        ("the", "a", 1, 1.0),
        ("a b c", "b c d", 0, 0.8),
        ("x y z", "y z w", 0, 2.0 / 3.0),
        ("New York, NY", "new york ny", 1, 1.0),
        ("red red blue", "red blue blue", 0, 2.0 / 3.0),
        ("1,000 people", "1000 people", 1, 1.0),
        ("Corvin of Dunmore", "Corvin", 0, 0.5),
        ("  extra   spaces ", "extra spaces", 1, 1.0),
        ("rock-and-roll", "rock and roll", 0, 0.0),
        ("U.S. Army", "US Army", 1, 1.0),
        ("an apple a day", "apple day", 1, 1.0),
        ("one two three four", "three four five six", 0, 0.5),
        ("Theatre", "the atre", 0, 0.0),
    ];
    let mut ok = 0;
    let mut bad = Vec::new();
    for (i, (p, g, em, f1)) in cases.iter().enumerate() {
        let got_em = exact_match(p, &[g]).unwrap();
        let got_f1 = token_f1(p, g);
        if got_em == *em && (got_f1 - f1).abs() <= 1e-9 {
            ok += 1;
        } else {
            bad.push(i);
        }
    }
    outcome(ok == 20, format!("{ok}/20 pairs match hand-computed EM/F1 {bad:?}"))
}

/// Input whose context positions are single characters of a synthetic
/// context; unmasked positions have no offset.
fn synthetic_input(mask: &[bool]) -> (EncodedInput, String) {
    let context: String = vec!["x"; mask.len()].join(" ");
    let offsets: Vec<Option<CharSpan>> = mask
        .iter()
        .enumerate()
        .map(|(i, m)| m.then(|| CharSpan::new(2 * i, 2 * i + 1).unwrap()))
        .collect();
    let input = EncodedInput {
        ids: vec![0; mask.len()],
        segments: vec![1; mask.len()],
        offsets,
        answer_mask: mask.to_vec(),
        delimiters: None,
        truncated_tokens: 0,
    };
    (input, context)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = 0;
    let mut sorted = true;
    for _ in 0..500 {
        let len = rng.random_range(1..=32usize);
        let mut mask: Vec<bool> = (0..len).map(|_| rng.random_bool(0.8)).collect();
        let forced = rng.random_range(0..len);
        mask[forced] = true;
        // small integer logits make ties common
        let start: Vec<f64> = (0..len).map(|_| rng.random_range(-4..=4) as f64).collect();
        let end: Vec<f64> = (0..len).map(|_| rng.random_range(-4..=4) as f64).collect();
        let max_len = rng.random_range(1..=len.max(1));
        let logits = SpanLogits { start: start.clone(), end: end.clone() };
        let (input, context) = synthetic_input(&mask);
        let nbest = decode_nbest(&logits, &input, &context, "x", 10, max_len).unwrap();

        let mut best: Option<(f64, usize, usize)> = None;
        for s in 0..len {
            for e in s..len {
                if !mask[s] || !mask[e] || e - s + 1 > max_len {
                    continue;
                }
                let sc = start[s] + end[e];
                let better = match best {
                    None => true,
                    Some((bs, bst, be)) => sc > bs || (sc == bs && (s < bst || (s == bst && e - s < be - bst))),
                };
                if better {
                    best = Some((sc, s, e));
                }
            }
        }
        let (bs, s, e) = best.unwrap();
        let want = CharSpan::new(2 * s, 2 * e + 1).unwrap();
        if nbest.first().is_some_and(|p| p.span == Some(want) && p.score == bs) {
            ok += 1;
        }
        sorted &= nbest.windows(2).all(|w| w[0].score >= w[1].score);
    }
    outcome(ok == 500 && sorted, format!("top-1 matches exhaustive argmax in {ok}/500, n-best sorted: {sorted}"))
}

fn criterion_4() -> Outcome {
    let exhaustive = SigConfig::default();
    let run = |a: Vec<f64>, b: Vec<f64>, cfg: &SigConfig| {
        fisher_randomization(&PairedScores::unnamed(a, b).unwrap(), cfg, Exec::default()).unwrap()
    };
    let same = run(vec![1.0, 0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0, 1.0], &exhaustive).p;
    let fixture = run(vec![1.0; 4], vec![0.0; 4], &exhaustive).p;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut close = 0;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let a: Vec<f64> = (0..12).map(|_| rng.random_range(0..2) as f64).collect();
        let b: Vec<f64> = (0..12).map(|_| rng.random_range(0..2) as f64).collect();
        let exact = run(a.clone(), b.clone(), &exhaustive).p;
        let mc = run(a, b, &SigConfig { resamples: 10_000, seed: 100 + i, exhaustive_limit: 0 }).p;
        worst = worst.max((mc - exact).abs());
        close += usize::from((mc - exact).abs() <= 0.02);
    }
    let pass = same == 1.0 && fixture == 0.125 && close >= 48;
    outcome(
        pass,
        format!("identical p={same}, fixture p={fixture}, Monte Carlo within 0.02 in {close}/50 (max gap {worst:.4})"),
    )
}

fn tiny_model(seed: u64) -> ModelConfig {
    ModelConfig { dim: 16, heads: 2, ff_dim: 32, layers: 1, max_seq_len: 128, dropout: 0.0, seed, ..Default::default() }
}

fn corpus(n: usize, seed: u64, prefix: &str) -> Vec<MrcExample> {
    gen_corpus(&SynthConfig { n_examples: n, seed, id_prefix: prefix.into(), ..Default::default() }).unwrap()
}

fn criterion_5() -> (Outcome, Artifacts) {
    let examples = corpus(100, 5, "c5");
    let train_cfg = TrainConfig { epochs: 2, optimizer: Optimizer::Adam, learning_rate: 0.003, seed: 5, ..Default::default() };
    let (nbest, _) = kfold_nbest(&examples, 5, 5, &tiny_model(5), &train_cfg, 20, Exec::default()).unwrap();
    let nb: HashMap<String, Vec<Prediction>> = nbest.clone().into_iter().collect();
    let (corr, summary) = generate(&examples, &nb, 2, Exec::default()).unwrap();
    let records = to_records(&examples, &corr).unwrap();

    let by_id: HashMap<&str, &MrcExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let usable: Vec<&MrcExample> = examples.iter().filter(|e| e.first_single_span().is_some()).collect();
    let mut problems = Vec::new();
    for ex in &usable {
        let mine: Vec<_> = records.iter().filter(|r| r.source_id == ex.id).collect();
        let identity = mine.iter().filter(|r| r.is_identity).count();
        if identity != 1 {
            problems.push(format!("{}: {identity} identity records", ex.id));
        }
        if mine.len() - identity > 2 {
            problems.push(format!("{}: {} corrections", ex.id, mine.len() - identity));
        }
    }
    for r in &records {
        let ex = by_id[r.source_id.as_str()];
        let (Ok(m), Ok(t)) = (r.marked(), r.target()) else {
            problems.push(format!("{}: invalid span", r.source_id));
            continue;
        };
        if t != ex.first_single_span().unwrap().first_span() || r.is_identity != (m == t) {
            problems.push(format!("{}: wrong target or identity flag", r.source_id));
        }
        let text = spancorr::span::char_slice(&ex.context, m).unwrap();
        if !r.is_identity && exact_match(text, &ex.gt_texts()).unwrap() != 0 {
            problems.push(format!("{}: correction marks a correct answer", r.source_id));
        }
    }
    let pass = problems.is_empty() && summary.usable == usable.len() && nbest.len() == 100;
    let detail = format!(
        "{} records: {} identity for {} usable examples, {} corrections; problems: {}",
        records.len(),
        summary.identity,
        usable.len(),
        summary.corrections,
        if problems.is_empty() { "none".to_string() } else { problems.join("; ") }
    );
    let artifacts = vec![
        ("c5.nbest.json".into(), nbest_to_json(&nbest).unwrap()),
        ("c5.records.jsonl".into(), records_to_jsonl(&records).unwrap()),
    ];
    (outcome(pass, detail), artifacts)
}

fn criterion_6() -> (Outcome, Artifacts) {
    let examples = corpus(2000, 6, "c6");
    let cfg = ErrorInjectionConfig { seed: 6, ..Default::default() };
    let out = flawed_reader(&examples, &cfg).unwrap();
    let preds: PredictionMap = examples.iter().map(|e| e.id.clone()).zip(out.predictions.clone()).collect();
    let (classified, unresolved) = classify_partial_matches(&examples, &preds).unwrap();
    let by_id: HashMap<&str, &MrcExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let (mut single, mut agree) = (0, 0);
    for (id, injected) in &out.labels {
        if by_id[id.as_str()].ground_truths[0].is_multi_span() {
            continue;
        }
        single += 1;
        agree += usize::from(classified.get(id) == Some(injected));
    }
    let report = taxonomy_report(&examples, &preds).unwrap();
    let mut worst: f64 = 0.0;
    for c in ErrorCategory::ALL {
        worst = worst.max((report.percent(c) - 100.0 * cfg.rate(c)).abs());
    }
    let pass = single > 0 && agree == single && unresolved == 0 && worst <= 2.0;
    let detail = format!(
        "single-span agreement {agree}/{single}; distribution {:.1}/{:.1}/{:.1}/{:.1} vs 33/28/6/33, max deviation {worst:.2}pp",
        report.percent(ErrorCategory::PredSubsetGT),
        report.percent(ErrorCategory::GTSubsetPred),
        report.percent(ErrorCategory::PartialOverlap),
        report.percent(ErrorCategory::MultiSpanGT)
    );
    let artifacts = vec![
        ("c6.labels.json".into(), labels_to_json(&out.labels).unwrap()),
        ("c6.predictions.json".into(), predictions_to_json(&preds).unwrap()),
        ("c6.taxonomy.csv".into(), report.to_csv()),
    ];
    (outcome(pass, detail), artifacts)
}

fn model_config(seed: u64) -> ModelConfig {
    ModelConfig { dim: 32, heads: 2, ff_dim: 64, layers: 2, max_seq_len: 128, dropout: 0.1, seed, ..Default::default() }
}

fn train_config(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 8, batch_size: 32, learning_rate: 0.003, warmup: 0.1, optimizer: Optimizer::Adam, seed, max_grad_norm: 1.0 }
}

struct SeedRun {
    dev: Vec<MrcExample>,
    reader: PredictionMap,
    corrected: PredictionMap,
}

fn correction_run(seed: u64) -> SeedRun {
    let train = corpus(2000, seed, "train");
    let dev = corpus(500, seed + 1, "dev");
    let inj = ErrorInjectionConfig { partial_rate: 0.4, ..Default::default() };
    let train_flawed = flawed_reader(&train, &ErrorInjectionConfig { seed, ..inj.clone() }).unwrap();
    let dev_flawed = flawed_reader(&dev, &ErrorInjectionConfig { seed: seed + 1, ..inj }).unwrap();
    // the simulated reader stands in for the out-of-fold readers
    let nb: HashMap<String, Vec<Prediction>> = train.iter().map(|e| e.id.clone()).zip(train_flawed.nbest).collect();
    let (corr, _) = generate(&train, &nb, 2, Exec::default()).unwrap();
    let records = to_records(&train, &corr).unwrap();
    let corrector = train_corrector(&records, &model_config(seed), &train_config(seed), Exec::default()).unwrap();
    let reader: PredictionMap = dev.iter().map(|e| e.id.clone()).zip(dev_flawed.predictions).collect();
    let corrected = correct_map(&dev, &reader, &corrector.model, Exec::default()).unwrap();
    SeedRun { dev, reader, corrected }
}

fn criterion_7(runs: &[SeedRun]) -> (Outcome, Artifacts) {
    let mut gains = Vec::new();
    let mut artifacts = Vec::new();
    let mut parts = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let before = evaluate(&r.dev, &r.reader).unwrap().exact_match;
        let after = evaluate(&r.dev, &r.corrected).unwrap().exact_match;
        gains.push(after - before);
        parts.push(format!("{before:.1}->{after:.1}"));
        let (labels, _) = classify_partial_matches(&r.dev, &r.reader).unwrap();
        artifacts.push((format!("c7.seed{i}.corrected.json"), predictions_to_json(&r.corrected).unwrap()));
        artifacts.push((format!("c7.seed{i}.changes.csv"), change_stats(&r.dev, &r.reader, &r.corrected).unwrap().to_csv()));
        artifacts.push((
            format!("c7.seed{i}.categories.csv"),
            category_correction_stats(&labels, &r.corrected, &r.dev).unwrap().to_csv(),
        ));
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    (outcome(mean >= 5.0, format!("dev EM {}, mean gain {mean:+.1} (need >= +5.0)", parts.join(", "))), artifacts)
}

fn criterion_8(runs: &[SeedRun]) -> (Outcome, Artifacts) {
    let (mut kept, mut total) = (0, 0);
    for r in runs {
        for ex in &r.dev {
            let gts = ex.gt_texts();
            if exact_match(&r.reader[&ex.id].text, &gts).unwrap() == 1 {
                total += 1;
                kept += exact_match(&r.corrected[&ex.id].text, &gts).unwrap() as usize;
            }
        }
    }
    let rate = 100.0 * kept as f64 / total.max(1) as f64;
    let detail = format!("{kept}/{total} exact reader answers kept exact ({rate:.1}%, need >= 90%)");
    (outcome(rate >= 90.0, detail.clone()), vec![("c8.summary.txt".into(), detail)])
}

fn criterion_9() -> (Outcome, Artifacts) {
    let train = corpus(2000, 9, "train");
    let dev = corpus(500, 10, "dev");
    let vocab = Vocab::build(&train, 1);
    let tc = |seed| TrainConfig { epochs: 6, ..train_config(seed) };
    let a = train_reader(&train, vocab.clone(), &model_config(21), &tc(21), Exec::default()).unwrap().model;
    let b = train_reader(&train, vocab, &model_config(22), &tc(22), Exec::default()).unwrap().model;
    let pa = top1(&reader_nbest(&a, &dev, 1, Exec::default()).unwrap());
    let pb = top1(&reader_nbest(&b, &dev, 1, Exec::default()).unwrap());
    let ens = |models: &[&SpanModel]| -> PredictionMap {
        dev.iter()
            .map(|e| (e.id.clone(), ensemble_nbest(models, e, 1).unwrap().remove(0)))
            .collect()
    };
    let self_ens = ens(&[&a, &a]);
    let same = dev.iter().filter(|e| self_ens[&e.id].span == pa[&e.id].span).count();
    let pab = ens(&[&a, &b]);
    let (ea, eb, eab) = (
        evaluate(&dev, &pa).unwrap().exact_match,
        evaluate(&dev, &pb).unwrap().exact_match,
        evaluate(&dev, &pab).unwrap().exact_match,
    );
    let pass = same == dev.len() && eab >= ea.min(eb);
    let detail = format!("self-ensemble identical on {same}/{}; EM a={ea:.1} b={eb:.1} ensemble={eab:.1}", dev.len());
    let artifacts = vec![
        ("c9.a.json".into(), predictions_to_json(&pa).unwrap()),
        ("c9.b.json".into(), predictions_to_json(&pb).unwrap()),
        ("c9.ensemble.json".into(), predictions_to_json(&pab).unwrap()),
    ];
    (outcome(pass, detail), artifacts)
}

fn bump(model: &mut SpanModel, mut k: usize, d: f64) {
    for s in model.params.slices_mut() {
        if k < s.len() {
            s[k] += d;
            return;
        }
        k -= s.len();
    }
}

fn criterion_11() -> Outcome {
    let context = "the winner of the iron league was Corvin of Dunmore in the spring .";
    let g = locate("Corvin of Dunmore", context, None).unwrap();
    let ex = MrcExample {
        id: "g".into(),
        question: "who was the winner of the iron league".into(),
        context: context.into(),
        ground_truths: vec![Annotation::single(g, context).unwrap()],
    };
    let cfg = ModelConfig { dim: 8, heads: 1, ff_dim: 16, layers: 1, max_seq_len: 64, dropout: 0.0, seed: 11, ..Default::default() };
    let mut model = SpanModel::new(cfg, Vocab::build(std::slice::from_ref(&ex), 1)).unwrap();
    let marked = locate("Corvin", context, None).unwrap();
    let t = TrainingExample::new(&model, &ex.question, context, Some(marked), g).unwrap().unwrap();
    let (_, grads) = example_gradient(&model, &t, None);
    let analytic: Vec<f64> = grads.named_slices().into_iter().flat_map(|(_, s)| s.to_vec()).collect();
    let n = analytic.len();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = 1000;
    let h = 1e-5;
    let mut ok = 0;
    for _ in 0..samples {
        let k = rng.random_range(0..n);
        bump(&mut model, k, h);
        let up = example_loss(&model, &t);
        bump(&mut model, k, -2.0 * h);
        let down = example_loss(&model, &t);
        bump(&mut model, k, h);
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        // gradients below 1e-6 in magnitude are compared absolutely
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        ok += usize::from(rel <= 1e-3);
    }
    let frac = ok as f64 / samples as f64;
    outcome(frac >= 0.99, format!("{ok}/{samples} sampled parameters within 1e-3 relative error ({n} total)"))
}

fn main() {
    let mut suite = Suite { results: Vec::new() };
    let secs = Duration::from_secs;

    let (o, t) = timed(criterion_1);
    suite.record(1, "taxonomy fixtures", Some(secs(1)), t, o);
    let (o, t) = timed(criterion_2);
    suite.record(2, "metric oracle", Some(secs(1)), t, o);
    let (o, t) = timed(criterion_3);
    suite.record(3, "decoder oracle", Some(secs(5)), t, o);
    let (o, t) = timed(criterion_4);
    suite.record(4, "randomization test oracle", Some(secs(30)), t, o);

    let mut first: Artifacts = Vec::new();
    let ((o, a), t) = timed(criterion_5);
    first.extend(a);
    suite.record(5, "corrector data contract", Some(secs(60)), t, o);
    let ((o, a), t) = timed(criterion_6);
    first.extend(a);
    suite.record(6, "injection/classification agreement", Some(secs(30)), t, o);
    let (runs, t7) = timed(|| [1, 2, 3].map(correction_run));
    let (o, a) = criterion_7(&runs);
    first.extend(a);
    suite.record(7, "end-to-end correction gain", Some(secs(600)), t7, o);
    let ((o, a), t) = timed(|| criterion_8(&runs));
    first.extend(a);
    suite.record(8, "identity preservation", None, t, o);
    let ((o, a), t) = timed(criterion_9);
    first.extend(a);
    suite.record(9, "ensembling sanity", Some(secs(120)), t, o);

    let (second, t) = timed(|| {
        let mut second: Artifacts = Vec::new();
        second.extend(criterion_5().1);
        second.extend(criterion_6().1);
        let runs = [1, 2, 3].map(correction_run);
        second.extend(criterion_7(&runs).1);
        second.extend(criterion_8(&runs).1);
        second.extend(criterion_9().1);
        second
    });
    let a: BTreeMap<_, _> = first.into_iter().collect();
    let b: BTreeMap<_, _> = second.into_iter().collect();
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b.get(*k) != Some(v)).map(|(k, _)| k).collect();
    let detail = format!(
        "{} artifact files compared, differing: {}",
        a.len(),
        if differing.is_empty() { "none".to_string() } else { format!("{differing:?}") }
    );
    suite.record(10, "determinism", None, t, outcome(differing.is_empty() && a.len() == b.len(), detail));

    let (o, t) = timed(criterion_11);
    suite.record(11, "gradient check", Some(secs(60)), t, o);

    let failed: Vec<u32> = suite.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!("{} of {} criteria passed", suite.results.len() - failed.len(), suite.results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
