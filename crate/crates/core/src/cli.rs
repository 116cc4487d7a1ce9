//! Command-line front end. Every command reads its inputs, writes its outputs
//! with deterministic ordering and prints a short JSON summary on stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::datagen::{generate, records_from_jsonl, records_to_jsonl, to_records};
use crate::error::{Error, Result};
use crate::io::{
    labels_to_json, read_dataset, read_labels, read_nbest, read_predictions, read_text, resolve_spans,
    write_dataset, write_json, write_nbest, write_predictions, write_text, NBestMap, PredictionMap,
};
use crate::model::checkpoint;
use crate::model::train::Optimizer;
use crate::model::{ModelConfig, SpanModel, TrainConfig};
use crate::parallel::{set_jobs, Exec};
use crate::pipeline::{
    correct_map, evaluate, kfold_nbest, per_example_scores, reader_nbest, top1, train_corrector, train_reader,
};
use crate::reporting::{category_correction_stats, change_stats, classify_partial_matches, em_csv, em_table, taxonomy_report};
use crate::significance::{fisher_randomization, PairedScores, SigConfig};
use crate::synth::{flawed_reader, gen_corpus, ErrorInjectionConfig, SynthConfig};

/// Settings shared by all commands, loadable from a TOML file. Flags win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// When set, replaces the seed of every component.
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores, 1 runs sequentially.
    pub jobs: usize,
    pub k: usize,
    pub folds: usize,
    pub n_best: usize,
    pub train_size: usize,
    pub dev_size: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub corpus: SynthConfig,
    pub injection: ErrorInjectionConfig,
    pub sigtest: SigConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            jobs: 0,
            k: 2,
            folds: 5,
            n_best: 20,
            train_size: 2000,
            dev_size: 500,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            corpus: SynthConfig::default(),
            injection: ErrorInjectionConfig::default(),
            sigtest: SigConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string().replace('\n', " ")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config("folds must be >= 2"));
        }
        if self.n_best == 0 {
            return Err(Error::config("n_best must be >= 1"));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.corpus.validate()?;
        self.injection.validate()
    }

    fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.model.seed = s;
            self.train.seed = s;
            self.corpus.seed = s;
            self.injection.seed = s;
            self.sigtest.seed = s;
        }
    }

    pub fn exec(&self) -> Exec {
        match self.jobs {
            1 => Exec::Sequential,
            _ => Exec::default(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spancorr", version, about = "Reader/corrector answer span correction for extractive QA")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub ff_dim: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    /// Default 30.
    #[arg(long)]
    pub max_query_len: Option<usize>,
    #[arg(long)]
    pub max_answer_len: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Default 1.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Default 32.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Warmup fraction of all steps. Default 0.1.
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/dev sets plus flawed-reader predictions and labels.
    GenCorpus {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        dev_size: Option<usize>,
        /// Weights for list, qualified and plain answers, comma separated.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        multi_span_fraction: Option<f64>,
        #[arg(long)]
        partial_rate: Option<f64>,
    },
    /// Train a reader, or with --kfold produce out-of-fold n-best lists.
    TrainReader {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint path (plain mode).
        #[arg(long, required_unless_present = "kfold")]
        out: Option<PathBuf>,
        #[arg(long)]
        kfold: bool,
        /// N-best output (k-fold mode).
        #[arg(long, required_if_eq("kfold", "true"))]
        nbest_out: Option<PathBuf>,
        /// Default 5.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        n_best: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Run a reader checkpoint over a dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nbest_out: Option<PathBuf>,
        #[arg(long)]
        n_best: Option<usize>,
    },
    /// Build corrector training records from n-best reader predictions.
    GenCorrectorData {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        nbest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Incorrect predictions per example. Default 2.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train a corrector on a record file.
    TrainCorrector {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Re-predict answers with the reader's span delimited.
    Correct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// EM/F1 of a prediction file.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Taxonomy, change and per-category correction reports.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        reader: PathBuf,
        #[arg(long)]
        corrector: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Use these category labels instead of classifying reader errors.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Paired randomization test between two prediction files.
    Sigtest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        exhaustive_limit: Option<usize>,
        #[arg(long, value_enum, default_value = "em")]
        metric: Metric,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Em,
    F1,
}

fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

impl ModelArgs {
    fn apply(&self, m: &mut ModelConfig) {
        set(&mut m.layers, self.layers);
        set(&mut m.heads, self.heads);
        set(&mut m.dim, self.dim);
        set(&mut m.ff_dim, self.ff_dim);
        set(&mut m.max_seq_len, self.max_seq_len);
        set(&mut m.max_query_len, self.max_query_len);
        set(&mut m.max_answer_len, self.max_answer_len);
        set(&mut m.dropout, self.dropout);
    }
}

impl TrainArgs {
    fn apply(&self, t: &mut TrainConfig) {
        set(&mut t.epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.learning_rate, self.lr);
        set(&mut t.warmup, self.warmup);
        set(&mut t.max_grad_norm, self.max_grad_norm);
        if let Some(o) = self.optimizer {
            t.optimizer = match o {
                OptimizerArg::Sgd => Optimizer::Sgd,
                OptimizerArg::Adam => Optimizer::Adam,
            };
        }
    }
}

fn require_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::data(format!("input file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn load_model(path: &Path) -> Result<SpanModel> {
    checkpoint::from_json(&read_text(path)?)
}

fn load_predictions(path: &Path, examples: &[crate::span::MrcExample]) -> Result<PredictionMap> {
    let mut p = read_predictions(path)?;
    resolve_spans(&mut p, examples)?;
    Ok(p)
}

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    final_loss: Option<f64>,
    rejected: usize,
    examples: usize,
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("usage: {first}");
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}: {}", e.tag(), e.detail().replace('\n', " "));
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => {
            require_inputs(&[p]).map_err(|_| Error::config(format!("config file {} does not exist", p.display())))?;
            PipelineConfig::from_toml(&read_text(p)?)?
        }
        None => PipelineConfig::default(),
    };
    set(&mut cfg.jobs, cli.jobs);
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    cfg.apply_seed();
    if cfg.jobs > 1 {
        set_jobs(cfg.jobs);
    }

    match cli.command {
        Command::GenCorpus { out_dir, train_size, dev_size, weights, multi_span_fraction, partial_rate } => {
            set(&mut cfg.train_size, train_size);
            set(&mut cfg.dev_size, dev_size);
            if let Some(w) = weights {
                cfg.corpus.weights = w
                    .try_into()
                    .map_err(|_| Error::config("--weights takes exactly three values"))?;
            }
            set(&mut cfg.corpus.multi_span_fraction, multi_span_fraction);
            set(&mut cfg.injection.partial_rate, partial_rate);
            cfg.validate()?;
            gen_corpus_cmd(&cfg, &out_dir)
        }
        Command::TrainReader { data, out, kfold, nbest_out, folds, n_best, model, train } => {
            require_inputs(&[&data])?;
            set(&mut cfg.folds, folds);
            set(&mut cfg.n_best, n_best);
            model.apply(&mut cfg.model);
            train.apply(&mut cfg.train);
            cfg.validate()?;
            let examples = read_dataset(&data)?;
            let exec = cfg.exec();
            if kfold {
                let nbest_out = nbest_out.ok_or_else(|| Error::config("--kfold needs --nbest-out"))?;
                let (nb, summary) = kfold_nbest(&examples, cfg.folds, cfg.train.seed, &cfg.model, &cfg.train, cfg.n_best, exec)?;
                write_nbest(&nbest_out, &nb)?;
                print_json(&summary)
            } else {
                let out = out.ok_or_else(|| Error::config("--out is required"))?;
                let vocab = crate::model::Vocab::build(&examples, 1);
                let t = train_reader(&examples, vocab, &cfg.model, &cfg.train, exec)?;
                write_text(&out, &checkpoint::to_json(&t.model)?)?;
                print_json(&TrainSummary {
                    steps: t.report.steps,
                    final_loss: t.report.losses.last().copied(),
                    rejected: t.rejected,
                    examples: examples.len(),
                })
            }
        }
        Command::Predict { model, data, out, nbest_out, n_best } => {
            require_inputs(&[&model, &data])?;
            set(&mut cfg.n_best, n_best);
            let m = load_model(&model)?;
            let examples = read_dataset(&data)?;
            let nb = reader_nbest(&m, &examples, cfg.n_best.max(1), cfg.exec())?;
            let preds = top1(&nb);
            if preds.len() != examples.len() {
                return Err(Error::data(format!(
                    "{} examples have no valid span",
                    examples.len() - preds.len()
                )));
            }
            write_predictions(&out, &preds)?;
            if let Some(p) = nbest_out {
                write_nbest(&p, &nb)?;
            }
            print_json(&BTreeMap::from([("predictions", preds.len())]))
        }
        Command::GenCorrectorData { data, nbest, out, k } => {
            require_inputs(&[&data, &nbest])?;
            set(&mut cfg.k, k);
            let examples = read_dataset(&data)?;
            let nb: NBestMap = read_nbest(&nbest)?;
            let ids: std::collections::BTreeSet<&str> = examples.iter().map(|e| e.id.as_str()).collect();
            if let Some(extra) = nb.keys().find(|k| !ids.contains(k.as_str())) {
                return Err(Error::data(format!("n-best file has unknown id {extra:?}")));
            }
            let nb_map = nb.into_iter().collect();
            let (corr, summary) = generate(&examples, &nb_map, cfg.k, cfg.exec())?;
            let records = to_records(&examples, &corr)?;
            write_text(&out, &records_to_jsonl(&records)?)?;
            print_json(&summary)
        }
        Command::TrainCorrector { records, out, model, train } => {
            require_inputs(&[&records])?;
            model.apply(&mut cfg.model);
            train.apply(&mut cfg.train);
            cfg.validate()?;
            let recs = records_from_jsonl(&read_text(&records)?)?;
            let t = train_corrector(&recs, &cfg.model, &cfg.train, cfg.exec())?;
            write_text(&out, &checkpoint::to_json(&t.model)?)?;
            print_json(&TrainSummary {
                steps: t.report.steps,
                final_loss: t.report.losses.last().copied(),
                rejected: t.rejected,
                examples: recs.len(),
            })
        }
        Command::Correct { model, data, predictions, out } => {
            require_inputs(&[&model, &data, &predictions])?;
            let m = load_model(&model)?;
            let examples = read_dataset(&data)?;
            let reader = load_predictions(&predictions, &examples)?;
            let corrected = correct_map(&examples, &reader, &m, cfg.exec())?;
            write_predictions(&out, &corrected)?;
            print_json(&BTreeMap::from([("predictions", corrected.len())]))
        }
        Command::Evaluate { data, predictions, out } => {
            require_inputs(&[&data, &predictions])?;
            let examples = read_dataset(&data)?;
            let preds = load_predictions(&predictions, &examples)?;
            let summary = evaluate(&examples, &preds)?;
            if let Some(p) = out {
                write_json(&p, &summary)?;
            }
            print_json(&summary)
        }
        Command::Analyze { data, reader, corrector, out_dir, labels } => {
            require_inputs(&[&data, &reader, &corrector])?;
            if let Some(l) = &labels {
                require_inputs(&[l])?;
            }
            let examples = read_dataset(&data)?;
            let r = load_predictions(&reader, &examples)?;
            let c = load_predictions(&corrector, &examples)?;
            analyze_cmd(&examples, &r, &c, labels.as_deref(), &out_dir)
        }
        Command::Sigtest { data, a, b, resamples, exhaustive_limit, metric, out } => {
            require_inputs(&[&data, &a, &b])?;
            set(&mut cfg.sigtest.resamples, resamples);
            set(&mut cfg.sigtest.exhaustive_limit, exhaustive_limit);
            let examples = read_dataset(&data)?;
            let pa = per_example_scores(&examples, &load_predictions(&a, &examples)?)?;
            let pb = per_example_scores(&examples, &load_predictions(&b, &examples)?)?;
            let pick = |s: &(f64, f64)| if metric == Metric::Em { s.0 } else { s.1 };
            let scores = PairedScores::new(
                examples.iter().map(|e| e.id.clone()).collect(),
                pa.iter().map(pick).collect(),
                pb.iter().map(pick).collect(),
            )?;
            let result = fisher_randomization(&scores, &cfg.sigtest, cfg.exec())?;
            if let Some(p) = out {
                write_json(&p, &result)?;
            }
            print_json(&result)
        }
    }
}

fn gen_corpus_cmd(cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let splits = [("train", cfg.train_size, 0u64), ("dev", cfg.dev_size, 1u64)];
    let mut summary = BTreeMap::new();
    for (name, size, offset) in splits {
        let corpus_cfg = SynthConfig {
            n_examples: size,
            seed: cfg.corpus.seed.wrapping_add(offset),
            id_prefix: name.to_string(),
            ..cfg.corpus.clone()
        };
        let examples = gen_corpus(&corpus_cfg)?;
        let inj = ErrorInjectionConfig { seed: cfg.injection.seed.wrapping_add(offset), ..cfg.injection.clone() };
        let flawed = flawed_reader(&examples, &inj)?;
        write_dataset(&out_dir.join(format!("{name}.json")), &examples)?;
        write_text(&out_dir.join(format!("{name}.labels.json")), &labels_to_json(&flawed.labels)?)?;
        let nb: NBestMap = examples.iter().map(|e| e.id.clone()).zip(flawed.nbest).collect();
        write_nbest(&out_dir.join(format!("{name}.flawed.nbest.json")), &nb)?;
        write_predictions(&out_dir.join(format!("{name}.flawed.predictions.json")), &top1(&nb))?;
        summary.insert(name, flawed.summary);
    }
    print_json(&summary)
}

fn analyze_cmd(
    examples: &[crate::span::MrcExample],
    reader: &PredictionMap,
    corrector: &PredictionMap,
    labels: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let taxonomy = taxonomy_report(examples, reader)?;
    let changes = change_stats(examples, reader, corrector)?;
    let labels = match labels {
        Some(p) => read_labels(p)?,
        None => classify_partial_matches(examples, reader)?.0,
    };
    let categories = category_correction_stats(&labels, corrector, examples)?;
    let rows = vec![("reader".to_string(), evaluate(examples, reader)?), ("corrector".to_string(), evaluate(examples, corrector)?)];
    let files = [
        ("taxonomy.txt", taxonomy.to_table()),
        ("taxonomy.csv", taxonomy.to_csv()),
        ("changes.txt", changes.to_table()),
        ("changes.csv", changes.to_csv()),
        ("categories.txt", categories.to_table()),
        ("categories.csv", categories.to_csv()),
        ("summary.txt", em_table(&rows)),
        ("summary.csv", em_csv(&rows)),
    ];
    for (name, text) in &files {
        write_text(&out_dir.join(name), text)?;
    }
    print_json(&BTreeMap::from([
        ("reader_em", rows[0].1.exact_match),
        ("corrector_em", rows[1].1.exact_match),
        ("changed", changes.changed as f64),
    ]))
}
