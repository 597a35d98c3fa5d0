//! Command-line orchestration: synthetic corpus generation, augmentation,
//! training across seeds, and metric reporting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{run_pipeline, write_rejects, AugmentConfig, AugmentError};
use crate::corpus::{
    generate_synthetic, load_dataset, save_dataset, split_dataset, CaseDocument, CorpusError,
    DatasetSplit, ScoreDistribution, Source, SynthConfig,
};
use crate::curriculum::{
    run_curriculum, write_bin_audit, CurriculumConfig, CurriculumError,
};
use crate::eval::{ece, macro_f1, mae_mse, mean_stddev, EvalError, PredictionRecord};
use crate::model::{
    train, EncoderConfig, IntermConfig, Mode, Model, ModelConfig, ModelError, Pooling, SelectBy,
    TokenVocab, TrainConfig,
};
use crate::rules::{builtin, RuleSet};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Declarative run configuration
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    /// Clean training documents only.
    Clean,
    /// Augmented documents only.
    Augmented,
    /// Seed-shuffled concatenation of clean and augmented documents.
    Mix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSettings {
    pub num_docs: usize,
    pub noise_rate: f64,
    pub seed: u64,
    #[serde(default = "default_vocabulary_size")]
    pub vocabulary_size: usize,
    /// (train, validation, test) sizes; must sum to num_docs.
    pub split: (usize, usize, usize),
}

fn default_vocabulary_size() -> usize {
    24
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub clean_train: Option<PathBuf>,
    pub clean_validation: Option<PathBuf>,
    pub clean_test: Option<PathBuf>,
    pub augmented: Option<PathBuf>,
    pub pool: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSettings {
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    pub max_output: usize,
    pub seed: u64,
}

fn default_top_k() -> usize {
    3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    pub mode: Mode,
    #[serde(default = "default_model_dim")]
    pub model_dim: usize,
    #[serde(default = "default_num_layers")]
    pub num_layers: usize,
    #[serde(default = "default_num_heads")]
    pub num_heads: usize,
    #[serde(default = "default_ff_dim")]
    pub feedforward_dim: usize,
    #[serde(default = "default_max_seq")]
    pub max_sequence_length: usize,
    #[serde(default = "default_vocab_cap")]
    pub vocab_cap: usize,
    #[serde(default)]
    pub interm: Option<IntermConfig>,
    #[serde(default = "default_pooling")]
    pub pooling: Pooling,
    #[serde(default)]
    pub teacher_forcing: bool,
}

fn default_model_dim() -> usize {
    64
}
fn default_num_layers() -> usize {
    2
}
fn default_num_heads() -> usize {
    4
}
fn default_ff_dim() -> usize {
    128
}
fn default_max_seq() -> usize {
    128
}
fn default_vocab_cap() -> usize {
    512
}
fn default_pooling() -> Pooling {
    Pooling::Mean
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta")]
    pub smooth_l1_beta: f64,
    #[serde(default = "default_select_by")]
    pub select_by: SelectBy,
}

fn default_batch_size() -> usize {
    8
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_beta() -> f64 {
    1.0
}
fn default_select_by() -> SelectBy {
    SelectBy::MacroF1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_ruleset")]
    pub ruleset: String,
    #[serde(default)]
    pub paths: DataPaths,
    #[serde(default)]
    pub synth: Option<SynthSettings>,
    #[serde(default)]
    pub augment: Option<AugmentSettings>,
    #[serde(default)]
    pub model: Option<ModelSettings>,
    #[serde(default)]
    pub split: Option<SplitChoice>,
    #[serde(default)]
    pub train: Option<TrainSettings>,
    #[serde(default)]
    pub curriculum: Option<CurriculumConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_ruleset() -> String {
    "reconciled".to_string()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let content = fs::read_to_string(path).map_err(io_err(path))?;
        let config: RunConfig = serde_json::from_str(&content)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds list is empty".into()));
        }
        self.ruleset()?;
        if let Some(s) = &self.synth {
            let (t, v, te) = s.split;
            if t + v + te != s.num_docs {
                return Err(CliError::Config(format!(
                    "synth split {}+{}+{} != num_docs {}",
                    t, v, te, s.num_docs
                )));
            }
        }
        Ok(())
    }

    pub fn ruleset(&self) -> Result<RuleSet, CliError> {
        builtin::by_name(&self.ruleset)
            .ok_or_else(|| CliError::Config(format!("unknown ruleset {:?}", self.ruleset)))
    }

    fn archive(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join("config.json");
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, body + "\n").map_err(io_err(&path))
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Generate a synthetic clean corpus and write train/validation/test files.
pub fn cmd_synth(config: &RunConfig, out_override: Option<&Path>) -> Result<(), CliError> {
    let settings = config
        .synth
        .as_ref()
        .ok_or_else(|| CliError::Config("synth section missing".into()))?;
    let out_dir = out_override.unwrap_or(&config.output_dir).to_path_buf();
    ensure_dir(&out_dir)?;
    let ruleset = config.ruleset()?;
    let mut docs = generate_synthetic(
        &SynthConfig {
            num_docs: settings.num_docs,
            noise_rate: settings.noise_rate,
            seed: settings.seed,
            score_distribution: ScoreDistribution::default(),
            vocabulary_size: settings.vocabulary_size,
        },
        &ruleset,
    )?;
    for d in &mut docs {
        d.source = Source::Clean;
    }
    let split = split_dataset(&docs, settings.split, settings.seed)?;
    save_dataset(&out_dir.join("train.jsonl"), &split.train)?;
    save_dataset(&out_dir.join("validation.jsonl"), &split.validation)?;
    save_dataset(&out_dir.join("test.jsonl"), &split.test)?;
    config.archive(&out_dir)?;
    log::info!(
        "wrote {} train / {} validation / {} test documents to {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        out_dir.display()
    );
    Ok(())
}

/// Run the augmentation pipeline over a clean train set and a pool file.
pub fn cmd_augment(config: &RunConfig, out_override: Option<&Path>) -> Result<(), CliError> {
    let settings = config
        .augment
        .as_ref()
        .ok_or_else(|| CliError::Config("augment section missing".into()))?;
    let clean_path = config
        .paths
        .clean_train
        .as_ref()
        .ok_or_else(|| CliError::Config("paths.clean_train missing".into()))?;
    let pool_path = config
        .paths
        .pool
        .as_ref()
        .ok_or_else(|| CliError::Config("paths.pool missing".into()))?;
    let out_dir = out_override.unwrap_or(&config.output_dir).to_path_buf();
    ensure_dir(&out_dir)?;
    let clean = load_dataset(clean_path, Source::Clean)?;
    let pool = load_dataset(pool_path, Source::Augmented)?;
    let mut aug_cfg = AugmentConfig::new(config.ruleset()?, settings.seed, settings.max_output);
    aug_cfg.top_k = settings.top_k;
    let output = run_pipeline(&clean, &pool, &aug_cfg)?;
    save_dataset(&out_dir.join("augmented.jsonl"), &output.augmented)?;
    write_rejects(&out_dir.join("rejects.tsv"), &output.rejects)
        .map_err(io_err(&out_dir.join("rejects.tsv")))?;
    config.archive(&out_dir)?;
    log::info!(
        "kept {} augmented documents, rejected {}",
        output.augmented.len(),
        output.rejects.len()
    );
    Ok(())
}

fn load_clean_split(config: &RunConfig) -> Result<DatasetSplit, CliError> {
    let path = |p: &Option<PathBuf>, name: &str| {
        p.clone()
            .ok_or_else(|| CliError::Config(format!("paths.{name} missing")))
    };
    Ok(DatasetSplit {
        train: load_dataset(&path(&config.paths.clean_train, "clean_train")?, Source::Clean)?,
        validation: load_dataset(
            &path(&config.paths.clean_validation, "clean_validation")?,
            Source::Clean,
        )?,
        test: load_dataset(&path(&config.paths.clean_test, "clean_test")?, Source::Clean)?,
    })
}

fn load_augmented(config: &RunConfig) -> Result<Vec<CaseDocument>, CliError> {
    let path = config
        .paths
        .augmented
        .as_ref()
        .ok_or_else(|| CliError::Config("paths.augmented missing".into()))?;
    Ok(load_dataset(path, Source::Augmented)?)
}

fn build_model_config(settings: &ModelSettings, vocab_size: usize) -> ModelConfig {
    ModelConfig {
        mode: settings.mode,
        encoder: EncoderConfig {
            vocab_size,
            model_dim: settings.model_dim,
            num_layers: settings.num_layers,
            num_heads: settings.num_heads,
            feedforward_dim: settings.feedforward_dim,
            max_sequence_length: settings.max_sequence_length,
        },
        interm: settings.interm.clone().unwrap_or_default(),
        pooling: settings.pooling,
        teacher_forcing: settings.teacher_forcing,
    }
}

fn training_documents(
    split_choice: SplitChoice,
    clean: &DatasetSplit,
    augmented: &[CaseDocument],
    seed: u64,
) -> Vec<CaseDocument> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    match split_choice {
        SplitChoice::Clean => clean.train.clone(),
        SplitChoice::Augmented => augmented.to_vec(),
        SplitChoice::Mix => {
            let mut mixed: Vec<CaseDocument> = clean
                .train
                .iter()
                .chain(augmented.iter())
                .cloned()
                .collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            mixed.shuffle(&mut rng);
            mixed
        }
    }
}

#[derive(Serialize)]
struct SeedResult {
    seed: u64,
    best_epoch: usize,
    best_val_score: f64,
    test_macro_f1: f64,
    test_mae: Option<f64>,
    test_mse: Option<f64>,
}

#[derive(Serialize)]
struct TrainReport {
    mode: Mode,
    split: SplitChoice,
    curriculum: bool,
    seeds: Vec<SeedResult>,
    test_macro_f1_mean: f64,
    test_macro_f1_stddev: f64,
}

/// Classification + regression metrics of a model on a document set.
fn test_metrics(
    model: &Model,
    docs: &[CaseDocument],
) -> Result<(f64, Option<f64>, Option<f64>, Vec<PredictionRecord>), CliError> {
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    let mut records = Vec::new();
    let mut score_preds = Vec::new();
    let mut score_golds = Vec::new();
    for doc in docs {
        let gold = doc
            .judgment
            .ok_or_else(|| CliError::Config(format!("document {} unlabeled", doc.id)))?;
        let inference = model.infer(doc)?;
        preds.push(inference.predicted.as_u8());
        golds.push(gold.as_u8());
        records.push(PredictionRecord {
            id: doc.id.clone(),
            gold: gold.as_u8(),
            predicted: inference.predicted.as_u8(),
            confidence: inference.probs[0].max(inference.probs[1]),
        });
        if let (Some(s), Some(f)) = (inference.scores, &doc.factors) {
            score_preds.push(s);
            score_golds.push(f.as_array());
        }
    }
    let f1 = macro_f1(&preds, &golds)?;
    let (mae, mse) = if score_preds.is_empty() {
        (None, None)
    } else {
        let (a, b) = mae_mse(&score_preds, &score_golds)?;
        (Some(a), Some(b))
    };
    Ok((f1, mae, mse, records))
}

fn write_trace_csv(path: &Path, trace: &[crate::model::EpochRecord]) -> Result<(), CliError> {
    let mut body = String::from("epoch,train_loss,val_score\n");
    for r in trace {
        body.push_str(&format!("{},{:.12},{:.12}\n", r.epoch, r.train_loss, r.val_score));
    }
    fs::write(path, body).map_err(io_err(path))
}

/// Train one model per seed and write checkpoints, traces, and an aggregate
/// report with mean ± standard deviation of the test macro F1.
pub fn cmd_train(
    config: &RunConfig,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let model_settings = config
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config("model section missing".into()))?;
    let train_settings = config
        .train
        .as_ref()
        .ok_or_else(|| CliError::Config("train section missing".into()))?;
    let split_choice = config
        .split
        .ok_or_else(|| CliError::Config("split missing".into()))?;
    if config.curriculum.is_some() && split_choice == SplitChoice::Clean {
        return Err(CliError::Config(
            "curriculum training requires augmented data; split is clean".into(),
        ));
    }
    let out_dir = out_override.unwrap_or(&config.output_dir).to_path_buf();
    ensure_dir(&out_dir)?;
    let clean = load_clean_split(config)?;
    let augmented = if split_choice == SplitChoice::Clean {
        vec![]
    } else {
        load_augmented(config)?
    };

    let seeds: Vec<u64> = match seed_override {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    };
    let run_seed = |seed: u64| -> Result<SeedResult, CliError> {
        let seed_dir = out_dir.join(format!("seed-{seed}"));
        ensure_dir(&seed_dir)?;
        let train_docs = training_documents(split_choice, &clean, &augmented, seed);
        if train_docs.is_empty() {
            return Err(CliError::Config("training split is empty".into()));
        }
        let texts: Vec<String> = train_docs.iter().map(|d| d.full_text()).collect();
        let vocab = TokenVocab::build(
            texts.iter().map(|s| s.as_str()),
            model_settings.vocab_cap,
        );
        let model_config = build_model_config(model_settings, vocab.len());
        let train_cfg = TrainConfig {
            epochs: train_settings.epochs,
            batch_size: train_settings.batch_size,
            learning_rate: train_settings.learning_rate,
            smooth_l1_beta: train_settings.smooth_l1_beta,
            seed,
            select_by: train_settings.select_by,
        };
        let (model, best_epoch, best_val, trace) = match &config.curriculum {
            Some(curriculum_cfg) => {
                let cfg = CurriculumConfig {
                    seed,
                    ..curriculum_cfg.clone()
                };
                let vocab = vocab.clone();
                let model_config = model_config.clone();
                let outcome = run_curriculum(
                    &clean,
                    &augmented,
                    &cfg,
                    &train_cfg,
                    move |s| Model::new(model_config.clone(), vocab.clone(), s),
                )?;
                write_bin_audit(
                    &seed_dir.join("bins.tsv"),
                    &outcome.records,
                    &outcome.partition,
                )?;
                let last = outcome
                    .stages
                    .last()
                    .expect("curriculum produces at least one stage");
                (
                    outcome.model,
                    last.outcome.best_epoch,
                    last.outcome.best_val_score,
                    outcome
                        .stages
                        .iter()
                        .flat_map(|s| s.outcome.trace.clone())
                        .collect::<Vec<_>>(),
                )
            }
            None => {
                let split = DatasetSplit {
                    train: train_docs,
                    validation: clean.validation.clone(),
                    test: clean.test.clone(),
                };
                let mut model = Model::new(model_config, vocab, seed)?;
                let outcome = train(&mut model, &split, &train_cfg)?;
                (model, outcome.best_epoch, outcome.best_val_score, outcome.trace)
            }
        };
        model.save(&seed_dir.join("model.ckpt"))?;
        write_trace_csv(&seed_dir.join("trace.csv"), &trace)?;
        let (f1, mae, mse, _) = test_metrics(&model, &clean.test)?;
        Ok(SeedResult {
            seed,
            best_epoch,
            best_val_score: best_val,
            test_macro_f1: f1,
            test_mae: mae,
            test_mse: mse,
        })
    };

    // Sequential by default; CONFUSIO_THREADS > 1 trains seeds concurrently
    // (each seed is fully independent, so results are unchanged).
    let threads = max_threads();
    let mut results = Vec::new();
    if threads <= 1 {
        for &seed in &seeds {
            results.push(run_seed(seed)?);
        }
    } else {
        for chunk in seeds.chunks(threads) {
            let run_seed = &run_seed;
            let outcomes: Vec<Result<SeedResult, CliError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&seed| scope.spawn(move || run_seed(seed)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("seed worker panicked"))
                    .collect()
            });
            for outcome in outcomes {
                results.push(outcome?);
            }
        }
    }

    let f1s: Vec<f64> = results.iter().map(|r| r.test_macro_f1).collect();
    let (mean, stddev) = mean_stddev(&f1s);
    let report = TrainReport {
        mode: model_settings.mode,
        split: split_choice,
        curriculum: config.curriculum.is_some(),
        seeds: results,
        test_macro_f1_mean: mean,
        test_macro_f1_stddev: stddev,
    };
    let report_path = out_dir.join("train_report.json");
    let body = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&report_path, body + "\n").map_err(io_err(&report_path))?;

    // Plot-ready seed-wise F1 distribution.
    let csv_path = out_dir.join("f1_by_seed.csv");
    let mut csv = String::from("seed,test_macro_f1\n");
    for (seed, f1) in seeds.iter().zip(&f1s) {
        csv.push_str(&format!("{seed},{f1:.12}\n"));
    }
    fs::write(&csv_path, csv).map_err(io_err(&csv_path))?;
    config.archive(&out_dir)?;
    log::info!("test macro F1 {:.4} ± {:.4} over {} seeds", mean, stddev, f1s.len());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    num_documents: usize,
    macro_f1: Option<f64>,
    mae: Option<f64>,
    mse: Option<f64>,
    ece: f64,
    reliability: Vec<ReliabilityRow>,
}

#[derive(Serialize)]
struct ReliabilityRow {
    bin: usize,
    count: usize,
    accuracy: f64,
    confidence: f64,
}

/// Number of calibration bins used in reports.
pub const ECE_BINS: usize = 5;

/// Evaluate a checkpoint on the configured test set; writes a metrics report.
pub fn cmd_eval(
    config: &RunConfig,
    checkpoint: &Path,
    out_override: Option<&Path>,
) -> Result<(), CliError> {
    let out_dir = out_override.unwrap_or(&config.output_dir).to_path_buf();
    ensure_dir(&out_dir)?;
    let test_path = config
        .paths
        .clean_test
        .as_ref()
        .ok_or_else(|| CliError::Config("paths.clean_test missing".into()))?;
    let docs = load_dataset(test_path, Source::Clean)?;
    let model = Model::load(checkpoint)?;
    let (f1, mae, mse, records) = test_metrics(&model, &docs)?;
    let (ece_value, table) = ece(&records, ECE_BINS)?;
    let report = EvalReport {
        num_documents: docs.len(),
        macro_f1: Some(f1),
        mae,
        mse,
        ece: ece_value,
        reliability: table
            .bins
            .iter()
            .map(|b| ReliabilityRow {
                bin: b.bin,
                count: b.count,
                accuracy: b.accuracy,
                confidence: b.confidence,
            })
            .collect(),
    };
    let path = out_dir.join("eval_report.json");
    let body = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&path, body + "\n").map_err(io_err(&path))?;
    log::info!("macro F1 {:.4}, ECE {:.4}", f1, ece_value);
    Ok(())
}

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(clap::Parser, Debug)]
#[command(
    name = "confusio",
    about = "Interpretable low-resource trademark-confusion decision pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic clean corpus and split files.
    Synth(CommonArgs),
    /// Assemble weakly labeled documents from a sentence pool.
    Augment(CommonArgs),
    /// Train one model per seed and aggregate the results.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test set.
    Eval(EvalArgs),
}

#[derive(clap::Args, Debug)]
pub struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Train a single seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the configured model mode.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Override the configured data split.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<SplitChoice>,
    /// Enable curriculum training with default settings if the config has
    /// no curriculum section.
    #[arg(long)]
    pub curriculum: bool,
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint file to evaluate.
    #[arg(long)]
    pub checkpoint: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "end_to_end" => Ok(Mode::EndToEnd),
        "multi_task" => Ok(Mode::MultiTask),
        "fusion" => Ok(Mode::Fusion),
        other => Err(format!(
            "unknown mode {other:?} (expected end_to_end, multi_task, or fusion)"
        )),
    }
}

fn parse_split(s: &str) -> Result<SplitChoice, String> {
    match s {
        "clean" => Ok(SplitChoice::Clean),
        "augmented" => Ok(SplitChoice::Augmented),
        "mix" => Ok(SplitChoice::Mix),
        other => Err(format!(
            "unknown split {other:?} (expected clean, augmented, or mix)"
        )),
    }
}

/// Maximum worker parallelism, from `CONFUSIO_THREADS` (default 1).
pub fn max_threads() -> usize {
    std::env::var("CONFUSIO_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => {
            let config = RunConfig::load(&args.config)?;
            cmd_synth(&config, args.out.as_deref())
        }
        Command::Augment(args) => {
            let config = RunConfig::load(&args.config)?;
            cmd_augment(&config, args.out.as_deref())
        }
        Command::Train(args) => {
            let mut config = RunConfig::load(&args.common.config)?;
            if let Some(mode) = args.mode {
                if let Some(m) = config.model.as_mut() {
                    m.mode = mode;
                } else {
                    return Err(CliError::Config("model section missing".into()));
                }
            }
            if let Some(split) = args.split {
                config.split = Some(split);
            }
            if args.curriculum && config.curriculum.is_none() {
                config.curriculum = Some(CurriculumConfig::default());
            }
            cmd_train(&config, args.common.out.as_deref(), args.seed)
        }
        Command::Eval(args) => {
            let config = RunConfig::load(&args.common.config)?;
            cmd_eval(&config, &args.checkpoint, args.common.out.as_deref())
        }
    }
}
