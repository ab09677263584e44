//! The command layer: each `cmd_*` function is one subcommand of the
//! `clinqa` binary, driven by a [`RunConfig`].
//!
//! Everything a command writes goes under [`RunConfig::out_dir`]:
//!
//! ```text
//! out/
//!   data/train.jsonl validation.jsonl test.jsonl vocab.txt stats.json skipped.jsonl
//!   model.ckpt train_log.jsonl
//!   eval/report.json per_class.csv errors.csv predictions.jsonl
//!   ablation.csv ablation.json grid.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::categorizer::{assign_category, assign_soft_labels, Gazetteer};
use crate::corpus::{
    dataset_statistics, generate_synthetic_corpus, load_jsonl, stratified_split, write_jsonl,
    CategoryLabel, DatasetSplit, DatasetStatistics, QaRecord, SplitFractions, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::model::{init_params, Checkpoint, ClassificationMode, EncoderConfig};
use crate::tokenizer::{align_answer_span, build_vocab, encode_pair, Vocabulary};
use crate::training::{
    evaluate_records, grid_search_lambdas, predict, run_ablation, train_with, AblationReport,
    EpochLog, GridSearchResult, TrainConfig, TrainHooks, TrainOutcome,
};

/// Model geometry without the vocabulary size, which preprocessing decides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub num_shared_layers: usize,
    pub num_task_layers: usize,
    pub feedforward_dim: usize,
    pub max_seq_len: usize,
    pub span_head_dims: Vec<usize>,
    pub class_head_dims: Vec<usize>,
    pub classification_mode: ClassificationMode,
    pub dropout_rate: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings::from_encoder(&EncoderConfig::desk(0))
    }
}

impl ModelSettings {
    pub fn from_encoder(c: &EncoderConfig) -> Self {
        ModelSettings {
            hidden_dim: c.hidden_dim,
            num_heads: c.num_heads,
            num_shared_layers: c.num_shared_layers,
            num_task_layers: c.num_task_layers,
            feedforward_dim: c.feedforward_dim,
            max_seq_len: c.max_seq_len,
            span_head_dims: c.span_head_dims.clone(),
            class_head_dims: c.class_head_dims.clone(),
            classification_mode: c.classification_mode,
            dropout_rate: c.dropout_rate,
        }
    }

    pub fn encoder(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            hidden_dim: self.hidden_dim,
            num_heads: self.num_heads,
            num_shared_layers: self.num_shared_layers,
            num_task_layers: self.num_task_layers,
            feedforward_dim: self.feedforward_dim,
            max_seq_len: self.max_seq_len,
            span_head_dims: self.span_head_dims.clone(),
            class_head_dims: self.class_head_dims.clone(),
            classification_mode: self.classification_mode,
            dropout_rate: self.dropout_rate,
            layer_norm_eps: 1e-12,
        }
    }
}

/// Settings for every subcommand, loaded from one JSON file.
///
/// Unset fields take defaults; command-line flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Raw JSONL input of `preprocess`.
    pub dataset: Option<PathBuf>,
    /// Gazetteer CSV; the bundled one when unset.
    pub gazetteer: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Preprocessed splits and vocabulary; `<out_dir>/data` when unset.
    pub data_dir: Option<PathBuf>,
    /// `<out_dir>/model.ckpt` when unset.
    pub checkpoint: Option<PathBuf>,
    /// Continue training from this checkpoint's parameters and step counter.
    pub resume: Option<PathBuf>,
    /// Seeds the split, the initialization and training.
    pub seed: u64,
    pub max_vocab_size: usize,
    pub min_token_freq: usize,
    pub split: SplitFractions,
    pub model: ModelSettings,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            gazetteer: None,
            out_dir: PathBuf::from("out"),
            data_dir: None,
            checkpoint: None,
            resume: None,
            seed: 0,
            max_vocab_size: 8000,
            min_token_freq: 1,
            split: SplitFractions::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        require_file(path, "config file")?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| self.out_dir.join("data"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("model.ckpt"))
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.data_dir().join("vocab.txt")
    }

    pub fn split_path(&self, part: &str) -> PathBuf {
        self.data_dir().join(format!("{part}.jsonl"))
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn gazetteer(&self) -> Result<Gazetteer> {
        match &self.gazetteer {
            Some(p) => {
                require_file(p, "gazetteer")?;
                Gazetteer::load_csv(p)
            }
            None => Ok(Gazetteer::fixture()),
        }
    }

    fn load_splits(&self) -> Result<(DatasetSplit, Vocabulary)> {
        let parts = ["train", "validation", "test"].map(|p| self.split_path(p));
        for p in parts.iter().chain([&self.vocab_path()]) {
            require_file(p, "preprocessed file")?;
        }
        let [train, validation, test] = parts;
        let split = DatasetSplit {
            train: load_jsonl(train)?,
            validation: load_jsonl(validation)?,
            test: load_jsonl(test)?,
            seed: self.seed,
        };
        Ok((split, Vocabulary::load(self.vocab_path())?))
    }
}

/// A preprocessing input line: a record whose label may be missing.
#[derive(Debug, Clone, Deserialize)]
struct RawRecord {
    id: String,
    question: String,
    context: String,
    answer_text: String,
    answer_char_start: usize,
    answer_char_end: usize,
    #[serde(default)]
    all_gold_answers: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub n_input: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub vocab_size: usize,
    pub skipped: Vec<SkippedRecord>,
    /// Records whose answer matched no gazetteer term.
    pub gazetteer_misses: usize,
    pub statistics: DatasetStatistics,
}

/// Labels each answer with the gazetteer (hard label plus soft scores).
pub fn categorize_record(mut r: QaRecord, g: &Gazetteer) -> QaRecord {
    let assignment = assign_category(&r.answer_text, g);
    r.label = assignment.label;
    r.gazetteer_miss = assignment.gazetteer_miss;
    r.soft_labels = (!assignment.gazetteer_miss).then(|| assign_soft_labels(&r.answer_text, g).0);
    r
}

fn parse_raw(path: &Path) -> Result<Vec<QaRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(QaRecord {
            id: raw.id,
            question: raw.question,
            context: raw.context,
            answer_text: raw.answer_text,
            answer_char_start: raw.answer_char_start,
            answer_char_end: raw.answer_char_end,
            label: CategoryLabel::Symptoms,
            soft_labels: None,
            all_gold_answers: raw.all_gold_answers,
            source_id: None,
            gazetteer_miss: false,
        });
    }
    Ok(out)
}

/// Categorize, build the vocabulary, tokenize and align, split, and write
/// the splits, vocabulary, statistics and skipped-record list.
///
/// Labels present in the input are ignored; every record is relabelled by
/// the gazetteer. Records whose answer does not fit in `max_seq_len` are
/// left out of the splits and listed in `skipped.jsonl`.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessSummary> {
    let dataset = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Usage("preprocess needs a dataset path".into()))?;
    require_file(dataset, "dataset")?;
    let g = cfg.gazetteer()?;
    let records: Vec<QaRecord> = parse_raw(dataset)?
        .into_iter()
        .map(|r| categorize_record(r, &g))
        .collect();
    for r in &records {
        r.validate()?;
    }
    let vocab = build_vocab(
        records.iter().flat_map(|r| [r.question.as_str(), r.context.as_str()]),
        cfg.max_vocab_size,
        cfg.min_token_freq,
    )?;
    let mut kept = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for r in &records {
        match encode_pair(&r.question, &r.context, &vocab, cfg.model.max_seq_len) {
            Err(e) => skipped.push(SkippedRecord {
                id: r.id.clone(),
                reason: e.to_string(),
            }),
            Ok(pair) => match align_answer_span(&pair, (r.answer_char_start, r.answer_char_end)) {
                Some(_) => kept.push(r.clone()),
                None => skipped.push(SkippedRecord {
                    id: r.id.clone(),
                    reason: "answer truncated away".into(),
                }),
            },
        }
    }
    if !skipped.is_empty() {
        log::warn!("{} of {} records skipped", skipped.len(), records.len());
    }
    let split = stratified_split(&kept, cfg.split, cfg.seed)?;
    let data = cfg.data_dir();
    fs::create_dir_all(&data).map_err(|e| Error::io(&data, e))?;
    for (name, part) in ["train", "validation", "test"].iter().zip(split.parts()) {
        write_jsonl(data.join(format!("{name}.jsonl")), part)?;
    }
    vocab.save(data.join("vocab.txt"))?;
    let statistics = dataset_statistics(&kept);
    write_json(&data.join("stats.json"), &statistics)?;
    let skipped_lines: String = skipped
        .iter()
        .map(|s| serde_json::to_string(s).map(|l| l + "\n"))
        .collect::<serde_json::Result<_>>()?;
    write_text(&data.join("skipped.jsonl"), &skipped_lines)?;
    Ok(PreprocessSummary {
        n_input: records.len(),
        n_train: split.train.len(),
        n_validation: split.validation.len(),
        n_test: split.test.len(),
        vocab_size: vocab.len(),
        gazetteer_misses: kept.iter().filter(|r| r.gazetteer_miss).count(),
        skipped,
        statistics,
    })
}

fn write_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut text = String::new();
    for entry in log {
        text.push_str(&serde_json::to_string(entry)?);
        text.push('\n');
    }
    write_text(path, &text)
}

/// Trains on the preprocessed splits and writes the best checkpoint and the
/// per-epoch log (`train_log.jsonl`).
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let (split, vocab) = cfg.load_splits()?;
    let tc = cfg.train_config();
    let (params, start_step) = match &cfg.resume {
        Some(path) => {
            require_file(path, "checkpoint to resume")?;
            let ck = Checkpoint::load(path)?;
            if ck.vocab != vocab {
                return Err(Error::Checkpoint(
                    "resume checkpoint was trained with a different vocabulary".into(),
                ));
            }
            (ck.params, ck.step)
        }
        None => (init_params(&cfg.model.encoder(vocab.len()), cfg.seed)?, 0),
    };
    let hooks = TrainHooks {
        start_step,
        observer: None,
    };
    let outcome = train_with(params, &split, &vocab, &tc, hooks)?;
    let ck = Checkpoint::new(outcome.params.clone(), vocab, outcome.best_step, tc.max_answer_len)?;
    let ck_path = cfg.checkpoint_path();
    if let Some(dir) = ck_path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    ck.save(&ck_path)?;
    write_log(&cfg.out_dir.join("train_log.jsonl"), &outcome.log)?;
    Ok(outcome)
}

fn load_checkpoint(cfg: &RunConfig, path: Option<&Path>) -> Result<Checkpoint> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| cfg.checkpoint_path());
    require_file(&path, "checkpoint")?;
    Checkpoint::load(&path)
}

/// Scores a checkpoint on a JSONL split (the test split by default) and
/// writes the report, per-class table, error table and predictions to
/// `<out_dir>/eval`.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, split: Option<&Path>) -> Result<EvalReport> {
    let ck = load_checkpoint(cfg, checkpoint)?;
    let vocab_path = cfg.vocab_path();
    if vocab_path.is_file() && Vocabulary::load(&vocab_path)? != ck.vocab {
        return Err(Error::Checkpoint(format!(
            "checkpoint vocabulary differs from {}",
            vocab_path.display()
        )));
    }
    let split_path = split.map(Path::to_path_buf).unwrap_or_else(|| cfg.split_path("test"));
    require_file(&split_path, "split")?;
    let records = load_jsonl(&split_path)?;
    let (report, preds) = evaluate_records(&ck.params, &ck.vocab, &records, ck.max_answer_len)?;
    let dir = cfg.out_dir.join("eval");
    report.write_files(&dir)?;
    let mut lines = String::new();
    for p in &preds {
        lines.push_str(&serde_json::to_string(p)?);
        lines.push('\n');
    }
    write_text(&dir.join("predictions.jsonl"), &lines)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictOutput {
    pub answer: String,
    pub label: CategoryLabel,
    pub scores: BTreeMap<CategoryLabel, f64>,
    pub char_start: usize,
    pub char_end: usize,
    pub truncated: bool,
}

/// Answers one question about one context with a trained checkpoint.
pub fn cmd_predict(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    question: &str,
    context: &str,
) -> Result<PredictOutput> {
    if question.trim().is_empty() {
        return Err(Error::Usage("question is empty".into()));
    }
    if context.trim().is_empty() {
        return Err(Error::Usage("context is empty".into()));
    }
    let ck = load_checkpoint(cfg, checkpoint)?;
    let p = predict(&ck.params, &ck.vocab, question, context, ck.max_answer_len)?;
    if p.truncated {
        log::warn!("context longer than {} tokens was truncated", ck.params.config.max_seq_len);
    }
    Ok(PredictOutput {
        answer: p.answer,
        label: p.label,
        scores: CategoryLabel::ALL.into_iter().zip(p.scores).collect(),
        char_start: p.char_span.0,
        char_end: p.char_span.1,
        truncated: p.truncated,
    })
}

/// Single-task vs multi-task comparison; writes `ablation.csv` and `ablation.json`.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<AblationReport> {
    let (split, vocab) = cfg.load_splits()?;
    let init = init_params(&cfg.model.encoder(vocab.len()), cfg.seed)?;
    let report = run_ablation(&init, &split, &vocab, &cfg.train_config())?;
    write_text(&cfg.out_dir.join("ablation.csv"), &report.to_csv())?;
    write_json(&cfg.out_dir.join("ablation.json"), &report)?;
    Ok(report)
}

/// Loss-weight grid search; writes `grid.json`.
pub fn cmd_grid(cfg: &RunConfig) -> Result<GridSearchResult> {
    let (split, vocab) = cfg.load_splits()?;
    let init = init_params(&cfg.model.encoder(vocab.len()), cfg.seed)?;
    let result = grid_search_lambdas(&init, &split, &vocab, &cfg.train_config())?;
    write_json(&cfg.out_dir.join("grid.json"), &result)?;
    Ok(result)
}

/// Writes a synthetic corpus as JSONL.
pub fn cmd_generate(cfg: &RunConfig, spec: &SyntheticSpec, path: &Path) -> Result<usize> {
    let records = generate_synthetic_corpus(spec, &cfg.gazetteer()?)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_jsonl(path, &records)?;
    Ok(records.len())
}
