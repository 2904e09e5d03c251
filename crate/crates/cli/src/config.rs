//! The run configuration: one `key = value` per line, `#` comments.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jnrf_core::{Granularity, ModelConfig, PoolSource};
use jnrf_corpus::SynthConfig;
use jnrf_eval::MatchMode;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,

    pub granularity: Granularity,
    pub accumulate_over: usize,
    pub sentence_batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub pool_source: PoolSource,

    pub train_docs: usize,
    pub dev_docs: usize,
    pub test_docs: usize,
    pub length_min: usize,
    pub length_max: usize,
    pub entity_density: f64,
    pub relation_profile: Vec<(i32, f64)>,

    /// Corpus root holding `train/`, `dev/`, `test/` and `vocab.txt`.
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub predict_dir: Option<PathBuf>,
    pub pred_dir: Option<PathBuf>,
    pub gold_dir: Option<PathBuf>,
    pub stats_dir: Option<PathBuf>,
    pub match_mode: MatchMode,

    pub bench_lengths: Vec<usize>,
    pub bench_trials: usize,
    pub bench_warmup: usize,
    pub bench_precision: Precision,
    pub bench_drugs: usize,
    pub bench_attributes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let model = ModelConfig {
            embed_dim: 32,
            hidden: 32,
            head_hidden: 32,
            ..ModelConfig::default()
        };
        let mut model = model;
        model.mixer.ffn_hidden = 64;
        Self {
            seed: 0,
            model,
            granularity: Granularity::Document,
            accumulate_over: 1,
            sentence_batch: 64,
            epochs: 30,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            pool_source: PoolSource::Gold,
            train_docs: 64,
            dev_docs: 16,
            test_docs: 16,
            length_min: synth.length_range.0,
            length_max: synth.length_range.1,
            entity_density: synth.entity_density,
            relation_profile: synth.relation_profile,
            corpus: PathBuf::from("corpus"),
            out_dir: PathBuf::from("out"),
            embeddings: None,
            checkpoint: None,
            predict_dir: None,
            pred_dir: None,
            gold_dir: None,
            stats_dir: None,
            match_mode: MatchMode::Lenient,
            bench_lengths: vec![512, 1024, 2048, 4096],
            bench_trials: 3,
            bench_warmup: 1,
            bench_precision: Precision::F64,
            bench_drugs: 4,
            bench_attributes: 8,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("none".into(), |p| p.display().to_string())
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// `distance:weight` pairs, comma separated.
fn parse_profile(value: &str) -> Result<Vec<(i32, f64)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (d, w) = pair
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("relation_profile: expected distance:weight, got {pair:?}")))?;
            Ok((parse("relation_profile", d.trim())?, parse("relation_profile", w.trim())?))
        })
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "vocab_size" | "init_seed" => {
                return Err(CliError::Config(format!(
                    "{key} is derived (from the vocabulary and `seed`) and cannot be set"
                )))
            }
            "granularity" => self.granularity = value.parse().map_err(|e: jnrf_core::CoreError| CliError::Config(e.to_string()))?,
            "accumulate_over" => self.accumulate_over = parse(key, value)?,
            "sentence_batch" => self.sentence_batch = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "pool_source" => {
                self.pool_source = match value {
                    "gold" => PoolSource::Gold,
                    "predicted" => PoolSource::Predicted,
                    _ => return Err(CliError::Config(format!("pool_source: expected gold or predicted, got {value:?}"))),
                }
            }
            "train_docs" => self.train_docs = parse(key, value)?,
            "dev_docs" => self.dev_docs = parse(key, value)?,
            "test_docs" => self.test_docs = parse(key, value)?,
            "length_min" => self.length_min = parse(key, value)?,
            "length_max" => self.length_max = parse(key, value)?,
            "entity_density" => self.entity_density = parse(key, value)?,
            "relation_profile" => self.relation_profile = parse_profile(value)?,
            "corpus" => self.corpus = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "embeddings" => self.embeddings = optional_path(value),
            "checkpoint" => self.checkpoint = optional_path(value),
            "predict_dir" => self.predict_dir = optional_path(value),
            "pred_dir" => self.pred_dir = optional_path(value),
            "gold_dir" => self.gold_dir = optional_path(value),
            "stats_dir" => self.stats_dir = optional_path(value),
            "match_mode" => {
                self.match_mode = match value {
                    "lenient" => MatchMode::Lenient,
                    "strict" => MatchMode::Strict,
                    _ => return Err(CliError::Config(format!("match_mode: expected lenient or strict, got {value:?}"))),
                }
            }
            "bench_lengths" => self.bench_lengths = parse_list(key, value)?,
            "bench_trials" => self.bench_trials = parse(key, value)?,
            "bench_warmup" => self.bench_warmup = parse(key, value)?,
            "bench_precision" => {
                self.bench_precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(CliError::Config(format!("bench_precision: expected f32 or f64, got {value:?}"))),
                }
            }
            "bench_drugs" => self.bench_drugs = parse(key, value)?,
            "bench_attributes" => self.bench_attributes = parse(key, value)?,
            _ => {
                if !self.model.set(key, value).map_err(|e| CliError::Config(e.to_string()))? {
                    return Err(CliError::Config(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
            c.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("line {}: {}", i + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Every key with its current value, in a form [`RunConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        put("seed", self.seed.to_string());
        for (k, v) in self.model.entries() {
            if k != "vocab_size" && k != "init_seed" {
                put(k, v);
            }
        }
        put("granularity", self.granularity.to_string());
        put("accumulate_over", self.accumulate_over.to_string());
        put("sentence_batch", self.sentence_batch.to_string());
        put("epochs", self.epochs.to_string());
        put("lr", self.lr.to_string());
        put("beta1", self.beta1.to_string());
        put("beta2", self.beta2.to_string());
        put("eps", self.eps.to_string());
        put(
            "pool_source",
            match self.pool_source {
                PoolSource::Gold => "gold",
                PoolSource::Predicted => "predicted",
            }
            .into(),
        );
        put("train_docs", self.train_docs.to_string());
        put("dev_docs", self.dev_docs.to_string());
        put("test_docs", self.test_docs.to_string());
        put("length_min", self.length_min.to_string());
        put("length_max", self.length_max.to_string());
        put("entity_density", self.entity_density.to_string());
        put(
            "relation_profile",
            self.relation_profile
                .iter()
                .map(|(d, w)| format!("{d}:{w}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("corpus", self.corpus.display().to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("embeddings", show_path(&self.embeddings));
        put("checkpoint", show_path(&self.checkpoint));
        put("predict_dir", show_path(&self.predict_dir));
        put("pred_dir", show_path(&self.pred_dir));
        put("gold_dir", show_path(&self.gold_dir));
        put("stats_dir", show_path(&self.stats_dir));
        put(
            "match_mode",
            match self.match_mode {
                MatchMode::Lenient => "lenient",
                MatchMode::Strict => "strict",
            }
            .into(),
        );
        put(
            "bench_lengths",
            self.bench_lengths.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        put("bench_trials", self.bench_trials.to_string());
        put("bench_warmup", self.bench_warmup.to_string());
        put(
            "bench_precision",
            match self.bench_precision {
                Precision::F32 => "f32",
                Precision::F64 => "f64",
            }
            .into(),
        );
        put("bench_drugs", self.bench_drugs.to_string());
        put("bench_attributes", self.bench_attributes.to_string());
        out
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            n_docs: self.train_docs + self.dev_docs + self.test_docs,
            length_range: (self.length_min, self.length_max),
            entity_density: self.entity_density,
            relation_profile: self.relation_profile.clone(),
            doc_prefix: "doc".into(),
        }
    }

    pub fn train_config(&self) -> jnrf_core::TrainConfig {
        jnrf_core::TrainConfig {
            granularity: self.granularity,
            accumulate_over: self.accumulate_over,
            sentence_batch: self.sentence_batch,
            epochs: self.epochs,
            seed: self.seed,
            adam: jnrf_core::AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            pool: self.pool_source,
        }
    }

    pub fn split_dir(&self, split: &str) -> PathBuf {
        self.corpus.join(split)
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.corpus.join("vocab.txt")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("model.ckpt"))
    }

    pub fn predictions_dir(&self) -> PathBuf {
        self.pred_dir.clone().unwrap_or_else(|| self.out_dir.join("predictions"))
    }
}
