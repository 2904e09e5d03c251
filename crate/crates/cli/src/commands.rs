//! One function per subcommand. Each returns the text to print on stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jnrf_bench::{bench_system, compare_report, standard_systems, to_tsv, BenchConfig};
use jnrf_core::{fit, load_checkpoint, load_table, save_checkpoint, Jnrf, ModelConfig};
use jnrf_corpus::{corpus_stats, list_documents, load_corpus, synth_corpus, write_document, Document, Vocab};
use jnrf_eval::{build_report, EvalReport, MatchMode};

use crate::config::{Precision, RunConfig};
use crate::error::{CliError, Result};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_vocab(config: &RunConfig) -> Result<Vocab> {
    Ok(Vocab::load(config.vocab_path())?)
}

fn load_split(dir: &Path, vocab: &Vocab) -> Result<Vec<Document>> {
    let docs = load_corpus(dir, vocab)?;
    if docs.is_empty() {
        return Err(CliError::Data(format!("{}: no documents", dir.display())));
    }
    Ok(docs)
}

/// Writes `train/`, `dev/`, `test/` and `vocab.txt` under `config.corpus`.
pub fn cmd_synth(config: &RunConfig) -> Result<String> {
    let corpus = synth_corpus(&config.synth_config())?;
    let root = &config.corpus;
    create_dir(root)?;
    let (train, rest) = corpus.documents.split_at(config.train_docs);
    let (dev, test) = rest.split_at(config.dev_docs);
    for (name, docs) in [("train", train), ("dev", dev), ("test", test)] {
        let dir = root.join(name);
        create_dir(&dir)?;
        for doc in docs {
            write_document(&dir, doc)?;
        }
    }
    corpus.vocab.save(config.vocab_path())?;
    Ok(format!(
        "wrote {} train, {} dev, {} test documents and a {}-token vocabulary to {}\n",
        train.len(),
        dev.len(),
        test.len(),
        corpus.vocab.len(),
        root.display()
    ))
}

pub fn model_config(config: &RunConfig, vocab: &Vocab) -> Result<ModelConfig> {
    let mut m = config.model.clone();
    m.vocab_size = vocab.len();
    m.init_seed = config.seed;
    m.validate()?;
    Ok(m)
}

pub fn predict_all(model: &Jnrf<f64>, docs: &[Document]) -> Result<Vec<Document>> {
    docs.iter().map(|d| Ok(model.predict_document(d)?)).collect()
}

/// Trains on `train/`, selects the epoch with the best dev E2E F1 and saves it.
/// Each `train.log` line is also echoed to stderr.
pub fn cmd_train(config: &RunConfig) -> Result<String> {
    train_with_progress(config, |line| eprint!("{line}"))
}

pub fn train_with_progress(config: &RunConfig, mut progress: impl FnMut(&str)) -> Result<String> {
    let vocab = load_vocab(config)?;
    let train = load_split(&config.split_dir("train"), &vocab)?;
    let dev = load_split(&config.split_dir("dev"), &vocab)?;
    let mc = model_config(config, &vocab)?;
    let table = load_table::<f64>(config.embeddings.as_deref(), &vocab, mc.embed_dim, config.seed)?;
    let model = Jnrf::new(mc, table)?;
    create_dir(&config.out_dir)?;

    let mut log = String::from("epoch\ttrain_loss\tdev_f1\twall_seconds\n");
    let start = Instant::now();
    let result = fit(
        model,
        &train,
        &config.train_config(),
        |m| {
            let preds = predict_all(m, &dev).map_err(|e| jnrf_core::CoreError::Config(e.to_string()))?;
            let report = build_report(&preds, &dev, config.match_mode)
                .map_err(|e| jnrf_core::CoreError::Config(e.to_string()))?;
            Ok(report.e2e.f1())
        },
        |stats, dev_f1| {
            let line = format!(
                "{}\t{:.6}\t{:.4}\t{:.2}\n",
                stats.epoch,
                stats.train_loss,
                dev_f1,
                start.elapsed().as_secs_f64()
            );
            progress(&line);
            log.push_str(&line);
        },
    )?;
    write_file(&config.out_dir.join("train.log"), &log)?;
    let path = config.checkpoint_path();
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    save_checkpoint(&path, &result.best, None)?;
    let best_f1 = result.history[result.best_epoch - 1].1;
    Ok(format!(
        "best epoch {} of {} (dev E2E F1 {:.2}); checkpoint {}\n",
        result.best_epoch,
        result.history.len(),
        100.0 * best_f1,
        path.display()
    ))
}

/// Tags every document of `predict_dir` (default `test/`) and writes BRAT pairs.
pub fn cmd_predict(config: &RunConfig) -> Result<String> {
    let vocab = load_vocab(config)?;
    let input = config.predict_dir.clone().unwrap_or_else(|| config.split_dir("test"));
    let docs = load_split(&input, &vocab)?;
    let model = load_checkpoint::<f64>(&config.checkpoint_path())?.model;
    if model.config.vocab_size != vocab.len() {
        return Err(CliError::Data(format!(
            "checkpoint expects a {}-token vocabulary, {} has {}",
            model.config.vocab_size,
            config.vocab_path().display(),
            vocab.len()
        )));
    }
    let out = config.predictions_dir();
    create_dir(&out)?;
    let preds = predict_all(&model, &docs)?;
    for p in &preds {
        write_document(&out, p)?;
    }
    Ok(format!("wrote {} predicted documents to {}\n", preds.len(), out.display()))
}

pub fn evaluate_dirs(pred_dir: &Path, gold_dir: &Path, vocab: &Vocab, mode: MatchMode) -> Result<EvalReport> {
    let gold = load_split(gold_dir, vocab)?;
    let pred = load_corpus(pred_dir, vocab)?;
    Ok(build_report(&pred, &gold, mode)?)
}

/// Scores `pred_dir` against `gold_dir` and writes `report.txt` and `report.tsv`.
pub fn cmd_evaluate(config: &RunConfig) -> Result<String> {
    let vocab = load_vocab(config)?;
    let gold_dir = config.gold_dir.clone().unwrap_or_else(|| config.split_dir("test"));
    let report = evaluate_dirs(&config.predictions_dir(), &gold_dir, &vocab, config.match_mode)?;
    let text = report.to_text();
    write_file(&config.out_dir.join("report.txt"), &text)?;
    write_file(&config.out_dir.join("report.tsv"), &report.to_tsv())?;
    Ok(text)
}

/// Times and measures the standard systems; writes `bench.tsv` and `compare.txt`.
pub fn cmd_bench(config: &RunConfig) -> Result<String> {
    let mut base = config.model.clone();
    base.vocab_size = 1000;
    base.init_seed = config.seed;
    let bc = BenchConfig {
        lengths: config.bench_lengths.clone(),
        trials: config.bench_trials,
        warmup: config.bench_warmup,
        seed: config.seed,
        vocab_size: base.vocab_size,
        drugs: config.bench_drugs,
        attributes: config.bench_attributes,
    };
    let mut results = Vec::new();
    for spec in standard_systems(&base) {
        eprintln!("bench {}", spec.name);
        results.push(match config.bench_precision {
            Precision::F32 => bench_system::<f32>(&spec, &bc)?,
            Precision::F64 => bench_system::<f64>(&spec, &bc)?,
        });
    }
    let tsv = to_tsv(&results);
    let compare = compare_report(&results)?;
    write_file(&config.out_dir.join("bench.tsv"), &tsv)?;
    write_file(&config.out_dir.join("compare.txt"), &compare)?;
    Ok(format!("{tsv}\n{compare}"))
}

/// Documents of `dir`, or of its `train/`, `dev/` and `test/` children when
/// it holds none itself.
fn stats_documents(dir: &Path, vocab: &Vocab) -> Result<Vec<Document>> {
    if !list_documents(dir)?.is_empty() {
        return Ok(load_corpus(dir, vocab)?);
    }
    let mut docs = Vec::new();
    for split in ["train", "dev", "test"] {
        let sub: PathBuf = dir.join(split);
        if sub.is_dir() {
            docs.extend(load_corpus(&sub, vocab)?);
        }
    }
    Ok(docs)
}

/// Entity, relation and length statistics; also written to `stats.txt`.
pub fn cmd_stats(config: &RunConfig) -> Result<String> {
    let vocab = load_vocab(config)?;
    let dir = config.stats_dir.clone().unwrap_or_else(|| config.corpus.clone());
    let docs = stats_documents(&dir, &vocab)?;
    let mut text = corpus_stats(&docs)?.render();
    let tokens: usize = docs.iter().map(Document::len).sum();
    let entities: usize = docs.iter().map(|d| d.entities.len()).sum();
    let relations: usize = docs.iter().map(|d| d.relations.len()).sum();
    if tokens > 0 {
        writeln!(
            text,
            "\n{:<20}{:>10.4}\n{:<20}{:>10.4}",
            "Entities/token",
            entities as f64 / tokens as f64,
            "Relations/token",
            relations as f64 / tokens as f64
        )
        .unwrap();
    }
    write_file(&config.out_dir.join("stats.txt"), &text)?;
    Ok(text)
}
