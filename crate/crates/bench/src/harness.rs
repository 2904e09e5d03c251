//! Forward+backward measurements of whole-model training steps at fixed
//! document lengths.

use std::fmt::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use jnrf_core::{EmbeddingTable, Instance, Jnrf, MixerKind, ModelConfig, PoolSource, SpanRef};
use jnrf_corpus::{EntityType, Label};
use jnrf_tensor::{counter, MacCounts, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alloc;
use crate::error::{BenchError, Result};

/// Reference window of the overlapping-window baseline.
pub const REFERENCE_WINDOW: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub model: ModelConfig,
}

/// JNRF, JNRF run on 512-token windows, and windowed attention.
pub fn standard_systems(base: &ModelConfig) -> Vec<SystemSpec> {
    let mut jnrf = base.clone();
    jnrf.mixer.kind = MixerKind::Fnet;
    jnrf.lm_window = None;
    let mut wjnrf = jnrf.clone();
    wjnrf.lm_window = Some(REFERENCE_WINDOW);
    let mut attn = base.clone();
    attn.mixer.kind = MixerKind::WindowedAttention;
    attn.mixer.window = REFERENCE_WINDOW;
    attn.lm_window = None;
    vec![
        SystemSpec { name: "jnrf".into(), model: jnrf },
        SystemSpec { name: "wjnrf".into(), model: wjnrf },
        SystemSpec { name: "wattn".into(), model: attn },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub trials: usize,
    pub warmup: usize,
    pub seed: u64,
    pub vocab_size: usize,
    /// Entities placed in every synthetic document, independent of length.
    pub drugs: usize,
    pub attributes: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lengths: vec![512, 1024, 2048, 4096],
            trials: 3,
            warmup: 1,
            seed: 0,
            vocab_size: 1000,
            drugs: 4,
            attributes: 8,
        }
    }
}

/// A document of exactly `n` random tokens with the given entity counts
/// spread evenly, each attribute related to its nearest preceding drug.
pub fn bench_instance(n: usize, vocab_size: usize, drugs: usize, attributes: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let total = (drugs + attributes).min(n);
    let mut spans = Vec::with_capacity(total);
    for i in 0..total {
        let etype = if (i * drugs) % total < drugs {
            EntityType::Drug
        } else {
            EntityType::ATTRIBUTES[i % EntityType::ATTRIBUTES.len()]
        };
        let start = i * n / total;
        spans.push(SpanRef { start, end: start + 1, etype });
    }
    let mut labels = vec![Label::O.id(); n];
    for s in &spans {
        labels[s.start] = Label::B(s.etype).id();
    }
    let mut relations = Vec::new();
    let mut last_drug = None;
    for (i, s) in spans.iter().enumerate() {
        match s.etype.relation() {
            None => last_drug = Some(i),
            Some(rtype) => {
                if let Some(drug) = last_drug {
                    relations.push(jnrf_core::GoldRelation { attr: i, drug, rtype });
                }
            }
        }
    }
    Instance {
        ids: (0..n).map(|_| rng.random_range(0..vocab_size)).collect(),
        labels,
        spans,
        relations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub seconds: f64,
    /// Heap high-water mark above the pre-step live size; 0 when the
    /// tracking allocator is not installed.
    pub peak_bytes: usize,
    pub macs: MacCounts,
}

impl Measurement {
    /// Multiplies in the mixers and relation scoring.
    pub fn multiplies(&self) -> u64 {
        self.macs.mixer + self.macs.relation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub outcome: Result<Measurement, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub system: String,
    pub rows: Vec<BenchRow>,
}

/// One forward+backward training step.
pub fn measure_once<T: Scalar>(model: &Jnrf<T>, inst: &Instance) -> Result<Measurement> {
    counter::reset();
    let base = alloc::current_bytes();
    alloc::reset_peak();
    let started = Instant::now();
    let out = model.loss_and_grads(inst, PoolSource::Gold);
    let seconds = started.elapsed().as_secs_f64();
    let peak_bytes = alloc::peak_bytes().saturating_sub(base);
    let macs = counter::snapshot();
    drop(out?);
    Ok(Measurement { seconds, peak_bytes, macs })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn measure_length<T: Scalar>(model: &Jnrf<T>, n: usize, config: &BenchConfig) -> Result<Measurement> {
    let inst = bench_instance(n, config.vocab_size, config.drugs, config.attributes, config.seed);
    for _ in 0..config.warmup {
        measure_once(model, &inst)?;
    }
    let mut runs = Vec::with_capacity(config.trials);
    for _ in 0..config.trials {
        runs.push(measure_once(model, &inst)?);
    }
    Ok(Measurement {
        seconds: median(runs.iter().map(|m| m.seconds).collect()),
        peak_bytes: runs.iter().map(|m| m.peak_bytes).max().unwrap_or(0),
        macs: runs[0].macs,
    })
}

/// Times every length; a failing length becomes a failure row.
pub fn bench_system<T: Scalar>(spec: &SystemSpec, config: &BenchConfig) -> Result<BenchResult> {
    if config.trials < 3 {
        return Err(BenchError::TooFewTrials(config.trials));
    }
    if config.lengths.windows(2).any(|w| w[0] > w[1]) || config.lengths.contains(&0) {
        return Err(BenchError::Lengths);
    }
    let mut model_config = spec.model.clone();
    model_config.vocab_size = config.vocab_size;
    let table = EmbeddingTable::<T>::random(config.vocab_size, model_config.embed_dim, config.seed);
    let model = Jnrf::new(model_config, table)?;
    let rows = config
        .lengths
        .iter()
        .map(|&n| {
            let outcome = catch_unwind(AssertUnwindSafe(|| measure_length(&model, n, config)))
                .map_err(|p| {
                    p.downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into())
                })
                .and_then(|r| r.map_err(|e| e.to_string()));
            BenchRow { n, outcome }
        })
        .collect();
    Ok(BenchResult {
        system: spec.name.clone(),
        rows,
    })
}

/// Windows a sliding (stride 1) window of the reference size needs.
pub fn overlapping_windows(n: usize) -> usize {
    (n + 1).saturating_sub(REFERENCE_WINDOW).max(1)
}

/// `system<TAB>n<TAB>seconds<TAB>bytes<TAB>multiplies`; failed rows carry `-`.
pub fn to_tsv(results: &[BenchResult]) -> String {
    let mut out = String::from("system\tn\tseconds\tbytes\tmultiplies\n");
    for r in results {
        for row in &r.rows {
            match &row.outcome {
                Ok(m) => writeln!(out, "{}\t{}\t{:.6}\t{}\t{}", r.system, row.n, m.seconds, m.peak_bytes, m.multiplies()),
                Err(_) => writeln!(out, "{}\t{}\t-\t-\t-", r.system, row.n),
            }
            .unwrap();
        }
    }
    out
}

fn ratio(a: f64, b: f64) -> String {
    if a == b {
        "1.00".into()
    } else if b == 0.0 {
        "-".into()
    } else {
        format!("{:.2}", a / b)
    }
}

/// Time, memory and multiply ratios of each system against the first.
pub fn compare_report(results: &[BenchResult]) -> Result<String> {
    let Some(base) = results.first() else {
        return Err(BenchError::Incomparable);
    };
    let lengths: Vec<usize> = base.rows.iter().map(|r| r.n).collect();
    if results.len() < 2 || results.iter().any(|r| r.rows.iter().map(|x| x.n).ne(lengths.iter().copied())) {
        return Err(BenchError::Incomparable);
    }
    let mut out = String::new();
    writeln!(out, "Ratios against {}", base.system).unwrap();
    writeln!(
        out,
        "{:<10} {:>7} {:>8} {:>8} {:>8} {:>9} {:>12}",
        "system", "n", "time", "memory", "mults", "windows", "overlapping"
    )
    .unwrap();
    for r in results {
        for (row, b) in r.rows.iter().zip(&base.rows) {
            let windows = row.n.div_ceil(REFERENCE_WINDOW);
            let cells = match (&row.outcome, &b.outcome) {
                (Ok(m), Ok(bm)) => [
                    ratio(m.seconds, bm.seconds),
                    ratio(m.peak_bytes as f64, bm.peak_bytes as f64),
                    ratio(m.multiplies() as f64, bm.multiplies() as f64),
                ],
                _ => ["failed".into(), "-".into(), "-".into()],
            };
            writeln!(
                out,
                "{:<10} {:>7} {:>8} {:>8} {:>8} {:>9} {:>12}",
                r.system,
                row.n,
                cells[0],
                cells[1],
                cells[2],
                windows,
                overlapping_windows(row.n)
            )
            .unwrap();
        }
    }
    for r in results {
        for row in &r.rows {
            if let Err(e) = &row.outcome {
                writeln!(out, "{} n={} failed: {e}", r.system, row.n).unwrap();
            }
        }
    }
    Ok(out)
}
