//! Adam, padding-free batching by gradient accumulation, epochs and
//! best-epoch selection.

use std::str::FromStr;
use std::time::Instant;

use jnrf_corpus::Document;
use jnrf_tensor::{Scalar, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::instance::Instance;
use crate::model::{Jnrf, PoolSource};
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments per parameter, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    /// One bias-corrected Adam update. Parameters are untouched if any
    /// gradient is non-finite.
    pub fn adam_step(&mut self, params: &mut ParamStore<T>, grads: &[Tensor<T>]) -> Result<()> {
        for (slot, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(CoreError::NonFinite(params.name(slot).to_string()));
            }
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::lit(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        for (slot, g) in grads.iter().enumerate() {
            let m = self.m[slot].data_mut();
            let v = self.v[slot].data_mut();
            let theta = params.get_mut(slot).data_mut();
            for i in 0..g.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Document,
    Sentence,
    Mixed,
}

impl FromStr for Granularity {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "document" => Ok(Granularity::Document),
            "sentence" => Ok(Granularity::Sentence),
            "mixed" => Ok(Granularity::Mixed),
            _ => Err(CoreError::Config(format!("unknown granularity {s:?}"))),
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Granularity::Document => "document",
            Granularity::Sentence => "sentence",
            Granularity::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub granularity: Granularity,
    /// Documents per optimizer step.
    pub accumulate_over: usize,
    /// Sentences per optimizer step.
    pub sentence_batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub pool: PoolSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            granularity: Granularity::Document,
            accumulate_over: 1,
            sentence_batch: 64,
            epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            pool: PoolSource::Gold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean joint loss per instance.
    pub train_loss: f64,
    pub steps: usize,
    pub instances: usize,
    pub seconds: f64,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Groups of instances whose gradients are summed into one update.
pub fn batches(docs: &[Document], config: &TrainConfig, epoch: usize) -> Result<Vec<Vec<Instance>>> {
    if config.accumulate_over == 0 || config.sentence_batch == 0 {
        return Err(CoreError::Config("batch sizes must be at least 1".into()));
    }
    let mut rng = epoch_rng(config.seed, epoch);
    let mut out = Vec::new();
    if matches!(config.granularity, Granularity::Document | Granularity::Mixed) {
        let mut insts: Vec<Instance> = docs.iter().map(Instance::from_document).collect();
        insts.shuffle(&mut rng);
        out.extend(insts.chunks(config.accumulate_over).map(<[Instance]>::to_vec));
    }
    if matches!(config.granularity, Granularity::Sentence | Granularity::Mixed) {
        let mut insts: Vec<Instance> = docs.iter().flat_map(Instance::sentences).collect();
        insts.shuffle(&mut rng);
        out.extend(insts.chunks(config.sentence_batch).map(<[Instance]>::to_vec));
    }
    if config.granularity == Granularity::Mixed {
        out.shuffle(&mut rng);
    }
    Ok(out)
}

/// One pass over `docs`, one Adam step per batch.
pub fn train_epoch<T: Scalar>(
    model: &mut Jnrf<T>,
    opt: &mut OptimizerState<T>,
    docs: &[Document],
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    if docs.is_empty() {
        return Err(CoreError::EmptyCorpus);
    }
    let started = Instant::now();
    let (mut loss, mut instances, mut steps) = (0.0, 0, 0);
    for batch in batches(docs, config, epoch)? {
        let mut acc = model.params.zeros_like();
        for inst in &batch {
            let (l, grads) = model.loss_and_grads(inst, config.pool)?;
            for (a, g) in acc.iter_mut().zip(&grads) {
                a.add_assign(g)?;
            }
            loss += l.total;
            instances += 1;
        }
        opt.adam_step(&mut model.params, &acc)?;
        steps += 1;
    }
    Ok(EpochStats {
        epoch,
        train_loss: loss / instances.max(1) as f64,
        steps,
        instances,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// 1-based epoch with the highest score; ties go to the earliest.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best.map(|b| b + 1)
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub best_epoch: usize,
    pub best: Jnrf<T>,
    pub last: Jnrf<T>,
    pub optimizer: OptimizerState<T>,
    pub history: Vec<(EpochStats, f64)>,
}

/// Trains for `config.epochs`, scoring the model with `dev` after each epoch
/// and keeping the best-scoring parameters.
pub fn fit<T, F, L>(mut model: Jnrf<T>, docs: &[Document], config: &TrainConfig, mut dev: F, mut log: L) -> Result<FitResult<T>>
where
    T: Scalar,
    F: FnMut(&Jnrf<T>) -> Result<f64>,
    L: FnMut(&EpochStats, f64),
{
    let mut opt = OptimizerState::new(&model.params, config.adam);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = model.clone();
    let mut scores = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let stats = train_epoch(&mut model, &mut opt, docs, config, epoch)?;
        let score = dev(&model)?;
        log(&stats, score);
        scores.push(score);
        if select_best(&scores) == Some(epoch) {
            best = model.clone();
        }
        history.push((stats, score));
    }
    Ok(FitResult {
        best_epoch: select_best(&scores).unwrap_or(0),
        best,
        last: model,
        optimizer: opt,
        history,
    })
}
