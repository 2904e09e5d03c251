//! Frozen static token embeddings plus sinusoidal positional encodings.

use std::path::Path;

use jnrf_corpus::Vocab;
use jnrf_tensor::{Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CoreError, Result};

/// `vocab_size × d` lookup table. Never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    weights: Tensor<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(weights: Tensor<T>) -> Self {
        Self { weights }
    }

    /// Seeded table with independent standard-normal entries.
    pub fn random(vocab_size: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = Tensor::from_fn(vocab_size, d, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            T::lit(x)
        });
        Self { weights }
    }

    /// Parses `token<TAB>v1 v2 … vd` lines; every vocab token must appear.
    pub fn parse(text: &str, vocab: &Vocab) -> Result<Self> {
        let mut rows: Vec<Option<Vec<T>>> = vec![None; vocab.len()];
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| CoreError::Embedding {
                line: line_no,
                message,
            };
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| err("expected token<TAB>values".into()))?;
            let id = vocab
                .id(token)
                .ok_or_else(|| err(format!("token {token:?} not in vocabulary")))?;
            let v: Vec<T> = values
                .split_whitespace()
                .map(|x| x.parse::<f64>().map(T::lit))
                .collect::<Result<_, _>>()
                .map_err(|e| err(format!("bad value: {e}")))?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(err(format!("row has {} values, expected {d}", v.len())));
                }
                _ => {}
            }
            rows[id as usize] = Some(v);
        }
        let d = dim.ok_or_else(|| CoreError::Embedding {
            line: 0,
            message: "empty table".into(),
        })?;
        let mut data = Vec::with_capacity(vocab.len() * d);
        for (id, row) in rows.into_iter().enumerate() {
            let row = row.ok_or_else(|| CoreError::Embedding {
                line: 0,
                message: format!("missing row for token {:?}", vocab.token(id as u32).unwrap_or("?")),
            })?;
            data.extend(row);
        }
        Ok(Self {
            weights: Tensor::from_vec(vocab.len(), d, data)?,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    /// `n×d` matrix whose row `i` is `weights[ids[i]] + PE(i)`.
    pub fn embed(&self, ids: &[usize]) -> Result<Tensor<T>> {
        let d = self.dim();
        let freqs = frequencies::<T>(d)?;
        let mut out = Tensor::zeros(ids.len(), d);
        for (pos, &id) in ids.iter().enumerate() {
            if id >= self.vocab_size() {
                return Err(CoreError::TokenId {
                    id,
                    size: self.vocab_size(),
                });
            }
            let src = self.weights.row(id);
            let dst = out.row_mut(pos);
            let p = T::lit(pos as f64);
            for (i, &f) in freqs.iter().enumerate() {
                let angle = p * f;
                dst[2 * i] = src[2 * i] + angle.sin();
                dst[2 * i + 1] = src[2 * i + 1] + angle.cos();
            }
        }
        Ok(out)
    }
}

/// Loads a table from `path`, or builds the seeded random fallback when no
/// path is given.
pub fn load_table<T: Scalar>(path: Option<&Path>, vocab: &Vocab, d: usize, seed: u64) -> Result<EmbeddingTable<T>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CoreError::io(p, e))?;
            EmbeddingTable::parse(&text, vocab)
        }
        None => Ok(EmbeddingTable::random(vocab.len(), d, seed)),
    }
}

fn frequencies<T: Scalar>(d: usize) -> Result<Vec<T>> {
    if d % 2 != 0 {
        return Err(CoreError::Config(format!(
            "positional encoding needs an even width, got {d}"
        )));
    }
    Ok((0..d / 2)
        .map(|i| T::lit(1.0 / 10000f64.powf(2.0 * i as f64 / d as f64)))
        .collect())
}

/// `PE(pos, 2i) = sin(pos / 10000^(2i/d))`, `PE(pos, 2i+1) = cos(…)`.
pub fn positional_encoding<T: Scalar>(pos: usize, d: usize) -> Result<Vec<T>> {
    let p = T::lit(pos as f64);
    Ok(frequencies::<T>(d)?
        .into_iter()
        .flat_map(|f| [(p * f).sin(), (p * f).cos()])
        .collect())
}
