//! Shared fixtures and independent scalar reference implementations.
#![allow(dead_code)]

use jnrf_core::{GoldRelation, Instance, MixerKind, ModelConfig, ParamStore, RelationHeads, RelationTargets, SpanRef};
use jnrf_corpus::{EntityType, Label};
use jnrf_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn tiny_config(kind: MixerKind, vocab_size: usize) -> ModelConfig {
    let mut c = ModelConfig {
        vocab_size,
        embed_dim: 6,
        hidden: 4,
        head_hidden: 5,
        ..ModelConfig::default()
    };
    c.mixer.kind = kind;
    c.mixer.n_blocks = 1;
    c.mixer.ffn_hidden = 5;
    c.mixer.n_attn_heads = 2;
    c.mixer.window = 5;
    c
}

/// Non-overlapping random spans with at least one drug and one attribute,
/// each attribute linked to a random drug with probability 3/4.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, vocab_size: usize) -> Instance {
    assert!(n >= 4);
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < n {
        let len = rng.random_range(1..=3).min(n - pos);
        if rng.random_bool(0.5) {
            let etype = EntityType::ALL[rng.random_range(0..EntityType::ALL.len())];
            spans.push(SpanRef { start: pos, end: pos + len, etype });
        }
        pos += len + rng.random_range(0..2);
    }
    if !spans.iter().any(|s| s.etype.is_drug()) || spans.iter().all(|s| s.etype.is_drug()) {
        spans.clear();
        spans.push(SpanRef { start: 0, end: 1, etype: EntityType::Drug });
        spans.push(SpanRef { start: 2, end: 3, etype: EntityType::Strength });
        if n > 5 {
            spans.push(SpanRef { start: n - 2, end: n, etype: EntityType::Drug });
        }
    }
    let drugs: Vec<usize> = (0..spans.len()).filter(|&i| spans[i].etype.is_drug()).collect();
    let mut relations = Vec::new();
    for (i, s) in spans.iter().enumerate() {
        if let Some(rtype) = s.etype.relation() {
            if relations.is_empty() || rng.random_bool(0.75) {
                relations.push(GoldRelation {
                    attr: i,
                    drug: drugs[rng.random_range(0..drugs.len())],
                    rtype,
                });
            }
        }
    }
    let mut labels = vec![Label::O.id(); n];
    for s in &spans {
        labels[s.start] = Label::B(s.etype).id();
        for l in &mut labels[s.start + 1..s.end] {
            *l = Label::I(s.etype).id();
        }
    }
    Instance {
        ids: (0..n).map(|_| rng.random_range(0..vocab_size)).collect(),
        labels,
        spans,
        relations,
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `−(1/n) Σ_i Σ_k s(l_ik)·e_ik`, one scalar at a time.
pub fn oracle_ner_loss(logits: &Tensor<f64>, labels: &[u8]) -> f64 {
    let n = logits.rows();
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let lse = log_sum_exp((0..logits.cols()).map(|k| logits.get(i, k)));
        for k in 0..logits.cols() {
            let e = if k == y as usize { 1.0 } else { 0.0 };
            total += (logits.get(i, k) - lse) * e;
        }
    }
    -total / n as f64
}

/// `−(1/|H||L|) Σ_h Σ_p Σ_j s(Ψ⁽ʲ⁾)_{h,p}·r_{h,p,j}`, softmax over drugs.
pub fn oracle_re_loss(psi: &[Tensor<f64>], targets: &RelationTargets) -> f64 {
    let (nh, nl) = (targets.n_h, targets.n_l);
    let mut total = 0.0;
    for h in 0..nh {
        for p in 0..nl {
            for (j, m) in psi.iter().enumerate() {
                let r = if targets.get(h, p, j) { 1.0 } else { 0.0 };
                let lse = log_sum_exp((0..nh).map(|g| m.get(g, p)));
                total += (m.get(h, p) - lse) * r;
            }
        }
    }
    -total / (nh * nl) as f64
}

/// ℒ_RE over the full `n×n` grid of token pairs, masked down to
/// (drug first token, attribute first token) cells. Single-layer heads only.
pub fn brute_force_re_loss(e3: &Tensor<f64>, params: &ParamStore<f64>, heads: &RelationHeads, inst: &Instance) -> f64 {
    let n = e3.rows();
    let d = e3.cols();
    let mut is_h = vec![false; n];
    let mut is_l = vec![false; n];
    let mut span_at = vec![usize::MAX; n];
    for (i, s) in inst.spans.iter().enumerate() {
        if s.etype.is_drug() {
            is_h[s.start] = true;
        } else {
            is_l[s.start] = true;
        }
        span_at[s.start] = i;
    }
    let n_h = is_h.iter().filter(|&&b| b).count();
    let n_l = is_l.iter().filter(|&&b| b).count();
    if n_h == 0 || n_l == 0 {
        return 0.0;
    }
    let alpha = params.get(heads.alpha);
    let mut total = 0.0;
    for j in 0..heads.q.len() {
        let wq = params.get(heads.q[j][0].w);
        let wk = params.get(heads.k[j][0].w);
        let proj = |w: &Tensor<f64>, row: usize| -> Vec<f64> {
            (0..w.cols())
                .map(|c| (0..d).map(|r| e3.get(row, r) * w.get(r, c)).sum())
                .collect()
        };
        let mut psi = vec![vec![0.0; n]; n];
        for (a, row) in psi.iter_mut().enumerate() {
            let qa = proj(wq, a);
            for (b, cell) in row.iter_mut().enumerate() {
                let kb = proj(wk, b);
                let dist = a.abs_diff(b) as f64;
                let dot: f64 = qa.iter().zip(&kb).map(|(x, y)| x * y).sum();
                *cell = dot + alpha.get(j, 0) * dist * dist + alpha.get(j, 1) * dist + alpha.get(j, 2);
            }
        }
        for b in (0..n).filter(|&b| is_l[b]) {
            let lse = log_sum_exp((0..n).filter(|&a| is_h[a]).map(|a| psi[a][b]));
            for a in (0..n).filter(|&a| is_h[a]) {
                let gold = inst.relations.iter().any(|r| {
                    r.rtype.index() == j && span_at[a] == r.drug && span_at[b] == r.attr
                });
                if gold {
                    total += psi[a][b] - lse;
                }
            }
        }
    }
    -total / (n_h * n_l) as f64
}
