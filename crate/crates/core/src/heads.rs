//! Entity tagging head, BIO decoding, selective pooling, multi-head relation
//! scoring with the polynomial distance bias, and the two losses.

use jnrf_corpus::{EntityType, Label, RelationType};
use jnrf_tensor::{counter, MacCategory, Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::config::Pooling;
use crate::error::Result;
use crate::layers::{Linear, Mlp};
use crate::params::ParamStore;

/// Number of relation heads, one per attribute type.
pub const RELATION_HEADS: usize = 8;

/// Typed token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanRef {
    pub start: usize,
    pub end: usize,
    pub etype: EntityType,
}

/// Token-wise logits `l = EN_MLP(E2)`.
pub fn ner_head<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], head: &Mlp, e2: Var) -> Result<Var> {
    head.forward(tape, vars, e2)
}

/// Row-wise argmax; ties resolve to the lowest class id.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<u8> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect()
}

/// Assembles spans from BIO ids. An `I-X` that does not continue an open
/// `X` span starts a new one.
pub fn decode_bio(labels: &[u8]) -> Vec<SpanRef> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, EntityType)> = None;
    let close = |open: &mut Option<(usize, EntityType)>, end: usize, spans: &mut Vec<SpanRef>| {
        if let Some((start, etype)) = open.take() {
            spans.push(SpanRef { start, end, etype });
        }
    };
    for (i, &id) in labels.iter().enumerate() {
        match Label::from_id(id).unwrap_or(Label::O) {
            Label::O => close(&mut open, i, &mut spans),
            Label::B(t) => {
                close(&mut open, i, &mut spans);
                open = Some((i, t));
            }
            Label::I(t) => {
                if open.map(|o| o.1) != Some(t) {
                    close(&mut open, i, &mut spans);
                    open = Some((i, t));
                }
            }
        }
    }
    close(&mut open, labels.len(), &mut spans);
    spans
}

/// Indices of drug spans (H) and of every other span (L), in input order.
pub fn partition_spans(spans: &[SpanRef]) -> (Vec<usize>, Vec<usize>) {
    (0..spans.len()).partition(|&i| spans[i].etype.is_drug())
}

/// Pooled query (drugs) and key (attributes) matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub h: Vec<usize>,
    pub l: Vec<usize>,
    pub pos_h: Vec<usize>,
    pub pos_l: Vec<usize>,
    pub q: Option<Var>,
    pub k: Option<Var>,
}

impl Pooled {
    pub fn pair_count(&self) -> usize {
        self.h.len() * self.l.len()
    }
}

fn pool_ranges(spans: &[SpanRef], idx: &[usize], pooling: Pooling) -> Vec<(usize, usize)> {
    idx.iter()
        .map(|&i| match pooling {
            Pooling::First => (spans[i].start, spans[i].start + 1),
            Pooling::Mean => (spans[i].start, spans[i].end),
        })
        .collect()
}

/// Gathers span vectors from `e3`: `Q` over drugs, `K` over the rest.
/// Positions are the first token of each span.
pub fn selective_pool<T: Scalar>(tape: &mut Tape<T>, e3: Var, spans: &[SpanRef], pooling: Pooling) -> Result<Pooled> {
    let (h, l) = partition_spans(spans);
    let mut pool = |idx: &[usize]| -> Result<Option<Var>> {
        if idx.is_empty() {
            return Ok(None);
        }
        Ok(Some(tape.pool_rows(e3, &pool_ranges(spans, idx, pooling))?))
    };
    let q = pool(&h)?;
    let k = pool(&l)?;
    Ok(Pooled {
        pos_h: h.iter().map(|&i| spans[i].start).collect(),
        pos_l: l.iter().map(|&i| spans[i].start).collect(),
        h,
        l,
        q,
        k,
    })
}

/// `D[φ,ψ] = |posH[φ] − posL[ψ]|`.
pub fn distance_matrix<T: Scalar>(pos_h: &[usize], pos_l: &[usize]) -> Tensor<T> {
    Tensor::from_fn(pos_h.len(), pos_l.len(), |i, j| {
        T::lit(pos_h[i].abs_diff(pos_l[j]) as f64)
    })
}

/// Per-head query and key maps plus the `t×3` distance coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationHeads {
    pub q: Vec<Vec<Linear>>,
    pub k: Vec<Vec<Linear>>,
    pub alpha: usize,
}

impl RelationHeads {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, rng: &mut ChaCha8Rng, d: usize, layers: usize) -> Self {
        let mut maps = |role: &str, j: usize| -> Vec<Linear> {
            (0..layers)
                .map(|k| Linear::new(store, rng, &format!("rel.{j}.{role}.{k}"), d, d, false))
                .collect()
        };
        let mut q = Vec::with_capacity(RELATION_HEADS);
        let mut k = Vec::with_capacity(RELATION_HEADS);
        for j in 0..RELATION_HEADS {
            q.push(maps("q", j));
            k.push(maps("k", j));
        }
        let alpha = store.add("rel.alpha", Tensor::zeros(RELATION_HEADS, 3));
        Self { q, k, alpha }
    }
}

fn project<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], maps: &[Linear], x: Var) -> Result<Var> {
    let mut h = x;
    for (i, m) in maps.iter().enumerate() {
        if i > 0 {
            h = tape.gelu(h);
        }
        h = m.forward(tape, vars, h)?;
    }
    Ok(h)
}

/// `Ψ⁽ʲ⁾ = Q⁽ʲ⁾K⁽ʲ⁾ᵀ + α_j1·D² + α_j2·D + α_j3·1` for every head `j`.
pub fn relation_scores<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    heads: &RelationHeads,
    q: Var,
    k: Var,
    dist: &Tensor<T>,
) -> Result<Vec<Var>> {
    counter::scoped(MacCategory::Relation, || {
        let d2 = dist.map(|x| x * x);
        let ones = Tensor::ones(dist.rows(), dist.cols());
        let alpha = vars[heads.alpha];
        let mut out = Vec::with_capacity(RELATION_HEADS);
        for j in 0..RELATION_HEADS {
            let qj = project(tape, vars, &heads.q[j], q)?;
            let kj = project(tape, vars, &heads.k[j], k)?;
            let a = tape.matmul_bt(qj, kj)?;
            let t2 = tape.scaled_const(alpha, 3 * j, d2.clone())?;
            let t1 = tape.scaled_const(alpha, 3 * j + 1, dist.clone())?;
            let t0 = tape.scaled_const(alpha, 3 * j + 2, ones.clone())?;
            let psi = tape.add(a, t2)?;
            let psi = tape.add(psi, t1)?;
            out.push(tape.add(psi, t0)?);
        }
        Ok(out)
    })
}

/// Sparse binary `|H|×|L|×t` targets: at most one drug per (key, head).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationTargets {
    pub n_h: usize,
    pub n_l: usize,
    gold: Vec<Option<usize>>,
}

impl RelationTargets {
    pub fn new(n_h: usize, n_l: usize) -> Self {
        Self {
            n_h,
            n_l,
            gold: vec![None; n_l * RELATION_HEADS],
        }
    }

    /// Marks `(h, p, j)`. Returns `false`, leaving the slice unchanged, if key
    /// `p` already has a drug for head `j`.
    pub fn set(&mut self, h: usize, p: usize, j: usize) -> bool {
        assert!(h < self.n_h && p < self.n_l && j < RELATION_HEADS);
        let slot = &mut self.gold[p * RELATION_HEADS + j];
        if slot.is_some() {
            return false;
        }
        *slot = Some(h);
        true
    }

    pub fn drug_for(&self, p: usize, j: usize) -> Option<usize> {
        self.gold[p * RELATION_HEADS + j]
    }

    pub fn get(&self, h: usize, p: usize, j: usize) -> bool {
        self.drug_for(p, j) == Some(h)
    }

    pub fn count(&self) -> usize {
        self.gold.iter().filter(|g| g.is_some()).count()
    }
}

/// `−(1/|H||L|) Σ_h Σ_p Σ_j s(Ψ⁽ʲ⁾)_{h,p} r_{h,p,j}` with `s` the log-softmax
/// over drugs for each key. `None` stands for an exact zero.
pub fn re_loss<T: Scalar>(tape: &mut Tape<T>, psi: &[Var], targets: &RelationTargets) -> Result<Option<Var>> {
    if targets.n_h == 0 || targets.n_l == 0 || targets.count() == 0 {
        return Ok(None);
    }
    counter::scoped(MacCategory::Relation, || {
        let scale = -T::one() / T::lit((targets.n_h * targets.n_l) as f64);
        let mut total: Option<Var> = None;
        for (j, &p) in psi.iter().enumerate() {
            let mut weights = Tensor::zeros(targets.n_l, targets.n_h);
            let mut any = false;
            for key in 0..targets.n_l {
                if let Some(h) = targets.drug_for(key, j) {
                    weights.set(key, h, scale);
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let pt = tape.transpose(p);
            let s = tape.log_softmax_rows(pt);
            let term = tape.weighted_sum(s, weights)?;
            total = Some(match total {
                Some(t) => tape.add(t, term)?,
                None => term,
            });
        }
        Ok(total)
    })
}

/// Mean token cross-entropy against BIO ids.
pub fn ner_loss<T: Scalar>(tape: &mut Tape<T>, logits: Var, labels: &[u8]) -> Result<Var> {
    let (n, c) = tape.shape(logits);
    let s = tape.log_softmax_rows(logits);
    let mut w = Tensor::zeros(n, c);
    let scale = -T::one() / T::lit(n.max(1) as f64);
    for (i, &y) in labels.iter().enumerate() {
        w.set(i, y as usize, scale);
    }
    Ok(tape.weighted_sum(s, w)?)
}

/// `ℒ = ℒ_NER + ℒ_RE`.
pub fn joint_loss<T: Scalar>(tape: &mut Tape<T>, ner: Var, re: Option<Var>) -> Result<Var> {
    Ok(match re {
        Some(r) => tape.add(ner, r)?,
        None => ner,
    })
}

/// One relation per non-drug key: the arg-max drug under the head of the
/// key's type. Returns `(h, p, type)` triples.
pub fn predict_relations<T: Scalar>(psi: &[Tensor<T>], key_types: &[EntityType]) -> Vec<(usize, usize, RelationType)> {
    let mut out = Vec::new();
    let Some(first) = psi.first() else { return out };
    if first.rows() == 0 {
        return out;
    }
    for (p, t) in key_types.iter().enumerate() {
        let Some(rtype) = t.relation() else { continue };
        let m = &psi[rtype.index()];
        let mut best = 0;
        for h in 1..m.rows() {
            if m.get(h, p) > m.get(best, p) {
                best = h;
            }
        }
        out.push((best, p, rtype));
    }
    out
}
