//! Token-mixing blocks: Fourier, token-wise MLP and windowed attention.
//!
//! All three share one skeleton, `h = LN(x + mix(x))`, `out = LN(h + FFN(h))`,
//! where `mix` is the Fourier transform, nothing, or attention.

use jnrf_tensor::{counter, segments, MacCategory, Scalar, Tape, Var};
use rand_chacha::ChaCha8Rng;

use crate::config::{MixerConfig, MixerKind};
use crate::error::Result;
use crate::layers::{LayerNorm, Linear, Mlp};
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionParams {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockParams {
    pub kind: MixerKind,
    pub attention: Option<AttentionParams>,
    pub ln1: LayerNorm,
    pub ffn: Mlp,
    pub ln2: LayerNorm,
}

impl BlockParams {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        d: usize,
        config: &MixerConfig,
    ) -> Self {
        let attention = (config.kind == MixerKind::WindowedAttention).then(|| {
            let mut lin = |part: &str| Linear::new(store, rng, &format!("{name}.attn.{part}"), d, d, true);
            AttentionParams {
                q: lin("q"),
                k: lin("k"),
                v: lin("v"),
                o: lin("o"),
                heads: config.n_attn_heads,
                window: config.window,
            }
        });
        Self {
            kind: config.kind,
            attention,
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d),
            ffn: Mlp::new(store, rng, &format!("{name}.ffn"), d, config.ffn_hidden, d),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d),
        }
    }

    fn finish<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], mixed: Var) -> Result<Var> {
        let h = self.ln1.forward(tape, vars, mixed)?;
        let f = self.ffn.forward(tape, vars, h)?;
        let r = tape.add(h, f)?;
        self.ln2.forward(tape, vars, r)
    }
}

/// `LN(x + Re(F(x)))` followed by the feed-forward sub-layer.
pub fn fnet_block<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], p: &BlockParams, x: Var) -> Result<Var> {
    let f = tape.fourier_mix(x);
    let mixed = tape.add(x, f)?;
    p.finish(tape, vars, mixed)
}

/// Token-wise variant: the Fourier sub-layer is removed.
pub fn mlp_mixer_block<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], p: &BlockParams, x: Var) -> Result<Var> {
    p.finish(tape, vars, x)
}

/// Multi-head self-attention inside disjoint segments of `window` tokens.
pub fn windowed_attention_block<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    p: &BlockParams,
    x: Var,
) -> Result<Var> {
    let a = p
        .attention
        .as_ref()
        .expect("attention block built without attention parameters");
    let q = a.q.forward(tape, vars, x)?;
    let k = a.k.forward(tape, vars, x)?;
    let v = a.v.forward(tape, vars, x)?;
    let ctx = tape.windowed_attention(q, k, v, a.heads, a.window)?;
    let o = a.o.forward(tape, vars, ctx)?;
    let mixed = tape.add(x, o)?;
    p.finish(tape, vars, mixed)
}

pub fn mixer_block<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], p: &BlockParams, x: Var) -> Result<Var> {
    match p.kind {
        MixerKind::Fnet => fnet_block(tape, vars, p, x),
        MixerKind::Mlp => mlp_mixer_block(tape, vars, p, x),
        MixerKind::WindowedAttention => windowed_attention_block(tape, vars, p, x),
    }
}

/// The single language model whose output feeds both heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedLm {
    pub blocks: Vec<BlockParams>,
    /// When set, the whole stack runs independently on disjoint segments.
    pub segment: Option<usize>,
}

impl SharedLm {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        d: usize,
        config: &MixerConfig,
        segment: Option<usize>,
    ) -> Self {
        let blocks = (0..config.n_blocks)
            .map(|i| BlockParams::new(store, rng, &format!("lm.{i}"), d, config))
            .collect();
        Self { blocks, segment }
    }

    fn stack<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], mut x: Var) -> Result<Var> {
        for b in &self.blocks {
            x = mixer_block(tape, vars, b, x)?;
        }
        Ok(x)
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var> {
        counter::scoped(MacCategory::Mixer, || shared_lm(tape, vars, self, x))
    }
}

pub fn shared_lm<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], lm: &SharedLm, x: Var) -> Result<Var> {
    let n = tape.shape(x).0;
    match lm.segment {
        Some(w) if w < n => {
            let mut parts = Vec::new();
            for (s0, s1) in segments(n, w) {
                let part = tape.slice_rows(x, s0, s1)?;
                parts.push(lm.stack(tape, vars, part)?);
            }
            Ok(tape.concat_rows(&parts)?)
        }
        _ => lm.stack(tape, vars, x),
    }
}
