//! Parameter handles for the dense building blocks shared by every module.

use jnrf_tensor::{Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::ParamStore;

pub const LN_EPS: f64 = 1e-5;

/// Glorot-uniform `inp×out` weight and optional zero bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        inp: usize,
        out: usize,
        bias: bool,
    ) -> Self {
        let bound = (6.0 / (inp + out) as f64).sqrt();
        let w = store.add(format!("{name}.w"), Tensor::uniform(inp, out, bound, rng));
        let b = bias.then(|| store.add(format!("{name}.b"), Tensor::zeros(1, out)));
        Self { w, b }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var> {
        let y = tape.matmul(x, vars[self.w])?;
        Ok(match self.b {
            Some(b) => tape.add(y, vars[b])?,
            None => y,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerNorm {
    pub gain: usize,
    pub bias: usize,
}

impl LayerNorm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, d: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Tensor::ones(1, d)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(1, d)),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var> {
        let h = tape.normalize_rows(x, T::lit(LN_EPS));
        let h = tape.mul(h, vars[self.gain])?;
        Ok(tape.add(h, vars[self.bias])?)
    }
}

/// `Linear → GELU → Linear`, applied token-wise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
}

impl Mlp {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        inp: usize,
        hidden: usize,
        out: usize,
    ) -> Self {
        Self {
            l1: Linear::new(store, rng, &format!("{name}.0"), inp, hidden, true),
            l2: Linear::new(store, rng, &format!("{name}.1"), hidden, out, true),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var> {
        let h = self.l1.forward(tape, vars, x)?;
        let h = tape.gelu(h);
        self.l2.forward(tape, vars, h)
    }
}
