use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixerKind {
    Fnet,
    Mlp,
    WindowedAttention,
}

impl MixerKind {
    pub fn name(self) -> &'static str {
        match self {
            MixerKind::Fnet => "fnet",
            MixerKind::Mlp => "mlp",
            MixerKind::WindowedAttention => "windowed_attention",
        }
    }
}

impl fmt::Display for MixerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MixerKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fnet" => Ok(MixerKind::Fnet),
            "mlp" => Ok(MixerKind::Mlp),
            "windowed_attention" => Ok(MixerKind::WindowedAttention),
            _ => Err(CoreError::Config(format!("unknown mixer kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixerConfig {
    pub kind: MixerKind,
    pub n_blocks: usize,
    pub ffn_hidden: usize,
    /// Attention segment length (windowed attention only).
    pub window: usize,
    pub n_attn_heads: usize,
}

impl Default for MixerConfig {
    fn default() -> Self {
        Self {
            kind: MixerKind::Fnet,
            n_blocks: 2,
            ffn_hidden: 128,
            window: 512,
            n_attn_heads: 4,
        }
    }
}

/// How a multi-token span becomes one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    First,
    Mean,
}

impl FromStr for Pooling {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Pooling::First),
            "mean" => Ok(Pooling::Mean),
            _ => Err(CoreError::Config(format!("unknown pooling {s:?}"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::First => "first",
            Pooling::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Width `d` of every representation after the input MLP.
    pub hidden: usize,
    pub mixer: MixerConfig,
    /// Hidden width of the token-wise entity and relation MLPs.
    pub head_hidden: usize,
    /// Depth of each per-head key/query map.
    pub qk_layers: usize,
    pub pooling: Pooling,
    /// Run the language model over disjoint segments of this many tokens.
    pub lm_window: Option<usize>,
    /// Keep the distance coefficients fixed at their initial value.
    pub freeze_alpha: bool,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            embed_dim: 64,
            hidden: 64,
            mixer: MixerConfig::default(),
            head_hidden: 64,
            qk_layers: 1,
            pooling: Pooling::First,
            lm_window: None,
            freeze_alpha: false,
            init_seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CoreError::Config(format!("{key}: cannot parse {value:?}")))
}

impl ModelConfig {
    pub const KEYS: [&'static str; 14] = [
        "vocab_size",
        "embed_dim",
        "hidden",
        "mixer",
        "n_blocks",
        "ffn_hidden",
        "window",
        "n_attn_heads",
        "head_hidden",
        "qk_layers",
        "pooling",
        "lm_window",
        "freeze_alpha",
        "init_seed",
    ];

    /// Sets one key; returns `false` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "mixer" => self.mixer.kind = value.parse()?,
            "n_blocks" => self.mixer.n_blocks = parse(key, value)?,
            "ffn_hidden" => self.mixer.ffn_hidden = parse(key, value)?,
            "window" => self.mixer.window = parse(key, value)?,
            "n_attn_heads" => self.mixer.n_attn_heads = parse(key, value)?,
            "head_hidden" => self.head_hidden = parse(key, value)?,
            "qk_layers" => self.qk_layers = parse(key, value)?,
            "pooling" => self.pooling = value.parse()?,
            "lm_window" => {
                self.lm_window = match value {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "freeze_alpha" => self.freeze_alpha = parse(key, value)?,
            "init_seed" => self.init_seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("vocab_size", self.vocab_size.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden", self.hidden.to_string()),
            ("mixer", self.mixer.kind.to_string()),
            ("n_blocks", self.mixer.n_blocks.to_string()),
            ("ffn_hidden", self.mixer.ffn_hidden.to_string()),
            ("window", self.mixer.window.to_string()),
            ("n_attn_heads", self.mixer.n_attn_heads.to_string()),
            ("head_hidden", self.head_hidden.to_string()),
            ("qk_layers", self.qk_layers.to_string()),
            ("pooling", self.pooling.to_string()),
            (
                "lm_window",
                self.lm_window.map_or("none".to_string(), |w| w.to_string()),
            ),
            ("freeze_alpha", self.freeze_alpha.to_string()),
            ("init_seed", self.init_seed.to_string()),
        ]
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CoreError::Config(format!("expected `key = value`, got {line:?}")))?;
            if !c.set(k.trim(), v.trim())? {
                return Err(CoreError::Config(format!("unknown key {:?}", k.trim())));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("n_blocks", self.mixer.n_blocks),
            ("ffn_hidden", self.mixer.ffn_hidden),
            ("window", self.mixer.window),
            ("n_attn_heads", self.mixer.n_attn_heads),
            ("head_hidden", self.head_hidden),
            ("qk_layers", self.qk_layers),
        ];
        for (k, v) in widths {
            if v == 0 {
                return Err(CoreError::Config(format!("{k} must be at least 1")));
            }
        }
        if self.embed_dim % 2 != 0 {
            return Err(CoreError::Config(format!(
                "embed_dim {} must be even for positional encoding",
                self.embed_dim
            )));
        }
        if self.mixer.kind == MixerKind::WindowedAttention && self.hidden % self.mixer.n_attn_heads != 0 {
            return Err(CoreError::Config(format!(
                "hidden {} not divisible by {} attention heads",
                self.hidden, self.mixer.n_attn_heads
            )));
        }
        if self.lm_window == Some(0) {
            return Err(CoreError::Config("lm_window must be at least 1".into()));
        }
        Ok(())
    }
}
