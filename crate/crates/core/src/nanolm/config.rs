use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::{Error, Result};

/// Architecture of a GPT-2 style decoder.
///
/// Pre-LayerNorm blocks, tanh-GELU MLP of width `4 * hidden`, learned
/// absolute positions, output head tied to the token embedding, no dropout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub hidden: usize,
    pub vocab_size: usize,
    pub context_length: usize,
    /// Standard deviation of the weight init, in millionths.
    #[serde(default = "default_init_std")]
    pub init_std_micro: u32,
    pub seed: u64,
}

fn default_init_std() -> u32 {
    20_000
}

impl ModelConfig {
    pub fn new(n_layers: usize, n_heads: usize, hidden: usize, vocab_size: usize, context_length: usize) -> Self {
        Self { n_layers, n_heads, hidden, vocab_size, context_length, init_std_micro: default_init_std(), seed: 0 }
    }

    /// Desk-scale default: 4 layers, 4 heads, width 128.
    pub fn desk_small(vocab_size: usize, context_length: usize) -> Self {
        Self::new(4, 4, 128, vocab_size, context_length)
    }

    /// Second desk size for scaling comparisons: 6 layers, 8 heads, width 256.
    pub fn desk_large(vocab_size: usize, context_length: usize) -> Self {
        Self::new(6, 8, 256, vocab_size, context_length)
    }

    /// Named presets: `micro`, `desk-small`, `desk-large`, `gpt-20m`,
    /// `gpt-50m`, `gpt-124m`, `gpt-210m`.
    pub fn preset(name: &str, vocab_size: usize, context_length: usize) -> Result<Self> {
        let (l, h, c) = match name {
            "micro" => (2, 2, 8),
            "desk-small" => (4, 4, 128),
            "desk-large" => (6, 8, 256),
            "gpt-20m" => (8, 8, 256),
            "gpt-50m" => (8, 8, 512),
            "gpt-124m" => (12, 12, 768),
            "gpt-210m" => (12, 16, 1024),
            other => return Err(Error::InvalidModelConfig(format!("unknown preset {other:?}"))),
        };
        Ok(Self::new(l, h, c, vocab_size, context_length))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModelConfig(m));
        if self.n_layers == 0 || self.n_heads == 0 || self.hidden == 0 {
            return bad("layers, heads and hidden size must be positive".into());
        }
        if self.hidden % self.n_heads != 0 {
            return bad(format!("hidden size {} is not divisible by {} heads", self.hidden, self.n_heads));
        }
        if self.vocab_size == 0 || self.context_length == 0 {
            return bad("vocab size and context length must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.n_heads
    }

    pub fn init_std(&self) -> f64 {
        self.init_std_micro as f64 * 1e-6
    }

    /// `V*C + P*C + L*(12*C^2 + 13*C) + 2*C`.
    pub fn param_count(&self) -> usize {
        let c = self.hidden;
        self.vocab_size * c + self.context_length * c + self.n_layers * (12 * c * c + 13 * c) + 2 * c
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub wte: Range<usize>,
    pub wpe: Range<usize>,
    pub layers: Vec<LayerLayout>,
    pub lnf_w: Range<usize>,
    pub lnf_b: Range<usize>,
    pub total: usize,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    pub ln1_w: Range<usize>,
    pub ln1_b: Range<usize>,
    pub qkv_w: Range<usize>,
    pub qkv_b: Range<usize>,
    pub attn_w: Range<usize>,
    pub attn_b: Range<usize>,
    pub ln2_w: Range<usize>,
    pub ln2_b: Range<usize>,
    pub fc_w: Range<usize>,
    pub fc_b: Range<usize>,
    pub proj_w: Range<usize>,
    pub proj_b: Range<usize>,
}

/// A named tensor in the layout. Matrices are stored `[in, out]` row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: Range<usize>,
}

impl TensorInfo {
    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let c = cfg.hidden;
        let mut tensors = Vec::new();
        let mut at = 0;
        let mut take = |name: String, shape: Vec<usize>| {
            let n: usize = shape.iter().product();
            let range = at..at + n;
            at += n;
            tensors.push(TensorInfo { name, shape, range: range.clone() });
            range
        };
        let wte = take("wte".into(), vec![cfg.vocab_size, c]);
        let wpe = take("wpe".into(), vec![cfg.context_length, c]);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let p = |s: &str| format!("h{l}.{s}");
            layers.push(LayerLayout {
                ln1_w: take(p("ln1.w"), vec![c]),
                ln1_b: take(p("ln1.b"), vec![c]),
                qkv_w: take(p("attn.qkv.w"), vec![c, 3 * c]),
                qkv_b: take(p("attn.qkv.b"), vec![3 * c]),
                attn_w: take(p("attn.proj.w"), vec![c, c]),
                attn_b: take(p("attn.proj.b"), vec![c]),
                ln2_w: take(p("ln2.w"), vec![c]),
                ln2_b: take(p("ln2.b"), vec![c]),
                fc_w: take(p("mlp.fc.w"), vec![c, 4 * c]),
                fc_b: take(p("mlp.fc.b"), vec![4 * c]),
                proj_w: take(p("mlp.proj.w"), vec![4 * c, c]),
                proj_b: take(p("mlp.proj.b"), vec![c]),
            });
        }
        let lnf_w = take("lnf.w".into(), vec![c]);
        let lnf_b = take("lnf.b".into(), vec![c]);
        Self { wte, wpe, layers, lnf_w, lnf_b, total: at, tensors }
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }
}
