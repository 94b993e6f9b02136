//! Incremental decoding with a key/value cache, plus likelihood scoring.

use super::model::{Model, Query};
use super::ops::{self, gemm, View};
use super::real::Real;
use crate::packer::EOS;
use crate::{Error, Result};

/// Per-layer keys and values for the tokens consumed so far.
pub struct KvCache<R> {
    k: Vec<Vec<R>>,
    v: Vec<Vec<R>>,
    len: usize,
}

impl<R: Real> KvCache<R> {
    pub fn new(model: &Model<R>) -> Self {
        let cfg = &model.config;
        let size = cfg.context_length * cfg.hidden;
        Self {
            k: (0..cfg.n_layers).map(|_| vec![R::ZERO; size]).collect(),
            v: (0..cfg.n_layers).map(|_| vec![R::ZERO; size]).collect(),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn argmax<R: Real>(row: &[R]) -> u32 {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best as u32
}

impl<R: Real> Model<R> {
    /// Feeds one token and returns next-token logits.
    pub fn step(&self, cache: &mut KvCache<R>, token: u32) -> Result<Vec<R>> {
        let cfg = &self.config;
        let (c, nh, hd, v) = (cfg.hidden, cfg.n_heads, cfg.head_dim(), cfg.vocab_size);
        let pos = cache.len;
        if pos >= cfg.context_length {
            return Err(Error::ContextOverflow { len: pos + 1, context: cfg.context_length });
        }
        if token as usize >= v {
            return Err(Error::InvalidConfig(format!("token id {token} outside vocabulary of {v}")));
        }
        let p = |r: &std::ops::Range<usize>| &self.params[r.clone()];
        let wte = p(&self.layout.wte);
        let wpe = p(&self.layout.wpe);
        let mut x: Vec<R> = (0..c).map(|j| wte[token as usize * c + j] + wpe[pos * c + j]).collect();
        let scale = R::from_f64(1.0 / (hd as f64).sqrt());
        let (mut mean, mut rstd) = ([R::ZERO], [R::ZERO]);
        let mut ln = vec![R::ZERO; c];
        let mut qkv = vec![R::ZERO; 3 * c];
        let mut y = vec![R::ZERO; c];
        let mut h1 = vec![R::ZERO; c];
        let mut fc = vec![R::ZERO; 4 * c];
        let mut act = vec![R::ZERO; 4 * c];
        let mut scores = vec![R::ZERO; pos + 1];
        for (l, ll) in self.layout.layers.iter().enumerate() {
            ops::layernorm(&x, p(&ll.ln1_w), p(&ll.ln1_b), &mut ln, &mut mean, &mut rstd, c);
            ops::linear(&ln, p(&ll.qkv_w), p(&ll.qkv_b), &mut qkv, 1, c, 3 * c);
            cache.k[l][pos * c..(pos + 1) * c].copy_from_slice(&qkv[c..2 * c]);
            cache.v[l][pos * c..(pos + 1) * c].copy_from_slice(&qkv[2 * c..]);
            let (kc, vc) = (&cache.k[l], &cache.v[l]);
            for h in 0..nh {
                let q = &qkv[h * hd..(h + 1) * hd];
                for (j, s) in scores.iter_mut().enumerate() {
                    let k = &kc[j * c + h * hd..j * c + (h + 1) * hd];
                    *s = q.iter().zip(k).map(|(&a, &b)| a * b).sum::<R>() * scale;
                }
                ops::softmax_row(&mut scores);
                gemm(1, pos + 1, hd, R::ONE, &scores, View::rows(0, pos + 1), vc, View::rows(h * hd, c), R::ZERO, &mut y, View::rows(h * hd, c));
            }
            ops::linear(&y, p(&ll.attn_w), p(&ll.attn_b), &mut h1, 1, c, c);
            for (a, &b) in x.iter_mut().zip(&h1) {
                *a += b;
            }
            ops::layernorm(&x, p(&ll.ln2_w), p(&ll.ln2_b), &mut ln, &mut mean, &mut rstd, c);
            ops::linear(&ln, p(&ll.fc_w), p(&ll.fc_b), &mut fc, 1, c, 4 * c);
            ops::gelu(&fc, &mut act);
            ops::linear(&act, p(&ll.proj_w), p(&ll.proj_b), &mut h1, 1, 4 * c, c);
            for (a, &b) in x.iter_mut().zip(&h1) {
                *a += b;
            }
        }
        ops::layernorm(&x, p(&self.layout.lnf_w), p(&self.layout.lnf_b), &mut ln, &mut mean, &mut rstd, c);
        let mut logits = vec![R::ZERO; v];
        gemm(1, c, v, R::ONE, &ln, View::rows(0, c), wte, View::t(0, c), R::ZERO, &mut logits, View::rows(0, v));
        cache.len += 1;
        Ok(logits)
    }

    /// Greedy continuation of `prompt`.
    ///
    /// Stops after `max_new` tokens, at `<eos>` (not included in the
    /// output), or when the context is full. Ties go to the lowest id.
    pub fn generate_greedy(&self, prompt: &[u32], max_new: usize) -> Result<Vec<u32>> {
        if prompt.is_empty() {
            return Err(Error::InvalidConfig("prompt must be non-empty".into()));
        }
        if prompt.len() >= self.config.context_length {
            return Err(Error::ContextOverflow { len: prompt.len(), context: self.config.context_length });
        }
        let mut out = Vec::new();
        if max_new == 0 {
            return Ok(out);
        }
        let mut cache = KvCache::new(self);
        let mut logits = Vec::new();
        for &t in prompt {
            logits = self.step(&mut cache, t)?;
        }
        loop {
            let next = argmax(&logits);
            if next == EOS {
                break;
            }
            out.push(next);
            if out.len() == max_new || cache.len() == self.config.context_length {
                break;
            }
            logits = self.step(&mut cache, next)?;
        }
        Ok(out)
    }

    /// Log-probability distribution of the token following `prompt`.
    pub fn next_token_logprobs(&self, prompt: &[u32]) -> Result<Vec<R>> {
        let pass = self.forward(&[prompt], &[Query { seq: 0, pos: prompt.len() - 1, target: 0 }])?;
        Ok(pass.log_distribution(0).to_vec())
    }

    /// `sum_t log p(continuation[t] | prompt, continuation[..t])`.
    pub fn sequence_logprob(&self, prompt: &[u32], continuation: &[u32]) -> Result<f64> {
        if continuation.is_empty() {
            return Ok(0.0);
        }
        if prompt.is_empty() {
            return Err(Error::InvalidConfig("prompt must be non-empty".into()));
        }
        let seq = [prompt, continuation].concat();
        let queries = Query::teacher_forced(0, &seq, prompt.len()..seq.len());
        let pass = self.forward(&[&seq], &queries)?;
        Ok(pass.logp.iter().map(|l| l.to_f64()).sum())
    }
}
