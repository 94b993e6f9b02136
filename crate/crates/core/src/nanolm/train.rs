//! Cross-entropy, AdamW and the pre-training loop.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use super::checkpoint::save_checkpoint;
use super::model::{Model, Query};
use super::real::Real;
use crate::packer::{EpochSource, PackedExample};
use crate::{Error, Result};

/// Result of [`forward_ce`].
#[derive(Debug, Clone, PartialEq)]
pub struct CeOutput {
    /// Mean cross-entropy over active positions (0 when none are active).
    pub loss: f64,
    /// `log p(token_t)` for each active position `t`, in order.
    pub token_logprobs: Vec<f64>,
    /// Set when the mask selected no positions.
    pub empty_mask: bool,
}

fn mask_queries(seq: usize, tokens: &[u32], mask: &[bool]) -> Vec<Query> {
    let active = (1..tokens.len()).filter(|&t| mask[t]);
    Query::teacher_forced(seq, tokens, active)
}

/// Masked next-token cross-entropy of one packed row.
pub fn forward_ce<R: Real>(model: &Model<R>, pack: &PackedExample) -> Result<CeOutput> {
    let queries = mask_queries(0, &pack.tokens, &pack.loss_mask);
    if queries.is_empty() {
        return Ok(CeOutput { loss: 0.0, token_logprobs: Vec::new(), empty_mask: true });
    }
    let pass = model.forward(&[&pack.tokens], &queries)?;
    let lp: Vec<f64> = pass.logp.iter().map(|l| l.to_f64()).collect();
    let loss = -lp.iter().sum::<f64>() / lp.len() as f64;
    Ok(CeOutput { loss, token_logprobs: lp, empty_mask: false })
}

/// Adds the gradient of the mean masked CE over `packs` to `grads`,
/// processing `micro` rows per forward pass. Returns the loss.
pub fn accumulate_ce<R: Real>(model: &Model<R>, packs: &[&PackedExample], micro: usize, grads: &mut [R]) -> Result<f64> {
    let active: usize = packs.iter().map(|p| p.loss_mask.iter().skip(1).filter(|&&m| m).count()).sum();
    if active == 0 {
        return Ok(0.0);
    }
    let coef = R::from_f64(-1.0 / active as f64);
    let mut total = 0.0;
    for chunk in packs.chunks(micro.max(1)) {
        let seqs: Vec<&[u32]> = chunk.iter().map(|p| p.tokens.as_slice()).collect();
        let queries: Vec<Query> = chunk
            .iter()
            .enumerate()
            .flat_map(|(i, p)| mask_queries(i, &p.tokens, &p.loss_mask))
            .collect();
        let pass = model.forward(&seqs, &queries)?;
        total -= pass.logp.iter().map(|l| l.to_f64()).sum::<f64>();
        model.backward(&pass, &vec![coef; queries.len()], grads);
    }
    Ok(total / active as f64)
}

/// Decoupled-weight-decay Adam.
///
/// Weight decay applies to matrices and embeddings only, not to biases or
/// LayerNorm parameters.
#[derive(Debug, Clone)]
pub struct AdamW<R> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<R>,
    v: Vec<R>,
    decay: Vec<bool>,
    t: u64,
}

impl<R: Real> AdamW<R> {
    pub fn new(model: &Model<R>, weight_decay: f64) -> Self {
        let mut decay = vec![false; model.params.len()];
        for t in model.layout.tensors() {
            if t.is_matrix() {
                decay[t.range.clone()].fill(true);
            }
        }
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![R::ZERO; model.params.len()],
            v: vec![R::ZERO; model.params.len()],
            decay,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [R], grads: &[R], lr: f64) {
        self.t += 1;
        let (b1, b2) = (R::from_f64(self.beta1), R::from_f64(self.beta2));
        let (one_b1, one_b2) = (R::ONE - b1, R::ONE - b2);
        let c1 = R::from_f64(1.0 / (1.0 - self.beta1.powi(self.t as i32)));
        let c2 = R::from_f64(1.0 / (1.0 - self.beta2.powi(self.t as i32)));
        let (lr, eps, wd) = (R::from_f64(lr), R::from_f64(self.eps), R::from_f64(self.weight_decay));
        for i in 0..params.len() {
            let g = grads[i];
            let m = b1 * self.m[i] + one_b1 * g;
            let v = b2 * self.v[i] + one_b2 * g * g;
            self.m[i] = m;
            self.v[i] = v;
            let mut update = (m * c1) / ((v * c2).sqrt() + eps);
            if self.decay[i] {
                update += wd * params[i];
            }
            params[i] -= lr * update;
        }
    }
}

/// Scales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<R: Real>(grads: &mut [R], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.to_f64() * g.to_f64()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = R::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// Linear warmup over the first `warmup_steps`, then constant.
pub fn warmup_lr(base: f64, step: usize, warmup_steps: usize) -> f64 {
    if warmup_steps == 0 || step >= warmup_steps {
        base
    } else {
        base * (step + 1) as f64 / warmup_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    /// Rows per forward pass; bounds activation memory.
    #[serde(default = "default_micro")]
    pub micro_batch: usize,
    #[serde(default)]
    pub grad_clip: Option<f64>,
    /// Evaluate every this many epochs (and at epochs 0 and last); 0 = never.
    #[serde(default)]
    pub eval_every: usize,
    /// Where to write a checkpoint if the loss becomes non-finite.
    #[serde(default)]
    pub diagnostic_dir: Option<PathBuf>,
}

fn default_micro() -> usize {
    8
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 100,
            warmup_fraction: 0.1,
            weight_decay: 0.01,
            micro_batch: default_micro(),
            grad_clip: None,
            eval_every: 0,
            diagnostic_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig("warmup fraction must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// One `trace.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

impl TraceRow {
    pub fn new(epoch: usize, split: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        Self { epoch, split: split.into(), metric: metric.into(), value }
    }
}

/// Called at evaluation epochs with the current model; returns trace rows.
pub type EvalHook<'a, R> = dyn FnMut(usize, &Model<R>) -> Result<Vec<TraceRow>> + 'a;

fn abort<R: Real>(model: &Model<R>, cfg: &TrainConfig, step: usize) -> Error {
    let checkpoint = cfg.diagnostic_dir.as_ref().and_then(|d| save_checkpoint(d, model).ok().map(|_| d.clone()));
    Error::NonFiniteLoss { step, checkpoint }
}

/// Trains `model` on the per-epoch streams of `source`.
///
/// Records the mean training loss per epoch as `(epoch, "train", "loss")`
/// and whatever `hook` returns at evaluation epochs.
pub fn pretrain<R: Real, S: EpochSource + ?Sized>(
    model: &mut Model<R>,
    source: &S,
    cfg: &TrainConfig,
    hook: &mut EvalHook<'_, R>,
) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let mut trace = Vec::new();
    let evaluate = |e: usize| cfg.eval_every > 0 && (e == 0 || e % cfg.eval_every == 0 || e == cfg.epochs);
    if evaluate(0) {
        trace.extend(hook(0, model)?);
    }
    if cfg.epochs == 0 {
        return Ok(trace);
    }
    let steps_per_epoch = source.packs_per_epoch().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let warmup = (cfg.warmup_fraction * total as f64).floor() as usize;
    let mut opt = AdamW::new(model, cfg.weight_decay);
    let mut grads = vec![R::ZERO; model.params.len()];
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let stream = source.epoch(epoch as u64 - 1);
        if let Some(p) = stream.iter().find(|p| p.len() > model.config.context_length) {
            return Err(Error::ContextOverflow { len: p.len(), context: model.config.context_length });
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in stream.chunks(cfg.batch_size) {
            grads.fill(R::ZERO);
            let refs: Vec<&PackedExample> = batch.iter().collect();
            let loss = accumulate_ce(model, &refs, cfg.micro_batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(abort(model, cfg, step));
            }
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut grads, c);
            }
            opt.step(&mut model.params, &grads, warmup_lr(cfg.learning_rate, step, warmup));
            model.step += 1;
            step += 1;
            if !model.all_finite() {
                return Err(abort(model, cfg, step));
            }
            loss_sum += loss;
            batches += 1;
        }
        trace.push(TraceRow::new(epoch, "train", "loss", loss_sum / batches.max(1) as f64));
        if evaluate(epoch) {
            trace.extend(hook(epoch, model)?);
        }
    }
    Ok(trace)
}

pub fn write_trace(path: &std::path::Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &std::path::Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
