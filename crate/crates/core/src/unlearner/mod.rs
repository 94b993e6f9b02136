//! Forget losses and the regularized unlearning loop.
//!
//! The objective per step is
//!
//! ```text
//! L = L_forget(y_t | x_t) + alpha * CE(y_r | x_r) + delta * CE(x_t) + alpha * CE(x_r)
//! ```
//!
//! where `t` items come from the forget set and `r` items from the retain
//! set. Every term is a batch mean of per-item token-mean cross-entropies,
//! except SimNPO, which works on summed answer log-probabilities.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::nanolm::{clip_grad_norm, AdamW, Model, Query, Real};
use crate::packer::{QaTokens, Vocabulary, REFUSAL};
use crate::{seed, Error, Result};

const TAG_FORGET_ORDER: u64 = 31;
const TAG_RETAIN_ORDER: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GradientAscent,
    Simnpo,
    Idk,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::GradientAscent, Method::Simnpo, Method::Idk];

    pub fn short(self) -> &'static str {
        match self {
            Method::GradientAscent => "ga",
            Method::Simnpo => "simnpo",
            Method::Idk => "idk",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ga" | "gradient_ascent" => Ok(Method::GradientAscent),
            "simnpo" | "sim_npo" => Ok(Method::Simnpo),
            "idk" | "refusal" => Ok(Method::Idk),
            other => Err(Error::InvalidConfig(format!("unknown unlearning method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnConfig {
    pub method: Method,
    pub alpha: f64,
    pub delta: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_refusal")]
    pub refusal: String,
    /// Global gradient-norm bound; `None` disables clipping.
    #[serde(default = "default_clip")]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_beta() -> f64 {
    0.1
}
fn default_refusal() -> String {
    REFUSAL.to_string()
}
fn default_clip() -> Option<f64> {
    Some(1.0)
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            method: Method::GradientAscent,
            alpha: 20.0,
            delta: 1.0,
            beta: default_beta(),
            gamma: 0.0,
            learning_rate: 2e-4,
            epochs: 20,
            batch_size: 16,
            seed: 0,
            refusal: default_refusal(),
            grad_clip: default_clip(),
            weight_decay: 0.0,
        }
    }
}

impl UnlearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.alpha >= 0.0) || !(self.delta >= 0.0) {
            return bad("alpha and delta must be non-negative");
        }
        if self.method == Method::Simnpo && !(self.beta > 0.0) {
            return bad("SimNPO needs beta > 0");
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return bad("learning rate and batch size must be positive");
        }
        Ok(())
    }
}

/// Negated cross-entropy: the gradient-ascent forget loss.
pub fn ga_from_ce(ce: f64) -> f64 {
    -ce
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-(2/beta) * log sigmoid(-(beta/len) * logp_sum - gamma)`.
pub fn simnpo_from_logp(logp_sum: f64, len: usize, beta: f64, gamma: f64) -> f64 {
    let z = -(beta / len as f64) * logp_sum - gamma;
    (2.0 / beta) * softplus(-z)
}

/// `d simnpo / d logp_sum`.
pub fn simnpo_grad(logp_sum: f64, len: usize, beta: f64, gamma: f64) -> f64 {
    let z = -(beta / len as f64) * logp_sum - gamma;
    (2.0 / len as f64) * (1.0 - sigmoid(z))
}

/// The four loss terms of one step and their weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub total: f64,
    pub forget: f64,
    pub retain_answer: f64,
    pub target_question: f64,
    pub retain_question: f64,
}

impl LossComponents {
    pub fn combine(forget: f64, retain_answer: f64, target_question: f64, retain_question: f64, alpha: f64, delta: f64) -> Self {
        Self {
            total: forget + alpha * retain_answer + delta * target_question + alpha * retain_question,
            forget,
            retain_answer,
            target_question,
            retain_question,
        }
    }

    fn add_scaled(&mut self, o: &Self, s: f64) {
        self.total += s * o.total;
        self.forget += s * o.forget;
        self.retain_answer += s * o.retain_answer;
        self.target_question += s * o.target_question;
        self.retain_question += s * o.retain_question;
    }
}

/// A QA pair prepared for unlearning: the token sequence and the ranges of
/// question tokens and supervised response tokens within it.
struct Item {
    tokens: Vec<u32>,
    question_len: usize,
    response: std::ops::Range<usize>,
}

impl Item {
    /// Question followed by the gold answer; `with_terminator` extends the
    /// response over the final full stop.
    fn answer(q: &QaTokens, with_terminator: bool) -> Self {
        let tokens = q.full();
        let end = q.question.len() + q.answer.len() + if with_terminator { q.terminator.len() } else { 0 };
        Self { tokens, question_len: q.question.len(), response: q.question.len()..end }
    }

    /// Question followed by the refusal and a full stop.
    fn refusal(q: &QaTokens, refusal: &[u32]) -> Self {
        let tokens = [&q.question[..], refusal, &q.terminator].concat();
        Self { question_len: q.question.len(), response: q.question.len()..tokens.len(), tokens }
    }
}

struct Group {
    items: Vec<Item>,
    queries: Vec<Query>,
    /// Per item: query ranges of (response, question).
    spans: Vec<(std::ops::Range<usize>, std::ops::Range<usize>)>,
}

impl Group {
    fn new(items: Vec<Item>) -> Self {
        let mut queries = Vec::new();
        let mut spans = Vec::new();
        for (i, it) in items.iter().enumerate() {
            let r0 = queries.len();
            queries.extend(Query::teacher_forced(i, &it.tokens, it.response.clone()));
            let q0 = queries.len();
            queries.extend(Query::teacher_forced(i, &it.tokens, 1..it.question_len));
            spans.push((r0..q0, q0..queries.len()));
        }
        Self { items, queries, spans }
    }

    fn seqs(&self) -> Vec<&[u32]> {
        self.items.iter().map(|i| i.tokens.as_slice()).collect()
    }
}

fn mean_ce(lp: &[f64]) -> f64 {
    if lp.is_empty() {
        0.0
    } else {
        -lp.iter().sum::<f64>() / lp.len() as f64
    }
}

/// Evaluates the composite objective on one batch and, if `grads` is given,
/// accumulates its gradient.
pub fn composite_loss<R: Real>(
    model: &Model<R>,
    targets: &[&QaTokens],
    retains: &[&QaTokens],
    cfg: &UnlearnConfig,
    refusal: &[u32],
    mut grads: Option<&mut [R]>,
) -> Result<LossComponents> {
    if targets.is_empty() {
        return Err(Error::InvalidConfig("empty forget batch".into()));
    }
    if let Some(q) = targets.iter().find(|q| q.answer.is_empty()) {
        return Err(Error::InvalidConfig(format!("forget item {} has an empty answer", q.id)));
    }
    let t_items: Vec<Item> = targets
        .iter()
        .map(|q| if cfg.method == Method::Idk { Item::refusal(q, refusal) } else { Item::answer(q, false) })
        .collect();
    let tg = Group::new(t_items);
    let tpass = model.forward(&tg.seqs(), &tg.queries)?;
    let tlp: Vec<f64> = tpass.logp.iter().map(|l| l.to_f64()).collect();
    let bt = targets.len() as f64;
    let mut tcoef = vec![0.0; tg.queries.len()];
    let (mut forget, mut tq) = (0.0, 0.0);
    for (resp, ques) in &tg.spans {
        let n = resp.len();
        let sum: f64 = tlp[resp.clone()].iter().sum();
        let (loss, dl_dlogp) = match cfg.method {
            Method::GradientAscent => (ga_from_ce(-sum / n as f64), 1.0 / n as f64),
            Method::Simnpo => (simnpo_from_logp(sum, n, cfg.beta, cfg.gamma), simnpo_grad(sum, n, cfg.beta, cfg.gamma)),
            Method::Idk => (-sum / n as f64, -1.0 / n as f64),
        };
        forget += loss / bt;
        tcoef[resp.clone()].fill(dl_dlogp / bt);
        if !ques.is_empty() {
            tq += mean_ce(&tlp[ques.clone()]) / bt;
            tcoef[ques.clone()].fill(-cfg.delta / (bt * ques.len() as f64));
        }
    }

    let (mut ra, mut rq) = (0.0, 0.0);
    let mut rcoef = Vec::new();
    let rg = Group::new(retains.iter().map(|q| Item::answer(q, true)).collect());
    let rpass = if retains.is_empty() { None } else { Some(model.forward(&rg.seqs(), &rg.queries)?) };
    if let Some(rpass) = &rpass {
        let rlp: Vec<f64> = rpass.logp.iter().map(|l| l.to_f64()).collect();
        let br = retains.len() as f64;
        rcoef = vec![0.0; rg.queries.len()];
        for (resp, ques) in &rg.spans {
            ra += mean_ce(&rlp[resp.clone()]) / br;
            rcoef[resp.clone()].fill(-cfg.alpha / (br * resp.len() as f64));
            if !ques.is_empty() {
                rq += mean_ce(&rlp[ques.clone()]) / br;
                rcoef[ques.clone()].fill(-cfg.alpha / (br * ques.len() as f64));
            }
        }
    }

    let comp = LossComponents::combine(forget, ra, tq, rq, cfg.alpha, cfg.delta);
    if let Some(g) = grads.as_deref_mut() {
        let tc: Vec<R> = tcoef.iter().map(|&c| R::from_f64(c)).collect();
        model.backward(&tpass, &tc, g);
        if let Some(rpass) = &rpass {
            let rc: Vec<R> = rcoef.iter().map(|&c| R::from_f64(c)).collect();
            model.backward(rpass, &rc, g);
        }
    }
    Ok(comp)
}

fn single(model: &Model<f64>, q: &QaTokens, cfg: &UnlearnConfig, refusal: &[u32]) -> Result<f64> {
    Ok(composite_loss(model, &[q], &[], cfg, refusal, None)?.forget)
}

/// Gradient-ascent loss of one item: `-CE(answer | question)`.
pub fn forget_loss_ga(model: &Model<f64>, q: &QaTokens) -> Result<f64> {
    let cfg = UnlearnConfig { method: Method::GradientAscent, alpha: 0.0, delta: 0.0, ..Default::default() };
    single(model, q, &cfg, &[])
}

pub fn forget_loss_simnpo(model: &Model<f64>, q: &QaTokens, beta: f64, gamma: f64) -> Result<f64> {
    let cfg = UnlearnConfig { method: Method::Simnpo, alpha: 0.0, delta: 0.0, beta, gamma, ..Default::default() };
    single(model, q, &cfg, &[])
}

/// Cross-entropy of `refusal` followed by the full stop, given the question.
pub fn forget_loss_idk(model: &Model<f64>, q: &QaTokens, refusal: &[u32]) -> Result<f64> {
    let cfg = UnlearnConfig { method: Method::Idk, alpha: 0.0, delta: 0.0, ..Default::default() };
    single(model, q, &cfg, refusal)
}

/// Per-epoch record of an unlearning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnEpoch {
    pub epoch: usize,
    /// Mean batch losses over the epoch; absent for epoch 0.
    pub losses: Option<LossComponents>,
    pub metrics: BTreeMap<String, f64>,
}

pub type UnlearnHook<'a, R> = dyn FnMut(usize, &Model<R>) -> Result<BTreeMap<String, f64>> + 'a;

/// Runs `cfg.epochs` passes over the forget set.
///
/// Each forget batch is paired with the next `batch_size` items of a
/// retain order that is reshuffled whenever it wraps. The hook runs before
/// the first epoch and after every epoch.
pub fn unlearn<R: Real>(
    model: &mut Model<R>,
    forget: &[QaTokens],
    retain: &[QaTokens],
    cfg: &UnlearnConfig,
    vocab: &Vocabulary,
    hook: &mut UnlearnHook<'_, R>,
) -> Result<Vec<UnlearnEpoch>> {
    cfg.validate()?;
    if forget.is_empty() {
        return Err(Error::InvalidConfig("forget set is empty".into()));
    }
    let forget_people: HashSet<u32> = forget.iter().map(|q| q.person_id).collect();
    if retain.iter().any(|q| forget_people.contains(&q.person_id)) {
        return Err(Error::InvalidConfig("forget and retain sets share a person".into()));
    }
    let refusal = vocab.encode_segment(&cfg.refusal);
    let mut trace = vec![UnlearnEpoch { epoch: 0, losses: None, metrics: hook(0, model)? }];
    let mut opt = AdamW::new(model, cfg.weight_decay);
    let mut grads = vec![R::ZERO; model.params.len()];
    let mut retain_order: Vec<usize> = (0..retain.len()).collect();
    let mut wraps = 0u64;
    retain_order.shuffle(&mut seed::rng(cfg.seed, &[TAG_RETAIN_ORDER, wraps]));
    let mut cursor = 0usize;
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..forget.len()).collect();
        order.shuffle(&mut seed::rng(cfg.seed, &[TAG_FORGET_ORDER, epoch as u64]));
        let mut sum = LossComponents::default();
        let batches = order.len().div_ceil(cfg.batch_size);
        for chunk in order.chunks(cfg.batch_size) {
            let targets: Vec<&QaTokens> = chunk.iter().map(|&i| &forget[i]).collect();
            let mut retains = Vec::with_capacity(cfg.batch_size);
            while !retain.is_empty() && retains.len() < cfg.batch_size {
                if cursor == retain_order.len() {
                    wraps += 1;
                    retain_order.shuffle(&mut seed::rng(cfg.seed, &[TAG_RETAIN_ORDER, wraps]));
                    cursor = 0;
                }
                retains.push(&retain[retain_order[cursor]]);
                cursor += 1;
            }
            grads.fill(R::ZERO);
            let comp = composite_loss(model, &targets, &retains, cfg, &refusal, Some(&mut grads))?;
            if !comp.total.is_finite() {
                return Err(Error::NonFiniteLoss { step, checkpoint: None });
            }
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut grads, c);
            }
            opt.step(&mut model.params, &grads, cfg.learning_rate);
            model.step += 1;
            step += 1;
            if !model.all_finite() {
                return Err(Error::NonFiniteLoss { step, checkpoint: None });
            }
            sum.add_scaled(&comp, 1.0 / batches as f64);
        }
        trace.push(UnlearnEpoch { epoch, losses: Some(sum), metrics: hook(epoch, model)? });
    }
    Ok(trace)
}

/// Writes the trace as CSV: loss columns, then one column per metric.
pub fn write_unlearn_trace(path: &Path, trace: &[UnlearnEpoch]) -> Result<()> {
    let mut keys: Vec<&String> = trace.iter().flat_map(|e| e.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> =
        ["epoch", "loss_total", "loss_forget", "loss_retain_answer", "loss_target_question", "loss_retain_question"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend(keys.iter().map(|k| k.to_string()));
    w.write_record(&header)?;
    for e in trace {
        let mut row = vec![e.epoch.to_string()];
        match &e.losses {
            Some(l) => row.extend(
                [l.total, l.forget, l.retain_answer, l.target_question, l.retain_question].iter().map(|v| v.to_string()),
            ),
            None => row.extend(std::iter::repeat(String::new()).take(5)),
        }
        row.extend(keys.iter().map(|k| e.metrics.get(*k).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
