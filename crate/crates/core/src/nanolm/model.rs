//! Parameters plus the batched forward and backward passes.
//!
//! A batch is a list of token sequences of any lengths up to the context.
//! All rows are stacked into one `[N, C]` activation matrix so the linear
//! layers run as single large GEMMs; attention runs per sequence and head.
//! Logits are only formed at queried positions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Layout, ModelConfig};
use super::ops::{self, gemm, View};
use super::real::Real;
use crate::{Error, Result};

/// Model parameters in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<R: Real> {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Vec<R>,
    /// Optimizer steps taken so far.
    pub step: u64,
}

/// Log-probability request: the distribution after reading `seq[..=pos]`,
/// evaluated at token `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub seq: usize,
    pub pos: usize,
    pub target: u32,
}

impl Query {
    /// Queries for `tokens[t]` at every `t` in `targets` (each `t >= 1`).
    pub fn teacher_forced(seq: usize, tokens: &[u32], targets: impl IntoIterator<Item = usize>) -> Vec<Query> {
        targets
            .into_iter()
            .map(|t| Query { seq, pos: t - 1, target: tokens[t] })
            .collect()
    }
}

struct LayerCache<R> {
    x: Vec<R>,
    ln1: Vec<R>,
    ln1_mean: Vec<R>,
    ln1_rstd: Vec<R>,
    qkv: Vec<R>,
    att: Vec<R>,
    atty: Vec<R>,
    x_mid: Vec<R>,
    ln2: Vec<R>,
    ln2_mean: Vec<R>,
    ln2_rstd: Vec<R>,
    fc: Vec<R>,
    act: Vec<R>,
}

/// Everything the backward pass needs, plus the query results.
pub struct Pass<R> {
    tokens: Vec<u32>,
    positions: Vec<usize>,
    starts: Vec<usize>,
    lens: Vec<usize>,
    att_offsets: Vec<usize>,
    layers: Vec<LayerCache<R>>,
    x_out: Vec<R>,
    lnf: Vec<R>,
    lnf_mean: Vec<R>,
    lnf_rstd: Vec<R>,
    rows: Vec<usize>,
    targets: Vec<u32>,
    /// Log-softmax rows, one per query, `[M, V]`.
    logprobs: Vec<R>,
    /// `log p(target)` per query.
    pub logp: Vec<R>,
    vocab: usize,
}

impl<R: Real> Pass<R> {
    /// Full log-distribution for query `m`.
    pub fn log_distribution(&self, m: usize) -> &[R] {
        &self.logprobs[m * self.vocab..(m + 1) * self.vocab]
    }

    pub fn n_queries(&self) -> usize {
        self.rows.len()
    }
}

impl<R: Real> Model<R> {
    /// Random init: N(0, std) for matrices and embeddings, residual output
    /// projections scaled by `1/sqrt(2 * n_layers)`, zero biases, unit
    /// LayerNorm gains.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![R::ZERO; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let std = config.init_std();
        let resid_std = std / (2.0 * config.n_layers as f64).sqrt();
        for t in layout.tensors() {
            let name = t.name.as_str();
            if name.ends_with(".b") {
                continue;
            }
            if name.starts_with("ln") || name.contains(".ln") {
                params[t.range.clone()].fill(R::ONE);
                continue;
            }
            let s = if name.ends_with("proj.w") { resid_std } else { std };
            let normal = Normal::new(0.0, s).expect("positive std");
            for p in &mut params[t.range.clone()] {
                *p = R::from_f64(normal.sample(&mut rng));
            }
        }
        Ok(Self { config, layout, params, step: 0 })
    }

    pub fn from_params(config: ModelConfig, params: Vec<R>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::BadCheckpoint(format!("expected {} parameters, found {}", layout.total, params.len())));
        }
        Ok(Self { config, layout, params, step: 0 })
    }

    /// Converts to another precision.
    pub fn cast<S: Real>(&self) -> Model<S> {
        Model {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| S::from_f64(p.to_f64())).collect(),
            step: self.step,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn p(&self, r: &std::ops::Range<usize>) -> &[R] {
        &self.params[r.clone()]
    }

    /// Runs the network over `seqs` and scores `queries`.
    pub fn forward(&self, seqs: &[&[u32]], queries: &[Query]) -> Result<Pass<R>> {
        let cfg = &self.config;
        let (c, nh, hd, v) = (cfg.hidden, cfg.n_heads, cfg.head_dim(), cfg.vocab_size);
        let mut starts = Vec::with_capacity(seqs.len());
        let mut lens = Vec::with_capacity(seqs.len());
        let mut att_offsets = Vec::with_capacity(seqs.len());
        let mut tokens = Vec::new();
        let mut positions = Vec::new();
        let mut att_total = 0;
        for s in seqs {
            if s.len() > cfg.context_length {
                return Err(Error::ContextOverflow { len: s.len(), context: cfg.context_length });
            }
            if let Some(&bad) = s.iter().find(|&&t| t as usize >= v) {
                return Err(Error::InvalidConfig(format!("token id {bad} outside vocabulary of {v}")));
            }
            starts.push(tokens.len());
            lens.push(s.len());
            att_offsets.push(att_total);
            att_total += nh * s.len() * s.len();
            tokens.extend_from_slice(s);
            positions.extend(0..s.len());
        }
        let n = tokens.len();
        let mut rows = Vec::with_capacity(queries.len());
        for q in queries {
            if q.seq >= seqs.len() || q.pos >= lens[q.seq] || q.target as usize >= v {
                return Err(Error::InvalidConfig(format!("query {q:?} out of range")));
            }
            rows.push(starts[q.seq] + q.pos);
        }

        let wte = self.p(&self.layout.wte);
        let wpe = self.p(&self.layout.wpe);
        let mut x = vec![R::ZERO; n * c];
        for (r, (&t, &pos)) in tokens.iter().zip(&positions).enumerate() {
            let te = &wte[t as usize * c..(t as usize + 1) * c];
            let pe = &wpe[pos * c..(pos + 1) * c];
            for ((o, &a), &b) in x[r * c..(r + 1) * c].iter_mut().zip(te).zip(pe) {
                *o = a + b;
            }
        }

        let scale = R::from_f64(1.0 / (hd as f64).sqrt());
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for ll in &self.layout.layers {
            let mut ln1 = vec![R::ZERO; n * c];
            let (mut ln1_mean, mut ln1_rstd) = (vec![R::ZERO; n], vec![R::ZERO; n]);
            ops::layernorm(&x, self.p(&ll.ln1_w), self.p(&ll.ln1_b), &mut ln1, &mut ln1_mean, &mut ln1_rstd, c);
            let mut qkv = vec![R::ZERO; n * 3 * c];
            ops::linear(&ln1, self.p(&ll.qkv_w), self.p(&ll.qkv_b), &mut qkv, n, c, 3 * c);

            let mut att = vec![R::ZERO; att_total];
            let mut atty = vec![R::ZERO; n * c];
            for s in 0..seqs.len() {
                let (o, t) = (starts[s], lens[s]);
                for h in 0..nh {
                    let a_off = att_offsets[s] + h * t * t;
                    let q = View::rows(o * 3 * c + h * hd, 3 * c);
                    let k = View::t(o * 3 * c + c + h * hd, 3 * c);
                    gemm(t, hd, t, scale, &qkv, q, &qkv, k, R::ZERO, &mut att, View::rows(a_off, t));
                    for i in 0..t {
                        let row = &mut att[a_off + i * t..a_off + (i + 1) * t];
                        ops::softmax_row(&mut row[..=i]);
                        row[i + 1..].fill(R::ZERO);
                    }
                    let vv = View::rows(o * 3 * c + 2 * c + h * hd, 3 * c);
                    gemm(t, t, hd, R::ONE, &att, View::rows(a_off, t), &qkv, vv, R::ZERO, &mut atty, View::rows(o * c + h * hd, c));
                }
            }

            let mut x_mid = vec![R::ZERO; n * c];
            ops::linear(&atty, self.p(&ll.attn_w), self.p(&ll.attn_b), &mut x_mid, n, c, c);
            for (m, &r) in x_mid.iter_mut().zip(&x) {
                *m += r;
            }
            let mut ln2 = vec![R::ZERO; n * c];
            let (mut ln2_mean, mut ln2_rstd) = (vec![R::ZERO; n], vec![R::ZERO; n]);
            ops::layernorm(&x_mid, self.p(&ll.ln2_w), self.p(&ll.ln2_b), &mut ln2, &mut ln2_mean, &mut ln2_rstd, c);
            let mut fc = vec![R::ZERO; n * 4 * c];
            ops::linear(&ln2, self.p(&ll.fc_w), self.p(&ll.fc_b), &mut fc, n, c, 4 * c);
            let mut act = vec![R::ZERO; n * 4 * c];
            ops::gelu(&fc, &mut act);
            let mut x_next = vec![R::ZERO; n * c];
            ops::linear(&act, self.p(&ll.proj_w), self.p(&ll.proj_b), &mut x_next, n, 4 * c, c);
            for (m, &r) in x_next.iter_mut().zip(&x_mid) {
                *m += r;
            }
            let x_in = std::mem::replace(&mut x, x_next);
            layers.push(LayerCache {
                x: x_in,
                ln1,
                ln1_mean,
                ln1_rstd,
                qkv,
                att,
                atty,
                x_mid,
                ln2,
                ln2_mean,
                ln2_rstd,
                fc,
                act,
            });
        }

        let mut lnf = vec![R::ZERO; n * c];
        let (mut lnf_mean, mut lnf_rstd) = (vec![R::ZERO; n], vec![R::ZERO; n]);
        ops::layernorm(&x, self.p(&self.layout.lnf_w), self.p(&self.layout.lnf_b), &mut lnf, &mut lnf_mean, &mut lnf_rstd, c);

        let m = rows.len();
        let mut hsel = vec![R::ZERO; m * c];
        for (i, &r) in rows.iter().enumerate() {
            hsel[i * c..(i + 1) * c].copy_from_slice(&lnf[r * c..(r + 1) * c]);
        }
        let mut logprobs = vec![R::ZERO; m * v];
        gemm(m, c, v, R::ONE, &hsel, View::rows(0, c), wte, View::t(0, c), R::ZERO, &mut logprobs, View::rows(0, v));
        let mut logp = Vec::with_capacity(m);
        for (i, q) in queries.iter().enumerate() {
            let row = &mut logprobs[i * v..(i + 1) * v];
            ops::log_softmax_row(row);
            logp.push(row[q.target as usize]);
        }

        Ok(Pass {
            tokens,
            positions,
            starts,
            lens,
            att_offsets,
            layers,
            x_out: x,
            lnf,
            lnf_mean,
            lnf_rstd,
            rows,
            targets: queries.iter().map(|q| q.target).collect(),
            logprobs,
            logp,
            vocab: v,
        })
    }

    /// Accumulates into `grads` the gradient of `sum_m coef[m] * logp[m]`.
    pub fn backward(&self, pass: &Pass<R>, coef: &[R], grads: &mut [R]) {
        assert_eq!(coef.len(), pass.rows.len(), "one coefficient per query");
        assert_eq!(grads.len(), self.params.len());
        let cfg = &self.config;
        let (c, nh, hd, v) = (cfg.hidden, cfg.n_heads, cfg.head_dim(), cfg.vocab_size);
        let n = pass.tokens.len();
        let m = pass.rows.len();
        let lay = &self.layout;

        // d logp / d logits = onehot(target) - p.
        let mut dlogits = vec![R::ZERO; m * v];
        for i in 0..m {
            let (row, lp) = (&mut dlogits[i * v..(i + 1) * v], &pass.logprobs[i * v..(i + 1) * v]);
            for (d, &l) in row.iter_mut().zip(lp) {
                *d = -coef[i] * l.exp();
            }
            row[pass.targets[i] as usize] += coef[i];
        }
        let mut hsel = vec![R::ZERO; m * c];
        for (i, &r) in pass.rows.iter().enumerate() {
            hsel[i * c..(i + 1) * c].copy_from_slice(&pass.lnf[r * c..(r + 1) * c]);
        }
        {
            let dwte = &mut grads[lay.wte.clone()];
            gemm(v, m, c, R::ONE, &dlogits, View::t(0, v), &hsel, View::rows(0, c), R::ONE, dwte, View::rows(0, c));
        }
        let mut dh = vec![R::ZERO; m * c];
        gemm(m, v, c, R::ONE, &dlogits, View::rows(0, v), self.p(&lay.wte), View::rows(0, c), R::ZERO, &mut dh, View::rows(0, c));
        let mut dlnf = vec![R::ZERO; n * c];
        for (i, &r) in pass.rows.iter().enumerate() {
            for (d, &g) in dlnf[r * c..(r + 1) * c].iter_mut().zip(&dh[i * c..(i + 1) * c]) {
                *d += g;
            }
        }

        let mut dx = vec![R::ZERO; n * c];
        {
            let (dw, db) = split2(grads, &lay.lnf_w, &lay.lnf_b);
            ops::layernorm_backward(&dlnf, &pass.x_out, self.p(&lay.lnf_w), &pass.lnf_mean, &pass.lnf_rstd, &mut dx, dw, db, c);
        }

        let scale = R::from_f64(1.0 / (hd as f64).sqrt());
        for (ll, lc) in lay.layers.iter().zip(&pass.layers).rev() {
            // MLP block.
            let mut dact = vec![R::ZERO; n * 4 * c];
            {
                let (dw, db) = split2(grads, &ll.proj_w, &ll.proj_b);
                ops::linear_backward(&dx, &lc.act, self.p(&ll.proj_w), Some(&mut dact), dw, db, n, 4 * c, c);
            }
            let mut dfc = vec![R::ZERO; n * 4 * c];
            ops::gelu_backward(&dact, &lc.fc, &mut dfc);
            drop(dact);
            let mut dln2 = vec![R::ZERO; n * c];
            {
                let (dw, db) = split2(grads, &ll.fc_w, &ll.fc_b);
                ops::linear_backward(&dfc, &lc.ln2, self.p(&ll.fc_w), Some(&mut dln2), dw, db, n, c, 4 * c);
            }
            drop(dfc);
            // dx now holds d x_mid's residual path; add the LayerNorm path.
            {
                let (dw, db) = split2(grads, &ll.ln2_w, &ll.ln2_b);
                ops::layernorm_backward(&dln2, &lc.x_mid, self.p(&ll.ln2_w), &lc.ln2_mean, &lc.ln2_rstd, &mut dx, dw, db, c);
            }

            // Attention block.
            let mut datty = vec![R::ZERO; n * c];
            {
                let (dw, db) = split2(grads, &ll.attn_w, &ll.attn_b);
                ops::linear_backward(&dx, &lc.atty, self.p(&ll.attn_w), Some(&mut datty), dw, db, n, c, c);
            }
            let mut dqkv = vec![R::ZERO; n * 3 * c];
            let max_t = pass.lens.iter().copied().max().unwrap_or(0);
            let mut dp = vec![R::ZERO; max_t * max_t];
            for s in 0..pass.starts.len() {
                let (o, t) = (pass.starts[s], pass.lens[s]);
                for h in 0..nh {
                    let a_off = pass.att_offsets[s] + h * t * t;
                    let qo = o * 3 * c + h * hd;
                    let (ko, vo) = (qo + c, qo + 2 * c);
                    let dyv = View::rows(o * c + h * hd, c);
                    // dP = dY V^T
                    gemm(t, hd, t, R::ONE, &datty, dyv, &lc.qkv, View::t(vo, 3 * c), R::ZERO, &mut dp, View::rows(0, t));
                    // dV += P^T dY
                    gemm(t, t, hd, R::ONE, &lc.att, View::t(a_off, t), &datty, dyv, R::ONE, &mut dqkv, View::rows(vo, 3 * c));
                    // dS = P * (dP - rowsum(dP * P)), then scaled.
                    for i in 0..t {
                        let p = &lc.att[a_off + i * t..a_off + (i + 1) * t];
                        let d = &mut dp[i * t..(i + 1) * t];
                        let dot: R = (0..=i).map(|j| p[j] * d[j]).sum();
                        for j in 0..=i {
                            d[j] = p[j] * (d[j] - dot) * scale;
                        }
                        d[i + 1..].fill(R::ZERO);
                    }
                    // dQ += dS K ; dK += dS^T Q
                    gemm(t, t, hd, R::ONE, &dp, View::rows(0, t), &lc.qkv, View::rows(ko, 3 * c), R::ONE, &mut dqkv, View::rows(qo, 3 * c));
                    gemm(t, t, hd, R::ONE, &dp, View::t(0, t), &lc.qkv, View::rows(qo, 3 * c), R::ONE, &mut dqkv, View::rows(ko, 3 * c));
                }
            }
            drop(datty);
            let mut dln1 = vec![R::ZERO; n * c];
            {
                let (dw, db) = split2(grads, &ll.qkv_w, &ll.qkv_b);
                ops::linear_backward(&dqkv, &lc.ln1, self.p(&ll.qkv_w), Some(&mut dln1), dw, db, n, c, 3 * c);
            }
            {
                let (dw, db) = split2(grads, &ll.ln1_w, &ll.ln1_b);
                ops::layernorm_backward(&dln1, &lc.x, self.p(&ll.ln1_w), &lc.ln1_mean, &lc.ln1_rstd, &mut dx, dw, db, c);
            }
        }

        for (r, (&t, &pos)) in pass.tokens.iter().zip(&pass.positions).enumerate() {
            let d = &dx[r * c..(r + 1) * c];
            let te = lay.wte.start + t as usize * c;
            for (g, &x) in grads[te..te + c].iter_mut().zip(d) {
                *g += x;
            }
            let pe = lay.wpe.start + pos * c;
            for (g, &x) in grads[pe..pe + c].iter_mut().zip(d) {
                *g += x;
            }
        }
    }
}

/// Two disjoint mutable sub-slices; `a` must precede `b`.
fn split2<'a, R>(v: &'a mut [R], a: &std::ops::Range<usize>, b: &std::ops::Range<usize>) -> (&'a mut [R], &'a mut [R]) {
    assert!(a.end <= b.start);
    let (lo, hi) = v.split_at_mut(b.start);
    (&mut lo[a.clone()], &mut hi[..b.len()])
}
