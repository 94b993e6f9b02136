//! A small GPT-2 style language model with hand-written gradients.
//!
//! [`Model`] holds a flat parameter vector; [`Model::forward`] runs any
//! batch of variable-length sequences and scores requested next-token
//! positions, and [`Model::backward`] accumulates the gradient of a
//! weighted sum of those log-probabilities. Every training objective in the
//! crate is expressed through that pair.

mod checkpoint;
mod config;
mod generate;
mod model;
mod ops;
mod real;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{LayerLayout, Layout, ModelConfig, TensorInfo};
pub use generate::KvCache;
pub use model::{Model, Pass, Query};
pub use real::Real;
pub use train::{
    accumulate_ce, clip_grad_norm, forward_ce, pretrain, read_trace, warmup_lr, write_trace, AdamW, CeOutput, EvalHook,
    TrainConfig, TraceRow,
};

/// Builds a model from `config`; errors on invalid shapes.
pub fn init_model<R: Real>(config: ModelConfig) -> crate::Result<Model<R>> {
    Model::init(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biograph::Kind;
    use crate::packer::{PackedExample, EOS};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn micro() -> ModelConfig {
        let mut c = ModelConfig::new(2, 2, 8, 11, 16);
        c.init_std_micro = 300_000;
        c.seed = 3;
        c
    }

    fn uniform(vocab: usize) -> Model<f64> {
        let mut m = Model::<f64>::init(ModelConfig::new(1, 1, 4, vocab, 8)).unwrap();
        m.params.fill(0.0);
        m
    }

    fn pack(tokens: Vec<u32>) -> PackedExample {
        let mut loss_mask = vec![true; tokens.len()];
        loss_mask[0] = false;
        PackedExample { tokens, loss_mask, kind: Kind::Bio, instance_ids: vec![0] }
    }

    #[test]
    fn uniform_model_cross_entropy() {
        let m = uniform(4);
        let out = forward_ce(&m, &pack(vec![0, 1, 2, 3, 1])).unwrap();
        assert_relative_eq!(out.loss, 4f64.ln(), epsilon = 1e-12);
        let none = PackedExample { loss_mask: vec![false; 5], ..pack(vec![0, 1, 2, 3, 1]) };
        let out = forward_ce(&m, &none).unwrap();
        assert!(out.empty_mask && out.loss == 0.0);
    }

    #[test]
    fn uniform_sequence_logprob() {
        let m = uniform(7);
        assert_eq!(m.sequence_logprob(&[1], &[]).unwrap(), 0.0);
        assert_relative_eq!(m.sequence_logprob(&[1, 2], &[3, 4, 5]).unwrap(), 3.0 * (1.0 / 7f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn indivisible_heads_rejected() {
        assert!(init_model::<f32>(ModelConfig::new(2, 3, 256, 10, 8)).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = Model::<f32>::init(micro()).unwrap();
        let b = Model::<f32>::init(micro()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let model = Model::<f64>::init(micro()).unwrap();
        let seqs: Vec<Vec<u32>> = vec![vec![1, 5, 2, 9, 3, 3, 7, 0, 4, 10, 6, 2, 8, 1, 5, 4], vec![2, 4, 6, 8, 10]];
        let refs: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
        let mut queries = Query::teacher_forced(0, &seqs[0], 1..16);
        queries.extend(Query::teacher_forced(1, &seqs[1], [2, 4]));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let coef: Vec<f64> = queries.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let objective = |m: &Model<f64>| -> f64 {
            let pass = m.forward(&refs, &queries).unwrap();
            pass.logp.iter().zip(&coef).map(|(l, c)| l * c).sum()
        };
        let pass = model.forward(&refs, &queries).unwrap();
        let mut grads = vec![0.0; model.params.len()];
        model.backward(&pass, &coef, &mut grads);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let i = rng.gen_range(0..model.params.len());
            let h = 1e-5;
            let mut m = model.clone();
            m.params[i] += h;
            let up = objective(&m);
            m.params[i] -= 2.0 * h;
            let down = objective(&m);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grads[i]).abs() / (fd.abs() + grads[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn ignored_positions_do_not_change_loss() {
        let model = Model::<f64>::init(micro()).unwrap();
        let base = PackedExample {
            tokens: vec![1, 2, 3, 4],
            loss_mask: vec![false, true, true, false],
            kind: Kind::Qa,
            instance_ids: vec![0],
        };
        let mut longer = base.clone();
        longer.tokens.extend([7, 8, 9]);
        longer.loss_mask.extend([false; 3]);
        let a = forward_ce(&model, &base).unwrap().loss;
        let b = forward_ce(&model, &longer).unwrap().loss;
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn distributions_are_normalized() {
        let model = Model::<f32>::init(micro()).unwrap();
        let toks = [3u32, 1, 4, 1, 5, 9, 2, 6];
        let q = Query::teacher_forced(0, &toks, 1..8);
        let pass = model.forward(&[&toks], &q).unwrap();
        for i in 0..pass.n_queries() {
            let s: f64 = pass.log_distribution(i).iter().map(|l| (*l as f64).exp()).sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn kv_cache_matches_full_forward() {
        let model = Model::<f64>::init(micro()).unwrap();
        let toks = [3u32, 1, 4, 1, 5, 9, 2, 6, 5, 3];
        let mut cache = KvCache::new(&model);
        for (t, &tok) in toks.iter().enumerate() {
            let logits = model.step(&mut cache, tok).unwrap();
            let lp = model.next_token_logprobs(&toks[..=t]).unwrap();
            let lse = {
                let mx = logits.iter().copied().fold(f64::MIN, f64::max);
                mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln()
            };
            for (a, b) in logits.iter().zip(&lp) {
                assert_relative_eq!(a - lse, *b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn greedy_is_deterministic_and_bounded() {
        let model = Model::<f32>::init(micro()).unwrap();
        assert!(model.generate_greedy(&[1, 2], 0).unwrap().is_empty());
        let a = model.generate_greedy(&[1, 2], 6).unwrap();
        assert_eq!(a, model.generate_greedy(&[1, 2], 6).unwrap());
        assert!(a.len() <= 6 && !a.contains(&EOS));
    }

    #[test]
    fn overfits_one_sentence() {
        let mut cfg = ModelConfig::new(2, 2, 32, 12, 16);
        cfg.seed = 1;
        let mut model = Model::<f32>::init(cfg).unwrap();
        let sentence: Vec<u32> = vec![5, 7, 3, 9, 4, 11, 6, EOS];
        let packs = vec![pack(sentence.clone())];
        let tc = TrainConfig { epochs: 300, batch_size: 1, learning_rate: 1e-2, ..TrainConfig::default() };
        pretrain(&mut model, packs.as_slice(), &tc, &mut |_, _| Ok(vec![])).unwrap();
        let ce = forward_ce(&model, &packs[0]).unwrap().loss;
        assert!(ce < 0.01, "ce {ce}");
        assert_eq!(model.generate_greedy(&sentence[..3], 10).unwrap(), &sentence[3..7]);
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut model = Model::<f64>::init(micro()).unwrap();
            let packs: Vec<_> = (0..4).map(|i| pack((0..12).map(|t| ((t * 3 + i) % 11) as u32).collect())).collect();
            let tc = TrainConfig { epochs: 3, batch_size: 2, ..TrainConfig::default() };
            pretrain(&mut model, packs.as_slice(), &tc, &mut |_, _| Ok(vec![])).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let mut model = Model::<f32>::init(micro()).unwrap();
        let before = model.clone();
        let tc = TrainConfig { epochs: 0, ..TrainConfig::default() };
        pretrain(&mut model, [pack(vec![1, 2, 3])].as_slice(), &tc, &mut |_, _| Ok(vec![])).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = Model::<f32>::init(micro()).unwrap();
        model.step = 17;
        save_checkpoint(dir.path(), &model).unwrap();
        let back = load_checkpoint::<f32>(dir.path()).unwrap();
        assert_eq!(model, back);
        let wide = load_checkpoint::<f64>(dir.path()).unwrap();
        assert_eq!(wide.params[5], model.params[5] as f64);
    }

    #[test]
    fn warmup_is_linear_then_flat() {
        assert_eq!(warmup_lr(1.0, 0, 4), 0.25);
        assert_eq!(warmup_lr(1.0, 3, 4), 1.0);
        assert_eq!(warmup_lr(1.0, 100, 4), 1.0);
        assert_eq!(warmup_lr(0.5, 0, 0), 0.5);
    }
}
