//! Compare the hand-written backward pass with central finite differences
//! on a tiny double-precision model.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearnlab::nanolm::{Model, ModelConfig, Query};

fn main() -> anyhow::Result<()> {
    let mut cfg = ModelConfig::new(2, 2, 8, 13, 16);
    cfg.init_std_micro = 300_000;
    let model = Model::<f64>::init(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seqs: Vec<Vec<u32>> = (0..3).map(|_| (0..12).map(|_| rng.gen_range(0..13)).collect()).collect();
    let refs: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
    let queries: Vec<Query> = (0..3).flat_map(|s| Query::teacher_forced(s, &seqs[s], 1..12)).collect();
    let coef: Vec<f64> = queries.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let objective = |m: &Model<f64>| -> f64 {
        let pass = m.forward(&refs, &queries).unwrap();
        pass.logp.iter().zip(&coef).map(|(l, c)| l * c).sum()
    };

    let pass = model.forward(&refs, &queries)?;
    let mut grads = vec![0.0; model.params.len()];
    model.backward(&pass, &coef, &mut grads);

    let mut worst = 0.0f64;
    for tensor in model.layout.tensors() {
        let mut tensor_worst = 0.0f64;
        for _ in 0..8 {
            let i = rng.gen_range(tensor.range.clone());
            let mut m = model.clone();
            m.params[i] += 1e-5;
            let up = objective(&m);
            m.params[i] -= 2e-5;
            let fd = (up - objective(&m)) / 2e-5;
            // The key bias has an exactly zero gradient (softmax ignores a
            // per-query shift), so tiny values are compared absolutely.
            let rel = (fd - grads[i]).abs() / (fd.abs() + grads[i].abs()).max(1e-5);
            tensor_worst = tensor_worst.max(rel);
        }
        println!("{:<20} {:?}  max rel err {:.2e}", tensor.name, tensor.shape, tensor_worst);
        worst = worst.max(tensor_worst);
    }
    println!("\nworst relative error: {worst:.2e}");
    Ok(())
}
