//! Pre-train a small decoder from scratch on synthetic biographies and
//! retain-split QA, then ask it questions it saw and questions it did not.
//!
//! ```text
//! cargo run --release --example pretrain_model -- [n_persons] [epochs] [out_dir]
//! ```
//!
//! The defaults (120 persons, 30 epochs, a 2-layer width-64 model) finish in
//! a few minutes on one core.

use std::path::PathBuf;

use unlearnlab::biograph::{Attribute, GenerationConfig, Split};
use unlearnlab::evaluator::answer_question;
use unlearnlab::lab::{pretrain_model, Data, EvalConfig, ExperimentConfig};
use unlearnlab::nanolm::{save_checkpoint, ModelConfig, TrainConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(120);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(30);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/example-model"));

    let mut exp = ExperimentConfig::desk(out.clone());
    exp.generation = GenerationConfig { n_persons: n, ..GenerationConfig::default() };
    let data = Data::generate(&exp)?;
    data.write(&out.join("data"))?;

    let model_cfg = ModelConfig::new(2, 4, 64, data.vocab.len(), 128);
    println!("{} parameters, vocabulary {}", model_cfg.param_count(), data.vocab.len());
    let train = TrainConfig { epochs, eval_every: 5, learning_rate: 2e-3, ..TrainConfig::default() };
    let eval = EvalConfig { pretrain_attributes: vec![Attribute::Employer, Attribute::Birthday], ..EvalConfig::default() };
    let (model, trace) = pretrain_model(&data, model_cfg, &train, 128, &eval, 0)?;
    for r in trace.iter().filter(|r| r.metric == "qa" || r.split == "train") {
        println!("epoch {:>3} {:<11} {:<4} {:.3}", r.epoch, r.split, r.metric, r.value);
    }
    save_checkpoint(&out.join("checkpoint"), &model)?;

    for split in [Split::Retain, Split::HighCount, Split::LowCount] {
        let q = data.bundle.qa_in(split).find(|q| q.attribute == Attribute::Employer).expect("question");
        let a = answer_question(&model, &data.vocab, &q.question, 12)?;
        println!("\n[{split}] {}\n  model: {a}\n  gold:  {}", q.question, q.answer);
    }
    println!("\ncheckpoint and data in {}", out.display());
    Ok(())
}
