//! Score a checkpoint generatively (Rouge-L on QA and biography
//! completion) and probabilistically (True/False probe, likelihood rank).
//!
//! ```text
//! cargo run --release --example evaluate_model -- [run_dir]
//! ```

use std::path::PathBuf;

use unlearnlab::biograph::{Attribute, Split, TemplateBank};
use unlearnlab::evaluator::{bio_prompt, rouge_l};
use unlearnlab::lab::{evaluate_model, Data, EvalConfig};
use unlearnlab::nanolm::{load_checkpoint, Model};

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/example-model"));
    let data = Data::read(&dir.join("data"))?;
    let model: Model<f32> = load_checkpoint(&dir.join("checkpoint"))?;

    let s = rouge_l("the dog sat on the mat", "the cat sat on a mat");
    println!("Rouge-L example: p={:.3} r={:.3} f1={:.3}\n", s.precision, s.recall, s.f1);

    let person = data.bundle.persons_in(Split::LowCount).next().expect("person");
    let (prefix, gold) = bio_prompt(person, Attribute::University, &TemplateBank::standard(), 0)?;
    let out = model.generate_greedy(&data.vocab.encode_segment(&prefix), 8)?;
    println!("prompt: {prefix}\nmodel:  {}\ngold:   {gold}\n", data.vocab.decode(&out));

    let eval = EvalConfig { persons_per_split: 20, probes: true, ..EvalConfig::default() };
    let rep = evaluate_model(&model, &data, &eval, 0)?;
    println!("{:<11} {:>6} {:>6} {:>7} {:>6}", "split", "QA", "BIO", "T/F acc", "rank");
    for split in Split::ALL {
        println!(
            "{:<11} {:>6.3} {:>6.3} {:>7.3} {:>6.2}",
            split.as_str(),
            rep.qa[&split].overall,
            rep.bio[&split].overall,
            rep.probe_accuracy[&split],
            rep.mean_rank[&split]
        );
    }
    Ok(())
}
