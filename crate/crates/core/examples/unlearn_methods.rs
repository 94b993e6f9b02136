//! Unlearn one attribute of the high-count split with each forget loss and
//! print how target and retain scores move.
//!
//! ```text
//! cargo run --release --example pretrain_model
//! cargo run --release --example unlearn_methods -- [run_dir] [epochs]
//! ```
//!
//! `run_dir` is where `pretrain_model` left `data/` and `checkpoint/`.

use std::path::PathBuf;

use unlearnlab::biograph::{Attribute, Split};
use unlearnlab::lab::{unlearn_cell, Data, EvalConfig, UnlearnHyper};
use unlearnlab::nanolm::{load_checkpoint, Model};
use unlearnlab::unlearner::Method;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/example-model"));
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);

    let data = Data::read(&dir.join("data"))?;
    let base: Model<f32> = load_checkpoint(&dir.join("checkpoint"))?;
    let hyper = UnlearnHyper { epochs, batch_size: 8, ..UnlearnHyper::default() };
    let eval = EvalConfig::default();

    for method in Method::ALL {
        let cfg = hyper.to_config(method, 1.0, 0)?;
        let (_, trace) = unlearn_cell(&base, &data, Split::HighCount, Attribute::Employer, &cfg, &eval)?;
        println!("\n== {method}");
        println!("{:>5} {:>9} {:>10} {:>10} {:>10}", "epoch", "loss", "target_qa", "target_bio", "retain_qa");
        for e in &trace {
            let loss = e.losses.map(|l| format!("{:.3}", l.total)).unwrap_or_else(|| "-".into());
            println!(
                "{:>5} {:>9} {:>10.3} {:>10.3} {:>10.3}",
                e.epoch, loss, e.metrics["target_qa"], e.metrics["target_bio"], e.metrics["retain_qa"]
            );
        }
    }
    Ok(())
}
