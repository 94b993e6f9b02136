//! Run a config-driven experiment (generate, pre-train, unlearning matrix,
//! aggregation, figures) and print the report. Finished stages are cached
//! in the output directory, so re-running resumes where it stopped.
//!
//! ```text
//! cargo run --release --example run_experiment -- configs/smoke.toml
//! cargo run --release --example run_experiment -- configs/desk.toml
//! ```

use std::path::PathBuf;

use unlearnlab::lab::{render_report, report_from, run_experiment, ExperimentConfig, RunOptions};

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("configs/smoke.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    println!("{}: {} unlearning runs -> {}", cfg.name, cfg.cells().len(), cfg.out_dir.display());
    let (manifest, summary) = run_experiment(&cfg, &RunOptions { verbose: true, ..RunOptions::default() })?;
    let total: f64 = manifest.stages.iter().map(|s| s.seconds).sum();
    println!("{} stages, {:.0}s of compute recorded\n", manifest.stages.len(), total);
    print!("{}", render_report(&report_from(&[summary])));
    Ok(())
}
