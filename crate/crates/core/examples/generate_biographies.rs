//! Generate a synthetic biography dataset and look at what it contains.
//!
//! ```text
//! cargo run --release --example generate_biographies -- [n_persons] [out_dir]
//! ```

use std::path::PathBuf;

use unlearnlab::biograph::{build_dataset, Attribute, GenerationConfig, Split};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let out: Option<PathBuf> = args.next().map(PathBuf::from);

    let cfg = GenerationConfig { n_persons: n, ..GenerationConfig::default() };
    let bundle = build_dataset(&cfg, 0)?;

    println!("{:<12} {:>8} {:>8} {:>8}", "split", "persons", "bios", "qa");
    for (split, c) in &bundle.manifest.counts {
        println!("{:<12} {:>8} {:>8} {:>8}", split.as_str(), c.persons, c.bios, c.qa);
    }

    let p = bundle.persons_in(Split::HighCount).next().expect("a high-count person");
    println!("\n{} ({} copies of the biography):", p.name, bundle.bios.iter().filter(|b| b.person_id == p.id).count());
    for b in bundle.bios.iter().filter(|b| b.person_id == p.id).take(2) {
        println!("  - {}", b.text);
    }
    for q in bundle.qa.iter().filter(|q| q.person_id == p.id && q.attribute == Attribute::Employer) {
        println!("  Q: {}\n  A: {}", q.question, q.answer);
    }

    if let Some(dir) = out {
        bundle.write(&dir)?;
        println!("\nwrote {}", dir.display());
    }
    Ok(())
}
