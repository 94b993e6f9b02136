//! Count windowed co-occurrences of (source, target) phrase pairs over a
//! corpus, then bucket the pairs into low/medium/high frequency tertiles.
//!
//! ```text
//! cargo run --release --example cooccurrence_counts -- [corpus files...]
//! ```
//!
//! Without arguments a synthetic corpus is generated in memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearnlab::cooccur::{annotate, bucketize, median_count, top_k, CorpusIndex, PhrasePair, DEFAULT_WINDOW};

const CAPITALS: [(&str, &str); 9] = [
    ("China", "Beijing"),
    ("France", "Paris"),
    ("Japan", "Tokyo"),
    ("Kenya", "Nairobi"),
    ("Peru", "Lima"),
    ("Chile", "Santiago"),
    ("Mongolia", "Ulaanbaatar"),
    ("Bhutan", "Thimphu"),
    ("New Zealand", "Wellington"),
];

fn synthetic_corpus() -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let filler = ["the", "river", "city", "of", "old", "market", "and", "north", "travel", "."];
    (0..400)
        .map(|_| {
            let mut doc: Vec<String> = (0..rng.gen_range(50..300)).map(|_| filler[rng.gen_range(0..filler.len())].to_string()).collect();
            for (i, (country, capital)) in CAPITALS.iter().enumerate() {
                // earlier entries are much more frequent
                if rng.gen_bool(0.9 / (1.0 + i as f64).powi(2)) {
                    let at = rng.gen_range(0..doc.len());
                    doc.insert(at, format!("{capital} , {country}"));
                }
            }
            doc.join(" ")
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let files: Vec<String> = std::env::args().skip(1).collect();
    let corpus = if files.is_empty() {
        let docs = synthetic_corpus();
        CorpusIndex::build(docs.iter().map(String::as_str))
    } else {
        CorpusIndex::from_files(&files)?
    };
    println!("{} documents, {} tokens\n", corpus.n_docs(), corpus.len());

    let pairs: Vec<PhrasePair> = CAPITALS
        .iter()
        .map(|(s, t)| PhrasePair { source: s.to_string(), target: t.to_string(), relation: "capital".into() })
        .collect();
    let records = bucketize(&annotate(&pairs, &corpus, DEFAULT_WINDOW)?, 3)?;
    for r in &records {
        println!("{:<12} {:<12} {:>6}  {}", r.source, r.target, r.count, r.bucket.as_deref().unwrap_or("-"));
    }

    let bucket = |label: &str| records.iter().filter(|r| r.bucket.as_deref() == Some(label)).cloned().collect::<Vec<_>>();
    let (low, high) = (bucket("low"), bucket("high"));
    if let (Some(l), Some(h)) = (median_count(&low), median_count(&high)) {
        println!("\nmedian count: low {l}, high {h}");
    }
    let top = top_k(&high, 2)?;
    println!("top of high bucket: {:?}", top.records.iter().map(|r| &r.source).collect::<Vec<_>>());
    Ok(())
}
