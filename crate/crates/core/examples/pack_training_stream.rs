//! Tokenize a dataset and build one epoch of fixed-length training packs.
//!
//! ```text
//! cargo run --release --example pack_training_stream -- [pack_length]
//! ```

use unlearnlab::biograph::{build_dataset, GenerationConfig, Kind};
use unlearnlab::packer::{bundle_vocab, token_counts, StreamFactory};

fn main() -> anyhow::Result<()> {
    let length: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(512);
    let bundle = build_dataset(&GenerationConfig::default(), 0)?;
    let vocab = bundle_vocab(&bundle);
    println!("vocabulary: {} tokens", vocab.len());

    let factory = StreamFactory::from_bundle(&bundle, &vocab, length, (1, 3), 0)?;
    let stream = factory.epoch(0);
    let (bio, qa) = token_counts(&stream);
    println!("packs/epoch: {}  tokens/epoch: {}", factory.packs_per_epoch(), factory.tokens_per_epoch());
    println!("BIO tokens {bio}, QA tokens {qa}, ratio 1:{:.3}", qa as f64 / bio as f64);

    for kind in [Kind::Bio, Kind::Qa] {
        let pack = stream.iter().find(|p| p.kind == kind).expect("pack of each kind");
        let text = vocab.decode(&pack.tokens[..pack.tokens.len().min(60)]);
        println!("\n{kind:?} pack ({} instances), first 60 tokens:\n{text}", pack.instance_ids.len());
    }
    Ok(())
}
