//! Tokenization and fixed-length packing of training instances.
//!
//! Every instance seeds one pack: the instance is followed by randomly
//! drawn instances of the same kind, each terminated by `<eos>`, until the
//! pack reaches `L` tokens; the last constituent may be cut. A training
//! epoch mixes BIO and QA packs at a BIO:QA token ratio by drawing extra QA
//! seeds with repetition.

mod vocab;

pub use vocab::{pieces, Vocabulary, EOS, PAD, REFUSAL, RESERVED, SPECIALS, UNK};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::biograph::{Attribute, DatasetBundle, Instance, Kind, QaInstance, TemplateBank};
use crate::{seed, Error, Result};

const TAG_BIO_PACKS: u64 = 11;
const TAG_QA_SEEDS: u64 = 12;
const TAG_QA_PACKS: u64 = 13;
const TAG_MIX: u64 = 14;

/// Default pack length.
pub const DEFAULT_LENGTH: usize = 512;

/// Builds the vocabulary over every instance text.
pub fn build_vocab(corpus: &[Instance]) -> Vocabulary {
    let texts: Vec<String> = corpus.iter().map(Instance::text).collect();
    Vocabulary::build(texts.iter().map(String::as_str))
}

/// Vocabulary over all biographies and all QA pairs of a bundle, so that
/// held-out questions and answers never hit `<unk>`, plus the words of the
/// standard paraphrase questions.
pub fn bundle_vocab(bundle: &DatasetBundle) -> Vocabulary {
    let paraphrases = TemplateBank::standard().paraphrases.into_iter().flatten().map(|t| t.replace("{NAME}", ""));
    let texts = bundle
        .bios
        .iter()
        .map(|b| b.text.clone())
        .chain(bundle.qa.iter().map(QaInstance::text))
        .chain(paraphrases);
    let texts: Vec<String> = texts.collect();
    Vocabulary::build(texts.iter().map(String::as_str))
}

/// Token form of one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInstance {
    pub id: u32,
    pub kind: Kind,
    pub tokens: Vec<u32>,
}

pub fn encode_instance(inst: &Instance, vocab: &Vocabulary) -> EncodedInstance {
    EncodedInstance {
        id: inst.id(),
        kind: inst.kind(),
        tokens: vocab.encode_segment(&inst.text()),
    }
}

/// A question and its answer as separate token runs.
///
/// The training form of a QA instance is `question ++ answer ++ terminator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaTokens {
    pub id: u32,
    pub person_id: u32,
    pub attribute: Attribute,
    pub question: Vec<u32>,
    pub answer: Vec<u32>,
    pub terminator: Vec<u32>,
}

impl QaTokens {
    pub fn new(q: &QaInstance, vocab: &Vocabulary) -> Self {
        Self {
            id: q.id,
            person_id: q.person_id,
            attribute: q.attribute,
            question: vocab.encode_segment(&q.question),
            answer: vocab.encode_segment(&q.answer),
            terminator: vocab.encode("."),
        }
    }

    pub fn full(&self) -> Vec<u32> {
        [&self.question[..], &self.answer, &self.terminator].concat()
    }
}

/// One fixed-length training row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedExample {
    pub tokens: Vec<u32>,
    /// `loss_mask[t]` marks token `t` as a prediction target (predicted from
    /// position `t - 1`); position 0 is never a target.
    pub loss_mask: Vec<bool>,
    pub kind: Kind,
    pub instance_ids: Vec<u32>,
}

impl PackedExample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// An `L`-token row holding one QA pair whose mask covers only the answer
/// tokens, padded with `<pad>`.
pub fn answer_only_example(qa: &QaTokens, length: usize) -> Result<PackedExample> {
    let mut tokens = qa.full();
    if tokens.len() > length {
        return Err(Error::ContextOverflow { len: tokens.len(), context: length });
    }
    let start = qa.question.len();
    let mut loss_mask = vec![false; length];
    loss_mask[start..start + qa.answer.len()].fill(true);
    tokens.resize(length, PAD);
    Ok(PackedExample { tokens, loss_mask, kind: Kind::Qa, instance_ids: vec![qa.id] })
}

fn build_pack(seed_idx: usize, pool: &[EncodedInstance], length: usize, rng: &mut ChaCha8Rng) -> PackedExample {
    let mut tokens = Vec::with_capacity(length + 64);
    let mut ids = Vec::new();
    let mut next = seed_idx;
    loop {
        let inst = &pool[next];
        ids.push(inst.id);
        tokens.extend_from_slice(&inst.tokens);
        tokens.push(EOS);
        if tokens.len() >= length {
            break;
        }
        next = rng.gen_range(0..pool.len());
    }
    tokens.truncate(length);
    let mut loss_mask = vec![true; length];
    loss_mask[0] = false;
    PackedExample { tokens, loss_mask, kind: pool[seed_idx].kind, instance_ids: ids }
}

fn check_homogeneous(pool: &[EncodedInstance]) -> Result<()> {
    match pool.first() {
        Some(first) if pool.iter().any(|i| i.kind != first.kind) => Err(Error::MixedKinds),
        _ => Ok(()),
    }
}

/// Packs pre-encoded instances: one pack per instance, in input order.
pub fn pack_encoded(pool: &[EncodedInstance], length: usize, seed: u64) -> Result<Vec<PackedExample>> {
    check_homogeneous(pool)?;
    if length == 0 {
        return Err(Error::InvalidConfig("pack length must be positive".into()));
    }
    let mut rng = seed::rng(seed, &[TAG_BIO_PACKS]);
    Ok((0..pool.len()).map(|i| build_pack(i, pool, length, &mut rng)).collect())
}

/// Tokenizes and packs homogeneous instances into rows of exactly `length`.
pub fn pack_instances(instances: &[Instance], length: usize, vocab: &Vocabulary, seed: u64) -> Result<Vec<PackedExample>> {
    let pool: Vec<EncodedInstance> = instances.iter().map(|i| encode_instance(i, vocab)).collect();
    pack_encoded(&pool, length, seed)
}

/// Number of QA packs that matches `n_bio` BIO packs at `ratio` (bio, qa).
pub fn qa_pack_target(n_bio: usize, ratio: (u32, u32)) -> usize {
    ((n_bio as f64) * ratio.1 as f64 / ratio.0 as f64).round() as usize
}

fn check_ratio(ratio: (u32, u32)) -> Result<()> {
    if ratio.0 == 0 || ratio.1 == 0 {
        return Err(Error::InvalidConfig(format!("token ratio must be positive, got {}:{}", ratio.0, ratio.1)));
    }
    Ok(())
}

/// Mixes already built packs into one shuffled epoch.
///
/// QA packs are sub-sampled or repeated at random so that the QA pack count
/// matches the ratio; since all packs share one length, pack counts and
/// token counts agree.
pub fn mix_stream(
    bio_packs: Vec<PackedExample>,
    qa_packs: Vec<PackedExample>,
    ratio: (u32, u32),
    seed: u64,
) -> Result<Vec<PackedExample>> {
    check_ratio(ratio)?;
    if bio_packs.is_empty() || qa_packs.is_empty() {
        return Err(Error::InvalidConfig("mix_stream needs BIO and QA packs".into()));
    }
    let mut rng = seed::rng(seed, &[TAG_MIX]);
    let target = qa_pack_target(bio_packs.len(), ratio);
    let mut qa = qa_packs;
    qa.shuffle(&mut rng);
    if qa.len() >= target {
        qa.truncate(target);
    } else {
        let have = qa.len();
        for _ in have..target {
            let pick = rng.gen_range(0..have);
            qa.push(qa[pick].clone());
        }
    }
    let mut stream = bio_packs;
    stream.extend(qa);
    stream.shuffle(&mut rng);
    Ok(stream)
}

/// Regenerates a freshly packed and shuffled training stream per epoch.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    pub bio: Vec<EncodedInstance>,
    pub qa: Vec<EncodedInstance>,
    pub length: usize,
    pub ratio: (u32, u32),
    pub seed: u64,
}

impl StreamFactory {
    pub fn new(bio: Vec<EncodedInstance>, qa: Vec<EncodedInstance>, length: usize, ratio: (u32, u32), seed: u64) -> Result<Self> {
        check_ratio(ratio)?;
        check_homogeneous(&bio)?;
        check_homogeneous(&qa)?;
        if bio.is_empty() || qa.is_empty() {
            return Err(Error::InvalidConfig("stream needs BIO and QA instances".into()));
        }
        if bio[0].kind != Kind::Bio || qa[0].kind != Kind::Qa {
            return Err(Error::MixedKinds);
        }
        Ok(Self { bio, qa, length, ratio, seed })
    }

    /// All biographies plus retain-split QA pairs of a bundle.
    pub fn from_bundle(bundle: &DatasetBundle, vocab: &Vocabulary, length: usize, ratio: (u32, u32), seed: u64) -> Result<Self> {
        let bio = bundle
            .bios
            .iter()
            .map(|b| encode_instance(&Instance::Bio(b.clone()), vocab))
            .collect();
        let qa = bundle
            .training_qa()
            .into_iter()
            .map(|q| encode_instance(&Instance::Qa(q.clone()), vocab))
            .collect();
        Self::new(bio, qa, length, ratio, seed)
    }

    pub fn packs_per_epoch(&self) -> usize {
        self.bio.len() + qa_pack_target(self.bio.len(), self.ratio)
    }

    pub fn tokens_per_epoch(&self) -> usize {
        self.packs_per_epoch() * self.length
    }

    /// The packed stream for `epoch`: one BIO pack per biography and QA
    /// packs seeded by a reshuffled, cycled list of QA instances.
    pub fn epoch(&self, epoch: u64) -> Vec<PackedExample> {
        let e = epoch;
        let bio_seed = seed::derive(self.seed, &[e, TAG_BIO_PACKS]);
        let bio_packs = pack_encoded(&self.bio, self.length, bio_seed).expect("validated pool");

        let target = qa_pack_target(self.bio.len(), self.ratio);
        let mut seeds = Vec::with_capacity(target);
        let mut order: Vec<usize> = (0..self.qa.len()).collect();
        let mut seed_rng = seed::rng(self.seed, &[e, TAG_QA_SEEDS]);
        while seeds.len() < target {
            order.shuffle(&mut seed_rng);
            let take = (target - seeds.len()).min(order.len());
            seeds.extend_from_slice(&order[..take]);
        }
        let mut pack_rng = seed::rng(self.seed, &[e, TAG_QA_PACKS]);
        let mut stream = bio_packs;
        stream.extend(seeds.into_iter().map(|i| build_pack(i, &self.qa, self.length, &mut pack_rng)));
        stream.shuffle(&mut seed::rng(self.seed, &[e, TAG_MIX]));
        stream
    }
}

/// Anything that yields a packed training stream per epoch.
pub trait EpochSource {
    fn epoch(&self, epoch: u64) -> Vec<PackedExample>;
    fn packs_per_epoch(&self) -> usize;
}

impl EpochSource for StreamFactory {
    fn epoch(&self, epoch: u64) -> Vec<PackedExample> {
        StreamFactory::epoch(self, epoch)
    }
    fn packs_per_epoch(&self) -> usize {
        StreamFactory::packs_per_epoch(self)
    }
}

/// A fixed stream replayed unchanged every epoch.
impl EpochSource for [PackedExample] {
    fn epoch(&self, _epoch: u64) -> Vec<PackedExample> {
        self.to_vec()
    }
    fn packs_per_epoch(&self) -> usize {
        self.len()
    }
}

/// Token counts of a stream by kind: (bio, qa).
pub fn token_counts(stream: &[PackedExample]) -> (usize, usize) {
    stream.iter().fold((0, 0), |(b, q), p| match p.kind {
        Kind::Bio => (b + p.len(), q),
        Kind::Qa => (b, q + p.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biograph::{build_dataset, GenerationConfig};
    use proptest::prelude::*;

    fn enc(id: u32, kind: Kind, n: usize) -> EncodedInstance {
        EncodedInstance { id, kind, tokens: (0..n).map(|i| 10 + (i % 7) as u32).collect() }
    }

    /// Reference packer: greedy fill by token arithmetic alone.
    fn reference_layout(sizes: &[usize], length: usize) -> Vec<usize> {
        let mut used = 0;
        let mut taken = Vec::new();
        for &s in sizes {
            if used >= length {
                break;
            }
            let room = length - used;
            taken.push((s + 1).min(room));
            used += s + 1;
        }
        taken
    }

    #[test]
    fn exact_length_instance_is_alone() {
        let pool = vec![enc(0, Kind::Bio, 512)];
        let packs = pack_encoded(&pool, 512, 0).unwrap();
        assert_eq!(packs.len(), 1);
        assert_eq!(packs[0].instance_ids, [0]);
        assert_eq!(packs[0].tokens, pool[0].tokens);
    }

    #[test]
    fn two_hundred_token_instances() {
        let pool: Vec<_> = (0..5).map(|i| enc(i, Kind::Qa, 200)).collect();
        for p in pack_encoded(&pool, 512, 3).unwrap() {
            assert_eq!(p.instance_ids.len(), 3);
            assert_eq!(reference_layout(&[200, 200, 200], 512), [201, 201, 110]);
            assert_eq!(p.tokens[200], EOS);
            assert_eq!(p.tokens[401], EOS);
            assert_eq!(p.tokens.iter().filter(|&&t| t == EOS).count(), 2);
        }
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let pool = vec![enc(0, Kind::Bio, 5), enc(1, Kind::Qa, 5)];
        assert!(matches!(pack_encoded(&pool, 16, 0), Err(Error::MixedKinds)));
        assert!(pack_encoded(&[], 16, 0).unwrap().is_empty());
    }

    #[test]
    fn mix_with_hundred_bio_packs() {
        let bio = pack_encoded(&(0..100).map(|i| enc(i, Kind::Bio, 30)).collect::<Vec<_>>(), 64, 0).unwrap();
        let qa = pack_encoded(&(0..100).map(|i| enc(i, Kind::Qa, 9)).collect::<Vec<_>>(), 64, 1).unwrap();
        let stream = mix_stream(bio, qa, (1, 3), 5).unwrap();
        assert_eq!(stream.len(), 400);
        let (b, q) = token_counts(&stream);
        assert_eq!(q, 3 * b);
    }

    #[test]
    fn equal_ratio_is_a_permutation() {
        let bio = pack_encoded(&(0..20).map(|i| enc(i, Kind::Bio, 30)).collect::<Vec<_>>(), 64, 0).unwrap();
        let qa = pack_encoded(&(0..20).map(|i| enc(i, Kind::Qa, 9)).collect::<Vec<_>>(), 64, 1).unwrap();
        let mut expected: Vec<_> = bio.iter().chain(&qa).cloned().collect();
        let mut got = mix_stream(bio, qa, (1, 1), 5).unwrap();
        let key = |p: &PackedExample| (p.kind == Kind::Qa, p.instance_ids.clone(), p.tokens.clone());
        expected.sort_by_key(key);
        got.sort_by_key(key);
        assert_eq!(expected, got);
    }

    #[test]
    fn answer_only_mask() {
        let q = QaTokens {
            id: 0,
            person_id: 0,
            attribute: Attribute::Employer,
            question: vec![5, 6, 7],
            answer: vec![8, 9],
            terminator: vec![4],
        };
        let ex = answer_only_example(&q, 8).unwrap();
        assert_eq!(ex.tokens, [5, 6, 7, 8, 9, 4, PAD, PAD]);
        assert_eq!(ex.loss_mask, [false, false, false, true, true, false, false, false]);
    }

    #[test]
    fn desk_bundle_stream() {
        let cfg = GenerationConfig { n_persons: 120, ..Default::default() };
        let bundle = build_dataset(&cfg, 4).unwrap();
        let vocab = bundle_vocab(&bundle);
        let factory = StreamFactory::from_bundle(&bundle, &vocab, 128, (1, 3), 9).unwrap();
        let s0 = factory.epoch(0);
        assert_eq!(s0, factory.epoch(0));
        assert_ne!(s0, factory.epoch(1));
        assert_eq!(s0.len(), factory.packs_per_epoch());
        assert!(s0.iter().all(|p| p.len() == 128));
        let (b, q) = token_counts(&s0);
        let r = q as f64 / b as f64;
        assert!((r - 3.0).abs() <= 0.3, "ratio {r}");
        for inst in factory.bio.iter().chain(&factory.qa) {
            assert!(!inst.tokens.contains(&UNK));
        }
    }

    #[test]
    fn vocab_is_deterministic() {
        let bundle = build_dataset(&GenerationConfig { n_persons: 50, ..Default::default() }, 1).unwrap();
        assert_eq!(bundle_vocab(&bundle), bundle_vocab(&bundle));
    }

    proptest! {
        #[test]
        fn packs_have_exact_length(sizes in prop::collection::vec(1usize..90, 1..20), length in 1usize..200, s in any::<u64>()) {
            let pool: Vec<_> = sizes.iter().enumerate().map(|(i, &n)| enc(i as u32, Kind::Bio, n)).collect();
            let packs = pack_encoded(&pool, length, s).unwrap();
            prop_assert_eq!(packs.len(), pool.len());
            for (i, p) in packs.iter().enumerate() {
                prop_assert_eq!(p.tokens.len(), length);
                prop_assert_eq!(p.loss_mask.len(), length);
                prop_assert_eq!(p.instance_ids[0], i as u32);
                let sizes: Vec<usize> = p.instance_ids.iter().map(|&id| pool[id as usize].tokens.len()).collect();
                let layout = reference_layout(&sizes, length);
                prop_assert_eq!(layout.len(), sizes.len());
                prop_assert_eq!(layout.iter().sum::<usize>(), length);
            }
        }
    }
}
