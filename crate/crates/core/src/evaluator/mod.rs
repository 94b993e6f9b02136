//! Generative and likelihood-based evaluation.
//!
//! QA accuracy greedily decodes an answer from the question; BIO accuracy
//! renders a biography with freshly drawn templates, cuts it just before an
//! attribute value and decodes the continuation. Both are scored with
//! Rouge-L. The True/False probe and likelihood rank read probabilities
//! instead of decoding.

mod rouge;

pub use rouge::{lcs_len, normalize_words, rouge_l, rouge_l_words, RougeScore};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::biograph::{bio_with_draw, Attribute, PersonProfile, QaInstance, Split, TemplateBank};
use crate::nanolm::{Model, Real};
use crate::packer::Vocabulary;
use crate::{seed, Error, Result};

const TAG_BIO_EVAL: u64 = 21;

/// Extra decoding budget beyond the gold answer length.
pub const DECODE_SLACK: usize = 5;

/// Mean Rouge-L F1 per attribute plus the overall mean.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeScores {
    pub per_attribute: BTreeMap<Attribute, f64>,
    pub overall: f64,
    pub count: usize,
}

impl AttributeScores {
    fn from_items(items: &[(Attribute, f64)]) -> Self {
        let mut sums: BTreeMap<Attribute, (f64, usize)> = BTreeMap::new();
        for &(a, s) in items {
            let e = sums.entry(a).or_default();
            e.0 += s;
            e.1 += 1;
        }
        let overall = if items.is_empty() { 0.0 } else { items.iter().map(|x| x.1).sum::<f64>() / items.len() as f64 };
        Self {
            per_attribute: sums.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect(),
            overall,
            count: items.len(),
        }
    }
}

/// Greedy answer to one question, decoded to text.
pub fn answer_question<R: Real>(model: &Model<R>, vocab: &Vocabulary, question: &str, max_new: usize) -> Result<String> {
    let prompt = vocab.encode_segment(question);
    let out = model.generate_greedy(&prompt, max_new)?;
    Ok(vocab.decode_segment(&out))
}

/// Rouge-L of greedy answers against gold answers, by attribute.
pub fn eval_qa<R: Real>(model: &Model<R>, qa_set: &[&QaInstance], vocab: &Vocabulary) -> Result<AttributeScores> {
    if qa_set.is_empty() {
        return Err(Error::InvalidConfig("eval_qa needs at least one question".into()));
    }
    let mut items = Vec::with_capacity(qa_set.len());
    for q in qa_set {
        let budget = vocab.encode_segment(&q.answer).len() + DECODE_SLACK;
        let hyp = answer_question(model, vocab, &q.question, budget)?;
        items.push((q.attribute, rouge_l(&hyp, &q.answer).f1));
    }
    Ok(AttributeScores::from_items(&items))
}

/// Biography prefix up to (not including) the value of `attribute`, under a
/// template draw derived from `(seed, person)`. Returns (prefix, gold value).
pub fn bio_prompt(profile: &PersonProfile, attribute: Attribute, bank: &TemplateBank, seed: u64) -> Result<(String, String)> {
    let mut rng = seed::rng(seed, &[TAG_BIO_EVAL, profile.id as u64]);
    let mut draw = [0u16; 6];
    for (d, slot) in draw.iter_mut().zip(&bank.slots) {
        *d = rng.gen_range(0..slot.len()) as u16;
    }
    let (text, spans) = bio_with_draw(profile, bank, draw)?;
    let [start, end] = spans[attribute.index()];
    if start == end {
        return Err(Error::InvalidConfig(format!("attribute {attribute} missing from rendered biography")));
    }
    Ok((text[..start].trim_end().to_string(), text[start..end].to_string()))
}

/// Scores a BIO completion: only the first `k` normalized words of the
/// continuation count, `k` being the gold value's word count, because the
/// model naturally keeps writing the biography after the value.
pub fn score_completion(continuation: &str, gold: &str) -> f64 {
    let gold_words = normalize_words(gold);
    let mut hyp = normalize_words(continuation);
    hyp.truncate(gold_words.len());
    rouge_l_words(&hyp, &gold_words).f1
}

/// Mean Rouge-L of biography completions for `attribute` over `profiles`.
pub fn eval_bio<R: Real>(
    model: &Model<R>,
    profiles: &[&PersonProfile],
    attribute: Attribute,
    bank: &TemplateBank,
    seed: u64,
    vocab: &Vocabulary,
) -> Result<f64> {
    eval_bio_with_budget(model, profiles, attribute, bank, seed, vocab, None)
}

/// [`eval_bio`] with an explicit decoding budget (`None` = gold length + slack).
pub fn eval_bio_with_budget<R: Real>(
    model: &Model<R>,
    profiles: &[&PersonProfile],
    attribute: Attribute,
    bank: &TemplateBank,
    seed: u64,
    vocab: &Vocabulary,
    max_new: Option<usize>,
) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::InvalidConfig("eval_bio needs at least one person".into()));
    }
    let mut total = 0.0;
    for p in profiles {
        let (prefix, gold) = bio_prompt(p, attribute, bank, seed)?;
        let prompt = vocab.encode_segment(&prefix);
        let budget = max_new.unwrap_or_else(|| vocab.encode_segment(&gold).len() + DECODE_SLACK);
        let out = model.generate_greedy(&prompt, budget)?;
        total += score_completion(&vocab.decode(&out), &gold);
    }
    Ok(total / profiles.len() as f64)
}

/// Few-shot header and exemplars of the True/False verification prompt.
pub const TF_HEADER: &str = "The following are Questions and Answers. State if the answer to each question is true or false.";

pub const TF_EXEMPLARS: [(&str, &str, bool); 10] = [
    ("How many planets are in the solar system?", "Eight", true),
    ("What is the tallest mountain in the world?", "Mount Everest", true),
    ("Where was pizza invented?", "France", false),
    ("Who painted the Mona Lisa?", "Leonardo da Vinci", true),
    ("What color is the gemstone ruby?", "Blue", false),
    ("Are sharks mammals?", "No", false),
    ("Can humans breathe underwater without equipment?", "Yes", false),
    ("Who wrote the novel 1984?", "George Orwell", true),
    ("What is the chemical symbol 'Au' for?", "Aluminum", false),
    ("What is the primary ingredient in traditional hummus?", "Chickpeas", true),
];

/// The full probe prompt for one question/answer pair.
pub fn true_false_prompt(question: &str, answer: &str) -> String {
    let mut s = String::from(TF_HEADER);
    for (q, a, v) in TF_EXEMPLARS {
        s.push_str(&format!("\n\nQuestion: {q}\nAnswer: {a}\nTrue or False: {}", if v { "True" } else { "False" }));
    }
    s.push_str(&format!("\n\nQuestion: {question}\nAnswer: {answer}\nTrue or False:"));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub question_id: u32,
    pub p_true: f64,
    pub p_false: f64,
    /// `true` when the model prefers "True".
    pub verdict: bool,
    pub tie: bool,
}

/// Compares next-token probabilities of " True" and " False" after the
/// few-shot prompt. The prompt is cut from the left to fit the context.
pub fn probe_true_false<R: Real>(model: &Model<R>, qa: &QaInstance, vocab: &Vocabulary, prompt: &str) -> Result<ProbeResult> {
    let t = vocab.require(" True")?;
    let f = vocab.require(" False")?;
    let mut tokens = vocab.encode(prompt);
    let room = model.config.context_length;
    if tokens.len() > room {
        tokens.drain(..tokens.len() - room);
    }
    let lp = model.next_token_logprobs(&tokens)?;
    let (p_true, p_false) = (lp[t as usize].to_f64().exp(), lp[f as usize].to_f64().exp());
    let tie = (p_true - p_false).abs() <= 1e-9;
    Ok(ProbeResult { question_id: qa.id, p_true, p_false, verdict: p_true > p_false, tie })
}

/// Rank (1 = best) of the gold answer's log-likelihood among candidates;
/// a distractor scoring equal to the gold is ranked ahead of it.
pub fn likelihood_rank<R: Real>(model: &Model<R>, question: &[u32], gold: &[u32], distractors: &[Vec<u32>]) -> Result<usize> {
    let g = model.sequence_logprob(question, gold)?;
    let mut rank = 1;
    for d in distractors {
        if model.sequence_logprob(question, d)? >= g {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Same-attribute values of other persons, deterministic per `seed`.
pub fn pick_distractors(qa: &QaInstance, pool: &[PersonProfile], k: usize, seed: u64) -> Vec<String> {
    let mut values: Vec<String> = pool.iter().map(|p| p.value(qa.attribute)).filter(|v| *v != qa.answer).collect();
    values.sort();
    values.dedup();
    let mut rng = seed::rng(seed, &[qa.id as u64]);
    rand::seq::SliceRandom::shuffle(values.as_mut_slice(), &mut rng);
    values.truncate(k);
    values
}

/// One metric over epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSeries {
    pub name: String,
    pub points: Vec<(usize, f64)>,
    /// Set when the epoch-0 value was too small to divide by; points are raw.
    pub unnormalized: bool,
}

/// Divides each series by its epoch-0 value.
pub fn normalize_trace(trace: &[Series]) -> Result<Vec<NormalizedSeries>> {
    trace
        .iter()
        .map(|s| {
            let base = s
                .points
                .iter()
                .find(|(e, _)| *e == 0)
                .map(|p| p.1)
                .ok_or_else(|| Error::MissingInitialValue(s.name.clone()))?;
            if base.abs() < 1e-6 {
                return Ok(NormalizedSeries { name: s.name.clone(), points: s.points.clone(), unnormalized: true });
            }
            let points = s.points.iter().map(|&(e, v)| (e, v / base)).collect();
            Ok(NormalizedSeries { name: s.name.clone(), points, unnormalized: false })
        })
        .collect()
}

/// Per-split, per-attribute scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub qa: BTreeMap<Split, AttributeScores>,
    pub bio: BTreeMap<Split, AttributeScores>,
    #[serde(default)]
    pub probe_accuracy: BTreeMap<Split, f64>,
    #[serde(default)]
    pub mean_rank: BTreeMap<Split, f64>,
    #[serde(default)]
    pub trace: Vec<Series>,
    #[serde(default)]
    pub normalized: Vec<NormalizedSeries>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biograph::{build_dataset, GenerationConfig};
    use crate::nanolm::ModelConfig;
    use crate::packer::bundle_vocab;

    #[test]
    fn normalization_rules() {
        let s = vec![
            Series { name: "a".into(), points: vec![(0, 0.8), (1, 0.4)] },
            Series { name: "b".into(), points: vec![(0, 0.3), (1, 0.3)] },
            Series { name: "c".into(), points: vec![(0, 0.0), (1, 0.2)] },
        ];
        let n = normalize_trace(&s).unwrap();
        assert_eq!(n[0].points, [(0, 1.0), (1, 0.5)]);
        assert_eq!(n[1].points, [(0, 1.0), (1, 1.0)]);
        assert!(n[2].unnormalized && n[2].points == s[2].points);
        let again = normalize_trace(&[Series { name: "a".into(), points: n[0].points.clone() }]).unwrap();
        assert_eq!(again[0].points, n[0].points);
        let missing = normalize_trace(&[Series { name: "x".into(), points: vec![(1, 0.5)] }]);
        assert!(matches!(missing, Err(Error::MissingInitialValue(_))));
    }

    #[test]
    fn prompt_lists_ten_exemplars() {
        let p = true_false_prompt("What is the capital of China?", "Beijing");
        assert_eq!(p.matches("Question:").count(), 11);
        assert_eq!(p.matches("True or False: True").count(), 5);
        assert_eq!(p.matches("True or False: False").count(), 5);
        assert!(p.ends_with("Answer: Beijing\nTrue or False:"));
    }

    fn uniform_setup() -> (Model<f64>, Vocabulary, crate::biograph::DatasetBundle) {
        let bundle = build_dataset(&GenerationConfig { n_persons: 12, ..Default::default() }, 2).unwrap();
        let vocab = bundle_vocab(&bundle);
        let mut m = Model::<f64>::init(ModelConfig::new(1, 1, 4, vocab.len(), 256)).unwrap();
        m.params.fill(0.0);
        (m, vocab, bundle)
    }

    #[test]
    fn uniform_model_ties() {
        let (m, vocab, bundle) = uniform_setup();
        let qa = &bundle.qa[0];
        let r = probe_true_false(&m, qa, &vocab, &true_false_prompt(&qa.question, &qa.answer)).unwrap();
        assert!(r.tie && (r.p_true - 1.0 / vocab.len() as f64).abs() < 1e-12);
        let q = vocab.encode_segment(&qa.question);
        let cands: Vec<Vec<u32>> = vec![vec![5, 6], vec![7, 8], vec![9, 10]];
        assert_eq!(likelihood_rank(&m, &q, &[3, 4], &cands).unwrap(), 4);
        assert_eq!(likelihood_rank(&m, &q, &[3, 4], &[]).unwrap(), 1);
    }

    #[test]
    fn zero_budget_scores_zero() {
        let (m, vocab, bundle) = uniform_setup();
        let people: Vec<&PersonProfile> = bundle.profiles.iter().collect();
        let s = eval_bio_with_budget(&m, &people, Attribute::Employer, &TemplateBank::standard(), 0, &vocab, Some(0)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn bio_prompt_stops_before_value() {
        let p = PersonProfile::placeholder_probe();
        for attr in Attribute::ALL {
            let (prefix, gold) = bio_prompt(&p, attr, &TemplateBank::standard(), 4).unwrap();
            assert_eq!(gold, p.value(attr));
            assert!(!prefix.ends_with(' ') && !prefix.contains(&gold));
        }
        assert_eq!(score_completion(" Microsoft. She worked in Redmond", "Microsoft"), 1.0);
    }

    #[test]
    fn distractors_exclude_gold() {
        let bundle = build_dataset(&GenerationConfig { n_persons: 60, ..Default::default() }, 2).unwrap();
        let qa = bundle.qa.iter().find(|q| q.attribute == Attribute::Employer).unwrap();
        let d = pick_distractors(qa, &bundle.profiles, 9, 1);
        assert_eq!(d.len(), 9);
        assert!(!d.contains(&qa.answer));
    }
}
