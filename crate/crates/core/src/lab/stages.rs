//! Individual pipeline stages, usable on their own or through
//! [`run_experiment`](super::run_experiment).

use std::collections::BTreeMap;
use std::path::Path;

use crate::biograph::{build_dataset, Attribute, DatasetBundle, PersonProfile, QaInstance, Split, TemplateBank};
use crate::evaluator::{self, EvalReport};
use crate::nanolm::{pretrain, Model, ModelConfig, TraceRow, TrainConfig};
use crate::packer::{bundle_vocab, QaTokens, StreamFactory, Vocabulary};
use crate::unlearner::{unlearn, UnlearnConfig, UnlearnEpoch};
use crate::Result;

use super::config::{EvalConfig, ExperimentConfig};

/// Generated data plus the vocabulary derived from it.
pub struct Data {
    pub bundle: DatasetBundle,
    pub vocab: Vocabulary,
}

impl Data {
    pub fn generate(cfg: &ExperimentConfig) -> Result<Self> {
        let bundle = build_dataset(&cfg.generation, cfg.data_seed)?;
        let vocab = bundle_vocab(&bundle);
        Ok(Self { bundle, vocab })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.bundle.write(dir)?;
        self.vocab.save(&dir.join("vocab.json"))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(Self { bundle: DatasetBundle::read(dir)?, vocab: Vocabulary::load(&dir.join("vocab.json"))? })
    }

    /// Persons of `split`, capped to the lowest `cap` ids (0 = all).
    pub fn eval_persons(&self, split: Split, cap: usize) -> Vec<&PersonProfile> {
        let mut v: Vec<&PersonProfile> = self.bundle.persons_in(split).collect();
        if cap > 0 {
            v.truncate(cap);
        }
        v
    }

    /// QA for `attribute` of the given persons.
    pub fn qa_for<'a>(&'a self, persons: &[&PersonProfile], attribute: Attribute) -> Vec<&'a QaInstance> {
        let ids: std::collections::HashSet<u32> = persons.iter().map(|p| p.id).collect();
        self.bundle.qa.iter().filter(|q| q.attribute == attribute && ids.contains(&q.person_id)).collect()
    }
}

/// QA and BIO Rouge-L of one split for the given attributes.
pub fn split_scores<R: crate::nanolm::Real>(
    model: &Model<R>,
    data: &Data,
    split: Split,
    attributes: &[Attribute],
    eval: &EvalConfig,
) -> Result<(f64, f64)> {
    let persons = data.eval_persons(split, eval.persons_per_split);
    let bank = TemplateBank::standard();
    let (mut qa, mut bio) = (0.0, 0.0);
    for &a in attributes {
        qa += evaluator::eval_qa(model, &data.qa_for(&persons, a), &data.vocab)?.overall;
        bio += evaluator::eval_bio(model, &persons, a, &bank, eval.bio_seed, &data.vocab)?;
    }
    let n = attributes.len() as f64;
    Ok((qa / n, bio / n))
}

/// Pre-trains a fresh model, recording QA and BIO scores per split at the
/// configured evaluation epochs.
pub fn pretrain_model(
    data: &Data,
    model_cfg: ModelConfig,
    train: &TrainConfig,
    pack_length: usize,
    eval: &EvalConfig,
    data_seed: u64,
) -> Result<(Model<f32>, Vec<TraceRow>)> {
    let mut model = Model::<f32>::init(model_cfg)?;
    let stream = StreamFactory::from_bundle(&data.bundle, &data.vocab, pack_length, (1, 3), data_seed)?;
    let mut hook = |epoch: usize, m: &Model<f32>| -> Result<Vec<TraceRow>> {
        let mut rows = Vec::new();
        for split in Split::ALL {
            let (qa, bio) = split_scores(m, data, split, &eval.pretrain_attributes, eval)?;
            rows.push(TraceRow::new(epoch, split.as_str(), "qa", qa));
            rows.push(TraceRow::new(epoch, split.as_str(), "bio", bio));
        }
        Ok(rows)
    };
    let trace = pretrain(&mut model, &stream, train, &mut hook)?;
    Ok((model, trace))
}

/// Full post-training evaluation, optionally with likelihood probes.
pub fn evaluate_model<R: crate::nanolm::Real>(model: &Model<R>, data: &Data, eval: &EvalConfig, seed: u64) -> Result<EvalReport> {
    let bank = TemplateBank::standard();
    let mut report = EvalReport { seed, ..Default::default() };
    for split in Split::ALL {
        let persons = data.eval_persons(split, eval.persons_per_split);
        let qa: Vec<&QaInstance> = eval.pretrain_attributes.iter().flat_map(|&a| data.qa_for(&persons, a)).collect();
        report.qa.insert(split, evaluator::eval_qa(model, &qa, &data.vocab)?);
        let mut per = BTreeMap::new();
        for &a in &eval.pretrain_attributes {
            per.insert(a, evaluator::eval_bio(model, &persons, a, &bank, eval.bio_seed, &data.vocab)?);
        }
        let overall = per.values().sum::<f64>() / per.len().max(1) as f64;
        report.bio.insert(split, evaluator::AttributeScores { count: persons.len() * per.len(), per_attribute: per, overall });
        if eval.probes {
            let (mut correct, mut rank_sum) = (0usize, 0.0);
            for q in &qa {
                let prompt = evaluator::true_false_prompt(&q.question, &q.answer);
                let r = evaluator::probe_true_false(model, q, &data.vocab, &prompt)?;
                correct += usize::from(r.verdict && !r.tie);
                let d = evaluator::pick_distractors(q, &data.bundle.profiles, eval.distractors, seed);
                let d: Vec<Vec<u32>> = d.iter().map(|s| data.vocab.encode_segment(s)).collect();
                let question = data.vocab.encode_segment(&q.question);
                rank_sum += evaluator::likelihood_rank(model, &question, &data.vocab.encode_segment(&q.answer), &d)? as f64;
            }
            report.probe_accuracy.insert(split, correct as f64 / qa.len().max(1) as f64);
            report.mean_rank.insert(split, rank_sum / qa.len().max(1) as f64);
        }
    }
    Ok(report)
}

/// Metric names recorded at every unlearning epoch.
pub const UNLEARN_METRICS: [&str; 5] = ["target_qa", "target_bio", "retain_qa", "utility_qa", "utility_bio"];

/// Unlearns `attribute` for every person of `target`, regularizing with
/// retain-split QA of the same attribute, and tracks the five metrics on
/// capped evaluation subsets.
pub fn unlearn_cell(
    base: &Model<f32>,
    data: &Data,
    target: Split,
    attribute: Attribute,
    cfg: &UnlearnConfig,
    eval: &EvalConfig,
) -> Result<(Model<f32>, Vec<UnlearnEpoch>)> {
    let forget: Vec<QaTokens> = data
        .bundle
        .qa_in(target)
        .filter(|q| q.attribute == attribute)
        .map(|q| QaTokens::new(q, &data.vocab))
        .collect();
    let retain: Vec<QaTokens> = data
        .bundle
        .qa_in(Split::Retain)
        .filter(|q| q.attribute == attribute)
        .map(|q| QaTokens::new(q, &data.vocab))
        .collect();
    let bank = TemplateBank::standard();
    let cap = eval.persons_per_split;
    let tp = data.eval_persons(target, cap);
    let rp = data.eval_persons(Split::Retain, cap);
    let up = data.eval_persons(Split::Utility, cap);
    let (tq, rq, uq) = (data.qa_for(&tp, attribute), data.qa_for(&rp, attribute), data.qa_for(&up, attribute));
    let v = &data.vocab;
    let mut hook = |_: usize, m: &Model<f32>| -> Result<BTreeMap<String, f64>> {
        let vals = [
            evaluator::eval_qa(m, &tq, v)?.overall,
            evaluator::eval_bio(m, &tp, attribute, &bank, eval.bio_seed, v)?,
            evaluator::eval_qa(m, &rq, v)?.overall,
            evaluator::eval_qa(m, &uq, v)?.overall,
            evaluator::eval_bio(m, &up, attribute, &bank, eval.bio_seed, v)?,
        ];
        Ok(UNLEARN_METRICS.iter().map(|s| s.to_string()).zip(vals).collect())
    };
    let mut model = base.clone();
    let trace = unlearn(&mut model, &forget, &retain, cfg, v, &mut hook)?;
    Ok((model, trace))
}
