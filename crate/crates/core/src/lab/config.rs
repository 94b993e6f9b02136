use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::biograph::{Attribute, GenerationConfig, Split};
use crate::nanolm::{ModelConfig, TrainConfig};
use crate::unlearner::{Method, UnlearnConfig};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One experiment: data, models, pre-training, the unlearning matrix and
/// evaluation settings. Stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default = "default_pack_length")]
    pub pack_length: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub generation: GenerationConfig,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub unlearn: Vec<UnlearnBlock>,
}

fn default_pack_length() -> usize {
    crate::packer::DEFAULT_LENGTH
}
fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?;
        if cfg.out_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.out_dir = parent.join(&cfg.out_dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("model names must be unique".into());
        }
        if self.pack_length < 2 {
            return bad("pack_length must be at least 2".into());
        }
        self.train.validate()?;
        for (i, b) in self.unlearn.iter().enumerate() {
            if b.seeds.is_empty() || b.methods.is_empty() || b.splits.is_empty() || b.attributes.is_empty() {
                return bad(format!("unlearn block {i} has an empty axis"));
            }
            if let Some(m) = b.models.iter().find(|m| !names.contains(&m.as_str())) {
                return bad(format!("unlearn block {i} names unknown model {m:?}"));
            }
            if b.splits.iter().any(|s| !matches!(s, Split::HighCount | Split::LowCount)) {
                return bad(format!("unlearn block {i}: targets must be high or low count splits"));
            }
            b.hyper.to_config(Method::GradientAscent, b.deltas.first().copied().unwrap_or(1.0), 0)?.validate()?;
        }
        Ok(())
    }

    /// Every unlearning run in the matrix, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (block, b) in self.unlearn.iter().enumerate() {
            let models: Vec<&str> = if b.models.is_empty() {
                self.models.iter().map(|m| m.name.as_str()).collect()
            } else {
                b.models.iter().map(String::as_str).collect()
            };
            let deltas = if b.deltas.is_empty() { vec![1.0] } else { b.deltas.clone() };
            for model in &models {
                for &method in &b.methods {
                    for &split in &b.splits {
                        for &attribute in &b.attributes {
                            for &delta in &deltas {
                                for &seed in &b.seeds {
                                    out.push(Cell { block, model: model.to_string(), method, split, attribute, delta, seed });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A model in the experiment: a preset or explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub n_layers: Option<usize>,
    #[serde(default)]
    pub n_heads: Option<usize>,
    #[serde(default)]
    pub hidden: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Per-model override of the pre-training epochs.
    #[serde(default)]
    pub epochs: Option<usize>,
    /// Per-model override of the pre-training learning rate.
    #[serde(default)]
    pub learning_rate: Option<f64>,
}

impl ModelSpec {
    pub fn resolve(&self, vocab_size: usize, context_length: usize) -> Result<ModelConfig> {
        let mut c = match &self.preset {
            Some(p) => ModelConfig::preset(p, vocab_size, context_length)?,
            None => ModelConfig::desk_small(vocab_size, context_length),
        };
        c.n_layers = self.n_layers.unwrap_or(c.n_layers);
        c.n_heads = self.n_heads.unwrap_or(c.n_heads);
        c.hidden = self.hidden.unwrap_or(c.hidden);
        c.seed = self.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        let mut t = base.clone();
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.learning_rate = self.learning_rate.unwrap_or(t.learning_rate);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Evaluate at most this many persons per split (lowest ids); 0 = all.
    #[serde(default)]
    pub persons_per_split: usize,
    /// Attributes scored during pre-training.
    #[serde(default = "all_attributes")]
    pub pretrain_attributes: Vec<Attribute>,
    /// Seed of the biography prompts used for BIO scoring.
    #[serde(default)]
    pub bio_seed: u64,
    /// Run the True/False and likelihood-rank probes after pre-training.
    #[serde(default)]
    pub probes: bool,
    #[serde(default = "default_distractors")]
    pub distractors: usize,
}

fn all_attributes() -> Vec<Attribute> {
    Attribute::ALL.to_vec()
}
fn default_distractors() -> usize {
    4
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            persons_per_split: 0,
            pretrain_attributes: all_attributes(),
            bio_seed: 0,
            probes: false,
            distractors: default_distractors(),
        }
    }
}

/// Hyperparameters shared by every cell of an unlearning block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnHyper {
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_clip")]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_beta() -> f64 {
    0.1
}
fn default_clip() -> Option<f64> {
    Some(1.0)
}

impl Default for UnlearnHyper {
    fn default() -> Self {
        let d = UnlearnConfig::default();
        Self {
            alpha: d.alpha,
            beta: d.beta,
            gamma: d.gamma,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            grad_clip: d.grad_clip,
            weight_decay: d.weight_decay,
        }
    }
}

impl UnlearnHyper {
    pub fn to_config(&self, method: Method, delta: f64, seed: u64) -> Result<UnlearnConfig> {
        let c = UnlearnConfig {
            method,
            alpha: self.alpha,
            delta,
            beta: self.beta,
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            grad_clip: self.grad_clip,
            weight_decay: self.weight_decay,
            ..UnlearnConfig::default()
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnBlock {
    /// Models to unlearn; empty means all.
    #[serde(default)]
    pub models: Vec<String>,
    pub methods: Vec<Method>,
    pub splits: Vec<Split>,
    pub attributes: Vec<Attribute>,
    pub seeds: Vec<u64>,
    /// Target-question weights; empty means `[1.0]`.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(flatten)]
    pub hyper: UnlearnHyper,
}

/// One unlearning run of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub block: usize,
    pub model: String,
    pub method: Method,
    pub split: Split,
    pub attribute: Attribute,
    pub delta: f64,
    pub seed: u64,
}

impl Cell {
    /// Directory-safe identifier.
    pub fn label(&self) -> String {
        format!(
            "{}-{}-{}-{}-d{}-s{}",
            self.model,
            self.method.short(),
            self.split.as_str(),
            self.attribute.as_str().replace(' ', "_"),
            self.delta,
            self.seed
        )
    }
}

impl ExperimentConfig {
    /// The desk-scale experiment: 1,000 persons, two model sizes, all three
    /// methods on both target splits.
    pub fn desk(out_dir: PathBuf) -> Self {
        let hyper = UnlearnHyper::default();
        let attributes = vec![Attribute::Birthday, Attribute::BirthCity, Attribute::University, Attribute::Employer];
        let splits = vec![Split::HighCount, Split::LowCount];
        Self {
            schema_version: SCHEMA_VERSION,
            name: "desk".into(),
            out_dir,
            data_seed: 0,
            pack_length: 128,
            workers: 1,
            generation: GenerationConfig::default(),
            models: vec![
                ModelSpec {
                    name: "small".into(),
                    preset: Some("desk-small".into()),
                    n_layers: None,
                    n_heads: None,
                    hidden: None,
                    seed: 0,
                    epochs: None,
                    learning_rate: None,
                },
                ModelSpec {
                    name: "large".into(),
                    preset: Some("desk-large".into()),
                    n_layers: None,
                    n_heads: None,
                    hidden: None,
                    seed: 0,
                    epochs: Some(25),
                    learning_rate: None,
                },
            ],
            train: TrainConfig { epochs: 40, eval_every: 5, ..TrainConfig::default() },
            eval: EvalConfig { persons_per_split: 60, ..EvalConfig::default() },
            unlearn: vec![
                UnlearnBlock {
                    models: vec![],
                    methods: vec![Method::GradientAscent],
                    splits: splits.clone(),
                    attributes: attributes.clone(),
                    seeds: vec![0, 1, 2],
                    deltas: vec![],
                    hyper: hyper.clone(),
                },
                UnlearnBlock {
                    models: vec!["small".into()],
                    methods: vec![Method::Simnpo, Method::Idk],
                    splits,
                    attributes,
                    seeds: vec![0, 1, 2],
                    deltas: vec![],
                    hyper: hyper.clone(),
                },
                UnlearnBlock {
                    models: vec!["small".into()],
                    methods: vec![Method::GradientAscent],
                    splits: vec![Split::HighCount],
                    attributes: vec![Attribute::Employer],
                    seeds: vec![0],
                    deltas: vec![0.0],
                    hyper,
                },
            ],
        }
    }
}
