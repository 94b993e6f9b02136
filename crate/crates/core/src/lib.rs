//! Desk-scale laboratory for studying how pre-training frequency shapes
//! unlearning in small language models.
//!
//! The crate is organised as a pipeline:
//!
//! - [`biograph`] generates synthetic biographies and question/answer pairs
//!   with person-disjoint splits and an up-sampled "high-count" split.
//! - [`packer`] tokenizes instances and packs them into fixed-length
//!   training rows mixed at a configurable BIO:QA token ratio.
//! - [`nanolm`] is a small decoder-only transformer with hand-written
//!   forward/backward passes, AdamW pre-training, greedy decoding and
//!   sequence scoring.
//! - [`unlearner`] implements gradient ascent, SimNPO and refusal ("I don't
//!   know") forget losses under a composite regularized objective.
//! - [`evaluator`] scores models with Rouge-L on QA and biography completion
//!   and provides likelihood-based probes.
//! - [`cooccur`] counts windowed co-occurrences of phrase pairs over a token
//!   corpus and buckets pairs by frequency.
//! - [`lab`] wires everything into config-driven, cached, multi-seed runs.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod biograph;
pub mod cooccur;
pub mod error;
pub mod evaluator;
pub mod lab;
pub mod nanolm;
pub mod packer;
pub mod seed;
pub mod unlearner;

pub use error::{Error, Result};
