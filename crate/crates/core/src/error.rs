use std::path::PathBuf;

/// Errors raised across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("name space exhausted after {attempts} draws for {wanted} persons ({lists})")]
    NameSpaceExhausted {
        lists: String,
        wanted: usize,
        attempts: usize,
    },
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("split fractions must be non-negative and sum to 1 (got sum {sum})")]
    BadFractions { sum: f64 },
    #[error("template {template:?} has unresolvable placeholder {{{placeholder}}}")]
    UnresolvedPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("cannot pack instances of mixed kinds into one stream")]
    MixedKinds,
    #[error("invalid model config: {0}")]
    InvalidModelConfig(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sequence of {len} tokens exceeds context length {context}")]
    ContextOverflow { len: usize, context: usize },
    #[error("non-finite loss at step {step}; diagnostic checkpoint at {checkpoint:?}")]
    NonFiniteLoss {
        step: usize,
        checkpoint: Option<PathBuf>,
    },
    #[error("token {0:?} is not in the vocabulary")]
    MissingToken(String),
    #[error("trace series {0:?} has no epoch-0 entry")]
    MissingInitialValue(String),
    #[error("cannot split {records} records into {buckets} buckets")]
    TooManyBuckets { records: usize, buckets: usize },
    #[error("empty phrase after tokenization: {0:?}")]
    EmptyPhrase(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("toml: {0}")]
    Toml(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
