use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle detected in configuration `{0}`")]
    Cycle(String),

    #[error("invalid catalog ({count} violation(s)); first: {first}")]
    InvalidCatalog { count: usize, first: String },

    #[error("unstable queue{}: capacity {capacity} <= load {load}", instance.as_ref().map(|i| format!(" at instance {i}")).unwrap_or_default())]
    UnstableQueue {
        instance: Option<String>,
        capacity: f64,
        load: f64,
    },

    #[error("function `{0}` is not covered by the chosen xApps")]
    UncoveredFunction(String),

    #[error("unknown {kind} `{id}`")]
    UnknownEntity { kind: &'static str, id: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
