use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid lineage counts {counts:?}: {reason}")]
    InvalidCounts {
        counts: [u32; 3],
        reason: &'static str,
    },

    #[error("no further events: all processes are absorbed")]
    Absorbed,

    #[error("event cap of {cap} exceeded after reaching time {time}")]
    EventCapExceeded { cap: u64, time: f64 },

    #[error("level {level} has no downward transition (absorbing)")]
    AbsorbingLevel { level: usize },

    #[error("truncation at N_max = {n_max} is not converged ({detail}); increase N_max")]
    IncreaseNmax { n_max: usize, detail: String },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("time {time} is outside the trajectory coverage [{start}, {end}]")]
    PartialPath { time: f64, start: f64, end: f64 },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
