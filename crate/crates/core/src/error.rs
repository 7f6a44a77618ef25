use thiserror::Error;

/// Errors produced by channel synthesis, trellis construction, decoding and
/// experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid resolution error: {0}")]
    Resolution(String),
    #[error("degenerate channel: all sampled taps are zero")]
    DegenerateChannel,
    #[error("trellis has {states} states, above the cap of {cap}")]
    Complexity { states: usize, cap: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numerical degeneracy at trellis step {step}: every path metric is -inf or NaN")]
    NumericalDegeneracy { step: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
