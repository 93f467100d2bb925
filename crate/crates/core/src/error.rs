use thiserror::Error;

use crate::simulator::Trace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series did not converge after {terms} terms (next term norm {residual:e})")]
    NonConvergence { terms: usize, residual: f64 },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sampling period {h} s is below the floor {eps_h} s")]
    SamplingTooSmall { h: f64, eps_h: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// State magnitude left the admissible range. Carries the trace up to and
    /// including the offending step.
    #[error("state diverged at step {step} (|x| = {magnitude:e})")]
    Diverged {
        step: usize,
        magnitude: f64,
        trace: Box<Trace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
