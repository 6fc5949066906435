use thiserror::Error;

use crate::lorenz_map::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bivalued point; use f_side_limit")]
    Bivalued,
    #[error("not in branch range: {value} for branch {side}")]
    NotInBranchRange { side: Side, value: f64 },
    #[error("inadmissible word at depth {depth}: {reason}")]
    Inadmissible { depth: usize, reason: String },
    #[error("orbit reaches the critical line at step {step} (|x| = {x:e})")]
    NearCritical { step: usize, x: f64 },
    #[error("code ambiguous at step {step}")]
    CodeAmbiguous { step: usize },
    #[error("orbit shorter than one hyperbolic jump ({len} points)")]
    OrbitTooShort { len: usize },
    #[error("no leaf at requested depth {depth}")]
    NoLeaf { depth: usize },
    #[error("word {word} rejected: {reason}")]
    PeriodicRejected { word: String, reason: String },
    #[error("no delta-dense periodic orbit up to period {max_period}; increase max_period")]
    IncreaseMaxPeriod { max_period: usize },
    #[error("no spanning leaf found; shrink delta_hat ({0})")]
    ShrinkDeltaHat(String),
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("outside induced domain (or beyond N_max): x = {x}")]
    OutsideInducedDomain { x: f64 },
    #[error("insufficient samples: {found} valid pairs, need {needed}")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("power iteration did not converge in {iterations} steps: last residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no sign change in bracket [{lo}, {hi}]; widen bracket")]
    WidenBracket { lo: f64, hi: f64 },
    #[error("no branches with return time {0}")]
    NoBranches(usize),
    #[error("config: {0}")]
    Config(String),
}
