//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A boundary parameter that must be nonnegative was negative.
    #[error("parameter {name} must be nonnegative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },

    /// An angle operation received a vector of (numerically) zero length.
    #[error("zero vector: |Z{index}| = {norm:e} is below the degeneracy threshold")]
    ZeroVector { index: usize, norm: f64 },

    /// An input fell outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two quadrants that must share an edge do not.
    #[error("quadrants Q{0} and Q{1} are not adjacent")]
    NotAdjacent(u8, u8),

    /// A configuration evaluation hit a collision (pairwise distance below threshold).
    #[error("collision singularity: bodies {} and {} at distance {dist:e}", pair.0, pair.1)]
    CollisionSingularity { pair: (usize, usize), dist: f64 },

    /// A piecewise-linear segment passes too close to a collision.
    #[error("segment {segment} passes within {dist:e} of a collision of bodies {} and {}", pair.0, pair.1)]
    SegmentSingularity {
        segment: usize,
        pair: (usize, usize),
        dist: f64,
    },

    /// The line search could not find a collision-free step.
    #[error("line search blocked by near-collision of bodies {} and {} around t = {time}", pair.0, pair.1)]
    CollisionEncountered { pair: (usize, usize), time: f64 },

    /// The optimizer exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (projected gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    /// The integrator stopped early because two bodies got too close.
    #[error("integration stopped at t = {time}: pairwise distance {min_distance:e} under the collision floor")]
    CollisionApproach { time: f64, min_distance: f64 },

    /// An orbit report failed verification and cannot be extended.
    #[error("minimizer report failed verification: {0}")]
    NotVerified(String),

    /// A structured text file could not be parsed.
    #[error("malformed file {path} at line {line}: {msg}")]
    MalformedFile {
        path: String,
        line: usize,
        msg: String,
    },

    /// Underlying I/O failure.
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },

    /// The problem specification itself is invalid.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
