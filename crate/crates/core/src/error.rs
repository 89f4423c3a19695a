use thiserror::Error;

use crate::prob::DistortionQuad;
use crate::sim::SizeReport;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet `{label}` must have at least one symbol")]
    EmptyAlphabet { label: String },

    #[error("table has {got} entries but its axes imply {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid probability mass {value} at cell {index}")]
    InvalidMass { index: usize, value: f64 },

    #[error("pmf sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("conditional row {row} sums to {sum}, expected 1")]
    RowNotNormalized { row: usize, sum: f64 },

    #[error("expected {expected} axes, got {got}")]
    AxisCount { expected: usize, got: usize },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("axis selection must be non-empty and duplicate-free")]
    InvalidSelection,

    #[error("sequence lengths differ: {0:?}")]
    LengthMismatch(Vec<usize>),

    #[error("invalid distortion entry {value} at ({row}, {col})")]
    InvalidDistortion { row: usize, col: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("side information is not degraded: I(X;Y|Z) = {0:.3e}")]
    NotDegraded(f64),

    #[error("target {target:?} is infeasible; the best achievable distortions are {best:?}")]
    InfeasibleTarget {
        target: Box<DistortionQuad>,
        best: Box<DistortionQuad>,
    },

    #[error("grid has {points} points, above the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },

    #[error("auxiliary channel violates W2 - (X,W1,V) - W3: I(W2;W3|X,W1,V) = {residual:.3e}")]
    ExtraMarkovViolated { residual: f64 },

    #[error("target {0:?} fits neither refinement sub-case (dz1 >= dy1, or dy2 == dy1)")]
    NoRefinementCase(Box<DistortionQuad>),

    #[error("decoder alphabet for `{decoder}` cannot reproduce every source symbol at zero distortion")]
    NotLosslessCompatible { decoder: String },

    #[error("strategy alphabet has {size} letters, above the cap of {cap}")]
    StrategyAlphabetTooLarge { size: u128, cap: usize },

    #[error("no convergence after {iterations} iterations (best {best:.6}, residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        best: f64,
        residual: f64,
    },

    #[error("codebooks need {} stored symbols, cap is {}", .0.total_symbols, .0.cap)]
    CapExceeded(Box<SizeReport>),

    #[error("index {index} out of range for codebook of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
