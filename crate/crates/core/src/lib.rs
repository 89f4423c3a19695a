//! Two-stage successive refinement with side information at two decoders.
//!
//! The crate covers five connected pieces:
//!
//! - [`prob`]: finite-alphabet pmfs, information measures, strong
//!   typicality and seeded i.i.d. sampling.
//! - [`causal`]: the exact rate region for causal side information,
//!   optimal decoder synthesis, a randomized frontier search, an exhaustive
//!   grid oracle, and the source-channel separation test.
//! - [`noncausal`]: inner and outer bounds for non-causal, degraded side
//!   information (`X - Z - Y`), plus the special cases where they meet.
//! - [`channels`]: capacities of state-dependent channels (plain DMC,
//!   causal state via Shannon strategies, Gelfand-Pinsker search).
//! - [`sim`]: Monte-Carlo runs of the random-coding schemes behind the
//!   achievability results, with error-event accounting.
//!
//! All logarithms are base 2; rates are bits per source symbol.
//! All randomness flows through explicit `u64` seeds (see [`rng`]).

pub mod causal;
pub mod channels;
pub mod decoder;
pub mod error;
pub mod family;
pub mod noncausal;
pub mod prob;
pub mod rng;
pub mod search;
pub mod sim;
pub mod text;

pub use error::{Error, Result};
pub use prob::{
    Alphabet, CondPmf, DistortionMatrix, DistortionQuad, JointPmf, SourceSpec, Symbol,
};
