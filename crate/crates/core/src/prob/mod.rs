//! Finite-alphabet probability objects and information measures.

mod distortion;
pub(crate) mod info;
pub(crate) mod pmf;
mod sample;
mod source;
mod typical;

pub use distortion::{expected_distortion, DistortionMatrix, DistortionQuad};
pub use info::{
    conditional_mutual_information, entropy, is_markov_chain, mutual_information,
};
pub use pmf::{compose, marginalize, Alphabet, CondPmf, JointPmf, Symbol, NORMALIZATION_TOL};
pub use sample::{sample_iid, CellSampler};
pub use source::{DistortionSet, DistortionSpec, SourceFile, SourceSizes, SourceSpec, DECODER_NAMES};
pub use typical::{empirical_type, is_jointly_typical, TypicalityTest};
