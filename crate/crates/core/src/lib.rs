//! Post-processing for speech recognition output: N-best and lattice error
//! correction with a pluggable language-model scorer, WER evaluation,
//! system combination and zero-shot prompting helpers.

pub mod cli;
pub mod combine;
pub mod dataset;
pub mod decode;
pub mod error;
pub mod lattice;
pub mod metrics;
pub mod prompts;
pub mod scorer;
pub mod textnorm;
pub mod types;

pub use error::{Error, Result};
pub use lattice::{Lattice, LatticeError, MarkerConvention};
pub use scorer::{Scorer, ScorerContext, ScorerError};
pub use types::{EcConfig, Hypothesis, NBestList, Utterance};
