//! The error-correction language model behind a small protocol: whole
//! sequence scores, incremental decoder steps and free generation.

mod http;
mod toy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::types::{sep_concat, NBestList};

pub use http::{HttpScorer, HttpTransport, RetryPolicy, CORRELATION_HEADER};
pub use toy::ToyScorer;

/// Candidate token that asks for the probability of ending the sequence.
pub const EOS: &str = "</s>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("request rejected ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("tokenization failed: {0}")]
    Tokenization(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("giving up after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        last: Box<ScorerError>,
    },
}

impl ScorerError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ScorerError::Transport(_) => true,
            ScorerError::Server { .. } => true,
            ScorerError::Rejected { status, .. } => *status == 429,
            _ => false,
        }
    }
}

/// The conditioning input: the top hypotheses joined with a separator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerContext {
    text: String,
    sep: String,
    n_input: usize,
}

impl ScorerContext {
    pub fn new(nbest: &NBestList, n_input: usize, sep: &str) -> Result<Self> {
        Ok(ScorerContext {
            text: sep_concat(nbest, n_input, sep)?,
            sep: sep.to_string(),
            n_input,
        })
    }

    /// A context from an already concatenated string.
    pub fn from_text(text: impl Into<String>, sep: impl Into<String>) -> Self {
        let text = text.into();
        let sep = sep.into();
        let n_input = if sep.is_empty() {
            1
        } else {
            text.split(sep.as_str()).count()
        };
        ScorerContext { text, sep, n_input }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sep(&self) -> &str {
        &self.sep
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    /// The individual hypotheses.
    pub fn segments(&self) -> Vec<&str> {
        if self.sep.is_empty() {
            vec![self.text.as_str()]
        } else {
            self.text.split(self.sep.as_str()).collect()
        }
    }
}

/// Next-token log-probabilities for the requested candidates, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStepResult {
    pub logprobs: Vec<(String, f64)>,
}

impl DecoderStepResult {
    pub fn get(&self, token: &str) -> Option<f64> {
        self.logprobs
            .iter()
            .find(|(t, _)| t == token)
            .map(|(_, p)| *p)
    }

    /// Renormalizes over the requested candidates only, so a single
    /// candidate always gets log-probability 0.
    pub fn normalized_over_candidates(&self) -> DecoderStepResult {
        let max = self
            .logprobs
            .iter()
            .map(|(_, p)| *p)
            .fold(f64::NEG_INFINITY, f64::max);
        let z = max
            + self
                .logprobs
                .iter()
                .map(|(_, p)| (p - max).exp())
                .sum::<f64>()
                .ln();
        DecoderStepResult {
            logprobs: self
                .logprobs
                .iter()
                .map(|(t, p)| (t.clone(), p - z))
                .collect(),
        }
    }
}

/// Backend information reported by a scorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerInfo {
    pub name: String,
    pub tokenizer: String,
}

pub trait Scorer: Send + Sync {
    fn info(&self) -> std::result::Result<ScorerInfo, ScorerError>;

    /// `log P(candidate | ctx)` for each candidate, in order.
    fn score_batch(
        &self,
        ctx: &ScorerContext,
        candidates: &[String],
    ) -> std::result::Result<Vec<f64>, ScorerError>;

    /// Log-probabilities of each candidate as the token after `history`.
    /// [`EOS`] as a candidate scores ending the sequence.
    fn decoder_step(
        &self,
        ctx: &ScorerContext,
        history: &[String],
        candidates: &[String],
    ) -> std::result::Result<DecoderStepResult, ScorerError>;

    fn generate(&self, ctx: &ScorerContext) -> std::result::Result<String, ScorerError>;

    fn score_sequence(
        &self,
        ctx: &ScorerContext,
        candidate: &str,
    ) -> std::result::Result<f64, ScorerError> {
        let mut v = self.score_batch(ctx, &[candidate.to_string()])?;
        v.pop()
            .ok_or_else(|| ScorerError::Protocol("empty score batch".into()))
    }

    /// Retries spent so far, for run manifests.
    fn retries(&self) -> u64 {
        0
    }
}

pub(crate) fn check_candidates(candidates: &[String]) -> std::result::Result<(), ScorerError> {
    if candidates.is_empty() {
        return Err(ScorerError::InvalidRequest("empty candidate set".into()));
    }
    if candidates.iter().any(String::is_empty) {
        return Err(ScorerError::InvalidRequest("empty candidate".into()));
    }
    Ok(())
}
