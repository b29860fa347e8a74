//! Logits providers: anything that maps a token context to next-token logits.

mod random;
mod remote;
mod replay;

pub use random::RandomProvider;
pub use remote::{expand_topk, LogitsResponse, RemoteProvider, ENDPOINT_ENV};
pub use replay::{context_key, ReplayEntry, ReplayProvider};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constrain::tokenizer::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("no recorded logits for context [{0}]")]
    UnknownContext(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("expected {expected} logits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Next-token logits over a fixed vocabulary. Implementations must be safe to
/// call from several decode sessions at once.
pub trait LogitsProvider: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn next_logits(&self, context: &[TokenId]) -> Result<Vec<f32>, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_new_tokens: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_new_tokens: 15, seed: 0, endpoint: None }
    }
}

pub(crate) fn check_finite(logits: &[f32]) -> Result<(), GatewayError> {
    match logits.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(GatewayError::MalformedResponse(format!("non-finite logit at {i}"))),
        None => Ok(()),
    }
}
