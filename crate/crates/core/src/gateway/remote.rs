use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_finite, GatewayError, LogitsProvider};
use crate::constrain::tokenizer::TokenId;

/// Environment variable consulted when no endpoint is given explicitly.
pub const ENDPOINT_ENV: &str = "APIGUARD_ENDPOINT";

#[derive(Debug, Serialize)]
struct LogitsRequest<'a> {
    tokens: &'a [TokenId],
}

/// Body of a `POST /v1/logits` reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogitsResponse {
    Full { logits: Vec<f32> },
    TopK { topk: Vec<(TokenId, f32)>, default: f32 },
}

/// Expands a sparse top-k reply: `default` everywhere except the listed ids.
pub fn expand_topk(topk: &[(TokenId, f32)], default: f32, vocab_size: usize) -> Result<Vec<f32>, GatewayError> {
    let mut out = vec![default; vocab_size];
    let mut seen = vec![false; vocab_size];
    for &(id, v) in topk {
        let i = id as usize;
        if i >= vocab_size {
            return Err(GatewayError::MalformedResponse(format!("top-k id {id} outside vocabulary of {vocab_size}")));
        }
        if seen[i] && out[i].to_bits() != v.to_bits() {
            return Err(GatewayError::MalformedResponse(format!("conflicting values for top-k id {id}")));
        }
        seen[i] = true;
        out[i] = v;
    }
    Ok(out)
}

impl LogitsResponse {
    pub fn into_logits(self, vocab_size: usize) -> Result<Vec<f32>, GatewayError> {
        let logits = match self {
            LogitsResponse::Full { logits } => logits,
            LogitsResponse::TopK { topk, default } => expand_topk(&topk, default, vocab_size)?,
        };
        if logits.len() != vocab_size {
            return Err(GatewayError::LengthMismatch { expected: vocab_size, got: logits.len() });
        }
        check_finite(&logits)?;
        Ok(logits)
    }
}

/// Client for a logits server speaking the JSON protocol above.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    url: String,
    vocab_size: usize,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(endpoint: &str, vocab_size: usize) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self { url: format!("{}/v1/logits", endpoint.trim_end_matches('/')), vocab_size, client })
    }

    /// Uses `APIGUARD_ENDPOINT`.
    pub fn from_env(vocab_size: usize) -> Result<Self, GatewayError> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .map_err(|_| GatewayError::Transport(format!("{ENDPOINT_ENV} is not set")))?;
        Self::new(&endpoint, vocab_size)
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl LogitsProvider for RemoteProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<Vec<f32>, GatewayError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&LogitsRequest { tokens: context })
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(GatewayError::Transport(format!("HTTP {}", resp.status())));
        }
        let body = resp.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        let parsed: LogitsResponse =
            serde_json::from_str(&body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        parsed.into_logits(self.vocab_size)
    }
}
