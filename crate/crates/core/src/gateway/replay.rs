use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::remote::expand_topk;
use super::{check_finite, GatewayError, LogitsProvider};
use crate::constrain::tokenizer::TokenId;

/// A stored vector: either the full logits or a sparse top-k with a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReplayEntry {
    Full(Vec<f32>),
    Sparse { topk: Vec<(TokenId, f32)>, default: f32 },
}

/// `[3, 14, 15]` -> `"3,14,15"`; the empty context is `""`.
pub fn context_key(context: &[TokenId]) -> String {
    context.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

/// Replays recorded logits keyed by the comma-joined context.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    vocab_size: usize,
    entries: HashMap<String, Vec<f32>>,
}

impl ReplayProvider {
    pub fn new(vocab_size: usize, fixture: HashMap<String, ReplayEntry>) -> Result<Self, GatewayError> {
        let mut entries = HashMap::with_capacity(fixture.len());
        for (key, entry) in fixture {
            let logits = match entry {
                ReplayEntry::Full(v) => v,
                ReplayEntry::Sparse { topk, default } => expand_topk(&topk, default, vocab_size)?,
            };
            if logits.len() != vocab_size {
                return Err(GatewayError::LengthMismatch { expected: vocab_size, got: logits.len() });
            }
            check_finite(&logits)?;
            entries.insert(key, logits);
        }
        Ok(Self { vocab_size, entries })
    }

    pub fn from_json(vocab_size: usize, text: &str) -> Result<Self, GatewayError> {
        let fixture: HashMap<String, ReplayEntry> =
            serde_json::from_str(text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        Self::new(vocab_size, fixture)
    }
}

impl LogitsProvider for ReplayProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<Vec<f32>, GatewayError> {
        let key = context_key(context);
        self.entries.get(&key).cloned().ok_or(GatewayError::UnknownContext(key))
    }
}
