use serde::Serialize;
use thiserror::Error;

use super::mask::{argmax, compute_mask, select_next, MaskError, MaskMode, Phase};
use super::policy::ParamPolicy;
use super::tokenizer::{TokenId, Tokenizer};
use super::trie::{TokenTrie, ROOT};
use crate::gateway::{GatewayError, LogitsProvider};
use crate::mining::ApiRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("token budget exhausted after {} tokens", partial.tokens.len())]
    Truncated { partial: Box<DecodeOutput> },
    #[error("reference API set is empty")]
    EmptyTrie,
    #[error("session already used")]
    SessionNotFresh,
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl DecodeError {
    /// Whatever was generated before the error, if anything.
    pub fn partial(&self) -> Option<&DecodeOutput> {
        match self {
            DecodeError::Truncated { partial } => Some(partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeOutput {
    pub text: String,
    pub tokens: Vec<TokenId>,
    pub steps: usize,
    /// The API whose path was completed, for constrained decodes.
    pub api: Option<ApiRef>,
    /// Set when [`MaskMode::Multiply`] let a masked-out token through.
    pub escaped: bool,
}

/// One API-generation episode. Single owner, advanced strictly in order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeSession {
    pub prompt_tokens: Vec<TokenId>,
    pub generated: Vec<TokenId>,
    pub phase: Phase,
    pub max_new_tokens: usize,
    pub mode: MaskMode,
}

impl DecodeSession {
    pub fn new(prompt_tokens: Vec<TokenId>, max_new_tokens: usize) -> Self {
        Self { prompt_tokens, generated: Vec::new(), phase: Phase::Name(ROOT), max_new_tokens, mode: MaskMode::Restrict }
    }

    pub fn with_mode(mut self, mode: MaskMode) -> Self {
        self.mode = mode;
        self
    }

    fn context(&self) -> Vec<TokenId> {
        let mut ctx = Vec::with_capacity(self.prompt_tokens.len() + self.generated.len());
        ctx.extend_from_slice(&self.prompt_tokens);
        ctx.extend_from_slice(&self.generated);
        ctx
    }
}

/// Picks the payload at `node` that agrees with the emitted pattern token.
fn payload(trie: &TokenTrie, node: usize, policy: &ParamPolicy, token: TokenId) -> Option<ApiRef> {
    let wants_params = policy.param.binary_search(&token).is_ok();
    let terminals = &trie.node(node).terminals;
    terminals
        .iter()
        .find(|&&a| trie.apis[a].has_params == wants_params)
        .or(terminals.first())
        .map(|&a| trie.apis[a].clone())
}

/// Masked greedy decoding of one API call.
///
/// Each step computes the mask for the current phase, asks the provider for
/// logits over prompt plus generated tokens, and takes the best permitted
/// token. Name tokens descend the trie; a parameter-pattern token at a
/// terminal ends the episode. A terminal with no children moves straight to
/// the parameter phase.
pub fn decode(
    session: &mut DecodeSession,
    trie: &TokenTrie,
    policy: &ParamPolicy,
    lm: &dyn LogitsProvider,
    tokenizer: &dyn Tokenizer,
) -> Result<DecodeOutput, DecodeError> {
    if trie.is_empty() {
        return Err(DecodeError::EmptyTrie);
    }
    if !session.generated.is_empty() || session.phase != Phase::Name(ROOT) {
        return Err(DecodeError::SessionNotFresh);
    }
    let vocab = lm.vocab_size();
    let mut api = None;
    let mut escaped = false;
    while session.phase != Phase::Done {
        if session.generated.len() >= session.max_new_tokens {
            let partial = DecodeOutput {
                text: tokenizer.decode(&session.generated),
                tokens: session.generated.clone(),
                steps: session.generated.len(),
                api: None,
                escaped,
            };
            return Err(DecodeError::Truncated { partial: Box::new(partial) });
        }
        let mask = compute_mask(session.phase, trie, policy)?;
        let logits = lm.next_logits(&session.context())?;
        let token = select_next(&logits, &mask, vocab, session.mode)?;
        session.generated.push(token);
        if !mask.contains(token) {
            escaped = true;
            session.phase = Phase::Done;
            break;
        }
        session.phase = match session.phase {
            Phase::Name(node) => match trie.node(node).children.get(&token) {
                Some(&child) if trie.node(child).children.is_empty() => Phase::Param(child),
                Some(&child) => Phase::Name(child),
                None => {
                    api = payload(trie, node, policy, token);
                    Phase::Done
                }
            },
            Phase::Param(node) => {
                api = payload(trie, node, policy, token);
                Phase::Done
            }
            Phase::Done => Phase::Done,
        };
    }
    Ok(DecodeOutput {
        text: tokenizer.decode(&session.generated),
        tokens: session.generated.clone(),
        steps: session.generated.len(),
        api,
        escaped,
    })
}

/// Plain greedy decoding: argmax over the whole vocabulary until the first
/// parameter-pattern token or the budget.
pub fn decode_unconstrained(
    prompt_tokens: &[TokenId],
    max_new_tokens: usize,
    policy: &ParamPolicy,
    lm: &dyn LogitsProvider,
    tokenizer: &dyn Tokenizer,
) -> Result<DecodeOutput, DecodeError> {
    let mut ctx = prompt_tokens.to_vec();
    let mut generated = Vec::new();
    while generated.len() < max_new_tokens {
        let logits = lm.next_logits(&ctx)?;
        if logits.len() != lm.vocab_size() {
            return Err(MaskError::LogitsLength { expected: lm.vocab_size(), got: logits.len() }.into());
        }
        let token = argmax(&logits);
        generated.push(token);
        ctx.push(token);
        if policy.is_pattern(token) {
            return Ok(DecodeOutput {
                text: tokenizer.decode(&generated),
                steps: generated.len(),
                tokens: generated,
                api: None,
                escaped: false,
            });
        }
    }
    let partial =
        DecodeOutput { text: tokenizer.decode(&generated), steps: generated.len(), tokens: generated, api: None, escaped: false };
    Err(DecodeError::Truncated { partial: Box::new(partial) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constrain::apitok::ApiTokenization;
    use crate::constrain::tokenizer::VocabTokenizer;
    use crate::gateway::{RandomProvider, ReplayEntry, ReplayProvider};
    use crate::mining::{ApiRef, ApiSource};
    use std::collections::HashMap;

    struct Fixed(Vec<f32>);

    impl LogitsProvider for Fixed {
        fn vocab_size(&self) -> usize {
            self.0.len()
        }
        fn next_logits(&self, _: &[TokenId]) -> Result<Vec<f32>, GatewayError> {
            Ok(self.0.clone())
        }
    }

    fn api(name: &str, has_params: bool) -> ApiRef {
        ApiRef::new("T", name, has_params, format!("void {name}()"), ApiSource::InProjectDeclared)
    }

    fn tokenizer(n: usize) -> VocabTokenizer {
        VocabTokenizer::new((0..n).map(|i| format!("<{i}>")).collect()).unwrap()
    }

    fn single_trie() -> TokenTrie {
        TokenTrie::build(&[ApiTokenization { api: api("f", false), tokens: vec![5] }]).unwrap()
    }

    #[test]
    fn single_path() {
        let policy = ParamPolicy { no_param: vec![9], param: vec![] };
        let mut s = DecodeSession::new(vec![1, 2], 15);
        let out = decode(&mut s, &single_trie(), &policy, &Fixed(vec![0.0; 12]), &tokenizer(12)).unwrap();
        assert_eq!(out.tokens, vec![5, 9]);
        assert_eq!(out.steps, 2);
        assert_eq!(out.api.unwrap().name, "f");
        assert_eq!(s.phase, Phase::Done);
    }

    #[test]
    fn truncation_returns_partial() {
        let policy = ParamPolicy { no_param: vec![9], param: vec![] };
        let mut s = DecodeSession::new(vec![], 1);
        let err = decode(&mut s, &single_trie(), &policy, &Fixed(vec![0.0; 12]), &tokenizer(12)).unwrap_err();
        assert_eq!(err.partial().unwrap().tokens, vec![5]);
    }

    #[test]
    fn empty_param_set_errors() {
        let mut s = DecodeSession::new(vec![], 15);
        let err = decode(&mut s, &single_trie(), &ParamPolicy::default(), &Fixed(vec![0.0; 12]), &tokenizer(12));
        assert_eq!(err, Err(DecodeError::Mask(MaskError::EmptyMask)));
    }

    #[test]
    fn prefix_terminal_lets_logits_choose() {
        // "ab" = [1], "abc" = [1, 2]; pattern tokens 8 (no-param), 9 (param).
        let trie = TokenTrie::build(&[
            ApiTokenization { api: api("ab", false), tokens: vec![1] },
            ApiTokenization { api: api("abc", true), tokens: vec![1, 2] },
        ])
        .unwrap();
        let policy = ParamPolicy { no_param: vec![8], param: vec![9] };
        let mut logits = vec![0.0; 10];
        logits[8] = 3.0;
        logits[2] = 2.0;
        logits[1] = 1.0;
        let mut s = DecodeSession::new(vec![], 15);
        let out = decode(&mut s, &trie, &policy, &Fixed(logits.clone()), &tokenizer(10)).unwrap();
        assert_eq!(out.tokens, vec![1, 8]);
        assert_eq!(out.api.unwrap().name, "ab");

        logits[8] = -3.0;
        let mut s = DecodeSession::new(vec![], 15);
        let out = decode(&mut s, &trie, &policy, &Fixed(logits), &tokenizer(10)).unwrap();
        assert_eq!(out.tokens, vec![1, 2, 9]);
        assert_eq!(out.api.unwrap().name, "abc");
    }

    #[test]
    fn multiply_mode_can_escape() {
        let policy = ParamPolicy { no_param: vec![9], param: vec![] };
        let mut logits = vec![-1.0; 12];
        logits[0] = -0.5;
        let mut s = DecodeSession::new(vec![], 15).with_mode(MaskMode::Multiply);
        let out = decode(&mut s, &single_trie(), &policy, &Fixed(logits), &tokenizer(12)).unwrap();
        assert!(out.escaped);
        assert_ne!(out.tokens[0], 5);
    }

    #[test]
    fn replayed_path() {
        let trie = TokenTrie::build(&[
            ApiTokenization { api: api("a", false), tokens: vec![1, 2] },
            ApiTokenization { api: api("b", false), tokens: vec![1, 3] },
        ])
        .unwrap();
        let policy = ParamPolicy { no_param: vec![4], param: vec![] };
        let mut table = HashMap::new();
        table.insert("0".to_string(), ReplayEntry::Full(vec![0.0, 0.0, 0.0, 0.0, 0.0]));
        table.insert("0,1".to_string(), ReplayEntry::Full(vec![0.0, 0.0, 0.1, 0.2, 0.0]));
        table.insert("0,1,3".to_string(), ReplayEntry::Full(vec![0.0; 5]));
        let lm = ReplayProvider::new(5, table).unwrap();
        let mut s = DecodeSession::new(vec![0], 15);
        let out = decode(&mut s, &trie, &policy, &lm, &tokenizer(5)).unwrap();
        assert_eq!(out.tokens, vec![1, 3, 4]);
        assert_eq!(out.api.unwrap().name, "b");
    }

    #[test]
    fn unconstrained_stops_at_pattern() {
        let policy = ParamPolicy { no_param: vec![3], param: vec![] };
        let mut logits = vec![0.0; 4];
        logits[3] = 1.0;
        let out = decode_unconstrained(&[], 15, &policy, &Fixed(logits), &tokenizer(4)).unwrap();
        assert_eq!(out.tokens, vec![3]);
        let lm = RandomProvider::new(3, 4);
        let r = decode_unconstrained(&[], 2, &ParamPolicy::default(), &lm, &tokenizer(4));
        assert_eq!(r.unwrap_err().partial().unwrap().tokens.len(), 2);
    }
}
