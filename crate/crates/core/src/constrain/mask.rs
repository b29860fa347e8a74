use thiserror::Error;

use super::policy::ParamPolicy;
use super::tokenizer::TokenId;
use super::trie::TokenTrie;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("no token is permitted at this step")]
    EmptyMask,
    #[error("logits length {got} does not match vocabulary size {expected}")]
    LogitsLength { expected: usize, got: usize },
}

/// Where a decode session stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Spelling an API name; the node is the trie position reached so far.
    Name(usize),
    /// Name complete at this terminal node; the next token must be a
    /// parameter pattern.
    Param(usize),
    Done,
}

/// Support of the binary mask: the sorted set of permitted token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMask {
    pub valid_ids: Vec<TokenId>,
}

impl ConstraintMask {
    pub fn new(mut ids: Vec<TokenId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { valid_ids: ids }
    }

    pub fn full(vocab_size: usize) -> Self {
        Self { valid_ids: (0..vocab_size as TokenId).collect() }
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.valid_ids.binary_search(&id).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_ids.is_empty()
    }
}

/// How masked logits are reduced to a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    /// Argmax over permitted ids only (invalid logits treated as -inf).
    #[default]
    Restrict,
    /// Literal elementwise product `l * M` followed by argmax over the whole
    /// vocabulary. A masked-out token scores 0 and wins whenever every
    /// permitted logit is negative.
    Multiply,
}

fn merge_sorted(a: &[TokenId], b: &[TokenId]) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Parameter-pattern tokens acceptable for any payload at a terminal node.
fn param_ids(trie: &TokenTrie, node: usize, policy: &ParamPolicy) -> Vec<TokenId> {
    let terminals = &trie.node(node).terminals;
    let wants_param = terminals.iter().any(|&a| trie.apis[a].has_params);
    let wants_none = terminals.iter().any(|&a| !trie.apis[a].has_params);
    match (wants_none, wants_param) {
        (true, true) => merge_sorted(&policy.no_param, &policy.param),
        (true, false) => policy.no_param.clone(),
        (false, true) => policy.param.clone(),
        (false, false) => Vec::new(),
    }
}

/// The permitted next tokens.
///
/// In the name phase these are the children of the current node; when the
/// node also ends an API (one name is a prefix of another) the parameter
/// patterns for that API are permitted too. In the parameter phase only the
/// no-param set (API takes no arguments) or the param set is permitted.
pub fn compute_mask(phase: Phase, trie: &TokenTrie, policy: &ParamPolicy) -> Result<ConstraintMask, MaskError> {
    let ids = match phase {
        Phase::Name(node) => {
            let n = trie.node(node);
            let children: Vec<TokenId> = n.children.keys().copied().collect();
            if n.is_terminal() {
                merge_sorted(&children, &param_ids(trie, node, policy))
            } else {
                children
            }
        }
        Phase::Param(node) => param_ids(trie, node, policy),
        Phase::Done => Vec::new(),
    };
    if ids.is_empty() {
        return Err(MaskError::EmptyMask);
    }
    Ok(ConstraintMask { valid_ids: ids })
}

/// Greedy choice under the mask; ties go to the smallest id.
pub fn select_next(logits: &[f32], mask: &ConstraintMask, vocab_size: usize, mode: MaskMode) -> Result<TokenId, MaskError> {
    if logits.len() != vocab_size {
        return Err(MaskError::LogitsLength { expected: vocab_size, got: logits.len() });
    }
    if mask.is_empty() {
        return Err(MaskError::EmptyMask);
    }
    let best = match mode {
        MaskMode::Restrict => {
            let mut best = mask.valid_ids[0];
            for &id in &mask.valid_ids[1..] {
                if logits[id as usize] > logits[best as usize] {
                    best = id;
                }
            }
            best
        }
        MaskMode::Multiply => {
            let scored = |i: usize| if mask.contains(i as TokenId) { logits[i] } else { 0.0 };
            let mut best = 0usize;
            for i in 1..logits.len() {
                if scored(i) > scored(best) {
                    best = i;
                }
            }
            best as TokenId
        }
    };
    Ok(best)
}

/// Unconstrained greedy choice, ties to the smallest id.
pub fn argmax(logits: &[f32]) -> TokenId {
    let mut best = 0usize;
    for i in 1..logits.len() {
        if logits[i] > logits[best] {
            best = i;
        }
    }
    best as TokenId
}
