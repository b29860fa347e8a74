//! API-constrained decoding: context-aware API tokenization, the token prefix
//! trie, parameter-pattern classes, per-step masks and masked greedy decoding.

pub mod apitok;
pub mod decode;
pub mod mask;
pub mod policy;
pub mod tokenizer;
pub mod trie;

pub use apitok::{tokenize_api, tokenize_reference_set, ApiTokenError, ApiTokenization};
pub use decode::{decode, decode_unconstrained, DecodeError, DecodeOutput, DecodeSession};
pub use mask::{argmax, compute_mask, select_next, ConstraintMask, MaskError, MaskMode, Phase};
pub use policy::ParamPolicy;
pub use tokenizer::{BpeTokenizer, RecordedTokenizer, TokenId, Tokenizer, TokenizerError, VocabTokenizer};
pub use trie::{TokenTrie, TrieError, TrieNode, ROOT};
