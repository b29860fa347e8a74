//! Tokenizers behind a common contract.
//!
//! [`VocabTokenizer`] is greedy longest-match over a vocabulary file,
//! [`BpeTokenizer`] applies ranked merge rules, and [`RecordedTokenizer`]
//! replays encodings captured from a real model's tokenizer.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

pub type TokenId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenizerError {
    #[error("no token covers {ch:?} at byte {offset}")]
    Unencodable { offset: usize, ch: char },
    #[error("no recorded encoding for {0:?}")]
    Unrecorded(String),
    #[error("vocabulary: {0}")]
    BadVocab(String),
}

pub trait Tokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError>;

    fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().filter_map(|&id| self.token_text(id)).collect()
    }

    fn vocab_size(&self) -> usize;

    fn token_text(&self, id: TokenId) -> Option<&str>;

    fn count(&self, text: &str) -> Result<usize, TokenizerError> {
        Ok(self.encode(text)?.len())
    }
}

pub const UNK: &str = "<unk>";

/// Greedy left-to-right longest-match tokenizer, fully described by its
/// vocabulary: one token per line, id = 0-based line number. `\n`, `\t`,
/// `\r` and `\\` escapes are honoured. A line reading `<unk>` makes that id
/// the fallback for characters no token covers.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    tokens: Vec<String>,
    lookup: HashMap<String, TokenId>,
    max_len: usize,
    unk: Option<TokenId>,
}

impl VocabTokenizer {
    pub fn new(tokens: Vec<String>) -> Result<Self, TokenizerError> {
        let mut lookup = HashMap::with_capacity(tokens.len());
        let mut unk = None;
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(TokenizerError::BadVocab(format!("empty token at line {}", i + 1)));
            }
            if t == UNK {
                unk = Some(i as TokenId);
                continue;
            }
            if lookup.insert(t.clone(), i as TokenId).is_some() {
                return Err(TokenizerError::BadVocab(format!("duplicate token {t:?} at line {}", i + 1)));
            }
        }
        let max_len = tokens.iter().map(String::len).max().unwrap_or(0);
        Ok(Self { tokens, lookup, max_len, unk })
    }

    pub fn from_vocab_text(text: &str) -> Result<Self, TokenizerError> {
        Self::new(text.lines().map(unescape).collect())
    }

    pub fn from_file(path: &Path) -> Result<Self, TokenizerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TokenizerError::BadVocab(format!("{}: {e}", path.display())))?;
        Self::from_vocab_text(&text)
    }

    pub fn to_vocab_text(&self) -> String {
        self.tokens.iter().map(|t| escape(t) + "\n").collect()
    }

    pub fn id(&self, text: &str) -> Option<TokenId> {
        self.lookup.get(text).copied()
    }
}

impl Tokenizer for VocabTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let longest = (1..=self.max_len.min(rest.len()))
                .rev()
                .filter(|&n| rest.is_char_boundary(n))
                .find_map(|n| self.lookup.get(&rest[..n]).map(|&id| (id, n)));
            match longest {
                Some((id, n)) => {
                    out.push(id);
                    pos += n;
                }
                None => {
                    let ch = rest.chars().next().expect("non-empty");
                    match self.unk {
                        Some(id) => out.push(id),
                        None => return Err(TokenizerError::Unencodable { offset: pos, ch }),
                    }
                    pos += ch.len_utf8();
                }
            }
        }
        Ok(out)
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn token_text(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }
}

fn unescape(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn escape(token: &str) -> String {
    token.replace('\\', "\\\\").replace('\n', "\\n").replace('\t', "\\t").replace('\r', "\\r")
}

/// Byte-pair tokenizer over a character alphabet. Ids: alphabet characters
/// in order, then each merge result in rank order. Encoding repeatedly merges
/// the adjacent pair with the lowest rank, all occurrences left to right.
#[derive(Debug, Clone)]
pub struct BpeTokenizer {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
    ranks: HashMap<(String, String), usize>,
}

impl BpeTokenizer {
    pub fn new(alphabet: &[char], merges: &[(&str, &str)]) -> Result<Self, TokenizerError> {
        let mut tokens: Vec<String> = Vec::new();
        let mut ids = HashMap::new();
        for c in alphabet {
            let s = c.to_string();
            if ids.insert(s.clone(), tokens.len() as TokenId).is_none() {
                tokens.push(s);
            }
        }
        let mut ranks = HashMap::new();
        for (rank, (a, b)) in merges.iter().enumerate() {
            if !ids.contains_key(*a) || !ids.contains_key(*b) {
                return Err(TokenizerError::BadVocab(format!("merge {a:?}+{b:?} uses unknown symbol")));
            }
            ranks.entry((a.to_string(), b.to_string())).or_insert(rank);
            let merged = format!("{a}{b}");
            if !ids.contains_key(&merged) {
                ids.insert(merged.clone(), tokens.len() as TokenId);
                tokens.push(merged);
            }
        }
        Ok(Self { tokens, ids, ranks })
    }

    pub fn id(&self, text: &str) -> Option<TokenId> {
        self.ids.get(text).copied()
    }

    fn symbols(&self, text: &str) -> Result<Vec<String>, TokenizerError> {
        let mut parts: Vec<String> = Vec::new();
        for (offset, ch) in text.char_indices() {
            let s = ch.to_string();
            if !self.ids.contains_key(&s) {
                return Err(TokenizerError::Unencodable { offset, ch });
            }
            parts.push(s);
        }
        loop {
            let best = parts
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let mut merged = Vec::with_capacity(parts.len());
            let mut i = 0;
            while i < parts.len() {
                if i + 1 < parts.len() && self.ranks.get(&(parts[i].clone(), parts[i + 1].clone())) == Some(&rank) {
                    merged.push(format!("{}{}", parts[i], parts[i + 1]));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut parts[i]));
                    i += 1;
                }
            }
            parts = merged;
        }
        Ok(parts)
    }
}

impl Tokenizer for BpeTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        Ok(self.symbols(text)?.iter().map(|s| self.ids[s]).collect())
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn token_text(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }
}

/// Encodings captured from an external tokenizer, replayed verbatim.
/// Only recorded strings can be encoded. `▁` in token texts decodes to a
/// space, matching sentencepiece vocabularies.
#[derive(Debug, Clone, Deserialize)]
pub struct RecordedTokenizer {
    pub vocab_size: usize,
    pub tokens: BTreeMap<TokenId, String>,
    pub encodings: BTreeMap<String, Vec<TokenId>>,
}

impl RecordedTokenizer {
    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        let t: Self = serde_json::from_str(text).map_err(|e| TokenizerError::BadVocab(e.to_string()))?;
        if let Some(bad) = t.tokens.keys().chain(t.encodings.values().flatten()).find(|&&id| id as usize >= t.vocab_size) {
            return Err(TokenizerError::BadVocab(format!("id {bad} outside vocabulary")));
        }
        Ok(t)
    }
}

impl Tokenizer for RecordedTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        self.encodings.get(text).cloned().ok_or_else(|| TokenizerError::Unrecorded(text.to_string()))
    }

    fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().filter_map(|id| self.tokens.get(id)).map(|t| t.replace('\u{2581}', " ")).collect()
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn token_text(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(&id).map(String::as_str)
    }
}
