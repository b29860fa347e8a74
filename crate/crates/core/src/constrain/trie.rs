use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::apitok::ApiTokenization;
use super::tokenizer::TokenId;
use crate::mining::ApiRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrieError {
    #[error("API {0:?} has an empty token sequence")]
    EmptySequence(String),
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrieNode {
    /// Token on the edge into this node; `None` only for the root.
    pub token: Option<TokenId>,
    pub children: BTreeMap<TokenId, usize>,
    /// Indices into [`TokenTrie::apis`] whose sequence ends here.
    pub terminals: Vec<usize>,
}

impl TrieNode {
    pub fn is_terminal(&self) -> bool {
        !self.terminals.is_empty()
    }
}

/// Prefix tree over API token sequences. Node 0 is the root.
#[derive(Debug, Clone, Serialize)]
pub struct TokenTrie {
    pub nodes: Vec<TrieNode>,
    pub apis: Vec<ApiRef>,
    /// Pairs of API indices that tokenized identically; both payloads sit on
    /// the same terminal.
    pub duplicates: Vec<(usize, usize)>,
}

pub const ROOT: usize = 0;

impl TokenTrie {
    /// Inserts every sequence from the root, creating a child for each token
    /// not yet present and descending into it.
    pub fn build(apis: &[ApiTokenization]) -> Result<Self, TrieError> {
        let mut trie = TokenTrie { nodes: vec![TrieNode::default()], apis: Vec::new(), duplicates: Vec::new() };
        for tokenized in apis {
            trie.insert(tokenized)?;
        }
        Ok(trie)
    }

    fn insert(&mut self, tokenized: &ApiTokenization) -> Result<(), TrieError> {
        if tokenized.tokens.is_empty() {
            return Err(TrieError::EmptySequence(tokenized.api.name.clone()));
        }
        let mut node = ROOT;
        for &t in &tokenized.tokens {
            node = match self.nodes[node].children.get(&t) {
                Some(&child) => child,
                None => {
                    let child = self.nodes.len();
                    self.nodes.push(TrieNode { token: Some(t), ..TrieNode::default() });
                    self.nodes[node].children.insert(t, child);
                    child
                }
            };
        }
        let api_index = self.apis.len();
        self.apis.push(tokenized.api.clone());
        if let Some(&first) = self.nodes[node].terminals.first() {
            self.duplicates.push((first, api_index));
        }
        self.nodes[node].terminals.push(api_index);
        Ok(())
    }

    pub fn node(&self, id: usize) -> &TrieNode {
        &self.nodes[id]
    }

    pub fn is_empty(&self) -> bool {
        self.apis.is_empty()
    }

    pub fn len(&self) -> usize {
        self.apis.len()
    }

    /// Follows `tokens` from the root.
    pub fn walk(&self, tokens: &[TokenId]) -> Option<usize> {
        tokens.iter().try_fold(ROOT, |n, t| self.nodes[n].children.get(t).copied())
    }

    /// Every root-to-terminal path, in insertion order of first terminal.
    pub fn sequences(&self) -> Vec<(Vec<TokenId>, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(ROOT, Vec::new())];
        while let Some((n, path)) = stack.pop() {
            for &api in &self.nodes[n].terminals {
                out.push((path.clone(), api));
            }
            for (&t, &c) in self.nodes[n].children.iter().rev() {
                let mut p = path.clone();
                p.push(t);
                stack.push((c, p));
            }
        }
        out.sort_by_key(|(_, api)| *api);
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                serde_json::json!({
                    "id": i,
                    "token": n.token,
                    "children": n.children.values().collect::<Vec<_>>(),
                    "terminal": n.terminals.iter().map(|&a| self.apis[a].qualified()).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "apis": self.apis })
    }
}
