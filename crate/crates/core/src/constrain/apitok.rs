use thiserror::Error;

use super::tokenizer::{TokenId, Tokenizer, TokenizerError};
use crate::mining::ApiRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApiTokenError {
    #[error("API name is empty")]
    EmptyName,
    #[error("shared-prefix removal left no tokens for {0:?}")]
    EmptyResidual(String),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

/// The token sequence an API name is generated as, in context.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiTokenization {
    pub api: ApiRef,
    pub tokens: Vec<TokenId>,
}

fn common_prefix(a: &[TokenId], b: &[TokenId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Tokenizes `api_name` as it would appear after `context_prefix`:
/// `encode(context + name)` with its longest common prefix with
/// `encode(context)` removed. When the tokenizer merges across the boundary
/// the residual starts with a token that also covers the tail of the context
/// (for example a leading `.`).
pub fn tokenize_api(
    tokenizer: &dyn Tokenizer,
    context_prefix: &str,
    api_name: &str,
) -> Result<Vec<TokenId>, ApiTokenError> {
    if api_name.is_empty() {
        return Err(ApiTokenError::EmptyName);
    }
    let context = tokenizer.encode(context_prefix)?;
    let full = tokenizer.encode(&format!("{context_prefix}{api_name}"))?;
    let shared = common_prefix(&context, &full);
    if shared == full.len() {
        return Err(ApiTokenError::EmptyResidual(api_name.to_string()));
    }
    Ok(full[shared..].to_vec())
}

/// Tokenizes a whole reference set against one context so every sequence
/// starts at the same position: the cut is the shortest shared prefix over
/// all APIs. Returns the context tokens that precede the cut together with
/// one tokenization per API.
pub fn tokenize_reference_set(
    tokenizer: &dyn Tokenizer,
    context_prefix: &str,
    apis: &[ApiRef],
) -> Result<(Vec<TokenId>, Vec<ApiTokenization>), ApiTokenError> {
    let context = tokenizer.encode(context_prefix)?;
    let mut fulls = Vec::with_capacity(apis.len());
    let mut cut = context.len();
    for api in apis {
        if api.name.is_empty() {
            return Err(ApiTokenError::EmptyName);
        }
        let full = tokenizer.encode(&format!("{context_prefix}{}", api.name))?;
        cut = cut.min(common_prefix(&context, &full));
        fulls.push(full);
    }
    let mut out = Vec::with_capacity(apis.len());
    for (api, full) in apis.iter().zip(fulls) {
        if full.len() <= cut {
            return Err(ApiTokenError::EmptyResidual(api.name.clone()));
        }
        out.push(ApiTokenization { api: api.clone(), tokens: full[cut..].to_vec() });
    }
    Ok((context[..cut].to_vec(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constrain::tokenizer::VocabTokenizer;
    use crate::mining::ApiSource;

    fn vocab(tokens: &[&str]) -> VocabTokenizer {
        VocabTokenizer::new(tokens.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn api(name: &str) -> ApiRef {
        ApiRef::new("T", name, false, format!("void {name}()"), ApiSource::InProjectDeclared)
    }

    #[test]
    fn no_context() {
        let t = vocab(&["e", "f"]);
        assert_eq!(tokenize_api(&t, "", "f").unwrap(), vec![1]);
    }

    #[test]
    fn boundary_merge_keeps_separator_in_residual() {
        let t = vocab(&["r", ".", "w", "x", "r.", ".w", "wx"]);
        // "r." alone -> [r.]; "r.wx" -> [r., wx]: clean boundary.
        assert_eq!(tokenize_api(&t, "r.", "wx").unwrap(), vec![6]);
        // "x." -> [x, .]; "x.w" -> [x, .w]: the residual absorbs the dot.
        assert_eq!(tokenize_api(&t, "x.", "w").unwrap(), vec![5]);
    }

    #[test]
    fn empty_residual_and_name() {
        let t = vocab(&["a", "ab"]);
        assert_eq!(tokenize_api(&t, "a", ""), Err(ApiTokenError::EmptyName));
        // A pathological recorded merge: the name vanishes into the context.
        let rec = crate::constrain::tokenizer::RecordedTokenizer::from_json(
            r#"{"vocab_size": 4, "tokens": {"1": "ab"}, "encodings": {"a": [1, 2], "ab": [1]}}"#,
        )
        .unwrap();
        assert_eq!(tokenize_api(&rec, "a", "b"), Err(ApiTokenError::EmptyResidual("b".into())));
    }

    #[test]
    fn reference_set_aligns_to_shortest_prefix() {
        let t = vocab(&["x", ".", "w", "g", ".w"]);
        let (ctx, toks) = tokenize_reference_set(&t, "x.", &[api("w"), api("g")]).unwrap();
        assert_eq!(ctx, vec![0]);
        assert_eq!(toks[0].tokens, vec![4]);
        assert_eq!(toks[1].tokens, vec![1, 3]);
    }
}
