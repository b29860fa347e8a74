use serde::Serialize;

use super::tokenizer::{TokenId, Tokenizer};

/// Vocabulary split into parameter-pattern classes.
///
/// `no_param` holds tokens whose text starts with `()` (a call closed with no
/// arguments, such as `())` or `());`). `param` holds tokens that start with
/// `(` and continue with anything other than `)`, plus the bare `(`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParamPolicy {
    pub no_param: Vec<TokenId>,
    pub param: Vec<TokenId>,
}

impl ParamPolicy {
    pub fn classify(tokenizer: &dyn Tokenizer) -> Self {
        let mut policy = ParamPolicy::default();
        for id in 0..tokenizer.vocab_size() as TokenId {
            let Some(text) = tokenizer.token_text(id) else { continue };
            match classify_text(text) {
                Some(true) => policy.param.push(id),
                Some(false) => policy.no_param.push(id),
                None => {}
            }
        }
        policy
    }

    /// The permitted set for an API, by whether it takes parameters.
    pub fn allowed(&self, has_params: bool) -> &[TokenId] {
        if has_params {
            &self.param
        } else {
            &self.no_param
        }
    }

    pub fn is_pattern(&self, id: TokenId) -> bool {
        self.no_param.binary_search(&id).is_ok() || self.param.binary_search(&id).is_ok()
    }
}

/// `Some(false)` for no-param patterns, `Some(true)` for param patterns.
fn classify_text(text: &str) -> Option<bool> {
    let rest = text.strip_prefix('(')?;
    Some(!rest.starts_with(')'))
}
