//! Hierarchical dependency mining for a generation point: local dependencies
//! (reference APIs, called-function implementations), global dependencies
//! (file skeletons), and the structured prompt built from them.

mod global;
mod local;
mod prompt;
pub mod scope;
mod skeleton;

pub use global::mine_global;
pub use local::mine_local;
pub use prompt::{build_prompt, Budgets, PromptDocument, Section, SectionLabel, MARKER};
pub use scope::{declared_locals, Scope};
pub use skeleton::extract_skeleton;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constrain::tokenizer::TokenizerError;
use crate::source::{InvocationSite, MethodInfo, ProjectIndex, SourceUnit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MineError {
    #[error("no generation point at {0}")]
    PointNotFound(String),
    #[error("incomplete function already contains the position marker")]
    MarkerCollision,
    #[error("budgets must be positive")]
    InvalidBudget,
    #[error("budget too small for section {0:?}")]
    BudgetTooSmall(String),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

/// How an API entered the reference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApiSource {
    InProjectDeclared,
    FieldTyped,
    LocalTyped,
}

/// One valid API: a project method an API call at the point may name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApiRef {
    pub owner: String,
    pub name: String,
    pub has_params: bool,
    pub signature_text: String,
    pub source: ApiSource,
}

impl ApiRef {
    pub fn new(
        owner: impl Into<String>,
        name: impl Into<String>,
        has_params: bool,
        signature_text: impl Into<String>,
        source: ApiSource,
    ) -> Self {
        Self { owner: owner.into(), name: name.into(), has_params, signature_text: signature_text.into(), source }
    }

    pub fn from_method(owner: &str, m: &MethodInfo, source: ApiSource) -> Self {
        Self::new(owner, m.name.clone(), m.arity() > 0, m.signature.clone(), source)
    }

    pub fn qualified(&self) -> String {
        format!("{}.{}", self.owner, self.name)
    }

    /// Identity within a reference set.
    pub fn key(&self) -> (&str, &str, bool) {
        (&self.owner, &self.name, self.has_params)
    }
}

/// Where an API call is to be generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPoint {
    pub file: String,
    pub class_name: String,
    pub method_name: String,
    pub line: usize,
    pub column: usize,
    /// Function source strictly before the API name (receiver and `.`
    /// included).
    pub prefix_text: String,
    pub receiver_text: String,
    pub class_index: usize,
    pub method_index: usize,
    /// Byte offset of the API name in the unit's raw text.
    pub offset: usize,
}

impl GenerationPoint {
    /// The point at `line` (1-based) and byte `column` (0-based) of `file`.
    pub fn locate(index: &ProjectIndex, file: &str, line: usize, column: usize) -> Result<Self, MineError> {
        let here = || format!("{file}:{line}:{column}");
        let unit = index.unit(file).ok_or_else(|| MineError::PointNotFound(here()))?;
        let offset = line_offset(&unit.raw_text, line).ok_or_else(|| MineError::PointNotFound(here()))? + column;
        let (ci, mi) = unit.method_at_line(line).ok_or_else(|| MineError::PointNotFound(here()))?;
        let method = &unit.classes[ci].methods[mi];
        let lo = method.body_offset;
        let hi = lo + method.body_text.len();
        if offset <= lo || offset >= hi || !unit.raw_text.is_char_boundary(offset) {
            return Err(MineError::PointNotFound(here()));
        }
        let prefix_text = method.body_text[..offset - lo].to_string();
        let receiver_text = match method.call_sites.iter().find(|s| s.offset == offset) {
            Some(site) => site.receiver_text.clone(),
            None => receiver_before(&prefix_text),
        };
        Ok(Self {
            file: file.to_string(),
            class_name: unit.classes[ci].name.clone(),
            method_name: method.name.clone(),
            line,
            column,
            prefix_text,
            receiver_text,
            class_index: ci,
            method_index: mi,
            offset,
        })
    }

    /// The point at an existing call site of a method.
    pub fn at_site(unit: &SourceUnit, class_index: usize, method_index: usize, site: &InvocationSite) -> Self {
        let class = &unit.classes[class_index];
        let method = &class.methods[method_index];
        Self {
            file: unit.path.clone(),
            class_name: class.name.clone(),
            method_name: method.name.clone(),
            line: site.line,
            column: site.column,
            prefix_text: method.body_text[..site.offset - method.body_offset].to_string(),
            receiver_text: site.receiver_text.clone(),
            class_index,
            method_index,
            offset: site.offset,
        }
    }

    pub fn unit<'a>(&self, index: &'a ProjectIndex) -> Result<&'a SourceUnit, MineError> {
        index.unit(&self.file).ok_or_else(|| MineError::PointNotFound(self.file.clone()))
    }

    pub fn method<'a>(&self, index: &'a ProjectIndex) -> Result<&'a MethodInfo, MineError> {
        self.unit(index)?
            .classes
            .get(self.class_index)
            .and_then(|c| c.methods.get(self.method_index))
            .ok_or_else(|| MineError::PointNotFound(format!("{}.{}", self.class_name, self.method_name)))
    }

    /// Text of the line holding the point, up to the point.
    pub fn line_prefix(&self) -> &str {
        self.prefix_text.rsplit('\n').next().unwrap_or("")
    }
}

fn line_offset(text: &str, line: usize) -> Option<usize> {
    if line == 0 {
        return None;
    }
    if line == 1 {
        return Some(0);
    }
    text.match_indices('\n').nth(line - 2).map(|(i, _)| i + 1)
}

/// Receiver expression ending at a trailing `.`, found by walking back over
/// identifiers, dots and balanced brackets. Empty when the text does not end
/// with a `.`.
fn receiver_before(prefix: &str) -> String {
    let trimmed = prefix.trim_end();
    let Some(body) = trimmed.strip_suffix('.') else { return String::new() };
    let bytes = body.as_bytes();
    let mut i = bytes.len();
    let mut depth = 0usize;
    while i > 0 {
        let c = bytes[i - 1];
        match c {
            b')' | b']' => depth += 1,
            b'(' | b'[' if depth > 0 => depth -= 1,
            _ if depth > 0 => {}
            b'.' | b'_' | b'$' => {}
            _ if c.is_ascii_alphanumeric() => {}
            _ => break,
        }
        i -= 1;
    }
    body[i..].trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalledFunction {
    pub qualified_name: String,
    pub body_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalDependency {
    pub reference_apis: Vec<ApiRef>,
    pub called_functions: Vec<CalledFunction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSkeleton {
    pub path: String,
    pub rendered_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDependency {
    pub current_skeleton: FileSkeleton,
    pub related_skeletons: Vec<FileSkeleton>,
}

/// Everything mined for one generation point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyContext {
    pub point: GenerationPoint,
    pub description: String,
    pub local: LocalDependency,
    pub global: GlobalDependency,
}

impl DependencyContext {
    pub fn mine(index: &ProjectIndex, point: GenerationPoint, strict: bool) -> Result<Self, MineError> {
        let local = mine_local(&point, index, strict)?;
        let global = mine_global(&point, index)?;
        Ok(Self { description: index.description.clone(), point, local, global })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn receiver_walk_back() {
        assert_eq!(receiver_before("    reaction."), "reaction");
        assert_eq!(receiver_before("x = world.getReaction(a.b()).next."), "world.getReaction(a.b()).next");
        assert_eq!(receiver_before("foo("), "");
        assert_eq!(receiver_before("return this.items[i]."), "this.items[i]");
    }

    #[test]
    fn locate_point() {
        let src = "class A {\n  B b;\n  void f() {\n    b.go();\n  }\n}\n";
        let index = ProjectIndex::build(vec![("A.java".into(), src.into())], "").unwrap();
        let p = GenerationPoint::locate(&index, "A.java", 4, 6).unwrap();
        assert_eq!(p.receiver_text, "b");
        assert_eq!(p.prefix_text, "void f() {\n    b.");
        assert_eq!(p.line_prefix(), "    b.");
        assert!(matches!(GenerationPoint::locate(&index, "A.java", 2, 2), Err(MineError::PointNotFound(_))));
        assert!(matches!(GenerationPoint::locate(&index, "B.java", 4, 6), Err(MineError::PointNotFound(_))));
    }
}
