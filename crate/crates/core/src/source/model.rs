use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub package: Vec<String>,
    pub imports: Vec<ImportDecl>,
    pub classes: Vec<ClassInfo>,
    pub raw_text: String,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl SourceUnit {
    pub fn package_name(&self) -> String {
        self.package.join(".")
    }

    pub fn line_count(&self) -> usize {
        self.raw_text.lines().count().max(1)
    }

    /// The innermost method whose declaration covers `line`.
    pub fn method_at_line(&self, line: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, usize)> = None;
        for (ci, class) in self.classes.iter().enumerate() {
            for (mi, m) in class.methods.iter().enumerate() {
                let (s, e) = m.body_lines;
                if m.has_body && s <= line && line <= e {
                    let span = e - s;
                    if best.is_none_or(|b| span < b.2) {
                        best = Some((ci, mi, span));
                    }
                }
            }
        }
        best.map(|(c, m, _)| (c, m))
    }

    pub fn class_named(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target")]
pub enum ImportResolution {
    Unresolved,
    Internal(String),
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportDecl {
    pub segments: Vec<String>,
    pub wildcard: bool,
    #[serde(default)]
    pub is_static: bool,
    pub resolution: ImportResolution,
}

impl ImportDecl {
    pub fn dotted(&self) -> String {
        let mut s = self.segments.join(".");
        if self.wildcard {
            s.push_str(".*");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
    Record,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldInfo {
    pub name: String,
    pub type_text: String,
    pub modifiers: Vec<String>,
    /// Line of the declarator name.
    #[serde(default)]
    pub line: usize,
    /// Set for record components, which live in the class header.
    #[serde(default)]
    pub component: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: String,
    pub kind: ClassKind,
    /// Declaration header up to the opening brace, whitespace-collapsed.
    pub header: String,
    #[serde(rename = "fields")]
    pub fields_: Vec<FieldInfo>,
    pub methods: Vec<MethodInfo>,
    #[serde(default)]
    pub enum_constants: Vec<String>,
    /// Index of the enclosing class within the same unit, for nested types.
    pub parent: Option<usize>,
    pub line_range: (usize, usize),
}

impl ClassInfo {
    pub fn methods_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MethodInfo> + 'a {
        self.methods.iter().filter(move |m| m.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldInfo> {
        self.fields_.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: String,
    pub modifiers: Vec<String>,
    pub params: Vec<Param>,
    /// Empty for constructors.
    pub return_type: String,
    /// Signature without annotations or body, whitespace-collapsed.
    pub signature: String,
    /// Lines of the whole declaration, signature through closing brace.
    pub body_lines: (usize, usize),
    /// Byte offset of `body_text` within the unit's raw text.
    pub body_offset: usize,
    pub body_text: String,
    pub has_body: bool,
    pub call_sites: Vec<InvocationSite>,
}

impl MethodInfo {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn is_constructor(&self) -> bool {
        self.return_type.is_empty()
    }

    pub fn line_count(&self) -> usize {
        self.body_lines.1 - self.body_lines.0 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationSite {
    /// Full receiver expression left of the final `.`; empty for unqualified calls.
    pub receiver_text: String,
    pub method_name: String,
    pub arg_count: usize,
    pub line: usize,
    pub column: usize,
    /// Byte offset of `method_name` in the unit's raw text.
    pub offset: usize,
    /// Byte offset just past the closing parenthesis.
    pub call_end: usize,
}
