use serde::{Deserialize, Serialize};

use super::{GenerationPoint, GlobalDependency, LocalDependency, MineError};
use crate::constrain::tokenizer::Tokenizer;

/// Where the API call is to be generated.
pub const MARKER: &str = "[API_Position]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Shared by description, global and local sections.
    pub project_tokens: usize,
    pub function_tokens: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { project_tokens: 7000, function_tokens: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionLabel {
    ProjectDescription,
    GlobalDependency,
    LocalDependency,
    IncompleteFunction,
}

impl SectionLabel {
    pub fn header(self) -> &'static str {
        match self {
            SectionLabel::ProjectDescription => "### Project Description",
            SectionLabel::GlobalDependency => "### Global Dependency",
            SectionLabel::LocalDependency => "### Local Dependency",
            SectionLabel::IncompleteFunction => "### Incomplete Function",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub label: SectionLabel,
    /// Header, body and, for all but the last section, the blank-line
    /// separator; `rendered` is the concatenation of these.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub sections: Vec<Section>,
    pub rendered: String,
    /// Token count of each section's text, aligned with `sections`.
    pub token_counts: Vec<usize>,
    /// Units removed to meet the project budget, in removal order.
    pub dropped: Vec<String>,
}

impl PromptDocument {
    pub fn count(&self, label: SectionLabel) -> usize {
        self.sections.iter().zip(&self.token_counts).filter(|(s, _)| s.label == label).map(|(_, &n)| n).sum()
    }

    pub fn project_tokens(&self) -> usize {
        self.sections
            .iter()
            .zip(&self.token_counts)
            .filter(|(s, _)| s.label != SectionLabel::IncompleteFunction)
            .map(|(_, &n)| n)
            .sum()
    }

    pub fn function_tokens(&self) -> usize {
        self.count(SectionLabel::IncompleteFunction)
    }

    /// The text a model continues from: the prompt up to the marker.
    pub fn model_input(&self) -> &str {
        self.rendered.strip_suffix(MARKER).unwrap_or(&self.rendered)
    }
}

struct Unit {
    name: String,
    text: String,
}

fn section_text(label: SectionLabel, body: &str, last: bool) -> String {
    let mut s = format!("{}\n{}", label.header(), body);
    if !last {
        s.push_str("\n\n");
    }
    s
}

fn units_text(units: &[Unit]) -> String {
    units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join("\n\n")
}

/// Drops `n` leading tokens of `text`, cutting at the token boundary.
fn drop_leading(tokenizer: &dyn Tokenizer, text: &str, n: usize) -> Result<String, MineError> {
    let toks = tokenizer.encode(text)?;
    if n >= toks.len() {
        return Ok(String::new());
    }
    if tokenizer.decode(&toks) == text {
        let cut = tokenizer.decode(&toks[..n]).len();
        if text.is_char_boundary(cut) {
            return Ok(text[cut..].to_string());
        }
    }
    Ok(tokenizer.decode(&toks[n..]))
}

/// Left-truncates `body` until `label`'s section fits in `budget`.
fn fit_left(
    tokenizer: &dyn Tokenizer,
    label: SectionLabel,
    body: &str,
    suffix: &str,
    last: bool,
    budget: usize,
) -> Result<(String, usize), MineError> {
    let mut body = body.to_string();
    loop {
        let text = section_text(label, &format!("{body}{suffix}"), last);
        let n = tokenizer.count(&text)?;
        if n <= budget {
            return Ok((body, n));
        }
        if body.is_empty() {
            return Err(MineError::BudgetTooSmall(label.header().to_string()));
        }
        body = drop_leading(tokenizer, &body, (n - budget).max(1))?;
    }
}

/// Renders the four-part prompt.
///
/// Sections appear as project description, global dependency (related
/// skeletons, then the current file's), local dependency (called functions,
/// then the reference API list) and the incomplete function ending in the
/// position marker. Absent or empty parts are omitted. When the first three
/// exceed the project budget, whole units are dropped in rendering order;
/// if the description alone is still too long it is cut from the left. The
/// function is cut from the left to the function budget.
pub fn build_prompt(
    description: &str,
    global: Option<&GlobalDependency>,
    local: Option<&LocalDependency>,
    point: &GenerationPoint,
    budgets: Budgets,
    tokenizer: &dyn Tokenizer,
) -> Result<PromptDocument, MineError> {
    if budgets.project_tokens == 0 || budgets.function_tokens == 0 {
        return Err(MineError::InvalidBudget);
    }
    if point.prefix_text.contains(MARKER) {
        return Err(MineError::MarkerCollision);
    }

    let mut global_units = Vec::new();
    if let Some(g) = global {
        for s in g.related_skeletons.iter().chain(std::iter::once(&g.current_skeleton)) {
            global_units.push(Unit { name: s.path.clone(), text: format!("// {}\n{}", s.path, s.rendered_text) });
        }
    }
    let mut local_units = Vec::new();
    if let Some(l) = local {
        for f in &l.called_functions {
            local_units.push(Unit { name: f.qualified_name.clone(), text: format!("// {}\n{}", f.qualified_name, f.body_text) });
        }
        if !l.reference_apis.is_empty() {
            let mut block = String::from("// Available APIs");
            for a in &l.reference_apis {
                block.push_str(&format!("\n// {}: {}", a.owner, a.signature_text));
            }
            local_units.push(Unit { name: "reference APIs".into(), text: block });
        }
    }
    if std::iter::once(description).chain(global_units.iter().chain(&local_units).map(|u| u.text.as_str())).any(|t| t.contains(MARKER)) {
        return Err(MineError::MarkerCollision);
    }

    let count_units = |label, units: &[Unit]| -> Result<usize, MineError> {
        if units.is_empty() {
            Ok(0)
        } else {
            Ok(tokenizer.count(&section_text(label, &units_text(units), false))?)
        }
    };
    let mut desc = description.to_string();
    let mut desc_n = if desc.is_empty() { 0 } else { tokenizer.count(&section_text(SectionLabel::ProjectDescription, &desc, false))? };
    let mut global_n = count_units(SectionLabel::GlobalDependency, &global_units)?;
    let mut local_n = count_units(SectionLabel::LocalDependency, &local_units)?;
    let mut dropped = Vec::new();
    if desc_n + global_n + local_n > budgets.project_tokens {
        // Fewest leading units (global first, then local) whose removal fits;
        // found by bisection since each count re-tokenizes a whole section.
        let total = global_units.len() + local_units.len();
        let (k, gn, ln) = {
            let fits_after = |k: usize| -> Result<(bool, usize, usize), MineError> {
                let g = k.min(global_units.len());
                let gn = count_units(SectionLabel::GlobalDependency, &global_units[g..])?;
                let ln = count_units(SectionLabel::LocalDependency, &local_units[k - g..])?;
                Ok((desc_n + gn + ln <= budgets.project_tokens, gn, ln))
            };
            let mut k = total;
            if fits_after(total)?.0 {
                let (mut lo, mut hi) = (0, total);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if fits_after(mid)?.0 {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                k = lo;
            }
            let (_, gn, ln) = fits_after(k)?;
            (k, gn, ln)
        };
        let g = k.min(global_units.len());
        dropped.extend(global_units.drain(..g).map(|u| u.name));
        dropped.extend(local_units.drain(..k - g).map(|u| u.name));
        global_n = gn;
        local_n = ln;
        if desc_n + global_n + local_n > budgets.project_tokens {
            match fit_left(tokenizer, SectionLabel::ProjectDescription, &desc, "", false, budgets.project_tokens) {
                Ok((d, n)) => {
                    desc = d;
                    desc_n = if desc.is_empty() { 0 } else { n };
                }
                Err(MineError::BudgetTooSmall(_)) => {
                    desc.clear();
                    desc_n = 0;
                }
                Err(e) => return Err(e),
            }
            dropped.push("project description (truncated)".into());
        }
    }

    let mut sections = Vec::new();
    let mut token_counts = Vec::new();
    if !desc.is_empty() {
        sections.push(Section { label: SectionLabel::ProjectDescription, text: section_text(SectionLabel::ProjectDescription, &desc, false) });
        token_counts.push(desc_n);
    }
    if !global_units.is_empty() {
        sections.push(Section { label: SectionLabel::GlobalDependency, text: section_text(SectionLabel::GlobalDependency, &units_text(&global_units), false) });
        token_counts.push(global_n);
    }
    if !local_units.is_empty() {
        sections.push(Section { label: SectionLabel::LocalDependency, text: section_text(SectionLabel::LocalDependency, &units_text(&local_units), false) });
        token_counts.push(local_n);
    }
    let (body, fn_n) = fit_left(
        tokenizer,
        SectionLabel::IncompleteFunction,
        &point.prefix_text,
        MARKER,
        true,
        budgets.function_tokens,
    )?;
    sections.push(Section {
        label: SectionLabel::IncompleteFunction,
        text: section_text(SectionLabel::IncompleteFunction, &format!("{body}{MARKER}"), true),
    });
    token_counts.push(fn_n);
    let rendered = sections.iter().map(|s| s.text.as_str()).collect();
    Ok(PromptDocument { sections, rendered, token_counts, dropped })
}
