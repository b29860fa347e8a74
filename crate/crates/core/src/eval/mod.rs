//! Accuracy and hallucination metrics for generated API calls.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mining::ApiRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no identifier in {0:?}")]
    NoIdentifier(String),
    #[error("nothing to aggregate")]
    EmptySet,
    #[error("unknown reference set {0:?}")]
    UnknownReferenceSet(String),
    #[error("line {line}: {message}")]
    Input { line: usize, message: String },
}

/// Whitespace-trimmed byte equality.
pub fn exact_match(generated: &str, ground_truth: &str) -> bool {
    generated.trim() == ground_truth.trim()
}

/// Levenshtein distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// How edit distance is normalised into a similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EsNorm {
    #[default]
    MaxLength,
    MeanLength,
}

/// `1 - lev(a, b) / max(|a|, |b|)` in characters; 1 when both are empty.
pub fn edit_similarity(generated: &str, ground_truth: &str) -> f64 {
    edit_similarity_with(generated, ground_truth, EsNorm::MaxLength)
}

pub fn edit_similarity_with(generated: &str, ground_truth: &str, norm: EsNorm) -> f64 {
    let (la, lb) = (generated.chars().count(), ground_truth.chars().count());
    let denom = match norm {
        EsNorm::MaxLength => la.max(lb) as f64,
        EsNorm::MeanLength => (la + lb) as f64 / 2.0,
    };
    if denom == 0.0 {
        return 1.0;
    }
    (1.0 - levenshtein(generated, ground_truth) as f64 / denom).clamp(0.0, 1.0)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

/// The method name of a call: the text before the first `(`, last dotted
/// segment.
pub fn call_identifier(text: &str) -> Result<&str, EvalError> {
    let head = text.split('(').next().unwrap_or("");
    let name = head.rsplit('.').next().unwrap_or("").trim();
    if is_identifier(name) {
        Ok(name)
    } else {
        Err(EvalError::NoIdentifier(text.to_string()))
    }
}

/// Same method identifier; a missing identifier on either side is a miss.
pub fn identifier_match(generated: &str, ground_truth: &str) -> bool {
    matches!((call_identifier(generated), call_identifier(ground_truth)), (Ok(a), Ok(b)) if a == b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    Name,
    ParamPattern,
}

/// Whether a call passes arguments; `None` without any `(`. An argument
/// list left open counts as passing arguments.
fn has_args(text: &str) -> Option<bool> {
    let open = text.find('(')?;
    let mut depth = 0usize;
    let mut inner = String::new();
    let mut closed = false;
    for c in text[open + 1..].chars() {
        match c {
            ')' if depth == 0 => {
                closed = true;
                break;
            }
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        inner.push(c);
    }
    Some(!closed || !inner.trim().is_empty())
}

/// Hallucinated elements of a generated call against the reference set.
///
/// `Name` when the identifier names no reference API. `ParamPattern` when the
/// name is known but every reference API of that name disagrees with whether
/// the call passes arguments, or when the call has no argument list at all.
pub fn hallucination_elements(generated: &str, reference_apis: &[ApiRef]) -> Vec<Element> {
    let mut out = Vec::new();
    let args = has_args(generated);
    match call_identifier(generated) {
        Ok(name) if reference_apis.iter().any(|a| a.name == name) => {
            let agrees = args.is_some_and(|g| reference_apis.iter().any(|a| a.name == name && a.has_params == g));
            if !agrees {
                out.push(Element::ParamPattern);
            }
        }
        _ => {
            out.push(Element::Name);
            if args.is_none() {
                out.push(Element::ParamPattern);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub generated: String,
    pub ground_truth: String,
    pub reference_apis: Vec<ApiRef>,
    pub elapsed: f64,
}

/// Per-record metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub em: bool,
    pub es: f64,
    pub im: bool,
    pub elements: Vec<Element>,
    pub elapsed: f64,
}

pub fn score(record: &EvalRecord) -> Score {
    Score {
        em: exact_match(&record.generated, &record.ground_truth),
        es: edit_similarity(&record.generated, &record.ground_truth),
        im: identifier_match(&record.generated, &record.ground_truth),
        elements: hallucination_elements(&record.generated, &record.reference_apis),
        elapsed: record.elapsed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub em: f64,
    pub es: f64,
    pub im: f64,
    pub mihn: f64,
    pub mahr: f64,
    pub mean_time: f64,
}

/// Means over scored records; MiHN is the mean element count and MaHR the
/// fraction of records with any element.
pub fn aggregate(scores: &[Score]) -> Result<MetricReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let n = scores.len() as f64;
    let mean = |f: &dyn Fn(&Score) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        n: scores.len(),
        em: mean(&|s| f64::from(u8::from(s.em))),
        es: mean(&|s| s.es),
        im: mean(&|s| f64::from(u8::from(s.im))),
        mihn: mean(&|s| s.elements.len() as f64),
        mahr: mean(&|s| f64::from(u8::from(!s.elements.is_empty()))),
        mean_time: mean(&|s| s.elapsed),
    })
}

pub fn aggregate_records(records: &[EvalRecord]) -> Result<MetricReport, EvalError> {
    aggregate(&records.iter().map(score).collect::<Vec<_>>())
}

/// Aligned table with percentage columns for EM, ES, IM and MaHR.
pub fn render_table(rows: &[(String, MetricReport)]) -> String {
    let header = ["Setting", "n", "EM", "ES", "IM", "MaHR", "MiHN", "Time(s)"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|(label, r)| {
            [
                label.clone(),
                r.n.to_string(),
                format!("{:.2}", r.em * 100.0),
                format!("{:.2}", r.es * 100.0),
                format!("{:.2}", r.im * 100.0),
                format!("{:.2}", r.mahr * 100.0),
                format!("{:.2}", r.mihn),
                format!("{:.4}", r.mean_time),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &body {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// One line of an evaluation input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalInput {
    #[serde(default)]
    pub id: Option<String>,
    pub generated: String,
    pub ground_truth: String,
    pub reference_set: String,
    #[serde(default)]
    pub elapsed: f64,
}

/// Joins JSONL inputs with a reference-set file (`{"set id": [ApiRef, ..]}`).
pub fn load_records(jsonl: &str, refs_json: &str) -> Result<Vec<EvalRecord>, EvalError> {
    let refs: HashMap<String, Vec<ApiRef>> =
        serde_json::from_str(refs_json).map_err(|e| EvalError::Input { line: 0, message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let input: EvalInput =
            serde_json::from_str(line).map_err(|e| EvalError::Input { line: i + 1, message: e.to_string() })?;
        let reference_apis =
            refs.get(&input.reference_set).cloned().ok_or_else(|| EvalError::UnknownReferenceSet(input.reference_set.clone()))?;
        out.push(EvalRecord { generated: input.generated, ground_truth: input.ground_truth, reference_apis, elapsed: input.elapsed });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::ApiSource;

    fn api(name: &str, has_params: bool) -> ApiRef {
        ApiRef::new("Reaction", name, has_params, format!("void {name}()"), ApiSource::LocalTyped)
    }

    #[test]
    fn em() {
        assert!(exact_match("willReact()", "willReact()"));
        assert!(!exact_match("willReact()", "willReact ()"));
        assert!(exact_match(" x() ", "x()"));
    }

    #[test]
    fn es() {
        assert_eq!(edit_similarity("abc", "abc"), 1.0);
        assert!((edit_similarity("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(edit_similarity("", "abc"), 0.0);
        assert_eq!(edit_similarity("", ""), 1.0);
        assert!((edit_similarity_with("ab", "abcd", EsNorm::MeanLength) - (1.0 - 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn im() {
        assert!(identifier_match("willReact()", "willReact(obs)"));
        assert!(!identifier_match("getReact()", "willReact()"));
        assert!(!identifier_match("", "x()"));
        assert_eq!(call_identifier(""), Err(EvalError::NoIdentifier(String::new())));
        assert_eq!(call_identifier("a.b.go(x)"), Ok("go"));
    }

    #[test]
    fn elements() {
        let refs = vec![api("willReact", false), api("save", true), api("react", true)];
        assert!(hallucination_elements("willReact()", &refs).is_empty());
        assert_eq!(hallucination_elements("isReacting())", &refs), vec![Element::Name]);
        assert_eq!(hallucination_elements("save()", &refs), vec![Element::ParamPattern]);
        assert_eq!(hallucination_elements("isReacting", &refs), vec![Element::Name, Element::ParamPattern]);
        assert_eq!(hallucination_elements("willReact", &refs), vec![Element::ParamPattern]);
        assert!(hallucination_elements("save(", &refs).is_empty());
        assert_eq!(hallucination_elements("willReact(", &refs), vec![Element::ParamPattern]);
        // Any overload that agrees absolves the pattern.
        let overloaded = vec![api("save", true), api("save", false)];
        assert!(hallucination_elements("save()", &overloaded).is_empty());
    }

    #[test]
    fn aggregation() {
        let s = |em, elements: Vec<Element>| Score { em, es: 1.0, im: em, elements, elapsed: 0.5 };
        let r = aggregate(&[s(false, vec![Element::Name, Element::ParamPattern]), s(true, vec![])]).unwrap();
        assert_eq!((r.mihn, r.mahr, r.em, r.mean_time), (1.0, 0.5, 0.5, 0.5));
        assert_eq!(aggregate(&[]), Err(EvalError::EmptySet));
    }

    #[test]
    fn table_columns() {
        let r = MetricReport { n: 2, em: 0.5, es: 0.75, im: 1.0, mihn: 1.0, mahr: 0.5, mean_time: 0.01 };
        let t = render_table(&[("constrained".into(), r)]);
        let lines: Vec<_> = t.lines().collect();
        assert!(lines[0].starts_with("Setting"));
        assert!(lines[0].contains("MaHR") && lines[0].contains("MiHN"));
        assert!(lines[2].contains("50.00") && lines[2].contains("1.00"));
        assert_eq!(lines[0].len(), lines[2].len());
    }
}
