//! Benchmark construction: API-call samples split into a prompt and the
//! ground-truth call, deduplicated and partitioned by position in the
//! function.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mining::scope::{find_method, Scope};
use crate::source::{InvocationSite, MethodInfo, ProjectIndex, SourceUnit};

/// Functions must span more than this many lines to yield samples.
pub const MIN_FUNCTION_LINES: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApiType {
    ProjectSpecific,
    ThirdParty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    F,
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub id: String,
    pub project: String,
    pub file: String,
    pub class_name: String,
    pub method_name: String,
    /// Function text before the API name, receiver and `.` included.
    pub prompt: String,
    /// The call from its name through the closing parenthesis.
    pub ground_truth: String,
    pub receiver_text: String,
    pub line: usize,
    pub column: usize,
    pub position_ratio: f64,
    pub split: Split,
    pub api_type: ApiType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub f: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub samples: Vec<BenchmarkSample>,
    pub counts: Counts,
}

/// A call site inside a method of the index.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub unit: &'a SourceUnit,
    pub class_index: usize,
    pub method_index: usize,
    pub site: &'a InvocationSite,
}

impl<'a> Candidate<'a> {
    pub fn method(&self) -> &'a MethodInfo {
        &self.unit.classes[self.class_index].methods[self.method_index]
    }
}

/// Project-specific when the receiver's declared type (or, with no receiver,
/// the enclosing class) is a project class visible from the unit and that
/// class has a method of the called name.
pub fn classify_api_type(
    index: &ProjectIndex,
    unit: &SourceUnit,
    class_index: usize,
    method: &MethodInfo,
    site: &InvocationSite,
) -> ApiType {
    let scope = Scope::new(index, unit, class_index, method, site.offset);
    let owner = if site.receiver_text.trim().is_empty() {
        Some(scope.enclosing())
    } else {
        scope.resolve_receiver(&site.receiver_text).map(|r| r.class)
    };
    match owner.and_then(|c| find_method(index, c, &site.method_name, None)) {
        Some(_) => ApiType::ProjectSpecific,
        None => ApiType::ThirdParty,
    }
}

/// Every project-specific call site in a method longer than five lines, in
/// path, class, method and source order.
pub fn extract_candidates(index: &ProjectIndex) -> Vec<Candidate<'_>> {
    let units: Vec<&SourceUnit> = index.units.values().collect();
    units
        .par_iter()
        .map(|unit| {
            let mut out = Vec::new();
            for (ci, class) in unit.classes.iter().enumerate() {
                for (mi, m) in class.methods.iter().enumerate() {
                    if !m.has_body || m.line_count() <= MIN_FUNCTION_LINES {
                        continue;
                    }
                    for site in &m.call_sites {
                        if classify_api_type(index, unit, ci, m, site) == ApiType::ProjectSpecific {
                            out.push(Candidate { unit, class_index: ci, method_index: mi, site });
                        }
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Prompt, ground truth and position ratio of a call: the prompt is the
/// function text before the API name; the ratio is the call's line within
/// the function's lines over their count.
pub fn split_sample(unit: &SourceUnit, method: &MethodInfo, site: &InvocationSite) -> (String, String, f64) {
    let prompt = method.body_text[..site.offset - method.body_offset].to_string();
    let ground_truth = unit.raw_text[site.offset..site.call_end].to_string();
    let ratio = (site.line - method.body_lines.0 + 1) as f64 / method.line_count() as f64;
    (prompt, ground_truth, ratio)
}

/// Stable content hash of `(file, prompt, ground_truth)`.
pub fn sample_id(file: &str, prompt: &str, ground_truth: &str) -> String {
    let mut h = Sha256::new();
    for part in [file, prompt, ground_truth] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn split_of(ratio: f64, boundary_inclusive: bool) -> Split {
    let first_half = if boundary_inclusive { ratio <= 0.5 } else { ratio < 0.5 };
    if first_half {
        Split::F
    } else {
        Split::M
    }
}

/// Builds the sample for a candidate; the split is provisional until
/// [`dedup_and_partition`].
pub fn make_sample(project: &str, c: &Candidate<'_>) -> BenchmarkSample {
    let method = c.method();
    let (prompt, ground_truth, position_ratio) = split_sample(c.unit, method, c.site);
    BenchmarkSample {
        id: sample_id(&c.unit.path, &prompt, &ground_truth),
        project: project.to_string(),
        file: c.unit.path.clone(),
        class_name: c.unit.classes[c.class_index].name.clone(),
        method_name: method.name.clone(),
        prompt,
        ground_truth,
        receiver_text: c.site.receiver_text.clone(),
        line: c.site.line,
        column: c.site.column,
        position_ratio,
        split: split_of(position_ratio, true),
        api_type: ApiType::ProjectSpecific,
    }
}

/// Keeps the first sample per prompt and assigns F (ratio up to one half,
/// inclusive unless `boundary_inclusive` is false) or M.
pub fn dedup_and_partition(samples: Vec<BenchmarkSample>, boundary_inclusive: bool) -> BenchmarkSet {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut counts = Counts::default();
    for mut s in samples {
        if !seen.insert(s.prompt.clone()) {
            continue;
        }
        s.split = split_of(s.position_ratio, boundary_inclusive);
        match s.split {
            Split::F => counts.f += 1,
            Split::M => counts.m += 1,
        }
        counts.total += 1;
        out.push(s);
    }
    BenchmarkSet { samples: out, counts }
}

/// Extraction, splitting, deduplication and partitioning in one pass.
pub fn build_benchmark(index: &ProjectIndex, project: &str, boundary_inclusive: bool) -> BenchmarkSet {
    let samples = extract_candidates(index).iter().map(|c| make_sample(project, c)).collect();
    dedup_and_partition(samples, boundary_inclusive)
}

impl BenchmarkSet {
    pub fn from_samples(samples: Vec<BenchmarkSample>) -> Self {
        let mut counts = Counts { total: samples.len(), ..Counts::default() };
        for s in &samples {
            match s.split {
                Split::F => counts.f += 1,
                Split::M => counts.m += 1,
            }
        }
        Self { samples, counts }
    }

    pub fn write_jsonl(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut *w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, BenchError> {
        let mut samples = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line).map_err(|source| BenchError::Json { line: i + 1, source })?);
        }
        Ok(Self::from_samples(samples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(prompt: &str, ratio: f64) -> BenchmarkSample {
        BenchmarkSample {
            id: sample_id("f", prompt, "g()"),
            project: "p".into(),
            file: "f".into(),
            class_name: "C".into(),
            method_name: "m".into(),
            prompt: prompt.into(),
            ground_truth: "g()".into(),
            receiver_text: String::new(),
            line: 1,
            column: 0,
            position_ratio: ratio,
            split: Split::M,
            api_type: ApiType::ProjectSpecific,
        }
    }

    #[test]
    fn dedup_keeps_first() {
        let set = dedup_and_partition(vec![sample("a", 0.9), sample("a", 0.1), sample("b", 0.5)], true);
        assert_eq!(set.samples.len(), 2);
        assert_eq!(set.samples[0].position_ratio, 0.9);
        assert_eq!(set.counts, Counts { total: 2, f: 1, m: 1 });
    }

    #[test]
    fn boundary() {
        assert_eq!(split_of(0.5, true), Split::F);
        assert_eq!(split_of(0.5, false), Split::M);
        assert_eq!(split_of(1.0 / 6.0, true), Split::F);
    }

    #[test]
    fn ratios_and_split() {
        let src = "class A {\n  B b;\n  void f() {\n    int a = 0;\n    a++;\n    a++;\n    a++;\n    b.go(a, 2);\n    a++;\n  }\n  void g() {\n    b.go(1,\n      2);\n    a();\n    a();\n    a();\n  }\n  void a() {}\n}\nclass B {\n  void go(int x, int y) {}\n}\n";
        let idx = ProjectIndex::build(vec![("A.java".into(), src.into())], "").unwrap();
        let unit = idx.unit("A.java").unwrap();
        let f = &unit.classes[0].methods[0];
        let (prompt, gt, ratio) = split_sample(unit, f, &f.call_sites[0]);
        assert_eq!(gt, "go(a, 2)");
        assert!(prompt.ends_with("    b."));
        assert!((ratio - 6.0 / 8.0).abs() < 1e-12);
        let g = &unit.classes[0].methods[1];
        let (_, gt, ratio) = split_sample(unit, g, &g.call_sites[0]);
        assert_eq!(gt, "go(1,\n      2)");
        assert!((ratio - 2.0 / 7.0).abs() < 1e-12);

        let set = build_benchmark(&idx, "demo", true);
        let gts: Vec<_> = set.samples.iter().map(|s| (s.method_name.as_str(), s.ground_truth.as_str())).collect();
        assert_eq!(gts, vec![("f", "go(a, 2)"), ("g", "go(1,\n      2)"), ("g", "a()"), ("g", "a()"), ("g", "a()")]);
    }

    #[test]
    fn external_receivers_are_third_party() {
        let src = "import java.util.List;\nclass A {\n  List<String> xs;\n  void f() {\n    xs.add(\"a\");\n    String s = \"\";\n    s.trim();\n    toString();\n  }\n}\n";
        let idx = ProjectIndex::build(vec![("A.java".into(), src.into())], "").unwrap();
        let unit = idx.unit("A.java").unwrap();
        let m = &unit.classes[0].methods[0];
        for site in &m.call_sites {
            assert_eq!(classify_api_type(&idx, unit, 0, m, site), ApiType::ThirdParty, "{}", site.method_name);
        }
        assert!(extract_candidates(&idx).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let set = dedup_and_partition(vec![sample("a", 0.2), sample("b", 0.7)], true);
        let back = BenchmarkSet::read_jsonl(set.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, set);
    }
}
