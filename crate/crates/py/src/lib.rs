//! Python bindings for apiguard-core.
//!
//! Structured results (mined dependencies, generations, reports) are handed
//! over as plain Python objects built from their JSON form.

use std::path::PathBuf;

use apiguard_core::bench::build_benchmark;
use apiguard_core::constrain::{
    compute_mask, decode, tokenize_api, tokenize_reference_set, DecodeError, DecodeSession, MaskMode, ParamPolicy,
    Phase, TokenId, TokenTrie,
};
use apiguard_core::eval::{self, EvalRecord};
use apiguard_core::gateway::{RandomProvider, ReplayProvider};
use apiguard_core::mining::{build_prompt, ApiRef, ApiSource, Budgets, DependencyContext, GenerationPoint};
use apiguard_core::pipeline::{self, Ablation, GenerateOptions};
use apiguard_core::source::ProjectIndex;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// `(owner, name, has_params)`.
type ApiTriple = (String, String, bool);

/// Triples as reference APIs.
fn api_refs(apis: Vec<ApiTriple>) -> Vec<ApiRef> {
    apis.into_iter()
        .map(|(owner, name, has_params)| {
            let sig = format!("{name}({})", if has_params { "..." } else { "" });
            ApiRef::new(&owner, &name, has_params, sig, ApiSource::InProjectDeclared)
        })
        .collect()
}

/// A vocabulary file (one token per line) or a recorded `.json` tokenizer.
#[pyclass(module = "apiguard", frozen)]
struct Tokenizer {
    inner: Box<dyn apiguard_core::constrain::Tokenizer>,
}

#[pymethods]
impl Tokenizer {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: pipeline::load_tokenizer(&path).map_err(value_err)? })
    }

    fn encode(&self, text: &str) -> PyResult<Vec<TokenId>> {
        self.inner.encode(text).map_err(value_err)
    }

    fn decode(&self, ids: Vec<TokenId>) -> String {
        self.inner.decode(&ids)
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn token_text(&self, id: TokenId) -> Option<String> {
        self.inner.token_text(id).map(str::to_string)
    }

    /// Token ids of `name` as generated after `context`.
    fn tokenize_api(&self, context: &str, name: &str) -> PyResult<Vec<TokenId>> {
        tokenize_api(self.inner.as_ref(), context, name).map_err(value_err)
    }

    /// `(no_param, param)` pattern-token ids.
    fn param_policy(&self) -> (Vec<TokenId>, Vec<TokenId>) {
        let p = ParamPolicy::classify(self.inner.as_ref());
        (p.no_param, p.param)
    }
}

/// Parsed project: every `.java` file under a directory.
#[pyclass(module = "apiguard", frozen)]
struct Project {
    index: ProjectIndex,
}

#[pymethods]
impl Project {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        Ok(Self { index: ProjectIndex::from_dir(&path).map_err(value_err)? })
    }

    #[getter]
    fn files(&self) -> Vec<String> {
        self.index.units.keys().cloned().collect()
    }

    #[getter]
    fn description(&self) -> String {
        self.index.description.clone()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.index.class_count()
    }

    fn to_json(&self) -> String {
        self.index.to_json()
    }

    /// Local and global dependencies at a point (1-based line, 0-based column).
    #[pyo3(signature = (file, line, col, strict = false))]
    fn mine<'py>(&self, py: Python<'py>, file: &str, line: usize, col: usize, strict: bool) -> PyResult<Bound<'py, PyAny>> {
        let point = GenerationPoint::locate(&self.index, file, line, col).map_err(value_err)?;
        let ctx = DependencyContext::mine(&self.index, point, strict).map_err(value_err)?;
        to_py(py, &ctx)
    }

    #[pyo3(signature = (tokenizer, file, line, col, project_budget = 7000, function_budget = 1000))]
    fn prompt(
        &self,
        tokenizer: &Tokenizer,
        file: &str,
        line: usize,
        col: usize,
        project_budget: usize,
        function_budget: usize,
    ) -> PyResult<String> {
        let point = GenerationPoint::locate(&self.index, file, line, col).map_err(value_err)?;
        let ctx = DependencyContext::mine(&self.index, point, false).map_err(value_err)?;
        let budgets = Budgets { project_tokens: project_budget, function_tokens: function_budget };
        let doc = build_prompt(&ctx.description, Some(&ctx.global), Some(&ctx.local), &ctx.point, budgets, tokenizer.inner.as_ref())
            .map_err(value_err)?;
        Ok(doc.rendered)
    }

    /// Generates the call at a point with the seeded random provider, or a
    /// replay fixture when `replay` is given.
    #[pyo3(signature = (tokenizer, file, line, col, seed = 0, replay = None, constrained = true, max_new_tokens = 15))]
    #[allow(clippy::too_many_arguments)]
    fn generate<'py>(
        &self,
        py: Python<'py>,
        tokenizer: &Tokenizer,
        file: &str,
        line: usize,
        col: usize,
        seed: u64,
        replay: Option<PathBuf>,
        constrained: bool,
        max_new_tokens: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let tok = tokenizer.inner.as_ref();
        let lm: Box<dyn apiguard_core::gateway::LogitsProvider> = match replay {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(value_err)?;
                Box::new(ReplayProvider::from_json(tok.vocab_size(), &text).map_err(value_err)?)
            }
            None => Box::new(RandomProvider::new(seed, tok.vocab_size())),
        };
        let point = GenerationPoint::locate(&self.index, file, line, col).map_err(value_err)?;
        let opts = GenerateOptions {
            max_new_tokens,
            ablation: Ablation { no_constrain: !constrained, ..Ablation::default() },
            ..GenerateOptions::default()
        };
        let g = pipeline::generate(&self.index, &point, tok, lm.as_ref(), &opts).map_err(runtime_err)?;
        let out = serde_json::json!({
            "generated": g.generated,
            "raw_output": g.output.text,
            "tokens": g.output.tokens,
            "api": g.output.api.map(|a| a.qualified()),
            "reference_apis": g.reference_apis.iter().map(ApiRef::qualified).collect::<Vec<_>>(),
            "truncated": g.truncated,
        });
        to_py(py, &out)
    }

    /// Benchmark samples as JSONL.
    #[pyo3(signature = (name = "project", boundary_inclusive = true))]
    fn benchmark(&self, name: &str, boundary_inclusive: bool) -> String {
        build_benchmark(&self.index, name, boundary_inclusive).to_jsonl()
    }
}

/// Token trie over a reference API set, tokenized after `context`.
#[pyclass(module = "apiguard", frozen)]
struct ApiTrie {
    trie: TokenTrie,
    policy: ParamPolicy,
    prompt: Vec<TokenId>,
}

#[pymethods]
impl ApiTrie {
    /// `apis` holds `(owner, name, has_params)` triples.
    #[new]
    fn new(tokenizer: &Tokenizer, context: &str, apis: Vec<ApiTriple>) -> PyResult<Self> {
        let tok = tokenizer.inner.as_ref();
        let (prompt, tokenized) = tokenize_reference_set(tok, context, &api_refs(apis)).map_err(value_err)?;
        let trie = TokenTrie::build(&tokenized).map_err(value_err)?;
        Ok(Self { trie, policy: ParamPolicy::classify(tok), prompt })
    }

    /// Context tokens that precede every API sequence.
    #[getter]
    fn prompt_tokens(&self) -> Vec<TokenId> {
        self.prompt.clone()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.trie.nodes.len()
    }

    /// Permitted next tokens after the name tokens in `prefix`.
    fn mask(&self, prefix: Vec<TokenId>) -> PyResult<Vec<TokenId>> {
        let node = self.trie.walk(&prefix).ok_or_else(|| value_err("prefix is not a path of the trie"))?;
        Ok(compute_mask(Phase::Name(node), &self.trie, &self.policy).map_err(value_err)?.valid_ids)
    }

    /// Constrained greedy decode under seeded random logits.
    /// Returns `(text, tokens, qualified API name)`.
    #[pyo3(signature = (tokenizer, seed, max_new_tokens = 15, multiply = false))]
    fn decode_random(
        &self,
        tokenizer: &Tokenizer,
        seed: u64,
        max_new_tokens: usize,
        multiply: bool,
    ) -> PyResult<(String, Vec<TokenId>, Option<String>)> {
        let tok = tokenizer.inner.as_ref();
        let lm = RandomProvider::new(seed, tok.vocab_size());
        let mode = if multiply { MaskMode::Multiply } else { MaskMode::Restrict };
        let mut session = DecodeSession::new(self.prompt.clone(), max_new_tokens).with_mode(mode);
        match decode(&mut session, &self.trie, &self.policy, &lm, tok) {
            Ok(out) => Ok((out.text, out.tokens, out.api.map(|a| a.qualified()))),
            Err(DecodeError::Truncated { partial }) => Ok((partial.text, partial.tokens, None)),
            Err(e) => Err(runtime_err(e)),
        }
    }
}

#[pyfunction]
fn exact_match(generated: &str, ground_truth: &str) -> bool {
    eval::exact_match(generated, ground_truth)
}

#[pyfunction]
fn edit_similarity(generated: &str, ground_truth: &str) -> f64 {
    eval::edit_similarity(generated, ground_truth)
}

#[pyfunction]
fn identifier_match(generated: &str, ground_truth: &str) -> bool {
    eval::identifier_match(generated, ground_truth)
}

/// Names of the hallucinated elements (`"Name"`, `"ParamPattern"`).
#[pyfunction]
fn hallucination_elements(generated: &str, apis: Vec<ApiTriple>) -> Vec<String> {
    eval::hallucination_elements(generated, &api_refs(apis)).iter().map(|e| format!("{e:?}")).collect()
}

/// Aggregate report over `(generated, ground_truth, apis)` records.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    records: Vec<(String, String, Vec<ApiTriple>)>,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<EvalRecord> = records
        .into_iter()
        .map(|(generated, ground_truth, apis)| EvalRecord { generated, ground_truth, reference_apis: api_refs(apis), elapsed: 0.0 })
        .collect();
    let report = eval::aggregate_records(&records).map_err(value_err)?;
    to_py(py, &report)
}

#[pymodule]
fn apiguard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Tokenizer>()?;
    m.add_class::<Project>()?;
    m.add_class::<ApiTrie>()?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(edit_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(identifier_match, m)?)?;
    m.add_function(wrap_pyfunction!(hallucination_elements, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
