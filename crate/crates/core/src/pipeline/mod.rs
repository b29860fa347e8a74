//! End-to-end generation: mine, prompt, build the trie, decode, score.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{BenchmarkSample, BenchmarkSet, Split};
use crate::constrain::{
    decode, decode_unconstrained, tokenize_reference_set, ApiTokenError, DecodeError, DecodeOutput, DecodeSession,
    MaskMode, ParamPolicy, RecordedTokenizer, TokenId, TokenTrie, Tokenizer, TokenizerError, TrieError, VocabTokenizer,
};
use crate::eval::{self, Element, EvalError, EvalRecord, MetricReport};
use crate::gateway::{GatewayError, LogitsProvider, RandomProvider, RemoteProvider, ReplayProvider};
use crate::mining::{
    build_prompt, mine_global, mine_local, ApiRef, Budgets, GenerationPoint, MineError, PromptDocument,
};
use crate::source::ProjectIndex;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    ApiToken(#[from] ApiTokenError),
    #[error(transparent)]
    Trie(#[from] TrieError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Which logits provider drives decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Replay {
        fixture: PathBuf,
    },
    #[default]
    Random,
    Remote {
        #[serde(default)]
        endpoint: Option<String>,
    },
}

/// Variants that remove prompt parts or the decoding constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub no_local: bool,
    pub no_global: bool,
    pub no_constrain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub project_dir: PathBuf,
    pub tokenizer_vocab: PathBuf,
    pub project_budget: usize,
    pub function_budget: usize,
    pub max_new_tokens: usize,
    pub seed: u64,
    pub provider: ProviderConfig,
    pub ablation: Ablation,
    /// Leave the reference set empty when the receiver type is unknown.
    pub strict: bool,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    /// Assign ratio exactly 0.5 to F.
    pub boundary_inclusive: bool,
    /// Use the literal `l * M` masking instead of restricted argmax.
    pub multiply_mask: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            project_dir: PathBuf::new(),
            tokenizer_vocab: PathBuf::new(),
            project_budget: 7000,
            function_budget: 1000,
            max_new_tokens: 15,
            seed: 0,
            provider: ProviderConfig::Random,
            ablation: Ablation::default(),
            strict: false,
            workers: None,
            boundary_inclusive: true,
            multiply_mask: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.project_budget == 0 || self.function_budget == 0 {
            return Err(PipelineError::Config("budgets must be positive".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(PipelineError::Config("max_new_tokens must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> GenerateOptions {
        GenerateOptions {
            budgets: Budgets { project_tokens: self.project_budget, function_tokens: self.function_budget },
            max_new_tokens: self.max_new_tokens,
            ablation: self.ablation,
            strict: self.strict,
            mode: if self.multiply_mask { MaskMode::Multiply } else { MaskMode::Restrict },
        }
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

/// A vocabulary file, or a recorded tokenizer when the path ends in `.json`.
pub fn load_tokenizer(path: &Path) -> Result<Box<dyn Tokenizer>, PipelineError> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(Box::new(RecordedTokenizer::from_json(&text)?))
    } else {
        Ok(Box::new(VocabTokenizer::from_vocab_text(&text)?))
    }
}

pub fn make_provider(
    config: &ProviderConfig,
    seed: u64,
    vocab_size: usize,
) -> Result<Box<dyn LogitsProvider>, PipelineError> {
    Ok(match config {
        ProviderConfig::Random => Box::new(RandomProvider::new(seed, vocab_size)),
        ProviderConfig::Replay { fixture } => Box::new(ReplayProvider::from_json(vocab_size, &read(fixture)?)?),
        ProviderConfig::Remote { endpoint: Some(e) } => Box::new(RemoteProvider::new(e, vocab_size)?),
        ProviderConfig::Remote { endpoint: None } => Box::new(
            RemoteProvider::from_env(vocab_size).map_err(|e| PipelineError::Config(e.to_string()))?,
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub budgets: Budgets,
    pub max_new_tokens: usize,
    pub ablation: Ablation,
    pub strict: bool,
    pub mode: MaskMode,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        RunConfig::default().options()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingRecord {
    pub static_analysis: f64,
    pub inference: f64,
    pub total: f64,
}

/// Everything produced for one generation point.
#[derive(Debug, Clone)]
pub struct Generation {
    pub prompt: PromptDocument,
    pub reference_apis: Vec<ApiRef>,
    pub trie: Option<TokenTrie>,
    pub prompt_tokens: Vec<TokenId>,
    pub output: DecodeOutput,
    /// The call as it would be scored: name through the balanced argument
    /// list.
    pub generated: String,
    pub truncated: bool,
    pub timing: TimingRecord,
}

/// Cuts a decoded continuation down to the call: leading separators are
/// dropped and the text ends where the first argument list closes.
pub fn normalize_call(text: &str) -> String {
    let text = text.trim_start().trim_start_matches('.').trim_start();
    let Some(open) = text.find('(') else { return text.trim_end().to_string() };
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return text[..open + i + 1].to_string();
                }
            }
            _ => {}
        }
    }
    text.trim_end().to_string()
}

/// Mines dependencies, renders the prompt and decodes one API call.
pub fn generate(
    index: &ProjectIndex,
    point: &GenerationPoint,
    tokenizer: &dyn Tokenizer,
    lm: &dyn LogitsProvider,
    opts: &GenerateOptions,
) -> Result<Generation, PipelineError> {
    let t0 = Instant::now();
    let local = mine_local(point, index, opts.strict)?;
    let global = if opts.ablation.no_global { None } else { Some(mine_global(point, index)?) };
    let description = if opts.ablation.no_local && opts.ablation.no_global { "" } else { index.description.as_str() };
    let prompt = build_prompt(
        description,
        global.as_ref(),
        (!opts.ablation.no_local).then_some(&local),
        point,
        opts.budgets,
        tokenizer,
    )?;
    let static_analysis = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let input = prompt.model_input();
    let line = input.rsplit('\n').next().unwrap_or("");
    let head = &input[..input.len() - line.len()];
    let mut prompt_tokens = tokenizer.encode(head)?;
    let policy = ParamPolicy::classify(tokenizer);
    let (trie, result, tail) = if opts.ablation.no_constrain {
        prompt_tokens.extend(tokenizer.encode(line)?);
        (None, decode_unconstrained(&prompt_tokens, opts.max_new_tokens, &policy, lm, tokenizer), String::new())
    } else {
        let (ctx, apis) = tokenize_reference_set(tokenizer, line, &local.reference_apis)?;
        let full_ctx = tokenizer.encode(line)?;
        let tail = tokenizer.decode(&full_ctx[ctx.len()..]);
        prompt_tokens.extend(ctx);
        let trie = TokenTrie::build(&apis)?;
        let mut session = DecodeSession::new(prompt_tokens.clone(), opts.max_new_tokens).with_mode(opts.mode);
        let result = decode(&mut session, &trie, &policy, lm, tokenizer);
        (Some(trie), result, tail)
    };
    let (output, truncated) = match result {
        Ok(out) => (out, false),
        Err(DecodeError::Truncated { partial }) => (*partial, true),
        Err(e) => return Err(e.into()),
    };
    let inference = t1.elapsed().as_secs_f64();
    let raw = output.text.strip_prefix(tail.as_str()).unwrap_or(&output.text);
    let generated = normalize_call(raw);
    Ok(Generation {
        prompt,
        reference_apis: local.reference_apis,
        trie,
        prompt_tokens,
        output,
        generated,
        truncated,
        timing: TimingRecord { static_analysis, inference, total: t0.elapsed().as_secs_f64() },
    })
}

/// Deterministic per-sample result (timings are kept apart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput {
    pub id: String,
    pub file: String,
    pub line: usize,
    pub split: Split,
    pub ground_truth: String,
    pub generated: String,
    pub raw_output: String,
    pub tokens: Vec<TokenId>,
    pub truncated: bool,
    pub em: bool,
    pub es: f64,
    pub im: bool,
    pub elements: Vec<Element>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    /// Sorted by sample id.
    pub outputs: Vec<SampleOutput>,
    pub timings: Vec<(String, TimingRecord)>,
    pub report: Option<MetricReport>,
    pub split_reports: Vec<(Split, MetricReport)>,
    pub timing: Option<TimingRecord>,
    pub failures: usize,
    /// Samples whose output names no reference API.
    pub name_violations: usize,
}

impl RunOutput {
    pub fn outputs_jsonl(&self) -> String {
        let mut s = String::new();
        for o in &self.outputs {
            s.push_str(&serde_json::to_string(o).expect("serializable"));
            s.push('\n');
        }
        s
    }
}

fn run_sample(
    index: &ProjectIndex,
    sample: &BenchmarkSample,
    tokenizer: &dyn Tokenizer,
    lm: &dyn LogitsProvider,
    opts: &GenerateOptions,
) -> (SampleOutput, Option<(EvalRecord, TimingRecord)>) {
    let mut out = SampleOutput {
        id: sample.id.clone(),
        file: sample.file.clone(),
        line: sample.line,
        split: sample.split,
        ground_truth: sample.ground_truth.clone(),
        generated: String::new(),
        raw_output: String::new(),
        tokens: Vec::new(),
        truncated: false,
        em: false,
        es: 0.0,
        im: false,
        elements: Vec::new(),
        error: None,
    };
    let result = GenerationPoint::locate(index, &sample.file, sample.line, sample.column)
        .map_err(PipelineError::from)
        .and_then(|point| generate(index, &point, tokenizer, lm, opts));
    match result {
        Ok(g) if g.reference_apis.is_empty() => {
            out.error = Some("empty reference API set".into());
            (out, None)
        }
        Ok(g) => {
            let record = EvalRecord {
                generated: g.generated.clone(),
                ground_truth: sample.ground_truth.clone(),
                reference_apis: g.reference_apis,
                elapsed: g.timing.total,
            };
            let s = eval::score(&record);
            out.generated = g.generated;
            out.raw_output = g.output.text;
            out.tokens = g.output.tokens;
            out.truncated = g.truncated;
            out.em = s.em;
            out.es = s.es;
            out.im = s.im;
            out.elements = s.elements;
            (out, Some((record, g.timing)))
        }
        Err(e) => {
            out.error = Some(e.to_string());
            (out, None)
        }
    }
}

/// Runs every sample through [`generate`] on a bounded worker pool and
/// scores the results. Per-sample failures are recorded, never fatal.
pub fn run_pipeline(
    index: &ProjectIndex,
    samples: &BenchmarkSet,
    tokenizer: &dyn Tokenizer,
    lm: &dyn LogitsProvider,
    opts: &GenerateOptions,
    workers: Option<usize>,
) -> Result<RunOutput, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut results: Vec<(SampleOutput, Option<(EvalRecord, TimingRecord)>)> = pool.install(|| {
        samples.samples.par_iter().map(|s| run_sample(index, s, tokenizer, lm, opts)).collect()
    });
    results.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let failures = results.iter().filter(|(o, _)| o.error.is_some()).count();
    let name_violations = results.iter().filter(|(o, _)| o.elements.contains(&Element::Name)).count();
    let scored: Vec<(Split, eval::Score, TimingRecord)> = results
        .iter()
        .filter_map(|(o, r)| r.as_ref().map(|(rec, t)| (o.split, eval::score(rec), *t)))
        .collect();
    let scores: Vec<eval::Score> = scored.iter().map(|(_, s, _)| s.clone()).collect();
    let report = eval::aggregate(&scores).ok();
    let mut split_reports = Vec::new();
    for split in [Split::F, Split::M] {
        let part: Vec<eval::Score> = scored.iter().filter(|(sp, _, _)| *sp == split).map(|(_, s, _)| s.clone()).collect();
        if let Ok(r) = eval::aggregate(&part) {
            split_reports.push((split, r));
        }
    }
    let timings: Vec<(String, TimingRecord)> =
        results.iter().filter_map(|(o, r)| r.as_ref().map(|(_, t)| (o.id.clone(), *t))).collect();
    let timing = report_timing(&timings.iter().map(|(_, t)| *t).collect::<Vec<_>>()).ok();
    Ok(RunOutput {
        outputs: results.into_iter().map(|(o, _)| o).collect(),
        timings,
        report,
        split_reports,
        timing,
        failures,
        name_violations,
    })
}

/// Per-phase arithmetic means.
pub fn report_timing(records: &[TimingRecord]) -> Result<TimingRecord, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let n = records.len() as f64;
    Ok(TimingRecord {
        static_analysis: records.iter().map(|r| r.static_analysis).sum::<f64>() / n,
        inference: records.iter().map(|r| r.inference).sum::<f64>() / n,
        total: records.iter().map(|r| r.total).sum::<f64>() / n,
    })
}

/// Extra mean time spent by constrained decoding.
pub fn overhead(constrained: &TimingRecord, unconstrained: &TimingRecord) -> f64 {
    constrained.total - unconstrained.total
}
