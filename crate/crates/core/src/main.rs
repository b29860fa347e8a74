use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use apiguard_core::bench::{build_benchmark, BenchmarkSet};
use apiguard_core::constrain::{tokenize_reference_set, TokenTrie};
use apiguard_core::eval::{aggregate_records, load_records, render_table};
use apiguard_core::mining::{build_prompt, mine_global, mine_local, DependencyContext, GenerationPoint};
use apiguard_core::pipeline::{
    generate, load_tokenizer, make_provider, run_pipeline, PipelineError, ProviderConfig, RunConfig,
};
use apiguard_core::source::ProjectIndex;

#[derive(Parser)]
#[command(name = "apiguard", version, about = "Dependency-aware prompting and API-constrained decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a project and print its index as JSON.
    Index {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine local and global dependencies for a generation point.
    Mine {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the prompt for a generation point.
    Prompt {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the API token trie for a generation point and print it as JSON.
    Trie {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the API call at a point.
    Decode {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark construction.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Score generations from JSONL against reference sets.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline over a benchmark.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        project: Option<PathBuf>,
        /// Benchmark JSONL; built from the project when omitted.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        workers: Option<usize>,
        /// Directory for outputs.jsonl, report.json and timing.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Extract, split, deduplicate and partition samples.
    Build {
        #[arg(long)]
        project: PathBuf,
        /// Project name recorded in samples; defaults to the directory name.
        #[arg(long)]
        name: Option<String>,
        /// Put ratio exactly 0.5 in M instead of F.
        #[arg(long)]
        exclusive_boundary: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long)]
    file: String,
    #[arg(long)]
    line: usize,
    #[arg(long)]
    col: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Replay,
    Random,
    Remote,
}

#[derive(Args, Default)]
struct GenArgs {
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Replay fixture for `--provider replay`.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_new_tokens: Option<usize>,
    #[arg(long)]
    project_budget: Option<usize>,
    #[arg(long)]
    function_budget: Option<usize>,
    #[arg(long)]
    no_local: bool,
    #[arg(long)]
    no_global: bool,
    #[arg(long)]
    no_constrain: bool,
    /// Leave the reference set empty when the receiver type is unknown.
    #[arg(long)]
    strict: bool,
    /// Literal elementwise-product masking.
    #[arg(long)]
    multiply_mask: bool,
}

impl GenArgs {
    fn apply(&self, c: &mut RunConfig) -> Result<(), CliError> {
        if let Some(v) = &self.vocab {
            c.tokenizer_vocab = v.clone();
        }
        if let Some(kind) = self.provider {
            c.provider = match kind {
                ProviderKind::Random => ProviderConfig::Random,
                ProviderKind::Remote => ProviderConfig::Remote { endpoint: self.endpoint.clone() },
                ProviderKind::Replay => ProviderConfig::Replay {
                    fixture: self.replay.clone().ok_or_else(|| CliError::Config("--provider replay needs --replay".into()))?,
                },
            };
        } else if let (ProviderConfig::Remote { endpoint }, Some(e)) = (&mut c.provider, &self.endpoint) {
            *endpoint = Some(e.clone());
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.max_new_tokens {
            c.max_new_tokens = n;
        }
        if let Some(n) = self.project_budget {
            c.project_budget = n;
        }
        if let Some(n) = self.function_budget {
            c.function_budget = n;
        }
        c.ablation.no_local |= self.no_local;
        c.ablation.no_global |= self.no_global;
        c.ablation.no_constrain |= self.no_constrain;
        c.strict |= self.strict;
        c.multiply_mask |= self.multiply_mask;
        c.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}

enum CliError {
    /// Bad flags, configuration or inputs: exit 2.
    Config(String),
    Runtime(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) | PipelineError::Io { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(runtime)?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n").map_err(runtime)?;
            }
            Ok(())
        }
    }
}

fn json(value: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(runtime)
}

/// A project directory, or an exported index JSON file.
fn load_index(path: &Path) -> Result<ProjectIndex, CliError> {
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return ProjectIndex::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
    }
    if !path.is_dir() {
        return Err(CliError::Config(format!("{}: no such project", path.display())));
    }
    ProjectIndex::from_dir(path).map_err(|e| CliError::Config(e.to_string()))
}

fn locate(index: &ProjectIndex, p: &PointArgs) -> Result<GenerationPoint, CliError> {
    GenerationPoint::locate(index, &p.file, p.line, p.col).map_err(|e| CliError::Config(e.to_string()))
}

fn point_config(point: &PointArgs, gen: &GenArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig { project_dir: point.project.clone(), ..RunConfig::default() };
    gen.apply(&mut config)?;
    if config.tokenizer_vocab.as_os_str().is_empty() {
        return Err(CliError::Config("--vocab is required".into()));
    }
    Ok(config)
}

fn real_main(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Index { project, out } => {
            let index = load_index(&project)?;
            emit(out.as_deref(), &index.to_json())?;
        }
        Command::Mine { point, strict, out } => {
            let index = load_index(&point.project)?;
            let p = locate(&index, &point)?;
            let ctx = DependencyContext::mine(&index, p, strict).map_err(runtime)?;
            emit(out.as_deref(), &json(&ctx)?)?;
        }
        Command::Prompt { point, gen, out } => {
            let config = point_config(&point, &gen)?;
            let index = load_index(&point.project)?;
            let p = locate(&index, &point)?;
            let tokenizer = load_tokenizer(&config.tokenizer_vocab)?;
            let opts = config.options();
            let local = mine_local(&p, &index, opts.strict).map_err(runtime)?;
            let global = if opts.ablation.no_global { None } else { Some(mine_global(&p, &index).map_err(runtime)?) };
            let desc = if opts.ablation.no_local && opts.ablation.no_global { "" } else { index.description.as_str() };
            let doc = build_prompt(desc, global.as_ref(), (!opts.ablation.no_local).then_some(&local), &p, opts.budgets, tokenizer.as_ref())
                .map_err(runtime)?;
            emit(out.as_deref(), &doc.rendered)?;
        }
        Command::Trie { point, gen, out } => {
            let config = point_config(&point, &gen)?;
            let index = load_index(&point.project)?;
            let p = locate(&index, &point)?;
            let tokenizer = load_tokenizer(&config.tokenizer_vocab)?;
            let local = mine_local(&p, &index, config.strict).map_err(runtime)?;
            let (_, apis) = tokenize_reference_set(tokenizer.as_ref(), p.line_prefix(), &local.reference_apis).map_err(runtime)?;
            let trie = TokenTrie::build(&apis).map_err(runtime)?;
            emit(out.as_deref(), &json(&trie.to_json())?)?;
        }
        Command::Decode { point, gen, out } => {
            let config = point_config(&point, &gen)?;
            let index = load_index(&point.project)?;
            let p = locate(&index, &point)?;
            let tokenizer = load_tokenizer(&config.tokenizer_vocab)?;
            let lm = make_provider(&config.provider, config.seed, tokenizer.vocab_size())?;
            let g = generate(&index, &p, tokenizer.as_ref(), lm.as_ref(), &config.options())?;
            let value = serde_json::json!({
                "generated": g.generated,
                "raw_output": g.output.text,
                "tokens": g.output.tokens,
                "steps": g.output.steps,
                "truncated": g.truncated,
                "api": g.output.api.as_ref().map(|a| a.qualified()),
                "reference_apis": g.reference_apis.iter().map(|a| a.qualified()).collect::<Vec<_>>(),
                "timing": g.timing,
            });
            emit(out.as_deref(), &json(&value)?)?;
        }
        Command::Bench { command: BenchCommand::Build { project, name, exclusive_boundary, out } } => {
            let index = load_index(&project)?;
            let name = name.unwrap_or_else(|| {
                project.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let set = build_benchmark(&index, &name, !exclusive_boundary);
            eprintln!("{} samples ({} F, {} M)", set.counts.total, set.counts.f, set.counts.m);
            emit(out.as_deref(), &set.to_jsonl())?;
        }
        Command::Eval { input, refs, out } => {
            let read = |p: &Path| fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
            let records = load_records(&read(&input)?, &read(&refs)?).map_err(|e| CliError::Config(e.to_string()))?;
            let report = aggregate_records(&records).map_err(|e| CliError::Config(e.to_string()))?;
            print!("{}", render_table(&[("all".to_string(), report.clone())]));
            if let Some(p) = out {
                emit(Some(&p), &json(&report)?)?;
            }
        }
        Command::Run { config, project, samples, gen, workers, out } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    RunConfig::from_json(&text)?
                }
                None => RunConfig::default(),
            };
            if workers.is_some() {
                cfg.workers = workers;
            }
            if let Some(p) = project {
                cfg.project_dir = p;
            }
            gen.apply(&mut cfg)?;
            if cfg.tokenizer_vocab.as_os_str().is_empty() {
                return Err(CliError::Config("a tokenizer vocabulary is required".into()));
            }
            let index = load_index(&cfg.project_dir)?;
            let set = match samples {
                Some(p) => {
                    let f = fs::File::open(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    BenchmarkSet::read_jsonl(std::io::BufReader::new(f)).map_err(|e| CliError::Config(e.to_string()))?
                }
                None => {
                    let name = cfg.project_dir.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    build_benchmark(&index, &name, cfg.boundary_inclusive)
                }
            };
            let tokenizer = load_tokenizer(&cfg.tokenizer_vocab)?;
            let lm = make_provider(&cfg.provider, cfg.seed, tokenizer.vocab_size())?;
            let result = run_pipeline(&index, &set, tokenizer.as_ref(), lm.as_ref(), &cfg.options(), cfg.workers)?;
            let mut rows = Vec::new();
            if let Some(r) = &result.report {
                rows.push(("all".to_string(), r.clone()));
            }
            for (split, r) in &result.split_reports {
                rows.push((format!("{split:?}"), r.clone()));
            }
            print!("{}", render_table(&rows));
            eprintln!("{} samples, {} failed, {} name violations", set.samples.len(), result.failures, result.name_violations);
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
                emit(Some(&dir.join("outputs.jsonl")), &result.outputs_jsonl())?;
                let report = serde_json::json!({
                    "report": result.report,
                    "splits": result.split_reports,
                    "failures": result.failures,
                    "name_violations": result.name_violations,
                });
                emit(Some(&dir.join("report.json")), &json(&report)?)?;
                let timing = serde_json::json!({"mean": result.timing, "samples": result.timings});
                emit(Some(&dir.join("timing.json")), &json(&timing)?)?;
            }
            return Ok(result.failures == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
