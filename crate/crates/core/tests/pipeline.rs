mod common;

use apiguard_core::bench::build_benchmark;
use apiguard_core::eval::Element;
use apiguard_core::gateway::RandomProvider;
use apiguard_core::mining::{GenerationPoint, SectionLabel};
use apiguard_core::pipeline::{
    generate, overhead, run_pipeline, Ablation, GenerateOptions, PipelineError, ProviderConfig, RunConfig,
    TimingRecord,
};
use apiguard_core::constrain::Tokenizer;

fn opts(ablation: Ablation) -> GenerateOptions {
    GenerateOptions { ablation, ..GenerateOptions::default() }
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let index = common::project();
    let set = build_benchmark(&index, "project", true);
    let tok = common::toy_tokenizer();
    let lm = RandomProvider::new(11, tok.vocab_size());
    let one = run_pipeline(&index, &set, &tok, &lm, &GenerateOptions::default(), Some(1)).unwrap();
    let four = run_pipeline(&index, &set, &tok, &lm, &GenerateOptions::default(), Some(4)).unwrap();
    assert_eq!(one.outputs_jsonl(), four.outputs_jsonl());
    let ids: Vec<&str> = one.outputs.iter().map(|o| o.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn constrained_runs_never_hallucinate() {
    let index = common::project();
    let set = build_benchmark(&index, "project", true);
    let tok = common::toy_tokenizer();
    for seed in 0..20 {
        let lm = RandomProvider::new(seed, tok.vocab_size());
        let run = run_pipeline(&index, &set, &tok, &lm, &GenerateOptions::default(), None).unwrap();
        assert_eq!(run.failures, 0, "seed {seed}");
        assert_eq!(run.name_violations, 0, "seed {seed}");
        let report = run.report.as_ref().unwrap();
        assert_eq!(report.mahr, 0.0, "seed {seed}: {}", run.outputs_jsonl());
        assert_eq!(report.n, 9);
    }
}

#[test]
fn unconstrained_runs_do_hallucinate() {
    let index = common::project();
    let set = build_benchmark(&index, "project", true);
    let tok = common::toy_tokenizer();
    let lm = RandomProvider::new(1, tok.vocab_size());
    let ablation = Ablation { no_constrain: true, ..Ablation::default() };
    let run = run_pipeline(&index, &set, &tok, &lm, &opts(ablation), None).unwrap();
    assert!(run.name_violations > 0);
    assert!(run.outputs.iter().any(|o| o.elements.contains(&Element::Name)));
}

#[test]
fn ablations_remove_prompt_sections() {
    let index = common::project();
    let point = GenerationPoint::locate(&index, "com/acme/sim/Simulator.java", 17, 21).unwrap();
    let tok = common::toy_tokenizer();
    let lm = RandomProvider::new(3, tok.vocab_size());
    let labels = |a: Ablation| -> Vec<SectionLabel> {
        let g = generate(&index, &point, &tok, &lm, &opts(a)).unwrap();
        assert_eq!(g.reference_apis.len(), 3);
        g.prompt.sections.iter().map(|s| s.label).collect()
    };
    use SectionLabel::*;
    assert_eq!(labels(Ablation::default()), [ProjectDescription, GlobalDependency, LocalDependency, IncompleteFunction]);
    assert_eq!(
        labels(Ablation { no_local: true, ..Ablation::default() }),
        [ProjectDescription, GlobalDependency, IncompleteFunction]
    );
    assert_eq!(
        labels(Ablation { no_global: true, ..Ablation::default() }),
        [ProjectDescription, LocalDependency, IncompleteFunction]
    );
    assert_eq!(labels(Ablation { no_local: true, no_global: true, no_constrain: false }), [IncompleteFunction]);
    let g = generate(&index, &point, &tok, &lm, &opts(Ablation { no_constrain: true, ..Ablation::default() })).unwrap();
    assert!(g.trie.is_none());
}

#[test]
fn constrained_generation_names_a_reference_api() {
    let index = common::project();
    let point = GenerationPoint::locate(&index, "com/acme/sim/Simulator.java", 17, 21).unwrap();
    let tok = common::toy_tokenizer();
    for seed in 0..30 {
        let lm = RandomProvider::new(seed, tok.vocab_size());
        let g = generate(&index, &point, &tok, &lm, &GenerateOptions::default()).unwrap();
        let name = g.generated.split('(').next().unwrap();
        assert!(g.reference_apis.iter().any(|a| a.name == name), "seed {seed}: {:?}", g.generated);
        assert!(g.generated.contains('('));
    }
}

#[test]
fn config_parsing_and_validation() {
    let cfg = RunConfig::from_json(
        r#"{"project_dir": "p", "tokenizer_vocab": "v.txt", "seed": 5,
            "provider": {"kind": "replay", "fixture": "r.json"}, "ablation": {"no_local": true}}"#,
    )
    .unwrap();
    assert_eq!(cfg.project_budget, 7000);
    assert_eq!(cfg.function_budget, 1000);
    assert_eq!(cfg.max_new_tokens, 15);
    assert_eq!(cfg.provider, ProviderConfig::Replay { fixture: "r.json".into() });
    assert!(cfg.ablation.no_local && !cfg.ablation.no_global);
    cfg.validate().unwrap();

    let bad = RunConfig { max_new_tokens: 0, ..RunConfig::default() };
    assert!(matches!(bad.validate(), Err(PipelineError::Config(_))));
    assert!(RunConfig::from_json(r#"{"provider": {"kind": "oracle"}}"#).is_err());
}

#[test]
fn overhead_is_a_difference_of_means() {
    let c = TimingRecord { static_analysis: 0.1, inference: 0.5, total: 0.6 };
    let u = TimingRecord { static_analysis: 0.0, inference: 0.5, total: 0.5 };
    assert!((overhead(&c, &u) - 0.1).abs() < 1e-12);
}
