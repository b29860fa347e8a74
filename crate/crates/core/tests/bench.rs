mod common;

use apiguard_core::bench::{
    build_benchmark, dedup_and_partition, extract_candidates, make_sample, sample_id, split_of, BenchmarkSet, Split,
};
use proptest::prelude::*;

#[test]
fn fixture_benchmark_matches_golden_bytes() {
    let set = build_benchmark(&common::project(), "project", true);
    assert_eq!(set.to_jsonl(), common::read_fixture("bench_golden.jsonl"));
    assert_eq!((set.counts.total, set.counts.f, set.counts.m), (9, 5, 4));
}

#[test]
fn samples_reconstruct_their_functions() {
    let index = common::project();
    let set = build_benchmark(&index, "project", true);
    for s in &set.samples {
        let unit = index.unit(&s.file).unwrap();
        let body = &unit.class_named(&s.class_name).unwrap().methods_named(&s.method_name).next().unwrap().body_text;
        let stem = s.prompt.strip_suffix('.').expect("prompt ends at the dot");
        assert!(stem.ends_with(&s.receiver_text), "{}", s.id);
        assert!(body.contains(&format!("{stem}.{}", s.ground_truth)), "{}", s.id);
        assert!(body.starts_with(&s.prompt));
        assert_eq!(s.id, sample_id(&s.file, &s.prompt, &s.ground_truth));
    }
}

#[test]
fn half_way_call_lands_in_f() {
    let set = build_benchmark(&common::project(), "project", true);
    let boundary: Vec<_> = set.samples.iter().filter(|s| s.position_ratio == 0.5).collect();
    assert_eq!(boundary.len(), 2);
    assert!(boundary.iter().all(|s| s.split == Split::F));

    let exclusive = build_benchmark(&common::project(), "project", false);
    assert!(exclusive.samples.iter().filter(|s| s.position_ratio == 0.5).all(|s| s.split == Split::M));
    assert_eq!((exclusive.counts.f, exclusive.counts.m), (3, 6));
    assert_eq!(split_of(0.5, true), Split::F);
    assert_eq!(split_of(0.5000001, true), Split::M);
}

#[test]
fn duplicate_prompts_collapse() {
    let index = common::project();
    let candidates = extract_candidates(&index);
    // Helper.count and Registry.count share a body; only Helper's survives.
    assert_eq!(candidates.len(), 10);
    let set = build_benchmark(&index, "project", true);
    assert!(set.samples.iter().all(|s| s.file != "com/acme/util/Registry.java"));
    assert!(set.samples.iter().any(|s| s.file == "com/acme/util/Helper.java"));
}

#[test]
fn short_functions_are_skipped() {
    let index = common::project();
    for c in extract_candidates(&index) {
        assert!(c.method().line_count() > 5);
    }
}

#[test]
fn jsonl_round_trip() {
    let set = build_benchmark(&common::project(), "project", true);
    let back = BenchmarkSet::read_jsonl(set.to_jsonl().as_bytes()).unwrap();
    assert_eq!(back.samples, set.samples);
    assert_eq!(back.counts, set.counts);
}

proptest! {
    #[test]
    fn dedup_is_idempotent(picks in prop::collection::vec(0usize..10, 0..30), inclusive in any::<bool>()) {
        let index = common::project();
        let pool: Vec<_> = extract_candidates(&index).iter().map(|c| make_sample("p", c)).collect();
        let samples: Vec<_> = picks.iter().map(|&i| pool[i].clone()).collect();
        let once = dedup_and_partition(samples, inclusive);
        let twice = dedup_and_partition(once.samples.clone(), inclusive);
        prop_assert_eq!(&once.samples, &twice.samples);
        prop_assert_eq!(once.counts, twice.counts);
        prop_assert_eq!(once.counts.f + once.counts.m, once.samples.len());
        let prompts: std::collections::HashSet<_> = once.samples.iter().map(|s| &s.prompt).collect();
        prop_assert_eq!(prompts.len(), once.samples.len());
    }
}
