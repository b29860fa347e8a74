#![allow(dead_code)]

use std::path::PathBuf;

use apiguard_core::constrain::{ApiTokenization, TokenId, VocabTokenizer};
use apiguard_core::mining::{ApiRef, ApiSource};
use apiguard_core::source::ProjectIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn project() -> ProjectIndex {
    ProjectIndex::from_dir(&fixture("project")).expect("fixture project indexes")
}

pub fn toy_tokenizer() -> VocabTokenizer {
    VocabTokenizer::from_file(&fixture("toy_vocab.txt")).expect("toy vocab loads")
}

pub fn api(owner: &str, name: &str, has_params: bool) -> ApiRef {
    let params = if has_params { "int x" } else { "" };
    ApiRef::new(owner, name, has_params, format!("void {name}({params})"), ApiSource::InProjectDeclared)
}

/// `n` distinct token sequences drawn from `ids`, lengths 1..=max_len, with
/// deliberate shared prefixes (some sequences extend earlier ones).
pub fn random_sequences(rng: &mut ChaCha8Rng, n: usize, ids: &[TokenId], max_len: usize) -> Vec<Vec<TokenId>> {
    let mut out: Vec<Vec<TokenId>> = Vec::with_capacity(n);
    while out.len() < n {
        let mut seq = if !out.is_empty() && rng.random_bool(0.4) {
            let base = out[rng.random_range(0..out.len())].clone();
            let keep = rng.random_range(1..=base.len());
            base[..keep].to_vec()
        } else {
            Vec::new()
        };
        let target = rng.random_range(1..=max_len).max(seq.len() + 1);
        while seq.len() < target {
            seq.push(ids[rng.random_range(0..ids.len())]);
        }
        if !out.contains(&seq) {
            out.push(seq);
        }
    }
    out
}

/// Tokenized APIs for the given sequences; roughly half take parameters.
pub fn tokenized_apis(rng: &mut ChaCha8Rng, seqs: &[Vec<TokenId>]) -> Vec<ApiTokenization> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| ApiTokenization { api: api("T", &format!("m{i}"), rng.random_bool(0.5)), tokens: s.clone() })
        .collect()
}

/// Toy-vocabulary ids that are not parameter-pattern tokens.
pub fn name_ids(policy: &apiguard_core::constrain::ParamPolicy, vocab_size: usize) -> Vec<TokenId> {
    (0..vocab_size as TokenId).filter(|&id| !policy.is_pattern(id)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}


use apiguard_core::mining::{CalledFunction, FileSkeleton, GenerationPoint, GlobalDependency, LocalDependency};

/// A context far larger than the default budgets: `scale` controls how many
/// skeletons, called functions and reference APIs are generated.
pub fn oversized_context(
    rng: &mut ChaCha8Rng,
    scale: usize,
) -> (String, GlobalDependency, LocalDependency, GenerationPoint) {
    let word = |rng: &mut ChaCha8Rng| -> String {
        let len = rng.random_range(3..10);
        (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
    };
    let mut description = String::new();
    for _ in 0..rng.random_range(50..400) * scale {
        description.push_str(&word(rng));
        description.push(' ');
    }
    let skeleton = |rng: &mut ChaCha8Rng, i: usize| -> FileSkeleton {
        let mut text = format!("package p{i};\n\npublic class C{i} {{\n");
        for _ in 0..rng.random_range(10..60) {
            text.push_str(&format!("    public int {}(String {});\n", word(rng), word(rng)));
        }
        text.push('}');
        FileSkeleton { path: format!("p{i}/C{i}.java"), rendered_text: text }
    };
    let related = (0..rng.random_range(5..20) * scale).map(|i| skeleton(rng, i)).collect();
    let current = skeleton(rng, 9999);
    let called = (0..rng.random_range(3..15) * scale)
        .map(|i| {
            let mut body = format!("void f{i}() {{\n");
            for _ in 0..rng.random_range(5..40) {
                body.push_str(&format!("    {}.{}();\n", word(rng), word(rng)));
            }
            body.push('}');
            CalledFunction { qualified_name: format!("C.f{i}"), body_text: body }
        })
        .collect();
    let reference_apis = (0..rng.random_range(5..50)).map(|i| api("C", &format!("api{i}"), i % 2 == 0)).collect();
    let mut prefix = String::from("void target() {\n");
    for _ in 0..rng.random_range(200..800) {
        prefix.push_str(&format!("    int {} = {};\n", word(rng), rng.random_range(0..1000)));
    }
    prefix.push_str("    obj.");
    let point = GenerationPoint {
        file: "p/Target.java".into(),
        class_name: "Target".into(),
        method_name: "target".into(),
        line: 1,
        column: 0,
        prefix_text: prefix,
        receiver_text: "obj".into(),
        class_index: 0,
        method_index: 0,
        offset: 0,
    };
    (
        description,
        GlobalDependency { current_skeleton: current, related_skeletons: related },
        LocalDependency { reference_apis, called_functions: called },
        point,
    )
}

use std::collections::BTreeSet;

/// Continuations of `prefix` over the raw sequence list: next tokens of
/// longer sequences, plus the parameter patterns of any API whose sequence
/// is exactly `prefix`.
pub fn oracle_continuations(
    apis: &[ApiTokenization],
    prefix: &[TokenId],
    policy: &apiguard_core::constrain::ParamPolicy,
) -> BTreeSet<TokenId> {
    let mut out = BTreeSet::new();
    for a in apis {
        if a.tokens.len() > prefix.len() && a.tokens.starts_with(prefix) {
            out.insert(a.tokens[prefix.len()]);
        }
        if a.tokens == prefix {
            out.extend(policy.allowed(a.api.has_params).iter().copied());
        }
    }
    out
}

/// Byte-pair encoding by the textbook loop: find the adjacent pair with the
/// lowest merge rank, merge its leftmost occurrence, repeat.
pub fn brute_force_bpe(text: &str, merges: &[(&str, &str)]) -> Vec<String> {
    let mut parts: Vec<String> = text.chars().map(String::from).collect();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..parts.len().saturating_sub(1) {
            if let Some(rank) = merges.iter().position(|(a, b)| *a == parts[i] && *b == parts[i + 1]) {
                if best.is_none_or(|(r, _)| rank < r) {
                    best = Some((rank, i));
                }
            }
        }
        let Some((_, i)) = best else { return parts };
        let right = parts.remove(i + 1);
        parts[i].push_str(&right);
    }
}

/// Levenshtein distance over chars with the full (n+1) x (m+1) table.
pub fn full_dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// `1 - d / max(|a|, |b|)`, 1 for two empty strings.
pub fn oracle_similarity(a: &str, b: &str) -> f64 {
    let m = a.chars().count().max(b.chars().count());
    if m == 0 {
        1.0
    } else {
        1.0 - full_dp_levenshtein(a, b) as f64 / m as f64
    }
}

/// A random string of up to `max_len` chars from a small alphabet that
/// includes a multibyte character.
pub fn random_string(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', '(', ')', '.', ' ', 'é'];
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}
