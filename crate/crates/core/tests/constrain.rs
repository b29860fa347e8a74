mod common;

use std::collections::{BTreeSet, HashMap};

use apiguard_core::constrain::{
    compute_mask, decode, decode_unconstrained, tokenize_api, tokenize_reference_set, BpeTokenizer, DecodeError,
    DecodeSession, ParamPolicy, Phase, RecordedTokenizer, TokenId, TokenTrie, Tokenizer, ROOT,
};
use apiguard_core::gateway::{RandomProvider, ReplayEntry, ReplayProvider};
use apiguard_core::pipeline::normalize_call;
use proptest::prelude::*;

fn recorded() -> RecordedTokenizer {
    RecordedTokenizer::from_json(&common::read_fixture("codellama_willreact.json")).unwrap()
}

#[test]
fn recorded_codellama_tokenization_depends_on_context() {
    let tok = recorded();
    assert_eq!(tok.encode("willReact").unwrap(), [674, 1123, 627]);
    assert_eq!(tokenize_api(&tok, "reaction.", "willReact").unwrap(), [14043, 1123, 627]);
    assert_eq!(tok.decode(&[674, 1123, 627]), " willReact");
}

#[test]
fn recorded_codellama_round_trip() {
    let tok = recorded();
    let apis = [common::api("Reaction", "willReact", false), common::api("Reaction", "react", true)];
    let (ctx, tokenized) = tokenize_reference_set(&tok, "reaction.", &apis).unwrap();
    assert_eq!(ctx, [17409]);
    assert_eq!(tokenized[0].tokens, [14043, 1123, 627]);
    assert_eq!(tokenized[1].tokens, [29889, 7554]);
    let trie = TokenTrie::build(&tokenized).unwrap();
    assert_eq!(trie.walk(&[14043, 1123, 627]).map(|n| trie.node(n).is_terminal()), Some(true));

    let policy = ParamPolicy::classify(&tok);
    assert_eq!(policy.no_param, [580, 3101]);
    assert_eq!(policy.param, [313]);
    let lm = ReplayProvider::from_json(tok.vocab_size(), &common::read_fixture("codellama_replay.json")).unwrap();
    let mut session = DecodeSession::new(ctx, 15);
    let out = decode(&mut session, &trie, &policy, &lm, &tok).unwrap();
    // The unmasked favourites (674 at the root, 313 after the name) are refused.
    assert_eq!(out.tokens, [14043, 1123, 627, 3101]);
    assert_eq!(out.api.unwrap().name, "willReact");
    assert_eq!(out.text, ".willReact())");
    assert_eq!(normalize_call(&out.text), "willReact()");
}

#[test]
fn one_merge_bpe_example() {
    let merges = [("b", "c")];
    let bpe = BpeTokenizer::new(&['x', '.', 'a', 'b', 'c'], &merges).unwrap();
    let full: Vec<TokenId> = common::brute_force_bpe("x.abc", &merges).iter().map(|s| bpe.id(s).unwrap()).collect();
    let ctx: Vec<TokenId> = common::brute_force_bpe("x.", &merges).iter().map(|s| bpe.id(s).unwrap()).collect();
    assert_eq!(tokenize_api(&bpe, "x.", "abc").unwrap(), full[ctx.len()..]);
    assert_eq!(tokenize_api(&bpe, "x.", "abc").unwrap(), [bpe.id("a").unwrap(), bpe.id("bc").unwrap()]);
}

#[test]
fn toy_vocab_policy() {
    let tok = common::toy_tokenizer();
    assert_eq!(tok.vocab_size(), 256);
    let policy = ParamPolicy::classify(&tok);
    let text = |ids: &[TokenId]| ids.iter().map(|&i| tok.token_text(i).unwrap().to_string()).collect::<BTreeSet<_>>();
    let none = text(&policy.no_param);
    let some = text(&policy.param);
    for t in ["()", "())", "());", "() {", "()("] {
        assert!(none.contains(t), "{t}");
    }
    for t in ["(", "(x", "(key"] {
        assert!(some.contains(t), "{t}");
    }
    assert!(none.iter().all(|t| t.starts_with("()")));
    assert!(some.iter().all(|t| t.starts_with('(') && !t.starts_with("()")));
}

#[test]
fn truncated_decode_keeps_partial_output() {
    let tok = common::toy_tokenizer();
    let policy = ParamPolicy::classify(&tok);
    let names = common::name_ids(&policy, tok.vocab_size());
    let tokenized = vec![apiguard_core::constrain::ApiTokenization {
        api: common::api("T", "long", false),
        tokens: names[..6].to_vec(),
    }];
    let trie = TokenTrie::build(&tokenized).unwrap();
    let lm = RandomProvider::new(0, tok.vocab_size());
    let mut session = DecodeSession::new(vec![], 3);
    match decode(&mut session, &trie, &policy, &lm, &tok) {
        Err(DecodeError::Truncated { partial }) => assert_eq!(partial.tokens, names[..3]),
        other => panic!("expected truncation, got {other:?}"),
    }
}

fn random_trie(seed: u64, n: usize, max_len: usize) -> (Vec<apiguard_core::constrain::ApiTokenization>, TokenTrie) {
    let tok = common::toy_tokenizer();
    let policy = ParamPolicy::classify(&tok);
    let mut rng = common::rng(seed);
    let seqs = common::random_sequences(&mut rng, n, &common::name_ids(&policy, tok.vocab_size()), max_len);
    let apis = common::tokenized_apis(&mut rng, &seqs);
    let trie = TokenTrie::build(&apis).unwrap();
    (apis, trie)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mask_equals_brute_force_continuations(seed in any::<u64>(), n in 1usize..40) {
        let tok = common::toy_tokenizer();
        let policy = ParamPolicy::classify(&tok);
        let (apis, trie) = random_trie(seed, n, 5);
        let mut prefixes: BTreeSet<Vec<TokenId>> = BTreeSet::new();
        for a in &apis {
            for k in 0..a.tokens.len() + 1 {
                prefixes.insert(a.tokens[..k].to_vec());
            }
        }
        for p in prefixes {
            let node = trie.walk(&p).unwrap();
            let mask = compute_mask(Phase::Name(node), &trie, &policy).unwrap();
            let got: BTreeSet<TokenId> = mask.valid_ids.iter().copied().collect();
            prop_assert_eq!(got, common::oracle_continuations(&apis, &p, &policy), "prefix {:?}", p);
        }
        prop_assert_eq!(trie.walk(&[]), Some(ROOT));
    }

    #[test]
    fn constrained_decodes_are_safe_and_conform(seed in any::<u64>(), lm_seed in any::<u64>(), n in 1usize..30) {
        let tok = common::toy_tokenizer();
        let policy = ParamPolicy::classify(&tok);
        let (apis, trie) = random_trie(seed, n, 4);
        let lm = RandomProvider::new(lm_seed, tok.vocab_size());
        let mut session = DecodeSession::new(vec![1, 2, 3], 15);
        let out = decode(&mut session, &trie, &policy, &lm, &tok).unwrap();
        let api = out.api.clone().expect("decode names an API");
        let (last, name) = out.tokens.split_last().unwrap();
        let seq = apis.iter().find(|a| a.api.name == api.name).map(|a| &a.tokens);
        prop_assert_eq!(Some(&name.to_vec()), seq);
        prop_assert!(policy.allowed(api.has_params).contains(last));
        prop_assert!(!out.escaped);
    }

    #[test]
    fn unconstrained_decode_ends_on_pattern_or_budget(seed in any::<u64>()) {
        let tok = common::toy_tokenizer();
        let policy = ParamPolicy::classify(&tok);
        let lm = RandomProvider::new(seed, tok.vocab_size());
        match decode_unconstrained(&[7], 15, &policy, &lm, &tok) {
            Ok(out) => prop_assert!(policy.is_pattern(*out.tokens.last().unwrap())),
            Err(DecodeError::Truncated { partial }) => {
                prop_assert_eq!(partial.tokens.len(), 15);
                prop_assert!(partial.tokens.iter().all(|&t| !policy.is_pattern(t)));
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn tokenize_api_matches_brute_force_bpe(
        ctx in "[xab.]{0,6}",
        name in "[abc]{1,6}",
        merge_idx in prop::collection::vec(0usize..8, 0..5),
    ) {
        let all = [("a", "b"), ("b", "c"), (".", "a"), ("x", "."), ("a", "a"), ("c", "a"), ("b", "b"), ("x", "a")];
        let mut merges: Vec<(&str, &str)> = Vec::new();
        for i in merge_idx {
            if !merges.contains(&all[i]) {
                merges.push(all[i]);
            }
        }
        let bpe = BpeTokenizer::new(&['x', '.', 'a', 'b', 'c'], &merges).unwrap();
        let ids = |t: &str| -> Vec<TokenId> {
            common::brute_force_bpe(t, &merges).iter().map(|s| bpe.id(s).unwrap()).collect()
        };
        let c = ids(&ctx);
        let f = ids(&format!("{ctx}{name}"));
        let shared = c.iter().zip(&f).take_while(|(a, b)| a == b).count();
        match tokenize_api(&bpe, &ctx, &name) {
            Ok(got) => prop_assert_eq!(got, f[shared..].to_vec()),
            Err(_) => prop_assert_eq!(shared, f.len()),
        }
    }
}

#[test]
fn replay_only_answers_recorded_contexts() {
    let tok = recorded();
    let mut fixture = HashMap::new();
    fixture.insert("17409".to_string(), ReplayEntry::Sparse { topk: vec![(29889, 1.0)], default: 0.0 });
    let lm = ReplayProvider::new(tok.vocab_size(), fixture).unwrap();
    let apis = [common::api("Reaction", "react", true)];
    let (ctx, tokenized) = tokenize_reference_set(&tok, "reaction.", &apis).unwrap();
    let trie = TokenTrie::build(&tokenized).unwrap();
    let policy = ParamPolicy::classify(&tok);
    let err = decode(&mut DecodeSession::new(ctx, 15), &trie, &policy, &lm, &tok).unwrap_err();
    assert!(matches!(err, DecodeError::Gateway(_)), "{err:?}");
}
