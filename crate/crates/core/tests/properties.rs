//! Cross-module invariants, checked on generated inputs.

use engram_core::behavior::{score, Group, Response, ResponseSet};
use engram_core::memory::{MemoryEntry, MemoryStore, Metric, StoreMode};
use engram_core::model::{random_store, ModelConfig};
use engram_core::selftest::demo_vocab;
use engram_core::stats::{bootstrap_ci, ols_fit, permutation_test_multi, Resample, Tails};
use engram_core::surprisal::{perplexity, token_nlls, word_surprisal, TokenNll};
use engram_core::tokenizer::{align_words, whitespace_words, WordSpan};
use engram_core::{Design, EmbeddingTable, Model};
use proptest::prelude::*;

fn design(rows: &[(f64, f64, f64)]) -> Design {
    let x: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
    Design::new(vec!["a".into(), "b".into()], x, y).unwrap()
}

fn rows() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 8..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn r_squared_invariant_under_affine_rescaling(rows in rows(), scale in 0.1..10.0f64, shift in -10.0..10.0f64) {
        let d = design(&rows);
        let Ok(base) = ols_fit(&d) else { return Ok(()) };
        let moved: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.0 * scale + shift, r.1, r.2)).collect();
        let fit = ols_fit(&design(&moved)).unwrap();
        prop_assert!((fit.r_squared - base.r_squared).abs() < 1e-9);
        prop_assert!((fit.beta[0] * scale - base.beta[0]).abs() < 1e-8 * (1.0 + base.beta[0].abs()));
        prop_assert!((fit.beta[1] - base.beta[1]).abs() < 1e-8 * (1.0 + base.beta[1].abs()));
        prop_assert!(fit.r_squared >= -1e-12 && fit.r_squared <= 1.0 + 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_columns(rows in rows()) {
        let d = design(&rows);
        let Ok(fit) = ols_fit(&d) else { return Ok(()) };
        let e_norm = fit.residuals.iter().map(|e| e * e).sum::<f64>().sqrt().max(1e-300);
        for j in 0..2 {
            let col = d.column(j);
            let c_norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(c, e)| c * e).sum();
            prop_assert!(dot.abs() / (c_norm * e_norm) < 1e-8);
        }
    }

    #[test]
    fn permutation_p_independent_of_thread_count(rows in rows(), seed in any::<u64>()) {
        let d = design(&rows);
        if ols_fit(&d).is_err() {
            return Ok(());
        }
        let stat = |d: &Design| Ok(vec![ols_fit(d)?.r_squared]);
        let pooled = permutation_test_multi(&d, stat, Resample::RowShuffle, 200, Tails::One, seed).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| {
            permutation_test_multi(&d, stat, Resample::RowShuffle, 200, Tails::One, seed).unwrap()
        });
        prop_assert_eq!(pooled[0].p_value, single[0].p_value);
        prop_assert!(pooled[0].p_value >= 1.0 / 201.0);
    }

    #[test]
    fn bootstrap_reproducible_given_seed(xs in proptest::collection::vec(-3.0..3.0f64, 2..40), seed in any::<u64>()) {
        let mean = |r: &[f64]| Ok(vec![r.iter().sum::<f64>() / r.len() as f64]);
        let a = bootstrap_ci(&xs, mean, 100, 0.9, seed).unwrap();
        let b = bootstrap_ci(&xs, mean, 100, 0.9, seed).unwrap();
        prop_assert_eq!(&a.intervals, &b.intervals);
        prop_assert!(a.intervals[0].0 <= a.intervals[0].1);
    }

    #[test]
    fn word_surprisal_sums_match(nlls in proptest::collection::vec(0.0..10.0f64, 1..40), cuts in proptest::collection::vec(1usize..4, 1..40)) {
        let tokens: Vec<TokenNll> = nlls
            .iter()
            .enumerate()
            .map(|(i, &nll)| TokenNll { position: i + 1, token_id: 0, nll })
            .collect();
        let n = nlls.len() + 1;
        let mut spans = Vec::new();
        let mut lo = 0;
        for (k, c) in cuts.iter().enumerate() {
            if lo >= n {
                break;
            }
            let hi = (lo + c).min(n);
            spans.push(WordSpan { word_index: k, word: format!("w{k}"), token_range: (lo, hi) });
            lo = hi;
        }
        let covered_tokens = lo;
        let words = word_surprisal(&tokens, &spans).unwrap();
        let word_total: f64 = words.iter().map(|w| w.surprisal).sum();
        let token_total: f64 = tokens.iter().filter(|t| t.position < covered_tokens).map(|t| t.nll).sum();
        prop_assert!((word_total - token_total).abs() < 1e-6);
        prop_assert!(words.iter().all(|w| w.surprisal >= 0.0 && w.surprisal.is_finite() && w.n_subtokens >= 1));
        prop_assert!(words[0].excluded);
        // perplexity is a token-level quantity, blind to the grouping
        let p = perplexity(&tokens);
        prop_assert!((p - (nlls.iter().sum::<f64>() / nlls.len() as f64).exp()).abs() < 1e-9 * p);
    }

    #[test]
    fn store_never_exceeds_capacity(cap in 1usize..8, surprisals in proptest::collection::vec(0.0..5.0f64, 0..40)) {
        let mut store = MemoryStore::dynamic(1, Some(cap));
        for (step, &s) in surprisals.iter().enumerate() {
            store.write(MemoryEntry { key: vec![step as f32], value: 0, surprisal_at_write: s, write_step: step }).unwrap();
            prop_assert!(store.len() <= cap);
        }
        prop_assert_eq!(store.evictions(), surprisals.len().saturating_sub(cap));
        // reference: an ordered set keyed by (surprisal, step); non-negative
        // floats order like their bit patterns
        let mut reference = std::collections::BTreeSet::new();
        for (step, &s) in surprisals.iter().enumerate() {
            if reference.len() == cap {
                reference.pop_first();
            }
            reference.insert((s.to_bits(), step));
        }
        let mut expected: Vec<usize> = reference.into_iter().map(|(_, step)| step).collect();
        expected.sort_unstable();
        let got: Vec<usize> = store.entries().iter().map(|e| e.write_step).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn sealed_static_store_is_referentially_transparent(keys in proptest::collection::vec(proptest::collection::vec(-1.0..1.0f32, 3), 1..30), q in proptest::collection::vec(-1.0..1.0f32, 3), k in 1usize..10) {
        let mut store = MemoryStore::new(3, None, StoreMode::Static);
        for (i, key) in keys.into_iter().enumerate() {
            store.write(MemoryEntry { key, value: i as u32, surprisal_at_write: 1.0, write_step: i }).unwrap();
        }
        store.seal();
        let late = MemoryEntry { key: vec![0.0; 3], value: 0, surprisal_at_write: 1.0, write_step: 99 };
        prop_assert!(store.write(late).is_err());
        for metric in [Metric::L2, Metric::Cosine] {
            let a: Vec<(usize, f64)> = store.retrieve(&q, k, metric).unwrap().iter().map(|n| (n.entry.write_step, n.distance)).collect();
            let b: Vec<(usize, f64)> = store.retrieve(&q, k, metric).unwrap().iter().map(|n| (n.entry.write_step, n.distance)).collect();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn alignment_partitions_tokens(words in proptest::collection::vec("[a-zé日']{1,6}[.,!]?", 1..12), gaps in proptest::collection::vec(prop_oneof![Just(" "), Just("  "), Just("\n"), Just(" \t ")], 12)) {
        let mut text = String::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push_str(gaps[i]);
            }
            text.push_str(w);
        }
        let vocab = demo_vocab();
        let seq = vocab.encode(&text).unwrap();
        prop_assert_eq!(&vocab.encode(&text).unwrap(), &seq);
        let alignment = align_words(&text, &seq, &whitespace_words(&text)).unwrap();
        let mut owned = vec![0u8; seq.len()];
        for span in &alignment.spans {
            prop_assert!(span.n_tokens() >= 1);
            for t in span.token_range.0..span.token_range.1 {
                owned[t] += 1;
            }
        }
        for &t in &alignment.uncovered {
            owned[t] += 1;
        }
        prop_assert!(owned.iter().all(|&c| c == 1), "overlap or gap: {:?}", owned);
    }
}

fn table() -> EmbeddingTable {
    let mut t = EmbeddingTable::new(2, true);
    for (w, v) in [("pie", [1.0, 0.0]), ("cake", [0.8, 0.6]), ("car", [0.0, 1.0]), ("man", [0.6, 0.8]), ("tea", [0.3, 0.9])] {
        t.insert(w, v.to_vec()).unwrap();
    }
    t
}

fn response(word: usize, group: Group, participant: usize, answer: Option<&str>) -> Response {
    let correct = ["", "", "pie", "man", "tea"][word];
    Response {
        word_index: word,
        correct_word: correct.into(),
        group,
        participant_id: format!("p{participant}"),
        response: answer.map(str::to_owned),
    }
}

const ANSWERS: [Option<&str>; 6] = [Some("pie"), Some("cake"), Some("car"), None, Some("zebra"), Some("Man,")];

proptest! {
    #[test]
    fn scoring_ignores_participant_order(picks in proptest::collection::vec((2usize..5, 0usize..6, any::<bool>()), 1..30), seed in any::<u64>()) {
        let mut rows = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (i, &(w, a, story)) in picks.iter().enumerate() {
            let g = if story { Group::StoryExposure } else { Group::NoExposure };
            if seen.insert((w, i)) {
                rows.push(response(w, g, i, ANSWERS[a]));
            }
        }
        let base = score(&ResponseSet::new(rows.clone()).unwrap(), &table());
        let mut rng = engram_core::seed::stream(seed, "shuffle", 0);
        use rand::seq::SliceRandom;
        rows.shuffle(&mut rng);
        let shuffled = score(&ResponseSet::new(rows).unwrap(), &table());
        for (a, b) in base.rows.iter().zip(&shuffled.rows) {
            prop_assert_eq!(a.word_index, b.word_index);
            for (x, y) in [(a.mean_sim_exposure, b.mean_sim_exposure), (a.mean_sim_noexposure, b.mean_sim_noexposure)] {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
    }

    #[test]
    fn identical_groups_have_zero_effect(answers in proptest::collection::vec(0usize..6, 1..8)) {
        let mut rows = Vec::new();
        for (p, &a) in answers.iter().enumerate() {
            rows.push(response(3, Group::StoryExposure, p, ANSWERS[a]));
            rows.push(response(3, Group::NoExposure, p + 100, ANSWERS[a]));
        }
        let t = score(&ResponseSet::new(rows).unwrap(), &table());
        if let Some(effect) = t.rows[0].memory_effect {
            prop_assert_eq!(effect, 0.0);
        }
    }

    #[test]
    fn dropping_a_response_is_local(answers in proptest::collection::vec(0usize..6, 2..8), victim in 0usize..8) {
        let mut rows = Vec::new();
        for (p, &a) in answers.iter().enumerate() {
            rows.push(response(2, Group::StoryExposure, p, ANSWERS[a]));
            rows.push(response(4, Group::NoExposure, p, ANSWERS[(a + 1) % 6]));
        }
        let before = score(&ResponseSet::new(rows.clone()).unwrap(), &table());
        rows.remove(2 * (victim % answers.len()));
        let after = score(&ResponseSet::new(rows).unwrap(), &table());
        let find = |t: &engram_core::behavior::ScoreTable, w: usize| t.rows.iter().find(|r| r.word_index == w).cloned();
        prop_assert_eq!(find(&before, 4), find(&after, 4));
    }
}

#[test]
fn windowed_nll_equals_full_context_when_it_fits() {
    let cfg = ModelConfig { max_positions: 32, ..ModelConfig::tiny(19) };
    let model: Model = Model::from_store(&random_store(&cfg, 3, 0.5), cfg).unwrap();
    let ids: Vec<u32> = (0..20).map(|i| (i * 7 % 19) as u32).collect();
    let full = token_nlls(&model, &ids, 32).unwrap();
    let narrow = token_nlls(&model, &ids, 20).unwrap();
    assert_eq!(full, narrow);
    let sliding = token_nlls(&model, &ids, 8).unwrap();
    assert_eq!(sliding.len(), 19);
    assert_eq!(&sliding[..7], &full[..7]);
}
