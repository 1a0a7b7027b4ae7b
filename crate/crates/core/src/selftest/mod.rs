//! Asset-free verification suite. Each criterion compares production code
//! against an independent oracle in [`oracle`] or against a closed form.

pub mod oracle;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::memory::{eval_tokens, interpolate, EncodingPolicy, EvalConfig, MemoryEntry, MemoryStore, Metric};
use crate::model::{random_store, ForwardOptions, Gelu, Model, ModelConfig, NamedTensorStore, Tensor};
use crate::seed;
use crate::stats::{bootstrap_ci, ols_fit, pearson, permutation_test, Design, GroupedSample, Resample, Tails};
use crate::tokenizer::Vocab;

const ROOT_SEED: u64 = 0x5e1f_7e57;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub criterion: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] criterion {}: {} ({})", self.criterion, self.name, self.detail)
    }
}

/// Collects failed sub-checks for one criterion.
struct Tally {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { failures: Vec::new(), notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    fn finish(self, criterion: u8, name: &'static str) -> Check {
        let passed = self.failures.is_empty();
        let mut detail = self.notes.join("; ");
        if !passed {
            let shown: Vec<&str> = self.failures.iter().take(3).map(String::as_str).collect();
            let _ = write!(detail, "; {} failure(s): {}", self.failures.len(), shown.join(" | "));
        }
        Check { criterion, name, passed, detail }
    }
}

pub const CRITERIA: [u8; 7] = [1, 2, 3, 4, 5, 6, 7];

pub fn run(criterion: u8) -> Option<Check> {
    Some(match criterion {
        1 => forward_matches_reference(),
        2 => distributions_normalize(),
        3 => tokenizer_round_trip(),
        4 => ols_matches_normal_equations(),
        5 => permutation_matches_enumeration(),
        6 => bootstrap_coverage(),
        7 => memory_checks(),
        _ => return None,
    })
}

pub fn run_all() -> Vec<Check> {
    CRITERIA.iter().filter_map(|&c| run(c)).collect()
}

fn random_config(rng: &mut impl Rng) -> ModelConfig {
    let n_heads = rng.gen_range(1..=4);
    ModelConfig {
        n_layers: rng.gen_range(1..=3),
        n_heads,
        d_model: n_heads * rng.gen_range(2..=6),
        d_mlp: if rng.gen_bool(0.5) { Some(rng.gen_range(4..=24)) } else { None },
        vocab_size: rng.gen_range(5..=40),
        max_positions: rng.gen_range(4..=16),
        layer_norm_epsilon: 1e-5,
        tied_output_head: rng.gen_bool(0.5),
        gelu: if rng.gen_bool(0.5) { Gelu::Tanh } else { Gelu::Erf },
    }
}

fn random_tokens(rng: &mut impl Rng, len: usize, vocab: usize) -> Vec<u32> {
    (0..len).map(|_| rng.gen_range(0..vocab as u32)).collect()
}

fn forward_matches_reference() -> Check {
    let mut t = Tally::new();
    let mut worst = 0.0f64;
    for m in 0..20u64 {
        let mut rng = seed::stream(ROOT_SEED, "reference-model", m);
        let cfg = random_config(&mut rng);
        let store = random_store(&cfg, seed::derive_seed(ROOT_SEED, "weights", m), 0.5);
        let model: Model<f32> = match Model::from_store(&store, cfg.clone()) {
            Ok(model) => model,
            Err(e) => {
                t.require(false, || format!("model {m}: {e}"));
                continue;
            }
        };
        let len = rng.gen_range(1..=cfg.max_positions);
        let tokens = random_tokens(&mut rng, len, cfg.vocab_size);
        let out = model.forward(&tokens, false).expect("valid tokens");
        let reference = oracle::naive_forward(&store, &cfg, &tokens);
        for (p, row) in reference.iter().enumerate() {
            let got = out.logits_row(p).expect("every row present");
            for (a, b) in got.iter().zip(row) {
                worst = worst.max((*a as f64 - b).abs());
            }
        }

        // later tokens must not move earlier logits
        if len >= 2 {
            let cut = rng.gen_range(0..len - 1);
            let mut perturbed = tokens.clone();
            for tok in &mut perturbed[cut + 1..] {
                *tok = (*tok + 1 + rng.gen_range(0..cfg.vocab_size as u32 - 1)) % cfg.vocab_size as u32;
            }
            let out2 = model.forward(&perturbed, false).expect("valid tokens");
            for p in 0..=cut {
                let same = out.logits_row(p).unwrap() == out2.logits_row(p).unwrap();
                t.require(same, || format!("model {m}: position {p} changed after perturbing {}..", cut + 1));
            }
        }
    }
    t.require(worst < 1e-5, || format!("max abs logit error {worst:e}"));
    t.note(format!("20 models, max abs logit error {worst:.2e}"));
    t.finish(1, "forward pass matches naive reference; causal mask holds")
}

fn zero_store(cfg: &ModelConfig) -> NamedTensorStore {
    let mut store = NamedTensorStore::new();
    for (name, shape) in cfg.expected_tensors() {
        let n: usize = shape.iter().product();
        store.insert(name, Tensor::from_f32(shape, &vec![0.0; n])).expect("consistent");
    }
    store
}

fn distributions_normalize() -> Check {
    let mut t = Tally::new();
    let (mut worst_attn, mut worst_dist) = (0.0f64, 0.0f64);
    for m in 0..10u64 {
        let mut rng = seed::stream(ROOT_SEED, "normalization", m);
        let cfg = random_config(&mut rng);
        let store = random_store(&cfg, seed::derive_seed(ROOT_SEED, "normalization-weights", m), 1.0);
        let model: Model<f32> = Model::from_store(&store, cfg.clone()).expect("random store is complete");
        let len = rng.gen_range(1..=cfg.max_positions);
        let tokens = random_tokens(&mut rng, len, cfg.vocab_size);
        let out = model
            .forward_with(&tokens, &ForwardOptions::all_attention(&cfg))
            .expect("valid tokens");
        for layer in 1..=cfg.n_layers {
            for h in 0..cfg.n_heads {
                for q in 0..len {
                    let mut s = 0.0f64;
                    for k in 0..len {
                        let a = out.attention(layer, h, q, k).expect("layer kept") as f64;
                        if k > q {
                            t.require(a == 0.0, || format!("model {m}: weight above diagonal at ({q},{k})"));
                        }
                        s += a;
                    }
                    worst_attn = worst_attn.max((s - 1.0).abs());
                }
            }
        }
        for p in 0..len {
            let s: f64 = out.next_token_distribution(p).unwrap().iter().sum();
            worst_dist = worst_dist.max((s - 1.0).abs());
        }
    }
    t.require(worst_attn <= 1e-5, || format!("attention row sum off by {worst_attn:e}"));
    t.require(worst_dist <= 1e-6, || format!("distribution sum off by {worst_dist:e}"));

    let cfg = ModelConfig { vocab_size: 50, ..ModelConfig::tiny(50) };
    let model: Model<f32> = Model::from_store(&zero_store(&cfg), cfg.clone()).expect("zero store is complete");
    let out = model.forward(&[3, 1, 4, 1, 5, 9], false).unwrap();
    let ln_v = (cfg.vocab_size as f64).ln();
    let mut worst_uniform = 0.0f64;
    for p in 0..6 {
        worst_uniform = worst_uniform.max((out.nll(p, 7).unwrap() - ln_v).abs());
    }
    t.require(worst_uniform <= 1e-9, || format!("uniform NLL off ln V by {worst_uniform:e}"));
    t.note(format!(
        "attention {worst_attn:.1e}, distribution {worst_dist:.1e}, uniform NLL {worst_uniform:.1e}"
    ));
    t.finish(2, "attention rows and distributions normalize; uniform model gives ln V")
}

/// Byte vocabulary extended with a handful of common English merges and one
/// two-byte character.
pub fn demo_vocab() -> Vocab {
    let base = Vocab::bytes_only();
    let merges: Vec<(String, String)> = [
        ("Ġ", "t"), ("h", "e"), ("Ġt", "he"), ("i", "n"), ("Ġ", "a"), ("e", "r"), ("o", "n"),
        ("Ġ", "s"), ("r", "e"), ("a", "t"), ("Ġ", "w"), ("o", "u"), ("in", "g"), ("Ġa", "nd"),
        ("n", "d"), ("Ã", "©"), ("Ġ", "Ġ"), ("ĠĠ", "ĠĠ"), ("e", "d"), ("Ġth", "e"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let mut tokens: Vec<(String, u32)> = (0..base.len() as u32)
        .map(|i| (base.token(i).expect("dense").to_string(), i))
        .collect();
    for (a, b) in &merges {
        let joined = format!("{a}{b}");
        if !tokens.iter().any(|(s, _)| *s == joined) {
            let id = tokens.len() as u32;
            tokens.push((joined, id));
        }
    }
    // merges whose left side never forms are harmless: they just never fire
    let usable: Vec<(String, String)> = merges
        .into_iter()
        .filter(|(a, b)| tokens.iter().any(|(s, _)| s == a) && tokens.iter().any(|(s, _)| s == b))
        .collect();
    Vocab::from_parts(tokens, usable).expect("demo vocabulary is consistent")
}

fn random_text(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "the", " the", "and", " and", "ing", "er", "'s", "'re", "'ll", " ", "  ", "\n", "\t", "\r\n", ",", ".",
        "!?", "42", " 7", "é", "café", "日本", "🙂", "\u{0}", "ñ", "Ω", "\u{200b}", "x", "Q", " w", "ou",
    ];
    let n = rng.gen_range(0..30);
    let mut s = String::new();
    for _ in 0..n {
        if rng.gen_bool(0.2) {
            s.push(rng.gen::<char>());
        } else {
            s.push_str(PIECES.choose(rng).expect("non-empty"));
        }
    }
    s
}

/// Hand-traced encodings of the toy vocabulary.
fn toy_traces(t: &mut Tally) {
    let tokens: Vec<(String, u32)> = ["l", "o", "w", "lo", "low", "Ġ", "Ġlow", "Ġl", "e", "r"]
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i as u32))
        .collect();
    let merges = vec![
        ("l".to_string(), "o".to_string()),
        ("lo".to_string(), "w".to_string()),
        ("Ġ".to_string(), "low".to_string()),
    ];
    let vocab = Vocab::from_parts(tokens, merges).expect("toy vocabulary");
    let cases: [(&str, &[&str]); 4] = [
        ("low", &["low"]),
        ("low low", &["low", "Ġlow"]),
        ("lower", &["low", "e", "r"]),
        ("lol", &["lo", "l"]),
    ];
    for (text, expected) in cases {
        let got: Vec<String> = match vocab.encode(text) {
            Ok(seq) => seq.ids.iter().map(|&i| vocab.token(i).unwrap_or("?").to_string()).collect(),
            Err(e) => vec![format!("error: {e}")],
        };
        t.require(got == expected, || format!("toy {text:?}: {got:?} != {expected:?}"));
    }
}

fn tokenizer_round_trip() -> Check {
    let mut t = Tally::new();
    let vocab = demo_vocab();
    let mut rng = seed::stream(ROOT_SEED, "tokenizer", 0);
    let mut merged = 0usize;
    for i in 0..1000 {
        let text = random_text(&mut rng);
        match vocab.encode(&text) {
            Ok(seq) => {
                merged += seq.ids.iter().filter(|&&id| id >= 256).count();
                let back = vocab.decode_bytes(&seq.ids);
                t.require(back.as_deref().ok() == Some(text.as_bytes()), || format!("string {i}: {text:?}"));
                let covered: usize = seq.offsets.iter().map(|(a, b)| b - a).sum();
                t.require(covered == text.len(), || format!("string {i}: offsets cover {covered} of {} bytes", text.len()));
            }
            Err(e) => t.require(false, || format!("string {i}: {e}")),
        }
    }
    t.require(merged > 0, || "no merge ever fired".into());
    toy_traces(&mut t);
    t.note(format!("1000 strings, {merged} merged tokens"));
    t.finish(3, "tokenizer round-trips bytes; toy merge traces")
}

fn ols_matches_normal_equations() -> Check {
    let mut t = Tally::new();
    let (mut worst_coef, mut worst_orth) = (0.0f64, 0.0f64);
    for d in 0..100u64 {
        let mut rng = seed::stream(ROOT_SEED, "ols", d);
        let n = rng.gen_range(10..60);
        let p = rng.gen_range(1..=5);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 0.5 + r.iter().enumerate().map(|(j, v)| (j as f64 - 1.5) * v).sum::<f64>() + rng.gen_range(-1.0..1.0))
            .collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let design = Design::new(names, x.concat(), y.clone()).expect("n > p");
        let fit = match ols_fit(&design) {
            Ok(fit) => fit,
            Err(e) => {
                t.require(false, || format!("design {d}: {e}"));
                continue;
            }
        };
        let reference = oracle::normal_equations(&x, &y);
        let got: Vec<f64> = std::iter::once(fit.intercept).chain(fit.beta.iter().copied()).collect();
        for (a, b) in got.iter().zip(&reference) {
            worst_coef = worst_coef.max((a - b).abs());
        }
        let e_norm = fit.residuals.iter().map(|e| e * e).sum::<f64>().sqrt().max(1e-300);
        for j in 0..=p {
            let col: Vec<f64> = (0..n).map(|i| if j == 0 { 1.0 } else { x[i][j - 1] }).collect();
            let c_norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(c, e)| c * e).sum();
            worst_orth = worst_orth.max(dot.abs() / (c_norm * e_norm));
        }
    }
    t.require(worst_coef < 1e-8, || format!("coefficient error {worst_coef:e}"));
    t.require(worst_orth < 1e-8, || format!("scaled residual dot product {worst_orth:e}"));

    let mut worst_r2 = 0.0f64;
    for d in 0..20u64 {
        let mut rng = seed::stream(ROOT_SEED, "simple-regression", d);
        let n = rng.gen_range(5..50);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.gen_range(-1.0..1.0)).collect();
        let design = Design::new(vec!["x".into()], x.clone(), y.clone()).expect("n > 1");
        let r2 = ols_fit(&design).expect("non-degenerate").r_squared;
        worst_r2 = worst_r2.max((r2 - pearson(&x, &y).powi(2)).abs());
    }
    t.require(worst_r2 <= 1e-10, || format!("R² vs r² differs by {worst_r2:e}"));
    t.note(format!("coef {worst_coef:.1e}, orthogonality {worst_orth:.1e}, R² {worst_r2:.1e}"));
    t.finish(4, "OLS matches normal equations; residuals orthogonal; R² = r²")
}

fn permutation_matches_enumeration() -> Check {
    const N: usize = 10_000;
    let tol = 2.0 / (N as f64).sqrt();
    let mut t = Tally::new();
    let mut instances: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (vec![10.0, 10.0, 10.0], vec![0.0, 0.0, 0.0]),
        (vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]),
        (vec![3.0, 1.0, 2.0], vec![2.0, 3.0, 1.0]),
        (vec![5.0, 1.0], vec![2.0, 3.0, 4.0, 0.0]),
    ];
    for i in 0..8u64 {
        let mut rng = seed::stream(ROOT_SEED, "permutation-instance", i);
        let k = rng.gen_range(1..=5);
        let vals: Vec<f64> = (0..6).map(|_| rng.gen_range(-5.0..5.0)).collect();
        instances.push((vals[..k].to_vec(), vals[k..].to_vec()));
    }
    let mut worst = 0.0f64;
    for (i, (a, b)) in instances.iter().enumerate() {
        let sample = GroupedSample::new(a, b);
        for (tails, two) in [(Tails::One, false), (Tails::Two, true)] {
            let exact = oracle::exhaustive_permutation_p(a, b, two);
            let got = permutation_test(&sample, |s| Ok(s.mean_difference()), Resample::LabelShuffle, N, tails, ROOT_SEED + i as u64)
                .expect("valid test");
            worst = worst.max((got.p_value - exact).abs());
            t.require((got.p_value - exact).abs() <= tol, || {
                format!("instance {i} {tails:?}: {} vs exact {exact}", got.p_value)
            });
        }
    }
    let flat = GroupedSample::new(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
    let constant = permutation_test(&flat, |_| Ok(0.25), Resample::LabelShuffle, 500, Tails::Two, ROOT_SEED).expect("valid test");
    t.require(constant.p_value == 1.0, || format!("constant statistic gave p = {}", constant.p_value));
    t.note(format!("{} instances, max |Δp| {worst:.4} (tolerance {tol})", instances.len()));
    t.finish(5, "permutation p-values match exhaustive enumeration")
}

fn bootstrap_coverage() -> Check {
    const REPS: u64 = 200;
    let mut t = Tally::new();
    let mut covered = 0usize;
    for r in 0..REPS {
        let mut rng = seed::stream(ROOT_SEED, "coverage-data", r);
        let sample: Vec<f64> = (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ci = bootstrap_ci(
            &sample,
            |rows| Ok(vec![rows.iter().sum::<f64>() / rows.len() as f64]),
            1000,
            0.95,
            seed::derive_seed(ROOT_SEED, "coverage-boot", r),
        );
        match ci {
            Ok(ci) => {
                let (lo, hi) = ci.intervals[0];
                if lo <= 0.0 && 0.0 <= hi {
                    covered += 1;
                }
            }
            Err(e) => t.require(false, || format!("repetition {r}: {e}")),
        }
    }
    let rate = covered as f64 / REPS as f64;
    t.require((rate - 0.95).abs() <= 0.04, || format!("coverage {rate}"));
    t.note(format!("coverage {rate:.3} over {REPS} repetitions"));
    t.finish(6, "bootstrap 95% interval coverage")
}

fn retrieval_matches_scan(t: &mut Tally) {
    for s in 0..100u64 {
        let mut rng = seed::stream(ROOT_SEED, "memory-store", s);
        let dim = rng.gen_range(1..=8);
        let n = rng.gen_range(0..80);
        let mut store = MemoryStore::<f32>::dynamic(dim, None);
        let mut keys: Vec<(Vec<f64>, usize)> = Vec::new();
        for step in 0..n {
            // occasional duplicates exercise the tie-break
            let key: Vec<f32> = if step > 0 && rng.gen_bool(0.15) {
                store.entries()[rng.gen_range(0..store.len())].key.clone()
            } else if rng.gen_bool(0.05) {
                vec![0.0; dim]
            } else {
                (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
            };
            keys.push((key.iter().map(|&v| v as f64).collect(), step));
            store
                .write(MemoryEntry { key, value: step as u32, surprisal_at_write: 1.0, write_step: step })
                .expect("valid entry");
        }
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q64: Vec<f64> = query.iter().map(|&v| v as f64).collect();
        let k = rng.gen_range(1..=12);
        for (metric, cosine) in [(Metric::L2, false), (Metric::Cosine, true)] {
            let got: Vec<(usize, f64)> = store
                .retrieve(&query, k, metric)
                .expect("valid query")
                .iter()
                .map(|nb| (nb.entry.write_step, nb.distance))
                .collect();
            let expected = oracle::scan_nearest(&keys, &q64, k, cosine);
            let same = got.len() == expected.len()
                && got.iter().zip(&expected).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-9);
            t.require(same, || format!("store {s} {metric:?}: {got:?} vs {expected:?}"));
        }
    }
}

fn eviction_traces(t: &mut Tally) {
    // (capacity, surprisals in write order, surviving write steps)
    let scripts: [(usize, &[f64], &[usize]); 4] = [
        (3, &[5.0, 1.0, 3.0, 1.0, 4.0, 0.5], &[0, 4, 5]),
        (2, &[2.0, 2.0, 2.0], &[1, 2]),
        (1, &[9.0, 0.0, 3.0], &[2]),
        (4, &[1.0, 2.0, 3.0], &[0, 1, 2]),
    ];
    for (i, (cap, surprisals, survivors)) in scripts.iter().enumerate() {
        let mut store = MemoryStore::<f32>::dynamic(1, Some(*cap));
        for (step, &s) in surprisals.iter().enumerate() {
            store
                .write(MemoryEntry { key: vec![step as f32], value: 0, surprisal_at_write: s, write_step: step })
                .expect("valid entry");
        }
        let got: Vec<usize> = store.entries().iter().map(|e| e.write_step).collect();
        t.require(got == *survivors, || format!("script {i}: kept {got:?}, expected {survivors:?}"));
        let evicted = surprisals.len().saturating_sub(*cap);
        t.require(store.evictions() == evicted, || format!("script {i}: {} evictions", store.evictions()));
    }
}

fn lambda_zero_identity(t: &mut Tally) {
    let mut rng = seed::stream(ROOT_SEED, "lambda-zero", 0);
    for _ in 0..50 {
        let v = rng.gen_range(2..30);
        let raw: Vec<f64> = (0..v).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let nbrs: Vec<(u32, f64)> = (0..rng.gen_range(0..6)).map(|_| (rng.gen_range(0..v as u32), rng.gen())).collect();
        let out = interpolate(&p, &nbrs, 0.0, 1.0).expect("valid inputs");
        t.require(out.probs == p, || "λ = 0 changed p_lm".into());
    }
}

/// A random byte-level model reads a 500-token passage twice; the second
/// reading can retrieve the first from memory.
fn repeated_passage(t: &mut Tally) -> Option<(f64, f64)> {
    let cfg = ModelConfig {
        n_layers: 1,
        n_heads: 2,
        d_model: 16,
        d_mlp: Some(32),
        vocab_size: 256,
        max_positions: 256,
        layer_norm_epsilon: 1e-5,
        tied_output_head: true,
        gelu: Gelu::Tanh,
    };
    let model: Model<f32> = Model::from_store(&random_store(&cfg, ROOT_SEED, 0.5), cfg).expect("complete store");
    let mut rng = seed::stream(ROOT_SEED, "passage", 0);
    let passage: Vec<u32> = (0..500).map(|_| rng.gen_range(32..127)).collect();
    let ids: Vec<u32> = passage.iter().chain(&passage).copied().collect();
    let config = EvalConfig {
        window: 256,
        k: 8,
        lambda: 0.5,
        tau: 1.0,
        metric: Metric::L2,
        capacity: None,
        policy: EncodingPolicy::Always,
    };
    let report = match eval_tokens(&model, &ids, &config) {
        Ok(r) => r,
        Err(e) => {
            t.require(false, || format!("stress test: {e}"));
            return None;
        }
    };
    let mean = |lo: usize, hi: usize| {
        let xs: Vec<f64> = report
            .positions
            .iter()
            .filter(|p| (lo..hi).contains(&p.position))
            .map(|p| p.nll_memory)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let (first, second) = (mean(1, 500), mean(501, 1000));
    t.require(second < first, || format!("second reading {second:.3} not below first {first:.3}"));
    Some((first, second))
}

fn memory_checks() -> Check {
    let mut t = Tally::new();
    retrieval_matches_scan(&mut t);
    lambda_zero_identity(&mut t);
    eviction_traces(&mut t);
    if let Some((first, second)) = repeated_passage(&mut t) {
        t.note(format!("repeated passage mean NLL {first:.3} -> {second:.3}"));
    }
    t.note("100 random stores, 4 eviction scripts".into());
    t.finish(7, "memory retrieval, interpolation, eviction, repeated passage")
}
