//! Token and word surprisal with maximal-context windowing, and per-word
//! received-attention statistics.
//!
//! Target token `i` is scored with as much preceding context as fits: for
//! `i < window` one forward pass over the first `window` tokens supplies
//! every NLL; for `i >= window` a fresh pass over tokens
//! `[i - window + 1, i]` supplies the NLL of token `i` (stride one).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardOptions, ForwardOutput, Model};
use crate::scalar::Scalar;
use crate::tokenizer::{align_words, whitespace_words, Vocab, WordSpan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenNll {
    pub position: usize,
    pub token_id: u32,
    /// Nats.
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordRecord {
    pub word_index: usize,
    pub word: String,
    /// Sum of the word's sub-token NLLs that exist, in nats.
    pub surprisal: f64,
    pub n_subtokens: usize,
    /// Set when part of the span has no NLL (the document-initial token).
    pub excluded: bool,
    /// 1-based layer → received-attention statistic.
    pub attention: BTreeMap<usize, Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    #[default]
    Mean,
    Sum,
    Max,
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionMode::Mean => "mean",
            AttentionMode::Sum => "sum",
            AttentionMode::Max => "max",
        })
    }
}

impl FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(AttentionMode::Mean),
            "sum" => Ok(AttentionMode::Sum),
            "max" => Ok(AttentionMode::Max),
            other => Err(Error::Precondition(format!(
                "unknown attention mode {other:?} (expected mean, sum or max)"
            ))),
        }
    }
}

/// One forward pass of the windowing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPass {
    /// Global index of the first input token.
    pub start: usize,
    /// One past the last input token.
    pub end: usize,
    /// Global target positions scored by this pass.
    pub first_target: usize,
}

impl WindowPass {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// The passes needed to score every token `1..n_tokens`.
pub fn plan_windows(n_tokens: usize, window: usize) -> Vec<WindowPass> {
    let first_end = n_tokens.min(window);
    let mut passes = vec![WindowPass {
        start: 0,
        end: first_end,
        first_target: 1,
    }];
    passes.extend((window..n_tokens).map(|i| WindowPass {
        start: i + 1 - window,
        end: i + 1,
        first_target: i,
    }));
    passes
}

/// Index into [`plan_windows`] of the pass that scores `target`.
pub fn pass_for_target(target: usize, window: usize) -> usize {
    if target < window {
        0
    } else {
        target + 1 - window
    }
}

fn check_window<T: Scalar>(model: &Model<T>, n_tokens: usize, window: usize) -> Result<()> {
    if n_tokens < 2 {
        return Err(Error::SequenceLength {
            len: n_tokens,
            min: 2,
            max: usize::MAX,
        });
    }
    let max = model.config().max_positions;
    if window < 2 || window > max {
        return Err(Error::OutOfRange {
            what: "window",
            index: window,
            range: format!("[2, {max}]"),
        });
    }
    Ok(())
}

fn nlls_from_pass<T: Scalar>(out: &ForwardOutput<T>, pass: &WindowPass, ids: &[u32]) -> Result<Vec<TokenNll>> {
    (pass.first_target..pass.end)
        .map(|target| {
            let local = target - pass.start;
            let nll = out.nll(local - 1, ids[target])?;
            Ok(TokenNll {
                position: target,
                token_id: ids[target],
                nll,
            })
        })
        .collect()
}

/// Per-token NLL for every position except the first.
pub fn token_nlls<T: Scalar>(model: &Model<T>, ids: &[u32], window: usize) -> Result<Vec<TokenNll>> {
    check_window(model, ids.len(), window)?;
    let mut nlls = Vec::with_capacity(ids.len() - 1);
    for pass in plan_windows(ids.len(), window) {
        let opts = ForwardOptions {
            logits_from: pass.first_target - pass.start - 1,
            ..Default::default()
        };
        let out = model.forward_with(&ids[pass.start..pass.end], &opts)?;
        nlls.extend(nlls_from_pass(&out, &pass, ids)?);
    }
    Ok(nlls)
}

/// Sums sub-token NLLs into word surprisal. A word is excluded when part of
/// its span has no NLL, which may only happen at position 0.
pub fn word_surprisal(nlls: &[TokenNll], spans: &[WordSpan]) -> Result<Vec<WordRecord>> {
    let by_pos: BTreeMap<usize, f64> = nlls.iter().map(|n| (n.position, n.nll)).collect();
    spans
        .iter()
        .map(|span| {
            let (lo, hi) = span.token_range;
            let mut surprisal = 0.0;
            let mut excluded = false;
            for pos in lo..hi {
                match by_pos.get(&pos) {
                    Some(v) => surprisal += v,
                    None if pos == 0 => excluded = true,
                    None => {
                        return Err(Error::Integrity(format!(
                            "word {} ({:?}) references token {pos}, which has no NLL",
                            span.word_index, span.word
                        )))
                    }
                }
            }
            Ok(WordRecord {
                word_index: span.word_index,
                word: span.word.clone(),
                surprisal,
                n_subtokens: hi - lo,
                excluded,
                attention: BTreeMap::new(),
            })
        })
        .collect()
}

/// Attention each key position receives from later queries, averaged over
/// heads and then over those queries. The last position has no later
/// query and yields `None`.
pub fn received_attention<T: Scalar>(out: &ForwardOutput<T>, layer: usize) -> Result<Vec<Option<f64>>> {
    if layer == 0 || layer > out.n_layers {
        return Err(Error::OutOfRange {
            what: "layer",
            index: layer,
            range: format!("[1, {}]", out.n_layers),
        });
    }
    let weights = out.attentions.get(&layer).ok_or_else(|| {
        Error::Precondition(format!("attention for layer {layer} was not captured"))
    })?;
    let t = out.seq_len;
    let h = out.n_heads;
    Ok((0..t)
        .map(|k| {
            if k + 1 >= t {
                return None;
            }
            let total: f64 = (k + 1..t)
                .map(|q| (0..h).map(|head| weights[(head * t + q) * t + k].f64()).sum::<f64>())
                .sum();
            Some(total / (h * (t - k - 1)) as f64)
        })
        .collect())
}

/// Aggregates per-token statistics over each span's tokens.
pub fn aggregate_spans(per_token: &[Option<f64>], spans: &[WordSpan], mode: AttentionMode) -> Vec<Option<f64>> {
    spans
        .iter()
        .map(|span| {
            let (lo, hi) = span.token_range;
            let vals: Vec<f64> = per_token[lo..hi].iter().flatten().copied().collect();
            if vals.is_empty() {
                return None;
            }
            Some(match mode {
                AttentionMode::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                AttentionMode::Sum => vals.iter().sum(),
                AttentionMode::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}

/// Per-word received attention in one forward pass; span ranges index the
/// pass's own tokens.
pub fn word_attention<T: Scalar>(
    out: &ForwardOutput<T>,
    spans: &[WordSpan],
    layer: usize,
    mode: AttentionMode,
) -> Result<Vec<Option<f64>>> {
    let per_token = received_attention(out, layer)?;
    if let Some(span) = spans.iter().find(|s| s.token_range.1 > out.seq_len) {
        return Err(Error::OutOfRange {
            what: "token",
            index: span.token_range.1 - 1,
            range: format!("[0, {})", out.seq_len),
        });
    }
    Ok(aggregate_spans(&per_token, spans, mode))
}

#[derive(Debug, Clone, Serialize)]
pub struct SurprisalRun {
    pub nlls: Vec<TokenNll>,
    pub words: Vec<WordRecord>,
    pub n_passes: usize,
    pub window: usize,
    pub attention_mode: AttentionMode,
}

impl SurprisalRun {
    pub fn perplexity(&self) -> f64 {
        perplexity(&self.nlls)
    }
}

pub fn perplexity(nlls: &[TokenNll]) -> f64 {
    if nlls.is_empty() {
        return f64::NAN;
    }
    (nlls.iter().map(|n| n.nll).sum::<f64>() / nlls.len() as f64).exp()
}

/// Token NLLs, word surprisal and per-layer word attention in one sweep.
///
/// A word's attention statistic is computed inside the pass that scored its
/// last sub-token, so words beyond the window use their own sliding pass.
pub fn analyze_tokens<T: Scalar>(
    model: &Model<T>,
    ids: &[u32],
    spans: &[WordSpan],
    window: usize,
    layers: &[usize],
    mode: AttentionMode,
) -> Result<SurprisalRun> {
    check_window(model, ids.len(), window)?;
    let n_layers = model.config().n_layers;
    if let Some(&bad) = layers.iter().find(|&&l| l == 0 || l > n_layers) {
        return Err(Error::OutOfRange {
            what: "layer",
            index: bad,
            range: format!("[1, {n_layers}]"),
        });
    }
    if let Some(span) = spans.iter().find(|s| s.token_range.1 > ids.len()) {
        return Err(Error::Integrity(format!(
            "word {} extends past the token sequence",
            span.word_index
        )));
    }

    let passes = plan_windows(ids.len(), window);
    let mut words_by_pass: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    if !layers.is_empty() {
        for (w, span) in spans.iter().enumerate() {
            let last = span.token_range.1 - 1;
            words_by_pass
                .entry(pass_for_target(last.max(1), window))
                .or_default()
                .push(w);
        }
    }

    let mut nlls = Vec::with_capacity(ids.len() - 1);
    let mut attention: Vec<BTreeMap<usize, Option<f64>>> = vec![BTreeMap::new(); spans.len()];
    for (p, pass) in passes.iter().enumerate() {
        let assigned = words_by_pass.get(&p);
        let opts = ForwardOptions {
            attention_layers: if assigned.is_some() { layers.to_vec() } else { Vec::new() },
            keep_hidden: false,
            logits_from: pass.first_target - pass.start - 1,
        };
        let out = model.forward_with(&ids[pass.start..pass.end], &opts)?;
        nlls.extend(nlls_from_pass(&out, pass, ids)?);

        if let Some(assigned) = assigned {
            let local: Vec<WordSpan> = assigned
                .iter()
                .map(|&w| {
                    let s = &spans[w];
                    WordSpan {
                        token_range: (s.token_range.0 - pass.start, s.token_range.1 - pass.start),
                        ..s.clone()
                    }
                })
                .collect();
            for &layer in layers {
                let stats = word_attention(&out, &local, layer, mode)?;
                for (&w, stat) in assigned.iter().zip(stats) {
                    attention[w].insert(layer, stat);
                }
            }
        }
    }

    let mut words = word_surprisal(&nlls, spans)?;
    for (record, attn) in words.iter_mut().zip(attention) {
        record.attention = attn;
    }
    Ok(SurprisalRun {
        nlls,
        words,
        n_passes: passes.len(),
        window,
        attention_mode: mode,
    })
}

/// Tokenizes `text`, aligns its whitespace-delimited words and runs
/// [`analyze_tokens`] over the whole sequence.
pub fn analyze_text<T: Scalar>(
    model: &Model<T>,
    vocab: &Vocab,
    text: &str,
    window: usize,
    layers: &[usize],
    mode: AttentionMode,
) -> Result<SurprisalRun> {
    let seq = vocab.encode(text)?;
    let words = whitespace_words(text);
    let alignment = align_words(text, &seq, &words)?;
    analyze_tokens(model, &seq.ids, &alignment.spans, window, layers, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_store, ModelConfig, NamedTensorStore, Tensor};

    fn zero_model(vocab: usize, max_positions: usize) -> Model<f32> {
        let mut cfg = ModelConfig::tiny(vocab);
        cfg.max_positions = max_positions;
        let mut store = NamedTensorStore::new();
        for (name, shape) in cfg.expected_tensors() {
            let n = shape.iter().product();
            store.insert(name, Tensor::from_f32(shape, &vec![0.0; n])).unwrap();
        }
        Model::from_store(&store, cfg).unwrap()
    }

    fn random_model(seed: u64, max_positions: usize) -> Model<f64> {
        let mut cfg = ModelConfig::tiny(16);
        cfg.n_layers = 2;
        cfg.max_positions = max_positions;
        Model::from_store(&random_store(&cfg, seed, 0.5), cfg).unwrap()
    }

    fn span(i: usize, lo: usize, hi: usize) -> WordSpan {
        WordSpan {
            word_index: i,
            word: format!("w{i}"),
            token_range: (lo, hi),
        }
    }

    #[test]
    fn window_plan_counts() {
        let passes = plan_windows(1033, 1024);
        assert_eq!(passes.len(), 10);
        assert_eq!(passes[0], WindowPass { start: 0, end: 1024, first_target: 1 });
        assert_eq!(passes[1], WindowPass { start: 1, end: 1025, first_target: 1024 });
        assert_eq!(passes[9], WindowPass { start: 9, end: 1033, first_target: 1032 });
        let scored: usize = passes.iter().map(|p| p.end - p.first_target).sum();
        assert_eq!(scored, 1032);
        assert_eq!(plan_windows(5, 1024).len(), 1);
    }

    #[test]
    fn uniform_model_scores_ln_v() {
        let model = zero_model(16, 8);
        let ids: Vec<u32> = (0..12).map(|i| (i * 5 % 16) as u32).collect();
        let nlls = token_nlls(&model, &ids, 4).unwrap();
        assert_eq!(nlls.len(), 11);
        for n in nlls {
            assert!((n.nll - 16f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn windowed_matches_full_context_when_it_fits() {
        let model = random_model(3, 32);
        let ids: Vec<u32> = (0..20).map(|i| (i * 7 % 16) as u32).collect();
        let small = token_nlls(&model, &ids, 32).unwrap();
        let full = model.forward(&ids, false).unwrap();
        for n in &small {
            let expect = full.nll(n.position - 1, n.token_id).unwrap();
            assert!((n.nll - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sliding_pass_uses_last_window_tokens() {
        let model = random_model(5, 32);
        let ids: Vec<u32> = (0..14).map(|i| (i * 3 % 16) as u32).collect();
        let nlls = token_nlls(&model, &ids, 6).unwrap();
        let target = 11;
        let out = model.forward(&ids[6..12], false).unwrap();
        let expect = out.nll(4, ids[target]).unwrap();
        assert!((nlls[target - 1].nll - expect).abs() < 1e-12);
    }

    #[test]
    fn too_short_or_wide_window_rejected() {
        let model = zero_model(16, 8);
        assert!(token_nlls(&model, &[1], 4).is_err());
        assert!(token_nlls(&model, &[1, 2, 3], 9).is_err());
    }

    #[test]
    fn word_sums() {
        let nlls = [
            TokenNll { position: 1, token_id: 0, nll: 1.0 },
            TokenNll { position: 2, token_id: 0, nll: 0.5 },
            TokenNll { position: 3, token_id: 0, nll: 2.3 },
        ];
        let words = word_surprisal(&nlls, &[span(0, 0, 1), span(1, 1, 3), span(2, 3, 4)]).unwrap();
        assert!(words[0].excluded);
        assert_eq!(words[0].surprisal, 0.0);
        assert!((words[1].surprisal - 1.5).abs() < 1e-12);
        assert!((words[2].surprisal - 2.3).abs() < 1e-12);
        assert_eq!(words[1].n_subtokens, 2);
    }

    #[test]
    fn missing_mid_sequence_nll_is_integrity_error() {
        let nlls = [TokenNll { position: 1, token_id: 0, nll: 1.0 }];
        let err = word_surprisal(&nlls, &[span(0, 0, 1), span(1, 1, 3)]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    fn forced_output(weights: Vec<f32>, t: usize, heads: usize) -> ForwardOutput<f32> {
        let mut attentions = BTreeMap::new();
        attentions.insert(1, weights);
        ForwardOutput {
            seq_len: t,
            vocab_size: 1,
            n_layers: 1,
            n_heads: heads,
            d_model: heads,
            logits_from: t,
            logits: Vec::new(),
            attentions,
            hidden: None,
        }
    }

    #[test]
    fn forced_attention_on_first_token() {
        // two heads, T = 2, query 1 puts all weight on key 0
        let w = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let out = forced_output(w, 2, 2);
        let stats = word_attention(&out, &[span(0, 0, 1), span(1, 1, 2)], 1, AttentionMode::Mean).unwrap();
        assert_eq!(stats, vec![Some(1.0), None]);
    }

    #[test]
    fn uniform_attention_closed_form() {
        let t = 6;
        let mut w = vec![0.0f32; t * t];
        for q in 0..t {
            for k in 0..=q {
                w[q * t + k] = 1.0 / (q + 1) as f32;
            }
        }
        let out = forced_output(w, t, 1);
        let per_token = received_attention(&out, 1).unwrap();
        for k in 0..t - 1 {
            let expect = (k + 1..t).map(|q| 1.0 / (q + 1) as f64).sum::<f64>() / (t - k - 1) as f64;
            assert!((per_token[k].unwrap() - expect).abs() < 1e-6);
        }
        let spans = [span(0, 0, 2), span(1, 2, 5)];
        let mean = aggregate_spans(&per_token, &spans, AttentionMode::Mean);
        let sum = aggregate_spans(&per_token, &spans, AttentionMode::Sum);
        let max = aggregate_spans(&per_token, &spans, AttentionMode::Max);
        let a = per_token[0].unwrap();
        let b = per_token[1].unwrap();
        assert!((mean[0].unwrap() - (a + b) / 2.0).abs() < 1e-12);
        assert!((sum[0].unwrap() - (a + b)).abs() < 1e-12);
        assert_eq!(max[0].unwrap(), a.max(b));
    }

    #[test]
    fn layer_out_of_range() {
        let model = random_model(1, 16);
        let out = model.forward(&[1, 2, 3], true).unwrap();
        assert!(word_attention(&out, &[span(0, 0, 1)], 3, AttentionMode::Mean).is_err());
        assert!(word_attention(&out, &[span(0, 0, 1)], 0, AttentionMode::Mean).is_err());
        let err = analyze_tokens(&model, &[1, 2, 3], &[span(0, 0, 3)], 8, &[13], AttentionMode::Mean).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { what: "layer", .. }));
    }

    #[test]
    fn analysis_sums_match_token_nlls() {
        let model = random_model(9, 16);
        let ids: Vec<u32> = (0..30).map(|i| ((i * 11 + 3) % 16) as u32).collect();
        let spans: Vec<WordSpan> = (0..10).map(|w| span(w, 3 * w, 3 * w + 3)).collect();
        let run = analyze_tokens(&model, &ids, &spans, 8, &[1, 2], AttentionMode::Mean).unwrap();
        assert_eq!(run.n_passes, 1 + 30 - 8);
        let total_words: f64 = run.words.iter().map(|w| w.surprisal).sum();
        let total_tokens: f64 = run.nlls.iter().map(|n| n.nll).sum();
        assert!((total_words - total_tokens).abs() < 1e-9);
        assert_eq!(run.nlls, token_nlls(&model, &ids, 8).unwrap());
        for w in &run.words {
            assert_eq!(w.attention.len(), 2);
            // every word has a sub-token with a later query in its own pass
            assert!(w.attention[&1].is_some(), "word {}", w.word_index);
        }
    }
}
