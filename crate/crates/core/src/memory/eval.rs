use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::gate::{write_gate, EncodingPolicy, RunningStats};
use super::interpolate::interpolate;
use super::store::{MemoryEntry, MemoryStore, Metric};
use crate::error::{Error, Result};
use crate::model::{softmax, ForwardOptions, Model};
use crate::scalar::Scalar;
use crate::surprisal::plan_windows;
use crate::tokenizer::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window: usize,
    pub k: usize,
    pub lambda: f64,
    pub tau: f64,
    pub metric: Metric,
    pub capacity: Option<usize>,
    pub policy: EncodingPolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            window: 1024,
            k: 8,
            lambda: 0.25,
            tau: 1.0,
            metric: Metric::L2,
            capacity: Some(4096),
            policy: EncodingPolicy::Threshold { theta: 4.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositionNll {
    pub position: usize,
    pub token_id: u32,
    pub nll_baseline: f64,
    pub nll_memory: f64,
    pub neighbors: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n_tokens: usize,
    pub n_scored: usize,
    pub n_passes: usize,
    pub perplexity_memory: f64,
    pub perplexity_baseline: f64,
    pub mean_nll_memory: f64,
    pub mean_nll_baseline: f64,
    pub writes: usize,
    pub evictions: usize,
    pub final_store_size: usize,
    /// Positions where at least one neighbor was retrieved.
    pub retrievals: usize,
    /// Positions with `lambda > 0` but an empty memory.
    pub fallbacks: usize,
    /// Positions whose nearest neighbor's value was the actual next token.
    pub top1_hits: usize,
    pub mean_neighbors: f64,
    pub positions: Vec<PositionNll>,
}

fn nll_of(probs: &[f64], token: u32) -> f64 {
    -probs[token as usize].max(f64::MIN_POSITIVE).ln()
}

/// Streams `ids` with maximal-context windowing. Each target is scored by the
/// model alone and by the model interpolated with memory retrieved from
/// positions that have left the attention window. After scoring, the
/// predicting hidden state and the realized token are offered to the write
/// gate; accepted entries become retrievable once they fall out of the
/// window.
pub fn eval_tokens<T: Scalar>(model: &Model<T>, ids: &[u32], config: &EvalConfig) -> Result<EvalReport> {
    config.policy.validate()?;
    let max = model.config().max_positions;
    if config.window < 2 || config.window > max {
        return Err(Error::OutOfRange {
            what: "window",
            index: config.window,
            range: format!("[2, {max}]"),
        });
    }
    if ids.len() < 2 {
        return Err(Error::SequenceLength {
            len: ids.len(),
            min: 2,
            max: usize::MAX,
        });
    }
    if config.k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }

    let window = config.window;
    let mut store = MemoryStore::dynamic(model.config().d_model, config.capacity);
    let mut pending: VecDeque<MemoryEntry<T>> = VecDeque::new();
    let mut history = RunningStats::default();
    let mut positions = Vec::with_capacity(ids.len() - 1);
    let (mut writes, mut retrievals, mut fallbacks, mut hits, mut neighbor_total) = (0, 0, 0, 0, 0usize);
    let passes = plan_windows(ids.len(), window);

    for pass in &passes {
        let opts = ForwardOptions {
            attention_layers: Vec::new(),
            keep_hidden: true,
            logits_from: pass.first_target - pass.start - 1,
        };
        let out = model.forward_with(&ids[pass.start..pass.end], &opts)?;

        for target in pass.first_target..pass.end {
            let local = target - pass.start - 1;
            // keys from positions before the context window become visible
            let visible_before = (target + 1).saturating_sub(window);
            while pending.front().is_some_and(|e| e.write_step < visible_before) {
                let entry = pending.pop_front().expect("checked non-empty");
                store.write(entry)?;
            }

            let p_lm = softmax(out.logits_row(local)?);
            let query = out.hidden_row(local).expect("hidden states requested");
            let neighbors: Vec<(u32, f64)> = if store.is_empty() {
                Vec::new()
            } else {
                store
                    .retrieve(query, config.k, config.metric)?
                    .iter()
                    .map(|n| (n.entry.value, n.distance))
                    .collect()
            };
            let mixed = interpolate(&p_lm, &neighbors, config.lambda, config.tau)?;
            let token = ids[target];
            let nll_baseline = nll_of(&p_lm, token);
            let nll_memory = nll_of(&mixed.probs, token);

            if !neighbors.is_empty() {
                retrievals += 1;
                neighbor_total += neighbors.len();
                if neighbors[0].0 == token {
                    hits += 1;
                }
            }
            if mixed.fell_back {
                fallbacks += 1;
            }
            positions.push(PositionNll {
                position: target,
                token_id: token,
                nll_baseline,
                nll_memory,
                neighbors: neighbors.len(),
            });

            if write_gate(&config.policy, nll_baseline, &history) {
                pending.push_back(MemoryEntry {
                    key: query.to_vec(),
                    value: token,
                    surprisal_at_write: nll_baseline,
                    write_step: target - 1,
                });
                writes += 1;
            }
            history.observe(nll_baseline);
        }
    }

    let n = positions.len() as f64;
    let mean_nll_baseline = positions.iter().map(|p| p.nll_baseline).sum::<f64>() / n;
    let mean_nll_memory = positions.iter().map(|p| p.nll_memory).sum::<f64>() / n;
    Ok(EvalReport {
        n_tokens: ids.len(),
        n_scored: positions.len(),
        n_passes: passes.len(),
        perplexity_memory: mean_nll_memory.exp(),
        perplexity_baseline: mean_nll_baseline.exp(),
        mean_nll_memory,
        mean_nll_baseline,
        writes,
        evictions: store.evictions(),
        final_store_size: store.len(),
        retrievals,
        fallbacks,
        top1_hits: hits,
        mean_neighbors: if retrievals == 0 { 0.0 } else { neighbor_total as f64 / retrievals as f64 },
        positions,
    })
}

pub fn eval_long_text<T: Scalar>(model: &Model<T>, vocab: &Vocab, text: &str, config: &EvalConfig) -> Result<EvalReport> {
    let tokens = vocab.encode(text)?;
    eval_tokens(model, &tokens.ids, config)
}
