use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::config::{Gelu, ModelConfig};
use super::store::NamedTensorStore;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

struct Block<T> {
    ln1_g: Vec<T>,
    ln1_b: Vec<T>,
    qkv_w: Vec<T>,
    qkv_b: Vec<T>,
    attn_proj_w: Vec<T>,
    attn_proj_b: Vec<T>,
    ln2_g: Vec<T>,
    ln2_b: Vec<T>,
    fc_w: Vec<T>,
    fc_b: Vec<T>,
    mlp_proj_w: Vec<T>,
    mlp_proj_b: Vec<T>,
}

/// Pre-norm decoder-only transformer with learned positions and an optional
/// tied unembedding. Immutable after loading.
pub struct Model<T> {
    config: ModelConfig,
    wte: Vec<T>,
    wpe: Vec<T>,
    blocks: Vec<Block<T>>,
    lnf_g: Vec<T>,
    lnf_b: Vec<T>,
    lm_head: Option<Vec<T>>,
}

/// What a forward pass should return beyond logits.
#[derive(Debug, Clone, Default)]
pub struct ForwardOptions {
    /// 1-based layer indices whose attention weights are kept.
    pub attention_layers: Vec<usize>,
    /// Keep the final normalized hidden states (the unembedding input).
    pub keep_hidden: bool,
    /// Logits are computed only for positions `logits_from..T`.
    pub logits_from: usize,
}

impl ForwardOptions {
    pub fn all_attention(config: &ModelConfig) -> Self {
        ForwardOptions {
            attention_layers: (1..=config.n_layers).collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub seq_len: usize,
    pub vocab_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    /// First position with a logits row.
    pub logits_from: usize,
    /// Row-major `[(T - logits_from) × vocab_size]`.
    pub logits: Vec<T>,
    /// 1-based layer → row-major `[n_heads × T × T]`, query-major.
    pub attentions: BTreeMap<usize, Vec<T>>,
    /// Row-major `[T × d_model]` when requested.
    pub hidden: Option<Vec<T>>,
}

impl<T: Scalar> ForwardOutput<T> {
    pub fn logits_row(&self, position: usize) -> Result<&[T]> {
        if position < self.logits_from || position >= self.seq_len {
            return Err(Error::OutOfRange {
                what: "position",
                index: position,
                range: format!("[{}, {})", self.logits_from, self.seq_len),
            });
        }
        let r = position - self.logits_from;
        Ok(&self.logits[r * self.vocab_size..(r + 1) * self.vocab_size])
    }

    /// Attention weight of `query` on `key`, for a 1-based layer and a head.
    pub fn attention(&self, layer: usize, head: usize, query: usize, key: usize) -> Option<T> {
        let t = self.seq_len;
        self.attentions
            .get(&layer)
            .map(|a| a[(head * t + query) * t + key])
    }

    pub fn hidden_row(&self, position: usize) -> Option<&[T]> {
        let d = self.d_model;
        self.hidden
            .as_ref()
            .and_then(|h| h.get(position * d..(position + 1) * d))
    }

    /// Next-token distribution at `position`: softmax of its logits row.
    pub fn next_token_distribution(&self, position: usize) -> Result<Vec<f64>> {
        Ok(softmax(self.logits_row(position)?))
    }

    /// `-ln P(target | prefix up to position)`, in nats.
    pub fn nll(&self, position: usize, target: u32) -> Result<f64> {
        let row = self.logits_row(position)?;
        let x = row.get(target as usize).ok_or(Error::OutOfRange {
            what: "token id",
            index: target as usize,
            range: format!("[0, {})", row.len()),
        })?;
        Ok((log_sum_exp(row) - x.f64()).max(0.0))
    }
}

/// Max-subtracted softmax accumulated in `f64`.
pub fn softmax<T: Scalar>(row: &[T]) -> Vec<f64> {
    let max = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x.f64() - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_sum_exp<T: Scalar>(row: &[T]) -> f64 {
    let max = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x.f64() - max).exp()).sum::<f64>().ln()
}

fn layer_norm<T: Scalar>(x: &[T], rows: usize, g: &[T], b: &[T], eps: f64) -> Vec<T> {
    let d = g.len();
    let mut out = vec![T::zero(); rows * d];
    out.par_chunks_mut(d)
        .zip(x.par_chunks(d))
        .for_each(|(o, xr)| {
            let mean = xr.iter().map(|v| v.f64()).sum::<f64>() / d as f64;
            let var = xr.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..d {
                o[j] = T::of((xr[j].f64() - mean) * inv) * g[j] + b[j];
            }
        });
    out
}

/// `x[rows × n_in] · w[n_in × n_out] + bias`.
fn linear<T: Scalar>(x: &[T], n_in: usize, w: &[T], bias: &[T]) -> Vec<T> {
    let n_out = bias.len();
    let rows = x.len() / n_in;
    let mut out = vec![T::zero(); rows * n_out];
    out.par_chunks_mut(n_out)
        .zip(x.par_chunks(n_in))
        .for_each(|(o, xr)| {
            o.copy_from_slice(bias);
            for (k, &a) in xr.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let wr = &w[k * n_out..(k + 1) * n_out];
                for (oj, &wj) in o.iter_mut().zip(wr) {
                    *oj += a * wj;
                }
            }
        });
    out
}

fn gelu<T: Scalar>(x: T, kind: Gelu) -> T {
    let v = x.f64();
    let y = match kind {
        Gelu::Tanh => {
            let c = (2.0 / std::f64::consts::PI).sqrt();
            0.5 * v * (1.0 + (c * (v + 0.044715 * v * v * v)).tanh())
        }
        Gelu::Erf => 0.5 * v * (1.0 + libm::erf(v / std::f64::consts::SQRT_2)),
    };
    T::of(y)
}

impl<T: Scalar> Model<T> {
    /// Builds a model from a tensor store, validating every tensor's
    /// presence and shape against `config`.
    pub fn from_store(store: &NamedTensorStore, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let expected: BTreeMap<String, Vec<usize>> = config.expected_tensors().into_iter().collect();
        let fetch = |name: String| -> Result<Vec<T>> {
            let t = store
                .get(&name)
                .or_else(|| store.get(&format!("transformer.{name}")))
                .ok_or_else(|| Error::MissingTensor(name.clone()))?;
            let shape = &expected[&name];
            if &t.shape != shape {
                return Err(Error::ShapeMismatch {
                    name,
                    expected: shape.clone(),
                    found: t.shape.clone(),
                });
            }
            Ok(t.to_vec())
        };

        let wte = fetch("wte.weight".into())?;
        let wpe = fetch("wpe.weight".into())?;
        let mut blocks = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let f = |s: &str| fetch(format!("h.{i}.{s}"));
            blocks.push(Block {
                ln1_g: f("ln_1.weight")?,
                ln1_b: f("ln_1.bias")?,
                qkv_w: f("attn.c_attn.weight")?,
                qkv_b: f("attn.c_attn.bias")?,
                attn_proj_w: f("attn.c_proj.weight")?,
                attn_proj_b: f("attn.c_proj.bias")?,
                ln2_g: f("ln_2.weight")?,
                ln2_b: f("ln_2.bias")?,
                fc_w: f("mlp.c_fc.weight")?,
                fc_b: f("mlp.c_fc.bias")?,
                mlp_proj_w: f("mlp.c_proj.weight")?,
                mlp_proj_b: f("mlp.c_proj.bias")?,
            });
        }
        let lnf_g = fetch("ln_f.weight".into())?;
        let lnf_b = fetch("ln_f.bias".into())?;
        let lm_head = if config.tied_output_head {
            None
        } else {
            Some(fetch("lm_head.weight".into())?)
        };
        Ok(Model {
            config,
            wte,
            wpe,
            blocks,
            lnf_g,
            lnf_b,
            lm_head,
        })
    }

    pub fn load(weights_file: &Path, config: ModelConfig) -> Result<Self> {
        let store = NamedTensorStore::load(weights_file)?;
        Self::from_store(&store, config)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        let blocks: usize = self
            .blocks
            .iter()
            .map(|b| {
                [
                    &b.ln1_g, &b.ln1_b, &b.qkv_w, &b.qkv_b, &b.attn_proj_w, &b.attn_proj_b,
                    &b.ln2_g, &b.ln2_b, &b.fc_w, &b.fc_b, &b.mlp_proj_w, &b.mlp_proj_b,
                ]
                .iter()
                .map(|v| v.len())
                .sum::<usize>()
            })
            .sum();
        self.wte.len()
            + self.wpe.len()
            + blocks
            + self.lnf_g.len()
            + self.lnf_b.len()
            + self.lm_head.as_ref().map_or(0, Vec::len)
    }

    /// Full forward pass; attention weights for every layer when requested.
    pub fn forward(&self, tokens: &[u32], want_attention: bool) -> Result<ForwardOutput<T>> {
        let opts = if want_attention {
            ForwardOptions::all_attention(&self.config)
        } else {
            ForwardOptions::default()
        };
        self.forward_with(tokens, &opts)
    }

    pub fn forward_with(&self, tokens: &[u32], opts: &ForwardOptions) -> Result<ForwardOutput<T>> {
        let cfg = &self.config;
        let t_len = tokens.len();
        if t_len == 0 || t_len > cfg.max_positions {
            return Err(Error::SequenceLength {
                len: t_len,
                min: 1,
                max: cfg.max_positions,
            });
        }
        if let Some(&bad) = opts.attention_layers.iter().find(|&&l| l == 0 || l > cfg.n_layers) {
            return Err(Error::OutOfRange {
                what: "layer",
                index: bad,
                range: format!("[1, {}]", cfg.n_layers),
            });
        }
        let (d, h) = (cfg.d_model, cfg.n_heads);
        let dh = cfg.head_dim();
        let eps = cfg.layer_norm_epsilon;

        let mut x = vec![T::zero(); t_len * d];
        for (pos, &tok) in tokens.iter().enumerate() {
            let tok = tok as usize;
            if tok >= cfg.vocab_size {
                return Err(Error::OutOfRange {
                    what: "token id",
                    index: tok,
                    range: format!("[0, {})", cfg.vocab_size),
                });
            }
            let row = &mut x[pos * d..(pos + 1) * d];
            for j in 0..d {
                row[j] = self.wte[tok * d + j] + self.wpe[pos * d + j];
            }
        }

        let scale = 1.0 / (dh as f64).sqrt();
        let mut attentions = BTreeMap::new();
        for (li, block) in self.blocks.iter().enumerate() {
            let normed = layer_norm(&x, t_len, &block.ln1_g, &block.ln1_b, eps);
            let qkv = linear(&normed, d, &block.qkv_w, &block.qkv_b);
            let keep = opts.attention_layers.contains(&(li + 1));

            // one task per (head, query); each writes its own weight row
            let mut weights = vec![T::zero(); h * t_len * t_len];
            let mut ctx = vec![T::zero(); h * t_len * dh];
            weights
                .par_chunks_mut(t_len)
                .zip(ctx.par_chunks_mut(dh))
                .enumerate()
                .for_each(|(idx, (wrow, crow))| {
                    let (head, q) = (idx / t_len, idx % t_len);
                    let qv = &qkv[q * 3 * d + head * dh..q * 3 * d + (head + 1) * dh];
                    let scores: Vec<f64> = (0..=q)
                        .map(|k| {
                            let kv = &qkv[k * 3 * d + d + head * dh..k * 3 * d + d + (head + 1) * dh];
                            dot(qv, kv).f64() * scale
                        })
                        .collect();
                    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                    let total: f64 = exps.iter().sum();
                    for (k, e) in exps.iter().enumerate() {
                        let w = T::of(e / total);
                        wrow[k] = w;
                        let vv = &qkv[k * 3 * d + 2 * d + head * dh..k * 3 * d + 2 * d + (head + 1) * dh];
                        for (c, &v) in crow.iter_mut().zip(vv) {
                            *c += w * v;
                        }
                    }
                });

            // [head × T × dh] -> [T × d]
            let mut merged = vec![T::zero(); t_len * d];
            for head in 0..h {
                for q in 0..t_len {
                    let src = &ctx[(head * t_len + q) * dh..(head * t_len + q + 1) * dh];
                    merged[q * d + head * dh..q * d + (head + 1) * dh].copy_from_slice(src);
                }
            }
            let attn_out = linear(&merged, d, &block.attn_proj_w, &block.attn_proj_b);
            x.iter_mut().zip(&attn_out).for_each(|(a, &b)| *a += b);
            if keep {
                attentions.insert(li + 1, weights);
            }

            let normed = layer_norm(&x, t_len, &block.ln2_g, &block.ln2_b, eps);
            let mut hidden = linear(&normed, d, &block.fc_w, &block.fc_b);
            hidden.par_iter_mut().for_each(|v| *v = gelu(*v, cfg.gelu));
            let mlp_out = linear(&hidden, cfg.mlp_width(), &block.mlp_proj_w, &block.mlp_proj_b);
            x.iter_mut().zip(&mlp_out).for_each(|(a, &b)| *a += b);
        }

        let final_hidden = layer_norm(&x, t_len, &self.lnf_g, &self.lnf_b, eps);
        let from = opts.logits_from.min(t_len);
        let unembed = self.lm_head.as_ref().unwrap_or(&self.wte);
        let v = cfg.vocab_size;
        let mut logits = vec![T::zero(); (t_len - from) * v];
        for (r, row) in logits.chunks_mut(v).enumerate() {
            let hrow = &final_hidden[(from + r) * d..(from + r + 1) * d];
            row.par_iter_mut()
                .enumerate()
                .for_each(|(tok, out)| *out = dot(hrow, &unembed[tok * d..(tok + 1) * d]));
        }

        Ok(ForwardOutput {
            seq_len: t_len,
            vocab_size: v,
            n_layers: cfg.n_layers,
            n_heads: h,
            d_model: d,
            logits_from: from,
            logits,
            attentions,
            hidden: opts.keep_hidden.then_some(final_hidden),
        })
    }
}
