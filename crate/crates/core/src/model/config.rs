use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gelu {
    /// `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`, the GPT-2 reference form.
    #[default]
    Tanh,
    /// `0.5·x·(1 + erf(x/√2))`.
    Erf,
}

/// Architecture hyperparameters of a pre-norm decoder-only transformer.
///
/// Field names also accept the aliases used by published GPT-2 configs
/// (`n_layer`, `n_head`, `n_embd`, `n_inner`, `n_positions`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(alias = "n_layer")]
    pub n_layers: usize,
    #[serde(alias = "n_head")]
    pub n_heads: usize,
    #[serde(alias = "n_embd")]
    pub d_model: usize,
    #[serde(alias = "n_inner", default, deserialize_with = "nullable")]
    pub d_mlp: Option<usize>,
    pub vocab_size: usize,
    #[serde(alias = "n_positions")]
    pub max_positions: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_epsilon: f64,
    #[serde(default = "default_tied")]
    pub tied_output_head: bool,
    #[serde(default)]
    pub gelu: Gelu,
}

fn nullable<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    Option::<usize>::deserialize(d)
}

fn default_eps() -> f64 {
    1e-5
}

fn default_tied() -> bool {
    true
}

impl ModelConfig {
    pub fn gpt2_small() -> Self {
        ModelConfig {
            n_layers: 12,
            n_heads: 12,
            d_model: 768,
            d_mlp: Some(3072),
            vocab_size: 50257,
            max_positions: 1024,
            layer_norm_epsilon: 1e-5,
            tied_output_head: true,
            gelu: Gelu::Tanh,
        }
    }

    pub fn tiny(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            d_mlp: Some(32),
            vocab_size,
            max_positions: 16,
            layer_norm_epsilon: 1e-5,
            tied_output_head: true,
            gelu: Gelu::Tanh,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ModelConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// MLP width; four times `d_model` when unspecified.
    pub fn mlp_width(&self) -> usize {
        self.d_mlp.unwrap_or(4 * self.d_model)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_mlp", self.mlp_width()),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.layer_norm_epsilon > 0.0 && self.layer_norm_epsilon.is_finite()) {
            return Err(Error::Config("layer_norm_epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Every tensor the model needs, with its expected shape.
    ///
    /// Names follow the published GPT-2 checkpoint layout; linear weights
    /// are stored `[in, out]`.
    pub fn expected_tensors(&self) -> Vec<(String, Vec<usize>)> {
        let (d, m, v) = (self.d_model, self.mlp_width(), self.vocab_size);
        let mut out = vec![
            ("wte.weight".to_owned(), vec![v, d]),
            ("wpe.weight".to_owned(), vec![self.max_positions, d]),
        ];
        for i in 0..self.n_layers {
            let p = |s: &str| format!("h.{i}.{s}");
            out.extend([
                (p("ln_1.weight"), vec![d]),
                (p("ln_1.bias"), vec![d]),
                (p("attn.c_attn.weight"), vec![d, 3 * d]),
                (p("attn.c_attn.bias"), vec![3 * d]),
                (p("attn.c_proj.weight"), vec![d, d]),
                (p("attn.c_proj.bias"), vec![d]),
                (p("ln_2.weight"), vec![d]),
                (p("ln_2.bias"), vec![d]),
                (p("mlp.c_fc.weight"), vec![d, m]),
                (p("mlp.c_fc.bias"), vec![m]),
                (p("mlp.c_proj.weight"), vec![m, d]),
                (p("mlp.c_proj.bias"), vec![d]),
            ]);
        }
        out.push(("ln_f.weight".to_owned(), vec![d]));
        out.push(("ln_f.bias".to_owned(), vec![d]));
        if !self.tied_output_head {
            out.push(("lm_head.weight".to_owned(), vec![v, d]));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.expected_tensors()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}
