//! Flat run configuration: defaults, then an optional JSON settings file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use engram_core::analysis::{AnalysisSettings, FrequencyScale};
use engram_core::memory::{EncodingPolicy, EvalConfig, Metric};
use engram_core::surprisal::AttentionMode;
use engram_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weights: Option<PathBuf>,
    /// Model hyperparameters (JSON).
    pub config: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub merges: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub freq: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub plotdata: Option<PathBuf>,

    /// Defaults to the model's maximum context.
    pub window: Option<usize>,
    pub attention_layers: Vec<usize>,
    pub attention_mode: AttentionMode,
    pub embedding_dim: usize,
    pub lowercase: bool,

    pub permutations: usize,
    pub bootstrap: usize,
    pub ci_level: f64,
    pub seed: u64,
    pub frequency_scale: FrequencyScale,

    pub policy: String,
    pub theta: f64,
    pub fraction: f64,
    pub lambda: f64,
    pub tau: f64,
    pub k: usize,
    /// `None` is unbounded.
    pub capacity: Option<usize>,
    pub metric: Metric,
    pub positions: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let analysis = AnalysisSettings::default();
        let memory = EvalConfig::default();
        RunConfig {
            weights: None,
            config: None,
            vocab: None,
            merges: None,
            text: None,
            embeddings: None,
            responses: None,
            freq: None,
            words: None,
            scores: None,
            out: None,
            plotdata: None,
            window: None,
            attention_layers: vec![1, 6, 11, 12],
            attention_mode: AttentionMode::Mean,
            embedding_dim: 300,
            lowercase: true,
            permutations: analysis.permutations,
            bootstrap: analysis.bootstrap,
            ci_level: analysis.ci_level,
            seed: analysis.seed,
            frequency_scale: analysis.frequency_scale,
            policy: "threshold".into(),
            theta: 4.0,
            fraction: 0.1,
            lambda: memory.lambda,
            tau: memory.tau,
            k: memory.k,
            capacity: memory.capacity,
            metric: memory.metric,
            positions: true,
        }
    }
}

/// Flags shared by every subcommand. Each overrides the same-named field
/// (hyphens for underscores) of the settings file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat JSON settings file; flags take precedence over its fields.
    #[arg(long, value_name = "FILE")]
    pub settings: Option<PathBuf>,

    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Model hyperparameter JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub merges: Option<PathBuf>,
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub freq: Option<PathBuf>,
    #[arg(long)]
    pub words: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plotdata: Option<PathBuf>,

    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub attention_layers: Option<Vec<usize>>,
    #[arg(long)]
    pub attention_mode: Option<String>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub lowercase: Option<bool>,

    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// log10 or raw.
    #[arg(long)]
    pub frequency_scale: Option<String>,

    /// threshold, top_fraction, always or never.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Entry count, or "none" for an unbounded store.
    #[arg(long)]
    pub capacity: Option<String>,
    /// l2 or cosine.
    #[arg(long)]
    pub metric: Option<String>,
    /// Include per-position NLLs in memory-eval output.
    #[arg(long)]
    pub positions: Option<bool>,
}

impl Flags {
    fn overrides(&self) -> Result<Map<String, Value>> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::from(p.display().to_string()));
        put("weights", path(&self.weights));
        put("config", path(&self.config));
        put("vocab", path(&self.vocab));
        put("merges", path(&self.merges));
        put("text", path(&self.text));
        put("embeddings", path(&self.embeddings));
        put("responses", path(&self.responses));
        put("freq", path(&self.freq));
        put("words", path(&self.words));
        put("scores", path(&self.scores));
        put("out", path(&self.out));
        put("plotdata", path(&self.plotdata));
        put("window", self.window.map(Value::from));
        put("attention_layers", self.attention_layers.clone().map(Value::from));
        put("attention_mode", self.attention_mode.clone().map(Value::from));
        put("embedding_dim", self.embedding_dim.map(Value::from));
        put("lowercase", self.lowercase.map(Value::from));
        put("permutations", self.permutations.map(Value::from));
        put("bootstrap", self.bootstrap.map(Value::from));
        put("ci_level", self.ci_level.map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("frequency_scale", self.frequency_scale.clone().map(Value::from));
        put("policy", self.policy.clone().map(Value::from));
        put("theta", self.theta.map(Value::from));
        put("fraction", self.fraction.map(Value::from));
        put("lambda", self.lambda.map(Value::from));
        put("tau", self.tau.map(Value::from));
        put("k", self.k.map(Value::from));
        put("metric", self.metric.clone().map(Value::from));
        put("positions", self.positions.map(Value::from));
        if let Some(c) = &self.capacity {
            let v = match c.as_str() {
                "none" | "unbounded" => Value::Null,
                n => Value::from(
                    n.parse::<usize>()
                        .map_err(|_| Error::Precondition(format!("--capacity: {n:?} is not a count or \"none\"")))?,
                ),
            };
            m.insert("capacity".into(), v);
        }
        Ok(m)
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let Value::Object(mut merged) = serde_json::to_value(RunConfig::default()).expect("config serializes") else {
            unreachable!("RunConfig is a struct")
        };
        if let Some(path) = &flags.settings {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: Value = serde_json::from_str(&raw)
                .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
            let Value::Object(file) = value else {
                return Err(Error::schema(path.display().to_string(), "settings must be a JSON object"));
            };
            merged.extend(file);
        }
        merged.extend(flags.overrides()?);
        let context = flags
            .settings
            .as_ref()
            .map_or_else(|| "command line".to_string(), |p| p.display().to_string());
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(merged)).map_err(|e| Error::schema(context, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Precondition(format!("ci_level must lie in (0, 1), got {}", self.ci_level)));
        }
        if self.permutations == 0 {
            return Err(Error::Precondition("permutations must be positive".into()));
        }
        if self.window == Some(0) {
            return Err(Error::Precondition("window must be positive".into()));
        }
        Ok(())
    }

    /// The path stored under `field`, which must exist on disk.
    pub fn require(&self, field: &'static str) -> Result<&Path> {
        let value = match field {
            "weights" => &self.weights,
            "config" => &self.config,
            "vocab" => &self.vocab,
            "merges" => &self.merges,
            "text" => &self.text,
            "embeddings" => &self.embeddings,
            "responses" => &self.responses,
            "freq" => &self.freq,
            "words" => &self.words,
            "scores" => &self.scores,
            "out" => &self.out,
            _ => unreachable!("unknown path field {field}"),
        };
        let path = value.as_deref().ok_or_else(|| {
            Error::io(
                format!("--{field}"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "required path not given"),
            )
        })?;
        if field != "out" {
            std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
        }
        Ok(path)
    }

    pub fn policy(&self) -> Result<EncodingPolicy> {
        let policy = match self.policy.as_str() {
            "threshold" => EncodingPolicy::Threshold { theta: self.theta },
            "top_fraction" => EncodingPolicy::TopFraction { fraction: self.fraction },
            "always" => EncodingPolicy::Always,
            "never" => EncodingPolicy::Never,
            other => {
                return Err(Error::Precondition(format!(
                    "unknown policy {other:?} (expected threshold, top_fraction, always or never)"
                )))
            }
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn analysis(&self) -> AnalysisSettings {
        AnalysisSettings {
            permutations: self.permutations,
            bootstrap: self.bootstrap,
            ci_level: self.ci_level,
            seed: self.seed,
            frequency_scale: self.frequency_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_settings_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"lambda": 0.5, "k": 3, "capacity": null, "attention_layers": [2]}"#).unwrap();
        let flags = Flags { settings: Some(path), k: Some(5), ..Flags::default() };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.capacity, None);
        assert_eq!(cfg.attention_layers, vec![2]);
        assert_eq!(cfg.tau, 1.0);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"lamda": 0.5}"#).unwrap();
        let err = RunConfig::resolve(&Flags { settings: Some(path), ..Flags::default() }).unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn capacity_flag_accepts_none() {
        let flags = Flags { capacity: Some("none".into()), ..Flags::default() };
        assert_eq!(RunConfig::resolve(&flags).unwrap().capacity, None);
        let flags = Flags { capacity: Some("12".into()), ..Flags::default() };
        assert_eq!(RunConfig::resolve(&flags).unwrap().capacity, Some(12));
    }
}
