use std::path::{Path, PathBuf};

use engram_core::analysis::{
    analyze, distinctiveness_for, frequency_for, join, memory_glm, read_frequencies, read_words, write_plotdata,
    write_words, Analysis, Covariates, Glm, WordsRow,
};
use engram_core::behavior::{read_scores, write_scores, ResponseSet, ScoreSummary, ScoredResponses};
use engram_core::memory::{eval_long_text, EvalConfig, EvalReport};
use engram_core::model::ModelConfig;
use engram_core::selftest;
use engram_core::surprisal::analyze_text;
use engram_core::tokenizer::Vocab;
use engram_core::{EmbeddingTable, Error, Model, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::provenance::Provenance;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("outputs serialize");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Provenance for CSV outputs lives next to them.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    path.with_file_name(name)
}

fn load_model(cfg: &RunConfig, prov: &mut Provenance) -> Result<(Model, Vocab)> {
    let (weights, config) = (cfg.require("weights")?, cfg.require("config")?);
    let (vocab, merges) = (cfg.require("vocab")?, cfg.require("merges")?);
    for (role, path) in [("weights", weights), ("config", config), ("vocab", vocab), ("merges", merges)] {
        prov.record(role, path)?;
    }
    let model = Model::load(weights, ModelConfig::load(config)?)?;
    let vocab = Vocab::load(vocab, merges)?;
    if vocab.len() > model.config().vocab_size {
        return Err(Error::Integrity(format!(
            "tokenizer has {} tokens but the model only {}",
            vocab.len(),
            model.config().vocab_size
        )));
    }
    Ok((model, vocab))
}

fn read_text(cfg: &RunConfig, prov: &mut Provenance) -> Result<String> {
    let path = cfg.require("text")?;
    prov.record("text", path)?;
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SurprisalMeta<'a> {
    provenance: &'a Provenance,
    n_words: usize,
    n_tokens: usize,
    n_passes: usize,
    window: usize,
    attention_mode: String,
    perplexity: f64,
}

pub fn surprisal(cfg: &RunConfig) -> Result<()> {
    let mut prov = Provenance::new("surprisal", cfg);
    let (model, vocab) = load_model(cfg, &mut prov)?;
    let text = read_text(cfg, &mut prov)?;
    let out = cfg.require("out")?;
    let window = cfg.window.unwrap_or(model.config().max_positions);
    let run = analyze_text(&model, &vocab, &text, window, &cfg.attention_layers, cfg.attention_mode)?;
    let rows: Vec<WordsRow> = run.words.iter().map(WordsRow::from).collect();
    let mut buf = Vec::new();
    write_words(&mut buf, &rows, &cfg.attention_layers)?;
    write_file(out, &buf)?;
    let meta = SurprisalMeta {
        provenance: &prov,
        n_words: rows.len(),
        n_tokens: run.nlls.len() + 1,
        n_passes: run.n_passes,
        window,
        attention_mode: run.attention_mode.to_string(),
        perplexity: run.perplexity(),
    };
    write_json(&sidecar(out), &meta)?;
    eprintln!(
        "{} words, {} tokens, {} passes, perplexity {:.3} -> {}",
        meta.n_words,
        meta.n_tokens,
        meta.n_passes,
        meta.perplexity,
        out.display()
    );
    Ok(())
}

fn load_embeddings(cfg: &RunConfig, prov: &mut Provenance) -> Result<EmbeddingTable> {
    let path = cfg.require("embeddings")?;
    prov.record("embeddings", path)?;
    let table = EmbeddingTable::load(path, cfg.embedding_dim, cfg.lowercase)?;
    if table.duplicates() > 0 {
        log::warn!("{}: {} duplicate words, last occurrence kept", path.display(), table.duplicates());
    }
    Ok(table)
}

fn load_responses(cfg: &RunConfig, prov: &mut Provenance, table: &EmbeddingTable) -> Result<ScoredResponses> {
    let path = cfg.require("responses")?;
    prov.record("responses", path)?;
    let set = ResponseSet::load(path)?;
    for (group, n) in set.participants() {
        log::info!("{group}: {n} participants");
    }
    Ok(ScoredResponses::build(&set, table))
}

#[derive(Serialize)]
struct ScoreMeta<'a> {
    provenance: &'a Provenance,
    summary: &'a ScoreSummary,
    lowercase: bool,
}

pub fn score(cfg: &RunConfig) -> Result<()> {
    let mut prov = Provenance::new("score", cfg);
    let table = load_embeddings(cfg, &mut prov)?;
    let scored = load_responses(cfg, &mut prov, &table)?;
    let out = cfg.require("out")?;
    let scores = scored.table();
    write_scores(out, &scores.rows)?;
    write_json(&sidecar(out), &ScoreMeta { provenance: &prov, summary: &scores.summary, lowercase: cfg.lowercase })?;
    eprintln!(
        "{} words scored ({} unscorable), {} missing and {} out-of-vocabulary responses -> {}",
        scores.rows.len(),
        scores.summary.unscorable_words.len(),
        scores.summary.missing_responses,
        scores.summary.oov_responses,
        out.display()
    );
    Ok(())
}

fn load_tables(cfg: &RunConfig, prov: &mut Provenance) -> Result<(Vec<WordsRow>, Vec<engram_core::behavior::ScoreRow>)> {
    let (words, scores) = (cfg.require("words")?, cfg.require("scores")?);
    prov.record("words", words)?;
    prov.record("scores", scores)?;
    Ok((read_words(words)?, read_scores(scores)?))
}

fn load_frequency(cfg: &RunConfig, prov: &mut Provenance, words: &[WordsRow]) -> Result<Vec<Option<f64>>> {
    let path = cfg.require("freq")?;
    prov.record("freq", path)?;
    Ok(frequency_for(words, &read_frequencies(path)?, cfg.frequency_scale))
}

#[derive(Serialize)]
struct GlmOutput<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    glm: &'a Glm,
}

pub fn regress(cfg: &RunConfig) -> Result<()> {
    let mut prov = Provenance::new("regress", cfg);
    let (words, scores) = load_tables(cfg, &mut prov)?;
    let frequency = load_frequency(cfg, &mut prov, &words)?;
    let table = load_embeddings(cfg, &mut prov)?;
    let distinctiveness = distinctiveness_for(&words, &table)?;
    let out = cfg.require("out")?;
    let plot = join(&words, &scores, Some(&distinctiveness), Some(&frequency));
    let glm = memory_glm(&plot, &cfg.analysis())?;
    write_json(out, &GlmOutput { provenance: &prov, glm: &glm })?;
    eprintln!("R² {:.4} on {} words ({} dropped) -> {}", glm.r_squared, glm.n_used, glm.dropped, out.display());
    Ok(())
}

#[derive(Serialize)]
struct AnalysisOutput<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    analysis: &'a Analysis,
}

pub fn analyze_cmd(cfg: &RunConfig) -> Result<()> {
    let mut prov = Provenance::new("analyze", cfg);
    let (words, scores) = load_tables(cfg, &mut prov)?;
    let table = match cfg.embeddings {
        Some(_) => Some(load_embeddings(cfg, &mut prov)?),
        None => None,
    };
    let frequency = match cfg.freq {
        Some(_) => Some(load_frequency(cfg, &mut prov, &words)?),
        None => None,
    };
    let distinctiveness = table.as_ref().map(|t| distinctiveness_for(&words, t)).transpose()?;
    let responses = match (&cfg.responses, &table) {
        (Some(_), Some(t)) => Some(load_responses(cfg, &mut prov, t)?),
        (Some(_), None) => {
            return Err(Error::Precondition("scoring --responses for the group test needs --embeddings".into()))
        }
        _ => None,
    };
    let out = cfg.require("out")?;
    let cov = Covariates { distinctiveness, frequency, responses: responses.as_ref() };
    let analysis = analyze(&words, &scores, cov, &cfg.analysis())?;
    write_json(out, &AnalysisOutput { provenance: &prov, analysis: &analysis })?;
    let plot_path = cfg.plotdata.clone().unwrap_or_else(|| out.with_file_name("plotdata.csv"));
    let mut buf = Vec::new();
    write_plotdata(&mut buf, &analysis.plot)?;
    write_file(&plot_path, &buf)?;
    eprintln!(
        "memory effect R² {:.4} (p {:.4}); GLM {}; -> {}, {}",
        analysis.memory_effect.r_squared,
        analysis.memory_effect.p_value,
        analysis.glm.as_ref().map_or("skipped".to_string(), |g| format!("R² {:.4}", g.r_squared)),
        out.display(),
        plot_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MemoryOutput<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    report: &'a EvalReport,
}

pub fn memory_eval(cfg: &RunConfig) -> Result<()> {
    let mut prov = Provenance::new("memory-eval", cfg);
    let (model, vocab) = load_model(cfg, &mut prov)?;
    let text = read_text(cfg, &mut prov)?;
    let out = cfg.require("out")?;
    let config = EvalConfig {
        window: cfg.window.unwrap_or(model.config().max_positions),
        k: cfg.k,
        lambda: cfg.lambda,
        tau: cfg.tau,
        metric: cfg.metric,
        capacity: cfg.capacity,
        policy: cfg.policy()?,
    };
    let mut report = eval_long_text(&model, &vocab, &text, &config)?;
    if !cfg.positions {
        report.positions.clear();
    }
    write_json(out, &MemoryOutput { provenance: &prov, report: &report })?;
    eprintln!(
        "perplexity {:.4} with memory, {:.4} without; {} writes, {} evictions -> {}",
        report.perplexity_memory,
        report.perplexity_baseline,
        report.writes,
        report.evictions,
        out.display()
    );
    Ok(())
}

/// Returns whether every check passed.
pub fn selftest(criteria: &[u8]) -> Result<bool> {
    let wanted: Vec<u8> = if criteria.is_empty() { selftest::CRITERIA.to_vec() } else { criteria.to_vec() };
    let mut ok = true;
    for c in wanted {
        let check = selftest::run(c)
            .ok_or_else(|| Error::Precondition(format!("no asset-free check for criterion {c} (expected 1-7)")))?;
        println!("{check}");
        ok &= check.passed;
    }
    Ok(ok)
}
