//! Full reproduction over the real assets. Expected layout under
//! `$ENGRAM_ASSETS`:
//!
//! ```text
//! gpt2/model.safetensors  gpt2/config.json  gpt2/vocab.json  gpt2/merges.txt
//! story.txt  responses.csv  embeddings.txt[.gz]  hal.csv
//! ```

use std::path::PathBuf;

use engram_core::analysis::{analyze, distinctiveness_for, frequency_for, read_frequencies, AnalysisSettings, Covariates, WordsRow};
use engram_core::behavior::{ResponseSet, ScoredResponses};
use engram_core::model::ModelConfig;
use engram_core::selftest::Check;
use engram_core::surprisal::{analyze_text, AttentionMode};
use engram_core::tokenizer::Vocab;
use engram_core::{EmbeddingTable, Model};

pub struct AssetDir(PathBuf);

impl AssetDir {
    pub fn from_env() -> Option<Self> {
        let dir = PathBuf::from(std::env::var_os("ENGRAM_ASSETS")?);
        dir.is_dir().then_some(AssetDir(dir))
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.0.join(rel)
    }

    fn embeddings(&self) -> PathBuf {
        let plain = self.path("embeddings.txt");
        if plain.exists() { plain } else { self.path("embeddings.txt.gz") }
    }
}

fn check(criterion: u8, name: &'static str, passed: bool, detail: String) -> Check {
    Check { criterion, name, passed, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

pub fn reproduce(dir: &AssetDir) -> Vec<Check> {
    let config = ModelConfig::load(&dir.path("gpt2/config.json")).expect("model config");
    let model = Model::load(&dir.path("gpt2/model.safetensors"), config).expect("weights");
    let vocab = Vocab::load(&dir.path("gpt2/vocab.json"), &dir.path("gpt2/merges.txt")).expect("tokenizer");
    let text = std::fs::read_to_string(dir.path("story.txt")).expect("story");
    let run = analyze_text(&model, &vocab, &text, 1024, &[1, 6, 11, 12], AttentionMode::Mean).expect("surprisal run");
    let words: Vec<WordsRow> = run.words.iter().map(WordsRow::from).collect();

    let table = EmbeddingTable::load(&dir.embeddings(), 300, true).expect("embeddings");
    let responses = ResponseSet::load(&dir.path("responses.csv")).expect("responses");
    let scored = ScoredResponses::build(&responses, &table);
    let scores = scored.table().rows;
    let norms = read_frequencies(&dir.path("hal.csv")).expect("frequency norms");
    let settings = AnalysisSettings::default();
    let cov = Covariates {
        distinctiveness: Some(distinctiveness_for(&words, &table).expect("distinctiveness")),
        frequency: Some(frequency_for(&words, &norms, settings.frequency_scale)),
        responses: Some(&scored),
    };
    let a = analyze(&words, &scores, cov, &settings).expect("analysis");

    let mut out = Vec::new();
    let g = a.group_test.expect("group test requested");
    out.push(check(
        8,
        "story-exposure group outperforms no-exposure group",
        g.statistic > 0.0 && g.p_value < 0.001,
        format!("mean memory effect {:.4}, p = {:.5}", g.statistic, g.p_value),
    ));
    let (ne, se) = (&a.no_exposure, &a.story_exposure);
    out.push(check(
        9,
        "surprisal predicts cloze performance in both groups",
        within(ne.r_squared, 0.61, 0.06) && within(se.r_squared, 0.55, 0.06) && ne.p_value < 0.001 && se.p_value < 0.001,
        format!("no-exposure R² {:.3} (p {:.5}), story-exposure R² {:.3} (p {:.5})", ne.r_squared, ne.p_value, se.r_squared, se.p_value),
    ));
    let me = &a.memory_effect;
    out.push(check(
        10,
        "surprisal predicts the memory effect",
        within(me.r_squared, 0.17, 0.05) && me.p_value < 0.001,
        format!("R² {:.3}, p {:.5}", me.r_squared, me.p_value),
    ));
    let glm = a.glm.expect("covariates supplied");
    let reference: [f64; 3] = [0.011, 0.012, -0.02];
    let signs = glm.betas.iter().zip(&reference).all(|(b, r)| b.signum() == r.signum());
    let magnitudes = glm.betas.iter().zip(&reference).all(|(b, r)| {
        let ratio = b.abs() / r.abs();
        (0.5..=2.0).contains(&ratio)
    });
    out.push(check(
        11,
        "multiple regression on distinctiveness, surprisal, frequency",
        within(glm.r_squared, 0.24, 0.05) && signs && magnitudes && glm.dropped.abs_diff(19) <= 3,
        format!("R² {:.3}, betas {:?}, dropped {}", glm.r_squared, glm.betas, glm.dropped),
    ));
    let layer = |l: usize| &a.attention.iter().find(|(k, _)| *k == l).expect("layer analyzed").1;
    let l11 = layer(11);
    let others_ns = [1, 6, 12].iter().all(|&l| layer(l).p_value >= 0.05);
    out.push(check(
        12,
        "attention does not predict the memory effect",
        l11.r_squared <= 0.02 && others_ns,
        format!(
            "L11 R² {:.4}; p for L1/L6/L12 = {:.3}/{:.3}/{:.3}",
            l11.r_squared,
            layer(1).p_value,
            layer(6).p_value,
            layer(12).p_value
        ),
    ));
    out
}
