//! Word-level regressions of behavior on surprisal, distinctiveness,
//! frequency and attention, plus the CSV tables they read and write.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::{csv_error, ScoreRow, ScoredResponses};
use crate::embeddings::{normalize_word, story_distinctiveness, EmbeddingTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;
use crate::stats::{bootstrap_ci, ols_fit, permutation_test_multi, Design, Resample, Tails, TestResult};
use crate::surprisal::WordRecord;

/// One row of `words.csv`. `surprisal` is empty for words with no scored
/// sub-token.
#[derive(Debug, Clone, PartialEq)]
pub struct WordsRow {
    pub word_index: usize,
    pub word: String,
    pub n_subtokens: usize,
    pub surprisal: Option<f64>,
    pub attention: BTreeMap<usize, Option<f64>>,
}

impl From<&WordRecord> for WordsRow {
    fn from(w: &WordRecord) -> Self {
        WordsRow {
            word_index: w.word_index,
            word: w.word.clone(),
            n_subtokens: w.n_subtokens,
            surprisal: (!w.excluded).then_some(w.surprisal),
            attention: w.attention.clone(),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_cell(s: &str, context: &str, line: usize, column: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::parse(context, line, format!("column {column:?}: {s:?} is not a number")))
}

pub fn write_words(out: impl Write, rows: &[WordsRow], layers: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["word_index".to_string(), "word".into(), "n_subtokens".into(), "surprisal_nats".into()];
    header.extend(layers.iter().map(|l| format!("attn_L{l}")));
    w.write_record(&header).map_err(|e| csv_error("words.csv", e))?;
    for row in rows {
        let mut rec = vec![row.word_index.to_string(), row.word.clone(), row.n_subtokens.to_string(), cell(row.surprisal)];
        rec.extend(layers.iter().map(|l| cell(row.attention.get(l).copied().flatten())));
        w.write_record(&rec).map_err(|e| csv_error("words.csv", e))?;
    }
    w.flush().map_err(|e| Error::io("words.csv", e))
}

pub fn read_words(path: &Path) -> Result<Vec<WordsRow>> {
    let context = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(&context, e))?;
    let headers = r.headers().map_err(|e| csv_error(&context, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(&context, format!("missing column {name:?}")))
    };
    let (ci, cw, cn, cs) = (col("word_index")?, col("word")?, col("n_subtokens")?, col("surprisal_nats")?);
    let mut attn_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(l) = h.strip_prefix("attn_L") {
            let layer = l
                .parse::<usize>()
                .map_err(|_| Error::schema(&context, format!("bad attention column {h:?}")))?;
            attn_cols.push((layer, i));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(&context, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let int = |c: usize, name: &str| {
            rec[c]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(&context, line, format!("column {name:?}: {:?} is not an integer", &rec[c])))
        };
        let mut attention = BTreeMap::new();
        for &(layer, c) in &attn_cols {
            attention.insert(layer, parse_cell(&rec[c], &context, line, &headers[c])?);
        }
        rows.push(WordsRow {
            word_index: int(ci, "word_index")?,
            word: rec[cw].to_string(),
            n_subtokens: int(cn, "n_subtokens")?,
            surprisal: parse_cell(&rec[cs], &context, line, "surprisal_nats")?,
            attention,
        });
    }
    Ok(rows)
}

/// Reads `word,frequency`; keys are lowercased and stripped like embedding
/// lookups. Later duplicates win.
pub fn read_frequencies(path: &Path) -> Result<HashMap<String, f64>> {
    let context = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(&context, e))?;
    let headers = r.headers().map_err(|e| csv_error(&context, e))?.clone();
    for name in ["word", "frequency"] {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::schema(&context, format!("missing column {name:?}")));
        }
    }
    #[derive(Deserialize)]
    struct Row {
        word: String,
        frequency: f64,
    }
    let mut out = HashMap::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| csv_error(&context, e))?;
        if !(row.frequency >= 0.0 && row.frequency.is_finite()) {
            return Err(Error::schema(&context, format!("frequency of {:?} must be a non-negative number", row.word)));
        }
        out.insert(normalize_word(&row.word, true), row.frequency);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyScale {
    #[default]
    Log10,
    Raw,
}

impl FrequencyScale {
    pub fn apply(self, f: f64) -> f64 {
        match self {
            FrequencyScale::Log10 => (1.0 + f).log10(),
            FrequencyScale::Raw => f,
        }
    }
}

impl std::str::FromStr for FrequencyScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log10" => Ok(FrequencyScale::Log10),
            "raw" => Ok(FrequencyScale::Raw),
            _ => Err(Error::Config(format!("frequency scale must be log10 or raw, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub permutations: usize,
    pub bootstrap: usize,
    pub ci_level: f64,
    pub seed: u64,
    pub frequency_scale: FrequencyScale,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            permutations: 10_000,
            bootstrap: 10_000,
            ci_level: 0.95,
            seed: 0,
            frequency_scale: FrequencyScale::Log10,
        }
    }
}

/// Single-predictor regression with an outcome-permutation p-value for R².
#[derive(Debug, Clone, Serialize)]
pub struct SimpleFit {
    pub predictor: String,
    pub outcome: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub n_used: usize,
    pub dropped: usize,
}

pub type Cells = Vec<(usize, Vec<Option<f64>>, Option<f64>)>;

pub fn simple_fit(predictor: &str, outcome: &str, rows: Cells, permutations: usize, seed: u64) -> Result<SimpleFit> {
    let design = Design::from_rows(vec![predictor.to_string()], rows)?;
    let fit = ols_fit(&design)?;
    let test = r_squared_test(&design, permutations, seed)?;
    Ok(SimpleFit {
        predictor: predictor.to_string(),
        outcome: outcome.to_string(),
        slope: fit.beta[0],
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        p_value: test.p_value,
        n_used: fit.n_used,
        dropped: fit.dropped_rows,
    })
}

fn r_squared_test(design: &Design<f64>, permutations: usize, seed: u64) -> Result<TestResult> {
    let tests = permutation_test_multi(
        design,
        |d| Ok(vec![ols_fit(d)?.r_squared]),
        Resample::RowShuffle,
        permutations,
        Tails::One,
        seed,
    )?;
    Ok(tests[0])
}

/// Multiple regression on z-scored predictors with a raw outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Glm {
    pub names: Vec<String>,
    pub intercept: f64,
    pub betas: Vec<f64>,
    pub ci: Vec<(f64, f64)>,
    pub ci_level: f64,
    pub r_squared: f64,
    pub r_squared_p: f64,
    /// Two-tailed, outcome-permutation p-value per coefficient.
    pub p_values: Vec<f64>,
    pub n_used: usize,
    pub dropped: usize,
    pub dropped_words: Vec<usize>,
    pub bootstrap_redrawn: usize,
    pub normalization: &'static str,
}

pub fn glm(names: Vec<String>, outcome: &str, rows: Cells, settings: &AnalysisSettings) -> Result<Glm> {
    let ids: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let raw = Design::from_rows(names, rows)?;
    let dropped_words = ids.into_iter().filter(|id| !raw.row_ids.contains(id)).collect();
    let design = raw.zscore_columns()?;
    let fit = ols_fit(&design)?;

    let r2 = r_squared_test(&design, settings.permutations, seed::derive_seed(settings.seed, "glm-r2", 0))?;
    let coefs = permutation_test_multi(
        &design,
        |d| Ok(ols_fit(d)?.beta),
        Resample::RowShuffle,
        settings.permutations,
        Tails::Two,
        seed::derive_seed(settings.seed, "glm-beta", 0),
    )?;
    let rows: Vec<usize> = (0..design.n()).collect();
    let boot = bootstrap_ci(
        &rows,
        |idx| Ok(ols_fit(&design.select_rows(idx))?.beta),
        settings.bootstrap,
        settings.ci_level,
        seed::derive_seed(settings.seed, "glm-bootstrap", 0),
    )?;
    log::debug!("{outcome}: GLM on {} rows, {} dropped", fit.n_used, fit.dropped_rows);
    Ok(Glm {
        names: fit.names,
        intercept: fit.intercept,
        betas: fit.beta,
        ci: boot.intervals,
        ci_level: settings.ci_level,
        r_squared: fit.r_squared,
        r_squared_p: r2.p_value,
        p_values: coefs.iter().map(|t| t.p_value).collect(),
        n_used: fit.n_used,
        dropped: fit.dropped_rows,
        dropped_words,
        bootstrap_redrawn: boot.redrawn,
        normalization: "predictors z-scored (sample sd), outcome raw",
    })
}

/// Per-word covariates aligned to `words`: distinctiveness from the story's
/// embeddings, frequency from a norms table.
pub fn distinctiveness_for<T: Scalar>(words: &[WordsRow], table: &EmbeddingTable<T>) -> Result<Vec<Option<f64>>> {
    let vectors: Vec<Option<&[T]>> = words.iter().map(|w| table.lookup(&w.word)).collect();
    story_distinctiveness(&vectors)
}

pub fn frequency_for(words: &[WordsRow], norms: &HashMap<String, f64>, scale: FrequencyScale) -> Vec<Option<f64>> {
    words
        .iter()
        .map(|w| norms.get(&normalize_word(&w.word, true)).map(|&f| scale.apply(f)))
        .collect()
}

/// One scatter point per scored word.
#[derive(Debug, Clone, Serialize)]
pub struct PlotRow {
    pub word_index: usize,
    pub word: String,
    pub surprisal: Option<f64>,
    pub mean_sim_exposure: Option<f64>,
    pub mean_sim_noexposure: Option<f64>,
    pub memory_effect: Option<f64>,
    pub distinctiveness: Option<f64>,
    pub frequency: Option<f64>,
    pub attention: BTreeMap<usize, Option<f64>>,
}

/// Pairs each story word with its score row; words without one are left
/// out. Covariate vectors, when given, are aligned to `words`.
pub fn join(
    words: &[WordsRow],
    scores: &[ScoreRow],
    distinctiveness: Option<&[Option<f64>]>,
    frequency: Option<&[Option<f64>]>,
) -> Vec<PlotRow> {
    let by_index: HashMap<usize, &ScoreRow> = scores.iter().map(|s| (s.word_index, s)).collect();
    let mut plot = Vec::new();
    let mut mismatched = 0usize;
    for (i, w) in words.iter().enumerate() {
        let Some(s) = by_index.get(&w.word_index) else { continue };
        if normalize_word(&w.word, true) != normalize_word(&s.word, true) {
            mismatched += 1;
            log::debug!("word {}: story has {:?}, scores have {:?}", w.word_index, w.word, s.word);
        }
        plot.push(PlotRow {
            word_index: w.word_index,
            word: w.word.clone(),
            surprisal: w.surprisal,
            mean_sim_exposure: s.mean_sim_exposure,
            mean_sim_noexposure: s.mean_sim_noexposure,
            memory_effect: s.memory_effect,
            distinctiveness: distinctiveness.and_then(|d| d.get(i).copied().flatten()),
            frequency: frequency.and_then(|f| f.get(i).copied().flatten()),
            attention: w.attention.clone(),
        });
    }
    if mismatched > 0 {
        log::warn!("{mismatched} score rows name a different word than the story at the same index");
    }
    plot
}

/// Memory effect regressed on distinctiveness, surprisal and frequency.
pub fn memory_glm(plot: &[PlotRow], settings: &AnalysisSettings) -> Result<Glm> {
    let rows = plot
        .iter()
        .map(|p| (p.word_index, vec![p.distinctiveness, p.surprisal, p.frequency], p.memory_effect))
        .collect();
    glm(
        vec!["distinctiveness".into(), "surprisal".into(), "frequency".into()],
        "memory_effect",
        rows,
        settings,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub n_words: usize,
    /// Words in the story without a score row; left out of every fit.
    pub words_without_behavior: usize,
    pub group_test: Option<TestResult>,
    pub no_exposure: SimpleFit,
    pub story_exposure: SimpleFit,
    pub memory_effect: SimpleFit,
    pub glm: Option<Glm>,
    pub attention: Vec<(usize, SimpleFit)>,
    pub settings: AnalysisSettings,
    #[serde(skip)]
    pub plot: Vec<PlotRow>,
}

/// Optional inputs to [`analyze`].
#[derive(Default)]
pub struct Covariates<'a> {
    pub distinctiveness: Option<Vec<Option<f64>>>,
    pub frequency: Option<Vec<Option<f64>>>,
    pub responses: Option<&'a ScoredResponses>,
}

pub fn analyze(words: &[WordsRow], scores: &[ScoreRow], cov: Covariates<'_>, settings: &AnalysisSettings) -> Result<Analysis> {
    for (name, v) in [("distinctiveness", &cov.distinctiveness), ("frequency", &cov.frequency)] {
        if let Some(v) = v {
            if v.len() != words.len() {
                return Err(Error::DimensionMismatch(v.len(), words.len()));
            }
            log::debug!("{name}: {} of {} words present", v.iter().flatten().count(), v.len());
        }
    }
    let plot = join(words, scores, cov.distinctiveness.as_deref(), cov.frequency.as_deref());
    if plot.is_empty() {
        return Err(Error::Precondition("no word in words.csv has a score row".into()));
    }

    let n = settings.permutations;
    let seed_for = |purpose: &str, i: u64| seed::derive_seed(settings.seed, purpose, i);
    let cells = |f: &dyn Fn(&PlotRow) -> (Vec<Option<f64>>, Option<f64>)| -> Cells {
        plot.iter()
            .map(|p| {
                let (x, y) = f(p);
                (p.word_index, x, y)
            })
            .collect()
    };

    let no_exposure = simple_fit("surprisal", "mean_sim_noexposure", cells(&|p| (vec![p.surprisal], p.mean_sim_noexposure)), n, seed_for("fit", 0))?;
    let story_exposure = simple_fit("surprisal", "mean_sim_exposure", cells(&|p| (vec![p.surprisal], p.mean_sim_exposure)), n, seed_for("fit", 1))?;
    let memory_effect = simple_fit("surprisal", "memory_effect", cells(&|p| (vec![p.surprisal], p.memory_effect)), n, seed_for("fit", 2))?;

    let glm = match (&cov.distinctiveness, &cov.frequency) {
        (Some(_), Some(_)) => Some(memory_glm(&plot, settings)?),
        _ => None,
    };

    let layers: Vec<usize> = words.first().map(|w| w.attention.keys().copied().collect()).unwrap_or_default();
    let mut attention = Vec::new();
    for &layer in &layers {
        let name = format!("attn_L{layer}");
        let rows = cells(&|p| (vec![p.attention.get(&layer).copied().flatten()], p.memory_effect));
        attention.push((layer, simple_fit(&name, "memory_effect", rows, n, seed_for("attention", layer as u64))?));
    }

    let group_test = cov
        .responses
        .map(|r| crate::behavior::group_difference_test(r, n, seed_for("group", 0)))
        .transpose()?;

    Ok(Analysis {
        n_words: words.len(),
        words_without_behavior: words.len() - plot.len(),
        group_test,
        no_exposure,
        story_exposure,
        memory_effect,
        glm,
        attention,
        settings: settings.clone(),
        plot,
    })
}

pub fn write_plotdata(out: impl Write, plot: &[PlotRow]) -> Result<()> {
    let layers: Vec<usize> = plot.first().map(|p| p.attention.keys().copied().collect()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "word_index", "word", "surprisal", "mean_sim_exposure", "mean_sim_noexposure", "memory_effect", "distinctiveness", "frequency",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(layers.iter().map(|l| format!("attn_L{l}")));
    w.write_record(&header).map_err(|e| csv_error("plotdata.csv", e))?;
    for p in plot {
        let mut rec = vec![
            p.word_index.to_string(),
            p.word.clone(),
            cell(p.surprisal),
            cell(p.mean_sim_exposure),
            cell(p.mean_sim_noexposure),
            cell(p.memory_effect),
            cell(p.distinctiveness),
            cell(p.frequency),
        ];
        rec.extend(layers.iter().map(|l| cell(p.attention.get(l).copied().flatten())));
        w.write_record(&rec).map_err(|e| csv_error("plotdata.csv", e))?;
    }
    w.flush().map_err(|e| Error::io("plotdata.csv", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> Vec<WordsRow> {
        (0..n)
            .map(|i| WordsRow {
                word_index: i,
                word: format!("w{i}"),
                n_subtokens: 1,
                surprisal: (i > 0).then(|| 1.0 + (i as f64 * 0.37).sin().abs() * 5.0),
                attention: BTreeMap::from([(1, Some((i as f64 * 0.11).cos()))]),
            })
            .collect()
    }

    fn scores(words: &[WordsRow], f: impl Fn(f64) -> f64) -> Vec<ScoreRow> {
        words
            .iter()
            .skip(2)
            .map(|w| {
                let s = w.surprisal.unwrap();
                ScoreRow {
                    word_index: w.word_index,
                    word: w.word.clone(),
                    mean_sim_exposure: Some(f(s) + 0.1),
                    mean_sim_noexposure: Some(f(s)),
                    memory_effect: Some(0.1),
                    n_exposure: 1,
                    n_noexposure: 1,
                }
            })
            .collect()
    }

    fn quick() -> AnalysisSettings {
        AnalysisSettings { permutations: 200, bootstrap: 200, ..AnalysisSettings::default() }
    }

    #[test]
    fn exact_linear_outcome_has_unit_r2() {
        let w = words(30);
        let s = scores(&w, |x| 0.9 - 0.1 * x);
        let a = analyze(&w, &s, Covariates::default(), &quick()).unwrap();
        assert!((a.no_exposure.r_squared - 1.0).abs() < 1e-10);
        assert!((a.no_exposure.slope + 0.1).abs() < 1e-10);
        assert_eq!(a.no_exposure.n_used, 28);
        assert_eq!(a.words_without_behavior, 2);
        assert!(a.glm.is_none());
    }

    #[test]
    fn glm_reports_listwise_drops() {
        let w = words(40);
        let mut s = scores(&w, |x| 0.5 - 0.05 * x);
        for (i, row) in s.iter_mut().enumerate() {
            row.memory_effect = Some(0.02 * ((i * 7 % 11) as f64) - 0.1);
        }
        let dist: Vec<Option<f64>> = (0..40).map(|i| (i % 9 != 5).then(|| 0.3 + 0.01 * (i % 7) as f64)).collect();
        let freq: Vec<Option<f64>> = (0..40).map(|i| Some((i % 5) as f64)).collect();
        let cov = Covariates { distinctiveness: Some(dist), frequency: Some(freq), responses: None };
        let a = analyze(&w, &s, cov, &quick()).unwrap();
        let g = a.glm.unwrap();
        // words 5, 14, 23, 32 lack distinctiveness; words 0 and 1 have no score row
        assert_eq!(g.dropped_words, vec![5, 14, 23, 32]);
        assert_eq!(g.dropped, 4);
        assert_eq!(g.n_used, 34);
        assert_eq!(g.betas.len(), 3);
        for ((lo, hi), p) in g.ci.iter().zip(&g.p_values) {
            assert!(lo <= hi);
            assert!(*p > 0.0 && *p <= 1.0);
        }
    }

    #[test]
    fn words_csv_round_trip() {
        let w = words(5);
        let mut buf = Vec::new();
        write_words(&mut buf, &w, &[1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.csv");
        std::fs::write(&path, &buf).unwrap();
        assert_eq!(read_words(&path).unwrap(), w);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("word_index,word,n_subtokens,surprisal_nats,attn_L1\n0,w0,1,,"));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.csv");
        std::fs::write(&path, "word_index,word,n_subtokens\n0,a,1\n").unwrap();
        let err = read_words(&path).unwrap_err();
        assert!(err.to_string().contains("surprisal_nats"), "{err}");
    }
}
