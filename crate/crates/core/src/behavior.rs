//! Cloze responses: ingestion, embedding-based scoring per group, and the
//! memory effect.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine, normalize_word, EmbeddingTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{permutation_test, Resamplable, Resample, Tails, TestResult};

/// The cloze task begins at the third story word.
pub const FIRST_CLOZE_WORD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "story_exposure")]
    StoryExposure,
    #[serde(rename = "no_exposure")]
    NoExposure,
}

impl Group {
    pub const LABELS: [&'static str; 2] = ["story_exposure", "no_exposure"];

    pub fn parse(label: &str) -> Result<Self> {
        match label {
            "story_exposure" => Ok(Group::StoryExposure),
            "no_exposure" => Ok(Group::NoExposure),
            other => Err(Error::Precondition(format!(
                "unknown group label {other:?}; accepted labels: {}",
                Self::LABELS.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::StoryExposure => Self::LABELS[0],
            Group::NoExposure => Self::LABELS[1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub word_index: usize,
    pub correct_word: String,
    pub group: Group,
    pub participant_id: String,
    /// `None` when the participant left the item blank.
    pub response: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ResponseSet {
    rows: Vec<Response>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    word_index: usize,
    correct_word: String,
    group: String,
    participant_id: String,
    response: Option<String>,
}

impl ResponseSet {
    /// Validates rows: cloze indices start at the third word, labels are
    /// known, each `(word, participant, group)` appears once, and every row
    /// for a word names the same correct answer.
    pub fn new(rows: Vec<Response>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut answers: BTreeMap<usize, &str> = BTreeMap::new();
        for r in &rows {
            if r.word_index < FIRST_CLOZE_WORD {
                return Err(Error::Integrity(format!(
                    "cloze word index {} precedes the first cloze item ({FIRST_CLOZE_WORD})",
                    r.word_index
                )));
            }
            if !seen.insert((r.word_index, r.participant_id.as_str(), r.group)) {
                return Err(Error::Integrity(format!(
                    "duplicate response for word {} by participant {:?} in group {}",
                    r.word_index, r.participant_id, r.group
                )));
            }
            match answers.get(&r.word_index) {
                Some(&a) if a != r.correct_word => {
                    return Err(Error::Integrity(format!(
                        "word {} has conflicting correct answers {a:?} and {:?}",
                        r.word_index, r.correct_word
                    )))
                }
                _ => {
                    answers.insert(r.word_index, &r.correct_word);
                }
            }
        }
        Ok(ResponseSet { rows })
    }

    /// Reads the CSV schema
    /// `word_index,correct_word,group,participant_id,response`.
    pub fn load(path: &Path) -> Result<Self> {
        let context = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(&context, e))?;
        let headers = reader.headers().map_err(|e| csv_error(&context, e))?.clone();
        for col in ["word_index", "correct_word", "group", "participant_id", "response"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::schema(&context, format!("missing column {col:?}")));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
            let rec = rec.map_err(|e| csv_error(&context, e))?;
            let group = Group::parse(&rec.group).map_err(|e| Error::parse(&context, i + 2, e.to_string()))?;
            rows.push(Response {
                word_index: rec.word_index,
                correct_word: rec.correct_word,
                group,
                participant_id: rec.participant_id,
                response: rec.response.filter(|r| !r.trim().is_empty()),
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Response] {
        &self.rows
    }

    pub fn word_indices(&self) -> BTreeSet<usize> {
        self.rows.iter().map(|r| r.word_index).collect()
    }

    /// Distinct participants per group.
    pub fn participants(&self) -> BTreeMap<Group, usize> {
        let mut ids: BTreeMap<Group, BTreeSet<&str>> = BTreeMap::new();
        for r in &self.rows {
            ids.entry(r.group).or_default().insert(&r.participant_id);
        }
        ids.into_iter().map(|(g, s)| (g, s.len())).collect()
    }
}

pub(crate) fn csv_error(context: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(context, line, e.to_string())
}

/// Outcome of scoring one response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseScore {
    Scored(f64),
    Missing,
    OutOfVocabulary,
}

/// Cosine between the response and correct-word embeddings. An exact match
/// after normalization scores 1.0 without a lookup.
pub fn score_response<T: Scalar>(response: Option<&str>, correct: &[T], correct_word: &str, table: &EmbeddingTable<T>) -> ResponseScore {
    let Some(response) = response.filter(|r| !r.trim().is_empty()) else {
        return ResponseScore::Missing;
    };
    if normalize_word(response, table.lowercase()) == normalize_word(correct_word, table.lowercase()) {
        return ResponseScore::Scored(1.0);
    }
    match table.lookup(response).map(|v| cosine(v, correct)) {
        Some(Ok(c)) => ResponseScore::Scored(c),
        _ => ResponseScore::OutOfVocabulary,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub word_index: usize,
    pub word: String,
    pub mean_sim_exposure: Option<f64>,
    pub mean_sim_noexposure: Option<f64>,
    pub memory_effect: Option<f64>,
    pub n_exposure: usize,
    pub n_noexposure: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ScoreSummary {
    pub words: usize,
    pub unscorable_words: Vec<usize>,
    pub missing_responses: usize,
    pub oov_responses: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub summary: ScoreSummary,
}

/// Per-participant similarity for every (participant, word) pair, the
/// basis for both scoring and the group permutation test.
#[derive(Debug, Clone)]
pub struct ScoredResponses {
    pub words: Vec<(usize, String)>,
    pub participants: Vec<(Group, String)>,
    /// `[participant][word]`, `None` when missing, OOV or absent.
    pub sims: Vec<Vec<Option<f64>>>,
    /// Group of each participant, permuted by label shuffles.
    pub labels: Vec<Group>,
    pub summary: ScoreSummary,
}

impl ScoredResponses {
    pub fn build<T: Scalar>(set: &ResponseSet, table: &EmbeddingTable<T>) -> Self {
        let mut words: BTreeMap<usize, String> = BTreeMap::new();
        let mut participants: BTreeSet<(Group, String)> = BTreeSet::new();
        for r in set.rows() {
            words.entry(r.word_index).or_insert_with(|| r.correct_word.clone());
            participants.insert((r.group, r.participant_id.clone()));
        }
        let words: Vec<(usize, String)> = words.into_iter().collect();
        let participants: Vec<(Group, String)> = participants.into_iter().collect();
        let word_pos: HashMap<usize, usize> = words.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
        let part_pos: HashMap<(Group, &str), usize> = participants
            .iter()
            .enumerate()
            .map(|(i, (g, p))| ((*g, p.as_str()), i))
            .collect();

        let mut summary = ScoreSummary {
            words: words.len(),
            ..Default::default()
        };
        let correct: Vec<Option<&[T]>> = words.iter().map(|(_, w)| table.lookup(w)).collect();
        summary.unscorable_words = words
            .iter()
            .zip(&correct)
            .filter(|(_, c)| c.is_none())
            .map(|((w, _), _)| *w)
            .collect();

        let mut sims = vec![vec![None; words.len()]; participants.len()];
        for r in set.rows() {
            let w = word_pos[&r.word_index];
            let p = part_pos[&(r.group, r.participant_id.as_str())];
            let Some(cv) = correct[w] else { continue };
            match score_response(r.response.as_deref(), cv, &r.correct_word, table) {
                ResponseScore::Scored(s) => sims[p][w] = Some(s),
                ResponseScore::Missing => summary.missing_responses += 1,
                ResponseScore::OutOfVocabulary => summary.oov_responses += 1,
            }
        }
        let labels = participants.iter().map(|(g, _)| *g).collect();
        ScoredResponses {
            words,
            participants,
            sims,
            labels,
            summary,
        }
    }

    /// Group means and counts per word under the current labels. Sums run in
    /// participant order so the result does not depend on input row order.
    fn group_means(&self) -> Vec<[(f64, usize); 2]> {
        let mut acc = vec![[(0.0, 0usize); 2]; self.words.len()];
        for (p, row) in self.sims.iter().enumerate() {
            let g = usize::from(self.labels[p] == Group::NoExposure);
            for (w, s) in row.iter().enumerate() {
                if let Some(s) = s {
                    acc[w][g].0 += s;
                    acc[w][g].1 += 1;
                }
            }
        }
        acc
    }

    pub fn table(&self) -> ScoreTable {
        let unscorable: BTreeSet<usize> = self.summary.unscorable_words.iter().copied().collect();
        let rows = self
            .words
            .iter()
            .zip(self.group_means())
            .map(|((w, word), [(se, ne), (sn, nn)])| {
                let scorable = !unscorable.contains(w);
                let exp = (scorable && ne > 0).then(|| se / ne as f64);
                let noexp = (scorable && nn > 0).then(|| sn / nn as f64);
                ScoreRow {
                    word_index: *w,
                    word: word.clone(),
                    mean_sim_exposure: exp,
                    mean_sim_noexposure: noexp,
                    memory_effect: exp.zip(noexp).map(|(a, b)| a - b),
                    n_exposure: ne,
                    n_noexposure: nn,
                }
            })
            .collect();
        ScoreTable {
            rows,
            summary: self.summary.clone(),
        }
    }

    /// Mean memory effect over words with data in both groups.
    pub fn mean_memory_effect(&self) -> f64 {
        let (sum, n) = self
            .group_means()
            .iter()
            .filter(|[(_, ne), (_, nn)]| *ne > 0 && *nn > 0)
            .map(|[(se, ne), (sn, nn)]| se / *ne as f64 - sn / *nn as f64)
            .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
        sum / n as f64
    }
}

impl Resamplable for ScoredResponses {
    fn resample(&self, _kind: Resample, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut out = self.clone();
        out.labels.shuffle(rng);
        Ok(out)
    }
}

/// Scores every response against its correct word and aggregates per group.
pub fn score<T: Scalar>(set: &ResponseSet, table: &EmbeddingTable<T>) -> ScoreTable {
    ScoredResponses::build(set, table).table()
}

/// One-tailed test that the story-exposure group outperforms the
/// no-exposure group, shuffling participant group labels.
pub fn group_difference_test(scored: &ScoredResponses, n: usize, seed: u64) -> Result<TestResult> {
    permutation_test(
        scored,
        |s| Ok(s.mean_memory_effect()),
        Resample::LabelShuffle,
        n,
        Tails::One,
        seed,
    )
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let context = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&context, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(&context, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let context = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(&context, e))?;
    let headers = r.headers().map_err(|e| csv_error(&context, e))?.clone();
    for col in ["word_index", "word", "mean_sim_exposure", "mean_sim_noexposure", "memory_effect", "n_exposure", "n_noexposure"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::schema(&context, format!("missing column {col:?}")));
        }
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(&context, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable<f64> {
        let mut t = EmbeddingTable::new(2, true);
        t.insert("pie", vec![1.0, 0.0]).unwrap();
        t.insert("cake", vec![0.8, 0.6]).unwrap();
        t.insert("car", vec![0.0, 1.0]).unwrap();
        t.insert("man", vec![0.6, 0.8]).unwrap();
        t
    }

    fn resp(w: usize, correct: &str, g: Group, p: &str, r: Option<&str>) -> Response {
        Response {
            word_index: w,
            correct_word: correct.into(),
            group: g,
            participant_id: p.into(),
            response: r.map(str::to_owned),
        }
    }

    use Group::{NoExposure as No, StoryExposure as Story};

    #[test]
    fn loads_well_formed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "word_index,correct_word,group,participant_id,response\n\
             2,pie,story_exposure,a,pie\n2,pie,no_exposure,b,cake\n\
             3,man,story_exposure,a,\n3,man,no_exposure,b,car\n",
        )
        .unwrap();
        let set = ResponseSet::load(&path).unwrap();
        assert_eq!(set.word_indices().len(), 2);
        assert_eq!(set.rows()[2].response, None);
        assert_eq!(set.participants()[&Group::StoryExposure], 1);
    }

    #[test]
    fn unknown_group_lists_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "word_index,correct_word,group,participant_id,response\n2,pie,exposed,a,pie\n").unwrap();
        let err = ResponseSet::load(&path).unwrap_err().to_string();
        assert!(err.contains("story_exposure") && err.contains("no_exposure"), "{err}");
    }

    #[test]
    fn duplicates_and_early_words_rejected() {
        let dup = vec![resp(2, "pie", Story, "a", Some("x")), resp(2, "pie", Story, "a", Some("y"))];
        assert!(ResponseSet::new(dup).is_err());
        assert!(ResponseSet::new(vec![resp(1, "pie", Story, "a", None)]).is_err());
    }

    #[test]
    fn all_correct_scores_one_and_effect_is_difference() {
        let set = ResponseSet::new(vec![
            resp(2, "pie", Story, "a", Some("pie")),
            resp(2, "pie", Story, "b", Some("Pie.")),
            resp(2, "pie", No, "c", Some("cake")),
            resp(2, "pie", No, "d", Some("car")),
        ])
        .unwrap();
        let t = score(&set, &table());
        let row = &t.rows[0];
        assert_eq!(row.mean_sim_exposure, Some(1.0));
        assert!((row.mean_sim_noexposure.unwrap() - 0.4).abs() < 1e-12);
        assert!((row.memory_effect.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!((row.n_exposure, row.n_noexposure), (2, 2));
    }

    #[test]
    fn missing_and_oov_excluded_and_counted() {
        let set = ResponseSet::new(vec![
            resp(2, "pie", Story, "a", Some("cake")),
            resp(2, "pie", Story, "b", None),
            resp(2, "pie", Story, "c", Some("zzyzx")),
            resp(2, "pie", No, "d", Some("cake")),
        ])
        .unwrap();
        let t = score(&set, &table());
        assert_eq!(t.rows[0].n_exposure, 1);
        assert_eq!(t.summary.missing_responses, 1);
        assert_eq!(t.summary.oov_responses, 1);
        assert_eq!(t.rows[0].memory_effect, Some(0.0));
    }

    #[test]
    fn unscorable_correct_word() {
        let set = ResponseSet::new(vec![
            resp(2, "xyzzy", Story, "a", Some("xyzzy")),
            resp(2, "xyzzy", No, "b", Some("pie")),
        ])
        .unwrap();
        let t = score(&set, &table());
        assert_eq!(t.summary.unscorable_words, vec![2]);
        assert_eq!(t.rows[0].memory_effect, None);
    }

    #[test]
    fn identical_groups_have_zero_effect_and_order_does_not_matter() {
        let rows = vec![
            resp(2, "pie", Story, "a", Some("cake")),
            resp(2, "pie", Story, "b", Some("man")),
            resp(2, "pie", Story, "e", Some("car")),
            resp(2, "pie", No, "c", Some("man")),
            resp(2, "pie", No, "d", Some("car")),
            resp(2, "pie", No, "f", Some("cake")),
        ];
        let t = score(&ResponseSet::new(rows.clone()).unwrap(), &table());
        assert_eq!(t.rows[0].memory_effect, Some(0.0));
        let mut reversed = rows;
        reversed.reverse();
        let t2 = score(&ResponseSet::new(reversed).unwrap(), &table());
        assert_eq!(t.rows, t2.rows);
    }

    #[test]
    fn group_test_detects_clear_advantage() {
        let mut rows = Vec::new();
        for p in 0..8 {
            rows.push(resp(2, "pie", Story, &format!("s{p}"), Some("pie")));
            rows.push(resp(3, "man", Story, &format!("s{p}"), Some("man")));
            rows.push(resp(2, "pie", No, &format!("n{p}"), Some("car")));
            rows.push(resp(3, "man", No, &format!("n{p}"), Some("pie")));
        }
        let scored = ScoredResponses::build(&ResponseSet::new(rows).unwrap(), &table());
        let r = group_difference_test(&scored, 2000, 3).unwrap();
        assert!(r.statistic > 0.0);
        assert!(r.p_value < 0.001, "{}", r.p_value);
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![ScoreRow {
            word_index: 2,
            word: "pie,".into(),
            mean_sim_exposure: Some(0.5),
            mean_sim_noexposure: None,
            memory_effect: None,
            n_exposure: 3,
            n_noexposure: 0,
        }];
        write_scores(&path, &rows).unwrap();
        assert_eq!(read_scores(&path).unwrap(), rows);
    }
}
