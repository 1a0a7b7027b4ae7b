//! Static word embeddings, cosine similarity and story-level distinctiveness.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lowercases (when asked) and strips leading/trailing characters that are
/// neither letters nor digits. Internal punctuation such as apostrophes stays.
pub fn normalize_word(word: &str, lowercase: bool) -> String {
    let trimmed = word.trim_matches(|c: char| !c.is_alphanumeric());
    if lowercase {
        trimmed.to_lowercase()
    } else {
        trimmed.to_owned()
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingTable<T> {
    dim: usize,
    lowercase: bool,
    vectors: HashMap<String, Vec<T>>,
    duplicates: usize,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize, lowercase: bool) -> Self {
        EmbeddingTable {
            dim,
            lowercase,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    /// Adds or replaces a vector. Keys are stored as given.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<T>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch(vector.len(), self.dim));
        }
        if vector.iter().any(|v| v.is_nan()) {
            return Err(Error::Integrity("embedding contains NaN".into()));
        }
        if self.vectors.insert(word.into(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    /// Reads the whitespace-separated text format (`word f1 ... fdim` per
    /// line); `.gz` files are decompressed. Later duplicates replace earlier
    /// ones and are counted.
    pub fn load(path: &Path, expected_dim: usize, lowercase: bool) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
            Box::new(GzDecoder::new(file))
        } else {
            Box::new(file)
        };
        Self::read(BufReader::new(reader), expected_dim, lowercase, &path.display().to_string())
    }

    pub fn read(reader: impl BufRead, expected_dim: usize, lowercase: bool, context: &str) -> Result<Self> {
        let mut table = Self::new(expected_dim, lowercase);
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::parse(context, line_no, e.to_string()))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            // the word is everything before the last `dim` fields, which
            // tolerates tokens containing spaces in some published tables
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() < expected_dim + 1 {
                return Err(Error::parse(
                    context,
                    line_no,
                    format!("expected a word and {expected_dim} values, found {} fields", fields.len()),
                ));
            }
            let split = fields.len() - expected_dim;
            if split != 1 && fields[1].parse::<f64>().is_ok() {
                return Err(Error::parse(
                    context,
                    line_no,
                    format!("expected {expected_dim} values, found {}", fields.len() - 1),
                ));
            }
            let word = fields[..split].join(" ");
            let vector = fields[split..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map(T::of)
                        .map_err(|_| Error::parse(context, line_no, format!("bad number {f:?}")))
                })
                .collect::<Result<Vec<T>>>()?;
            table
                .insert(word, vector)
                .map_err(|e| Error::parse(context, line_no, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Vector for a raw word after normalization; `None` on a miss.
    pub fn lookup(&self, word: &str) -> Option<&[T]> {
        let key = normalize_word(word, self.lowercase);
        if key.is_empty() {
            return None;
        }
        self.vectors.get(&key).map(Vec::as_slice)
    }
}

/// `u·v / (|u| |v|)`, accumulated in `f64`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.f64(), b.f64());
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// One minus the mean cosine between word `index` and every other story word
/// that has a vector. Repeated words count once per occurrence.
pub fn distinctiveness<T: Scalar>(index: usize, story: &[Option<&[T]>]) -> Result<Option<f64>> {
    let Some(target) = story.get(index).copied().flatten() else {
        return Ok(None);
    };
    let mut total = 0.0;
    let mut count = 0usize;
    for (j, other) in story.iter().enumerate() {
        if j == index {
            continue;
        }
        if let Some(other) = other {
            total += cosine(target, other)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Precondition(
            "distinctiveness needs at least two story words with embeddings".into(),
        ));
    }
    Ok(Some(1.0 - total / count as f64))
}

/// Distinctiveness for every story word, using unit-normalized vectors so
/// the pairwise pass costs one dot product per pair.
pub fn story_distinctiveness<T: Scalar>(story: &[Option<&[T]>]) -> Result<Vec<Option<f64>>> {
    let units: Vec<Option<Vec<f64>>> = story
        .iter()
        .map(|v| {
            v.map(|v| {
                let norm = v.iter().map(|x| x.f64().powi(2)).sum::<f64>().sqrt();
                if norm == 0.0 {
                    Err(Error::ZeroVector)
                } else {
                    Ok(v.iter().map(|x| x.f64() / norm).collect())
                }
            })
            .transpose()
        })
        .collect::<Result<_>>()?;
    let present = units.iter().flatten().count();
    if present < 2 {
        return Err(Error::Precondition(
            "distinctiveness needs at least two story words with embeddings".into(),
        ));
    }
    let sum: Vec<f64> = {
        let dim = units.iter().flatten().next().map_or(0, Vec::len);
        let mut s = vec![0.0; dim];
        for u in units.iter().flatten() {
            s.iter_mut().zip(u).for_each(|(a, b)| *a += b);
        }
        s
    };
    // Σ_{j≠i} cos(i, j) = u_i · (Σ_j u_j) − u_i · u_i
    Ok(units
        .iter()
        .map(|u| {
            u.as_ref().map(|u| {
                let with_self: f64 = u.iter().zip(&sum).map(|(a, b)| a * b).sum();
                let self_dot: f64 = u.iter().map(|a| a * a).sum();
                1.0 - (with_self - self_dot) / (present - 1) as f64
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_single_entry() {
        let t = EmbeddingTable::<f64>::read("a 1.0 0.0\n".as_bytes(), 2, true, "mem").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.lookup("A,"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn short_line_is_parse_error() {
        let line = format!("the {}\n", vec!["0.1"; 299].join(" "));
        let err = EmbeddingTable::<f64>::read(line.as_bytes(), 300, true, "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn long_line_is_parse_error() {
        let err = EmbeddingTable::<f64>::read("a 1 2 3\n".as_bytes(), 2, true, "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicates_last_wins() {
        let t = EmbeddingTable::<f64>::read("a 1 0\nb 0 1\na 0 2\n".as_bytes(), 2, false, "mem").unwrap();
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.lookup("a"), Some(&[0.0, 2.0][..]));
    }

    #[test]
    fn gzip_input() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt.gz");
        let mut enc = GzEncoder::new(std::fs::File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(b"x 1 2\n").unwrap();
        enc.finish().unwrap();
        let t = EmbeddingTable::<f32>::load(&path, 2, true).unwrap();
        assert_eq!(t.lookup("x"), Some(&[1.0f32, 2.0][..]));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_word("\"Pie,\"", true), "pie");
        assert_eq!(normalize_word("don't.", true), "don't");
        assert_eq!(normalize_word("--", true), "");
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn distinctiveness_cases() {
        let v = [1.0, 2.0];
        let same: Vec<Option<&[f64]>> = vec![Some(&v), Some(&v), Some(&v)];
        for i in 0..3 {
            assert!(distinctiveness(i, &same).unwrap().unwrap().abs() < 1e-15);
        }
        let (a, b) = ([1.0, 0.0], [0.0, 1.0]);
        let orth: Vec<Option<&[f64]>> = vec![Some(&a), Some(&b)];
        assert_eq!(distinctiveness(0, &orth).unwrap(), Some(1.0));
        assert_eq!(distinctiveness(1, &orth).unwrap(), Some(1.0));

        // cos(w0, w1) = cos(w0, w2) = 0.5
        let w0 = [1.0, 0.0, 0.0];
        let w1 = [0.5, 0.75f64.sqrt(), 0.0];
        let w2 = [0.5, 0.0, 0.75f64.sqrt()];
        let story: Vec<Option<&[f64]>> = vec![Some(&w0), Some(&w1), Some(&w2)];
        assert!((distinctiveness(0, &story).unwrap().unwrap() - 0.5).abs() < 1e-12);

        let missing: Vec<Option<&[f64]>> = vec![None, Some(&a), Some(&b)];
        assert_eq!(distinctiveness(0, &missing).unwrap(), None);
        assert!(distinctiveness(0, &[Some(&a[..])]).is_err());
    }

    fn vecs(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(0.1f64..5.0, 4), n)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(u in proptest::collection::vec(-5.0f64..5.0, 6),
                                                v in proptest::collection::vec(-5.0f64..5.0, 6),
                                                a in 0.1f64..10.0, b in 0.1f64..10.0) {
            prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let su: Vec<f64> = u.iter().map(|x| a * x).collect();
            let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
            prop_assert!((c - cosine(&su, &sv).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn fast_path_matches_pairwise(story in vecs(7), drop in 0usize..7) {
            let mut refs: Vec<Option<&[f64]>> = story.iter().map(|v| Some(v.as_slice())).collect();
            refs[drop] = None;
            let fast = story_distinctiveness(&refs).unwrap();
            for i in 0..refs.len() {
                let slow = distinctiveness(i, &refs).unwrap();
                match (fast[i], slow) {
                    (Some(f), Some(s)) => {
                        prop_assert!((f - s).abs() < 1e-12);
                        prop_assert!((0.0..=2.0 + 1e-12).contains(&f));
                    }
                    (None, None) => {}
                    other => prop_assert!(false, "mismatch {:?}", other),
                }
            }
        }

        #[test]
        fn removing_a_word_changes_others_by_its_term(story in vecs(6)) {
            let refs: Vec<Option<&[f64]>> = story.iter().map(|v| Some(v.as_slice())).collect();
            let before = story_distinctiveness(&refs).unwrap();
            let after = story_distinctiveness(&refs[1..]).unwrap();
            let n = refs.len() as f64;
            for i in 1..refs.len() {
                // mean over n-1 others -> mean over n-2 others without word 0
                let sum_before = (1.0 - before[i].unwrap()) * (n - 1.0);
                let removed = cosine(refs[i].unwrap(), refs[0].unwrap()).unwrap();
                let expect = 1.0 - (sum_before - removed) / (n - 2.0);
                prop_assert!((after[i - 1].unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}
