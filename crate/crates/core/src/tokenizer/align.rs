use super::TokenSequence;
use crate::error::{Error, Result};

/// A transcript word and the half-open range of tokens that spell it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpan {
    pub word_index: usize,
    pub word: String,
    pub token_range: (usize, usize),
}

impl WordSpan {
    pub fn n_tokens(&self) -> usize {
        self.token_range.1 - self.token_range.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub spans: Vec<WordSpan>,
    /// Tokens made only of whitespace, which belong to no word.
    pub uncovered: Vec<usize>,
}

pub fn whitespace_words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Maps each transcript word to the contiguous token range covering its
/// byte extent in `text`.
///
/// Words are located by a left-to-right scan over `text`, so repeated words
/// resolve to their own occurrence. A token is assigned to the word owning
/// its non-whitespace bytes.
pub fn align_words(text: &str, tokens: &TokenSequence, words: &[String]) -> Result<Alignment> {
    let mut owner: Vec<Option<usize>> = vec![None; text.len()];
    let mut pos = 0;
    for (k, word) in words.iter().enumerate() {
        let rest = &text[pos..];
        let skipped = rest.len() - rest.trim_start().len();
        pos += skipped;
        let fail = |reason: &str| Error::Alignment {
            word_index: k,
            word: word.clone(),
            reason: reason.to_owned(),
        };
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(fail("transcript words must be non-empty and whitespace-free"));
        }
        if !text[pos..].starts_with(word.as_str()) {
            return Err(fail(&format!("text at byte {pos} does not match the transcript")));
        }
        let end = pos + word.len();
        if text[end..].chars().next().is_some_and(|c| !c.is_whitespace()) {
            return Err(fail("word continues past its transcript boundary"));
        }
        owner[pos..end].fill(Some(k));
        pos = end;
    }
    if !text[pos..].trim().is_empty() {
        return Err(Error::Alignment {
            word_index: words.len(),
            word: text[pos..].trim().chars().take(20).collect(),
            reason: "text continues after the last transcript word".into(),
        });
    }

    let mut ranges: Vec<Option<(usize, usize, usize)>> = vec![None; words.len()];
    let mut uncovered = Vec::new();
    for (t, &(a, b)) in tokens.offsets.iter().enumerate() {
        let mut owners = owner[a..b].iter().flatten();
        let Some(&k) = owners.next() else {
            uncovered.push(t);
            continue;
        };
        if let Some(&other) = owners.find(|&&o| o != k) {
            return Err(Error::Alignment {
                word_index: k,
                word: words[k].clone(),
                reason: format!("token {t} straddles words {k} and {other}"),
            });
        }
        let entry = ranges[k].get_or_insert((t, t, 0));
        entry.1 = t + 1;
        entry.2 += 1;
    }

    let spans = ranges
        .into_iter()
        .enumerate()
        .map(|(k, r)| match r {
            Some((lo, hi, count)) if count == hi - lo => Ok(WordSpan {
                word_index: k,
                word: words[k].clone(),
                token_range: (lo, hi),
            }),
            Some(_) => Err(Error::Alignment {
                word_index: k,
                word: words[k].clone(),
                reason: "tokens are not contiguous".into(),
            }),
            None => Err(Error::Alignment {
                word_index: k,
                word: words[k].clone(),
                reason: "no token covers this word".into(),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Alignment { spans, uncovered })
}
