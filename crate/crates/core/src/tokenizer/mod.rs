//! Byte-level BPE tokenizer with word ↔ sub-token alignment.

mod align;
mod bytes;
mod pretokenize;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub use align::{align_words, whitespace_words, Alignment, WordSpan};
pub use pretokenize::pretokenize;

/// Token vocabulary plus ranked merge list.
#[derive(Debug, Clone)]
pub struct Vocab {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    merges: Vec<(String, String)>,
    merge_ranks: HashMap<(String, String), usize>,
    byte_encoder: [char; 256],
    byte_decoder: HashMap<char, u8>,
}

/// Token ids with the byte range each one covers in the source text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub offsets: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl Vocab {
    /// Builds a vocabulary from in-memory parts, enforcing dense ids and
    /// that every merge result is itself a token.
    pub fn from_parts(
        tokens: impl IntoIterator<Item = (String, u32)>,
        merges: Vec<(String, String)>,
    ) -> Result<Self> {
        let token_to_id: HashMap<String, u32> = tokens.into_iter().collect();
        let size = token_to_id.len();
        let mut id_to_token = vec![None::<String>; size];
        for (token, &id) in &token_to_id {
            let slot = id_to_token.get_mut(id as usize).ok_or_else(|| {
                Error::Integrity(format!(
                    "token {token:?} has id {id}, but ids must be dense in [0, {size})"
                ))
            })?;
            if let Some(other) = slot {
                return Err(Error::Integrity(format!(
                    "id {id} assigned to both {other:?} and {token:?}"
                )));
            }
            *slot = Some(token.clone());
        }
        // with n distinct ids all < n, every slot is filled
        let id_to_token: Vec<String> = id_to_token.into_iter().map(Option::unwrap).collect();

        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, (a, b)) in merges.iter().enumerate() {
            let joined = format!("{a}{b}");
            if !token_to_id.contains_key(&joined) {
                return Err(Error::Integrity(format!(
                    "merge {rank} ({a:?}, {b:?}) produces {joined:?}, which is not in the vocabulary"
                )));
            }
            merge_ranks.entry((a.clone(), b.clone())).or_insert(rank);
        }

        let byte_encoder = bytes::byte_encoder();
        let byte_decoder = byte_encoder
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();

        Ok(Vocab {
            token_to_id,
            id_to_token,
            merges,
            merge_ranks,
            byte_encoder,
            byte_decoder,
        })
    }

    /// Loads a JSON `{token: id}` vocabulary and a text merges file with one
    /// space-separated pair per line. A leading `#` line is treated as a header.
    pub fn load(vocab_file: &Path, merges_file: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(vocab_file).map_err(|e| Error::io(vocab_file, e))?;
        let tokens: BTreeMap<String, u32> = serde_json::from_str(&raw).map_err(|e| {
            Error::parse(vocab_file.display().to_string(), e.line(), e.to_string())
        })?;
        let raw = std::fs::read_to_string(merges_file).map_err(|e| Error::io(merges_file, e))?;
        let merges = parse_merges(&raw, &merges_file.display().to_string())?;
        Self::from_parts(tokens, merges)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn merge_rank(&self, a: &str, b: &str) -> Option<usize> {
        self.merge_ranks.get(&(a.to_owned(), b.to_owned())).copied()
    }

    /// Byte → printable-character table.
    pub fn byte_encoder(&self) -> &[char; 256] {
        &self.byte_encoder
    }

    /// Encodes `text`. Fails only when the vocabulary lacks a symbol the
    /// merges leave behind, which cannot happen for a vocabulary containing
    /// all 256 byte symbols.
    pub fn encode(&self, text: &str) -> Result<TokenSequence> {
        let mut seq = TokenSequence::default();
        let mut cache: HashMap<&str, Vec<String>> = HashMap::new();
        for (start, end) in pretokenize(text) {
            let piece = &text[start..end];
            let symbols = cache
                .entry(piece)
                .or_insert_with(|| self.bpe(piece))
                .clone();
            let mut pos = start;
            for symbol in symbols {
                let id = self.id(&symbol).ok_or_else(|| {
                    Error::Integrity(format!("symbol {symbol:?} has no id in the vocabulary"))
                })?;
                let width = symbol.chars().count();
                seq.ids.push(id);
                seq.offsets.push((pos, pos + width));
                pos += width;
            }
            debug_assert_eq!(pos, end);
        }
        Ok(seq)
    }

    /// Applies ranked merges to one pre-token, lowest rank first, merging
    /// every non-overlapping occurrence of the chosen pair per step.
    fn bpe(&self, piece: &str) -> Vec<String> {
        let mut symbols: Vec<String> = piece
            .bytes()
            .map(|b| self.byte_encoder[b as usize].to_string())
            .collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merge_rank(&w[0], &w[1]).map(|r| (r, w)))
                .min_by_key(|(r, _)| *r);
            let Some((_, pair)) = best else { break };
            let (left, right) = (pair[0].clone(), pair[1].clone());
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Decodes ids back to raw bytes.
    pub fn decode_bytes(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in ids {
            let token = self.token(id).ok_or(Error::OutOfRange {
                what: "token id",
                index: id as usize,
                range: format!("[0, {})", self.len()),
            })?;
            for c in token.chars() {
                let b = self.byte_decoder.get(&c).ok_or_else(|| {
                    Error::Integrity(format!("token {token:?} contains non-byte symbol {c:?}"))
                })?;
                out.push(*b);
            }
        }
        Ok(out)
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(ids)?).into_owned())
    }

    /// A vocabulary of the 256 byte symbols only (id = byte value), no merges.
    pub fn bytes_only() -> Self {
        let enc = bytes::byte_encoder();
        Self::from_parts(
            enc.iter().enumerate().map(|(b, c)| (c.to_string(), b as u32)),
            Vec::new(),
        )
        .expect("byte vocabulary is dense")
    }
}

fn parse_merges(raw: &str, context: &str) -> Result<Vec<(String, String)>> {
    let mut merges = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if idx == 0 && line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                merges.push((a.to_owned(), b.to_owned()))
            }
            _ => {
                return Err(Error::parse(
                    context,
                    line_no,
                    format!("expected two space-separated symbols, got {line:?}"),
                ))
            }
        }
    }
    Ok(merges)
}
