//! Pre-tokenization for byte-level BPE.
//!
//! Implements, as a hand-written scanner, the pattern
//!
//! ```text
//! 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
//! ```
//!
//! with leftmost-first alternation. The scanner runs over `char`s and yields
//! byte ranges into the input. Letters are approximated as
//! `is_alphabetic() && !is_numeric()`; numbers are `is_numeric()`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Other,
    Space,
}

fn class_of(c: char) -> Class {
    if c.is_whitespace() {
        Class::Space
    } else if c.is_numeric() {
        Class::Number
    } else if c.is_alphabetic() {
        Class::Letter
    } else {
        Class::Other
    }
}

const CONTRACTIONS: [&str; 7] = ["s", "t", "re", "ve", "m", "ll", "d"];

/// Splits `text` into pre-tokens, returned as half-open byte ranges that
/// tile the input exactly.
pub fn pretokenize(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let mut out = Vec::new();
    let mut i = 0;

    while i < n {
        let c = chars[i].1;

        if c == '\'' {
            let rest = &text[chars[i].0 + 1..];
            if let Some(suffix) = CONTRACTIONS.iter().find(|s| rest.starts_with(**s)) {
                let end = i + 1 + suffix.len();
                out.push((byte_at(i), byte_at(end)));
                i = end;
                continue;
            }
        }

        // optional single leading space, then a run of one class
        let head = if c == ' ' && i + 1 < n && class_of(chars[i + 1].1) != Class::Space {
            i + 1
        } else {
            i
        };
        let class = class_of(chars[head].1);
        if class != Class::Space {
            let mut end = head + 1;
            while end < n && class_of(chars[end].1) == class {
                end += 1;
            }
            out.push((byte_at(i), byte_at(end)));
            i = end;
            continue;
        }

        let mut run_end = i + 1;
        while run_end < n && class_of(chars[run_end].1) == Class::Space {
            run_end += 1;
        }
        let end = if run_end == n || run_end - i == 1 {
            run_end
        } else {
            // leave the last whitespace char to attach to the next token
            run_end - 1
        };
        out.push((byte_at(i), byte_at(end)));
        i = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pieces(text: &str) -> Vec<&str> {
        pretokenize(text).into_iter().map(|(a, b)| &text[a..b]).collect()
    }

    #[test]
    fn words_take_leading_space() {
        assert_eq!(pieces("Hello world"), ["Hello", " world"]);
    }

    #[test]
    fn contractions_split() {
        assert_eq!(pieces("don't we'll"), ["don", "'t", " we", "'ll"]);
        assert_eq!(pieces("I'M"), ["I", "'", "M"]);
    }

    #[test]
    fn punctuation_and_digits() {
        assert_eq!(pieces("pie, 42 times!"), ["pie", ",", " 42", " times", "!"]);
        assert_eq!(pieces(" 's"), [" '", "s"]);
    }

    #[test]
    fn whitespace_runs() {
        assert_eq!(pieces("a  b"), ["a", " ", " b"]);
        assert_eq!(pieces("a\nb"), ["a", "\n", "b"]);
        assert_eq!(pieces("a \n b"), ["a", " \n", " b"]);
        assert_eq!(pieces("a   "), ["a", "   "]);
        assert_eq!(pieces("  "), ["  "]);
    }

    #[test]
    fn tiles_input() {
        let text = "The pieman said: 'I've 3,000 pies!'\n\n  Okay?";
        let ranges = pretokenize(text);
        let mut pos = 0;
        for (a, b) in ranges {
            assert_eq!(a, pos);
            assert!(b > a);
            pos = b;
        }
        assert_eq!(pos, text.len());
    }
}
