//! Log-aware tokenization and vocabulary.
//!
//! Every other module (parsing, containment checks, metrics, models) goes
//! through [`tokenize`] so they all agree on token boundaries. The tokenizer
//! keeps domain symbols — block ids, IP addresses, `host:port` pairs, paths —
//! intact instead of shredding them on punctuation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Punctuation stripped off token edges into standalone tokens.
const EDGE_PUNCT: &[char] = &['.', ',', ';', ':', '?', '!', '"', '\''];

/// A single surface token. Non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(pub String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Token {
    fn from(s: &str) -> Self {
        Token(s.to_string())
    }
}

/// Split `text` into tokens.
///
/// Rules: split on whitespace; peel leading/trailing punctuation
/// (`. , ; : ? ! " '`) off each chunk into separate tokens; whatever remains
/// is emitted whole. Tokens are never split internally, so `blk_5142679`,
/// `/10.251.70.211` and `10.251.123.132:57542` survive as single tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && EDGE_PUNCT.contains(&chars[start]) {
            start += 1;
        }
        while end > start && EDGE_PUNCT.contains(&chars[end - 1]) {
            end -= 1;
        }
        for c in &chars[..start] {
            out.push(Token(c.to_string()));
        }
        if start < end {
            out.push(Token(chars[start..end].iter().collect()));
        }
        for c in &chars[end..] {
            out.push(Token(c.to_string()));
        }
    }
    out
}

/// Tokenize and return plain strings; convenience for containment checks.
pub fn tokenize_str(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.0).collect()
}

/// True when `needle` occurs as a contiguous subsequence of `haystack`.
pub fn contains_subsequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// True when the tokenized `answer` occurs inside the tokenized `text`.
pub fn contains_answer(text: &str, answer: &str) -> bool {
    contains_subsequence(&tokenize_str(text), &tokenize_str(answer))
}

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const SEP: u32 = 2;

/// Token/id bijection with reserved PAD, UNK and SEP ids.
#[derive(Debug, Clone)]
pub struct Vocab {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
    frequencies: Vec<u64>,
}

impl Vocab {
    /// Build a vocabulary from token streams, keeping tokens with frequency
    /// `>= min_freq` ordered by (frequency desc, surface asc).
    pub fn build<'a, I>(streams: I, min_freq: u64) -> Result<Vocab>
    where
        I: IntoIterator<Item = &'a [Token]>,
    {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        let mut total = 0usize;
        for stream in streams {
            for tok in stream {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyTokenStream);
        }
        let mut kept: Vec<(&str, u64)> =
            counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Vocab::with_specials();
        for (surface, count) in kept {
            let id = vocab.id_to_token.len() as u32;
            vocab.token_to_id.insert(surface.to_string(), id);
            vocab.id_to_token.push(surface.to_string());
            vocab.frequencies.push(count);
        }
        Ok(vocab)
    }

    fn with_specials() -> Vocab {
        let specials = ["<pad>", "<unk>", "<sep>"];
        Vocab {
            token_to_id: specials
                .iter()
                .enumerate()
                .map(|(i, s)| (s.to_string(), i as u32))
                .collect(),
            id_to_token: specials.iter().map(|s| s.to_string()).collect(),
            frequencies: vec![0; specials.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // specials are always present
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }

    /// Length-preserving token-to-id mapping; unknown tokens become UNK.
    pub fn encode(&self, tokens: &[Token]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_str())).collect()
    }

    pub fn encode_str(&self, text: &str) -> Vec<u32> {
        self.encode(&tokenize(text))
    }

    /// Write as `id<TAB>token<TAB>frequency` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (id, token) in self.id_to_token.iter().enumerate() {
            writeln!(f, "{id}\t{token}\t{}", self.frequencies[id]).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vocab = Vocab {
            token_to_id: BTreeMap::new(),
            id_to_token: Vec::new(),
            frequencies: Vec::new(),
        };
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.splitn(3, '\t');
            let bad = || Error::BadArtifact {
                path: path.to_path_buf(),
                reason: format!("malformed vocab line {}", lineno + 1),
            };
            let id: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let token = parts.next().ok_or_else(bad)?;
            let freq: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if id as usize != vocab.id_to_token.len() {
                return Err(bad());
            }
            vocab.token_to_id.insert(token.to_string(), id);
            vocab.id_to_token.push(token.to_string());
            vocab.frequencies.push(freq);
        }
        if vocab.len() < 3 {
            return Err(Error::BadArtifact {
                path: path.to_path_buf(),
                reason: "vocab missing special tokens".into(),
            });
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize_str(text)
    }

    #[test]
    fn question_splits_trailing_punctuation() {
        assert_eq!(
            surfaces("What is the size of block blk_5142679?"),
            ["What", "is", "the", "size", "of", "block", "blk_5142679", "?"]
        );
    }

    #[test]
    fn domain_symbols_survive() {
        let toks = surfaces("Received block blk_5142679 of size 67108864 from /10.251.70.211");
        assert!(toks.contains(&"/10.251.70.211".to_string()));
        assert!(toks.contains(&"blk_5142679".to_string()));
        let toks = surfaces("Receiving block blk_1 src: /10.250.5.237:52234 dest: /10.250.5.237:50010");
        assert!(toks.contains(&"/10.250.5.237:52234".to_string()));
        // "src:" sheds its trailing colon
        assert!(toks.contains(&"src".to_string()));
        assert!(toks.contains(&":".to_string()));
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn all_punctuation_chunk() {
        assert_eq!(surfaces("..."), [".", ".", "."]);
        assert_eq!(surfaces("'quoted'"), ["'", "quoted", "'"]);
    }

    #[test]
    fn retokenization_is_fixed_point() {
        for text in [
            "What is the size of block blk_5142679?",
            "Received block blk_1 of size 5 from /1.2.3.4",
            "pam_unix(sshd:auth): authentication failure; rhost=5.36.59.76",
            "a,b c... 'x'",
        ] {
            let once = surfaces(text);
            let again = surfaces(&once.join(" "));
            assert_eq!(once, again, "not a fixed point for {text:?}");
        }
    }

    #[test]
    fn subsequence_containment() {
        let log = tokenize_str("Responder 1 for block blk388 terminating");
        assert!(contains_subsequence(&log, &tokenize_str("Responder 1")));
        assert!(contains_subsequence(&log, &tokenize_str("blk388")));
        assert!(!contains_subsequence(&log, &tokenize_str("1 Responder")));
        assert!(!contains_subsequence(&log, &[]));
    }

    #[test]
    fn vocab_threshold_and_tiebreak() {
        let a = tokenize("a a b");
        let v = Vocab::build([a.as_slice()], 2).unwrap();
        assert_eq!(v.id("a"), 3);
        assert_eq!(v.id("b"), UNK);

        let t = tokenize("a b");
        let v = Vocab::build([t.as_slice()], 1).unwrap();
        // tie at frequency 1: lexicographic order
        assert_eq!(v.id("a"), 3);
        assert_eq!(v.id("b"), 4);
    }

    #[test]
    fn vocab_round_trip_and_unk() {
        let stream = tokenize("Received block blk_1 of size 5 from /1.2.3.4");
        let v = Vocab::build([stream.as_slice()], 1).unwrap();
        let ids = v.encode(&stream);
        assert_eq!(ids.len(), stream.len());
        for (tok, id) in stream.iter().zip(&ids) {
            assert_eq!(v.token(*id), Some(tok.as_str()));
        }
        assert_eq!(v.id("never-seen"), UNK);
        assert!(v.encode(&[]).is_empty());
    }

    #[test]
    fn vocab_rejects_empty_stream() {
        assert!(matches!(Vocab::build([], 1), Err(Error::EmptyTokenStream)));
    }

    #[test]
    fn vocab_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        let stream = tokenize("x y y z");
        let v = Vocab::build([stream.as_slice()], 1).unwrap();
        v.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(loaded.len(), v.len());
        for id in 0..v.len() as u32 {
            assert_eq!(loaded.token(id), v.token(id));
        }
    }
}
