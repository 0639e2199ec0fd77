//! Non-learned retrieval baselines: random, edit distance, Jaccard, BM25,
//! Jaro-Winkler, and frozen-encoder cosine.
//!
//! All of them produce "higher is better" scores (edit distance is negated)
//! and rank with the same tie-break as the trained retriever.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::retriever::rank_by_score;
use crate::text;

/// Lexical baseline selector. The frozen-encoder cosine baseline is driven
/// through the trained-retriever code path with untrained parameters, so it
/// is not listed here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalMethod {
    Random,
    EditDistance,
    Jaccard,
    Bm25,
    JaroWinkler,
}

impl LexicalMethod {
    pub const ALL: [LexicalMethod; 5] = [
        LexicalMethod::Random,
        LexicalMethod::EditDistance,
        LexicalMethod::Jaccard,
        LexicalMethod::Bm25,
        LexicalMethod::JaroWinkler,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LexicalMethod::Random => "random",
            LexicalMethod::EditDistance => "edit_distance",
            LexicalMethod::Jaccard => "jaccard",
            LexicalMethod::Bm25 => "bm25",
            LexicalMethod::JaroWinkler => "jaro_winkler",
        }
    }
}

impl FromStr for LexicalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(LexicalMethod::Random),
            "edit_distance" => Ok(LexicalMethod::EditDistance),
            "jaccard" => Ok(LexicalMethod::Jaccard),
            "bm25" => Ok(LexicalMethod::Bm25),
            "jaro_winkler" => Ok(LexicalMethod::JaroWinkler),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Character-level Levenshtein distance, two-row formulation.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Jaccard similarity of the two token sets.
pub fn jaccard(question: &str, log: &str) -> f64 {
    let q: BTreeSet<String> = text::tokenize_str(question).into_iter().collect();
    let l: BTreeSet<String> = text::tokenize_str(log).into_iter().collect();
    let inter = q.intersection(&l).count();
    let union = q.union(&l).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaro similarity over characters.
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let radius = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_hit = vec![false; a.len()];
    let mut b_hit = vec![false; b.len()];
    let mut matches = 0usize;
    for i in 0..a.len() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(b.len());
        for j in lo..hi {
            if !b_hit[j] && a[i] == b[j] {
                a_hit[i] = true;
                b_hit[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let mut transpositions = 0usize;
    let mut j = 0usize;
    for i in 0..a.len() {
        if !a_hit[i] {
            continue;
        }
        while !b_hit[j] {
            j += 1;
        }
        if a[i] != b[j] {
            transpositions += 1;
        }
        j += 1;
    }
    let m = matches as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - transpositions as f64 / 2.0) / m) / 3.0
}

/// Jaro-Winkler: Jaro with a common-prefix boost (scale 0.1, up to 4 chars)
/// above the 0.7 threshold.
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let j = jaro(a, b);
    if j <= 0.7 {
        return j;
    }
    let prefix = a
        .chars()
        .zip(b.chars())
        .take(4)
        .take_while(|(x, y)| x == y)
        .count();
    j + prefix as f64 * 0.1 * (1.0 - j)
}

/// Okapi BM25 with the non-negative idf variant
/// `ln(1 + (N - df + 0.5) / (df + 0.5))`. Defaults k1 = 1.5, b = 0.75.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_tokens: Vec<Vec<String>>,
    doc_freq: BTreeMap<String, usize>,
    avg_len: f64,
    pub k1: f64,
    pub b: f64,
}

impl Bm25Index {
    pub fn new(docs: &[Vec<String>]) -> Self {
        Self::with_params(docs, 1.5, 0.75)
    }

    pub fn with_params(docs: &[Vec<String>], k1: f64, b: f64) -> Self {
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let distinct: BTreeSet<&String> = doc.iter().collect();
            for tok in distinct {
                *doc_freq.entry(tok.clone()).or_insert(0) += 1;
            }
        }
        let avg_len = if docs.is_empty() {
            0.0
        } else {
            docs.iter().map(Vec::len).sum::<usize>() as f64 / docs.len() as f64
        };
        Bm25Index { doc_tokens: docs.to_vec(), doc_freq, avg_len, k1, b }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::new(&corpus.tokenized())
    }

    pub fn score(&self, query_tokens: &[String], doc_id: usize) -> f64 {
        let doc = &self.doc_tokens[doc_id];
        let n = self.doc_tokens.len() as f64;
        let dl = doc.len() as f64;
        let mut total = 0.0;
        for term in query_tokens {
            let tf = doc.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = *self.doc_freq.get(term).unwrap_or(&0) as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * dl / self.avg_len));
            total += idf * norm;
        }
        total
    }
}

/// Score one (question, log) pair with a lexical method. Random needs a seed;
/// BM25 needs corpus statistics, so it is scored through [`Bm25Index`] here.
pub fn baseline_score(
    method: LexicalMethod,
    question: &str,
    log: &str,
    bm25: Option<(&Bm25Index, usize)>,
    seed: u64,
) -> Result<f64> {
    Ok(match method {
        LexicalMethod::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.gen_range(0.0..1.0)
        }
        LexicalMethod::EditDistance => -(edit_distance(question, log) as f64),
        LexicalMethod::Jaccard => jaccard(question, log),
        LexicalMethod::Bm25 => {
            let (index, doc_id) = bm25.ok_or_else(|| {
                Error::InvalidConfig("bm25 scoring needs prebuilt corpus statistics".into())
            })?;
            index.score(&text::tokenize_str(question), doc_id)
        }
        LexicalMethod::JaroWinkler => jaro_winkler(question, log),
    })
}

/// Rank every corpus log for `question`, best first, with the shared
/// (score desc, log id asc) tie-break. `seed` only affects Random.
pub fn rank_logs(
    method: LexicalMethod,
    question: &str,
    corpus: &Corpus,
    bm25: Option<&Bm25Index>,
    seed: u64,
) -> Result<Vec<usize>> {
    let scores: Vec<f64> = match method {
        LexicalMethod::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..corpus.len()).map(|_| rng.gen_range(0.0..1.0)).collect()
        }
        LexicalMethod::EditDistance => corpus
            .records
            .iter()
            .map(|r| -(edit_distance(question, &r.text) as f64))
            .collect(),
        LexicalMethod::Jaccard => {
            corpus.records.iter().map(|r| jaccard(question, &r.text)).collect()
        }
        LexicalMethod::Bm25 => {
            let index = bm25.ok_or_else(|| {
                Error::InvalidConfig("bm25 ranking needs prebuilt corpus statistics".into())
            })?;
            let q = text::tokenize_str(question);
            (0..corpus.len()).map(|id| index.score(&q, id)).collect()
        }
        LexicalMethod::JaroWinkler => {
            corpus.records.iter().map(|r| jaro_winkler(question, &r.text)).collect()
        }
    };
    Ok(rank_by_score(scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance("abc", "abd"), 1);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(
            baseline_score(LexicalMethod::EditDistance, "abc", "abd", None, 0).unwrap(),
            -1.0
        );
    }

    #[test]
    fn jaccard_basics() {
        assert_eq!(jaccard("a b", "a b"), 1.0);
        assert_eq!(jaccard("a", "b"), 0.0);
        // {a,b,c} vs {b,c,d}: 2 shared / 4 in union
        assert_eq!(jaccard("a b c", "b c d"), 0.5);
    }

    #[test]
    fn jaro_winkler_reference_values() {
        assert!((jaro("martha", "marhta") - 0.9444444444444445).abs() < 1e-12);
        assert!((jaro_winkler("martha", "marhta") - 0.9611111111111111).abs() < 1e-12);
        assert_eq!(jaro_winkler("same", "same"), 1.0);
        assert_eq!(jaro("abc", "xyz"), 0.0);
    }

    #[test]
    fn bm25_matches_hand_computed_table() {
        // Frozen from an independent scalar computation with
        // k1 = 1.5, b = 0.75, idf = ln(1 + (N - df + 0.5)/(df + 0.5)).
        let docs = vec![
            text::tokenize_str("received block blk1 of size 100"),
            text::tokenize_str("deleting block blk2"),
            text::tokenize_str("verification succeeded for blk1"),
        ];
        let index = Bm25Index::new(&docs);
        let query = text::tokenize_str("size of block blk1");
        assert!((index.score(&query, 0) - 2.4735511435209183).abs() < 1e-12);
        assert!((index.score(&query, 1) - 0.5455399268030858).abs() < 1e-12);
        assert!((index.score(&query, 2) - 0.4868563490194871).abs() < 1e-12);
    }

    #[test]
    fn random_ranking_is_seeded() {
        let corpus = Corpus::from_lines("t", ["a", "b", "c", "d"]).unwrap();
        let r1 = rank_logs(LexicalMethod::Random, "q", &corpus, None, 42).unwrap();
        let r2 = rank_logs(LexicalMethod::Random, "q", &corpus, None, 42).unwrap();
        let r3 = rank_logs(LexicalMethod::Random, "q", &corpus, None, 43).unwrap();
        assert_eq!(r1, r2);
        assert_ne!(r1, r3);
    }

    #[test]
    fn unknown_method_error() {
        assert!(matches!("tfidf".parse::<LexicalMethod>(), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn ranking_ties_break_by_id() {
        let corpus = Corpus::from_lines("t", ["x y", "x y", "zz"]).unwrap();
        let ranked = rank_logs(LexicalMethod::Jaccard, "x y", &corpus, None, 0).unwrap();
        assert_eq!(&ranked[..2], &[0, 1]);
    }
}
