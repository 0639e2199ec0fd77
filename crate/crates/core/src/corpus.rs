//! Raw log corpora and labeled QA datasets.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::text;

/// One raw log line with its stable, dense, 0-based id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub id: usize,
    pub text: String,
}

/// The retrieval universe: an ordered list of log records.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    pub records: Vec<LogRecord>,
}

impl Corpus {
    pub fn from_lines<I, T>(name: &str, lines: I) -> Result<Corpus>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let records: Vec<LogRecord> = lines
            .into_iter()
            .filter(|l| !l.as_ref().trim().is_empty())
            .enumerate()
            .map(|(id, l)| LogRecord { id, text: l.as_ref().trim().to_string() })
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyCorpus(name.to_string()));
        }
        Ok(Corpus { name: name.to_string(), records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn text(&self, id: usize) -> &str {
        &self.records[id].text
    }

    /// Tokenized form of every record, computed once.
    pub fn tokenized(&self) -> Vec<Vec<String>> {
        self.records.iter().map(|r| text::tokenize_str(&r.text)).collect()
    }

    /// First record whose raw text equals `needle` exactly.
    pub fn find_exact(&self, needle: &str) -> Option<usize> {
        self.records.iter().find(|r| r.text == needle).map(|r| r.id)
    }
}

/// Load a corpus from a UTF-8 file, one log per line, blank lines skipped.
pub fn load_log_corpus(path: &Path, name: &str) -> Result<Corpus> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(f)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    Corpus::from_lines(name, lines)
}

/// One labeled example: a question, the gold answer span text, and the
/// corpus log that contains it (when resolvable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    pub gold_log_id: Option<usize>,
}

/// Why a source record was rejected during loading.
#[derive(Debug, Clone)]
pub struct RejectedRecord {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RejectedRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Outcome of [`load_qa_pairs`]: accepted pairs plus a validation report.
#[derive(Debug, Clone, Default)]
pub struct QaLoadReport {
    pub rejected: Vec<RejectedRecord>,
}

impl QaLoadReport {
    /// Plain-text report, one rejected record per line.
    pub fn to_text(&self) -> String {
        self.rejected.iter().map(|r| format!("{r}\n")).collect()
    }
}

#[derive(Deserialize)]
struct RawQaRecord {
    question: String,
    answer: String,
    #[serde(default)]
    log: Option<String>,
}

/// Load QA pairs from a JSON-lines file: one object per line with string
/// fields `question`, `answer` and `log`; unknown fields are ignored.
///
/// Gold logs are resolved by exact raw-text match against `corpus` (first
/// occurrence wins). Records whose answer is not a contiguous token
/// subsequence of their gold log are rejected and listed in the report.
pub fn load_qa_pairs(path: &Path, corpus: &Corpus) -> Result<(Vec<QaPair>, QaLoadReport)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    let mut report = QaLoadReport::default();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQaRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RejectedRecord {
                    line: lineno,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        if raw.question.trim().is_empty() || raw.answer.trim().is_empty() {
            report.rejected.push(RejectedRecord {
                line: lineno,
                reason: "empty question or answer".into(),
            });
            continue;
        }
        let gold_log_id = match &raw.log {
            Some(log) => match corpus.find_exact(log.trim()) {
                Some(id) => Some(id),
                None => {
                    report.rejected.push(RejectedRecord {
                        line: lineno,
                        reason: format!("gold log not found in corpus: {log:?}"),
                    });
                    continue;
                }
            },
            None => None,
        };
        if let Some(id) = gold_log_id {
            if !text::contains_answer(corpus.text(id), &raw.answer) {
                report.rejected.push(RejectedRecord {
                    line: lineno,
                    reason: format!(
                        "answer {:?} is not a token subsequence of the gold log",
                        raw.answer
                    ),
                });
                continue;
            }
        }
        pairs.push(QaPair { question: raw.question, answer: raw.answer, gold_log_id });
    }
    Ok((pairs, report))
}

/// Disjoint train/validation/test partition of a QA dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<QaPair>,
    pub validation: Vec<QaPair>,
    pub test: Vec<QaPair>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

/// Deterministically shuffle and partition `pairs`.
///
/// Sizes are floor-based for train and validation; the remainder goes to
/// test, so train never exceeds its quota.
pub fn split_dataset(pairs: &[QaPair], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if pairs.len() < 3 {
        return Err(Error::DatasetTooSmall { need: 3, got: pairs.len() });
    }
    if ratios.iter().any(|&r| r <= 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::BadSplitRatios(ratios));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n = pairs.len();
    let n_train = (n as f64 * ratios[0]).floor() as usize;
    let n_val = (n as f64 * ratios[1]).floor() as usize;

    let pick = |ids: &[usize]| ids.iter().map(|&i| pairs[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn single_line_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "logs.txt", "Received block blk_1 of size 5 from /1.2.3.4\n");
        let corpus = load_log_corpus(&path, "toy").unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.records[0].id, 0);
        assert_eq!(corpus.records[0].text, "Received block blk_1 of size 5 from /1.2.3.4");
    }

    #[test]
    fn blank_lines_skipped_and_empty_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "logs.txt", "\na b\n\n   \nc d\n");
        let corpus = load_log_corpus(&path, "toy").unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.records[1].text, "c d");

        let empty = write_file(&dir, "empty.txt", "\n  \n\n");
        assert!(matches!(load_log_corpus(&empty, "toy"), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn qa_loading_resolves_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let logs = write_file(&dir, "logs.txt", "size 5\nother line\n");
        let corpus = load_log_corpus(&logs, "toy").unwrap();
        let qa = write_file(
            &dir,
            "qa.jsonl",
            concat!(
                r#"{"question":"Q?","answer":"5","log":"size 5","extra":1}"#, "\n",
                r#"{"question":"Q2?","answer":"99","log":"size 5"}"#, "\n",
                r#"not json"#, "\n",
                r#"{"question":"Q3?","answer":"x","log":"missing log"}"#, "\n",
            ),
        );
        let (pairs, report) = load_qa_pairs(&qa, &corpus).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].gold_log_id, Some(0));
        assert_eq!(report.rejected.len(), 3);
        let text = report.to_text();
        assert!(text.contains("line 2"));
        assert!(text.contains("not a token subsequence"));
        assert!(text.contains("line 3"));
        assert!(text.contains("line 4"));
    }

    fn toy_pairs(n: usize) -> Vec<QaPair> {
        (0..n)
            .map(|i| QaPair {
                question: format!("q{i}"),
                answer: format!("a{i}"),
                gold_log_id: Some(i),
            })
            .collect()
    }

    #[test]
    fn split_sizes_exact() {
        let split = split_dataset(&toy_pairs(10), [0.6, 0.1, 0.3], 7).unwrap();
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (6, 1, 3));

        // floor arithmetic at the published dataset size
        let split = split_dataset(&toy_pairs(247), [0.6, 0.1, 0.3], 123).unwrap();
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (148, 24, 75));
    }

    #[test]
    fn split_is_deterministic_partition() {
        let pairs = toy_pairs(41);
        for seed in [0u64, 7, 999] {
            let a = split_dataset(&pairs, [0.6, 0.1, 0.3], seed).unwrap();
            let b = split_dataset(&pairs, [0.6, 0.1, 0.3], seed).unwrap();
            assert_eq!(a.train, b.train);
            assert_eq!(a.validation, b.validation);
            assert_eq!(a.test, b.test);

            let mut all: Vec<&QaPair> =
                a.train.iter().chain(&a.validation).chain(&a.test).collect();
            assert_eq!(all.len(), pairs.len());
            all.sort_by(|x, y| x.question.cmp(&y.question));
            all.dedup_by(|x, y| x.question == y.question);
            assert_eq!(all.len(), pairs.len(), "splits overlap for seed {seed}");
        }
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(
            split_dataset(&toy_pairs(2), [0.6, 0.1, 0.3], 0),
            Err(Error::DatasetTooSmall { .. })
        ));
        assert!(matches!(
            split_dataset(&toy_pairs(5), [0.5, 0.1, 0.3], 0),
            Err(Error::BadSplitRatios(_))
        ));
    }
}
