//! Non-neural reading baselines: random token, sliding window, and a
//! logistic-regression span classifier whose dense features come from the
//! frozen retriever encoder.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::text::{self, Vocab};

/// Reading baseline selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadingBaseline {
    RandomToken,
    SlidingWindow,
    LogisticRegression,
}

impl ReadingBaseline {
    pub fn name(&self) -> &'static str {
        match self {
            ReadingBaseline::RandomToken => "random_token",
            ReadingBaseline::SlidingWindow => "sliding_window",
            ReadingBaseline::LogisticRegression => "logistic_regression",
        }
    }
}

impl FromStr for ReadingBaseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_token" => Ok(ReadingBaseline::RandomToken),
            "sliding_window" => Ok(ReadingBaseline::SlidingWindow),
            "logistic_regression" => Ok(ReadingBaseline::LogisticRegression),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Sample one token of the top-ranked log, uniformly, seeded.
pub fn random_token_answer(top_log_tokens: &[String], seed: u64) -> Result<String> {
    if top_log_tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(top_log_tokens[rng.gen_range(0..top_log_tokens.len())].clone())
}

/// Candidate span location across a list of logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanRef {
    pub log_rank: usize,
    pub start: usize,
    pub len: usize,
}

/// Pick the window (length 1..=max_span_len over any of the logs) with the
/// highest unigram overlap with the question. Ties prefer earlier logs,
/// earlier starts, shorter windows.
pub fn sliding_window_answer(
    question: &str,
    logs_tokens: &[&[String]],
    max_span_len: usize,
) -> Result<(String, SpanRef)> {
    if logs_tokens.is_empty() || logs_tokens.iter().all(|l| l.is_empty()) {
        return Err(Error::EmptySequence);
    }
    let question_tokens = text::tokenize_str(question);
    let question_set: BTreeSet<&String> = question_tokens.iter().collect();
    let mut best: Option<(usize, SpanRef)> = None;
    for (log_rank, tokens) in logs_tokens.iter().enumerate() {
        for start in 0..tokens.len() {
            for len in 1..=max_span_len.min(tokens.len() - start) {
                let window = &tokens[start..start + len];
                let overlap = window
                    .iter()
                    .collect::<BTreeSet<_>>()
                    .iter()
                    .filter(|t| question_set.contains(**t))
                    .count();
                let candidate = SpanRef { log_rank, start, len };
                let better = match &best {
                    None => true,
                    Some((o, _)) => overlap > *o,
                };
                if better {
                    best = Some((overlap, candidate));
                }
            }
        }
    }
    let (_, span) = best.expect("non-empty logs yield at least one window");
    let tokens = logs_tokens[span.log_rank];
    Ok((tokens[span.start..span.start + span.len].join(" "), span))
}

/// Plain binary logistic regression trained by gradient descent.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn fit(
        features: &[Vec<f64>],
        labels: &[bool],
        learning_rate: f64,
        epochs: usize,
        seed: u64,
    ) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: features.len() });
        }
        let dim = features[0].len();
        let mut model = LogisticRegression { weights: vec![0.0; dim], bias: 0.0 };
        let mut order: Vec<usize> = (0..features.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let p = model.predict_proba(&features[i]);
                let err = p - if labels[i] { 1.0 } else { 0.0 };
                for (w, x) in model.weights.iter_mut().zip(&features[i]) {
                    *w -= learning_rate * err * x;
                }
                model.bias -= learning_rate * err;
            }
        }
        Ok(model)
    }

    pub fn predict_proba(&self, features: &[f64]) -> f64 {
        let z: f64 =
            self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + self.bias;
        1.0 / (1.0 + (-z).exp())
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[bool]) -> f64 {
        let correct = features
            .iter()
            .zip(labels)
            .filter(|(f, &l)| (self.predict_proba(f) >= 0.5) == l)
            .count();
        correct as f64 / labels.len() as f64
    }
}

/// Span features for the logistic-regression reader: lexical overlap,
/// parameter-mask coverage, position, length, and the frozen-encoder cosine
/// between question and span.
pub struct SpanFeaturizer<'a, S: Scalar> {
    pub encoder: &'a EncoderParams<S>,
    pub vocab: &'a Vocab,
}

impl<'a, S: Scalar> SpanFeaturizer<'a, S> {
    pub const DIM: usize = 6;

    pub fn features(
        &self,
        question_tokens: &[String],
        log_tokens: &[String],
        param_mask: &[bool],
        start: usize,
        len: usize,
    ) -> Vec<f64> {
        let span = &log_tokens[start..start + len];
        let question_set: BTreeSet<&String> = question_tokens.iter().collect();
        let overlap = span.iter().filter(|t| question_set.contains(*t)).count();
        let param_cover = param_mask[start..start + len].iter().filter(|&&m| m).count();
        let cosine = self.span_cosine(question_tokens, span);
        vec![
            overlap as f64,
            overlap as f64 / len as f64,
            param_cover as f64 / len as f64,
            start as f64 / log_tokens.len() as f64,
            len as f64,
            cosine,
        ]
    }

    fn span_cosine(&self, question_tokens: &[String], span: &[String]) -> f64 {
        let q_ids: Vec<u32> = question_tokens.iter().map(|t| self.vocab.id(t)).collect();
        let s_ids: Vec<u32> = span.iter().map(|t| self.vocab.id(t)).collect();
        match (self.encoder.embed(&q_ids), self.encoder.embed(&s_ids)) {
            (Ok(q), Ok(s)) => crate::encoder::cosine(q.view(), s.view())
                .map(|c| c.as_f64())
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

/// Logistic-regression reading baseline: trained on gold spans vs sampled
/// negative spans, applied to every candidate span of the retrieved logs.
pub struct LogisticReader<'a, S: Scalar> {
    pub model: LogisticRegression,
    pub featurizer: SpanFeaturizer<'a, S>,
    pub max_span_len: usize,
}

impl<'a, S: Scalar> LogisticReader<'a, S> {
    /// Train on (question, gold log, gold span) triples; negatives are
    /// random non-gold spans of the same logs.
    pub fn train(
        featurizer: SpanFeaturizer<'a, S>,
        examples: &[(Vec<String>, Vec<String>, Vec<bool>, (usize, usize))],
        max_span_len: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (question, log, mask, (gold_start, gold_end)) in examples {
            let gold_len = gold_end - gold_start + 1;
            features.push(featurizer.features(question, log, mask, *gold_start, gold_len));
            labels.push(true);
            // up to 4 negative spans per example
            let mut tries = 0;
            let mut negatives = 0;
            while negatives < 4 && tries < 32 {
                tries += 1;
                let start = rng.gen_range(0..log.len());
                let len = rng.gen_range(1..=max_span_len.min(log.len() - start));
                if start == *gold_start && start + len - 1 == *gold_end {
                    continue;
                }
                features.push(featurizer.features(question, log, mask, start, len));
                labels.push(false);
                negatives += 1;
            }
        }
        let model = LogisticRegression::fit(&features, &labels, 0.1, 100, seed)?;
        Ok(LogisticReader { model, featurizer, max_span_len })
    }

    /// Highest-probability span over all candidate spans of the given logs.
    pub fn answer(
        &self,
        question_tokens: &[String],
        logs: &[(&[String], &[bool])],
    ) -> Result<String> {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (log_rank, (tokens, mask)) in logs.iter().enumerate() {
            for start in 0..tokens.len() {
                for len in 1..=self.max_span_len.min(tokens.len() - start) {
                    let f = self.featurizer.features(question_tokens, tokens, mask, start, len);
                    let p = self.model.predict_proba(&f);
                    let better = match best {
                        None => true,
                        Some((bp, ..)) => p > bp,
                    };
                    if better {
                        best = Some((p, log_rank, start, len));
                    }
                }
            }
        }
        let (_, log_rank, start, len) = best.ok_or(Error::EmptySequence)?;
        Ok(logs[log_rank].0[start..start + len].join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_token_reproducible() {
        let tokens = text::tokenize_str("Received block blk_1 of size 5");
        let a = random_token_answer(&tokens, 9).unwrap();
        let b = random_token_answer(&tokens, 9).unwrap();
        assert_eq!(a, b);
        assert!(tokens.contains(&a));
    }

    #[test]
    fn sliding_window_unique_maximum_wins() {
        let question = "what is the size of blk_1";
        let log_a = text::tokenize_str("unrelated words only here");
        let log_b = text::tokenize_str("noise size blk_1 noise");
        let (answer, span) =
            sliding_window_answer(question, &[&log_a, &log_b], 2).unwrap();
        assert_eq!(answer, "size blk_1");
        assert_eq!(span.log_rank, 1);
    }

    #[test]
    fn logistic_regression_separable_reaches_full_accuracy() {
        // one informative dimension, comfortably separable
        let features: Vec<Vec<f64>> = (0..20)
            .map(|i| if i < 10 { vec![1.0, 0.3] } else { vec![-1.0, 0.3] })
            .collect();
        let labels: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let model = LogisticRegression::fit(&features, &labels, 0.5, 200, 3).unwrap();
        assert_eq!(model.accuracy(&features, &labels), 1.0);
    }
}
