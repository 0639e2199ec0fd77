//! Metrics and the experiment harness: top-k retrieval accuracy, exact
//! match, token-overlap F1, side-by-side method tables, and the
//! hard-negative ablation.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, QaPair};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::parsing::{parameter_token_mask, ParsedCorpus};
use crate::reader::baselines::{
    random_token_answer, sliding_window_answer, LogisticReader, SpanFeaturizer,
};
use crate::reader::{
    answer_question, gold_occurrences, InferenceContext, ReaderModel,
};
use crate::retriever::baselines::{rank_logs, Bm25Index, LexicalMethod};
use crate::retriever::{retrieve_topk, LogIndex};
use crate::text::{self, Vocab};

/// Fraction of questions whose top-k set contains at least one log whose
/// tokens contain the gold answer as a contiguous subsequence.
pub fn acc_at_k(
    topk_sets: &[Vec<usize>],
    answers: &[String],
    corpus_tokens: &[Vec<String>],
) -> Result<f64> {
    if topk_sets.is_empty() {
        return Err(Error::EmptyQuestionSet);
    }
    if topk_sets.len() != answers.len() {
        return Err(Error::DimensionMismatch { expected: answers.len(), got: topk_sets.len() });
    }
    let hits = topk_sets
        .iter()
        .zip(answers)
        .filter(|(set, answer)| {
            let answer_tokens = text::tokenize_str(answer);
            set.iter().any(|&id| text::contains_subsequence(&corpus_tokens[id], &answer_tokens))
        })
        .count();
    Ok(hits as f64 / topk_sets.len() as f64)
}

/// 1 when the two token sequences are identical (case-sensitive), else 0.
pub fn exact_match(prediction: &str, gold: &str) -> u32 {
    u32::from(text::tokenize_str(prediction) == text::tokenize_str(gold))
}

/// Token-bag precision, recall and F1 between prediction and gold.
pub fn f1_score(prediction: &str, gold: &str) -> Result<(f64, f64, f64)> {
    let gold_tokens = text::tokenize_str(gold);
    if gold_tokens.is_empty() {
        return Err(Error::EmptyGold);
    }
    let pred_tokens = text::tokenize_str(prediction);
    let mut gold_counts: BTreeMap<&String, usize> = BTreeMap::new();
    for t in &gold_tokens {
        *gold_counts.entry(t).or_insert(0) += 1;
    }
    let mut same = 0usize;
    for t in &pred_tokens {
        if let Some(c) = gold_counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                same += 1;
            }
        }
    }
    if same == 0 || pred_tokens.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let precision = same as f64 / pred_tokens.len() as f64;
    let recall = same as f64 / gold_tokens.len() as f64;
    Ok((precision, recall, 2.0 * precision * recall / (precision + recall)))
}

/// Acc@K per method, one row each.
#[derive(Debug, Clone)]
pub struct RetrievalEvalReport {
    pub dataset: String,
    pub split_seed: u64,
    pub question_count: usize,
    pub ks: Vec<usize>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl RetrievalEvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for k in &self.ks {
            out.push_str(&format!(",acc@{k}"));
        }
        out.push('\n');
        for (method, accs) in &self.rows {
            out.push_str(method);
            for a in accs {
                out.push_str(&format!(",{a:.4}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "retrieval on {} ({} test questions, split seed {})\n",
            self.dataset, self.question_count, self.split_seed
        );
        out.push_str(&format!("{:<18}", "method"));
        for k in &self.ks {
            out.push_str(&format!("{:>10}", format!("Acc@{k}")));
        }
        out.push('\n');
        for (method, accs) in &self.rows {
            out.push_str(&format!("{method:<18}"));
            for a in accs {
                out.push_str(&format!("{a:>10.4}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn row(&self, method: &str) -> Option<&[f64]> {
        self.rows.iter().find(|(m, _)| m == method).map(|(_, a)| a.as_slice())
    }
}

/// EM and F1 per reading method.
#[derive(Debug, Clone)]
pub struct ReaderEvalReport {
    pub dataset: String,
    pub retrieval_k: usize,
    pub rows: Vec<(String, f64, f64)>,
}

impl ReaderEvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,em,f1\n");
        for (method, em, f1) in &self.rows {
            out.push_str(&format!("{method},{em:.4},{f1:.4}\n"));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("reading on {} (top-{} retrieval)\n", self.dataset, self.retrieval_k);
        out.push_str(&format!("{:<22}{:>10}{:>10}\n", "method", "EM", "F1"));
        for (method, em, f1) in &self.rows {
            out.push_str(&format!("{method:<22}{em:>10.4}{f1:>10.4}\n"));
        }
        out
    }

    pub fn row(&self, method: &str) -> Option<(f64, f64)> {
        self.rows.iter().find(|(m, ..)| m == method).map(|(_, em, f1)| (*em, *f1))
    }
}

/// A trained (or frozen) dense retriever ready for evaluation.
pub struct DenseRetriever<'a, S: Scalar> {
    pub name: String,
    pub params: &'a EncoderParams<S>,
    pub index: &'a LogIndex<S>,
    pub temperature: S,
}

/// Evaluate lexical baselines and any dense retrievers on the same test
/// pairs and ks. One row per method; Acc@K from nested top-k prefixes.
pub fn evaluate_retriever<S: Scalar>(
    methods: &[LexicalMethod],
    dense: &[DenseRetriever<'_, S>],
    test: &[QaPair],
    corpus: &Corpus,
    vocab: &Vocab,
    ks: &[usize],
    seed: u64,
    dataset: &str,
) -> Result<RetrievalEvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyQuestionSet);
    }
    let corpus_tokens = corpus.tokenized();
    let answers: Vec<String> = test.iter().map(|p| p.answer.clone()).collect();
    let max_k = ks.iter().copied().max().unwrap_or(1).min(corpus.len());
    let mut rows = Vec::new();

    let bm25 = methods
        .contains(&LexicalMethod::Bm25)
        .then(|| Bm25Index::from_corpus(corpus));
    for &method in methods {
        let mut prefixes: Vec<Vec<usize>> = Vec::with_capacity(test.len());
        for (qi, pair) in test.iter().enumerate() {
            let question_seed = seed.wrapping_mul(1_000_003).wrapping_add(qi as u64);
            let ranked =
                rank_logs(method, &pair.question, corpus, bm25.as_ref(), question_seed)?;
            prefixes.push(ranked.into_iter().take(max_k).collect());
        }
        let accs = accs_for_prefixes(&prefixes, &answers, &corpus_tokens, ks)?;
        rows.push((method.name().to_string(), accs));
    }

    for retriever in dense {
        retriever.index.verify(retriever.params)?;
        let mut prefixes: Vec<Vec<usize>> = Vec::with_capacity(test.len());
        for pair in test {
            let ids = vocab.encode_str(&pair.question);
            let result =
                retrieve_topk(retriever.params, retriever.index, &ids, max_k, retriever.temperature)?;
            prefixes.push(result.log_ids());
        }
        let accs = accs_for_prefixes(&prefixes, &answers, &corpus_tokens, ks)?;
        rows.push((retriever.name.clone(), accs));
    }

    Ok(RetrievalEvalReport {
        dataset: dataset.to_string(),
        split_seed: seed,
        question_count: test.len(),
        ks: ks.to_vec(),
        rows,
    })
}

fn accs_for_prefixes(
    prefixes: &[Vec<usize>],
    answers: &[String],
    corpus_tokens: &[Vec<String>],
    ks: &[usize],
) -> Result<Vec<f64>> {
    ks.iter()
        .map(|&k| {
            let sets: Vec<Vec<usize>> =
                prefixes.iter().map(|p| p.iter().copied().take(k).collect()).collect();
            acc_at_k(&sets, answers, corpus_tokens)
        })
        .collect()
}

/// Inputs for one reading evaluation run.
pub struct ReaderEvalSetup<'a, S: Scalar> {
    pub encoder: &'a EncoderParams<S>,
    pub index: &'a LogIndex<S>,
    pub reader: &'a ReaderModel<S>,
    pub parsed: &'a ParsedCorpus,
    pub vocab: &'a Vocab,
    pub temperature: S,
    pub max_span_len: usize,
}

/// Evaluate the trained reader plus the three baselines on `test`, feeding
/// each method the trained retriever's top-k logs. Also emits the gold-log
/// condition (retrieval bypassed) for the trained reader.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_reader<S: Scalar>(
    setup: &ReaderEvalSetup<'_, S>,
    train: &[QaPair],
    test: &[QaPair],
    corpus: &Corpus,
    k: usize,
    seed: u64,
    dataset: &str,
) -> Result<ReaderEvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyQuestionSet);
    }
    let corpus_tokens = corpus.tokenized();
    let corpus_token_ids: Vec<Vec<u32>> = corpus_tokens
        .iter()
        .map(|toks| toks.iter().map(|t| setup.vocab.id(t)).collect())
        .collect();
    let ctx = InferenceContext {
        corpus_tokens: &corpus_tokens,
        corpus_token_ids: &corpus_token_ids,
        parsed: setup.parsed,
        vocab: setup.vocab,
    };
    let masks: Vec<Vec<bool>> = setup
        .parsed
        .logs
        .iter()
        .map(|p| parameter_token_mask(p, &setup.parsed.templates[p.template_id]))
        .collect::<Result<_>>()?;

    // retrieve once per test question
    let k = k.min(corpus.len());
    let mut retrieved: Vec<Vec<usize>> = Vec::with_capacity(test.len());
    for pair in test {
        let ids = setup.vocab.encode_str(&pair.question);
        retrieved.push(
            retrieve_topk(setup.encoder, setup.index, &ids, k, setup.temperature)?.log_ids(),
        );
    }

    // logistic-regression baseline is trained on the train split's gold logs
    let lr_examples: Vec<(Vec<String>, Vec<String>, Vec<bool>, (usize, usize))> = train
        .iter()
        .filter_map(|pair| {
            let gold = pair.gold_log_id?;
            let question = text::tokenize_str(&pair.question);
            let log = corpus_tokens[gold].clone();
            let answer = text::tokenize_str(&pair.answer);
            let span = *gold_occurrences(&log, &answer).first()?;
            Some((question, log, masks[gold].clone(), span))
        })
        .collect();
    let logistic = LogisticReader::train(
        SpanFeaturizer { encoder: setup.encoder, vocab: setup.vocab },
        &lr_examples,
        setup.max_span_len,
        seed,
    )?;

    let mut sums: BTreeMap<&'static str, (f64, f64)> = BTreeMap::new();
    let methods: [&'static str; 5] =
        ["random_token", "sliding_window", "logistic_regression", "reader", "reader_gold_log"];
    for m in methods {
        sums.insert(m, (0.0, 0.0));
    }

    for (qi, pair) in test.iter().enumerate() {
        let logs = &retrieved[qi];
        let question_tokens = text::tokenize_str(&pair.question);

        let top_tokens = &corpus_tokens[logs[0]];
        let random_answer =
            random_token_answer(top_tokens, seed.wrapping_add(qi as u64))?;
        accumulate(&mut sums, "random_token", &random_answer, &pair.answer)?;

        let log_token_refs: Vec<&[String]> =
            logs.iter().map(|&id| corpus_tokens[id].as_slice()).collect();
        let (window_answer, _) =
            sliding_window_answer(&pair.question, &log_token_refs, setup.max_span_len)?;
        accumulate(&mut sums, "sliding_window", &window_answer, &pair.answer)?;

        let lr_logs: Vec<(&[String], &[bool])> = logs
            .iter()
            .map(|&id| (corpus_tokens[id].as_slice(), masks[id].as_slice()))
            .collect();
        let lr_answer = logistic.answer(&question_tokens, &lr_logs)?;
        accumulate(&mut sums, "logistic_regression", &lr_answer, &pair.answer)?;

        let answer_set = answer_question(
            setup.encoder,
            setup.index,
            setup.reader,
            &ctx,
            &pair.question,
            k,
            setup.temperature,
            setup.max_span_len,
        )?;
        accumulate(&mut sums, "reader", &answer_set.best().answer, &pair.answer)?;

        // gold-log condition: bypass retrieval, read the annotated log
        if let Some(gold) = pair.gold_log_id {
            let input = crate::reader::PackedInput::new(
                &setup.vocab.encode_str(&pair.question),
                &corpus_token_ids[gold],
                &masks[gold],
            )?;
            let states = crate::reader::token_states(setup.reader, &input);
            let (p_start, p_end) =
                crate::reader::span_distributions(setup.reader, &states, input.log_start)?;
            let span = crate::reader::best_span(&p_start, &p_end, setup.max_span_len);
            let answer = corpus_tokens[gold][span.start..=span.end].join(" ");
            accumulate(&mut sums, "reader_gold_log", &answer, &pair.answer)?;
        }
    }

    let n = test.len() as f64;
    let gold_n = test.iter().filter(|p| p.gold_log_id.is_some()).count() as f64;
    let rows = methods
        .iter()
        .map(|&m| {
            let (em, f1) = sums[m];
            let denom = if m == "reader_gold_log" { gold_n } else { n };
            (m.to_string(), em / denom, f1 / denom)
        })
        .collect();
    Ok(ReaderEvalReport { dataset: dataset.to_string(), retrieval_k: k, rows })
}

fn accumulate(
    sums: &mut BTreeMap<&'static str, (f64, f64)>,
    method: &'static str,
    prediction: &str,
    gold: &str,
) -> Result<()> {
    let em = exact_match(prediction, gold) as f64;
    let (_, _, f1) = f1_score(prediction, gold)?;
    let entry = sums.get_mut(method).expect("method registered");
    entry.0 += em;
    entry.1 += f1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acc_at_k_counting() {
        let corpus_tokens = vec![
            text::tokenize_str("a b answer1"),
            text::tokenize_str("c d"),
            text::tokenize_str("answer2 e"),
            text::tokenize_str("f g"),
        ];
        let answers: Vec<String> =
            ["answer1", "answer2", "missing", "gone"].iter().map(|s| s.to_string()).collect();
        let sets = vec![vec![0], vec![2], vec![1], vec![3]];
        assert_eq!(acc_at_k(&sets, &answers, &corpus_tokens).unwrap(), 0.5);

        let all = vec![vec![0], vec![2]];
        assert_eq!(acc_at_k(&all, &answers[..2].to_vec(), &corpus_tokens).unwrap(), 1.0);
        let none = vec![vec![1], vec![3]];
        assert_eq!(acc_at_k(&none, &answers[..2].to_vec(), &corpus_tokens).unwrap(), 0.0);
        assert!(matches!(acc_at_k(&[], &[], &corpus_tokens), Err(Error::EmptyQuestionSet)));
    }

    #[test]
    fn exact_match_is_token_based() {
        assert_eq!(exact_match("67108864", "67108864"), 1);
        assert_eq!(exact_match("size 67108864", "67108864"), 0);
        assert_eq!(exact_match("", "x"), 0);
        // punctuation-only differences collapse under tokenization
        assert_eq!(exact_match("67108864 ", "67108864"), 1);
    }

    #[test]
    fn f1_worked_example() {
        let (p, r, f1) = f1_score("size 67108864", "67108864").unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(r, 1.0);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_identity_and_multiset() {
        assert_eq!(f1_score("x y", "x y").unwrap(), (1.0, 1.0, 1.0));
        // pred {a,a,b} vs gold {a,b,b}: overlap multiset {a,b}
        let (p, r, f1) = f1_score("a a b", "a b b").unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_rejects_empty_gold_and_handles_zero_overlap() {
        assert!(matches!(f1_score("x", ""), Err(Error::EmptyGold)));
        assert_eq!(f1_score("a", "b").unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(f1_score("", "b").unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn precision_recall_swap_under_argument_swap() {
        let (p_ab, r_ab, _) = f1_score("a b c", "b c d d").unwrap();
        let (p_ba, r_ba, _) = f1_score("b c d d", "a b c").unwrap();
        assert!((p_ab - r_ba).abs() < 1e-15);
        assert!((r_ab - p_ba).abs() < 1e-15);
    }
}
