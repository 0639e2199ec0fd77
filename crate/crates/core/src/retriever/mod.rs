//! Score and rank corpus logs for a question; train the encoder with
//! in-batch and mined hard negatives.

pub mod baselines;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::collections::BTreeMap;

use crate::corpus::{Corpus, QaPair};
use crate::encoder::{encoder_gradients, EncoderGrads, EncoderParams, LossSpec};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::parsing::ParsedCorpus;
use crate::text::{self, Vocab};

/// Precomputed unit vectors for every corpus log under one parameter state.
#[derive(Debug, Clone)]
pub struct LogIndex<S: Scalar> {
    pub vectors: Array2<S>,
    pub model_checksum: u64,
}

impl<S: Scalar> LogIndex<S> {
    /// Embed every log of the corpus with the current parameters.
    pub fn build(params: &EncoderParams<S>, log_ids: &[Vec<u32>]) -> Result<Self> {
        let mut vectors = Array2::zeros((log_ids.len(), params.dim()));
        for (row, ids) in log_ids.iter().enumerate() {
            vectors.row_mut(row).assign(&params.embed_unit(ids)?);
        }
        Ok(LogIndex { vectors, model_checksum: params.checksum() })
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn verify(&self, params: &EncoderParams<S>) -> Result<()> {
        let current = params.checksum();
        if current != self.model_checksum {
            return Err(Error::StaleIndex { params: current, index: self.model_checksum });
        }
        Ok(())
    }

    /// Cosine of the question against every log (rows are unit vectors).
    fn similarities(&self, params: &EncoderParams<S>, question_ids: &[u32]) -> Result<Array1<S>> {
        let q = params.embed_unit(question_ids)?;
        Ok(self.vectors.dot(&q))
    }
}

/// One ranked log with its similarity and full-corpus softmax probability.
#[derive(Debug, Clone)]
pub struct RankedLog<S> {
    pub log_id: usize,
    pub similarity: S,
    pub probability: S,
}

/// Top-k retrieval outcome for one question.
#[derive(Debug, Clone)]
pub struct RetrievalResult<S> {
    pub ranked: Vec<RankedLog<S>>,
    pub k: usize,
}

impl<S: Copy> RetrievalResult<S> {
    pub fn log_ids(&self) -> Vec<usize> {
        self.ranked.iter().map(|r| r.log_id).collect()
    }
}

/// Similarity f(x, z): cosine of the two tower outputs.
pub fn score<S: Scalar>(
    params: &EncoderParams<S>,
    question_ids: &[u32],
    log_ids: &[u32],
) -> Result<S> {
    let u = params.embed(question_ids)?;
    let v = params.embed(log_ids)?;
    crate::encoder::cosine(u.view(), v.view())
}

/// Softmax over all similarity scores: p(z|x) per corpus log.
pub fn retrieval_distribution<S: Scalar>(
    params: &EncoderParams<S>,
    index: &LogIndex<S>,
    question_ids: &[u32],
    temperature: S,
) -> Result<Vec<S>> {
    index.verify(params)?;
    let sims = index.similarities(params, question_ids)?;
    Ok(softmax_scaled(sims.as_slice().expect("contiguous"), temperature))
}

pub(crate) fn softmax_scaled<S: Scalar>(values: &[S], temperature: S) -> Vec<S> {
    let max = values.iter().fold(S::neg_infinity(), |a, &b| a.max(b / temperature));
    let exps: Vec<S> = values.iter().map(|&v| (v / temperature - max).exp()).collect();
    let total = exps.iter().fold(S::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// The k highest-similarity logs, ties broken by ascending log id.
pub fn retrieve_topk<S: Scalar>(
    params: &EncoderParams<S>,
    index: &LogIndex<S>,
    question_ids: &[u32],
    k: usize,
    temperature: S,
) -> Result<RetrievalResult<S>> {
    index.verify(params)?;
    if k == 0 || k > index.len() {
        return Err(Error::KOutOfRange { k, max: index.len() });
    }
    let sims = index.similarities(params, question_ids)?;
    let probs = softmax_scaled(sims.as_slice().expect("contiguous"), temperature);
    let order = rank_by_score(sims.iter().map(|s| s.as_f64()));
    let ranked = order
        .into_iter()
        .take(k)
        .map(|log_id| RankedLog { log_id, similarity: sims[log_id], probability: probs[log_id] })
        .collect();
    Ok(RetrievalResult { ranked, k })
}

/// Indices sorted by (score desc, index asc). Shared by every retriever so
/// tie-breaking is uniform.
pub fn rank_by_score<I: IntoIterator<Item = f64>>(scores: I) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(i, _)| i).collect()
}

/// Target value of p(z|x) for one (question, log) pair: 1 when the log
/// contains the answer, `alpha` when any of the log's parameter values
/// appears as a token of the question, 0 otherwise.
pub fn target_value<S: Scalar>(
    question_tokens: &[String],
    answer_tokens: &[String],
    log_tokens: &[String],
    log_parameters: &[String],
    alpha: S,
) -> S {
    if text::contains_subsequence(log_tokens, answer_tokens) {
        return S::one();
    }
    if log_parameters.iter().any(|p| question_tokens.iter().any(|q| q == p)) {
        return alpha;
    }
    S::zero()
}

/// Mined hard negatives: per train-pair index, log ids ranked near the top
/// that do not contain the pair's answer.
#[derive(Debug, Clone, Default)]
pub struct HardNegativeSet {
    pub by_question: BTreeMap<usize, Vec<usize>>,
}

impl HardNegativeSet {
    pub fn get(&self, question: usize) -> &[usize] {
        self.by_question.get(&question).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total(&self) -> usize {
        self.by_question.values().map(Vec::len).sum()
    }

    /// Merge newly mined ids, keeping each question's list sorted and
    /// deduplicated.
    pub fn extend(&mut self, question: usize, ids: impl IntoIterator<Item = usize>) {
        let entry = self.by_question.entry(question).or_default();
        entry.extend(ids);
        entry.sort_unstable();
        entry.dedup();
    }
}

/// Retrieve the top `mining_k` logs per train question, then drop every log
/// whose tokens contain the gold answer; the remainder are hard negatives.
pub fn mine_hard_negatives<S: Scalar>(
    params: &EncoderParams<S>,
    index: &LogIndex<S>,
    pairs: &[QaPair],
    question_ids: &[Vec<u32>],
    corpus_tokens: &[Vec<String>],
    mining_k: usize,
    temperature: S,
) -> Result<HardNegativeSet> {
    index.verify(params)?;
    let mut set = HardNegativeSet::default();
    let k = mining_k.min(index.len());
    for (qi, pair) in pairs.iter().enumerate() {
        let answer_tokens = text::tokenize_str(&pair.answer);
        let result = retrieve_topk(params, index, &question_ids[qi], k, temperature)?;
        let negatives: Vec<usize> = result
            .ranked
            .iter()
            .map(|r| r.log_id)
            .filter(|&id| !text::contains_subsequence(&corpus_tokens[id], &answer_tokens))
            .collect();
        if !negatives.is_empty() {
            set.extend(qi, negatives);
        }
    }
    Ok(set)
}

/// Training hyperparameters. Defaults mirror the published setup: learning
/// rate 5e-5, 4 iterations, hard-negative weight 2, alpha 0.2.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub epochs_per_iteration: usize,
    pub hard_negative_weight: f64,
    pub mining_k: usize,
    pub alpha: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            batch_size: 16,
            learning_rate: 5e-5,
            iterations: 4,
            epochs_per_iteration: 1,
            hard_negative_weight: 2.0,
            mining_k: 20,
            alpha: 0.2,
            temperature: 0.05,
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.dim >= 2
            && self.batch_size >= 1
            && self.learning_rate > 0.0
            && self.iterations >= 1
            && self.epochs_per_iteration >= 1
            && self.mining_k >= 1
            && self.temperature > 0.0
            && self.hard_negative_weight >= 0.0;
        if !positive {
            return Err(Error::InvalidConfig(format!("non-positive train setting: {self:?}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// One row of the training log CSV.
#[derive(Debug, Clone)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub epoch: usize,
    pub loss: f64,
    pub val_acc1: f64,
    pub val_acc5: f64,
}

/// Per-epoch and per-iteration record of a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub rows: Vec<TrainLogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,epoch,loss,val_acc1,val_acc5\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.4},{:.4}\n",
                r.iteration, r.epoch, r.loss, r.val_acc1, r.val_acc5
            ));
        }
        out
    }
}

/// Everything the trainer needs besides the raw pairs, precomputed once.
pub struct TrainContext<'a> {
    pub corpus: &'a Corpus,
    pub parsed: &'a ParsedCorpus,
    pub vocab: &'a Vocab,
}

struct PreparedPairs {
    question_ids: Vec<Vec<u32>>,
    question_tokens: Vec<Vec<String>>,
    answer_tokens: Vec<Vec<String>>,
    gold_ids: Vec<usize>,
}

fn prepare_pairs(pairs: &[QaPair], vocab: &Vocab) -> Result<PreparedPairs> {
    let mut prepared = PreparedPairs {
        question_ids: Vec::with_capacity(pairs.len()),
        question_tokens: Vec::with_capacity(pairs.len()),
        answer_tokens: Vec::with_capacity(pairs.len()),
        gold_ids: Vec::with_capacity(pairs.len()),
    };
    for (i, pair) in pairs.iter().enumerate() {
        let gold = pair.gold_log_id.ok_or(Error::GoldSpanMissing {
            pair: i,
            question: pair.question.clone(),
        })?;
        prepared.question_tokens.push(text::tokenize_str(&pair.question));
        prepared.question_ids.push(vocab.encode_str(&pair.question));
        prepared.answer_tokens.push(text::tokenize_str(&pair.answer));
        prepared.gold_ids.push(gold);
    }
    Ok(prepared)
}

/// Cross-entropy of one batch under the in-batch + hard-negative loss.
///
/// Candidates for each question are the gold logs of the whole batch plus
/// the question's mined hard negatives; targets come from [`target_value`]
/// normalized over the candidate set. Returns the mean loss over questions
/// and accumulates parameter gradients when `grads` is given.
#[allow(clippy::too_many_arguments)]
fn batch_loss_grads<S: Scalar>(
    params: &EncoderParams<S>,
    batch: &[usize],
    prepared: &PreparedPairs,
    corpus_token_ids: &[Vec<u32>],
    corpus_tokens: &[Vec<String>],
    parsed: &ParsedCorpus,
    hard: &HardNegativeSet,
    config: &TrainConfig,
    mut grads: Option<&mut EncoderGrads<S>>,
) -> Result<S> {
    let alpha = S::cast(config.alpha);
    let w = S::cast(config.hard_negative_weight);
    let tau = S::cast(config.temperature);
    let use_hard = config.hard_negative_weight > 0.0;

    let mut total = S::zero();
    let mut scratch: Option<EncoderGrads<S>> = grads.as_ref().map(|g| EncoderGrads {
        d_embedding: Array2::zeros(g.d_embedding.dim()),
        d_projection: Array2::zeros(g.d_projection.dim()),
    });

    for &qi in batch {
        let mut candidate_logs: Vec<usize> =
            batch.iter().map(|&other| prepared.gold_ids[other]).collect();
        let mut weights: Vec<S> = vec![S::one(); candidate_logs.len()];
        if use_hard {
            for &neg in hard.get(qi) {
                candidate_logs.push(neg);
                weights.push(w);
            }
        }
        let targets: Vec<S> = candidate_logs
            .iter()
            .map(|&log| {
                target_value(
                    &prepared.question_tokens[qi],
                    &prepared.answer_tokens[qi],
                    &corpus_tokens[log],
                    &parsed.logs[log].parameters,
                    alpha,
                )
            })
            .collect();
        if !targets.iter().any(|&t| t == S::one()) {
            return Err(Error::NoPositiveInBatch(qi));
        }
        let candidate_ids: Vec<&[u32]> =
            candidate_logs.iter().map(|&log| corpus_token_ids[log].as_slice()).collect();
        let spec = LossSpec { targets, denom_weights: weights, temperature: tau };
        let loss = match scratch.as_mut() {
            Some(g) => encoder_gradients(params, &prepared.question_ids[qi], &candidate_ids, &spec, g)?,
            None => {
                let mut sink = EncoderGrads::zeros_like(params);
                encoder_gradients(params, &prepared.question_ids[qi], &candidate_ids, &spec, &mut sink)?
            }
        };
        total += loss;
    }

    let inv = S::one() / S::cast_usize(batch.len());
    if let (Some(acc), Some(s)) = (grads.as_deref_mut(), scratch) {
        acc.d_embedding.scaled_add(inv, &s.d_embedding);
        acc.d_projection.scaled_add(inv, &s.d_projection);
    }
    Ok(total * inv)
}

/// Public entry for loss inspection (tests, diagnostics): mean batch loss
/// without touching any gradient state.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss<S: Scalar>(
    params: &EncoderParams<S>,
    batch: &[usize],
    pairs: &[QaPair],
    ctx: &TrainContext<'_>,
    corpus_token_ids: &[Vec<u32>],
    corpus_tokens: &[Vec<String>],
    hard: &HardNegativeSet,
    config: &TrainConfig,
) -> Result<S> {
    let prepared = prepare_pairs(pairs, ctx.vocab)?;
    batch_loss_grads(
        params,
        batch,
        &prepared,
        corpus_token_ids,
        corpus_tokens,
        ctx.parsed,
        hard,
        config,
        None,
    )
}

/// Validation top-k accuracy: fraction of pairs whose top-k set contains a
/// log containing the gold answer.
fn quick_acc_at_k<S: Scalar>(
    params: &EncoderParams<S>,
    index: &LogIndex<S>,
    pairs: &[QaPair],
    question_ids: &[Vec<u32>],
    corpus_tokens: &[Vec<String>],
    k: usize,
    temperature: S,
) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (qi, pair) in pairs.iter().enumerate() {
        let answer = text::tokenize_str(&pair.answer);
        let result = retrieve_topk(params, index, &question_ids[qi], k.min(index.len()), temperature)?;
        if result
            .ranked
            .iter()
            .any(|r| text::contains_subsequence(&corpus_tokens[r.log_id], &answer))
        {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Output of [`train_retriever`].
pub struct TrainedRetriever<S: Scalar> {
    pub params: EncoderParams<S>,
    pub log: TrainingLog,
    pub hard_negatives: HardNegativeSet,
}

/// Iterative training: per iteration, one or more epochs of gradient steps
/// over the train pairs, then re-index and mine hard negatives that join the
/// training data of later iterations. Deterministic for a fixed seed.
pub fn train_retriever<S: Scalar>(
    train: &[QaPair],
    validation: &[QaPair],
    ctx: &TrainContext<'_>,
    config: &TrainConfig,
) -> Result<TrainedRetriever<S>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::DatasetTooSmall { need: 1, got: 0 });
    }
    let prepared = prepare_pairs(train, ctx.vocab)?;
    let val_prepared: Vec<Vec<u32>> =
        validation.iter().map(|p| ctx.vocab.encode_str(&p.question)).collect();
    let corpus_tokens = ctx.corpus.tokenized();
    let corpus_token_ids: Vec<Vec<u32>> =
        corpus_tokens.iter().map(|toks| toks.iter().map(|t| ctx.vocab.id(t)).collect()).collect();

    let mut params = EncoderParams::<S>::init(ctx.vocab.len(), config.dim, config.seed)?;
    let mut hard = HardNegativeSet::default();
    let mut log = TrainingLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e3779b97f4a7c15));
    let lr = S::cast(config.learning_rate);
    let tau = S::cast(config.temperature);

    let mut order: Vec<usize> = (0..train.len()).collect();
    for iteration in 1..=config.iterations {
        for epoch in 1..=config.epochs_per_iteration {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0f64;
            let mut batches = 0usize;
            for batch in order.chunks(config.batch_size) {
                let mut grads = EncoderGrads::zeros_like(&params);
                let loss = batch_loss_grads(
                    &params,
                    batch,
                    &prepared,
                    &corpus_token_ids,
                    &corpus_tokens,
                    ctx.parsed,
                    &hard,
                    config,
                    Some(&mut grads),
                )?;
                if !loss.is_finite() || !grads.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss at iteration {iteration} epoch {epoch}"
                    )));
                }
                params.step(&grads, lr);
                epoch_loss += loss.as_f64();
                batches += 1;
            }
            let index = LogIndex::build(&params, &corpus_token_ids)?;
            let val_acc1 = quick_acc_at_k(&params, &index, validation, &val_prepared, &corpus_tokens, 1, tau)?;
            let val_acc5 = quick_acc_at_k(&params, &index, validation, &val_prepared, &corpus_tokens, 5, tau)?;
            log.rows.push(TrainLogRow {
                iteration,
                epoch,
                loss: epoch_loss / batches.max(1) as f64,
                val_acc1,
                val_acc5,
            });
        }
        let index = LogIndex::build(&params, &corpus_token_ids)?;
        let mined = mine_hard_negatives(
            &params,
            &index,
            train,
            &prepared.question_ids,
            &corpus_tokens,
            config.mining_k,
            tau,
        )?;
        for (qi, ids) in mined.by_question {
            hard.extend(qi, ids);
        }
    }

    Ok(TrainedRetriever { params, log, hard_negatives: hard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsing::{parse_corpus, ParseTreeConfig};

    fn toy_world() -> (Corpus, ParsedCorpus, Vocab, Vec<QaPair>) {
        let corpus = Corpus::from_lines(
            "toy",
            [
                "Received block blk_1 of size 11 from /10.0.0.1",
                "Received block blk_2 of size 22 from /10.0.0.2",
                "Received block blk_3 of size 33 from /10.0.0.3",
                "Verification succeeded for blk_1",
                "PacketResponder 0 for block blk_2 terminating",
                "Deleting block blk_3 file /data/blk_3",
            ],
        )
        .unwrap();
        let parsed = parse_corpus(&corpus, ParseTreeConfig::default());
        let mut streams: Vec<Vec<crate::text::Token>> =
            corpus.records.iter().map(|r| crate::text::tokenize(&r.text)).collect();
        let pairs = vec![
            QaPair {
                question: "What is the size of block blk_1?".into(),
                answer: "11".into(),
                gold_log_id: Some(0),
            },
            QaPair {
                question: "What is the size of block blk_2?".into(),
                answer: "22".into(),
                gold_log_id: Some(1),
            },
            QaPair {
                question: "What is the size of block blk_3?".into(),
                answer: "33".into(),
                gold_log_id: Some(2),
            },
        ];
        for p in &pairs {
            streams.push(crate::text::tokenize(&p.question));
        }
        let vocab = Vocab::build(streams.iter().map(|s| s.as_slice()), 1).unwrap();
        (corpus, parsed, vocab, pairs)
    }

    fn token_ids(corpus: &Corpus, vocab: &Vocab) -> Vec<Vec<u32>> {
        corpus.records.iter().map(|r| vocab.encode_str(&r.text)).collect()
    }

    #[test]
    fn identical_inputs_score_one_and_symmetric() {
        let (corpus, _, vocab, _) = toy_world();
        let params = EncoderParams::<f64>::init(vocab.len(), 16, 3).unwrap();
        let ids = vocab.encode_str(corpus.text(0));
        let q = vocab.encode_str("What is the size of block blk_1?");
        assert!((score(&params, &ids, &ids).unwrap() - 1.0).abs() < 1e-12);
        let a = score(&params, &q, &ids).unwrap();
        let b = score(&params, &ids, &q).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn distribution_sums_to_one() {
        let (corpus, _, vocab, _) = toy_world();
        let params = EncoderParams::<f64>::init(vocab.len(), 16, 3).unwrap();
        let ids = token_ids(&corpus, &vocab);
        let index = LogIndex::build(&params, &ids).unwrap();
        let q = vocab.encode_str("What is the size of block blk_1?");
        let probs = retrieval_distribution(&params, &index, &q, 0.05).unwrap();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(probs.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn singleton_and_uniform_softmax() {
        let one = softmax_scaled(&[0.37f64], 1.0);
        assert_eq!(one, vec![1.0]);
        let four = softmax_scaled(&[0.5f64; 4], 0.05);
        for p in four {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_matches_scalar_oracle() {
        // tau = 1, similarities (1, 0): (e/(e+1), 1/(e+1))
        let probs = softmax_scaled(&[1.0f64, 0.0], 1.0);
        assert!((probs[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((probs[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn stale_index_detected() {
        let (corpus, _, vocab, _) = toy_world();
        let mut params = EncoderParams::<f64>::init(vocab.len(), 16, 3).unwrap();
        let index = LogIndex::build(&params, &token_ids(&corpus, &vocab)).unwrap();
        params.projection[[0, 0]] += 0.5;
        let q = vocab.encode_str("anything");
        assert!(matches!(
            retrieval_distribution(&params, &index, &q, 1.0),
            Err(Error::StaleIndex { .. })
        ));
    }

    #[test]
    fn topk_bounds_and_nesting() {
        let (corpus, _, vocab, _) = toy_world();
        let params = EncoderParams::<f64>::init(vocab.len(), 16, 5).unwrap();
        let index = LogIndex::build(&params, &token_ids(&corpus, &vocab)).unwrap();
        let q = vocab.encode_str("What is the size of block blk_2?");
        assert!(matches!(
            retrieve_topk(&params, &index, &q, 0, 0.05),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            retrieve_topk(&params, &index, &q, 99, 0.05),
            Err(Error::KOutOfRange { .. })
        ));
        let all = retrieve_topk(&params, &index, &q, corpus.len(), 0.05).unwrap();
        assert_eq!(all.ranked.len(), corpus.len());
        for w in all.ranked.windows(2) {
            assert!(w[0].similarity >= w[1].similarity);
        }
        // argmax of the distribution is the top-1 log
        let probs = retrieval_distribution(&params, &index, &q, 0.05).unwrap();
        let argmax = rank_by_score(probs.iter().copied())[0];
        assert_eq!(all.ranked[0].log_id, argmax);
        // nesting
        for k in 1..corpus.len() {
            let a = retrieve_topk(&params, &index, &q, k, 0.05).unwrap().log_ids();
            let b = retrieve_topk(&params, &index, &q, k + 1, 0.05).unwrap().log_ids();
            assert!(a.iter().all(|id| b.contains(id)));
        }
    }

    #[test]
    fn target_values_match_rule() {
        let q = text::tokenize_str("What is the size of block blk_5142679?");
        let ans = text::tokenize_str("67108864");
        let gold = text::tokenize_str("Received block blk_5142679 of size 67108864 from /10.251.70.211");
        let related = text::tokenize_str("Verification succeeded for blk_5142679");
        let unrelated = text::tokenize_str("Deleting block blk_9 file /data/blk_9");
        assert_eq!(target_value(&q, &ans, &gold, &["blk_5142679".into()], 0.2f64), 1.0);
        assert_eq!(target_value(&q, &ans, &related, &["blk_5142679".into()], 0.2f64), 0.2);
        assert_eq!(target_value(&q, &ans, &unrelated, &["blk_9".into()], 0.2f64), 0.0);
    }

    #[test]
    fn mined_negatives_never_contain_answer() {
        let (corpus, _, vocab, pairs) = toy_world();
        let params = EncoderParams::<f64>::init(vocab.len(), 16, 7).unwrap();
        let ids = token_ids(&corpus, &vocab);
        let index = LogIndex::build(&params, &ids).unwrap();
        let question_ids: Vec<Vec<u32>> =
            pairs.iter().map(|p| vocab.encode_str(&p.question)).collect();
        let corpus_tokens = corpus.tokenized();
        let set = mine_hard_negatives(&params, &index, &pairs, &question_ids, &corpus_tokens, 4, 0.05)
            .unwrap();
        for (qi, ids) in &set.by_question {
            let answer = text::tokenize_str(&pairs[*qi].answer);
            assert!(ids.len() <= 4);
            for &id in ids {
                assert!(!text::contains_subsequence(&corpus_tokens[id], &answer));
            }
        }
    }

    #[test]
    fn singleton_batch_with_gold_only_has_zero_loss() {
        let (corpus, parsed, vocab, pairs) = toy_world();
        let params = EncoderParams::<f64>::init(vocab.len(), 16, 3).unwrap();
        let ctx = TrainContext { corpus: &corpus, parsed: &parsed, vocab: &vocab };
        let corpus_tokens = corpus.tokenized();
        let ids = token_ids(&corpus, &vocab);
        let config = TrainConfig { hard_negative_weight: 0.0, ..TrainConfig::default() };
        let loss = batch_loss(
            &params,
            &[0],
            &pairs,
            &ctx,
            &ids,
            &corpus_tokens,
            &HardNegativeSet::default(),
            &config,
        )
        .unwrap();
        assert!(loss.abs() < 1e-12, "softmax over a single candidate is 1, loss {loss}");
    }

    #[test]
    fn batch_loss_matches_hand_recomputation() {
        // 3 questions, gold logs 0..3, no hard negatives: recompute the
        //.. cross-entropy from raw similarities independently.
        let (corpus, parsed, vocab, pairs) = toy_world();
        let params = EncoderParams::<f64>::init(vocab.len(), 16, 9).unwrap();
        let ctx = TrainContext { corpus: &corpus, parsed: &parsed, vocab: &vocab };
        let corpus_tokens = corpus.tokenized();
        let ids = token_ids(&corpus, &vocab);
        let config = TrainConfig { temperature: 0.5, ..TrainConfig::default() };
        let batch = [0usize, 1, 2];
        let loss = batch_loss(
            &params,
            &batch,
            &pairs,
            &ctx,
            &ids,
            &corpus_tokens,
            &HardNegativeSet::default(),
            &config,
        )
        .unwrap();

        let mut expected = 0.0;
        for &qi in &batch {
            let q = vocab.encode_str(&pairs[qi].question);
            let sims: Vec<f64> = batch
                .iter()
                .map(|&other| score(&params, &q, &ids[pairs[other].gold_log_id.unwrap()]).unwrap())
                .collect();
            let logits: Vec<f64> = sims.iter().map(|s| s / 0.5).collect();
            let denom: f64 = logits.iter().map(|l| l.exp()).sum();
            // answers are unique to their gold logs; targets are one-hot here
            let t: Vec<f64> = batch
                .iter()
                .map(|&other| if other == qi { 1.0 } else { 0.0 })
                .collect();
            let mut l = 0.0;
            for j in 0..batch.len() {
                if t[j] > 0.0 {
                    l -= t[j] * (logits[j] - denom.ln());
                }
            }
            expected += l;
        }
        expected /= batch.len() as f64;
        assert!((loss - expected).abs() < 1e-10, "{loss} vs {expected}");
    }

    #[test]
    fn training_runs_and_is_deterministic() {
        let (corpus, parsed, vocab, pairs) = toy_world();
        let ctx = TrainContext { corpus: &corpus, parsed: &parsed, vocab: &vocab };
        let config = TrainConfig {
            dim: 16,
            batch_size: 2,
            learning_rate: 1e-3,
            iterations: 2,
            epochs_per_iteration: 3,
            mining_k: 3,
            seed: 21,
            ..TrainConfig::default()
        };
        let t1 = train_retriever::<f64>(&pairs, &pairs, &ctx, &config).unwrap();
        let t2 = train_retriever::<f64>(&pairs, &pairs, &ctx, &config).unwrap();
        assert_eq!(t1.params, t2.params);
        assert_eq!(t1.log.to_csv(), t2.log.to_csv());
        assert_eq!(t1.log.rows.len(), 6);
    }

    #[test]
    fn toy_training_loss_decreases_in_first_iteration() {
        let (corpus, parsed, vocab, pairs) = toy_world();
        let ctx = TrainContext { corpus: &corpus, parsed: &parsed, vocab: &vocab };
        let config = TrainConfig {
            dim: 16,
            batch_size: 3,
            learning_rate: 1e-3,
            iterations: 1,
            epochs_per_iteration: 6,
            seed: 5,
            // the paper's literal softmax; full-batch descent is smooth here
            temperature: 1.0,
            ..TrainConfig::default()
        };
        let trained = train_retriever::<f64>(&pairs, &[], &ctx, &config).unwrap();
        let losses: Vec<f64> = trained.log.rows.iter().map(|r| r.loss).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss increased: {losses:?}");
        }
    }
}
