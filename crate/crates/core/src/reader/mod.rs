//! Extractive answer-span prediction over retrieved logs.
//!
//! The question and one log are packed into a single sequence separated by
//! SEP. Token states are projected embeddings mixed over a symmetric local
//! window plus a pooled question summary; three linear heads score span
//! starts, span ends, and parameter-ness per position. Inference combines
//! the retrieval probability with the span score.

pub mod baselines;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::QaPair;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::parsing::{parameter_token_mask, ParsedCorpus};
use crate::retriever::{retrieve_topk, LogIndex};
use crate::text::{self, Vocab, SEP};

const INIT_RANGE: f64 = 0.05;

/// Reader hyperparameters. Epochs and learning rate default to the
/// published setup (15, 3e-5).
#[derive(Debug, Clone)]
pub struct ReaderConfig {
    pub window_radius: usize,
    pub max_span_len: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        ReaderConfig {
            window_radius: 2,
            max_span_len: 10,
            epochs: 15,
            learning_rate: 3e-5,
            seed: 17,
        }
    }
}

/// Reader parameters: embeddings (warm-started from the retriever and then
/// fine-tuned independently), the state mixer, and the three heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderModel<S: Scalar> {
    pub embedding: Array2<S>,
    pub w_state: Array2<S>,
    pub w_question: Array2<S>,
    pub w_start: Array1<S>,
    pub w_end: Array1<S>,
    pub w_param: Array1<S>,
    pub window_radius: usize,
}

impl<S: Scalar> ReaderModel<S> {
    /// Fresh random parameters.
    pub fn init(vocab_size: usize, dim: usize, window_radius: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig(format!("reader dim must be >= 2, got {dim}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = |n: usize| -> Vec<S> {
            (0..n).map(|_| S::cast(rng.gen_range(-INIT_RANGE..INIT_RANGE))).collect()
        };
        Ok(ReaderModel {
            embedding: Array2::from_shape_vec((vocab_size, dim), sample(vocab_size * dim))
                .expect("shape matches"),
            w_state: Array2::from_shape_vec((dim, dim), sample(dim * dim)).expect("shape matches"),
            w_question: Array2::from_shape_vec((dim, dim), sample(dim * dim)).expect("shape matches"),
            w_start: Array1::from_vec(sample(dim)),
            w_end: Array1::from_vec(sample(dim)),
            w_param: Array1::from_vec(sample(dim)),
            window_radius,
        })
    }

    /// New model whose embedding table starts from trained encoder
    /// parameters; everything else is seeded random.
    pub fn warm_start(encoder: &EncoderParams<S>, window_radius: usize, seed: u64) -> Result<Self> {
        let mut model =
            Self::init(encoder.vocab_size(), encoder.dim(), window_radius, seed)?;
        model.embedding.assign(&encoder.embedding);
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.w_state.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn checksum(&self) -> u64 {
        let mut h = crate::encoder::Fnv1a::new();
        h.write_usize(self.vocab_size());
        h.write_usize(self.dim());
        h.write_usize(self.window_radius);
        for x in self
            .embedding
            .iter()
            .chain(self.w_state.iter())
            .chain(self.w_question.iter())
            .chain(self.w_start.iter())
            .chain(self.w_end.iter())
            .chain(self.w_param.iter())
        {
            h.write_u64(x.as_f64().to_bits());
        }
        h.finish()
    }
}

/// Question and log token ids packed as `question SEP log`, with the
/// parameter mask over the log positions.
#[derive(Debug, Clone)]
pub struct PackedInput {
    pub ids: Vec<u32>,
    pub log_start: usize,
    pub param_mask: Vec<bool>,
}

impl PackedInput {
    pub fn new(question_ids: &[u32], log_ids: &[u32], param_mask: &[bool]) -> Result<Self> {
        if question_ids.is_empty() || log_ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if param_mask.len() != log_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: log_ids.len(),
                got: param_mask.len(),
            });
        }
        let mut ids = Vec::with_capacity(question_ids.len() + 1 + log_ids.len());
        ids.extend_from_slice(question_ids);
        ids.push(SEP);
        ids.extend_from_slice(log_ids);
        Ok(PackedInput {
            ids,
            log_start: question_ids.len() + 1,
            param_mask: param_mask.to_vec(),
        })
    }

    pub fn question_len(&self) -> usize {
        self.log_start - 1
    }

    pub fn log_len(&self) -> usize {
        self.ids.len() - self.log_start
    }
}

struct Forward<S: Scalar> {
    windows: Array2<S>,
    question_pool: Array1<S>,
    states: Array2<S>,
}

fn forward_states<S: Scalar>(model: &ReaderModel<S>, input: &PackedInput) -> Forward<S> {
    let n = input.ids.len();
    let d = model.dim();
    let embedded: Vec<_> = input.ids.iter().map(|&id| model.embedding.row(id as usize)).collect();

    let mut windows = Array2::zeros((n, d));
    let r = model.window_radius;
    for i in 0..n {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(n);
        let mut acc = Array1::<S>::zeros(d);
        for e in embedded.iter().take(hi).skip(lo) {
            acc += e;
        }
        windows.row_mut(i).assign(&(acc / S::cast_usize(hi - lo)));
    }

    let q_len = input.question_len();
    let mut question_pool = Array1::<S>::zeros(d);
    for e in embedded.iter().take(q_len) {
        question_pool += e;
    }
    question_pool /= S::cast_usize(q_len);

    let q_mix = model.w_question.dot(&question_pool);
    let mut states = Array2::zeros((n, d));
    for i in 0..n {
        let pre = model.w_state.dot(&windows.row(i)) + &q_mix;
        states.row_mut(i).assign(&pre.mapv(S::tanh));
    }
    Forward { windows, question_pool, states }
}

/// One d-dimensional state per packed token.
pub fn token_states<S: Scalar>(model: &ReaderModel<S>, input: &PackedInput) -> Array2<S> {
    forward_states(model, input).states
}

/// Start and end distributions over the log segment. Each sums to 1.
pub fn span_distributions<S: Scalar>(
    model: &ReaderModel<S>,
    states: &Array2<S>,
    log_start: usize,
) -> Result<(Vec<S>, Vec<S>)> {
    let n = states.nrows();
    if log_start >= n {
        return Err(Error::NoLogPositions);
    }
    let logits = |head: &Array1<S>| -> Vec<S> {
        (log_start..n).map(|i| states.row(i).dot(head)).collect()
    };
    Ok((
        crate::retriever::softmax_scaled(&logits(&model.w_start), S::one()),
        crate::retriever::softmax_scaled(&logits(&model.w_end), S::one()),
    ))
}

/// A chosen answer span over log-relative positions (inclusive end).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub span_score: f64,
}

/// Maximize `p_start[s] * p_end[e]` subject to `s <= e` and
/// `e - s < max_span_len`; ties prefer the smaller start, then smaller end.
pub fn best_span<S: Scalar>(p_start: &[S], p_end: &[S], max_span_len: usize) -> SpanPrediction {
    let mut best = SpanPrediction { start: 0, end: 0, span_score: f64::NEG_INFINITY };
    for s in 0..p_start.len() {
        for e in s..(s + max_span_len).min(p_end.len()) {
            let score = (p_start[s] * p_end[e]).as_f64();
            if score > best.span_score {
                best = SpanPrediction { start: s, end: e, span_score: score };
            }
        }
    }
    best
}

/// All log-relative (start, end) occurrences of `answer_tokens` in
/// `log_tokens`.
pub fn gold_occurrences(log_tokens: &[String], answer_tokens: &[String]) -> Vec<(usize, usize)> {
    if answer_tokens.is_empty() || answer_tokens.len() > log_tokens.len() {
        return Vec::new();
    }
    log_tokens
        .windows(answer_tokens.len())
        .enumerate()
        .filter(|(_, w)| *w == answer_tokens)
        .map(|(s, _)| (s, s + answer_tokens.len() - 1))
        .collect()
}

/// Joint loss: marginal negative log-likelihood of all gold answer spans
/// plus mean binary cross-entropy of the parameter head over log positions.
pub fn reader_loss<S: Scalar>(
    model: &ReaderModel<S>,
    input: &PackedInput,
    gold_spans: &[(usize, usize)],
) -> Result<S> {
    loss_and_grads(model, input, gold_spans, None)
}

/// Gradient accumulator matching [`ReaderModel`].
pub struct ReaderGrads<S: Scalar> {
    pub d_embedding: Array2<S>,
    pub d_w_state: Array2<S>,
    pub d_w_question: Array2<S>,
    pub d_w_start: Array1<S>,
    pub d_w_end: Array1<S>,
    pub d_w_param: Array1<S>,
}

impl<S: Scalar> ReaderGrads<S> {
    pub fn zeros_like(model: &ReaderModel<S>) -> Self {
        ReaderGrads {
            d_embedding: Array2::zeros(model.embedding.dim()),
            d_w_state: Array2::zeros(model.w_state.dim()),
            d_w_question: Array2::zeros(model.w_question.dim()),
            d_w_start: Array1::zeros(model.w_start.len()),
            d_w_end: Array1::zeros(model.w_end.len()),
            d_w_param: Array1::zeros(model.w_param.len()),
        }
    }

    fn is_finite(&self) -> bool {
        self.d_embedding
            .iter()
            .chain(self.d_w_state.iter())
            .chain(self.d_w_question.iter())
            .chain(self.d_w_start.iter())
            .chain(self.d_w_end.iter())
            .chain(self.d_w_param.iter())
            .all(|x| x.is_finite())
    }
}

/// Loss for one packed example, optionally accumulating gradients.
pub fn loss_and_grads<S: Scalar>(
    model: &ReaderModel<S>,
    input: &PackedInput,
    gold_spans: &[(usize, usize)],
    mut grads: Option<&mut ReaderGrads<S>>,
) -> Result<S> {
    if gold_spans.is_empty() {
        return Err(Error::GoldSpanMissing { pair: 0, question: String::new() });
    }
    let n_log = input.log_len();
    for &(s, e) in gold_spans {
        if s > e || e >= n_log {
            return Err(Error::GoldSpanMissing { pair: 0, question: format!("span ({s},{e})") });
        }
    }

    let fwd = forward_states(model, input);
    let states = &fwd.states;
    let n = states.nrows();
    let log_start = input.log_start;

    let head_logits = |head: &Array1<S>| -> Vec<S> {
        (log_start..n).map(|i| states.row(i).dot(head)).collect()
    };
    let p_start = crate::retriever::softmax_scaled(&head_logits(&model.w_start), S::one());
    let p_end = crate::retriever::softmax_scaled(&head_logits(&model.w_end), S::one());

    // marginal likelihood of all gold spans
    let total_span_prob = gold_spans
        .iter()
        .fold(S::zero(), |acc, &(s, e)| acc + p_start[s] * p_end[e]);
    let l_qa = -total_span_prob.ln();

    // parameter head: mean BCE over log positions
    let param_logits: Vec<S> = head_logits(&model.w_param);
    let mut l_param = S::zero();
    let mut sigmas = Vec::with_capacity(n_log);
    for (i, &logit) in param_logits.iter().enumerate() {
        let sigma = S::one() / (S::one() + (-logit).exp());
        let target = if input.param_mask[i] { S::one() } else { S::zero() };
        l_param += -(target * sigma.ln() + (S::one() - target) * (S::one() - sigma).ln());
        sigmas.push(sigma);
    }
    l_param /= S::cast_usize(n_log);
    let loss = l_qa + l_param;

    let Some(grads) = grads.as_deref_mut() else {
        return Ok(loss);
    };

    // d L_QA / d p_start[i], d p_end[i]
    let mut d_p_start = vec![S::zero(); n_log];
    let mut d_p_end = vec![S::zero(); n_log];
    for &(s, e) in gold_spans {
        d_p_start[s] -= p_end[e] / total_span_prob;
        d_p_end[e] -= p_start[s] / total_span_prob;
    }
    let softmax_back = |p: &[S], d_p: &[S]| -> Vec<S> {
        let dot = p.iter().zip(d_p).fold(S::zero(), |a, (&pi, &di)| a + pi * di);
        p.iter().zip(d_p).map(|(&pi, &di)| pi * (di - dot)).collect()
    };
    let d_start_logits = softmax_back(&p_start, &d_p_start);
    let d_end_logits = softmax_back(&p_end, &d_p_end);
    let inv_nlog = S::one() / S::cast_usize(n_log);
    let d_param_logits: Vec<S> = sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let target = if input.param_mask[i] { S::one() } else { S::zero() };
            (sigma - target) * inv_nlog
        })
        .collect();

    // heads and states (log positions only; question states carry no loss)
    let d = model.dim();
    let mut d_states = Array2::<S>::zeros((n, d));
    for i in 0..n_log {
        let h = states.row(log_start + i);
        grads.d_w_start.scaled_add(d_start_logits[i], &h);
        grads.d_w_end.scaled_add(d_end_logits[i], &h);
        grads.d_w_param.scaled_add(d_param_logits[i], &h);
        let mut dh = d_states.row_mut(log_start + i);
        dh.scaled_add(d_start_logits[i], &model.w_start);
        dh.scaled_add(d_end_logits[i], &model.w_end);
        dh.scaled_add(d_param_logits[i], &model.w_param);
    }

    // through tanh into the mixer and embeddings
    let r = model.window_radius;
    let q_len = input.question_len();
    let mut d_q_mix_total = Array1::<S>::zeros(d);
    let mut d_embedded = Array2::<S>::zeros((n, d));
    for i in log_start..n {
        let h = states.row(i);
        let dh = d_states.row(i);
        let ones: Array1<S> = Array1::ones(d);
        let d_pre = (&ones - &(&h * &h)) * &dh;
        for (row, &dp) in d_pre.iter().enumerate() {
            grads.d_w_state.row_mut(row).scaled_add(dp, &fwd.windows.row(i));
        }
        d_q_mix_total += &d_pre;
        let d_window = model.w_state.t().dot(&d_pre);
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(n);
        let share = S::one() / S::cast_usize(hi - lo);
        for j in lo..hi {
            d_embedded.row_mut(j).scaled_add(share, &d_window);
        }
    }
    for (row, &dq) in d_q_mix_total.iter().enumerate() {
        grads.d_w_question.row_mut(row).scaled_add(dq, &fwd.question_pool);
    }
    let d_question_pool = model.w_question.t().dot(&d_q_mix_total);
    let share = S::one() / S::cast_usize(q_len);
    for j in 0..q_len {
        d_embedded.row_mut(j).scaled_add(share, &d_question_pool);
    }
    for (j, &id) in input.ids.iter().enumerate() {
        grads.d_embedding.row_mut(id as usize).scaled_add(S::one(), &d_embedded.row(j));
    }

    Ok(loss)
}

/// One reader training example, fully resolved to ids and spans.
pub struct ReaderExample {
    pub input: PackedInput,
    pub gold_spans: Vec<(usize, usize)>,
}

/// Build training examples from pairs with resolved gold logs.
pub fn build_examples(
    pairs: &[QaPair],
    corpus_tokens: &[Vec<String>],
    parsed: &ParsedCorpus,
    vocab: &Vocab,
) -> Result<Vec<ReaderExample>> {
    let mut examples = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let gold = pair.gold_log_id.ok_or(Error::GoldSpanMissing {
            pair: i,
            question: pair.question.clone(),
        })?;
        let log_tokens = &corpus_tokens[gold];
        let answer_tokens = text::tokenize_str(&pair.answer);
        let spans = gold_occurrences(log_tokens, &answer_tokens);
        if spans.is_empty() {
            return Err(Error::GoldSpanMissing { pair: i, question: pair.question.clone() });
        }
        let mask = parameter_token_mask(&parsed.logs[gold], &parsed.templates[parsed.logs[gold].template_id])?;
        let question_ids = vocab.encode_str(&pair.question);
        let log_ids: Vec<u32> = log_tokens.iter().map(|t| vocab.id(t)).collect();
        examples.push(ReaderExample {
            input: PackedInput::new(&question_ids, &log_ids, &mask)?,
            gold_spans: spans,
        });
    }
    Ok(examples)
}

/// Train the reader on gold logs by per-example gradient descent.
/// Deterministic for a fixed seed; returns the per-epoch mean loss trace.
pub fn train_reader<S: Scalar>(
    examples: &[ReaderExample],
    encoder: &EncoderParams<S>,
    config: &ReaderConfig,
) -> Result<(ReaderModel<S>, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::DatasetTooSmall { need: 1, got: 0 });
    }
    let mut model = ReaderModel::warm_start(encoder, config.window_radius, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x2545f4914f6cdd1d));
    let lr = S::cast(config.learning_rate);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let ex = &examples[idx];
            let mut grads = ReaderGrads::zeros_like(&model);
            let loss = loss_and_grads(&model, &ex.input, &ex.gold_spans, Some(&mut grads))?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged(format!("non-finite reader loss at epoch {epoch}")));
            }
            model.embedding.scaled_add(-lr, &grads.d_embedding);
            model.w_state.scaled_add(-lr, &grads.d_w_state);
            model.w_question.scaled_add(-lr, &grads.d_w_question);
            model.w_start.scaled_add(-lr, &grads.d_w_start);
            model.w_end.scaled_add(-lr, &grads.d_w_end);
            model.w_param.scaled_add(-lr, &grads.d_w_param);
            epoch_loss += loss.as_f64();
        }
        trace.push(epoch_loss / examples.len() as f64);
    }
    Ok((model, trace))
}

/// One scored answer candidate.
#[derive(Debug, Clone, Serialize)]
pub struct AnswerRecord {
    pub answer: String,
    pub source_log_id: usize,
    pub combined_score: f64,
    pub span_score: f64,
    pub retrieval_probability: f64,
    pub start: usize,
    pub end: usize,
}

/// Ranked answers for one question.
#[derive(Debug, Clone, Serialize)]
pub struct AnswerSet {
    pub question: String,
    pub answers: Vec<AnswerRecord>,
}

impl AnswerSet {
    pub fn best(&self) -> &AnswerRecord {
        &self.answers[0]
    }
}

/// Everything inference needs about the corpus, precomputed once.
pub struct InferenceContext<'a> {
    pub corpus_tokens: &'a [Vec<String>],
    pub corpus_token_ids: &'a [Vec<u32>],
    pub parsed: &'a ParsedCorpus,
    pub vocab: &'a Vocab,
}

/// Retrieve top-k logs, extract the best span from each, and rank answers by
/// `p(z|x) * span_score`.
#[allow(clippy::too_many_arguments)]
pub fn answer_question<S: Scalar>(
    encoder: &EncoderParams<S>,
    index: &LogIndex<S>,
    reader: &ReaderModel<S>,
    ctx: &InferenceContext<'_>,
    question: &str,
    k: usize,
    temperature: S,
    max_span_len: usize,
) -> Result<AnswerSet> {
    let question_ids = ctx.vocab.encode_str(question);
    if question_ids.is_empty() {
        return Err(Error::EmptySequence);
    }
    let retrieved = retrieve_topk(encoder, index, &question_ids, k, temperature)?;
    if retrieved.ranked.is_empty() {
        return Err(Error::EmptyRetrieval);
    }
    let mut answers = Vec::with_capacity(retrieved.ranked.len());
    for ranked in &retrieved.ranked {
        let log_id = ranked.log_id;
        let parsed_log = &ctx.parsed.logs[log_id];
        let mask = parameter_token_mask(parsed_log, &ctx.parsed.templates[parsed_log.template_id])?;
        let input = PackedInput::new(&question_ids, &ctx.corpus_token_ids[log_id], &mask)?;
        let states = token_states(reader, &input);
        let (p_start, p_end) = span_distributions(reader, &states, input.log_start)?;
        let span = best_span(&p_start, &p_end, max_span_len);
        let tokens = &ctx.corpus_tokens[log_id];
        answers.push(AnswerRecord {
            answer: tokens[span.start..=span.end].join(" "),
            source_log_id: log_id,
            combined_score: ranked.probability.as_f64() * span.span_score,
            span_score: span.span_score,
            retrieval_probability: ranked.probability.as_f64(),
            start: span.start,
            end: span.end,
        });
    }
    answers.sort_by(|a, b| {
        b.combined_score
            .partial_cmp(&a.combined_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.source_log_id.cmp(&b.source_log_id))
            .then(a.start.cmp(&b.start))
            .then(a.end.cmp(&b.end))
    });
    Ok(AnswerSet { question: question.to_string(), answers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(seed: u64) -> ReaderModel<f64> {
        ReaderModel::init(10, 6, 2, seed).unwrap()
    }

    fn packed(question: &[u32], log: &[u32]) -> PackedInput {
        let mask = vec![false; log.len()];
        PackedInput::new(question, log, &mask).unwrap()
    }

    #[test]
    fn states_are_deterministic() {
        let m = model(3);
        let input = packed(&[3, 4], &[5, 6, 7]);
        let a = token_states(&m, &input);
        let b = token_states(&m, &input);
        assert_eq!(a, b);
        assert_eq!(a.nrows(), input.ids.len());
    }

    #[test]
    fn question_perturbation_reaches_log_states() {
        let m = model(3);
        let a = token_states(&m, &packed(&[3, 4], &[5, 6, 7]));
        let b = token_states(&m, &packed(&[3, 9], &[5, 6, 7]));
        // log-position states must differ: the question pool feeds them
        let log_rows = 3..6;
        let mut changed = false;
        for i in log_rows {
            if a.row(i) != b.row(i) {
                changed = true;
            }
        }
        assert!(changed);
    }

    #[test]
    fn radius_zero_and_zero_question_weight_degenerate() {
        let mut m = model(4);
        m.window_radius = 0;
        m.w_question.fill(0.0);
        let input = packed(&[3], &[5, 6]);
        let states = token_states(&m, &input);
        for (i, &id) in input.ids.iter().enumerate() {
            let expected = m.w_state.dot(&m.embedding.row(id as usize).to_owned()).mapv(f64::tanh);
            for (a, b) in states.row(i).iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn span_distributions_normalize_and_restrict() {
        let m = model(5);
        let input = packed(&[3, 4, 8], &[5, 6, 7, 9]);
        let states = token_states(&m, &input);
        let (ps, pe) = span_distributions(&m, &states, input.log_start).unwrap();
        assert_eq!(ps.len(), 4);
        assert_eq!(pe.len(), 4);
        assert!((ps.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((pe.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        // single log token: both distributions are [1.0]
        let single = packed(&[3], &[5]);
        let states = token_states(&m, &single);
        let (ps, pe) = span_distributions(&m, &states, single.log_start).unwrap();
        assert_eq!(ps, vec![1.0]);
        assert_eq!(pe, vec![1.0]);
    }

    #[test]
    fn zero_start_head_gives_uniform_distribution() {
        let mut m = model(6);
        m.w_start.fill(0.0);
        let input = packed(&[3], &[5, 6, 7]);
        let states = token_states(&m, &input);
        let (ps, _) = span_distributions(&m, &states, input.log_start).unwrap();
        for p in ps {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn best_span_enumerated_example() {
        // spans: (0,0)=0.14, (0,1)=0.56, (1,1)=0.24
        let span = best_span(&[0.7f64, 0.3], &[0.2, 0.8], 2);
        assert_eq!((span.start, span.end), (0, 1));
        assert!((span.span_score - 0.56).abs() < 1e-12);

        // peaked one-hot start=end
        let span = best_span(&[0.0f64, 1.0, 0.0], &[0.0, 1.0, 0.0], 3);
        assert_eq!((span.start, span.end), (1, 1));
        assert!((span.span_score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_span_respects_length_cap_and_ties() {
        // without the cap (0,2) would win
        let span = best_span(&[1.0f64, 0.0, 0.0], &[0.0, 0.0, 1.0], 2);
        assert!(span.end - span.start < 2);
        // exact ties prefer smaller start then smaller end
        let span = best_span(&[0.5f64, 0.5], &[0.5, 0.5], 2);
        assert_eq!((span.start, span.end), (0, 0));
    }

    #[test]
    fn gold_occurrence_enumeration() {
        let log = text::tokenize_str("a b a b c");
        let ans = text::tokenize_str("a b");
        assert_eq!(gold_occurrences(&log, &ans), vec![(0, 1), (2, 3)]);
        assert!(gold_occurrences(&log, &text::tokenize_str("z")).is_empty());
    }

    #[test]
    fn two_occurrence_loss_not_above_single() {
        let m = model(9);
        // log "x y x" with answer "x" occurring twice
        let input = packed(&[3], &[5, 6, 5]);
        let both = reader_loss(&m, &input, &[(0, 0), (2, 2)]).unwrap();
        let first = reader_loss(&m, &input, &[(0, 0)]).unwrap();
        let second = reader_loss(&m, &input, &[(2, 2)]).unwrap();
        assert!(both <= first + 1e-12);
        assert!(both <= second + 1e-12);
    }

    #[test]
    fn missing_gold_span_rejected() {
        let m = model(9);
        let input = packed(&[3], &[5, 6]);
        assert!(matches!(reader_loss(&m, &input, &[]), Err(Error::GoldSpanMissing { .. })));
        assert!(matches!(reader_loss(&m, &input, &[(0, 5)]), Err(Error::GoldSpanMissing { .. })));
    }

    #[test]
    fn toy_training_reduces_loss_and_is_deterministic() {
        // one tiny vocabulary, ten synthetic examples
        let vocab_size = 30;
        let dim = 8;
        let encoder = EncoderParams::<f64>::init(vocab_size, dim, 11).unwrap();
        let mut examples = Vec::new();
        for i in 0..10u32 {
            let q = vec![3 + (i % 5), 8];
            let log = vec![10 + i, 20 + (i % 3), 10 + i];
            let mask = vec![true, false, true];
            examples.push(ReaderExample {
                input: PackedInput::new(&q, &log, &mask).unwrap(),
                gold_spans: vec![(1, 1)],
            });
        }
        let config = ReaderConfig {
            epochs: 5,
            learning_rate: 1e-2,
            seed: 7,
            ..ReaderConfig::default()
        };
        let (m1, trace1) = train_reader(&examples, &encoder, &config).unwrap();
        let (m2, trace2) = train_reader(&examples, &encoder, &config).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(trace1, trace2);
        assert!(
            trace1.last().unwrap() < trace1.first().unwrap(),
            "loss did not decrease: {trace1:?}"
        );
    }
}
