//! Toy slot-transducer recognizer.
//!
//! Every frame is scored independently with a linear map followed by a softmax
//! over the vocabulary, so a transcript of `T` frames is `T` conditionally
//! independent word choices. That keeps beam search exact, makes N-best lists
//! enumerable, and gives closed-form gradients for both the per-slot
//! cross-entropy and the cached-hypothesis MWER loss.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::metrics;

pub type WordId = usize;

/// Flat parameter state: `V x F` score matrix (row-major) followed by `V` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    vocab: usize,
    dim: usize,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(vocab: usize, dim: usize) -> Self {
        Self {
            vocab,
            dim,
            values: vec![0.0; vocab * dim + vocab],
        }
    }

    pub fn from_values(vocab: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if vocab == 0 || dim == 0 {
            return Err(invalid_input(
                "vocabulary size and feature dimension must be positive",
            ));
        }
        if values.len() != vocab * dim + vocab {
            return Err(invalid_input(format!(
                "parameter length {} does not match V*F+V = {}",
                values.len(),
                vocab * dim + vocab
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_input(format!("parameter {i} is not finite")));
        }
        Ok(Self { vocab, dim, values })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, word: WordId) -> &[f64] {
        &self.values[word * self.dim..(word + 1) * self.dim]
    }

    pub fn bias(&self, word: WordId) -> f64 {
        self.values[self.vocab * self.dim + word]
    }

    pub fn same_shape(&self, other: &ParameterVector) -> bool {
        self.vocab == other.vocab && self.dim == other.dim
    }

    pub(crate) fn check_shape(&self, other: &ParameterVector) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(invalid_input(format!(
                "shape mismatch: ({}, {}) vs ({}, {})",
                self.vocab, self.dim, other.vocab, other.dim
            )))
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ParameterVector, scale: f64) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Element-wise `self - other`.
    pub fn diff(&self, other: &ParameterVector) -> ParameterVector {
        debug_assert!(self.same_shape(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        ParameterVector {
            vocab: self.vocab,
            dim: self.dim,
            values,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Raw scores `M x + b` for one frame.
    pub fn scores(&self, frame: &[f64]) -> Vec<f64> {
        let bias = &self.values[self.vocab * self.dim..];
        self.values[..self.vocab * self.dim]
            .chunks_exact(self.dim)
            .zip(bias)
            .map(|(row, b)| row.iter().zip(frame).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Simulated acoustics plus the spoken word sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub frames: Vec<Vec<f64>>,
    pub truth: Vec<WordId>,
}

impl Utterance {
    pub fn new(frames: Vec<Vec<f64>>, truth: Vec<WordId>) -> Result<Self> {
        if frames.is_empty() {
            return Err(invalid_input("utterance must have at least one frame"));
        }
        if frames.len() != truth.len() {
            return Err(invalid_input(format!(
                "{} frames but {} truth words",
                frames.len(),
                truth.len()
            )));
        }
        Ok(Self { frames, truth })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn check(&self, params: &ParameterVector) -> Result<()> {
        if self.frames.is_empty() || self.frames.len() != self.truth.len() {
            return Err(invalid_input("malformed utterance"));
        }
        if let Some(f) = self.frames.iter().find(|f| f.len() != params.dim) {
            return Err(invalid_input(format!(
                "frame dimension {} does not match model dimension {}",
                f.len(),
                params.dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub words: Vec<WordId>,
    /// Sum of per-slot log-softmax probabilities.
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub base_loss: f64,
    pub mwer_loss: f64,
    /// Weight applied to `mwer_loss` when forming [`LossReport::total`].
    pub mwer_weight: f64,
    pub gradient: ParameterVector,
}

impl LossReport {
    pub fn total(&self) -> f64 {
        if self.mwer_weight == 0.0 {
            self.base_loss
        } else {
            self.base_loss + self.mwer_weight * self.mwer_loss
        }
    }
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

/// Per-slot log-probabilities, `T x V`.
pub fn log_probs(params: &ParameterVector, utt: &Utterance) -> Result<Vec<Vec<f64>>> {
    utt.check(params)?;
    Ok(utt
        .frames
        .iter()
        .map(|x| log_softmax(&params.scores(x)))
        .collect())
}

/// Per-slot probability table, `T x V`, each row a softmax.
pub fn forward(params: &ParameterVector, utt: &Utterance) -> Result<Vec<Vec<f64>>> {
    Ok(log_probs(params, utt)?
        .into_iter()
        .map(|row| row.into_iter().map(f64::exp).collect())
        .collect())
}

/// Descending score, then lexicographically smaller word sequence.
fn hyp_order(a: &(Vec<WordId>, f64), b: &(Vec<WordId>, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

fn top_k(row: &[f64], k: usize) -> Vec<(WordId, f64)> {
    let mut idx: Vec<(WordId, f64)> = row.iter().copied().enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    idx.truncate(k);
    idx
}

/// Per-slot argmax sequence (lowest id wins ties).
pub fn decode_best(params: &ParameterVector, utt: &Utterance) -> Result<Vec<WordId>> {
    utt.check(params)?;
    Ok(utt
        .frames
        .iter()
        .map(|x| {
            let scores = params.scores(x);
            let mut best = 0;
            for (v, s) in scores.iter().enumerate() {
                if *s > scores[best] {
                    best = v;
                }
            }
            best
        })
        .collect())
}

/// Left-to-right beam search returning up to `n` distinct hypotheses sorted by
/// descending log-probability. Slots are independent, so with `beam >= n` the
/// result is the exact global top-`n`.
pub fn decode_nbest(
    params: &ParameterVector,
    utt: &Utterance,
    n: usize,
    beam: usize,
) -> Result<Vec<Hypothesis>> {
    if n == 0 {
        return Err(invalid_input("n-best size must be at least 1"));
    }
    if beam < n {
        return Err(invalid_input(format!("beam {beam} smaller than n {n}")));
    }
    let table = log_probs(params, utt)?;
    let mut beams: Vec<(Vec<WordId>, f64)> = vec![(Vec::with_capacity(table.len()), 0.0)];
    for row in &table {
        let cands = top_k(row, beam);
        let mut next = Vec::with_capacity(beams.len() * cands.len());
        for (words, lp) in &beams {
            for &(w, wlp) in &cands {
                let mut ext = words.clone();
                ext.push(w);
                next.push((ext, lp + wlp));
            }
        }
        next.sort_by(hyp_order);
        next.truncate(beam);
        beams = next;
    }
    beams.truncate(n);
    Ok(beams
        .into_iter()
        .map(|(words, log_prob)| Hypothesis { words, log_prob })
        .collect())
}

fn check_label(params: &ParameterVector, utt: &Utterance, label: &[WordId]) -> Result<()> {
    if label.len() != utt.len() {
        return Err(invalid_input(format!(
            "label length {} does not match {} frames",
            label.len(),
            utt.len()
        )));
    }
    if let Some(w) = label.iter().find(|&&w| w >= params.vocab) {
        return Err(invalid_input(format!("label word {w} outside vocabulary")));
    }
    Ok(())
}

/// Accumulates `coef[v] * x` into row `v` and `coef[v]` into bias `v`.
fn accumulate_slot(grad: &mut ParameterVector, frame: &[f64], coef: &[f64]) {
    let (rows, bias) = grad.values.split_at_mut(grad.vocab * grad.dim);
    for ((row, b), &c) in rows
        .chunks_exact_mut(grad.dim)
        .zip(bias.iter_mut())
        .zip(coef)
    {
        if c == 0.0 {
            continue;
        }
        for (g, x) in row.iter_mut().zip(frame) {
            *g += c * x;
        }
        *b += c;
    }
}

/// Per-slot cross-entropy against `label` with its exact gradient.
pub fn base_loss_grad(
    params: &ParameterVector,
    utt: &Utterance,
    label: &[WordId],
) -> Result<LossReport> {
    utt.check(params)?;
    check_label(params, utt, label)?;
    let mut gradient = ParameterVector::zeros(params.vocab, params.dim);
    let mut loss = 0.0;
    for (x, &y) in utt.frames.iter().zip(label) {
        let lp = log_softmax(&params.scores(x));
        loss -= lp[y];
        let mut coef: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        coef[y] -= 1.0;
        accumulate_slot(&mut gradient, x, &coef);
    }
    Ok(LossReport {
        base_loss: loss,
        mwer_loss: 0.0,
        mwer_weight: 0.0,
        gradient,
    })
}

/// MWER objective for already-normalized hypothesis probabilities:
/// `sum_i p_i * (W_i - mean(W))`, evaluated as `sum_i p_i W_i - mean(W) sum_i p_i`.
/// Exactly zero when every hypothesis has the same error count.
pub fn mwer_objective(p_hat: &[f64], errors: &[f64]) -> f64 {
    if errors.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let weighted: f64 = p_hat.iter().zip(errors).map(|(p, w)| p * w).sum();
    weighted - mean * p_hat.iter().sum::<f64>()
}

/// Normalizes hypothesis log-probabilities with log-sum-exp and returns
/// `(p_hat, loss, d loss / d log P_i)`.
pub fn mwer_from_log_probs(log_probs: &[f64], errors: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
    let max = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + log_probs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let p_hat: Vec<f64> = log_probs.iter().map(|l| (l - lse).exp()).collect();
    let loss = mwer_objective(&p_hat, errors);
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let dlogp = p_hat
        .iter()
        .zip(errors)
        .map(|(p, w)| p * (w - mean - loss))
        .collect();
    (p_hat, loss, dlogp)
}

/// Cached-hypothesis MWER: the hypothesis set is fixed, only their normalized
/// probabilities under the current parameters carry gradient.
pub fn mwer_loss_grad(
    params: &ParameterVector,
    utt: &Utterance,
    label: &[WordId],
    cached: &[Hypothesis],
) -> Result<LossReport> {
    if cached.is_empty() {
        return Err(invalid_input("MWER needs at least one cached hypothesis"));
    }
    check_label(params, utt, label)?;
    let table = log_probs(params, utt)?;
    for h in cached {
        check_label(params, utt, &h.words)?;
    }
    let seq_logp: Vec<f64> = cached
        .iter()
        .map(|h| h.words.iter().zip(&table).map(|(&w, row)| row[w]).sum())
        .collect();
    let errors: Vec<f64> = cached
        .iter()
        .map(|h| metrics::align(label, &h.words).errors() as f64)
        .collect();
    let (_, loss, dlogp) = mwer_from_log_probs(&seq_logp, &errors);

    // d log P_i / d s_t = onehot(y_it) - softmax(s_t); the softmax part cancels
    // because the coefficients sum to zero.
    let mut gradient = ParameterVector::zeros(params.vocab, params.dim);
    for (t, x) in utt.frames.iter().enumerate() {
        let mut coef = vec![0.0; params.vocab];
        for (h, a) in cached.iter().zip(&dlogp) {
            coef[h.words[t]] += a;
        }
        accumulate_slot(&mut gradient, x, &coef);
    }
    Ok(LossReport {
        base_loss: 0.0,
        mwer_loss: loss,
        mwer_weight: 1.0,
        gradient,
    })
}

/// Base loss plus `mwer_weight` times the MWER loss over a freshly decoded,
/// then frozen, N-best cache.
pub fn combined_loss_grad(
    params: &ParameterVector,
    utt: &Utterance,
    label: &[WordId],
    n: usize,
    beam: usize,
    mwer_weight: f64,
) -> Result<LossReport> {
    if !(mwer_weight >= 0.0) {
        return Err(invalid_input("MWER weight must be non-negative"));
    }
    let mut report = base_loss_grad(params, utt, label)?;
    if mwer_weight == 0.0 {
        return Ok(report);
    }
    let cached = decode_nbest(params, utt, n, beam)?;
    let mwer = mwer_loss_grad(params, utt, label, &cached)?;
    report.gradient.add_scaled(&mwer.gradient, mwer_weight);
    report.mwer_loss = mwer.mwer_loss;
    report.mwer_weight = mwer_weight;
    Ok(report)
}
