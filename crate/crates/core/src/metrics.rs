//! Word error rate, per-word accuracy, error-correction percent and
//! word-exposure counting.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::model::{decode_best, ParameterVector, Utterance, WordId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { r: usize, h: usize },
    Substitute { r: usize, h: usize },
    Insert { h: usize },
    Delete { r: usize },
}

/// Minimal-cost alignment between a reference and a hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl Alignment {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Levenshtein alignment over tokens. Among minimal paths, a substitution is
/// preferred over an insertion/deletion pair.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T]) -> Alignment {
    let (n, m) = (reference.len(), hyp.len());
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, c) in cost[0].iter_mut().enumerate() {
        *c = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[i - 1][j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            cost[i][j] = diag.min(cost[i - 1][j] + 1).min(cost[i][j - 1] + 1);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if cost[i][j] == cost[i - 1][j - 1] + usize::from(!same) {
                if same {
                    ops.push(EditOp::Match { r: i - 1, h: j - 1 });
                } else {
                    ops.push(EditOp::Substitute { r: i - 1, h: j - 1 });
                    s += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[i][j] == cost[i - 1][j] + 1 {
            ops.push(EditOp::Delete { r: i - 1 });
            del += 1;
            i -= 1;
        } else {
            ops.push(EditOp::Insert { h: j - 1 });
            ins += 1;
            j -= 1;
        }
    }
    ops.reverse();
    Alignment {
        ops,
        substitutions: s,
        insertions: ins,
        deletions: del,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_tokens: usize,
    pub wer: f64,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

pub fn edit_distance<T: PartialEq>(reference: &[T], hyp: &[T]) -> Result<WerBreakdown> {
    if reference.is_empty() {
        return Err(invalid_input("WER is undefined for an empty reference"));
    }
    let a = align(reference, hyp);
    Ok(WerBreakdown {
        substitutions: a.substitutions,
        insertions: a.insertions,
        deletions: a.deletions,
        ref_tokens: reference.len(),
        wer: a.errors() as f64 / reference.len() as f64,
    })
}

/// Pooled WER over `(reference, hypothesis)` pairs.
pub fn pooled_wer<'a, I>(pairs: I) -> Result<WerBreakdown>
where
    I: IntoIterator<Item = (&'a [WordId], &'a [WordId])>,
{
    let mut total = WerBreakdown {
        substitutions: 0,
        insertions: 0,
        deletions: 0,
        ref_tokens: 0,
        wer: 0.0,
    };
    for (r, h) in pairs {
        let a = align(r, h);
        total.substitutions += a.substitutions;
        total.insertions += a.insertions;
        total.deletions += a.deletions;
        total.ref_tokens += r.len();
    }
    if total.ref_tokens == 0 {
        return Err(invalid_input("WER is undefined for an empty test set"));
    }
    total.wer = total.errors() as f64 / total.ref_tokens as f64;
    Ok(total)
}

/// 1-best transcripts for every utterance, in test-set order.
pub fn transcribe(params: &ParameterVector, testset: &[Utterance]) -> Result<Vec<Vec<WordId>>> {
    testset.par_iter().map(|u| decode_best(params, u)).collect()
}

/// Pooled corpus WER of the 1-best decode. Slots are independent, so the
/// 1-best beam result is the per-slot argmax regardless of `beam`.
pub fn corpus_wer(params: &ParameterVector, testset: &[Utterance], beam: usize) -> Result<f64> {
    if testset.is_empty() {
        return Err(invalid_input("empty test set"));
    }
    if beam == 0 {
        return Err(invalid_input("beam must be at least 1"));
    }
    let hyps = transcribe(params, testset)?;
    Ok(pooled_wer(
        testset
            .iter()
            .zip(&hyps)
            .map(|(u, h)| (u.truth.as_slice(), h.as_slice())),
    )?
    .wer)
}

/// Fraction of baseline errors a fine-tuned model fixed. `None` when the
/// baseline made no errors.
pub fn error_correction_percent(acc_base: f64, acc_exp: f64) -> Option<f64> {
    if acc_base >= 1.0 {
        return None;
    }
    Some((acc_exp - acc_base) / (1.0 - acc_base))
}

/// Per-word accuracy over a test set: for each word in `words`, the fraction
/// of utterances containing it where every occurrence aligns to a match.
pub fn word_accuracy(
    testset: &[Utterance],
    hyps: &[Vec<WordId>],
    words: &BTreeSet<WordId>,
) -> BTreeMap<WordId, f64> {
    let mut hits: BTreeMap<WordId, (usize, usize)> = BTreeMap::new();
    for (utt, hyp) in testset.iter().zip(hyps) {
        let a = align(&utt.truth, hyp);
        let mut correct = vec![false; utt.truth.len()];
        for op in &a.ops {
            if let EditOp::Match { r, .. } = op {
                correct[*r] = true;
            }
        }
        let present: BTreeSet<WordId> = utt
            .truth
            .iter()
            .copied()
            .filter(|w| words.contains(w))
            .collect();
        for w in present {
            let ok = utt
                .truth
                .iter()
                .zip(&correct)
                .filter(|(t, _)| **t == w)
                .all(|(_, c)| *c);
            let e = hits.entry(w).or_default();
            e.1 += 1;
            if ok {
                e.0 += 1;
            }
        }
    }
    hits.into_iter()
        .map(|(w, (ok, n))| (w, ok as f64 / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStat {
    pub seen_count: u64,
    pub acc_base: f64,
    pub acc_exp: f64,
    pub ec_percent: Option<f64>,
}

pub type WordStats = BTreeMap<WordId, WordStat>;

pub fn word_stats(
    seen: &BTreeMap<WordId, u64>,
    acc_base: &BTreeMap<WordId, f64>,
    acc_exp: &BTreeMap<WordId, f64>,
) -> WordStats {
    acc_base
        .iter()
        .filter_map(|(w, &b)| {
            let e = *acc_exp.get(w)?;
            Some((
                *w,
                WordStat {
                    seen_count: seen.get(w).copied().unwrap_or(0),
                    acc_base: b,
                    acc_exp: e,
                    ec_percent: error_correction_percent(b, e),
                },
            ))
        })
        .collect()
}

pub const DEFAULT_BUCKET_EDGES: [u64; 4] = [1, 10, 100, 1000];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    /// Inclusive lower edge.
    pub min: u64,
    /// Exclusive upper edge, `None` for the open last bucket.
    pub max: Option<u64>,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureSnapshot {
    pub unique_words: usize,
    pub histogram: Vec<HistogramBucket>,
}

impl ExposureSnapshot {
    /// Number of words seen at least `threshold` times, when `threshold` is a
    /// bucket edge.
    pub fn words_at_least(&self, threshold: u64) -> usize {
        self.histogram
            .iter()
            .filter(|b| b.min >= threshold)
            .map(|b| b.words)
            .sum()
    }
}

/// Cumulative wordlist-word occurrence counts over consumed committed texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposureTracker {
    wordlist: BTreeSet<WordId>,
    edges: Vec<u64>,
    counts: BTreeMap<WordId, u64>,
}

impl ExposureTracker {
    pub fn new(wordlist: BTreeSet<WordId>) -> Self {
        Self::with_edges(wordlist, DEFAULT_BUCKET_EDGES.to_vec())
    }

    pub fn with_edges(wordlist: BTreeSet<WordId>, mut edges: Vec<u64>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Self {
            wordlist,
            edges,
            counts: BTreeMap::new(),
        }
    }

    /// Counts every occurrence, so a word appearing twice in one text counts 2.
    pub fn consume(&mut self, committed: &[WordId]) {
        for w in committed {
            if self.wordlist.contains(w) {
                *self.counts.entry(*w).or_default() += 1;
            }
        }
    }

    pub fn seen_count(&self, w: WordId) -> u64 {
        self.counts.get(&w).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<WordId, u64> {
        &self.counts
    }

    pub fn snapshot(&self) -> ExposureSnapshot {
        let histogram = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &min)| {
                let max = self.edges.get(i + 1).copied();
                let words = self
                    .counts
                    .values()
                    .filter(|&&c| c >= min && max.is_none_or(|m| c < m))
                    .count();
                HistogramBucket { min, max, words }
            })
            .collect();
        ExposureSnapshot {
            unique_words: self.counts.values().filter(|&&c| c > 0).count(),
            histogram,
        }
    }
}

/// Replays per-round consumed committed texts and returns one snapshot per
/// round.
pub fn word_exposure<'a, R, I>(rounds: R, wordlist: &BTreeSet<WordId>) -> Vec<ExposureSnapshot>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = &'a [WordId]>,
{
    let mut tracker = ExposureTracker::new(wordlist.clone());
    rounds
        .into_iter()
        .map(|texts| {
            for t in texts {
                tracker.consume(t);
            }
            tracker.snapshot()
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}
