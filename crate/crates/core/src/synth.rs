//! Synthetic vocabulary, acoustics, user-edit behaviour and client populations.
//!
//! Non-fresh words follow a Zipf law and make up the pretraining distribution.
//! Fresh words only exist on device: each is a small perturbation of some
//! non-fresh "base" word, so a model that never saw it recognizes the base
//! word instead.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::model::{decode_best, ParameterVector, Utterance, WordId};
use crate::rng::{stream, SimRng};

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub fresh_count: usize,
    pub dim: usize,
    /// Zipf exponent over non-fresh ranks.
    pub zipf_s: f64,
    /// Zipf exponent over fresh ranks.
    pub fresh_zipf_s: f64,
    /// Share of on-device tokens that are fresh words.
    pub fresh_mass: f64,
    /// Perturbation scale separating a fresh word from its base word.
    pub confuse_gamma: f64,
    pub noise_sigma: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub pretrain_utterances: usize,
    pub overall_test_utterances: usize,
    /// Targeted test sentences generated per wordlist word.
    pub targeted_per_word: usize,
    /// Extra targeted sentences whose anchor word follows on-device frequency.
    pub targeted_sampled: usize,
    pub on_device_utterances: usize,
    pub n_clients: usize,
    pub client_skew: f64,
    /// Fraction of on-device examples clustered onto clients by their rarest word.
    pub client_locality: f64,
    pub q_correct: f64,
    pub q_revise: f64,
    /// `p = (f_rarest_fresh / f)^sampling_exponent`, clamped to `[sampling_floor, 1]`.
    pub sampling_exponent: f64,
    pub sampling_floor: f64,
    /// `w = (f_commonest_fresh / f)^weight_exponent`, clamped to `[1, weight_cap]`.
    pub weight_exponent: f64,
    pub weight_cap: f64,
    /// Size of the names-analog wordlist.
    pub names_count: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            vocab_size: 500,
            fresh_count: 50,
            dim: 16,
            zipf_s: 1.0,
            fresh_zipf_s: 1.6,
            fresh_mass: 0.04,
            confuse_gamma: 3.0,
            noise_sigma: 0.7,
            min_len: 3,
            max_len: 8,
            pretrain_utterances: 6000,
            overall_test_utterances: 2000,
            targeted_per_word: 2,
            targeted_sampled: 1000,
            on_device_utterances: 32000,
            n_clients: 200,
            client_skew: 0.5,
            client_locality: 1.0,
            q_correct: 0.6,
            q_revise: 0.1,
            sampling_exponent: 1.0,
            sampling_floor: 0.02,
            weight_exponent: 0.5,
            weight_cap: 10.0,
            names_count: 50,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.dim == 0 {
            return Err(invalid_config("vocab_size and dim must be positive"));
        }
        if self.fresh_count >= self.vocab_size {
            return Err(invalid_config(
                "fresh_count must be smaller than vocab_size",
            ));
        }
        if !(self.zipf_s > 0.0) || !(self.fresh_zipf_s > 0.0) {
            return Err(invalid_config("zipf exponents must be positive"));
        }
        if !(self.confuse_gamma >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(invalid_config(
                "confuse_gamma and noise_sigma must be non-negative",
            ));
        }
        if !(0.0..1.0).contains(&self.fresh_mass)
            || (self.fresh_count > 0 && self.fresh_mass == 0.0)
        {
            return Err(invalid_config(
                "fresh_mass must lie in (0, 1) when fresh words exist",
            ));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(invalid_config("need 1 <= min_len <= max_len"));
        }
        if self.n_clients == 0 {
            return Err(invalid_config("n_clients must be at least 1"));
        }
        if !(self.client_skew >= 0.0) {
            return Err(invalid_config("client_skew must be non-negative"));
        }
        check_edit_probs(self.q_correct, self.q_revise)?;
        if !(self.sampling_floor > 0.0 && self.sampling_floor <= 1.0) {
            return Err(invalid_config("sampling_floor must lie in (0, 1]"));
        }
        if !(self.weight_cap >= 1.0) {
            return Err(invalid_config("weight_cap must be at least 1"));
        }
        if !(self.sampling_exponent >= 0.0) || !(self.weight_exponent >= 0.0) {
            return Err(invalid_config(
                "sampling and weight exponents must be non-negative",
            ));
        }
        if self.names_count + self.fresh_count > self.vocab_size - self.fresh_count {
            return Err(invalid_config(
                "names_count too large for the non-fresh vocabulary",
            ));
        }
        Ok(())
    }

    fn non_fresh(&self) -> usize {
        self.vocab_size - self.fresh_count
    }
}

fn check_edit_probs(q_correct: f64, q_revise: f64) -> Result<()> {
    let ok = (0.0..=1.0).contains(&q_correct)
        && (0.0..=1.0).contains(&q_revise)
        && q_correct + q_revise <= 1.0;
    if ok {
        Ok(())
    } else {
        Err(invalid_config(format!(
            "edit probabilities q_correct={q_correct}, q_revise={q_revise} must be in [0,1] with sum <= 1"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEntry {
    pub id: WordId,
    /// Unit-norm acoustic prototype.
    pub prototype: Vec<f64>,
    /// 1-based rank within its group (non-fresh or fresh).
    pub zipf_rank: usize,
    pub fresh: bool,
    pub confusable_with: Option<WordId>,
    /// Probability the word lets a client into a round under probabilistic sampling.
    pub sampling_p: f64,
    /// Client loss weight.
    pub loss_w: f64,
    /// Probability of the word per on-device token.
    pub on_device_freq: f64,
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-s)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

fn gaussian(rng: &mut SimRng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

fn random_unit(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim, 1.0);
        if v.iter().any(|x| *x != 0.0) {
            return normalize(v);
        }
    }
}

/// Builds the vocabulary. Ids `0..V-fresh_count` are non-fresh in rank order,
/// the remaining ids are fresh words in rank order. Each fresh word is
/// `normalize(base + confuse_gamma * g)` with `g ~ N(0, I/F)`, so the
/// perturbation has norm close to `confuse_gamma`.
pub fn gen_vocab(cfg: &SynthConfig, seed: u64) -> Result<Vec<WordEntry>> {
    cfg.validate()?;
    let mut rng = stream(seed, "vocab", 0);
    let n_plain = cfg.non_fresh();
    let plain_freq: Vec<f64> = zipf_weights(n_plain, cfg.zipf_s)
        .into_iter()
        .map(|f| f * (1.0 - cfg.fresh_mass))
        .collect();
    let fresh_freq: Vec<f64> = zipf_weights(cfg.fresh_count, cfg.fresh_zipf_s)
        .into_iter()
        .map(|f| f * cfg.fresh_mass)
        .collect();

    let mut vocab: Vec<WordEntry> = (0..n_plain)
        .map(|id| WordEntry {
            id,
            prototype: random_unit(&mut rng, cfg.dim),
            zipf_rank: id + 1,
            fresh: false,
            confusable_with: None,
            sampling_p: 1.0,
            loss_w: 1.0,
            on_device_freq: plain_freq[id],
        })
        .collect();

    let mut bases: Vec<WordId> = (0..n_plain).collect();
    bases.shuffle(&mut rng);
    let noise_scale = cfg.confuse_gamma / (cfg.dim as f64).sqrt();
    for (k, &base) in bases.iter().take(cfg.fresh_count).enumerate() {
        let noise = gaussian(&mut rng, cfg.dim, noise_scale);
        let proto = vocab[base]
            .prototype
            .iter()
            .zip(&noise)
            .map(|(p, n)| p + n)
            .collect();
        vocab.push(WordEntry {
            id: n_plain + k,
            prototype: normalize(proto),
            zipf_rank: k + 1,
            fresh: true,
            confusable_with: Some(base),
            sampling_p: 1.0,
            loss_w: 1.0,
            on_device_freq: fresh_freq[k],
        });
    }

    if cfg.fresh_count > 0 {
        let rarest = fresh_freq[cfg.fresh_count - 1];
        let commonest = fresh_freq[0];
        for w in &mut vocab {
            w.sampling_p = (rarest / w.on_device_freq)
                .powf(cfg.sampling_exponent)
                .clamp(cfg.sampling_floor, 1.0);
            w.loss_w = (commonest / w.on_device_freq)
                .powf(cfg.weight_exponent)
                .clamp(1.0, cfg.weight_cap);
        }
    }
    Ok(vocab)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordDistribution {
    /// Server-side snapshot: fresh words have zero mass.
    Pretrain,
    /// On-device usage, fresh words included.
    OnDevice,
}

/// Weighted word sampler for one distribution.
#[derive(Debug, Clone)]
pub struct WordSampler {
    index: WeightedIndex<f64>,
}

impl WordSampler {
    pub fn new(vocab: &[WordEntry], dist: WordDistribution) -> Result<Self> {
        let weights: Vec<f64> = vocab
            .iter()
            .map(|w| match dist {
                WordDistribution::Pretrain if w.fresh => 0.0,
                _ => w.on_device_freq,
            })
            .collect();
        let index = WeightedIndex::new(weights)
            .map_err(|e| invalid_config(format!("cannot build word sampler: {e}")))?;
        Ok(Self { index })
    }

    pub fn sample(&self, rng: &mut SimRng) -> WordId {
        self.index.sample(rng)
    }

    pub fn sample_seq(&self, rng: &mut SimRng, len: usize) -> Vec<WordId> {
        (0..len).map(|_| self.sample(rng)).collect()
    }
}

/// Frames for a given transcript: `prototype + noise_sigma * g`, `g ~ N(0, I/F)`.
pub fn render(
    vocab: &[WordEntry],
    truth: Vec<WordId>,
    noise_sigma: f64,
    rng: &mut SimRng,
) -> Utterance {
    let frames = truth
        .iter()
        .map(|&w| {
            let proto = &vocab[w].prototype;
            let scale = noise_sigma / (proto.len() as f64).sqrt();
            proto
                .iter()
                .map(|p| p + scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Utterance { frames, truth }
}

pub fn gen_utterance(
    vocab: &[WordEntry],
    sampler: &WordSampler,
    len_range: (usize, usize),
    noise_sigma: f64,
    rng: &mut SimRng,
) -> Utterance {
    let len = rng.random_range(len_range.0..=len_range.1);
    let truth = sampler.sample_seq(rng, len);
    render(vocab, truth, noise_sigma, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    None,
    Correction,
    Revision,
    Unnoticed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub utt: Utterance,
    /// Transcript the serving model produced.
    pub hypothesis: Vec<WordId>,
    /// Text the user finally committed.
    pub committed: Vec<WordId>,
    pub edit_kind: EditKind,
}

impl TrainingExample {
    pub fn has_edit(&self) -> bool {
        self.committed != self.hypothesis
    }
}

/// Decodes each utterance with the baseline and simulates what the user
/// commits. Revisions are same-length word sequences from `revision_words`
/// that differ from both the truth and the hypothesis.
pub fn simulate_edits(
    baseline: &ParameterVector,
    utts: Vec<Utterance>,
    q_correct: f64,
    q_revise: f64,
    revision_words: &WordSampler,
    seed: u64,
) -> Result<Vec<TrainingExample>> {
    check_edit_probs(q_correct, q_revise)?;
    let mut rng = stream(seed, "edits", 0);
    utts.into_iter()
        .map(|utt| {
            let hypothesis = decode_best(baseline, &utt)?;
            let u: f64 = rng.random();
            let wrong = hypothesis != utt.truth;
            let kind = if wrong {
                if u < q_correct {
                    EditKind::Correction
                } else if u < q_correct + q_revise {
                    EditKind::Revision
                } else {
                    EditKind::Unnoticed
                }
            } else if u < q_revise {
                EditKind::Revision
            } else {
                EditKind::None
            };
            let committed = match kind {
                EditKind::None | EditKind::Unnoticed => hypothesis.clone(),
                EditKind::Correction => utt.truth.clone(),
                EditKind::Revision => loop {
                    let text = revision_words.sample_seq(&mut rng, utt.len());
                    if text != utt.truth && text != hypothesis {
                        break text;
                    }
                },
            };
            Ok(TrainingExample {
                utt,
                hypothesis,
                committed,
                edit_kind: kind,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientShard {
    pub client_id: u32,
    pub examples: Vec<TrainingExample>,
    /// Every word id present in the committed texts of `examples`.
    pub wordlist_hits: BTreeSet<WordId>,
}

impl ClientShard {
    pub fn new(client_id: u32, examples: Vec<TrainingExample>) -> Self {
        let wordlist_hits = committed_words(&examples);
        Self {
            client_id,
            examples,
            wordlist_hits,
        }
    }
}

pub fn committed_words(examples: &[TrainingExample]) -> BTreeSet<WordId> {
    examples
        .iter()
        .flat_map(|e| e.committed.iter().copied())
        .collect()
}

/// Shard sizes proportional to `rank^-skew` over a random client order,
/// rounded with the largest-remainder method.
pub fn shard_sizes(total: usize, n_clients: usize, skew: f64, rng: &mut SimRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_clients).collect();
    order.shuffle(rng);
    let weights: Vec<f64> = order
        .iter()
        .map(|&r| ((r + 1) as f64).powf(-skew))
        .collect();
    let z: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / z).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - sizes.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..n_clients).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Partitions examples into `n_clients` shards; every example lands in
/// exactly one shard.
///
/// With `locality > 0` that fraction of examples is clustered by the rarest
/// word of its truth, so a rare word lives on few clients. `locality = 0` is a
/// plain random partition.
pub fn gen_clients(
    examples: Vec<TrainingExample>,
    vocab: &[WordEntry],
    n_clients: usize,
    skew: f64,
    locality: f64,
    seed: u64,
) -> Result<Vec<ClientShard>> {
    if n_clients == 0 {
        return Err(invalid_config("n_clients must be at least 1"));
    }
    if !(0.0..=1.0).contains(&locality) {
        return Err(invalid_config("client_locality must lie in [0, 1]"));
    }
    let mut rng = stream(seed, "clients", 0);
    let sizes = shard_sizes(examples.len(), n_clients, skew, &mut rng);

    let rarest = |e: &TrainingExample| -> Option<WordId> {
        e.utt.truth.iter().copied().min_by(|&a, &b| {
            let fa = vocab.get(a).map_or(0.0, |w| w.on_device_freq);
            let fb = vocab.get(b).map_or(0.0, |w| w.on_device_freq);
            fa.total_cmp(&fb).then(a.cmp(&b))
        })
    };
    let mut keys: Vec<WordId> = examples
        .iter()
        .filter_map(rarest)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.shuffle(&mut rng);
    let slot: BTreeMap<WordId, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let span = keys.len().max(1) as f64;
    let mut placed: Vec<(f64, TrainingExample)> = examples
        .into_iter()
        .map(|e| {
            let jitter: f64 = rng.random();
            let grouped = rng.random::<f64>() < locality;
            let pos = match rarest(&e) {
                Some(k) if grouped => slot[&k] as f64 + jitter,
                _ => jitter * span,
            };
            (pos, e)
        })
        .collect();
    placed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rest = placed.into_iter().map(|(_, e)| e);
    Ok(sizes
        .into_iter()
        .enumerate()
        .map(|(id, n)| ClientShard::new(id as u32, rest.by_ref().take(n).collect()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "ids")]
pub enum WordlistMode {
    Fresh,
    /// Non-fresh long-tail words that are nobody's confusable base.
    NamesAnalog,
    Custom(Vec<WordId>),
}

/// The `count` rarest non-fresh words that are not a base of any fresh word.
pub fn names_analog_ids(vocab: &[WordEntry], count: usize) -> Vec<WordId> {
    let bases: BTreeSet<WordId> = vocab.iter().filter_map(|w| w.confusable_with).collect();
    let mut tail: Vec<&WordEntry> = vocab
        .iter()
        .filter(|w| !w.fresh && !bases.contains(&w.id))
        .collect();
    tail.sort_by_key(|w| std::cmp::Reverse(w.zipf_rank));
    let mut ids: Vec<WordId> = tail.into_iter().take(count).map(|w| w.id).collect();
    ids.sort_unstable();
    ids
}

pub fn build_wordlist(
    vocab: &[WordEntry],
    mode: &WordlistMode,
    names_count: usize,
) -> Result<BTreeSet<WordId>> {
    match mode {
        WordlistMode::Fresh => Ok(vocab.iter().filter(|w| w.fresh).map(|w| w.id).collect()),
        WordlistMode::NamesAnalog => Ok(names_analog_ids(vocab, names_count).into_iter().collect()),
        WordlistMode::Custom(ids) => {
            if let Some(bad) = ids.iter().find(|&&id| id >= vocab.len()) {
                return Err(invalid_config(format!(
                    "wordlist id {bad} not in vocabulary"
                )));
            }
            Ok(ids.iter().copied().collect())
        }
    }
}

/// Everything a scenario needs: vocabulary, server and device data, test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusBundle {
    pub version: u32,
    pub seed: u64,
    pub vocab: Vec<WordEntry>,
    pub pretrain_set: Vec<Utterance>,
    /// Every utterance contains at least one fresh word.
    pub targeted_test: Vec<Utterance>,
    /// Every utterance contains at least one names-analog word.
    pub names_test: Vec<Utterance>,
    /// Pretrain-distribution utterances only.
    pub overall_test: Vec<Utterance>,
    /// Raw on-device utterances, before decoding and edits.
    pub on_device: Vec<Utterance>,
    /// Empty until a baseline has decoded `on_device`.
    pub clients: Vec<ClientShard>,
}

/// Each utterance carries one anchor word from `words` in a random slot, with
/// pretrain-distribution filler. Every word anchors `per_word` utterances;
/// `sampled` more pick their anchor by on-device frequency.
fn targeted_set(
    vocab: &[WordEntry],
    words: &BTreeSet<WordId>,
    per_word: usize,
    sampled: usize,
    filler: &WordSampler,
    cfg: &SynthConfig,
    rng: &mut SimRng,
) -> Result<Vec<Utterance>> {
    let ids: Vec<WordId> = words.iter().copied().collect();
    let mut anchors: Vec<WordId> = ids
        .iter()
        .flat_map(|&w| std::iter::repeat_n(w, per_word))
        .collect();
    if sampled > 0 && !ids.is_empty() {
        let pick = WeightedIndex::new(ids.iter().map(|&w| vocab[w].on_device_freq))
            .map_err(|e| invalid_config(format!("cannot weight targeted anchors: {e}")))?;
        anchors.extend((0..sampled).map(|_| ids[pick.sample(rng)]));
    }
    Ok(anchors
        .into_iter()
        .map(|w| {
            let len = rng.random_range(cfg.min_len..=cfg.max_len);
            let mut truth = filler.sample_seq(rng, len);
            let slot = rng.random_range(0..len);
            truth[slot] = w;
            render(vocab, truth, cfg.noise_sigma, rng)
        })
        .collect())
}

/// Generates the vocabulary, server corpus, on-device pool and test sets.
/// Clients are attached later with [`attach_clients`].
pub fn gen_corpus(cfg: &SynthConfig, seed: u64) -> Result<CorpusBundle> {
    cfg.validate()?;
    let vocab = gen_vocab(cfg, seed)?;
    let pretrain = WordSampler::new(&vocab, WordDistribution::Pretrain)?;
    let device = WordSampler::new(&vocab, WordDistribution::OnDevice)?;
    let lens = (cfg.min_len, cfg.max_len);

    let set = |tag: &str, n: usize, sampler: &WordSampler| {
        let mut rng = stream(seed, tag, 0);
        (0..n)
            .map(|_| gen_utterance(&vocab, sampler, lens, cfg.noise_sigma, &mut rng))
            .collect::<Vec<_>>()
    };
    let pretrain_set = set("pretrain", cfg.pretrain_utterances, &pretrain);
    let overall_test = set("overall-test", cfg.overall_test_utterances, &pretrain);
    let on_device = set("on-device", cfg.on_device_utterances, &device);

    let fresh = build_wordlist(&vocab, &WordlistMode::Fresh, cfg.names_count)?;
    let names = build_wordlist(&vocab, &WordlistMode::NamesAnalog, cfg.names_count)?;
    let targeted_test = targeted_set(
        &vocab,
        &fresh,
        cfg.targeted_per_word,
        cfg.targeted_sampled,
        &pretrain,
        cfg,
        &mut stream(seed, "targeted-test", 0),
    )?;
    let names_test = targeted_set(
        &vocab,
        &names,
        cfg.targeted_per_word,
        cfg.targeted_sampled,
        &pretrain,
        cfg,
        &mut stream(seed, "names-test", 0),
    )?;

    Ok(CorpusBundle {
        version: CORPUS_VERSION,
        seed,
        vocab,
        pretrain_set,
        targeted_test,
        names_test,
        overall_test,
        on_device,
        clients: Vec::new(),
    })
}

/// Decodes the on-device pool with `baseline`, simulates edits and partitions
/// the resulting examples into clients.
///
/// Revision text comes from the server word distribution: a rewrite is
/// unrelated to what was spoken, so it rarely contains a fresh word.
pub fn attach_clients(
    bundle: &mut CorpusBundle,
    baseline: &ParameterVector,
    cfg: &SynthConfig,
) -> Result<()> {
    let revisions = WordSampler::new(&bundle.vocab, WordDistribution::Pretrain)?;
    let examples = simulate_edits(
        baseline,
        bundle.on_device.clone(),
        cfg.q_correct,
        cfg.q_revise,
        &revisions,
        bundle.seed,
    )?;
    bundle.clients = gen_clients(
        examples,
        &bundle.vocab,
        cfg.n_clients,
        cfg.client_skew,
        cfg.client_locality,
        bundle.seed,
    )?;
    Ok(())
}
