//! Federated rounds: filtering, client selection, weighted local SGD,
//! example-weighted FedAvg and the optional centralized mixture.

use std::collections::BTreeSet;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Error, Result};
use crate::metrics::{corpus_wer, ExposureSnapshot, ExposureTracker};
use crate::mitigation::{MitigationKind, MitigationPolicy};
use crate::model::{combined_loss_grad, LossReport, ParameterVector, Utterance, WordId};
use crate::rng::{derive_seed, stream};
use crate::synth::{ClientShard, CorpusBundle, TrainingExample, WordEntry};

/// Pseudo-client ids for centralized updates start here, after every real client.
pub const CENTRAL_ID_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    None,
    EditsOnly,
    WordlistAndEdit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CentralizedMix {
    Off,
    On {
        pseudo_clients: usize,
        batches_per_round: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundConfig {
    pub clients_per_round: usize,
    pub local_epochs: usize,
    pub local_lr: f64,
    pub batch_size: usize,
    pub filter_mode: FilterMode,
    pub use_prob_sampling: bool,
    pub use_loss_weighting: bool,
    pub centralized_mix: CentralizedMix,
    pub mwer_weight: f64,
    pub nbest: usize,
    pub beam: usize,
    pub seed: u64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            clients_per_round: 10,
            local_epochs: 1,
            local_lr: 1.0,
            batch_size: 8,
            filter_mode: FilterMode::WordlistAndEdit,
            use_prob_sampling: false,
            use_loss_weighting: false,
            centralized_mix: CentralizedMix::Off,
            mwer_weight: 0.0,
            nbest: 4,
            beam: 4,
            seed: 0,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients_per_round == 0 {
            return Err(invalid_config("clients_per_round must be at least 1"));
        }
        if !(self.local_lr > 0.0) || !self.local_lr.is_finite() {
            return Err(invalid_config("local_lr must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid_config("batch_size must be at least 1"));
        }
        if !(self.mwer_weight >= 0.0) {
            return Err(invalid_config("mwer_weight must be non-negative"));
        }
        if self.nbest == 0 || self.beam < self.nbest {
            return Err(invalid_config("need 1 <= nbest <= beam"));
        }
        if let CentralizedMix::On {
            pseudo_clients,
            batches_per_round,
        } = self.centralized_mix
        {
            if pseudo_clients == 0 || batches_per_round == 0 {
                return Err(invalid_config(
                    "centralized mix needs pseudo_clients and batches_per_round >= 1",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: u64,
    /// `local_final - round_start`
    pub delta: ParameterVector,
    pub n_examples: usize,
}

fn contains_any(text: &[WordId], wordlist: &BTreeSet<WordId>) -> bool {
    text.iter().any(|w| wordlist.contains(w))
}

/// Examples a client may train on. Training labels are always the committed text.
pub fn filter_examples<'a>(
    shard: &'a ClientShard,
    wordlist: &BTreeSet<WordId>,
    mode: FilterMode,
) -> Vec<&'a TrainingExample> {
    shard
        .examples
        .iter()
        .filter(|e| match mode {
            FilterMode::None => true,
            FilterMode::EditsOnly => e.has_edit(),
            FilterMode::WordlistAndEdit => e.has_edit() && contains_any(&e.committed, wordlist),
        })
        .collect()
}

/// Inclusion probability for one client under probabilistic sampling: the
/// largest `sampling_p` among its wordlist words, or 1 without any.
pub fn gate_probability(
    shard: &ClientShard,
    vocab: &[WordEntry],
    wordlist: &BTreeSet<WordId>,
) -> f64 {
    shard
        .wordlist_hits
        .iter()
        .filter(|w| wordlist.contains(w))
        .map(|&w| vocab[w].sampling_p)
        .reduce(f64::max)
        .unwrap_or(1.0)
}

/// Picks the round's clients, returned in ascending id order. Only clients
/// with at least one example surviving the filter are eligible. With
/// probabilistic sampling each eligible client first passes a Bernoulli gate;
/// the quota is then drawn uniformly among those that passed.
pub fn sample_clients<'a>(
    clients: &'a [ClientShard],
    vocab: &[WordEntry],
    wordlist: &BTreeSet<WordId>,
    cfg: &RoundConfig,
    round_seed: u64,
) -> Vec<&'a ClientShard> {
    let mut pool: Vec<&ClientShard> = clients
        .iter()
        .filter(|c| !filter_examples(c, wordlist, cfg.filter_mode).is_empty())
        .collect();
    if cfg.use_prob_sampling {
        let mut gate = stream(round_seed, "gate", 0);
        pool.retain(|c| {
            let p = gate_probability(c, vocab, wordlist);
            let u: f64 = gate.random();
            u < p
        });
    }
    let take = cfg.clients_per_round.min(pool.len());
    let mut draw = stream(round_seed, "draw", 0);
    let mut picked: Vec<&ClientShard> = index::sample(&mut draw, pool.len(), take)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_by_key(|c| c.client_id);
    picked
}

/// Loss weight of one utterance: the largest `loss_w` among wordlist words in
/// its committed text, 1 when there is none or weighting is off.
pub fn utterance_weight(
    committed: &[WordId],
    vocab: &[WordEntry],
    wordlist: &BTreeSet<WordId>,
    use_weighting: bool,
) -> f64 {
    if !use_weighting {
        return 1.0;
    }
    committed
        .iter()
        .filter(|w| wordlist.contains(w))
        .map(|&w| vocab[w].loss_w)
        .reduce(f64::max)
        .unwrap_or(1.0)
}

/// `sum_u w_u * loss_u`
pub fn weighted_loss_sum(losses: &[f64], weights: &[f64]) -> f64 {
    losses.iter().zip(weights).map(|(l, w)| w * l).sum()
}

/// One labelled utterance with its loss weight.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub utt: &'a Utterance,
    pub label: &'a [WordId],
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct LossSettings {
    mwer_weight: f64,
    nbest: usize,
    beam: usize,
}

fn weighted_loss(
    params: &ParameterVector,
    samples: &[Sample<'_>],
    s: LossSettings,
) -> Result<LossReport> {
    let reports = samples
        .iter()
        .map(|x| combined_loss_grad(params, x.utt, x.label, s.nbest, s.beam, s.mwer_weight))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = samples.iter().map(|x| x.weight).collect();
    let base: Vec<f64> = reports.iter().map(|r| r.base_loss).collect();
    let mwer: Vec<f64> = reports.iter().map(|r| r.mwer_loss).collect();
    let mut gradient = ParameterVector::zeros(params.vocab(), params.dim());
    for (r, w) in reports.iter().zip(&weights) {
        gradient.add_scaled(&r.gradient, *w);
    }
    Ok(LossReport {
        base_loss: weighted_loss_sum(&base, &weights),
        mwer_loss: weighted_loss_sum(&mwer, &weights),
        mwer_weight: s.mwer_weight,
        gradient,
    })
}

pub fn samples_from<'a>(
    examples: &[&'a TrainingExample],
    vocab: &[WordEntry],
    wordlist: &BTreeSet<WordId>,
    use_weighting: bool,
) -> Vec<Sample<'a>> {
    examples
        .iter()
        .map(|e| Sample {
            utt: &e.utt,
            label: &e.committed,
            weight: utterance_weight(&e.committed, vocab, wordlist, use_weighting),
        })
        .collect()
}

/// Weighted client loss against committed labels, summed over utterances.
pub fn client_loss(
    params: &ParameterVector,
    examples: &[&TrainingExample],
    vocab: &[WordEntry],
    wordlist: &BTreeSet<WordId>,
    use_weighting: bool,
    cfg: &RoundConfig,
) -> Result<LossReport> {
    let samples = samples_from(examples, vocab, wordlist, use_weighting);
    weighted_loss(params, &samples, settings(cfg))
}

fn settings(cfg: &RoundConfig) -> LossSettings {
    LossSettings {
        mwer_weight: cfg.mwer_weight,
        nbest: cfg.nbest,
        beam: cfg.beam,
    }
}

/// Mini-batch SGD on the summed weighted loss, `local_epochs` passes with a
/// per-epoch shuffle drawn from `seed`.
pub fn local_train(
    round_start: &ParameterVector,
    samples: &[Sample<'_>],
    cfg: &RoundConfig,
    client_id: u64,
    seed: u64,
) -> Result<ClientUpdate> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "local training needs at least one example".into(),
        ));
    }
    let mut params = round_start.clone();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.local_epochs {
        order.shuffle(&mut stream(seed, "epoch", epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let picked: Vec<Sample<'_>> = batch.iter().map(|&i| samples[i]).collect();
            let report = weighted_loss(&params, &picked, settings(cfg))?;
            if !report.total().is_finite() || !report.gradient.is_finite() {
                return Err(Error::NonFinite(format!(
                    "client {client_id} epoch {epoch}"
                )));
            }
            params.add_scaled(&report.gradient, -cfg.local_lr);
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite(format!("client {client_id} parameters")));
    }
    Ok(ClientUpdate {
        client_id,
        delta: params.diff(round_start),
        n_examples: samples.len(),
    })
}

/// Server-side pseudo-client updates on the pretraining corpus.
pub fn centralized_updates(
    round_start: &ParameterVector,
    pretrain_set: &[Utterance],
    cfg: &RoundConfig,
    round_seed: u64,
) -> Result<Vec<ClientUpdate>> {
    let CentralizedMix::On {
        pseudo_clients,
        batches_per_round,
    } = cfg.centralized_mix
    else {
        return Ok(Vec::new());
    };
    if pretrain_set.is_empty() {
        return Err(Error::InvalidInput(
            "centralized mix needs a pretraining corpus".into(),
        ));
    }
    let per_client = batches_per_round * cfg.batch_size;
    let central_cfg = RoundConfig {
        use_loss_weighting: false,
        ..cfg.clone()
    };
    (0..pseudo_clients)
        .into_par_iter()
        .map(|k| {
            let id = CENTRAL_ID_BASE + k as u64;
            let mut rng = stream(round_seed, "central", k as u64);
            let picks = index::sample(
                &mut rng,
                pretrain_set.len(),
                per_client.min(pretrain_set.len()),
            );
            let samples: Vec<Sample<'_>> = picks
                .into_iter()
                .map(|i| Sample {
                    utt: &pretrain_set[i],
                    label: &pretrain_set[i].truth,
                    weight: 1.0,
                })
                .collect();
            local_train(
                round_start,
                &samples,
                &central_cfg,
                id,
                derive_seed(round_seed, "central-train", k as u64),
            )
        })
        .collect()
}

/// Example-weighted FedAvg, reduced in ascending client-id order.
pub fn aggregate(
    round_start: &ParameterVector,
    updates: &[ClientUpdate],
) -> Result<ParameterVector> {
    let total: usize = updates.iter().map(|u| u.n_examples).sum();
    if updates.is_empty() || total == 0 {
        return Ok(round_start.clone());
    }
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.client_id);
    let mut sum = ParameterVector::zeros(round_start.vocab(), round_start.dim());
    for u in ordered {
        round_start.check_shape(&u.delta)?;
        sum.add_scaled(&u.delta, u.n_examples as f64);
    }
    let mut next = round_start.clone();
    next.add_scaled(&sum, 1.0 / total as f64);
    Ok(next)
}

/// Evolving engine state between rounds.
#[derive(Debug, Clone)]
pub struct EngineState {
    /// Checkpoint the next round starts from.
    pub theta: ParameterVector,
    /// Pretrained checkpoint.
    pub theta_0: ParameterVector,
    /// Checkpoint served and evaluated after the last round.
    pub evaluated: ParameterVector,
    pub round_index: usize,
    pub exposure: ExposureTracker,
}

impl EngineState {
    pub fn new(theta_0: ParameterVector, wordlist: BTreeSet<WordId>) -> Self {
        Self {
            theta: theta_0.clone(),
            evaluated: theta_0.clone(),
            theta_0,
            round_index: 0,
            exposure: ExposureTracker::new(wordlist),
        }
    }
}

/// Data a round reads.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub bundle: &'a CorpusBundle,
    pub wordlist: &'a BTreeSet<WordId>,
    /// Test set focused on the wordlist words.
    pub targeted_test: &'a [Utterance],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub selected_clients: usize,
    pub dropped_clients: usize,
    pub central_updates: usize,
    pub examples_trained: usize,
    /// No update was aggregated this round.
    pub empty: bool,
    pub overall_wer: Option<f64>,
    pub targeted_wer: Option<f64>,
    pub exposure: ExposureSnapshot,
    pub policy: MitigationKind,
    pub alpha: f64,
    pub checkpoint: Option<String>,
}

/// Example a round trained on, for audit logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainedExample {
    pub client_id: u32,
    pub example: usize,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub record: RoundRecord,
    pub trained: Vec<TrainedExample>,
}

pub fn evaluate(params: &ParameterVector, ctx: &RoundContext<'_>) -> Result<(f64, f64)> {
    let overall = corpus_wer(params, &ctx.bundle.overall_test, 1)?;
    let targeted = corpus_wer(params, ctx.targeted_test, 1)?;
    Ok((overall, targeted))
}

/// One federated round: select, filter, train locally, mix in centralized
/// updates, aggregate, apply the mitigation hook and optionally evaluate.
pub fn run_round(
    state: &mut EngineState,
    ctx: &RoundContext<'_>,
    cfg: &RoundConfig,
    policy: &MitigationPolicy,
    evaluate_now: bool,
) -> Result<RoundOutcome> {
    cfg.validate()?;
    policy.validate()?;
    let round = state.round_index + 1;
    let round_seed = derive_seed(cfg.seed, "round", round as u64);
    let vocab = &ctx.bundle.vocab;

    let selected = sample_clients(&ctx.bundle.clients, vocab, ctx.wordlist, cfg, round_seed);
    let results: Vec<(u32, Vec<&TrainingExample>, Result<ClientUpdate>)> = selected
        .par_iter()
        .map(|shard| {
            let kept = filter_examples(shard, ctx.wordlist, cfg.filter_mode);
            let samples = samples_from(&kept, vocab, ctx.wordlist, cfg.use_loss_weighting);
            let seed = derive_seed(round_seed, "client", u64::from(shard.client_id));
            let update = local_train(
                &state.theta,
                &samples,
                cfg,
                u64::from(shard.client_id),
                seed,
            );
            (shard.client_id, kept, update)
        })
        .collect();

    let mut updates = Vec::with_capacity(results.len());
    let mut trained = Vec::new();
    let mut dropped = 0;
    for (client_id, kept, update) in results {
        match update {
            Ok(u) => {
                let shard = &ctx.bundle.clients[client_id as usize];
                for e in &kept {
                    state.exposure.consume(&e.committed);
                    let example = shard
                        .examples
                        .iter()
                        .position(|x| std::ptr::eq(x, *e))
                        .expect("kept example belongs to its shard");
                    trained.push(TrainedExample { client_id, example });
                }
                updates.push(u);
            }
            Err(Error::NonFinite(msg)) => {
                warn!("round {round}: dropping client {client_id}: {msg}");
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let examples_trained = trained.len();

    let central = centralized_updates(&state.theta, &ctx.bundle.pretrain_set, cfg, round_seed)?;
    let central_updates = central.len();
    updates.extend(central);

    let empty = updates.is_empty();
    let aggregated = aggregate(&state.theta, &updates)?;
    let next = policy.apply(&state.theta_0, aggregated)?;
    state.theta = next.train_next_from;
    state.evaluated = next.evaluate;
    state.round_index = round;

    let (overall_wer, targeted_wer) = if evaluate_now {
        let (o, t) = evaluate(&state.evaluated, ctx)?;
        (Some(o), Some(t))
    } else {
        (None, None)
    };

    Ok(RoundOutcome {
        record: RoundRecord {
            round,
            selected_clients: selected.len(),
            dropped_clients: dropped,
            central_updates,
            examples_trained,
            empty,
            overall_wer,
            targeted_wer,
            exposure: state.exposure.snapshot(),
            policy: policy.kind,
            alpha: policy.alpha,
            checkpoint: None,
        },
        trained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::EditKind;

    fn example(
        truth: Vec<WordId>,
        hyp: Vec<WordId>,
        committed: Vec<WordId>,
        kind: EditKind,
    ) -> TrainingExample {
        let frames = truth.iter().map(|&w| vec![w as f64 * 0.1, 1.0]).collect();
        TrainingExample {
            utt: Utterance::new(frames, truth).unwrap(),
            hypothesis: hyp,
            committed,
            edit_kind: kind,
        }
    }

    fn vocab(n: usize) -> Vec<WordEntry> {
        (0..n)
            .map(|id| WordEntry {
                id,
                prototype: vec![1.0, 0.0],
                zipf_rank: id + 1,
                fresh: false,
                confusable_with: None,
                sampling_p: 1.0,
                loss_w: 1.0,
                on_device_freq: 1.0 / n as f64,
            })
            .collect()
    }

    #[test]
    fn filter_rules() {
        let wl: BTreeSet<WordId> = [9].into_iter().collect();
        let shard = ClientShard::new(
            0,
            vec![
                example(vec![9, 1], vec![2, 1], vec![9, 1], EditKind::Correction),
                example(vec![3, 1], vec![3, 1], vec![4, 5], EditKind::Revision),
                example(vec![9, 1], vec![9, 1], vec![9, 1], EditKind::None),
            ],
        );
        let ids = |v: Vec<&TrainingExample>| v.iter().map(|e| e.edit_kind).collect::<Vec<_>>();
        assert_eq!(
            ids(filter_examples(&shard, &wl, FilterMode::WordlistAndEdit)),
            vec![EditKind::Correction]
        );
        assert_eq!(
            ids(filter_examples(&shard, &wl, FilterMode::EditsOnly)),
            vec![EditKind::Correction, EditKind::Revision]
        );
        assert_eq!(filter_examples(&shard, &wl, FilterMode::None).len(), 3);
    }

    #[test]
    fn gate_uses_max_probability() {
        let mut v = vocab(10);
        v[3].sampling_p = 0.2;
        v[4].sampling_p = 0.9;
        let wl: BTreeSet<WordId> = [3, 4].into_iter().collect();
        let shard = ClientShard::new(
            0,
            vec![example(
                vec![3, 4, 1],
                vec![0, 0, 1],
                vec![3, 4, 1],
                EditKind::Correction,
            )],
        );
        assert_eq!(gate_probability(&shard, &v, &wl), 0.9);
        let plain = ClientShard::new(
            1,
            vec![example(vec![1], vec![0], vec![1], EditKind::Correction)],
        );
        assert_eq!(gate_probability(&plain, &v, &wl), 1.0);
    }

    #[test]
    fn eq1_examples() {
        assert_eq!(weighted_loss_sum(&[2.0, 3.0], &[1.0, 5.0]), 17.0);
        let mut v = vocab(10);
        v[2].loss_w = 2.0;
        v[7].loss_w = 7.0;
        let wl: BTreeSet<WordId> = [2, 7].into_iter().collect();
        assert_eq!(utterance_weight(&[2, 7, 1], &v, &wl, true), 7.0);
        assert_eq!(utterance_weight(&[2, 7, 1], &v, &wl, false), 1.0);
        assert_eq!(utterance_weight(&[1], &v, &wl, true), 1.0);
    }

    #[test]
    fn aggregate_weighted_mean() {
        let start = ParameterVector::zeros(1, 1);
        let d = |a: f64| ParameterVector::from_values(1, 1, vec![a, a]).unwrap();
        let ups = vec![
            ClientUpdate {
                client_id: 2,
                delta: d(3.0),
                n_examples: 3,
            },
            ClientUpdate {
                client_id: 1,
                delta: d(1.0),
                n_examples: 1,
            },
        ];
        assert_eq!(aggregate(&start, &ups).unwrap().values(), &[2.5, 2.5]);
        let single = vec![ClientUpdate {
            client_id: 1,
            delta: d(1.5),
            n_examples: 4,
        }];
        assert_eq!(aggregate(&start, &single).unwrap().values(), &[1.5, 1.5]);
        assert_eq!(aggregate(&start, &[]).unwrap(), start);
        let zeros = vec![ClientUpdate {
            client_id: 1,
            delta: d(0.0),
            n_examples: 4,
        }];
        assert_eq!(aggregate(&start, &zeros).unwrap(), start);
    }

    #[test]
    fn zero_lr_is_rejected_and_empty_training_errors() {
        let cfg = RoundConfig {
            local_lr: 0.0,
            ..RoundConfig::default()
        };
        assert!(cfg.validate().is_err());
        let start = ParameterVector::zeros(3, 2);
        assert!(local_train(&start, &[], &RoundConfig::default(), 0, 0).is_err());
    }

    #[test]
    fn single_step_matches_gradient() {
        let v = vocab(10);
        let wl = BTreeSet::new();
        let ex = example(vec![1, 2], vec![0, 0], vec![1, 2], EditKind::Correction);
        let refs = vec![&ex];
        let cfg = RoundConfig {
            local_lr: 0.3,
            batch_size: 4,
            local_epochs: 1,
            ..RoundConfig::default()
        };
        let start = ParameterVector::zeros(10, 2);
        let samples = samples_from(&refs, &v, &wl, false);
        let up = local_train(&start, &samples, &cfg, 0, 1).unwrap();
        let g = client_loss(&start, &refs, &v, &wl, false, &cfg)
            .unwrap()
            .gradient;
        for (d, g) in up.delta.values().iter().zip(g.values()) {
            assert!((d + 0.3 * g).abs() < 1e-12);
        }
        assert_eq!(up.n_examples, 1);
    }

    #[test]
    fn centralized_off_is_empty() {
        let cfg = RoundConfig::default();
        let start = ParameterVector::zeros(3, 2);
        assert!(centralized_updates(&start, &[], &cfg, 0)
            .unwrap()
            .is_empty());
    }
}
