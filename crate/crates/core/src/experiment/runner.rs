//! Scenario driver: data generation, pretraining, federated trajectories and
//! artifact persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{MetricsConfig, PretrainConfig, ScenarioConfig, TargetSet, Variant};
use super::io::{write_checkpoint, write_jsonl, write_text};
use super::report::emit_report;
use crate::engine::{self, EngineState, RoundContext, RoundRecord, TrainedExample};
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::metrics::{transcribe, word_accuracy, word_stats, ExposureTracker, WordStats};
use crate::model::{base_loss_grad, ParameterVector, Utterance, WordId};
use crate::rng::stream;
use crate::synth::{attach_clients, build_wordlist, gen_corpus, CorpusBundle};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Mini-batch gradient descent on the mean per-slot cross-entropy, starting
/// from all-zero parameters.
pub fn pretrain(bundle: &CorpusBundle, cfg: &PretrainConfig, seed: u64) -> Result<ParameterVector> {
    if bundle.pretrain_set.is_empty() {
        return Err(invalid_input("pretraining corpus is empty"));
    }
    let dim = bundle
        .vocab
        .first()
        .map(|w| w.prototype.len())
        .ok_or_else(|| invalid_input("empty vocabulary"))?;
    let mut params = ParameterVector::zeros(bundle.vocab.len(), dim);
    let set = &bundle.pretrain_set;
    let mut order: Vec<usize> = (0..set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream(seed, "pretrain-epoch", epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let reports = batch
                .par_iter()
                .map(|&i| base_loss_grad(&params, &set[i], &set[i].truth))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = ParameterVector::zeros(params.vocab(), params.dim());
            for r in &reports {
                epoch_loss += r.base_loss;
                grad.add_scaled(&r.gradient, 1.0);
            }
            params.add_scaled(&grad, -cfg.lr / batch.len() as f64);
        }
        if !epoch_loss.is_finite() || !params.is_finite() {
            return Err(Error::NonFinite(format!(
                "pretraining diverged at epoch {epoch} (lr {})",
                cfg.lr
            )));
        }
        info!(
            "pretrain epoch {epoch}: mean utterance loss {:.4}",
            epoch_loss / set.len() as f64
        );
    }
    Ok(params)
}

/// Corpus with clients attached and the baseline that decoded them.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub bundle: CorpusBundle,
    pub theta_0: ParameterVector,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mut bundle = gen_corpus(&cfg.synth, cfg.seed)?;
    let theta_0 = pretrain(&bundle, &cfg.pretrain, cfg.seed)?;
    attach_clients(&mut bundle, &theta_0, &cfg.synth)?;
    Ok(Prepared { bundle, theta_0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStatRow {
    pub word: WordId,
    pub seen_count: u64,
    pub acc_base: f64,
    pub acc_exp: f64,
    pub ec_percent: Option<f64>,
}

pub fn word_stat_rows(stats: &WordStats) -> Vec<WordStatRow> {
    stats
        .iter()
        .map(|(w, s)| WordStatRow {
            word: *w,
            seen_count: s.seen_count,
            acc_base: s.acc_base,
            acc_exp: s.acc_exp,
            ec_percent: s.ec_percent,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    /// Round 0 (baseline) first, then one record per round.
    pub records: Vec<RoundRecord>,
    pub trained: Vec<Vec<TrainedExample>>,
    pub train_checkpoints: Vec<ParameterVector>,
    pub final_evaluated: ParameterVector,
    pub final_trained: ParameterVector,
    pub word_stats: WordStats,
    pub seen: BTreeMap<WordId, u64>,
}

impl VariantResult {
    pub fn baseline(&self) -> &RoundRecord {
        &self.records[0]
    }

    /// Last record that carries WER values.
    pub fn last_evaluated(&self) -> &RoundRecord {
        self.records
            .iter()
            .rev()
            .find(|r| r.overall_wer.is_some())
            .expect("round 0 is always evaluated")
    }
}

pub fn targeted_set(bundle: &CorpusBundle, target: TargetSet) -> &[Utterance] {
    match target {
        TargetSet::Fresh => &bundle.targeted_test,
        TargetSet::Names => &bundle.names_test,
    }
}

/// Words whose per-word accuracy is reported for a target set.
fn target_words(
    bundle: &CorpusBundle,
    target: TargetSet,
    names_count: usize,
) -> Result<BTreeSet<WordId>> {
    let mode = match target {
        TargetSet::Fresh => crate::synth::WordlistMode::Fresh,
        TargetSet::Names => crate::synth::WordlistMode::NamesAnalog,
    };
    build_wordlist(&bundle.vocab, &mode, names_count)
}

pub struct RunOptions<'a> {
    pub total_rounds: usize,
    pub eval_every: usize,
    pub metrics: &'a MetricsConfig,
    pub names_count: usize,
    /// Keep the training checkpoint after every round.
    pub keep_trajectory: bool,
}

pub fn run_variant(
    prepared: &Prepared,
    variant: &Variant,
    opts: &RunOptions<'_>,
) -> Result<VariantResult> {
    let bundle = &prepared.bundle;
    if bundle.clients.is_empty() {
        return Err(invalid_config(
            "corpus has no clients; run pretraining first",
        ));
    }
    let wordlist = build_wordlist(&bundle.vocab, &variant.wordlist, opts.names_count)?;
    let targeted = targeted_set(bundle, variant.targeted);
    let ctx = RoundContext {
        bundle,
        wordlist: &wordlist,
        targeted_test: targeted,
    };
    let mut state = EngineState::new(prepared.theta_0.clone(), wordlist.clone());
    state.exposure =
        ExposureTracker::with_edges(wordlist.clone(), opts.metrics.bucket_edges.clone());

    let (o, t) = engine::evaluate(&state.evaluated, &ctx)?;
    let mut records = vec![RoundRecord {
        round: 0,
        selected_clients: 0,
        dropped_clients: 0,
        central_updates: 0,
        examples_trained: 0,
        empty: true,
        overall_wer: Some(o),
        targeted_wer: Some(t),
        exposure: state.exposure.snapshot(),
        policy: variant.policy.kind,
        alpha: variant.policy.alpha,
        checkpoint: Some("theta0.json".into()),
    }];
    let mut trained = Vec::with_capacity(opts.total_rounds);
    let mut train_checkpoints = Vec::new();
    for round in 1..=opts.total_rounds {
        let eval_now = round % opts.eval_every == 0 || round == opts.total_rounds;
        let out = engine::run_round(&mut state, &ctx, &variant.round, &variant.policy, eval_now)?;
        let mut record = out.record;
        if round == opts.total_rounds {
            record.checkpoint = Some(format!("{}/final_checkpoint.json", variant.name));
        }
        info!(
            "{} round {round}: overall {:?} targeted {:?} unique {}",
            variant.name, record.overall_wer, record.targeted_wer, record.exposure.unique_words
        );
        records.push(record);
        trained.push(out.trained);
        if opts.keep_trajectory {
            train_checkpoints.push(state.theta.clone());
        }
    }

    let words = target_words(bundle, variant.targeted, opts.names_count)?;
    let base_hyps = transcribe(&prepared.theta_0, targeted)?;
    let exp_hyps = transcribe(&state.evaluated, targeted)?;
    let acc_base = word_accuracy(targeted, &base_hyps, &words);
    let acc_exp = word_accuracy(targeted, &exp_hyps, &words);
    let seen = state.exposure.counts().clone();
    let stats = word_stats(&seen, &acc_base, &acc_exp);

    Ok(VariantResult {
        name: variant.name.clone(),
        records,
        trained,
        train_checkpoints,
        final_evaluated: state.evaluated,
        final_trained: state.theta,
        word_stats: stats,
        seen,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Paths relative to the output directory, excluding the manifest itself.
    pub files: Vec<String>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
struct TrainingLogRow<'a> {
    round: usize,
    examples: &'a [TrainedExample],
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs every variant of a scenario and writes its artifacts under `out`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<(RunManifest, Vec<VariantResult>)> {
    let started = now_unix();
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let opts = RunOptions {
        total_rounds: cfg.total_rounds,
        eval_every: cfg.eval_every,
        metrics: &cfg.metrics,
        names_count: cfg.synth.names_count,
        keep_trajectory: false,
    };
    let results = cfg
        .variants
        .par_iter()
        .map(|v| run_variant(&prepared, v, &opts))
        .collect::<Result<Vec<_>>>()?;

    let mut files: Vec<PathBuf> = Vec::new();
    let mut put = |rel: PathBuf, text: String| -> Result<()> {
        write_text(&out.join(&rel), &text)?;
        files.push(rel);
        Ok(())
    };
    put("config.json".into(), cfg.to_json())?;
    put(
        "theta0.json".into(),
        super::io::checkpoint_to_string(&prepared.theta_0),
    )?;
    for r in &results {
        let dir = PathBuf::from(&r.name);
        write_jsonl(&out.join(dir.join("metrics.jsonl")), &r.records)?;
        files.push(dir.join("metrics.jsonl"));
        write_jsonl(
            &out.join(dir.join("word_stats.jsonl")),
            &word_stat_rows(&r.word_stats),
        )?;
        files.push(dir.join("word_stats.jsonl"));
        let log: Vec<TrainingLogRow<'_>> = r
            .trained
            .iter()
            .enumerate()
            .map(|(i, ex)| TrainingLogRow {
                round: i + 1,
                examples: ex,
            })
            .collect();
        write_jsonl(&out.join(dir.join("training_log.jsonl")), &log)?;
        files.push(dir.join("training_log.jsonl"));
        write_checkpoint(
            &out.join(dir.join("final_checkpoint.json")),
            &r.final_evaluated,
        )?;
        files.push(dir.join("final_checkpoint.json"));
    }
    let report = emit_report(out)?;
    files.extend(report.files.iter().cloned());

    let manifest = RunManifest {
        config_hash: cfg.hash(),
        code_version: CODE_VERSION.to_string(),
        started_unix: started,
        finished_unix: now_unix(),
        files: files
            .iter()
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .collect(),
    };
    write_text(
        &out.join(MANIFEST_FILE),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok((manifest, results))
}

/// Overall and targeted WER of a checkpoint on a prepared corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub overall_wer: f64,
    pub targeted_wer: f64,
    pub names_wer: f64,
}

pub fn evaluate_checkpoint(bundle: &CorpusBundle, params: &ParameterVector) -> Result<EvalSummary> {
    use crate::metrics::corpus_wer;
    Ok(EvalSummary {
        overall_wer: corpus_wer(params, &bundle.overall_test, 1)?,
        targeted_wer: corpus_wer(params, &bundle.targeted_test, 1)?,
        names_wer: corpus_wer(params, &bundle.names_test, 1)?,
    })
}
