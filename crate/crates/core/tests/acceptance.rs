//! End-to-end acceptance gate. Every criterion prints one PASS/FAIL line and
//! the binary exits non-zero if any of them fails.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fedfresh::engine::{client_loss, utterance_weight, weighted_loss_sum, RoundConfig};
use fedfresh::experiment::{
    prepare, run_scenario, run_variant, Prepared, RunOptions, ScenarioConfig, VariantResult,
};
use fedfresh::metrics::{corpus_wer, edit_distance, error_correction_percent, median};
use fedfresh::mitigation::{apply_dynamic, average_checkpoints, MitigationKind, MitigationPolicy};
use fedfresh::model::{
    base_loss_grad, combined_loss_grad, decode_nbest, log_probs, mwer_from_log_probs,
    mwer_loss_grad, mwer_objective,
};
use fedfresh::synth::{EditKind, TrainingExample, WordEntry};
use fedfresh::{Hypothesis, ParameterVector, Utterance, WordId};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    v: usize,
    f: usize,
    t: usize,
) -> (ParameterVector, Utterance, Vec<WordId>) {
    let vals = (0..v * f + v)
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    let params = ParameterVector::from_values(v, f, vals).unwrap();
    let frames = (0..t)
        .map(|_| (0..f).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let truth = (0..t).map(|_| rng.random_range(0..v)).collect();
    let label = (0..t).map(|_| rng.random_range(0..v)).collect();
    (params, Utterance::new(frames, truth).unwrap(), label)
}

/// Max-norm relative error of `analytic` against central differences.
fn fd_error(
    params: &ParameterVector,
    analytic: &ParameterVector,
    loss: impl Fn(&ParameterVector) -> f64,
) -> f64 {
    let h = 1e-5;
    let (mut worst, mut scale) = (0.0f64, 1e-8f64);
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.values_mut()[i] += h;
        let mut minus = params.clone();
        minus.values_mut()[i] -= h;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let a = analytic.values()[i];
        worst = worst.max((a - numeric).abs());
        scale = scale.max(a.abs()).max(numeric.abs());
    }
    worst / scale
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_base, mut worst_mwer, mut worst_comb) = (0.0f64, 0.0f64, 0.0f64);
    let instances = 150;
    for _ in 0..instances {
        let (v, f, t) = (
            rng.random_range(2..6),
            rng.random_range(1..5),
            rng.random_range(1..4),
        );
        let (params, utt, label) = random_instance(&mut rng, v, f, t);
        let n = rng.random_range(2..5);
        let lambda = rng.random_range(0.1..2.0);

        let g = base_loss_grad(&params, &utt, &label).unwrap().gradient;
        worst_base = worst_base.max(fd_error(&params, &g, |p| {
            base_loss_grad(p, &utt, &label).unwrap().base_loss
        }));

        let cached = decode_nbest(&params, &utt, n, n).unwrap();
        let g = mwer_loss_grad(&params, &utt, &label, &cached)
            .unwrap()
            .gradient;
        worst_mwer = worst_mwer.max(fd_error(&params, &g, |p| {
            mwer_loss_grad(p, &utt, &label, &cached).unwrap().mwer_loss
        }));

        let g = combined_loss_grad(&params, &utt, &label, n, n, lambda)
            .unwrap()
            .gradient;
        worst_comb = worst_comb.max(fd_error(&params, &g, |p| {
            base_loss_grad(p, &utt, &label).unwrap().base_loss
                + lambda * mwer_loss_grad(p, &utt, &label, &cached).unwrap().mwer_loss
        }));
    }
    let worst = worst_base.max(worst_mwer).max(worst_comb);
    outcome(
        worst < 1e-5,
        format!("{instances} instances per loss, max relative error base {worst_base:.1e}, mwer {worst_mwer:.1e}, combined {worst_comb:.1e}"),
    )
}

fn brute_distance(r: &[usize], h: &[usize]) -> usize {
    match (r, h) {
        ([], _) => h.len(),
        (_, []) => r.len(),
        ([a, rt @ ..], [b, ht @ ..]) => (brute_distance(rt, ht) + usize::from(a != b))
            .min(brute_distance(rt, h) + 1)
            .min(brute_distance(r, ht) + 1),
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut decode_cases = 0;
    let mut mismatches = 0;
    let mut largest = 0;
    while decode_cases < 200 {
        let v: usize = rng.random_range(2..11);
        let t: usize = rng.random_range(1..6);
        let total = v.pow(t as u32);
        if total > 10_000 {
            continue;
        }
        largest = largest.max(total);
        let f = rng.random_range(1..4);
        let (params, utt, _) = random_instance(&mut rng, v, f, t);
        let table = log_probs(&params, &utt).unwrap();
        let mut all: Vec<(Vec<WordId>, f64)> = (0..total)
            .map(|mut code| {
                let mut words = vec![0; t];
                for slot in (0..t).rev() {
                    words[slot] = code % v;
                    code /= v;
                }
                let lp = words
                    .iter()
                    .zip(&table)
                    .fold(0.0, |acc, (&w, row)| acc + row[w]);
                (words, lp)
            })
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let n = rng.random_range(1..=total.min(50));
        let got = decode_nbest(&params, &utt, n, n).unwrap();
        let same = got.len() == n
            && got.iter().zip(&all).all(|(h, (w, lp))| {
                &h.words == w && (h.log_prob - lp).abs() <= 1e-12 * lp.abs().max(1.0)
            });
        mismatches += usize::from(!same);
        decode_cases += 1;
    }

    let mut edit_cases = 0;
    let mut edit_bad = 0;
    for _ in 0..2000 {
        let r: Vec<usize> = (0..rng.random_range(1..7))
            .map(|_| rng.random_range(0..3))
            .collect();
        let h: Vec<usize> = (0..rng.random_range(0..7))
            .map(|_| rng.random_range(0..3))
            .collect();
        let b = edit_distance(&r, &h).unwrap();
        edit_bad += usize::from(b.errors() != brute_distance(&r, &h));
        edit_cases += 1;
    }
    outcome(
        mismatches == 0 && edit_bad == 0,
        format!(
            "n-best: {decode_cases} instances up to V^T={largest}, {mismatches} mismatches; edit distance: {edit_cases} pairs, {edit_bad} mismatches"
        ),
    )
}

fn mwer_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut equal_ok = true;
    for _ in 0..100 {
        let (v, t) = (rng.random_range(3..6), rng.random_range(1..4));
        let (params, utt, label) = random_instance(&mut rng, v, 2, t);
        // every cached hypothesis differs from the label in exactly one slot
        let cached: Vec<Hypothesis> = (0..t)
            .map(|slot| {
                let mut words = label.clone();
                words[slot] = (words[slot] + 1) % v;
                Hypothesis {
                    words,
                    log_prob: 0.0,
                }
            })
            .collect();
        let r = mwer_loss_grad(&params, &utt, &label, &cached).unwrap();
        equal_ok &= r.mwer_loss == 0.0 && r.gradient.values().iter().all(|g| *g == 0.0);
    }

    let mut worst_shift = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(2..7);
        let lps: Vec<f64> = (0..k).map(|_| rng.random_range(-20.0..0.0)).collect();
        let errs: Vec<f64> = (0..k).map(|_| rng.random_range(0..5) as f64).collect();
        let shift = rng.random_range(-30.0..30.0);
        let (p, loss, grad) = mwer_from_log_probs(&lps, &errs);
        let shifted: Vec<f64> = lps.iter().map(|l| l + shift).collect();
        let (p2, loss2, grad2) = mwer_from_log_probs(&shifted, &errs);
        worst_shift = worst_shift.max((loss - loss2).abs());
        for (a, b) in p.iter().zip(&p2).chain(grad.iter().zip(&grad2)) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    let worked = mwer_objective(&[0.8, 0.2], &[0.0, 2.0]);
    outcome(
        equal_ok && worst_shift <= 1e-12 && worked == -0.6,
        format!("equal-error sets zero: {equal_ok}; rescaling max deviation {worst_shift:.1e}; worked value {worked}"),
    )
}

fn entry(id: WordId, loss_w: f64) -> WordEntry {
    WordEntry {
        id,
        prototype: vec![1.0],
        zipf_rank: id + 1,
        fresh: true,
        confusable_with: None,
        sampling_p: 1.0,
        loss_w,
        on_device_freq: 0.01,
    }
}

fn loss_weighting_properties() -> Outcome {
    let weighted = weighted_loss_sum(&[2.0, 3.0], &[1.0, 5.0]);
    let vocab: Vec<WordEntry> = (0..10).map(|w| entry(w, w as f64)).collect();
    let wordlist: BTreeSet<WordId> = [2, 7].into_iter().collect();
    let max_rule = utterance_weight(&[0, 2, 7, 1], &vocab, &wordlist, true);
    let none = utterance_weight(&[0, 1], &vocab, &wordlist, true);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut scaling_ok = true;
    let cfg = RoundConfig::default();
    for _ in 0..100 {
        let (params, utt, label) = random_instance(&mut rng, 4, 2, 3);
        let weights: Vec<f64> = (0..4).map(|_| rng.random_range(1.0..8.0)).collect();
        let c = 2f64.powi(rng.random_range(-3..5));
        let a_vocab: Vec<WordEntry> = (0..4).map(|w| entry(w, weights[w])).collect();
        let b_vocab: Vec<WordEntry> = (0..4).map(|w| entry(w, c * weights[w])).collect();
        let all: BTreeSet<WordId> = (0..4).collect();
        let ex = TrainingExample {
            utt,
            hypothesis: vec![0; 3],
            committed: label,
            edit_kind: EditKind::Correction,
        };
        let a = client_loss(&params, &[&ex], &a_vocab, &all, true, &cfg).unwrap();
        let b = client_loss(&params, &[&ex], &b_vocab, &all, true, &cfg).unwrap();
        scaling_ok &= b.total() == c * a.total()
            && a.gradient
                .values()
                .iter()
                .zip(b.gradient.values())
                .all(|(x, y)| *y == c * x);
    }
    outcome(
        weighted == 17.0 && max_rule == 7.0 && none == 1.0 && scaling_ok,
        format!("weighted sum {weighted}, max rule {max_rule}, no wordlist word {none}, exact scaling by c: {scaling_ok}"),
    )
}

fn ec_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut ok = true;
    for _ in 0..1000 {
        let base = rng.random_range(0.0..1.0);
        ok &= error_correction_percent(base, 1.0) == Some(1.0);
        ok &= error_correction_percent(base, base) == Some(0.0);
    }
    let undefined = error_correction_percent(1.0, 0.7).is_none()
        && error_correction_percent(1.0, 1.0).is_none();
    outcome(
        ok && undefined,
        format!("identities exact: {ok}; undefined at acc_base = 1 reported: {undefined}"),
    )
}

/// A small scenario for trajectory comparisons.
fn small_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset("sim_finetune", SEED).unwrap();
    cfg.synth.vocab_size = 80;
    cfg.synth.fresh_count = 10;
    cfg.synth.dim = 6;
    cfg.synth.pretrain_utterances = 600;
    cfg.synth.overall_test_utterances = 100;
    cfg.synth.targeted_per_word = 3;
    cfg.synth.targeted_sampled = 0;
    cfg.synth.on_device_utterances = 1500;
    cfg.synth.n_clients = 20;
    cfg.synth.names_count = 10;
    cfg.pretrain.epochs = 3;
    cfg.total_rounds = 6;
    cfg
}

fn averaging_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut endpoints = true;
    let mut geometric = 0.0f64;
    for _ in 0..100 {
        let a = ParameterVector::from_values(
            3,
            2,
            (0..9).map(|_| rng.random_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        let b = ParameterVector::from_values(
            3,
            2,
            (0..9).map(|_| rng.random_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        endpoints &= average_checkpoints(&a, &b, 0.0).unwrap() == b
            && average_checkpoints(&a, &b, 1.0).unwrap() == a;
        let alpha = rng.random_range(0.05..0.95);
        let d0 = b.diff(&a);
        let mut theta = b.clone();
        for k in 1..=30 {
            theta = apply_dynamic(&a, theta, alpha).unwrap().train_next_from;
            let factor = (1.0f64 - alpha).powi(k);
            for ((x, base), d) in theta.values().iter().zip(a.values()).zip(d0.values()) {
                geometric = geometric.max((x - (base + factor * d)).abs());
            }
        }
    }

    let cfg = small_config();
    let prepared = prepare(&cfg).unwrap();
    let opts = RunOptions {
        total_rounds: cfg.total_rounds,
        eval_every: cfg.total_rounds,
        metrics: &cfg.metrics,
        names_count: cfg.synth.names_count,
        keep_trajectory: true,
    };
    let plain = cfg.variants[0].clone();
    let mut stat = plain.clone();
    stat.name = "static".into();
    stat.policy = MitigationPolicy::new(MitigationKind::StaticAvg, 0.5).unwrap();
    let a = run_variant(&prepared, &plain, &opts).unwrap();
    let b = run_variant(&prepared, &stat, &opts).unwrap();
    let bitwise = a.train_checkpoints.len() == cfg.total_rounds
        && a.train_checkpoints
            .iter()
            .zip(&b.train_checkpoints)
            .all(|(x, y)| {
                x.values()
                    .iter()
                    .zip(y.values())
                    .all(|(p, q)| p.to_bits() == q.to_bits())
            });
    outcome(
        endpoints && bitwise && geometric <= 1e-12,
        format!("alpha 0/1 exact: {endpoints}; static trajectory bitwise equal over {} rounds: {bitwise}; dynamic max deviation {geometric:.1e}", cfg.total_rounds),
    )
}

/// Prepared corpora shared by scenarios with the same data and pretraining settings.
struct Cache(HashMap<String, Prepared>);

impl Cache {
    fn prepared(&mut self, cfg: &ScenarioConfig) -> &Prepared {
        let key = serde_json::to_string(&(&cfg.synth, &cfg.pretrain, cfg.seed)).unwrap();
        self.0.entry(key).or_insert_with(|| prepare(cfg).unwrap())
    }

    fn run(&mut self, cfg: &ScenarioConfig, names: &[&str]) -> Vec<VariantResult> {
        let opts = RunOptions {
            total_rounds: cfg.total_rounds,
            eval_every: cfg.total_rounds,
            metrics: &cfg.metrics,
            names_count: cfg.synth.names_count,
            keep_trajectory: false,
        };
        let prepared = self.prepared(cfg);
        names
            .iter()
            .map(|n| {
                let v = cfg
                    .variants
                    .iter()
                    .find(|v| v.name == *n)
                    .unwrap_or_else(|| panic!("variant {n} missing"));
                run_variant(prepared, v, &opts).unwrap()
            })
            .collect()
    }
}

fn wers(r: &VariantResult) -> (f64, f64, f64, f64) {
    let (b, l) = (r.baseline(), r.last_evaluated());
    (
        b.overall_wer.unwrap(),
        b.targeted_wer.unwrap(),
        l.overall_wer.unwrap(),
        l.targeted_wer.unwrap(),
    )
}

fn filtering_necessity(cache: &mut Cache) -> Outcome {
    let cfg = ScenarioConfig::preset("filtering_ablation", SEED).unwrap();
    let rs = cache.run(&cfg, &["edits_only", "wordlist_and_edit"]);
    let (base, _, edits, _) = wers(&rs[0]);
    let (_, _, filtered, _) = wers(&rs[1]);
    let q = cfg.synth.q_revise;
    outcome(
        q == 0.5 && edits >= 1.2 * filtered && edits > base,
        format!(
            "q_revise {q}: edits_only overall {:.2}% vs wordlist_and_edit {:.2}% (ratio {:.2}), round 0 {:.2}%",
            100.0 * edits,
            100.0 * filtered,
            edits / filtered,
            100.0 * base
        ),
    )
}

fn forgetting_and_mitigation(cache: &mut Cache) -> Outcome {
    let cfg = ScenarioConfig::preset("mitigation_grid", SEED).unwrap();
    let r = cache.run(&cfg, &["pure_fl"]).remove(0);
    let (bo, bt, fo, ft) = wers(&r);
    let gain = (bt - ft) / bt;
    let degradation = (fo - bo) / bo;
    let prepared = cache.prepared(&cfg);
    let alphas: Vec<f64> = cfg
        .variants
        .iter()
        .filter(|v| v.policy.kind == MitigationKind::StaticAvg)
        .map(|v| v.policy.alpha)
        .collect();
    // Static averaging never changes training, so each static variant's served
    // checkpoint is the average of theta_0 with the pure FL trajectory's end.
    let mut best: Option<(f64, f64, f64)> = None;
    for &a in &alphas {
        let served = average_checkpoints(&prepared.theta_0, &r.final_trained, a).unwrap();
        let o = corpus_wer(&served, &prepared.bundle.overall_test, 1).unwrap();
        let t = corpus_wer(&served, &prepared.bundle.targeted_test, 1).unwrap();
        if o <= 1.01 * bo && best.is_none_or(|b| t < b.2) {
            best = Some((a, o, t));
        }
    }
    let kept = best.map(|b| (bt - b.2) / (bt - ft)).unwrap_or(0.0);
    let static_text = match best {
        Some((a, o, _)) => format!(
            "best static alpha {a:.2} overall {:+.2}%, keeps {:.0}% of the gain",
            100.0 * (o - bo) / bo,
            100.0 * kept
        ),
        None => "no static alpha restores overall WER".to_string(),
    };
    outcome(
        gain >= 0.15 && degradation >= 0.02 && kept >= 0.5,
        format!(
            "targeted gain {:.1}%, overall degradation {:.1}%, {static_text}",
            100.0 * gain,
            100.0 * degradation
        ),
    )
}

fn centralized_mixture(cache: &mut Cache) -> Outcome {
    let cfg = ScenarioConfig::preset("centralized_mix", SEED).unwrap();
    let rs = cache.run(&cfg, &["fl_only", "fl_centralized_mix"]);
    let (bo, _, _, fl_t) = wers(&rs[0]);
    let (_, _, mo, mt) = wers(&rs[1]);
    outcome(
        mo <= 1.01 * bo && mt <= 1.02 * fl_t,
        format!(
            "mix overall {:+.2}% vs baseline, mix targeted {:+.2}% vs FL only",
            100.0 * (mo - bo) / bo,
            100.0 * (mt - fl_t) / fl_t
        ),
    )
}

fn sampling_and_weighting(cache: &mut Cache) -> Outcome {
    let cfg = ScenarioConfig::preset("sampling_weighting", SEED).unwrap();
    let rs = cache.run(&cfg, &["simple", "prob_sampling"]);
    let (s, p) = (&rs[0].last_evaluated(), &rs[1].last_evaluated());
    let (us, up) = (s.exposure.unique_words, p.exposure.unique_words);
    let (hs, hp) = (
        s.exposure.words_at_least(100),
        p.exposure.words_at_least(100),
    );
    let (ts, tp) = (s.targeted_wer.unwrap(), p.targeted_wer.unwrap());
    outcome(
        up as f64 >= 1.2 * us as f64 && hp > hs && tp <= ts,
        format!(
            "unique words {us} -> {up} ({:+.0}%), seen >= 100: {hs} -> {hp}, targeted {:.2}% -> {:.2}%",
            100.0 * (up as f64 / us as f64 - 1.0),
            100.0 * ts,
            100.0 * tp
        ),
    )
}

fn error_correction_by_exposure(cache: &mut Cache) -> Outcome {
    let cfg = ScenarioConfig::preset("mitigation_grid", SEED).unwrap();
    let r = cache.run(&cfg, &["pure_fl"]).remove(0);
    let mut hi: Vec<f64> = r
        .word_stats
        .values()
        .filter(|s| s.seen_count >= 100)
        .filter_map(|s| s.ec_percent)
        .collect();
    let mut lo: Vec<f64> = r
        .word_stats
        .values()
        .filter(|s| s.seen_count < 10)
        .filter_map(|s| s.ec_percent)
        .collect();
    let (nh, nl) = (hi.len(), lo.len());
    let (mh, ml) = (median(&mut hi), median(&mut lo));
    let show = |m: Option<f64>| {
        m.map(|v| format!("{:.1}%", 100.0 * v))
            .unwrap_or_else(|| "n/a".into())
    };
    outcome(
        matches!((mh, ml), (Some(h), Some(l)) if h > l),
        format!(
            "median EC {} over {nh} words seen >= 100, {} over {nl} words seen < 10",
            show(mh),
            show(ml)
        ),
    )
}

fn reproducibility() -> Outcome {
    let cfg = ScenarioConfig::preset("sim_finetune", SEED).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_scenario(&cfg, d.path()).unwrap();
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for v in &cfg.variants {
        for file in [
            "metrics.jsonl",
            "word_stats.jsonl",
            "training_log.jsonl",
            "final_checkpoint.json",
        ] {
            let rel = format!("{}/{file}", v.name);
            let a = std::fs::read(dirs[0].path().join(&rel)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&rel)).unwrap();
            compared += 1;
            if a != b {
                differing.push(rel);
            }
        }
    }
    outcome(
        differing.is_empty(),
        format!("{compared} files compared across two runs, differing: {differing:?}"),
    )
}

fn main() {
    let mut cache = Cache(HashMap::new());
    type Check<'a> = Box<dyn FnMut() -> Outcome + 'a>;
    let mut failures = 0;
    {
        let cache = std::cell::RefCell::new(&mut cache);
        let criteria: Vec<(&str, Check<'_>)> = vec![
            ("gradient correctness", Box::new(gradient_correctness)),
            ("oracle equivalence", Box::new(oracle_equivalence)),
            ("MWER properties", Box::new(mwer_properties)),
            (
                "loss weighting properties",
                Box::new(loss_weighting_properties),
            ),
            ("error correction identities", Box::new(ec_properties)),
            ("averaging algebra", Box::new(averaging_algebra)),
            (
                "filtering necessity",
                Box::new(|| filtering_necessity(&mut cache.borrow_mut())),
            ),
            (
                "forgetting and mitigation",
                Box::new(|| forgetting_and_mitigation(&mut cache.borrow_mut())),
            ),
            (
                "centralized mixture",
                Box::new(|| centralized_mixture(&mut cache.borrow_mut())),
            ),
            (
                "sampling and weighting",
                Box::new(|| sampling_and_weighting(&mut cache.borrow_mut())),
            ),
            (
                "error correction by exposure",
                Box::new(|| error_correction_by_exposure(&mut cache.borrow_mut())),
            ),
            ("reproducibility", Box::new(reproducibility)),
        ];
        for (i, (name, mut check)) in criteria.into_iter().enumerate() {
            let start = Instant::now();
            let o = check();
            failures += usize::from(!o.pass);
            println!(
                "{} criterion {:>2} {name}: {} ({:.1}s)",
                if o.pass { "PASS" } else { "FAIL" },
                i + 1,
                o.detail,
                start.elapsed().as_secs_f64()
            );
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
