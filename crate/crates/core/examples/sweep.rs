//! Quick trend checks for the scenario presets under parameter overrides.
//!
//! Every knob is an environment variable (`LR`, `CPR`, `GAMMA`, `NOISE`,
//! `ONDEV`, `SEXP`, `SEED`, ...); `CRIT=7,8,9,10,11` picks the checks.
//! `cargo run --release --example sweep`
use fedfresh::experiment::{prepare, run_variant, RunOptions, ScenarioConfig, VariantResult};
use fedfresh::metrics::{corpus_wer, median};
use fedfresh::mitigation::average_checkpoints;

fn env(k: &str) -> Option<f64> {
    std::env::var(k).ok().map(|v| v.parse::<f64>().unwrap())
}

fn tune(mut cfg: ScenarioConfig) -> ScenarioConfig {
    if let Some(v) = env("PEPOCHS") {
        cfg.pretrain.epochs = v as usize;
    }
    if let Some(v) = env("PLR") {
        cfg.pretrain.lr = v;
    }
    if let Some(v) = env("NOISE") {
        cfg.synth.noise_sigma = v;
    }
    if let Some(v) = env("GAMMA") {
        cfg.synth.confuse_gamma = v;
    }
    if let Some(v) = env("FMASS") {
        cfg.synth.fresh_mass = v;
    }
    if let Some(v) = env("FZIPF") {
        cfg.synth.fresh_zipf_s = v;
    }
    if let Some(v) = env("TPW") {
        cfg.synth.targeted_per_word = v as usize;
    }
    if let Some(v) = env("TSAMP") {
        cfg.synth.targeted_sampled = v as usize;
    }
    if let Some(v) = env("LOC") {
        cfg.synth.client_locality = v;
    }
    if let Some(v) = env("SKEW") {
        cfg.synth.client_skew = v;
    }
    if let Some(v) = env("SEXP") {
        cfg.synth.sampling_exponent = v;
    }
    if let Some(v) = env("SFLOOR") {
        cfg.synth.sampling_floor = v;
    }
    if let Some(v) = env("ONDEV") {
        cfg.synth.on_device_utterances = v as usize;
    }
    if let Some(v) = env("QR") {
        if cfg.name != "filtering_ablation" {
            cfg.synth.q_revise = v;
        }
    }
        for var in &mut cfg.variants {
        if let Some(v) = env("LR") {
            var.round.local_lr = v;
        }
        if let Some(v) = env("CPR") {
            var.round.clients_per_round = v as usize;
        }
        if let Some(v) = env("EPOCHS") {
            var.round.local_epochs = v as usize;
        }
        if let Some(v) = env("BATCH") {
            var.round.batch_size = v as usize;
        }
        if let fedfresh::engine::CentralizedMix::On {
            pseudo_clients,
            batches_per_round,
        } = &mut var.round.centralized_mix
        {
            if let Some(v) = env("MIXP") {
                *pseudo_clients = v as usize;
            }
            if let Some(v) = env("MIXB") {
                *batches_per_round = v as usize;
            }
        }
    }
    cfg
}

fn run(cfg: &ScenarioConfig, names: &[&str]) -> Vec<VariantResult> {
    let p = prepare(cfg).unwrap();
    let opts = RunOptions {
        total_rounds: cfg.total_rounds,
        eval_every: cfg.total_rounds,
        metrics: &cfg.metrics,
        names_count: cfg.synth.names_count,
        keep_trajectory: false,
    };
    let mut out: Vec<VariantResult> = names
        .iter()
        .map(|n| {
            run_variant(
                &p,
                cfg.variants.iter().find(|v| v.name == *n).unwrap(),
                &opts,
            )
            .unwrap()
        })
        .collect();
    if names.contains(&"pure_fl") {
        let r = &out[0];
        let b = r.baseline();
        let (bo, bt) = (b.overall_wer.unwrap(), b.targeted_wer.unwrap());
        let l = r.last_evaluated();
        let (fo, ft) = (l.overall_wer.unwrap(), l.targeted_wer.unwrap());
        let gain = bt - ft;
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 1..20 {
            let a = i as f64 * 0.05;
            let th = average_checkpoints(&p.theta_0, &r.final_trained, a).unwrap();
            let o = corpus_wer(&th, &p.bundle.overall_test, 1).unwrap();
            let t = corpus_wer(&th, &p.bundle.targeted_test, 1).unwrap();
            if o <= 1.01 * bo && best.is_none_or(|bb| t < bb.2) {
                best = Some((a, o, t));
            }
        }
        let keep = best.map(|b| (bt - b.2) / gain).unwrap_or(f64::NAN);
        let c8 = (bt - ft) / bt >= 0.15 && (fo - bo) / bo >= 0.02 && keep >= 0.5;
        println!("C8 {} base o={bo:.4} t={bt:.4} fl o={fo:.4} t={ft:.4} tgain={:.3} odeg={:.3} best={best:?} keep={keep:.2}", ok(c8), (bt - ft) / bt, (fo - bo) / bo);
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
        let (mh, ml) = (median(&mut hi), median(&mut lo));
        let c11 = matches!((mh, ml), (Some(h), Some(l)) if h > l);
        println!(
            "C11 {} hi n={} med={mh:?} lo n={} med={ml:?}",
            ok(c11),
            hi.len(),
            lo.len()
        );
    }
    out.truncate(names.len());
    out
}

fn ok(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "fail"
    }
}

fn fin(r: &VariantResult) -> (f64, f64) {
    let l = r.last_evaluated();
    (l.overall_wer.unwrap(), l.targeted_wer.unwrap())
}

fn main() {
    let which = std::env::var("CRIT").unwrap_or("7,8,9,10,11".into());
    let seed = 42;
    let seed = env("SEED").map_or(seed, |s| s as u64);
    if which.contains('8') || which.contains("11") {
        let cfg = tune(ScenarioConfig::preset("mitigation_grid", seed).unwrap());
        run(&cfg, &["pure_fl"]);
    }
    if which.contains('9') {
        let cfg = tune(ScenarioConfig::preset("centralized_mix", seed).unwrap());
        let rs = run(&cfg, &["fl_only", "fl_centralized_mix"]);
        let bo = rs[0].baseline().overall_wer.unwrap();
        let (_, ft) = fin(&rs[0]);
        let (mo, mt) = fin(&rs[1]);
        let c9 = mo <= 1.01 * bo && mt <= 1.02 * ft;
        println!("C9 {} mix o={mo:.4} ({:+.3}) t={mt:.4} ({:+.3} vs fl)", ok(c9), (mo - bo) / bo, (mt - ft) / ft);
    }
    if which.contains("10") {
        let cfg = tune(ScenarioConfig::preset("sampling_weighting", seed).unwrap());
        let rs = run(&cfg, &["simple", "prob_sampling"]);
        let (fo, ft) = fin(&rs[0]);
        let (po, pt) = fin(&rs[1]);
        let (us, up) = (rs[0].last_evaluated().exposure.unique_words, rs[1].last_evaluated().exposure.unique_words);
        let (hs, hp) = (rs[0].last_evaluated().exposure.words_at_least(100), rs[1].last_evaluated().exposure.words_at_least(100));
        let c10 = up as f64 >= 1.2 * us as f64 && hp > hs && pt <= ft;
        println!("C10 {} uniq {us}->{up} >=100 {hs}->{hp} t {ft:.4}->{pt:.4} o {fo:.4}->{po:.4}", ok(c10));
    }
    if which.contains('7') {
        let cfg = tune(ScenarioConfig::preset("filtering_ablation", seed).unwrap());
        let rs = run(&cfg, &["edits_only", "wordlist_and_edit"]);
        let b = rs[0].baseline().overall_wer.unwrap();
        let (eo, _) = fin(&rs[0]);
        let (wo, _) = fin(&rs[1]);
        let c7 = eo >= 1.2 * wo && eo > b;
        println!(
            "C7 {} base o={b:.4} edits_only o={eo:.4} wle o={wo:.4} ratio={:.2}",
            ok(c7),
            eo / wo
        );
    }
}
