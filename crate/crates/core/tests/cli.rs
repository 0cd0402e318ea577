use std::path::Path;
use std::process::{Command, Output};

use fedfresh::experiment::ScenarioConfig;

fn fedfresh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedfresh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// A scenario small enough to run end to end in a second or two.
fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ScenarioConfig::preset("sim_finetune", 5).unwrap();
    cfg.synth.vocab_size = 60;
    cfg.synth.fresh_count = 8;
    cfg.synth.dim = 4;
    cfg.synth.pretrain_utterances = 300;
    cfg.synth.overall_test_utterances = 80;
    cfg.synth.targeted_per_word = 3;
    cfg.synth.targeted_sampled = 0;
    cfg.synth.on_device_utterances = 400;
    cfg.synth.n_clients = 12;
    cfg.synth.names_count = 8;
    cfg.pretrain.epochs = 2;
    cfg.total_rounds = 2;
    for v in &mut cfg.variants {
        v.round.clients_per_round = 4;
    }
    let path = dir.join("tiny.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn full_pipeline_on_tiny_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    let o = fedfresh(&["gen-data", "--config", cfg, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(out).join("corpus.json").exists());

    let o = fedfresh(&["pretrain", "--config", cfg, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(out).join("theta0.json").exists());

    let o = fedfresh(&["run", "--config", cfg, "--out", out, "--rounds", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(Path::new(out).join("fl/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2, "round 0 plus one round");

    let o = fedfresh(&["eval", "--config", cfg, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(out).join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(
        rows.as_array().unwrap().len(),
        3,
        "theta0 plus two variant checkpoints"
    );

    let o = fedfresh(&["report", "--out", out]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fl_centralized_mix"));
    assert!(Path::new(out).join("summary.csv").exists());
}

#[test]
fn seed_flag_changes_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = fedfresh(&[
            "gen-data",
            "--config",
            cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        std::fs::read(out.join("corpus.json")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"version": 1, "bogus": 3}"#).unwrap();
    let bad = bad.to_str().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dir.path().to_str().unwrap();

    assert_eq!(
        code(&fedfresh(&["gen-data", "--config", bad, "--out", out])),
        2
    );
    assert_eq!(
        code(&fedfresh(&[
            "run",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&fedfresh(&[
            "run",
            "--preset",
            "no_such_preset",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&fedfresh(&[
            "run",
            "--preset",
            "sim_finetune",
            "--config",
            bad,
            "--out",
            out
        ])),
        2
    );
}

#[test]
fn missing_artifacts_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fedfresh(&["report", "--out", out]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("config.json"));
}

#[test]
fn usage_errors_are_rejected() {
    assert_ne!(code(&fedfresh(&["frobnicate"])), 0);
    assert_ne!(code(&fedfresh(&["run", "--seed", "not-a-number"])), 0);
}
