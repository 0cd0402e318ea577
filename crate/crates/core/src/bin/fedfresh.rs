use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use fedfresh::experiment::io::{
    read_checkpoint, read_corpus, write_checkpoint, write_corpus, write_text,
};
use fedfresh::experiment::runner::{evaluate_checkpoint, EvalSummary};
use fedfresh::experiment::{emit_report, prepare, run_scenario, ScenarioConfig};
use fedfresh::synth::gen_corpus;
use fedfresh::Error;

const DEFAULT_PRESET: &str = "sim_finetune";
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "fedfresh",
    version,
    about = "Federated fine-tuning simulator for fresh and long-tail words"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus (no clients yet).
    GenData(Common),
    /// Pretrain the baseline and attach client shards to the corpus.
    Pretrain(Common),
    /// Run every variant of a scenario and write metrics and reports.
    Run(Common),
    /// Evaluate checkpoints on the held-out test sets.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate; defaults to every checkpoint under --out.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
    },
    /// Render summary tables from a finished run directory.
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset, used when no config file is given.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of federated rounds.
    #[arg(long)]
    rounds: Option<usize>,
}

impl Common {
    fn scenario(&self) -> fedfresh::Result<ScenarioConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "--config and --preset are mutually exclusive".into(),
                ));
            }
            (Some(path), None) => ScenarioConfig::load(path).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::InvalidConfig(format!("cannot read {}: {source}", path.display()))
                }
                other => other,
            })?,
            (None, preset) => ScenarioConfig::preset(
                preset.as_deref().unwrap_or(DEFAULT_PRESET),
                self.seed.unwrap_or(DEFAULT_SEED),
            )?,
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(r) = self.rounds {
            cfg.total_rounds = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
    }
}

#[derive(Serialize)]
struct EvalRow {
    checkpoint: String,
    #[serde(flatten)]
    summary: EvalSummary,
}

fn checkpoints_under(out: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let theta0 = out.join("theta0.json");
    if theta0.exists() {
        found.push(theta0);
    }
    if let Ok(entries) = std::fs::read_dir(out) {
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        found.extend(
            dirs.into_iter()
                .map(|d| d.join("final_checkpoint.json"))
                .filter(|p| p.exists()),
        );
    }
    found
}

fn execute(cli: Cli) -> fedfresh::Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = c.scenario()?;
            let out = c.out_dir(&cfg);
            let bundle = gen_corpus(&cfg.synth, cfg.seed)?;
            write_text(&out.join("config.json"), &cfg.to_json())?;
            write_corpus(&out.join("corpus.json"), &bundle)?;
            println!(
                "wrote {} ({} words, {} pretrain, {} on-device utterances)",
                out.join("corpus.json").display(),
                bundle.vocab.len(),
                bundle.pretrain_set.len(),
                bundle.on_device.len()
            );
        }
        Command::Pretrain(c) => {
            let cfg = c.scenario()?;
            let out = c.out_dir(&cfg);
            let prepared = prepare(&cfg)?;
            write_text(&out.join("config.json"), &cfg.to_json())?;
            write_corpus(&out.join("corpus.json"), &prepared.bundle)?;
            write_checkpoint(&out.join("theta0.json"), &prepared.theta_0)?;
            let eval = evaluate_checkpoint(&prepared.bundle, &prepared.theta_0)?;
            println!(
                "baseline overall WER {:.4}, targeted WER {:.4}; wrote {}",
                eval.overall_wer,
                eval.targeted_wer,
                out.join("theta0.json").display()
            );
        }
        Command::Run(c) => {
            let cfg = c.scenario()?;
            let out = c.out_dir(&cfg);
            info!("running scenario {} into {}", cfg.name, out.display());
            run_scenario(&cfg, &out)?;
            print!("{}", emit_report(&out)?.text);
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.scenario()?;
            let out = common.out_dir(&cfg);
            let corpus_path = out.join("corpus.json");
            let bundle = if corpus_path.exists() {
                read_corpus(&corpus_path)?
            } else {
                gen_corpus(&cfg.synth, cfg.seed)?
            };
            let targets = if checkpoint.is_empty() {
                checkpoints_under(&out)
            } else {
                checkpoint
            };
            if targets.is_empty() {
                return Err(Error::MissingArtifacts(vec![out.join("theta0.json")]));
            }
            let mut rows = Vec::new();
            for path in targets {
                let params = read_checkpoint(&path)?;
                let row = EvalRow {
                    checkpoint: path.display().to_string(),
                    summary: evaluate_checkpoint(&bundle, &params)?,
                };
                println!("{}", serde_json::to_string(&row)?);
                rows.push(row);
            }
            write_text(
                &out.join("eval.json"),
                &serde_json::to_string_pretty(&rows)?,
            )?;
        }
        Command::Report(c) => {
            let out = match (&c.out, &c.config, &c.preset) {
                (Some(out), _, _) => out.clone(),
                _ => {
                    let cfg = c.scenario()?;
                    c.out_dir(&cfg)
                }
            };
            print!("{}", emit_report(&out)?.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
