//! Scenario configuration and the named experiment presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{CentralizedMix, FilterMode, RoundConfig};
use crate::error::{invalid_config, Error, Result};
use crate::mitigation::{MitigationKind, MitigationPolicy};
use crate::synth::{SynthConfig, WordlistMode};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            lr: 3.0,
            batch_size: 32,
        }
    }
}

/// Which held-out set measures the wordlist words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSet {
    Fresh,
    Names,
}

/// One federated trajectory within a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub round: RoundConfig,
    #[serde(default)]
    pub policy: MitigationPolicy,
    #[serde(default = "fresh_wordlist")]
    pub wordlist: WordlistMode,
    #[serde(default = "fresh_target")]
    pub targeted: TargetSet,
}

fn fresh_wordlist() -> WordlistMode {
    WordlistMode::Fresh
}

fn fresh_target() -> TargetSet {
    TargetSet::Fresh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub bucket_edges: Vec<u64>,
    /// Seen-count threshold for the "well exposed" EC% group.
    pub ec_high: u64,
    /// Seen-count bound for the "rarely exposed" EC% group.
    pub ec_low: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            bucket_edges: crate::metrics::DEFAULT_BUCKET_EDGES.to_vec(),
            ec_high: 100,
            ec_low: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    pub variants: Vec<Variant>,
    pub total_rounds: usize,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

pub const PRESETS: [&str; 6] = [
    "sim_finetune",
    "filtering_ablation",
    "mitigation_grid",
    "centralized_mix",
    "sampling_weighting",
    "names_swap",
];

/// Round settings shared by every preset.
pub fn default_round(seed: u64) -> RoundConfig {
    RoundConfig {
        seed,
        ..RoundConfig::default()
    }
}

fn variant(name: &str, round: RoundConfig, policy: MitigationPolicy) -> Variant {
    Variant {
        name: name.to_string(),
        round,
        policy,
        wordlist: WordlistMode::Fresh,
        targeted: TargetSet::Fresh,
    }
}

pub const STATIC_ALPHAS: [f64; 10] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.5, 0.75, 1.0];

/// Default centralized mixture: server pseudo-clients alongside the federated ones.
pub fn default_mix() -> CentralizedMix {
    CentralizedMix::On {
        pseudo_clients: 4,
        batches_per_round: 6,
    }
}

impl ScenarioConfig {
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let base = default_round(seed);
        let none = MitigationPolicy::none();
        let mut synth = SynthConfig::default();
        let variants = match name {
            "sim_finetune" => vec![
                variant("fl", base.clone(), none),
                variant(
                    "fl_centralized_mix",
                    RoundConfig {
                        centralized_mix: default_mix(),
                        ..base.clone()
                    },
                    MitigationPolicy::new(MitigationKind::CentralizedMix, 0.0)?,
                ),
            ],
            "filtering_ablation" => {
                synth.q_correct = 0.5;
                synth.q_revise = 0.5;
                vec![
                    variant(
                        "edits_only",
                        RoundConfig {
                            filter_mode: FilterMode::EditsOnly,
                            ..base.clone()
                        },
                        none,
                    ),
                    variant("wordlist_and_edit", base.clone(), none),
                ]
            }
            "mitigation_grid" => {
                let mut v = vec![variant("pure_fl", base.clone(), none)];
                for a in STATIC_ALPHAS {
                    v.push(variant(
                        &format!("static_{a:.2}"),
                        base.clone(),
                        MitigationPolicy::new(MitigationKind::StaticAvg, a)?,
                    ));
                }
                for a in [0.1, 0.25, 0.5] {
                    v.push(variant(
                        &format!("dynamic_{a:.2}"),
                        base.clone(),
                        MitigationPolicy::new(MitigationKind::DynamicAvg, a)?,
                    ));
                }
                v
            }
            "centralized_mix" => vec![
                variant("fl_only", base.clone(), none),
                variant(
                    "fl_centralized_mix",
                    RoundConfig {
                        centralized_mix: default_mix(),
                        ..base.clone()
                    },
                    MitigationPolicy::new(MitigationKind::CentralizedMix, 0.0)?,
                ),
            ],
            "sampling_weighting" => {
                // A larger on-device pool, fewer clients per round and a
                // per-word targeted set: the regime where exposure is scarce.
                synth.on_device_utterances = 128_000;
                synth.targeted_per_word = 20;
                synth.targeted_sampled = 0;
                let base = RoundConfig {
                    clients_per_round: 4,
                    ..base.clone()
                };
                vec![
                    variant("simple", base.clone(), none),
                    variant(
                        "loss_weighting",
                        RoundConfig {
                            use_loss_weighting: true,
                            ..base.clone()
                        },
                        none,
                    ),
                    variant(
                        "prob_sampling",
                        RoundConfig {
                            use_prob_sampling: true,
                            ..base.clone()
                        },
                        none,
                    ),
                    variant(
                        "prob_sampling_static",
                        RoundConfig {
                            use_prob_sampling: true,
                            ..base.clone()
                        },
                        MitigationPolicy::new(MitigationKind::StaticAvg, 0.5)?,
                    ),
                ]
            }
            "names_swap" => vec![
                Variant {
                    targeted: TargetSet::Names,
                    ..variant("fresh_filter", base.clone(), none)
                },
                Variant {
                    wordlist: WordlistMode::NamesAnalog,
                    targeted: TargetSet::Names,
                    ..variant("names_filter", base.clone(), none)
                },
            ],
            other => {
                return Err(invalid_config(format!(
                    "unknown preset '{other}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            version: CONFIG_VERSION,
            name: name.to_string(),
            seed,
            synth,
            pretrain: PretrainConfig::default(),
            metrics: MetricsConfig::default(),
            variants,
            total_rounds: 30,
            eval_every: 1,
            output_dir: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| invalid_config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical JSON rendering.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Reseeds the data generator and every variant's round stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        for v in &mut self.variants {
            v.round.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(invalid_config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        self.synth.validate()?;
        if self.pretrain.batch_size == 0 || !(self.pretrain.lr > 0.0) {
            return Err(invalid_config(
                "pretrain batch_size and lr must be positive",
            ));
        }
        if self.eval_every == 0 {
            return Err(invalid_config("eval_every must be at least 1"));
        }
        if self.variants.is_empty() {
            return Err(invalid_config("scenario needs at least one variant"));
        }
        let mut names = std::collections::BTreeSet::new();
        for v in &self.variants {
            if v.name.is_empty() || v.name.contains(['/', '\\']) || v.name.starts_with('.') {
                return Err(invalid_config(format!("invalid variant name '{}'", v.name)));
            }
            if !names.insert(v.name.as_str()) {
                return Err(invalid_config(format!(
                    "duplicate variant name '{}'",
                    v.name
                )));
            }
            v.round.validate()?;
            v.policy.validate()?;
            if v.policy.kind == MitigationKind::CentralizedMix
                && v.round.centralized_mix == CentralizedMix::Off
            {
                return Err(invalid_config(format!(
                    "variant '{}' uses the centralized_mix policy without a centralized_mix round setting",
                    v.name
                )));
            }
        }
        Ok(())
    }
}
