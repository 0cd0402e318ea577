//! Summary tables rendered from a finished run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::io::{read_jsonl, read_text, write_text};
use super::runner::WordStatRow;
use crate::engine::RoundRecord;
use crate::error::{Error, Result};
use crate::metrics::median;
use crate::mitigation::MitigationKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub policy: MitigationKind,
    pub alpha: f64,
    pub rounds: usize,
    pub baseline_overall_wer: f64,
    pub baseline_targeted_wer: f64,
    pub final_overall_wer: f64,
    pub final_targeted_wer: f64,
    pub unique_words: usize,
    pub words_seen_100: usize,
}

impl SummaryRow {
    pub fn overall_rel_change(&self) -> f64 {
        rel(self.baseline_overall_wer, self.final_overall_wer)
    }

    pub fn targeted_rel_change(&self) -> f64 {
        rel(self.baseline_targeted_wer, self.final_targeted_wer)
    }
}

fn rel(base: f64, value: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (value - base) / base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcBucketRow {
    pub variant: String,
    /// Inclusive lower seen-count bound.
    pub min_seen: u64,
    /// Exclusive upper bound, `None` when open.
    pub max_seen: Option<u64>,
    pub words: usize,
    /// Words whose EC% is defined (baseline made at least one error).
    pub defined: usize,
    pub median_ec: Option<f64>,
    pub mean_ec: Option<f64>,
    pub fully_corrected: usize,
}

impl EcBucketRow {
    pub fn label(&self) -> String {
        match self.max_seen {
            Some(m) if m == self.min_seen + 1 => format!("{}", self.min_seen),
            Some(m) => format!("{}-{}", self.min_seen, m - 1),
            None => format!(">={}", self.min_seen),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub ec_buckets: Vec<EcBucketRow>,
    pub text: String,
    /// Files written, relative to the run directory.
    pub files: Vec<PathBuf>,
}

pub const SUMMARY_CSV: &str = "summary.csv";
pub const EC_CSV: &str = "ec_buckets.csv";
pub const REPORT_TXT: &str = "report.txt";

pub fn summary_row(variant: &str, records: &[RoundRecord]) -> Option<SummaryRow> {
    let base = records.first()?;
    let last = records.iter().rev().find(|r| r.overall_wer.is_some())?;
    let end = records.last()?;
    Some(SummaryRow {
        variant: variant.to_string(),
        policy: base.policy,
        alpha: base.alpha,
        rounds: end.round,
        baseline_overall_wer: base.overall_wer?,
        baseline_targeted_wer: base.targeted_wer?,
        final_overall_wer: last.overall_wer?,
        final_targeted_wer: last.targeted_wer?,
        unique_words: end.exposure.unique_words,
        words_seen_100: end.exposure.words_at_least(100),
    })
}

pub fn ec_buckets(variant: &str, rows: &[WordStatRow], edges: &[u64]) -> Vec<EcBucketRow> {
    let mut bounds: Vec<u64> = vec![0];
    bounds.extend(edges.iter().copied().filter(|&e| e > 0));
    bounds.sort_unstable();
    bounds.dedup();
    bounds
        .iter()
        .enumerate()
        .map(|(i, &min)| {
            let max = bounds.get(i + 1).copied();
            let in_bucket: Vec<&WordStatRow> = rows
                .iter()
                .filter(|r| r.seen_count >= min && max.is_none_or(|m| r.seen_count < m))
                .collect();
            let mut ecs: Vec<f64> = in_bucket.iter().filter_map(|r| r.ec_percent).collect();
            let defined = ecs.len();
            let fully_corrected = ecs.iter().filter(|&&e| e >= 1.0).count();
            let mean_ec = (defined > 0).then(|| ecs.iter().sum::<f64>() / defined as f64);
            EcBucketRow {
                variant: variant.to_string(),
                min_seen: min,
                max_seen: max,
                words: in_bucket.len(),
                defined,
                median_ec: median(&mut ecs),
                mean_ec,
                fully_corrected,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Reads `config.json`, each variant's `metrics.jsonl` and `word_stats.jsonl`,
/// and writes `summary.csv`, `ec_buckets.csv` and `report.txt`.
pub fn emit_report(run_dir: &Path) -> Result<Report> {
    let config_path = run_dir.join("config.json");
    if !config_path.exists() {
        return Err(Error::MissingArtifacts(vec![config_path]));
    }
    let cfg = ScenarioConfig::from_json(&read_text(&config_path)?)?;
    let missing: Vec<PathBuf> = cfg
        .variants
        .iter()
        .flat_map(|v| {
            ["metrics.jsonl", "word_stats.jsonl"]
                .into_iter()
                .map(move |f| run_dir.join(&v.name).join(f))
        })
        .filter(|p| !p.exists())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }

    let mut summary = Vec::new();
    let mut ec_rows = Vec::new();
    for v in &cfg.variants {
        let records: Vec<RoundRecord> = read_jsonl(&run_dir.join(&v.name).join("metrics.jsonl"))?;
        let words: Vec<WordStatRow> = read_jsonl(&run_dir.join(&v.name).join("word_stats.jsonl"))?;
        let row = summary_row(&v.name, &records).ok_or_else(|| {
            Error::InvalidInput(format!("metrics for '{}' have no evaluated round", v.name))
        })?;
        summary.push(row);
        ec_rows.extend(ec_buckets(&v.name, &words, &cfg.metrics.bucket_edges));
    }

    let mut csv = String::from(
        "variant,policy,alpha,rounds,baseline_overall_wer,baseline_targeted_wer,final_overall_wer,final_targeted_wer,overall_rel_change,targeted_rel_change,unique_words,words_seen_100\n",
    );
    for r in &summary {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.variant,
            serde_json::to_value(r.policy)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            r.alpha,
            r.rounds,
            r.baseline_overall_wer,
            r.baseline_targeted_wer,
            r.final_overall_wer,
            r.final_targeted_wer,
            r.overall_rel_change(),
            r.targeted_rel_change(),
            r.unique_words,
            r.words_seen_100
        );
    }
    let mut ec_csv =
        String::from("variant,seen_bucket,words,defined,median_ec,mean_ec,fully_corrected\n");
    for r in &ec_rows {
        let _ = writeln!(
            ec_csv,
            "{},{},{},{},{},{},{}",
            r.variant,
            r.label(),
            r.words,
            r.defined,
            opt(r.median_ec),
            opt(r.mean_ec),
            r.fully_corrected
        );
    }

    let mut text = format!("scenario: {}  seed: {}\n\n", cfg.name, cfg.seed);
    let _ = writeln!(
        text,
        "{:<24} {:>7} {:>12} {:>12} {:>12} {:>12} {:>7} {:>7}",
        "variant",
        "rounds",
        "base overall",
        "overall",
        "base target",
        "targeted",
        "unique",
        ">=100"
    );
    for r in &summary {
        let _ = writeln!(
            text,
            "{:<24} {:>7} {:>11.2}% {:>11.2}% {:>11.2}% {:>11.2}% {:>7} {:>7}",
            r.variant,
            r.rounds,
            100.0 * r.baseline_overall_wer,
            100.0 * r.final_overall_wer,
            100.0 * r.baseline_targeted_wer,
            100.0 * r.final_targeted_wer,
            r.unique_words,
            r.words_seen_100
        );
    }
    let _ = writeln!(text, "\nerror correction by seen count");
    for r in &ec_rows {
        let _ = writeln!(
            text,
            "{:<24} seen {:>9}: {:>3} words, median EC {:>8}, fully corrected {}",
            r.variant,
            r.label(),
            r.words,
            r.median_ec
                .map(|m| format!("{:.1}%", 100.0 * m))
                .unwrap_or_else(|| "n/a".into()),
            r.fully_corrected
        );
    }

    write_text(&run_dir.join(SUMMARY_CSV), &csv)?;
    write_text(&run_dir.join(EC_CSV), &ec_csv)?;
    write_text(&run_dir.join(REPORT_TXT), &text)?;
    Ok(Report {
        summary,
        ec_buckets: ec_rows,
        text,
        files: vec![SUMMARY_CSV.into(), EC_CSV.into(), REPORT_TXT.into()],
    })
}
