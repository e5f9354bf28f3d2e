//! CSV and JSON persistence of experiment results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Mode};
use crate::experiment::rates::RateFit;
use crate::experiment::runner::{ModeSummary, PairedRow, Row, TrialResult};

pub const TRIAL_COLUMNS: [&str; 10] = [
    "trial",
    "seed",
    "t",
    "gamma_t",
    "error_rho",
    "error_rho_stderr",
    "norm_K",
    "lemma1_bound",
    "thm1_bound",
    "mode",
];

pub const PAIRED_COLUMNS: [&str; 8] = [
    "seed",
    "t",
    "opera_error",
    "pogd_error",
    "opera_norm_K",
    "pogd_norm_K",
    "opera_averaged_error",
    "pogd_averaged_error",
];

pub const TRIALS_FILE: &str = "trials.csv";
pub const PAIRED_FILE: &str = "paired.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trials_csv(results: &[TrialResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRIAL_COLUMNS)?;
    for r in results {
        for row in &r.rows {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                row.t.to_string(),
                row.gamma_t.to_string(),
                row.error_rho.to_string(),
                opt(row.error_rho_stderr),
                row.norm_k.to_string(),
                row.lemma1_bound.to_string(),
                opt(row.thm1_bound),
                r.mode.name().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_paired_csv(rows: &[PairedRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PAIRED_COLUMNS)?;
    for p in rows {
        w.write_record([
            p.seed.to_string(),
            p.t.to_string(),
            p.opera_error.to_string(),
            p.pogd_error.to_string(),
            p.opera_norm_k.to_string(),
            p.pogd_norm_k.to_string(),
            opt(p.opera_averaged_error),
            opt(p.pogd_averaged_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// What a CSV file in a results directory holds.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvKind {
    Trials(Vec<TrialResult>),
    Paired,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse::<T>().ok())
        .ok_or_else(|| Error::parse(TRIAL_COLUMNS[i], format!("bad value on line {line}")))
}

fn opt_field(rec: &csv::StringRecord, i: usize, line: u64) -> Result<Option<f64>> {
    match rec.get(i) {
        Some("") => Ok(None),
        Some(_) => field(rec, i, line).map(Some),
        None => Err(Error::parse(TRIAL_COLUMNS[i], format!("missing value on line {line}"))),
    }
}

/// Reads a trials CSV (or recognizes a paired CSV).
pub fn read_csv(path: &Path) -> Result<CsvKind> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header == PAIRED_COLUMNS {
        return Ok(CsvKind::Paired);
    }
    if header != TRIAL_COLUMNS {
        return Err(Error::parse("header", format!("unexpected columns {header:?}")));
    }
    let mut by_key: BTreeMap<(Mode, usize), TrialResult> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let mode = Mode::parse(rec.get(9).unwrap_or(""))?;
        let trial: usize = field(&rec, 0, line)?;
        let seed: u64 = field(&rec, 1, line)?;
        let row = Row {
            t: field(&rec, 2, line)?,
            gamma_t: field(&rec, 3, line)?,
            error_rho: field(&rec, 4, line)?,
            error_rho_stderr: opt_field(&rec, 5, line)?,
            norm_k: field(&rec, 6, line)?,
            lemma1_bound: field(&rec, 7, line)?,
            thm1_bound: opt_field(&rec, 8, line)?,
            averaged_error: None,
        };
        let entry = by_key.entry((mode, trial)).or_insert_with(|| TrialResult {
            trial,
            seed,
            mode,
            rows: Vec::new(),
        });
        if entry.seed != seed {
            return Err(Error::parse(
                "seed",
                format!("trial {trial} has two seeds (line {line})"),
            ));
        }
        entry.rows.push(row);
    }
    let mut out: Vec<TrialResult> = by_key.into_values().collect();
    for r in &mut out {
        r.rows.sort_by_key(|row| row.t);
    }
    Ok(CsvKind::Trials(out))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigDigest {
    pub sha256: String,
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config_digest: ConfigDigest,
    /// Medians of the first configured mode.
    pub medians_by_t: BTreeMap<usize, f64>,
    pub rate_fit: Option<RateFit>,
    pub bound_violation_fraction: Option<f64>,
    pub modes: BTreeMap<String, ModeSummary>,
}

pub fn build_summary(cfg: &ExperimentConfig, summaries: &BTreeMap<Mode, ModeSummary>) -> Summary {
    let primary = summaries.get(&cfg.modes[0]);
    Summary {
        config_digest: ConfigDigest {
            sha256: cfg.digest(),
            entries: cfg.entries.clone(),
        },
        medians_by_t: primary.map(|s| s.medians_by_t.clone()).unwrap_or_default(),
        rate_fit: primary.and_then(|s| s.rate_fit.clone()),
        bound_violation_fraction: primary.and_then(|s| s.bound_violation_fraction),
        modes: summaries
            .iter()
            .map(|(m, s)| (m.name().to_string(), s.clone()))
            .collect(),
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct Outputs {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub paired: Option<PathBuf>,
}

/// Writes `trials.csv`, `summary.json` and, when given, `paired.csv` into the
/// configured output directory.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    results: &[TrialResult],
    summaries: &BTreeMap<Mode, ModeSummary>,
    paired: Option<&[PairedRow]>,
) -> Result<Outputs> {
    std::fs::create_dir_all(&cfg.output)?;
    let trials = cfg.output.join(TRIALS_FILE);
    write_trials_csv(results, &trials)?;
    let summary = cfg.output.join(SUMMARY_FILE);
    write_json(&build_summary(cfg, summaries), &summary)?;
    let paired = match paired {
        Some(rows) => {
            let p = cfg.output.join(PAIRED_FILE);
            write_paired_csv(rows, &p)?;
            Some(p)
        }
        None => None,
    };
    Ok(Outputs {
        trials,
        summary,
        paired,
    })
}
