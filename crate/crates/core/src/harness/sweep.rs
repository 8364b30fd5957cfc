//! Runs a preset over several seeds and aggregates the results.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::trainer::{self, timing_report, RunLog};

use super::config::ExperimentConfig;
use super::data::load_dataset;
use super::presets::{Method, Preset, SweepEntry};
use super::report::{self, write_atomic};

pub const THREADS_ENV: &str = "SPECCLIP_THREADS";

/// One `(configuration, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub label: String,
    pub method: Method,
    pub setting: String,
    pub seed: u64,
    pub epsilon: f64,
    pub final_accuracy: f64,
    pub final_test_loss: f64,
    pub median_c: f64,
    pub final_c: f64,
    pub mean_c: f64,
    pub clamp_hits_min: usize,
    pub clamp_hits_max: usize,
    pub train_secs: f64,
    pub total_secs: f64,
    pub probe_share_pct: f64,
}

/// Mean (and sample standard deviation) over the seeds of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub method: Method,
    pub setting: String,
    pub runs: usize,
    pub epsilon: f64,
    pub accuracy_mean: f64,
    /// `None` with a single run.
    pub accuracy_std: Option<f64>,
    pub median_c_mean: f64,
    pub final_c_mean: f64,
    pub mean_c_mean: f64,
    pub clamp_hits_min_mean: f64,
    pub clamp_hits_max_mean: f64,
    pub total_secs_mean: f64,
    pub probe_share_pct_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub preset: Preset,
    pub privacy: PrivacyParams,
    /// Entry-major, seeds in order.
    pub runs: Vec<RunRow>,
    /// Aligned with `runs`.
    pub logs: Vec<RunLog>,
    pub summary: Vec<SummaryRow>,
}

/// Fails unless every entry resolves to the same `(q, σ, T, δ)`.
pub fn check_matched_privacy(entries: &[SweepEntry]) -> Result<PrivacyParams> {
    let mut resolved = entries
        .iter()
        .map(|e| -> Result<_> { Ok((e, e.config.train_config()?.privacy)) });
    let (first_entry, first) = resolved
        .next()
        .ok_or_else(|| Error::Config("sweep has no entries".into()))??;
    for r in resolved {
        let (e, p) = r?;
        if p != first {
            return Err(Error::Config(format!(
                "matched-privacy violation: `{}` has {p:?} but `{}` has {first:?}",
                e.label, first_entry.label
            )));
        }
    }
    Ok(first)
}

/// Worker count from `SPECCLIP_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Trains one configuration; the run seed replaces the configured base seed
/// and is added to the label-skew seed.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    let mut cfg = config.with_seed(seed);
    if let Some(skew) = cfg.dataset.skew.as_mut() {
        skew.seed = skew.seed.wrapping_add(seed);
    }
    run_config(&cfg)
}

/// Trains `cfg` exactly as written.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunLog> {
    let train_cfg = cfg.train_config()?;
    let (train, test) = load_dataset(&cfg.dataset, train_cfg.seeds.data)?;
    if train.dim() != train_cfg.model.input_dim() {
        return Err(Error::Config(format!(
            "dataset has {} features, model expects {}",
            train.dim(),
            train_cfg.model.input_dim()
        )));
    }
    Ok(trainer::train(&train_cfg, &train, &test)?.log)
}

/// Runs every entry for seeds `base_seed..base_seed+repeats`. With `out`,
/// each run's log goes to `<out>/<preset>/<label>_s<seed>.csv` and the tables
/// to `<out>/<preset>_runs.csv`, `<out>/<preset>_summary.csv` and
/// `<out>/<preset>_summary.json`.
pub fn run_sweep(preset: &Preset, repeats: usize, base_seed: u64, out: Option<&Path>) -> Result<SweepOutcome> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let privacy = check_matched_privacy(&preset.entries)?;

    // seed-major so that sequential timing runs interleave methods
    let jobs: Vec<(usize, u64)> = (0..repeats as u64)
        .flat_map(|s| (0..preset.entries.len()).map(move |e| (e, base_seed + s)))
        .collect();
    let run_job = |&(e, seed): &(usize, u64)| -> Result<RunLog> {
        let entry = &preset.entries[e];
        log::info!("{}: {} seed {seed}", preset.name, entry.label);
        let log = run_single(&entry.config, seed)?;
        if let Some(dir) = out {
            let dir = dir.join(preset.name.as_str());
            report::write_run(&dir, &format!("{}_s{seed}", entry.label), &log)?;
        }
        Ok(log)
    };
    let results: Vec<Result<RunLog>> = if preset.sequential {
        jobs.iter().map(run_job).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = thread_cap() {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_job).collect())
    };

    let mut by_job: Vec<Option<RunLog>> = Vec::with_capacity(jobs.len());
    for r in results {
        by_job.push(Some(r?));
    }
    let mut runs = Vec::with_capacity(jobs.len());
    let mut logs = Vec::with_capacity(jobs.len());
    for (e, entry) in preset.entries.iter().enumerate() {
        for (j, &(je, seed)) in jobs.iter().enumerate() {
            if je != e {
                continue;
            }
            let log = by_job[j].take().expect("each job consumed once");
            runs.push(run_row(entry, seed, &log));
            logs.push(log);
        }
    }
    let summary = summarize(&preset.entries, &runs);

    let outcome = SweepOutcome {
        preset: preset.clone(),
        privacy,
        runs,
        logs,
        summary,
    };
    if let Some(dir) = out {
        write_tables(dir, &outcome)?;
    }
    Ok(outcome)
}

fn run_row(entry: &SweepEntry, seed: u64, log: &RunLog) -> RunRow {
    let timing = timing_report(log, None);
    RunRow {
        label: entry.label.clone(),
        method: entry.method,
        setting: entry.setting.clone(),
        seed,
        epsilon: log.epsilon,
        final_accuracy: log.final_accuracy,
        final_test_loss: log.final_test_loss,
        median_c: log.median_clip(),
        final_c: log.final_c,
        mean_c: log.mean_clip(),
        clamp_hits_min: log.clamp_hits_min,
        clamp_hits_max: log.clamp_hits_max,
        train_secs: timing.train,
        total_secs: timing.total,
        probe_share_pct: timing.probe_share_pct,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; `None` below two values.
pub fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

pub fn summarize(entries: &[SweepEntry], runs: &[RunRow]) -> Vec<SummaryRow> {
    entries
        .iter()
        .map(|e| {
            let rows: Vec<&RunRow> = runs.iter().filter(|r| r.label == e.label).collect();
            let col = |f: fn(&RunRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let acc = col(|r| r.final_accuracy);
            SummaryRow {
                label: e.label.clone(),
                method: e.method,
                setting: e.setting.clone(),
                runs: rows.len(),
                epsilon: rows.first().map_or(f64::NAN, |r| r.epsilon),
                accuracy_mean: mean(&acc),
                accuracy_std: sample_std(&acc),
                median_c_mean: mean(&col(|r| r.median_c)),
                final_c_mean: mean(&col(|r| r.final_c)),
                mean_c_mean: mean(&col(|r| r.mean_c)),
                clamp_hits_min_mean: mean(&col(|r| r.clamp_hits_min as f64)),
                clamp_hits_max_mean: mean(&col(|r| r.clamp_hits_max as f64)),
                total_secs_mean: mean(&col(|r| r.total_secs)),
                probe_share_pct_mean: mean(&col(|r| r.probe_share_pct)),
            }
        })
        .collect()
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn write_tables(dir: &Path, o: &SweepOutcome) -> Result<()> {
    let name = o.preset.name.as_str();
    write_atomic(&dir.join(format!("{name}_runs.csv")), &csv_bytes(&o.runs)?)?;
    write_atomic(&dir.join(format!("{name}_summary.csv")), &csv_bytes(&o.summary)?)?;
    let json = serde_json::json!({
        "preset": name,
        "privacy": o.privacy,
        "summary": o.summary,
    });
    write_atomic(&dir.join(format!("{name}_summary.json")), &serde_json::to_vec_pretty(&json)?)?;
    Ok(())
}

/// Text table laid out as a results table: one line per
/// configuration, fixed-C rows first.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:<22} {:>8} {:>18} {:>10} {:>8} {:>7}",
        "method", "setting", "epsilon", "test acc (%)", "median C", "C_T", "clamps"
    );
    for r in summary {
        let acc = match r.accuracy_std {
            Some(sd) => format!("{:.2} ± {:.2}", 100.0 * r.accuracy_mean, 100.0 * sd),
            None => format!("{:.2} (n=1)", 100.0 * r.accuracy_mean),
        };
        let (med, last) = match r.method {
            Method::DpSgd => ("--".to_string(), "--".to_string()),
            Method::WwDpSgd => (format!("{:.3}", r.median_c_mean), format!("{:.3}", r.final_c_mean)),
        };
        let _ = writeln!(
            s,
            "{:<10} {:<22} {:>8.3} {:>18} {:>10} {:>8} {:>7.1}",
            r.method.to_string(),
            r.setting,
            r.epsilon,
            acc,
            med,
            last,
            r.clamp_hits_min_mean + r.clamp_hits_max_mean
        );
    }
    s
}
