//! Run logs on disk: one CSV row per step plus a JSON sidecar with the
//! run-level numbers.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a log
//! back reproduces every declared column exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{timing_report, EvalPoint, RunLog, StepRecord, Timings};

pub const LOG_HEADER: [&str; 9] = [
    "step", "c", "zeta_raw", "zeta_hat", "batch_size", "loss", "skipped", "clamp_min", "clamp_max",
];

/// Sidecar contents: everything in a [`RunLog`] except the per-step rows,
/// plus a few derived summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub epsilon: f64,
    pub best_order: f64,
    pub delta: f64,
    pub final_accuracy: f64,
    pub final_test_loss: f64,
    pub evals: Vec<EvalPoint>,
    pub clamp_hits_min: usize,
    pub clamp_hits_max: usize,
    pub final_c: f64,
    pub median_c: f64,
    pub mean_c: f64,
    pub timings: Timings,
    pub probe_share_pct: f64,
    #[serde(default)]
    pub probe_failed_steps: Vec<usize>,
}

impl RunSummary {
    pub fn of(log: &RunLog) -> Self {
        Self {
            steps: log.records.len(),
            epsilon: log.epsilon,
            best_order: log.best_order,
            delta: log.delta,
            final_accuracy: log.final_accuracy,
            final_test_loss: log.final_test_loss,
            evals: log.evals.clone(),
            clamp_hits_min: log.clamp_hits_min,
            clamp_hits_max: log.clamp_hits_max,
            final_c: log.final_c,
            median_c: log.median_clip(),
            mean_c: log.mean_clip(),
            timings: log.timings,
            probe_share_pct: timing_report(log, None).probe_share_pct,
            probe_failed_steps: log
                .records
                .iter()
                .filter(|r| r.probe_failed)
                .map(|r| r.step)
                .collect(),
        }
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_log_csv<W: Write>(records: &[StepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.c.to_string(),
            r.zeta_raw.map(|z| z.to_string()).unwrap_or_default(),
            r.zeta_hat.to_string(),
            r.batch_size.to_string(),
            r.loss.to_string(),
            flag(r.skipped).into(),
            flag(r.clamp_min).into(),
            flag(r.clamp_max).into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a log CSV. `probe_failed` is not a column and comes back `false`.
pub fn read_log_csv<R: std::io::Read>(input: R) -> Result<Vec<StepRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(LOG_HEADER) {
        return Err(Error::Format {
            offset: 0,
            message: format!("unexpected log header `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte());
        let bad = |col: &str, v: &str| Error::Format {
            offset,
            message: format!("column `{col}`: cannot parse `{v}`"),
        };
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(LOG_HEADER[i], &rec[i])) };
        let int = |i: usize| -> Result<usize> { rec[i].parse().map_err(|_| bad(LOG_HEADER[i], &rec[i])) };
        let boolean = |i: usize| -> Result<bool> {
            match &rec[i] {
                "1" => Ok(true),
                "0" => Ok(false),
                v => Err(bad(LOG_HEADER[i], v)),
            }
        };
        out.push(StepRecord {
            step: int(0)?,
            c: num(1)?,
            zeta_raw: if rec[2].is_empty() { None } else { Some(num(2)?) },
            zeta_hat: num(3)?,
            batch_size: int(4)?,
            loss: num(5)?,
            skipped: boolean(6)?,
            clamp_min: boolean(7)?,
            clamp_max: boolean(8)?,
            probe_failed: false,
        });
    }
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Sidecar path for a log CSV: `x.csv` → `x.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`; returns the CSV path.
pub fn write_run(dir: &Path, name: &str, log: &RunLog) -> Result<PathBuf> {
    let csv_path = dir.join(format!("{name}.csv"));
    let mut buf = Vec::new();
    write_log_csv(&log.records, &mut buf)?;
    write_atomic(&csv_path, &buf)?;
    let json = serde_json::to_vec_pretty(&RunSummary::of(log))?;
    write_atomic(&sidecar_path(&csv_path), &json)?;
    Ok(csv_path)
}

/// Reads a log CSV and, when present next to it, its sidecar.
pub fn read_run(csv_path: &Path) -> Result<(Vec<StepRecord>, Option<RunSummary>)> {
    let mut records = read_log_csv(fs::File::open(csv_path)?)?;
    let side = sidecar_path(csv_path);
    let summary = if side.exists() {
        let s: RunSummary = serde_json::from_slice(&fs::read(&side)?)?;
        for r in records.iter_mut() {
            r.probe_failed = s.probe_failed_steps.binary_search(&r.step).is_ok();
        }
        Some(s)
    } else {
        None
    };
    Ok((records, summary))
}

/// Rebuilds the full [`RunLog`] from a CSV and its sidecar.
pub fn read_run_log(csv_path: &Path) -> Result<RunLog> {
    let (records, summary) = read_run(csv_path)?;
    let s = summary.ok_or_else(|| {
        Error::Config(format!("no sidecar {} next to the log", sidecar_path(csv_path).display()))
    })?;
    Ok(RunLog {
        records,
        timings: s.timings,
        epsilon: s.epsilon,
        best_order: s.best_order,
        delta: s.delta,
        final_accuracy: s.final_accuracy,
        final_test_loss: s.final_test_loss,
        evals: s.evals,
        clamp_hits_min: s.clamp_hits_min,
        clamp_hits_max: s.clamp_hits_max,
        final_c: s.final_c,
    })
}

/// Human-readable summary of a log, as printed by `inspect-log`.
pub fn describe(records: &[StepRecord], summary: Option<&RunSummary>) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let n = records.len();
    let skipped = records.iter().filter(|r| r.skipped).count();
    let probes: Vec<&StepRecord> = records.iter().filter(|r| r.zeta_raw.is_some()).collect();
    let cs: Vec<f64> = records.iter().map(|r| r.c).collect();
    let _ = writeln!(s, "steps            {n}");
    let _ = writeln!(s, "skipped steps    {skipped}");
    let _ = writeln!(s, "probes           {}", probes.len());
    if n > 0 {
        let mean = cs.iter().sum::<f64>() / n as f64;
        let min = cs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(s, "C first/last     {} / {}", cs[0], cs[n - 1]);
        let _ = writeln!(s, "C median/mean    {:.4} / {:.4}", crate::spectral::median(&cs), mean);
        let _ = writeln!(s, "C min/max        {min:.4} / {max:.4}");
        let changes = cs.windows(2).filter(|w| w[0] != w[1]).count();
        let _ = writeln!(s, "C changes        {changes}");
        let losses: Vec<f64> = records.iter().map(|r| r.loss).filter(|l| l.is_finite()).collect();
        if let Some(last) = losses.last() {
            let _ = writeln!(s, "train loss       first {:.4}, last {:.4}", losses[0], last);
        }
    }
    if let (Some(first), Some(last)) = (probes.first(), probes.last()) {
        let _ = writeln!(
            s,
            "zeta raw         first {:.3}, last {:.3}",
            first.zeta_raw.unwrap(),
            last.zeta_raw.unwrap()
        );
        let _ = writeln!(s, "zeta hat (last)  {:.3}", last.zeta_hat);
    }
    let hits_min = records.iter().filter(|r| r.clamp_min).count();
    let hits_max = records.iter().filter(|r| r.clamp_max).count();
    let _ = writeln!(s, "clamp hits       min {hits_min}, max {hits_max}");
    if let Some(m) = summary {
        let _ = writeln!(s, "C_T              {}", m.final_c);
        let _ = writeln!(s, "epsilon          {:.4} (delta {}, order {})", m.epsilon, m.delta, m.best_order);
        let _ = writeln!(s, "test accuracy    {:.4}", m.final_accuracy);
        let _ = writeln!(s, "test loss        {:.4}", m.final_test_loss);
        let _ = writeln!(
            s,
            "time             train {:.3}s, eval {:.3}s, probe {:.3}s ({:.2}% of train)",
            m.timings.train_secs, m.timings.eval_secs, m.timings.probe_secs, m.probe_share_pct
        );
        if !m.probe_failed_steps.is_empty() {
            let _ = writeln!(s, "failed probes    {:?}", m.probe_failed_steps);
        }
    }
    s
}
