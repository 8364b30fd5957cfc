//! Dataset sources: synthetic Gaussian blobs, CSV tables and MNIST IDX files,
//! plus Dirichlet label skew and z-score normalisation.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RngStream, StreamId};
use crate::model::Batch;

use super::mnist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    SyntheticBlobs,
    CsvTabular,
    MnistIdx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    Zscore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewSpec {
    pub alpha: f64,
    pub seed: u64,
}

fn default_separation() -> f64 {
    3.0
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub source: DataSource,
    /// CSV file, or the directory holding the four MNIST IDX files.
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub feature_dim: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub skew: Option<SkewSpec>,
    /// Distance between any two class means (synthetic blobs only).
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Name of the label column (CSV only).
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

impl DatasetSpec {
    /// Synthetic blobs at desk scale: 8000 train / 2000 test.
    pub fn desk_blobs(n_classes: usize, feature_dim: usize, separation: f64) -> Self {
        Self {
            source: DataSource::SyntheticBlobs,
            path: None,
            n_train: 8000,
            n_test: 2000,
            n_classes,
            feature_dim,
            normalization: Normalization::None,
            skew: None,
            separation,
            label_column: default_label_column(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        if let Some(s) = &self.skew {
            if !(s.alpha > 0.0) {
                return Err(Error::Config(format!("skew alpha={} must be > 0", s.alpha)));
            }
        }
        match self.source {
            DataSource::SyntheticBlobs => {
                if !(self.separation >= 0.0) {
                    return Err(Error::Config("separation must be non-negative".into()));
                }
                if self.feature_dim < self.n_classes {
                    return Err(Error::Config(
                        "synthetic blobs need feature_dim >= n_classes".into(),
                    ));
                }
            }
            DataSource::CsvTabular | DataSource::MnistIdx => {
                if self.path.is_none() {
                    return Err(Error::Config(format!("{:?} source needs a path", self.source)));
                }
            }
        }
        Ok(())
    }
}

/// Loads or synthesises the train and test sets, then applies skew and
/// normalisation. `seed` drives synthesis and shuffling.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<(Batch, Batch)> {
    spec.validate()?;
    let mut rng = RngStream::new(seed, StreamId::Data);
    let (mut train, mut test) = match spec.source {
        DataSource::SyntheticBlobs => make_synthetic_blobs(spec, &mut rng)?,
        DataSource::CsvTabular => {
            load_csv_tabular(spec.path.as_deref().expect("validated"), spec, &mut rng)?
        }
        DataSource::MnistIdx => {
            let dir = spec.path.as_deref().expect("validated");
            mnist::load_mnist_idx(dir, Some(spec.n_train), Some(spec.n_test))?
        }
    };
    if let Some(skew) = &spec.skew {
        let mut skew_rng = RngStream::new(skew.seed, StreamId::Custom(1));
        let keep = dirichlet_skew(train.labels(), spec.n_classes, skew.alpha, &mut skew_rng)?;
        train = train.select(&keep);
    }
    if spec.normalization == Normalization::Zscore {
        zscore(&mut train, &mut test)?;
    }
    Ok((train, test))
}

/// Class-conditional unit-covariance Gaussians. Class `c` has mean
/// `(separation/√2)·e_c`, so every pair of means is `separation` apart.
/// Each split holds (nearly) equal counts per class.
pub fn make_synthetic_blobs(spec: &DatasetSpec, rng: &mut RngStream) -> Result<(Batch, Batch)> {
    if spec.n_classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    if spec.feature_dim < spec.n_classes {
        return Err(Error::Config("synthetic blobs need feature_dim >= n_classes".into()));
    }
    let offset = spec.separation / std::f64::consts::SQRT_2;
    let mut draw_split = |n: usize| -> Result<Batch> {
        let mut labels: Vec<usize> = (0..n).map(|i| i % spec.n_classes).collect();
        shuffle(&mut labels, rng);
        let mut features = Vec::with_capacity(n * spec.feature_dim);
        for &y in &labels {
            for j in 0..spec.feature_dim {
                let mean = if j == y { offset } else { 0.0 };
                features.push(mean + rng.standard_normal());
            }
        }
        Batch::new(spec.feature_dim, features, labels)
    };
    let train = draw_split(spec.n_train)?;
    let test = draw_split(spec.n_test)?;
    Ok((train, test))
}

/// Reads a CSV table with a header row. The label column holds class indices;
/// every other column is a numeric feature. Rows are shuffled, then the first
/// `n_train` become the training set and the next `n_test` the test set.
pub fn load_csv_tabular(path: &Path, spec: &DatasetSpec, rng: &mut RngStream) -> Result<(Batch, Batch)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == spec.label_column)
        .ok_or_else(|| Error::Config(format!("no `{}` column in {}", spec.label_column, path.display())))?;
    let dim = headers.len() - 1;
    if dim != spec.feature_dim {
        return Err(Error::Config(format!(
            "{} has {dim} feature columns, config says {}",
            path.display(),
            spec.feature_dim
        )));
    }

    let mut rows: Vec<(Vec<f64>, usize)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut x = Vec::with_capacity(dim);
        let mut y = None;
        for (i, field) in rec.iter().enumerate() {
            let bad = || Error::Config(format!("row {}: bad value `{field}`", line + 2));
            if i == label_idx {
                y = Some(field.trim().parse::<usize>().map_err(|_| bad())?);
            } else {
                x.push(field.trim().parse::<f64>().map_err(|_| bad())?);
            }
        }
        let y = y.expect("label column present");
        if y >= spec.n_classes {
            return Err(Error::Config(format!("row {}: label {y} >= n_classes", line + 2)));
        }
        rows.push((x, y));
    }
    if rows.len() < spec.n_train + spec.n_test {
        return Err(Error::Config(format!(
            "{} has {} rows, need n_train + n_test = {}",
            path.display(),
            rows.len(),
            spec.n_train + spec.n_test
        )));
    }
    shuffle(&mut rows, rng);
    let to_batch = |rows: &[(Vec<f64>, usize)]| {
        let features = rows.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let labels = rows.iter().map(|(_, y)| *y).collect();
        Batch::new(dim, features, labels)
    };
    let train = to_batch(&rows[..spec.n_train])?;
    let test = to_batch(&rows[spec.n_train..spec.n_train + spec.n_test])?;
    Ok((train, test))
}

/// Standardises features with the training set's per-feature mean and
/// standard deviation (constant features are only centred).
pub fn zscore(train: &mut Batch, test: &mut Batch) -> Result<()> {
    let dim = train.dim();
    let n = train.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for i in 0..train.len() {
        for (m, x) in mean.iter_mut().zip(train.input(i)) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; dim];
    for i in 0..train.len() {
        for ((v, x), m) in var.iter_mut().zip(train.input(i)).zip(&mean) {
            *v += (x - m) * (x - m) / n;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let apply = |b: &Batch| -> Result<Batch> {
        let features = b
            .features()
            .chunks_exact(dim)
            .flat_map(|row| row.iter().zip(&mean).zip(&std).map(|((x, m), s)| (x - m) / s))
            .collect();
        Batch::new(dim, features, b.labels().to_vec())
    };
    *train = apply(train)?;
    *test = apply(test)?;
    Ok(())
}

/// Subsamples `labels` so the class proportions follow `π ~ Dirichlet(α·1)`.
///
/// Target counts come from largest-remainder rounding of `π·M`, where `M` is
/// the original size when every class has enough examples, and otherwise the
/// largest total the available counts allow (a warning is logged). Returns
/// the kept indices in ascending order.
pub fn dirichlet_skew(
    labels: &[usize],
    n_classes: usize,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("Dirichlet alpha={alpha} must be > 0")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::invalid(format!("label {y} >= n_classes {n_classes}")));
        }
        by_class[y].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::invalid("every class needs at least one example"));
    }

    let pi = sample_dirichlet(n_classes, alpha, rng)?;
    let available: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let n = labels.len();

    let mut total = n;
    let mut counts = largest_remainder(&pi, total);
    if counts.iter().zip(&available).any(|(c, a)| c > a) {
        // largest M with round(π·M) feasible; start from the continuous bound
        let bound = pi
            .iter()
            .zip(&available)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, &a)| a as f64 / p)
            .fold(f64::INFINITY, f64::min);
        total = (bound.floor() as usize).min(n);
        loop {
            counts = largest_remainder(&pi, total);
            if counts.iter().zip(&available).all(|(c, a)| c <= a) {
                break;
            }
            total -= 1;
        }
        log::warn!(
            "Dirichlet skew (alpha={alpha}) keeps {total} of {n} examples: class availability limits the total"
        );
    }

    let mut keep = Vec::with_capacity(total);
    for (members, &count) in by_class.iter_mut().zip(&counts) {
        shuffle(members, rng);
        keep.extend_from_slice(&members[..count]);
    }
    keep.sort_unstable();
    Ok(keep)
}

/// `π ~ Dirichlet(α·1)` via normalised Gamma(α, 1) draws.
pub fn sample_dirichlet(k: usize, alpha: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let mut g: Vec<f64> = (0..k).map(|_| rng.sample(gamma)).collect();
    let mut sum: f64 = g.iter().sum();
    if !(sum > 0.0) {
        // every draw underflowed (tiny alpha): all mass on one class
        let winner = (rng.uniform() * k as f64) as usize;
        g.iter_mut().for_each(|v| *v = 0.0);
        g[winner.min(k - 1)] = 1.0;
        sum = 1.0;
    }
    Ok(g.into_iter().map(|v| v / sum).collect())
}

/// Integer counts summing to `total` proportional to `weights` (which sum to 1),
/// by largest remainder; ties go to the lower index.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn shuffle<T>(v: &mut [T], rng: &mut RngStream) {
    for i in (1..v.len()).rev() {
        let j = ((rng.uniform() * (i + 1) as f64) as usize).min(i);
        v.swap(i, j);
    }
}
