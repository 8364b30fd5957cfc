//! Heavy-tailed spectral exponent of weight matrices.
//!
//! The eigenvalues of `WᵀW` are the squared singular values of `W`. A power
//! law `p(λ) ∝ λ^{-ζ}` is fitted to the upper tail with the Hill estimator
//! over the `k` largest eigenvalues:
//!
//! ```text
//! ζ = 1 + k / Σ_{i=1..k} ln(λ_i / λ_{k+1})
//! ```
//!
//! `ζ` is the density exponent, i.e. one plus the tail index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};
use crate::model::{LayerRef, MlpParams, ProbeSpec};

/// Eigenvalues below this fraction of the largest count as numerical zeros.
pub const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TailMode {
    /// Fit the `k` largest eigenvalues.
    TopK { k: usize },
    /// Top-k with `k = max(min_tail_size, ⌈r_eff/4⌉)`, `r_eff` the number of
    /// non-zero eigenvalues.
    Auto,
    /// Fit every eigenvalue strictly above `lambda_min`.
    XminThreshold { lambda_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFitRule {
    #[serde(flatten)]
    pub mode: TailMode,
    pub min_tail_size: usize,
}

impl Default for TailFitRule {
    fn default() -> Self {
        Self {
            mode: TailMode::Auto,
            min_tail_size: 8,
        }
    }
}

impl TailFitRule {
    pub fn top_k(k: usize) -> Self {
        Self {
            mode: TailMode::TopK { k },
            min_tail_size: k.min(8).max(5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_tail_size < 5 {
            return Err(Error::Config(format!(
                "min_tail_size must be at least 5, got {}",
                self.min_tail_size
            )));
        }
        match self.mode {
            TailMode::TopK { k } if k < self.min_tail_size => Err(Error::Config(format!(
                "top-k size {k} is below min_tail_size {}",
                self.min_tail_size
            ))),
            TailMode::XminThreshold { lambda_min } if !(lambda_min > 0.0) => Err(Error::Config(
                format!("lambda_min must be positive, got {lambda_min}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReading {
    pub zeta: f64,
    pub tail_size: usize,
    pub layer: Option<LayerRef>,
}

/// Outcome of a multi-layer probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReading {
    /// Aggregated exponent (median over the layers that fitted).
    pub zeta: f64,
    pub layers: Vec<SpectralReading>,
    /// Layers whose spectrum could not be fitted.
    pub failed: Vec<LayerRef>,
}

/// `σⱼ²` of `w`, descending.
pub fn eigenvalues(w: &Matrix) -> Vec<f64> {
    singular_values(w).into_iter().map(|s| s * s).collect()
}

/// Hill fit of the tail exponent. `lambdas` must be sorted descending.
pub fn fit_tail_exponent(lambdas: &[f64], rule: &TailFitRule) -> Result<SpectralReading> {
    rule.validate()?;
    let (k, reference) = match rule.mode {
        TailMode::TopK { k } => (k, lambdas.get(k).copied()),
        TailMode::Auto => {
            let r_eff = lambdas.iter().filter(|&&l| l > 0.0).count();
            let k = rule.min_tail_size.max(r_eff.div_ceil(4));
            (k, lambdas.get(k).copied())
        }
        TailMode::XminThreshold { lambda_min } => {
            let k = lambdas.iter().take_while(|&&l| l > lambda_min).count();
            (k, Some(lambdas.get(k).copied().unwrap_or(lambda_min)))
        }
    };
    if k < rule.min_tail_size {
        return Err(Error::DegenerateSpectrum(format!(
            "tail of {k} eigenvalues is below the minimum {}",
            rule.min_tail_size
        )));
    }
    let reference = reference.ok_or_else(|| {
        Error::DegenerateSpectrum(format!(
            "top-{k} fit needs {} eigenvalues, got {}",
            k + 1,
            lambdas.len()
        ))
    })?;
    if !(reference > 0.0) || lambdas[..k].iter().any(|&l| !(l > 0.0)) {
        return Err(Error::DegenerateSpectrum(
            "non-positive eigenvalue in the tail".into(),
        ));
    }
    let log_sum: f64 = lambdas[..k].iter().map(|&l| (l / reference).ln()).sum();
    if !(log_sum > 0.0) || !log_sum.is_finite() {
        return Err(Error::DegenerateSpectrum(
            "tail eigenvalues are all equal".into(),
        ));
    }
    Ok(SpectralReading {
        zeta: 1.0 + k as f64 / log_sum,
        tail_size: k,
        layer: None,
    })
}

/// Spectrum of `w` with numerically-zero eigenvalues removed.
fn effective_spectrum(w: &Matrix) -> Vec<f64> {
    let mut lambdas = eigenvalues(w);
    let cutoff = lambdas.first().copied().unwrap_or(0.0) * RANK_CUTOFF;
    lambdas.retain(|&l| l > cutoff);
    lambdas
}

/// Fits one layer of `p`.
pub fn probe_layer(p: &MlpParams, layer: LayerRef, rule: &TailFitRule) -> Result<SpectralReading> {
    let w = p.probe_matrix(layer)?;
    let mut reading = fit_tail_exponent(&effective_spectrum(&w), rule)?;
    reading.layer = Some(layer);
    Ok(reading)
}

/// Median of the per-layer exponents over the probe set. Layers whose fit
/// fails are left out; if none fits, the probe fails.
pub fn ww_probe(p: &MlpParams, spec: &ProbeSpec, rule: &TailFitRule) -> Result<ProbeReading> {
    spec.validate(p.config())?;
    rule.validate()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    let mut failed = Vec::new();
    for &l in &spec.layers {
        match probe_layer(p, l, rule) {
            Ok(r) => layers.push(r),
            Err(Error::DegenerateSpectrum(_)) => failed.push(l),
            Err(e) => return Err(e),
        }
    }
    if layers.is_empty() {
        return Err(Error::ProbeFailed);
    }
    let zetas: Vec<f64> = layers.iter().map(|r| r.zeta).collect();
    Ok(ProbeReading {
        zeta: median(&zetas),
        layers,
        failed,
    })
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
