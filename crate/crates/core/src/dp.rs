//! The per-step Gaussian mechanism: Poisson subsampling, per-example ℓ2
//! clipping at the current threshold, Gaussian noise on the clipped sum, and
//! averaging over the realised batch size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, RngStream};
use crate::model::PerExampleGrads;

/// Mechanism parameters seen by the accountant. There is deliberately no
/// clipping threshold here: the per-step privacy loss depends only on the
/// sampling rate and the noise multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyParams {
    pub q: f64,
    pub sigma: f64,
    pub total_steps: usize,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(q: f64, sigma: f64, total_steps: usize, delta: f64) -> Result<Self> {
        let p = Self {
            q,
            sigma,
            total_steps,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Config(format!("sampling rate q={} not in (0, 1]", self.q)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("noise multiplier sigma={} must be > 0", self.sigma)));
        }
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta={} not in (0, 1)", self.delta)));
        }
        Ok(())
    }
}

/// Result of one mechanism invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisyUpdate {
    Released {
        g_tilde: Vec<f64>,
        /// Threshold the rows were clipped at.
        clip: f64,
        /// Standard deviation of the noise added to the clipped sum.
        noise_std: f64,
    },
    /// The sampled batch was empty; nothing was released and no noise drawn.
    Skipped,
}

impl NoisyUpdate {
    pub fn is_skipped(&self) -> bool {
        matches!(self, NoisyUpdate::Skipped)
    }

    pub fn g_tilde(&self) -> Option<&[f64]> {
        match self {
            NoisyUpdate::Released { g_tilde, .. } => Some(g_tilde),
            NoisyUpdate::Skipped => None,
        }
    }
}

/// Includes each index of `0..n` independently with probability `q`.
///
/// Always draws exactly `n` uniforms, so the stream position after a call
/// does not depend on `q`.
pub fn poisson_subsample(n: usize, q: f64, rng: &mut RngStream) -> Vec<usize> {
    debug_assert!((0.0..=1.0).contains(&q));
    (0..n).filter(|_| rng.uniform() < q).collect()
}

/// `g / max(1, ‖g‖ / c)`.
pub fn clip_gradient(g: &[f64], c: f64) -> Vec<f64> {
    let scale = (l2_norm(g) / c).max(1.0);
    g.iter().map(|v| v / scale).collect()
}

fn clipped_sum(grads: &PerExampleGrads, c: f64) -> Vec<f64> {
    let mut sum = vec![0.0; grads.dim()];
    for row in grads.iter_rows() {
        let scale = (l2_norm(row) / c).max(1.0);
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v / scale;
        }
    }
    sum
}

/// `(Σ clip(gᵢ, c) + N(0, σ²c² I)) / |L|`.
///
/// Rows are clipped here, so callers pass raw per-example gradients. The sum
/// is reduced in batch order. An empty batch returns [`NoisyUpdate::Skipped`]
/// without touching `rng`.
pub fn noisy_average(
    grads: &PerExampleGrads,
    c: f64,
    sigma: f64,
    rng: &mut RngStream,
) -> NoisyUpdate {
    debug_assert!(c > 0.0 && sigma >= 0.0);
    if grads.rows() == 0 {
        return NoisyUpdate::Skipped;
    }
    let mut sum = clipped_sum(grads, c);
    let noise_std = sigma * c;
    let n = grads.rows() as f64;
    for s in sum.iter_mut() {
        let z = rng.standard_normal();
        let noise = if noise_std == 0.0 { 0.0 } else { noise_std * z };
        *s = (*s + noise) / n;
    }
    NoisyUpdate::Released {
        g_tilde: sum,
        clip: c,
        noise_std,
    }
}

/// ‖Σ clip(with) − Σ clip(without)‖ for gradient sets that differ by one
/// removed row (order of the remaining rows preserved).
pub fn sensitivity_probe(
    with: &PerExampleGrads,
    without: &PerExampleGrads,
    c: f64,
) -> Result<f64> {
    if with.dim() != without.dim() {
        return Err(Error::DimensionMismatch {
            expected: with.dim(),
            actual: without.dim(),
        });
    }
    if with.rows() != without.rows() + 1 {
        return Err(Error::invalid(format!(
            "neighbouring sets must differ by one row, got {} and {} rows",
            with.rows(),
            without.rows()
        )));
    }
    // the first mismatching position is the removed row; everything after it
    // must line up shifted by one
    let removed = (0..without.rows())
        .find(|&i| with.row(i) != without.row(i))
        .unwrap_or(without.rows());
    let tail_matches =
        (removed..without.rows()).all(|i| with.row(i + 1) == without.row(i));
    if !tail_matches {
        return Err(Error::invalid(
            "gradient sets are not neighbours (more than one row differs)",
        ));
    }
    let a = clipped_sum(with, c);
    let b = clipped_sum(without, c);
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    Ok(l2_norm(&diff))
}
