//! Log-domain saturated feedback on the clipping threshold.
//!
//! The state is `u = ln C` and a smoothed exponent `ζ̂`. On each probe:
//!
//! ```text
//! ζ̂ ← β ζ̂ + (1 − β) ζ
//! φ = sat((ζ̂ − ζ★) / r)
//! u ← u + κ φ,   C = exp(u)
//! C ← clamp(C, C_min, C_max)   (optional; u is reset to ln C)
//! ```
//!
//! A reading above the zone centre raises `C`, one below lowers it, and each
//! probe moves `ln C` by at most `κ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub zeta_star: f64,
    pub r: f64,
    pub kappa: f64,
    pub beta: f64,
    /// Probe every `probe_period` steps.
    pub probe_period: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub clamp_enabled: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            zeta_star: 4.0,
            r: 2.0,
            kappa: 0.1,
            beta: 0.98,
            probe_period: 50,
            c_min: 0.3,
            c_max: 5.0,
            clamp_enabled: true,
        }
    }
}

impl ControllerConfig {
    /// `κ = 0` is allowed: the controller then records readings but never
    /// moves `C`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.zeta_star.is_finite() {
            return bad(format!("zeta_star={} must be finite", self.zeta_star));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("zone radius r={} must be > 0", self.r));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("gain kappa={} must be >= 0", self.kappa));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("EMA factor beta={} not in [0, 1)", self.beta));
        }
        if self.probe_period == 0 {
            return bad("probe_period must be positive".into());
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max && self.c_max.is_finite()) {
            return bad(format!(
                "clamp bounds [{}, {}] must satisfy 0 < c_min <= c_max",
                self.c_min, self.c_max
            ));
        }
        Ok(())
    }

    /// `min(c_max, max(c_min, c))`, regardless of `clamp_enabled`.
    pub fn clamp(&self, c: f64) -> f64 {
        c.max(self.c_min).min(self.c_max)
    }

    pub fn is_probe_step(&self, t: usize) -> bool {
        (t + 1) % self.probe_period == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClampSide {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipControllerState {
    /// `ln C`.
    pub u: f64,
    pub zeta_hat: f64,
    pub clamp_hits_min: usize,
    pub clamp_hits_max: usize,
}

impl ClipControllerState {
    pub fn clip(&self) -> f64 {
        self.u.exp()
    }
}

/// Result of one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutcome {
    pub c_next: f64,
    pub phi: f64,
    pub clamped: Option<ClampSide>,
}

pub fn init_state(cfg: &ControllerConfig, c0: f64) -> Result<ClipControllerState> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::invalid(format!("initial clip C0={c0} must be > 0")));
    }
    Ok(ClipControllerState {
        u: c0.ln(),
        zeta_hat: cfg.zeta_star,
        clamp_hits_min: 0,
        clamp_hits_max: 0,
    })
}

/// `max(−1, min(1, x))`.
pub fn sat(x: f64) -> f64 {
    x.min(1.0).max(-1.0)
}

pub fn ema_update(state: &ClipControllerState, zeta_new: f64, beta: f64) -> ClipControllerState {
    ClipControllerState {
        zeta_hat: beta * state.zeta_hat + (1.0 - beta) * zeta_new,
        ..*state
    }
}

/// EMA update, saturated error, log-domain step and optional clamp.
pub fn control_step(
    state: &ClipControllerState,
    zeta_new: f64,
    cfg: &ControllerConfig,
) -> (ClipControllerState, ControlOutcome) {
    debug_assert!(zeta_new.is_finite());
    let mut next = ema_update(state, zeta_new, cfg.beta);
    let phi = sat((next.zeta_hat - cfg.zeta_star) / cfg.r);
    next.u = state.u + cfg.kappa * phi;
    let mut c_next = next.u.exp();
    let mut clamped = None;
    if cfg.clamp_enabled {
        if c_next > cfg.c_max {
            clamped = Some(ClampSide::Max);
            next.clamp_hits_max += 1;
        } else if c_next < cfg.c_min {
            clamped = Some(ClampSide::Min);
            next.clamp_hits_min += 1;
        }
        if clamped.is_some() {
            c_next = cfg.clamp(c_next);
            next.u = c_next.ln();
        }
    }
    (
        next,
        ControlOutcome {
            c_next,
            phi,
            clamped,
        },
    )
}
