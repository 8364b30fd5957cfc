//! The training loop: DP-SGD steps with a clipping threshold that is carried
//! forward between probes and updated by the controller every `K` steps.
//!
//! Per step `t`:
//! 1. Poisson-subsample the training set.
//! 2. Empty batch: skip; parameters, `C` and `ζ̂` are unchanged and no noise
//!    is drawn.
//! 3. Otherwise clip per-example gradients at `C_t`, add noise with standard
//!    deviation `σ·C_t` to the sum, average and take a gradient step.
//! 4. If `(t+1) mod K = 0` and the controller is on, probe the updated
//!    parameters and run one control step; the new `C` applies from step
//!    `t+1`.
//!
//! The accountant is fed `(q, σ, T, δ)` only.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::accountant;
use crate::controller::{self, ClampSide, ControllerConfig};
use crate::dp::{self, NoisyUpdate, PrivacyParams};
use crate::error::{Error, Result};
use crate::linalg::{RngStream, StreamId};
use crate::model::{self, Batch, Evaluation, MlpConfig, MlpParams, ProbeSpec};
use crate::spectral::{self, TailFitRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant { lr: f64 },
    /// `lr · factor^(t / every)`.
    StepDecay { lr: f64, every: usize, factor: f64 },
}

impl LrSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::StepDecay { lr, every, factor } => lr * factor.powi((t / every) as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lr, ok) = match *self {
            LrSchedule::Constant { lr } => (lr, true),
            LrSchedule::StepDecay { lr, every, factor } => (lr, every > 0 && factor > 0.0),
        };
        if !(lr > 0.0 && lr.is_finite()) || !ok {
            return Err(Error::Config(format!("invalid learning-rate schedule {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub init: u64,
    pub subsample: u64,
    pub noise: u64,
    pub data: u64,
}

impl Seeds {
    /// Four seeds derived from one base seed.
    pub fn from_base(base: u64) -> Self {
        Self {
            init: base,
            subsample: base.wrapping_add(1_000_003),
            noise: base.wrapping_add(2_000_003),
            data: base.wrapping_add(3_000_017),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub privacy: PrivacyParams,
    pub controller: ControllerConfig,
    pub c0: f64,
    pub lr_schedule: LrSchedule,
    pub model: MlpConfig,
    pub probe: ProbeSpec,
    pub tail_rule: TailFitRule,
    pub seeds: Seeds,
    pub controller_enabled: bool,
    /// Evaluate on the test set every this many steps (and always after the
    /// last step). `None` evaluates only at the end.
    pub eval_every: Option<usize>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.privacy.validate()?;
        self.controller.validate()?;
        self.model.validate()?;
        self.probe.validate(&self.model)?;
        self.tail_rule.validate()?;
        self.lr_schedule.validate()?;
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::Config(format!("c0={} must be > 0", self.c0)));
        }
        if self.eval_every == Some(0) {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        Ok(())
    }

    /// The same run with the controller switched off (fixed `C = c0`).
    pub fn fixed_clip(&self) -> Self {
        Self {
            controller_enabled: false,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Threshold used to clip (and scale the noise of) this step.
    pub c: f64,
    /// Raw exponent measured after this step; only on successful probe steps.
    pub zeta_raw: Option<f64>,
    /// Smoothed exponent after this step.
    pub zeta_hat: f64,
    pub batch_size: usize,
    /// Mean per-example loss of the sampled batch (NaN when skipped).
    pub loss: f64,
    pub skipped: bool,
    pub clamp_min: bool,
    pub clamp_max: bool,
    #[serde(default)]
    pub probe_failed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Training loop time in seconds, probe time included.
    pub train_secs: f64,
    pub eval_secs: f64,
    /// Spectral probes plus controller updates, in seconds.
    pub probe_secs: f64,
}

impl Timings {
    pub fn total_secs(&self) -> f64 {
        self.train_secs + self.eval_secs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub accuracy: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    pub timings: Timings,
    pub epsilon: f64,
    pub best_order: f64,
    pub delta: f64,
    pub final_accuracy: f64,
    pub final_test_loss: f64,
    #[serde(default)]
    pub evals: Vec<EvalPoint>,
    pub clamp_hits_min: usize,
    pub clamp_hits_max: usize,
    /// `C_T`, the threshold in effect after the last step.
    pub final_c: f64,
}

impl RunLog {
    pub fn clip_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.c).collect()
    }

    /// `median_t(C_t)`.
    pub fn median_clip(&self) -> f64 {
        spectral::median(&self.clip_series())
    }

    pub fn mean_clip(&self) -> f64 {
        self.records.iter().map(|r| r.c).sum::<f64>() / self.records.len() as f64
    }

    pub fn probe_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.zeta_raw.is_some())
    }
}

/// Hooks into the loop for instrumentation.
pub trait TrainObserver {
    /// Called after every released (non-skipped) mechanism output, with the
    /// threshold the step's record reports and the mechanism's own report.
    fn on_release(&mut self, _step: usize, _record_c: f64, _release: &NoisyUpdate) {}
}

impl TrainObserver for () {}

pub struct TrainOutcome {
    pub params: MlpParams,
    pub log: RunLog,
}

/// Runs the loop described in the module docs.
pub fn train(cfg: &TrainConfig, data: &Batch, test: &Batch) -> Result<TrainOutcome> {
    train_observed(cfg, data, test, &mut ())
}

pub fn train_observed(
    cfg: &TrainConfig,
    data: &Batch,
    test: &Batch,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let privacy = cfg.privacy;
    let (epsilon, best_order) = accountant::epsilon_with_order(&privacy)?;

    let mut init_rng = RngStream::new(cfg.seeds.init, StreamId::Init);
    let mut sub_rng = RngStream::new(cfg.seeds.subsample, StreamId::Subsample);
    let mut noise_rng = RngStream::new(cfg.seeds.noise, StreamId::Noise);

    let mut params = model::init_params(&cfg.model, &mut init_rng)?;
    let mut state = controller::init_state(&cfg.controller, cfg.c0)?;
    let mut clip = cfg.c0;

    let steps = privacy.total_steps;
    let mut records = Vec::with_capacity(steps);
    let mut evals = Vec::new();
    let mut train_time = Duration::ZERO;
    let mut eval_time = Duration::ZERO;
    let mut probe_time = Duration::ZERO;

    for t in 0..steps {
        let step_start = Instant::now();
        let indices = dp::poisson_subsample(data.len(), privacy.q, &mut sub_rng);
        let mut rec = StepRecord {
            step: t,
            c: clip,
            zeta_raw: None,
            zeta_hat: state.zeta_hat,
            batch_size: indices.len(),
            loss: f64::NAN,
            skipped: indices.is_empty(),
            clamp_min: false,
            clamp_max: false,
            probe_failed: false,
        };

        if !indices.is_empty() {
            let batch = data.select(&indices);
            let (grads, losses) = params.per_example_grads(&batch)?;
            rec.loss = losses.iter().sum::<f64>() / losses.len() as f64;
            if !rec.loss.is_finite() {
                log::error!("non-finite training loss at step {t}: {rec:?}");
                return Err(Error::Diverged {
                    step: t,
                    loss: rec.loss,
                });
            }
            let release = dp::noisy_average(&grads, clip, privacy.sigma, &mut noise_rng);
            observer.on_release(t, rec.c, &release);
            if let Some(g) = release.g_tilde() {
                params.apply_update_mut(g, cfg.lr_schedule.at(t))?;
            }

            if cfg.controller_enabled && cfg.controller.is_probe_step(t) {
                let probe_start = Instant::now();
                match spectral::ww_probe(&params, &cfg.probe, &cfg.tail_rule) {
                    Ok(reading) => {
                        let (next, out) = controller::control_step(&state, reading.zeta, &cfg.controller);
                        // exp(ln C) need not round-trip, so an unmoved u keeps C as is
                        if next.u != state.u {
                            clip = out.c_next;
                        }
                        state = next;
                        rec.zeta_raw = Some(reading.zeta);
                        rec.zeta_hat = state.zeta_hat;
                        rec.clamp_min = out.clamped == Some(ClampSide::Min);
                        rec.clamp_max = out.clamped == Some(ClampSide::Max);
                    }
                    Err(Error::ProbeFailed) => {
                        log::warn!("spectral probe failed at step {t}; carrying controller state");
                        rec.probe_failed = true;
                    }
                    Err(e) => return Err(e),
                }
                probe_time += probe_start.elapsed();
            }
        }
        train_time += step_start.elapsed();
        records.push(rec);

        let last = t + 1 == steps;
        if last || cfg.eval_every.is_some_and(|k| (t + 1) % k == 0) {
            let eval_start = Instant::now();
            let Evaluation { accuracy, mean_loss } = params.evaluate(test)?;
            eval_time += eval_start.elapsed();
            evals.push(EvalPoint {
                step: t + 1,
                accuracy,
                loss: mean_loss,
            });
        }
    }

    let final_eval = evals.last().expect("evaluated after the last step").clone();
    let log = RunLog {
        records,
        timings: Timings {
            train_secs: train_time.as_secs_f64(),
            eval_secs: eval_time.as_secs_f64(),
            probe_secs: probe_time.as_secs_f64(),
        },
        epsilon,
        best_order,
        delta: privacy.delta,
        final_accuracy: final_eval.accuracy,
        final_test_loss: final_eval.loss,
        evals,
        clamp_hits_min: state.clamp_hits_min,
        clamp_hits_max: state.clamp_hits_max,
        final_c: clip,
    };
    Ok(TrainOutcome { params, log })
}

/// Plain minibatch SGD on the mean loss, no clipping or noise. Used to check
/// that synthetic tasks are learnable.
pub fn train_non_private(
    model_cfg: &MlpConfig,
    data: &Batch,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<MlpParams> {
    let mut params = model::init_params(model_cfg, &mut RngStream::new(seed, StreamId::Init))?;
    let mut rng = RngStream::new(seed, StreamId::Subsample);
    let n = data.len();
    for _ in 0..epochs {
        // Fisher–Yates
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            order.swap(i, j.min(i));
        }
        for chunk in order.chunks(batch_size.max(1)) {
            let (g, _) = params.full_batch_gradient(&data.select(chunk))?;
            params.apply_update_mut(&g, lr)?;
        }
    }
    Ok(params)
}

/// Wall-clock summary of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub total: f64,
    pub train: f64,
    pub eval: f64,
    pub probe: f64,
    /// `100·(T_total / T_total_baseline − 1)`; absent without a baseline.
    pub overhead_pct: Option<f64>,
    /// `100·T_probe / T_train`.
    pub probe_share_pct: f64,
}

pub fn timing_report(log: &RunLog, baseline: Option<&RunLog>) -> TimingReport {
    let t = log.timings;
    let probe_share_pct = if t.train_secs > 0.0 {
        100.0 * t.probe_secs / t.train_secs
    } else {
        0.0
    };
    TimingReport {
        total: t.total_secs(),
        train: t.train_secs,
        eval: t.eval_secs,
        probe: t.probe_secs,
        overhead_pct: baseline.map(|b| 100.0 * (t.total_secs() / b.timings.total_secs() - 1.0)),
        probe_share_pct,
    }
}
