//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "dataset":    { "source": "synthetic_blobs", "n_train": 8000, "n_test": 2000,
//!                   "n_classes": 10, "feature_dim": 32, "separation": 3.0 },
//!   "model":      { "hidden_sizes": [128, 64], "activation": "relu" },
//!   "privacy":    { "sigma": 1.1, "delta": 1e-5, "expected_batch_size": 256, "epochs": 8 },
//!   "controller": { "enabled": true, "zeta_star": 4.0, "r": 2.0, "kappa": 0.1, "beta": 0.98,
//!                   "probe_period": 50, "c_min": 0.3, "c_max": 5.0, "clamp_enabled": true,
//!                   "probe_layers": ["fc2"], "tail_rule": { "mode": "auto", "min_tail_size": 8 } },
//!   "trainer":    { "c0": 1.0, "lr_schedule": { "kind": "constant", "lr": 0.5 }, "seed": 0 },
//!   "output":     { "dir": "runs", "name": "run" }
//! }
//! ```
//!
//! `privacy` takes either `q` or `expected_batch_size` (then `q = b/n_train`),
//! and either `steps` or `epochs` (then `T = round(epochs/q)`). Omitted
//! sections and fields take the defaults above. [`ExperimentConfig::canonical_json`]
//! writes every field explicitly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::model::{Activation, LayerRef, LossKind, MlpConfig, ProbeSpec};
use crate::spectral::TailFitRule;
use crate::trainer::{LrSchedule, Seeds, TrainConfig};

use super::data::DatasetSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![128, 64],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacySection {
    pub sigma: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<f64>,
}

impl Default for PrivacySection {
    fn default() -> Self {
        Self {
            sigma: 1.1,
            delta: 1e-5,
            q: None,
            expected_batch_size: Some(256),
            steps: None,
            epochs: Some(8.0),
        }
    }
}

impl PrivacySection {
    pub fn resolve(&self, n_train: usize) -> Result<PrivacyParams> {
        let q = match (self.q, self.expected_batch_size) {
            (Some(q), None) => q,
            (None, Some(b)) => b as f64 / n_train as f64,
            _ => {
                return Err(Error::Config(
                    "privacy needs exactly one of `q` and `expected_batch_size`".into(),
                ))
            }
        };
        let steps = match (self.steps, self.epochs) {
            (Some(t), None) => t,
            (None, Some(e)) if e > 0.0 && q > 0.0 => (e / q).round() as usize,
            (None, Some(e)) => return Err(Error::Config(format!("epochs={e} must be > 0"))),
            _ => {
                return Err(Error::Config(
                    "privacy needs exactly one of `steps` and `epochs`".into(),
                ))
            }
        };
        PrivacyParams::new(q, self.sigma, steps, self.delta)
    }
}

fn default_probe_layers() -> Vec<LayerRef> {
    vec![LayerRef(1)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub enabled: bool,
    pub zeta_star: f64,
    pub r: f64,
    pub kappa: f64,
    pub beta: f64,
    pub probe_period: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub clamp_enabled: bool,
    pub probe_layers: Vec<LayerRef>,
    pub tail_rule: TailFitRule,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self::from_parts(true, &ControllerConfig::default(), default_probe_layers(), TailFitRule::default())
    }
}

impl ControllerSection {
    pub fn from_parts(
        enabled: bool,
        c: &ControllerConfig,
        probe_layers: Vec<LayerRef>,
        tail_rule: TailFitRule,
    ) -> Self {
        Self {
            enabled,
            zeta_star: c.zeta_star,
            r: c.r,
            kappa: c.kappa,
            beta: c.beta,
            probe_period: c.probe_period,
            c_min: c.c_min,
            c_max: c.c_max,
            clamp_enabled: c.clamp_enabled,
            probe_layers,
            tail_rule,
        }
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            zeta_star: self.zeta_star,
            r: self.r,
            kappa: self.kappa,
            beta: self.beta,
            probe_period: self.probe_period,
            c_min: self.c_min,
            c_max: self.c_max,
            clamp_enabled: self.clamp_enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerSection {
    pub c0: f64,
    pub lr_schedule: LrSchedule,
    /// Base seed; the four stream seeds derive from it unless `seeds` is set.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Seeds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
}

impl Default for TrainerSection {
    fn default() -> Self {
        Self {
            c0: 1.0,
            lr_schedule: LrSchedule::Constant { lr: 0.5 },
            seed: 0,
            seeds: None,
            eval_every: None,
        }
    }
}

impl TrainerSection {
    pub fn seeds(&self) -> Seeds {
        self.seeds.unwrap_or_else(|| Seeds::from_base(self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub name: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            name: "run".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Desk-scale blobs run with every section at its default.
    pub fn desk_default() -> Self {
        Self {
            dataset: DatasetSpec::desk_blobs(10, 32, 3.0),
            model: ModelSection::default(),
            privacy: PrivacySection::default(),
            controller: ControllerSection::default(),
            trainer: TrainerSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.dataset.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with every field written out.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn model_config(&self) -> MlpConfig {
        let mut layer_sizes = vec![self.dataset.feature_dim];
        layer_sizes.extend_from_slice(&self.model.hidden_sizes);
        layer_sizes.push(self.dataset.n_classes);
        MlpConfig {
            layer_sizes,
            activation: self.model.activation,
            loss: LossKind::SoftmaxCrossEntropy,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            privacy: self.privacy.resolve(self.dataset.n_train)?,
            controller: self.controller.controller_config(),
            c0: self.trainer.c0,
            lr_schedule: self.trainer.lr_schedule,
            model: self.model_config(),
            probe: ProbeSpec {
                layers: self.controller.probe_layers.clone(),
            },
            tail_rule: self.controller.tail_rule,
            seeds: self.trainer.seeds(),
            controller_enabled: self.controller.enabled,
            eval_every: self.trainer.eval_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.trainer.seed = seed;
        c.trainer.seeds = None;
        c
    }
}
