//! Named experiment grids. Each preset expands a base configuration into a
//! block of runs that share `(q, σ, T, δ)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LayerRef;

use super::config::ExperimentConfig;
use super::data::SkewSpec;

/// Clip grid shared by the fixed-C and initial-C sweeps.
pub const C_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const BETA_GRID: [f64; 5] = [0.0, 0.9, 0.95, 0.98, 0.99];
pub const ZETA_STAR_GRID: [f64; 3] = [3.0, 4.0, 5.0];
pub const RADIUS_GRID: [f64; 3] = [1.0, 2.0, 3.0];
pub const PROBE_PERIOD_GRID: [usize; 4] = [10, 25, 50, 100];
pub const DIRICHLET_GRID: [f64; 4] = [1.0, 0.5, 0.3, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    FixedCSweep,
    C0Sweep,
    BetaAblation,
    ZoneAblation,
    ProbePeriodAblation,
    ComponentAblation,
    DirichletRobustness,
    RuntimeOverhead,
}

impl PresetName {
    pub const ALL: [PresetName; 8] = [
        PresetName::FixedCSweep,
        PresetName::C0Sweep,
        PresetName::BetaAblation,
        PresetName::ZoneAblation,
        PresetName::ProbePeriodAblation,
        PresetName::ComponentAblation,
        PresetName::DirichletRobustness,
        PresetName::RuntimeOverhead,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::FixedCSweep => "fixed_c_sweep",
            PresetName::C0Sweep => "c0_sweep",
            PresetName::BetaAblation => "beta_ablation",
            PresetName::ZoneAblation => "zone_ablation",
            PresetName::ProbePeriodAblation => "probe_period_ablation",
            PresetName::ComponentAblation => "component_ablation",
            PresetName::DirichletRobustness => "dirichlet_robustness",
            PresetName::RuntimeOverhead => "runtime_overhead",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.as_str()).collect();
            Error::Config(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DP-SGD")]
    DpSgd,
    #[serde(rename = "WW-DP-SGD")]
    WwDpSgd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DpSgd => "DP-SGD",
            Method::WwDpSgd => "WW-DP-SGD",
        })
    }
}

/// One configuration in a sweep block.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    /// File-name-safe identifier, unique within the preset.
    pub label: String,
    pub method: Method,
    /// The varied setting, e.g. `C=0.25`.
    pub setting: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: PresetName,
    pub entries: Vec<SweepEntry>,
    /// Run one job at a time (timing measurements).
    pub sequential: bool,
}

fn fixed(base: &ExperimentConfig, c: f64) -> SweepEntry {
    let mut config = base.clone();
    config.controller.enabled = false;
    config.trainer.c0 = c;
    SweepEntry {
        label: format!("dpsgd_c{c}"),
        method: Method::DpSgd,
        setting: format!("C={c}"),
        config,
    }
}

fn ww(base: &ExperimentConfig, label: &str, setting: String, edit: impl FnOnce(&mut ExperimentConfig)) -> SweepEntry {
    let mut config = base.clone();
    config.controller.enabled = true;
    edit(&mut config);
    SweepEntry {
        label: format!("ww_{label}"),
        method: Method::WwDpSgd,
        setting,
        config,
    }
}

fn c0_block(base: &ExperimentConfig) -> Vec<SweepEntry> {
    C_GRID
        .iter()
        .map(|&c| ww(base, &format!("c0_{c}"), format!("C0={c}"), |cfg| cfg.trainer.c0 = c))
        .collect()
}

/// Expands `name` around `base`. Settings a preset does not vary keep the
/// values in `base`.
pub fn expand(name: PresetName, base: &ExperimentConfig) -> Preset {
    let mut sequential = false;
    let entries = match name {
        PresetName::FixedCSweep => {
            let mut e: Vec<SweepEntry> = C_GRID.iter().map(|&c| fixed(base, c)).collect();
            e.extend(c0_block(base));
            e
        }
        PresetName::C0Sweep => c0_block(base),
        PresetName::BetaAblation => BETA_GRID
            .iter()
            .map(|&b| ww(base, &format!("beta_{b}"), format!("beta={b}"), |c| c.controller.beta = b))
            .collect(),
        PresetName::ZoneAblation => ZETA_STAR_GRID
            .iter()
            .flat_map(|&z| RADIUS_GRID.iter().map(move |&r| (z, r)))
            .map(|(z, r)| {
                ww(base, &format!("zeta{z}_r{r}"), format!("zeta_star={z} r={r}"), |c| {
                    c.controller.zeta_star = z;
                    c.controller.r = r;
                })
            })
            .collect(),
        PresetName::ProbePeriodAblation => PROBE_PERIOD_GRID
            .iter()
            .map(|&k| ww(base, &format!("k{k}"), format!("K={k}"), |c| c.controller.probe_period = k))
            .collect(),
        PresetName::ComponentAblation => component_ablation(base),
        PresetName::DirichletRobustness => DIRICHLET_GRID
            .iter()
            .flat_map(|&alpha| {
                let skew = |cfg: &mut ExperimentConfig| {
                    let seed = cfg.dataset.skew.map_or(0, |s| s.seed);
                    cfg.dataset.skew = Some(SkewSpec { alpha, seed });
                };
                let mut f = fixed(base, base.trainer.c0);
                skew(&mut f.config);
                f.label = format!("dpsgd_alpha{alpha}");
                f.setting = format!("alpha={alpha}");
                let w = ww(base, &format!("alpha{alpha}"), format!("alpha={alpha}"), skew);
                [f, w]
            })
            .collect(),
        PresetName::RuntimeOverhead => {
            sequential = true;
            let f = fixed(base, base.trainer.c0);
            let w = ww(base, "k50", "K=50".into(), |c| c.controller.probe_period = 50);
            vec![f, w]
        }
    };
    Preset {
        name,
        entries,
        sequential,
    }
}

/// Baseline, full method, then one-component-at-a-time variants.
fn component_ablation(base: &ExperimentConfig) -> Vec<SweepEntry> {
    let default_probe = base
        .controller
        .probe_layers
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join("+");
    let alt_probe = if base.controller.probe_layers == [LayerRef(0)] {
        LayerRef(1)
    } else {
        LayerRef(0)
    };
    vec![
        fixed(base, base.trainer.c0),
        ww(base, "full", format!("full, probe={default_probe}"), |_| {}),
        ww(base, "beta0", "beta=0".into(), |c| c.controller.beta = 0.0),
        ww(base, "k25", "K=25".into(), |c| c.controller.probe_period = 25),
        ww(base, "k100", "K=100".into(), |c| c.controller.probe_period = 100),
        ww(base, &format!("probe_{alt_probe}"), format!("probe={alt_probe}"), |c| {
            c.controller.probe_layers = vec![alt_probe]
        }),
        ww(base, "kappa0.05", "kappa=0.05".into(), |c| c.controller.kappa = 0.05),
        ww(base, "kappa0.3", "kappa=0.30".into(), |c| c.controller.kappa = 0.30),
        ww(base, "noclamp", "no clamp".into(), |c| c.controller.clamp_enabled = false),
        ww(base, "clamp1_3", "clamp [1,3]".into(), |c| {
            c.controller.c_min = 1.0;
            c.controller.c_max = 3.0;
        }),
    ]
}
