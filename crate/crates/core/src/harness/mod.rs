//! Experiment plumbing: configuration, datasets, preset grids, sweeps,
//! on-disk logs and the command line.

pub mod cli;
pub mod config;
pub mod data;
pub mod mnist;
pub mod presets;
pub mod report;
pub mod sweep;

pub use cli::run_cli;
pub use config::ExperimentConfig;
pub use data::{dirichlet_skew, load_dataset, make_synthetic_blobs, DataSource, DatasetSpec, Normalization, SkewSpec};
pub use mnist::load_mnist_idx;
pub use presets::{expand, Method, Preset, PresetName, SweepEntry};
pub use sweep::{run_sweep, SweepOutcome};
