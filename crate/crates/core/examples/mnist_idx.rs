//! Loads an MNIST subset from a directory holding the four IDX files and
//! trains the controlled model on it.
//!
//! cargo run --release --example mnist_idx -- /path/to/mnist

use std::path::PathBuf;

use specclip::harness::{load_mnist_idx, ExperimentConfig};
use specclip::model::MlpConfig;
use specclip::trainer;
use specclip::{Error, Result};

fn main() -> Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .ok_or_else(|| Error::Config("usage: mnist_idx <dir with the IDX files>".into()))?
        .into();
    let (train, test) = load_mnist_idx(&dir, Some(5000), Some(1000))?;
    println!("{} train / {} test examples, {} features", train.len(), test.len(), train.dim());

    let mut cfg = ExperimentConfig::desk_default();
    cfg.dataset.n_train = train.len();
    cfg.dataset.feature_dim = train.dim();
    let mut train_cfg = cfg.train_config()?;
    train_cfg.model = MlpConfig::desk_default(train.dim(), 10);
    let log = trainer::train(&train_cfg, &train, &test)?.log;
    println!("epsilon {:.3}, test accuracy {:.4}, final C {:.4}", log.epsilon, log.final_accuracy, log.final_c);
    Ok(())
}
