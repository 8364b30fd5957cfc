//! One DP-SGD step on a toy batch: Poisson sampling, clipping, noise.

use specclip::dp::{clip_gradient, noisy_average, poisson_subsample};
use specclip::linalg::{l2_norm, RngStream, StreamId};
use specclip::model::{Batch, MlpConfig};
use specclip::{model, Result};

fn main() -> Result<()> {
    let mut data_rng = RngStream::new(3, StreamId::Data);
    let (n, dim, classes) = (500, 8, 3);
    let features = (0..n * dim).map(|_| data_rng.standard_normal()).collect();
    let labels = (0..n).map(|i| i % classes).collect();
    let data = Batch::new(dim, features, labels)?;

    let cfg = MlpConfig::desk_default(dim, classes);
    let params = model::init_params(&cfg, &mut RngStream::new(3, StreamId::Init))?;

    let mut sub = RngStream::new(3, StreamId::Subsample);
    let idx = poisson_subsample(n, 0.05, &mut sub);
    println!("sampled {} of {n} examples (expected {})", idx.len(), 0.05 * n as f64);

    let (grads, _) = params.per_example_grads(&data.select(&idx))?;
    let c = 1.0;
    let norms: Vec<f64> = grads.iter_rows().map(l2_norm).collect();
    let clipped = norms.iter().filter(|&&g| g > c).count();
    println!("per-example norms: min {:.3}, max {:.3}; {clipped} rows clipped at C={c}",
        norms.iter().copied().fold(f64::INFINITY, f64::min),
        norms.iter().copied().fold(0.0, f64::max));
    println!("first row after clipping has norm {:.3}", l2_norm(&clip_gradient(grads.row(0), c)));

    let release = noisy_average(&grads, c, 1.1, &mut RngStream::new(3, StreamId::Noise));
    let g = release.g_tilde().expect("non-empty batch");
    println!("released update: dim {}, norm {:.4}, noise std per coordinate {:.4}",
        g.len(), l2_norm(g), 1.1 * c / idx.len() as f64);
    Ok(())
}
