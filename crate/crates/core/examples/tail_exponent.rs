//! Hill fits of the eigenvalue tail: synthetic power laws, then the layers of
//! a freshly initialised MLP.

use specclip::linalg::{RngStream, StreamId};
use specclip::model::{self, LayerRef, MlpConfig, ProbeSpec};
use specclip::spectral::{fit_tail_exponent, ww_probe, TailFitRule};
use specclip::Result;

fn pareto(n: usize, zeta: f64) -> Vec<f64> {
    (1..=n).map(|i| ((i as f64 - 0.5) / n as f64).powf(-1.0 / (zeta - 1.0))).collect()
}

fn main() -> Result<()> {
    for zeta in [2.5, 4.0, 5.5] {
        let r = fit_tail_exponent(&pareto(2000, zeta), &TailFitRule::top_k(100))?;
        println!("power law ζ={zeta}: fitted {:.3} from the top {}", r.zeta, r.tail_size);
    }

    let cfg = MlpConfig::desk_default(32, 10);
    let p = model::init_params(&cfg, &mut RngStream::new(0, StreamId::Init))?;
    let spec = ProbeSpec {
        layers: (0..cfg.num_layers()).map(LayerRef).collect(),
    };
    let reading = ww_probe(&p, &spec, &TailFitRule::default())?;
    for l in &reading.layers {
        println!("fc{}: ζ = {:.3} (k = {})", l.layer.map_or(0, |r| r.0 + 1), l.zeta, l.tail_size);
    }
    for f in &reading.failed {
        println!("fc{}: too few eigenvalues to fit", f.0 + 1);
    }
    println!("median over layers: {:.3}", reading.zeta);
    Ok(())
}
