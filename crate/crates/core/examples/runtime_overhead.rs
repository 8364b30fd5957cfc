//! Wall-clock cost of the spectral probe at K=50 on the desk MLP.

use specclip::harness::{expand, run_sweep, ExperimentConfig, Method, PresetName};
use specclip::Result;

fn main() -> Result<()> {
    let preset = expand(PresetName::RuntimeOverhead, &ExperimentConfig::desk_default());
    let out = run_sweep(&preset, 3, 0, None)?;
    for r in &out.runs {
        println!("{:<10} seed {} total {:.3}s train {:.3}s probe share {:.2}%", r.method.to_string(), r.seed,
            r.total_secs, r.train_secs, r.probe_share_pct);
    }
    let best = |m: Method| out.runs.iter().filter(|r| r.method == m).map(|r| r.total_secs).fold(f64::INFINITY, f64::min);
    let overhead = 100.0 * (best(Method::WwDpSgd) / best(Method::DpSgd) - 1.0);
    println!("overhead (best of 3): {overhead:.2}%");
    Ok(())
}
