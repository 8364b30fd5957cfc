//! Fixed-threshold DP-SGD against the controlled variant over the C grid,
//! at matched privacy. Seeds from the first argument (default 1).

use specclip::harness::sweep::format_summary;
use specclip::harness::{expand, run_sweep, ExperimentConfig, PresetName};
use specclip::Result;

fn main() -> Result<()> {
    let repeats = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let preset = expand(PresetName::FixedCSweep, &ExperimentConfig::desk_default());
    let out = run_sweep(&preset, repeats, 0, None)?;
    println!("matched privacy: q={:.4} sigma={} T={} delta={}, epsilon {:.3}", out.privacy.q, out.privacy.sigma,
        out.privacy.total_steps, out.privacy.delta, out.runs[0].epsilon);
    print!("{}", format_summary(&out.summary));
    for method in [specclip::harness::Method::DpSgd, specclip::harness::Method::WwDpSgd] {
        let acc: Vec<f64> = out.summary.iter().filter(|s| s.method == method).map(|s| s.accuracy_mean).collect();
        let spread = acc.iter().copied().fold(f64::MIN, f64::max) - acc.iter().copied().fold(f64::MAX, f64::min);
        println!("{method}: accuracy range over C {:.2} points", 100.0 * spread);
    }
    Ok(())
}
