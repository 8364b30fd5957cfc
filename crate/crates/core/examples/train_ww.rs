//! One controlled run on the desk blobs, compared with the same run at a
//! fixed threshold. Pass a C0 as the first argument (default 0.5).

use specclip::harness::{load_dataset, ExperimentConfig};
use specclip::trainer::{self, timing_report};
use specclip::Result;

fn main() -> Result<()> {
    let c0: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let mut cfg = ExperimentConfig::desk_default();
    cfg.trainer.c0 = c0;
    cfg.trainer.eval_every = Some(50);
    let train_cfg = cfg.train_config()?;
    let (train, test) = load_dataset(&cfg.dataset, train_cfg.seeds.data)?;

    let ww = trainer::train(&train_cfg, &train, &test)?.log;
    let fixed = trainer::train(&train_cfg.fixed_clip(), &train, &test)?.log;

    println!("q={:.4} sigma={} T={} -> epsilon {:.3}", train_cfg.privacy.q, train_cfg.privacy.sigma,
        train_cfg.privacy.total_steps, ww.epsilon);
    println!("{:>6} {:>9} {:>9}", "step", "WW acc", "fixed acc");
    for (a, b) in ww.evals.iter().zip(&fixed.evals) {
        println!("{:>6} {:>9.4} {:>9.4}", a.step, a.accuracy, b.accuracy);
    }
    for r in ww.probe_steps().take(5) {
        println!("probe at step {}: zeta {:.3}, smoothed {:.3}, C {:.4}", r.step, r.zeta_raw.unwrap(), r.zeta_hat, r.c);
    }
    let t = timing_report(&ww, Some(&fixed));
    println!("C: start {c0}, median {:.4}, final {:.4}", ww.median_clip(), ww.final_c);
    println!("probe share {:.2}%, overhead {:.2}%", t.probe_share_pct, t.overhead_pct.unwrap_or(0.0));
    Ok(())
}
