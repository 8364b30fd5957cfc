//! ε for a few DP-SGD settings, and the noise multiplier needed for a target.

use specclip::accountant::{epsilon_with_order, sigma_for_epsilon};
use specclip::dp::PrivacyParams;
use specclip::Result;

fn main() -> Result<()> {
    let delta = 1e-5;
    println!("{:>10} {:>6} {:>6} {:>9} {:>6}", "q", "sigma", "T", "epsilon", "order");
    for (q, sigma, steps) in [(256.0 / 60_000.0, 1.1, 1875), (0.032, 1.1, 250), (0.01, 0.8, 5000), (0.01, 4.0, 5000)] {
        let (eps, order) = epsilon_with_order(&PrivacyParams::new(q, sigma, steps, delta)?)?;
        println!("{q:>10.5} {sigma:>6} {steps:>6} {eps:>9.4} {order:>6}");
    }
    for target in [1.0, 3.0, 8.0] {
        let sigma = sigma_for_epsilon(0.032, 250, delta, target, 1e-3)?;
        println!("q=0.032, T=250: sigma {sigma:.4} gives epsilon <= {target}");
    }
    Ok(())
}
