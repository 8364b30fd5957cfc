//! Feeds the clip controller a scripted exponent sequence and prints how C
//! responds: above the zone, inside it, then below it.

use specclip::controller::{control_step, init_state, ControllerConfig};
use specclip::Result;

fn main() -> Result<()> {
    let cfg = ControllerConfig {
        beta: 0.8,
        ..ControllerConfig::default()
    };
    let mut state = init_state(&cfg, 1.0)?;
    let readings = [7.0; 15].iter().chain(&[4.2; 10]).chain(&[1.5; 15]).copied();
    println!("{:>5} {:>6} {:>7} {:>7} {:>8}", "probe", "zeta", "zeta^", "phi", "C");
    for (m, zeta) in readings.enumerate() {
        let (next, out) = control_step(&state, zeta, &cfg);
        let mark = match out.clamped {
            Some(side) => format!(" clamped {side:?}"),
            None => String::new(),
        };
        println!("{:>5} {:>6.2} {:>7.3} {:>7.3} {:>8.4}{mark}", m + 1, zeta, next.zeta_hat, out.phi, out.c_next);
        state = next;
    }
    Ok(())
}
