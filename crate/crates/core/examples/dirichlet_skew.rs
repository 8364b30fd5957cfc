//! Class proportions after Dirichlet label skew at several concentrations.

use specclip::harness::dirichlet_skew;
use specclip::linalg::{RngStream, StreamId};
use specclip::Result;

fn main() -> Result<()> {
    let classes = 10;
    let labels: Vec<usize> = (0..8000).map(|i| i % classes).collect();
    let mut rng = RngStream::new(7, StreamId::Custom(1));
    for alpha in [100.0, 1.0, 0.5, 0.3, 0.1] {
        let kept = dirichlet_skew(&labels, classes, alpha, &mut rng)?;
        let mut counts = vec![0usize; classes];
        for &i in &kept {
            counts[labels[i]] += 1;
        }
        let shares: Vec<String> = counts.iter().map(|&c| format!("{:.2}", c as f64 / kept.len() as f64)).collect();
        println!("alpha {alpha:>5}: kept {:>4}  [{}]", kept.len(), shares.join(" "));
    }
    Ok(())
}
