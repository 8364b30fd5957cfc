//! Singular values of a random Gaussian matrix next to the Marchenko–Pastur
//! edges they should approach.

use specclip::linalg::{singular_values, Matrix, RngStream, StreamId};

fn main() {
    let (rows, cols) = (200, 400);
    let mut rng = RngStream::new(1, StreamId::Custom(0));
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    let w = Matrix::new(rows, cols, data).expect("shape matches data");

    let s = singular_values(&w);
    let ratio = rows as f64 / cols as f64;
    let scale = cols as f64;
    // eigenvalues of WWᵀ/cols live in [(1-√r)², (1+√r)²]
    let lo = (1.0 - ratio.sqrt()).powi(2);
    let hi = (1.0 + ratio.sqrt()).powi(2);
    let top = s[0] * s[0] / scale;
    let bottom = s[s.len() - 1].powi(2) / scale;
    println!("{rows}x{cols} Gaussian matrix");
    println!("largest  eigenvalue {top:.4}  (edge {hi:.4})");
    println!("smallest eigenvalue {bottom:.4}  (edge {lo:.4})");
    let energy: f64 = s.iter().map(|v| v * v).sum();
    let fro: f64 = w.as_slice().iter().map(|v| v * v).sum();
    println!("Σσ² = {energy:.6}, ‖W‖²_F = {fro:.6}");
}
