//! Dense linear algebra and seeded randomness.

mod matrix;
mod rng;
mod svd;

pub use matrix::Matrix;
pub use rng::{gaussian_vector, RngStream, StreamId};
pub use svd::singular_values;

/// Euclidean norm of `v`.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_basics() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(l2_norm(&[0.0; 10]), 0.0);
        assert_eq!(l2_norm(&[]), 0.0);
    }
}
