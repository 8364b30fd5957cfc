//! Singular values by one-sided (Hestenes) Jacobi rotations.
//!
//! The matrix is viewed as `p = min(rows, cols)` column vectors of length
//! `max(rows, cols)` (the columns of `M` or of `Mᵀ`). Pairs of columns are
//! rotated until every pair is numerically orthogonal; the singular values are
//! then the column norms. Rotations are orthogonal, so the Frobenius norm is
//! preserved up to rounding.

use super::matrix::Matrix;

/// Relative orthogonality threshold for a column pair.
const ROTATION_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// Singular values of `m`, sorted in descending order. Returns
/// `min(rows, cols)` values.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let (count, len) = if rows >= cols { (cols, rows) } else { (rows, cols) };

    // columns[j] holds column j of M (rows >= cols) or row j of M.
    let mut columns: Vec<Vec<f64>> = if rows >= cols {
        (0..cols)
            .map(|c| (0..rows).map(|r| m.get(r, c)).collect())
            .collect()
    } else {
        (0..rows).map(|r| m.row(r).to_vec()).collect()
    };
    debug_assert!(columns.iter().all(|c| c.len() == len));

    let mut norms: Vec<f64> = columns.iter().map(|c| dot(c, c)).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..count {
            for j in (i + 1)..count {
                let alpha = norms[i];
                let beta = norms[j];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&columns[i], &columns[j]);
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;

                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                let (left, right) = columns.split_at_mut(j);
                let (ci, cj) = (&mut left[i], &mut right[0]);
                for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
                    let x = *a;
                    let y = *b;
                    *a = c * x - s * y;
                    *b = s * x + c * y;
                }
                norms[i] = dot(ci, ci);
                norms[j] = dot(cj, cj);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut values: Vec<f64> = norms.iter().map(|n| n.sqrt()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(singular_values(&Matrix::identity(3)), vec![1.0, 1.0, 1.0]);
        assert_eq!(singular_values(&Matrix::from_diag(&[3.0, 4.0])), vec![4.0, 3.0]);
    }

    #[test]
    fn zero_matrix_and_rank_one() {
        let z = Matrix::zeros(4, 2);
        assert_eq!(singular_values(&z), vec![0.0, 0.0]);
        // outer product [1,2,2]^T [3,4] has one singular value 3*5 = 15
        let m = Matrix::new(3, 2, vec![3., 4., 6., 8., 6., 8.]).unwrap();
        let s = singular_values(&m);
        assert!((s[0] - 15.0).abs() < 1e-12);
        assert!(s[1].abs() < 1e-7);
    }

    #[test]
    fn wide_matrix_uses_rows() {
        let m = Matrix::new(1, 3, vec![2.0, 0.0, 0.0]).unwrap();
        assert_eq!(singular_values(&m), vec![2.0]);
    }
}
