//! Small dense linear-algebra kernels used by the solver.
//!
//! The systems factored here are tiny (K x K by default, a few hundred square
//! in the dense test path), so a plain Cholesky factorization is all we need.

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Stores the lower-triangular factor L with A = L * L^T.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major `n x n` matrix `a`. Returns `None` if the matrix
    /// is not positive definite.
    pub(crate) fn new(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix storage must be n*n");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for p in 0..j {
                    sum -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// Solves A x = b given the stored factorization.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let n = self.n;
        let l = &self.l;
        // Forward substitution: L y = b
        let mut x = b.to_vec();
        for i in 0..n {
            let mut sum = x[i];
            for p in 0..i {
                sum -= l[i * n + p] * x[p];
            }
            x[i] = sum / l[i * n + i];
        }
        // Back substitution: L^T x = y
        for i in (0..n).rev() {
            let mut sum = x[i];
            for p in (i + 1)..n {
                sum -= l[p * n + i] * x[p];
            }
            x[i] = sum / l[i * n + i];
        }
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: solve A x = b by Gaussian elimination with
    /// partial pivoting.
    fn gauss_solve(a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; n * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                m[i * (n + 1) + j] = a[i * n + j];
            }
            m[i * (n + 1) + n] = b[i];
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| {
                    m[r1 * (n + 1) + col]
                        .abs()
                        .total_cmp(&m[r2 * (n + 1) + col].abs())
                })
                .unwrap();
            if pivot != col {
                for j in 0..=n {
                    m.swap(col * (n + 1) + j, pivot * (n + 1) + j);
                }
            }
            let d = m[col * (n + 1) + col];
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = m[row * (n + 1) + col] / d;
                for j in col..=n {
                    m[row * (n + 1) + j] -= factor * m[col * (n + 1) + j];
                }
            }
        }
        (0..n)
            .map(|i| m[i * (n + 1) + n] / m[i * (n + 1) + i])
            .collect()
    }

    fn spd_matrix(n: usize, seed: u64) -> Vec<f64> {
        // A = B^T B + n I is SPD for any B.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let b: Vec<f64> = (0..n * n).map(|_| next()).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..n {
                    s += b[p * n + i] * b[p * n + j];
                }
                a[i * n + j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        a
    }

    #[test]
    fn cholesky_matches_gauss_elimination() {
        for n in [1, 2, 5, 12] {
            let a = spd_matrix(n, n as u64);
            let b: Vec<f64> = (0..n).map(|i| (i as f64) - 1.5).collect();
            let chol = Cholesky::new(&a, n).expect("SPD matrix must factor");
            let x = chol.solve(&b);
            let y = gauss_solve(&a, n, &b);
            for (xi, yi) in x.iter().zip(&y) {
                assert!((xi - yi).abs() < 1e-9, "n={n}: {xi} vs {yi}");
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0]; // eigenvalues 3, -1
        assert!(Cholesky::new(&a, 2).is_none());
    }
}
