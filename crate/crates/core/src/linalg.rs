//! Small dense symmetric eigenproblems (cyclic Jacobi) and the spectral norm.

use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi on a symmetric matrix. Only the upper triangle is read.
///
/// A rotation is skipped once `|a_pq| <= eps·sqrt(|a_pp a_qq|)`, which gives
/// small eigenvalues of positive definite input to high relative accuracy.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = DMatrix::from_fn(n, n, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] });
    let mut v = DMatrix::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq == 0.0 || apq.abs() <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    SymEigen {
        values: order.iter().map(|&i| a[(i, i)]).collect(),
        vectors: DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]),
    }
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    jacobi_eigen(m).values
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let v = sym_eigenvalues(m);
    (v[0], v[v.len() - 1])
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    extreme_eigenvalues(m).0
}

/// Largest singular value, from the eigenvalues of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.len() == 1 {
        return m[(0, 0)].abs();
    }
    let gram = m.transpose() * m;
    extreme_eigenvalues(&gram).1.max(0.0).sqrt()
}

/// `(G + Gᵀ)/2` and the largest absolute asymmetry `max|G − Gᵀ|`.
pub fn symmetrize(g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = g.nrows();
    let mut asym = 0.0f64;
    let s = DMatrix::from_fn(n, n, |i, j| {
        asym = asym.max((g[(i, j)] - g[(j, i)]).abs());
        0.5 * (g[(i, j)] + g[(j, i)])
    });
    (s, asym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spec_examples() {
        assert_eq!(min_eig(&(DMatrix::identity(2, 2) * 2.0)), 2.0);
        assert_eq!(min_eig(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0])), 1.0);
        let (lo, hi) = extreme_eigenvalues(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_of_rotation_scaled() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-14);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((spectral_norm(&m) - golden).abs() < 1e-14);
    }

    #[test]
    fn graded_positive_definite_keeps_small_eigenvalue() {
        // eigenvalues 1e-14 and about 1: absolute-error methods lose the small one
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1e-8, 1e-8, 1e-14 + 1e-16]);
        let lo = min_eig(&m);
        let exact = {
            let (a, b, c) = (1.0f64, 1e-8f64, 1e-14 + 1e-16);
            // det / larger root, avoiding cancellation
            let big = 0.5 * (a + c + ((a - c).powi(2) + 4.0 * b * b).sqrt());
            (a * c - b * b) / big
        };
        assert!(((lo - exact) / exact).abs() < 1e-6, "{lo} vs {exact}");
    }

    fn sym_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..6).prop_flat_map(|n| {
            prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
                let m = DMatrix::from_vec(n, n, v);
                (&m + m.transpose()) * 0.5
            })
        })
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs(m in sym_matrix()) {
            let e = jacobi_eigen(&m);
            let n = m.nrows();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
            let rec = &e.vectors * d * e.vectors.transpose();
            let scale = m.norm().max(1.0);
            prop_assert!((rec - &m).norm() <= 1e-12 * scale);
            let orth = e.vectors.transpose() * &e.vectors - DMatrix::<f64>::identity(n, n);
            prop_assert!(orth.norm() <= 1e-12);
            prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let trace: f64 = e.values.iter().sum();
            prop_assert!((trace - m.trace()).abs() <= 1e-12 * scale * n as f64);
        }

        #[test]
        fn spectral_norm_bounds(v in prop::collection::vec(-5.0f64..5.0, 9)) {
            let m = DMatrix::from_vec(3, 3, v);
            let s = spectral_norm(&m);
            prop_assert!(s <= m.norm() * (1.0 + 1e-12));
            prop_assert!(s * 3f64.sqrt() >= m.norm() * (1.0 - 1e-12));
            let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
            prop_assert!((&m * &x).norm() <= s * x.norm() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
