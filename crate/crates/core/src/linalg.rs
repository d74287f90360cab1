//! Small dense linear algebra used by atom validation and factorization.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::Matrix;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as the
/// columns of a column-major `n x n` matrix.
pub fn sym_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows;
    assert_eq!(n, m.cols, "sym_eigen needs a square matrix");
    let mut a: Vec<f64> = m.data.clone();
    // symmetrize; callers pass nominally symmetric matrices
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[i + j * n] + a[j + i * n]);
            a[i + j * n] = avg;
            a[j + i * n] = avg;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i + i * n] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| a[i + j * n] * a[i + j * n])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p + q * n];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p + p * n];
                let aqq = a[q + q * n];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k + p * n];
                    let akq = a[k + q * n];
                    a[k + p * n] = c * akp - s * akq;
                    a[k + q * n] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p + k * n];
                    let aqk = a[q + k * n];
                    a[p + k * n] = c * apk - s * aqk;
                    a[q + k * n] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k + p * n];
                    let vkq = v[k + q * n];
                    v[k + p * n] = c * vkp - s * vkq;
                    v[k + q * n] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i + i * n]).collect();
    (eig, Matrix { rows: n, cols: n, data: v })
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.rows == 0 {
        return 0.0;
    }
    sym_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// A factor `F` (r x n, r = number of retained eigenvalues) with
/// `FᵀF = M` for a PSD matrix `M`. Eigenvalues below `floor` are dropped.
pub fn psd_factor(m: &Matrix, floor: f64) -> Matrix {
    let n = m.rows;
    let (eig, vecs) = sym_eigen(m);
    let kept: Vec<usize> = (0..n).filter(|&i| eig[i] > floor).collect();
    let r = kept.len();
    let mut f = Matrix::zeros(r, n);
    for (row, &k) in kept.iter().enumerate() {
        let s = libm::sqrt(eig[k]);
        for j in 0..n {
            f.set(row, j, s * vecs.get(j, k));
        }
    }
    f
}

/// Solve a dense square system by Gaussian elimination with partial
/// pivoting. Returns `None` for (numerically) singular systems.
pub fn solve_dense(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
    let mut rhs = b.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in (col + 1)..n {
            let factor = m[r][col] / m[col][col];
            if factor != 0.0 {
                for c in col..n {
                    m[r][c] -= factor * m[col][c];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_2x2() {
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (mut eig, _) = sym_eigen(&m);
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn factor_reconstructs() {
        let m = Matrix::from_rows(&[&[4.0, 2.0, 0.0], &[2.0, 3.0, 1.0], &[0.0, 1.0, 1.0]]);
        let f = psd_factor(&m, 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..f.rows).map(|k| f.get(k, i) * f.get(k, j)).sum();
                assert!((v - m.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_system() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(solve_dense(&a, &[1.0, 2.0]).is_none());
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(solve_dense(&a, &[3.0, 4.0]).unwrap(), vec![4.0, 3.0]);
    }
}
