use alloc::vec;
use alloc::vec::Vec;

use super::Shape;

/// Dense column-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn from_row_vecs(rows: &[Vec<f64>]) -> Self {
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&refs)
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Interpret a flat expression value as a matrix (vectors are columns).
    pub fn from_expr_value(shape: Shape, data: Vec<f64>) -> Self {
        Matrix { rows: shape.rows(), cols: shape.cols(), data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * v` for a column-major `v` with `self.cols` rows and `k` columns.
    pub fn mul_flat(&self, v: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * k];
        for c in 0..k {
            for j in 0..self.cols {
                let x = v[j + c * self.cols];
                if x == 0.0 {
                    continue;
                }
                for i in 0..self.rows {
                    out[i + c * self.rows] += self.get(i, j) * x;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.mul_flat(v, 1)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        Matrix { rows: self.rows, cols: other.cols, data: self.mul_flat(&other.data, other.cols) }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }
}

/// Packed upper triangle (column-major) of a symmetric `n x n` matrix stored
/// flat, with off-diagonal entries scaled by `sqrt(2)`.
pub fn svec(n: usize, data: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let v = data[i + j * n];
            out.push(if i == j { v } else { core::f64::consts::SQRT_2 * v });
        }
    }
    out
}

/// Index pairs `(i, j)` with `i <= j` in svec order.
pub fn svec_entries(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            out.push((i, j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_transpose() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 4.0]);
        let t = a.transpose();
        assert_eq!(t.get(0, 1), 3.0);
        let p = a.matmul(&Matrix::identity(2));
        assert_eq!(p, a);
    }

    #[test]
    fn svec_is_isometric() {
        let m = [1.0, 2.0, 2.0, 5.0];
        let v = svec(2, &m);
        let frob: f64 = m.iter().map(|x| x * x).sum();
        let packed: f64 = v.iter().map(|x| x * x).sum();
        assert!((frob - packed).abs() < 1e-12);
        assert_eq!(svec_entries(2), vec![(0, 0), (0, 1), (1, 1)]);
    }
}
