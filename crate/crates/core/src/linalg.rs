//! Dense linear algebra for the small matrices this domain produces
//! (dimensions rarely above 16): products, SPD solves via Cholesky, and
//! minimum eigenvalues of symmetric matrices via cyclic Jacobi rotations.
//!
//! Cholesky is used deliberately instead of LU so that a metric matrix which
//! fails positive definiteness is rejected loudly rather than silently
//! inverted. No general (non-symmetric) eigensolver is provided.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::num;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { context: "Matrix::new" });
        }
        if !num::all_finite(&data) {
            return Err(Error::NonFiniteState { t: f64::NAN });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { context: "Matrix::from_rows" });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Matrix::new(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { context: "matmul" });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, Error> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch { context: "mul_vec" });
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = num::dot(&self.data[i * self.cols..(i + 1) * self.cols], v);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { context: "add" });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { context: "sub" });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| s * v).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(num::abs(*v)))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Worst asymmetry `max |A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max(num::abs(self.get(i, j) - self.get(j, i)));
            }
        }
        worst
    }
}

/// Symmetry tolerance used by the SPD solve and the eigensolver:
/// `1e-10 * max |A_ij|`.
fn check_symmetric(a: &Matrix, context: &'static str) -> Result<(), Error> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { context });
    }
    let tol = 1e-10 * a.norm_max();
    let asym = a.max_asymmetry();
    if asym > tol {
        return Err(Error::NotSymmetric { max_asym: asym, tol });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(a: &Matrix) -> Result<Matrix, Error> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot_index: i, pivot: sum });
                }
                l.set(i, i, num::sqrt(sum));
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive-definite `A` via Cholesky.
///
/// Rejects asymmetric `A` (tolerance `1e-10 * max|A|`) and non-SPD `A`
/// (first non-positive pivot). The residual satisfies
/// `max|A X - B| <= 1e-10 * (1 + max|B|)` at the matrix sizes this crate
/// works with.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix, Error> {
    check_symmetric(a, "spd_solve")?;
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch { context: "spd_solve" });
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let k = b.cols();
    let mut x = Matrix::zeros(n, k);
    for col in 0..k {
        // forward: L y = b
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b.get(i, col);
            for j in 0..i {
                sum -= l.get(i, j) * y[j];
            }
            y[i] = sum / l.get(i, i);
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut sum = y[i];
            for j in (i + 1)..n {
                sum -= l.get(j, i) * x.get(j, col);
            }
            x.set(i, col, sum / l.get(i, i));
        }
    }
    Ok(x)
}

/// Convenience: solves `A x = b` for a vector right-hand side.
pub fn spd_solve_vec(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, Error> {
    let x = spd_solve(a, &Matrix::column(b))?;
    Ok(x.data().to_vec())
}

/// Off-diagonal Frobenius norm, the Jacobi convergence measure.
fn off_norm(a: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    num::sqrt(s)
}

/// Minimum eigenvalue of a symmetric matrix via cyclic Jacobi rotations.
///
/// Sweeps run until the off-diagonal norm falls below `1e-12` (scaled by the
/// matrix magnitude), which delivers eigenvalues to well inside the
/// `1e-9 * (1 + max|A|)` contract. Jacobi converges unconditionally on
/// symmetric input, which is why no general eigensolver exists here.
pub fn sym_min_eig(a: &Matrix) -> Result<f64, Error> {
    check_symmetric(a, "sym_min_eig")?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::DimensionMismatch { context: "sym_min_eig" });
    }
    let mut m = a.clone();
    let tol = 1e-12 * (1.0 + a.norm_max());
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        if off_norm(&m) < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if num::abs(apq) < tol / (n * n) as f64 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // rotation angle annihilating A[p][q]
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + num::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + num::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / num::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut min = m.get(0, 0);
    for i in 1..n {
        min = min.min(m.get(i, i));
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn spd_solve_identity() {
        let a = Matrix::identity(2);
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let x = spd_solve(&a, &b).unwrap();
        assert_eq!(x.data(), &[3.0, 4.0]);
    }

    #[test]
    fn spd_solve_diagonal_inverse() {
        let a = Matrix::diag(&[4.0, 9.0]);
        let x = spd_solve(&a, &Matrix::identity(2)).unwrap();
        assert_close(x.get(0, 0), 0.25, 1e-15);
        assert_close(x.get(1, 1), 1.0 / 9.0, 1e-15);
        assert_close(x.get(0, 1), 0.0, 1e-15);
        assert_close(x.get(1, 0), 0.0, 1e-15);
    }

    #[test]
    fn spd_solve_two_by_two() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let x = spd_solve(&a, &b).unwrap();
        assert_close(x.get(0, 0), 1.0 / 3.0, 1e-14);
        assert_close(x.get(1, 0), 1.0 / 3.0, 1e-14);
    }

    #[test]
    fn spd_solve_rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let b = Matrix::identity(2);
        assert!(matches!(spd_solve(&a, &b), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let b = Matrix::identity(2);
        assert!(matches!(spd_solve(&a, &b), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn min_eig_identity() {
        assert_close(sym_min_eig(&Matrix::identity(3)).unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn min_eig_diagonal() {
        assert_close(sym_min_eig(&Matrix::diag(&[1.0, 3.0, 7.0])).unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn min_eig_two_by_two() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_close(sym_min_eig(&a).unwrap(), 1.0, 1e-10);
    }

    #[test]
    fn min_eig_rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_min_eig(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    /// Deterministic xorshift for test matrices.
    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_matrix(n: usize, seed: u64) -> Matrix {
        let mut s = seed;
        let data = (0..n * n).map(|_| splitmix(&mut s)).collect();
        Matrix::new(n, n, data).unwrap()
    }

    /// Orthogonal matrix composed of Jacobi rotations with pseudo-random
    /// angles.
    fn random_orthogonal(n: usize, seed: u64) -> Matrix {
        let mut q = Matrix::identity(n);
        let mut s = seed;
        for p in 0..n {
            for r in (p + 1)..n {
                let angle = splitmix(&mut s) * core::f64::consts::PI;
                let (c, sn) = (crate::num::cos(angle), crate::num::sin(angle));
                let mut rot = Matrix::identity(n);
                rot.set(p, p, c);
                rot.set(p, r, -sn);
                rot.set(r, p, sn);
                rot.set(r, r, c);
                q = q.matmul(&rot).unwrap();
            }
        }
        q
    }

    proptest! {
        #[test]
        fn spd_solve_residual_small(seed in 0u64..500, n in 1usize..8) {
            // A = M^T M + I is SPD for any M.
            let m = random_matrix(n, seed);
            let a = m.transpose().matmul(&m).unwrap().add(&Matrix::identity(n)).unwrap();
            let x = spd_solve(&a, &Matrix::identity(n)).unwrap();
            let resid = a.matmul(&x).unwrap().sub(&Matrix::identity(n)).unwrap();
            prop_assert!(resid.norm_max() <= 1e-8, "residual {}", resid.norm_max());
        }

        #[test]
        fn min_eig_orthogonal_similarity(seed in 0u64..500, n in 2usize..8) {
            let mut s = seed.wrapping_mul(17).wrapping_add(3);
            let d: alloc::vec::Vec<f64> = (0..n).map(|_| splitmix(&mut s) * 5.0).collect();
            let q = random_orthogonal(n, seed);
            let a = q.transpose().matmul(&Matrix::diag(&d)).unwrap().matmul(&q).unwrap();
            // symmetrize away rounding
            let a = a.add(&a.transpose()).unwrap().scale(0.5);
            let expected = d.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            let got = sym_min_eig(&a).unwrap();
            prop_assert!((got - expected).abs() <= 1e-8, "{got} vs {expected}");
        }

        #[test]
        fn min_eig_shift_invariance(seed in 0u64..500, n in 2usize..8, c in -3.0f64..3.0) {
            let m = random_matrix(n, seed);
            let a = m.add(&m.transpose()).unwrap().scale(0.5);
            let shifted = a.add(&Matrix::identity(n).scale(c)).unwrap();
            let lhs = sym_min_eig(&shifted).unwrap();
            let rhs = sym_min_eig(&a).unwrap() + c;
            prop_assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
        }
    }
}
