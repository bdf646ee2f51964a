//! Thin singular value decomposition of small dense matrices by one-sided
//! Jacobi rotations.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DegenerateMatrix("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// A = U·diag(σ)·Vᵀ with σ descending; U is rows×k, V is cols×k, k = min(rows, cols).
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// Rank-`k` reconstruction.
    pub fn reconstruct(&self, k: usize) -> Matrix {
        let mut out = Matrix::zeros(self.u.rows, self.v.rows);
        for c in 0..k.min(self.sigma.len()) {
            for i in 0..self.u.rows {
                let ui = self.u.get(i, c) * self.sigma[c];
                for j in 0..self.v.rows {
                    let val = out.get(i, j) + ui * self.v.get(j, c);
                    out.set(i, j, val);
                }
            }
        }
        out
    }
}

/// One-sided Jacobi SVD. Each left singular vector is signed so that its
/// largest-magnitude entry is positive (ties go to the first such entry).
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::DegenerateMatrix("empty matrix".into()));
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateMatrix("matrix has non-finite entries".into()));
    }
    if a.rows < a.cols {
        let t = svd_tall(&a.transpose())?;
        return Ok(fix_signs(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }));
    }
    Ok(fix_signs(svd_tall(a)?))
}

fn svd_tall(a: &Matrix) -> Result<Svd> {
    let (m, n) = (a.rows, a.cols);
    // work on columns of A (stored as rows of the transpose for locality)
    let mut w = a.transpose();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let eps = 1e-15;
    // columns below this squared norm are rounding noise and are left alone
    let floor = (1e-15 * a.frobenius_sq().sqrt()).powi(2);
    let mut converged = false;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    let (x, y) = (w.get(p, k), w.get(q, k));
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 || alpha <= floor || beta <= floor {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (w.get(p, k), w.get(q, k));
                    w.set(p, k, c * x - s * y);
                    w.set(q, k, s * x + c * y);
                }
                for k in 0..n {
                    let (x, y) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * x - s * y);
                    v.set(k, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence("Jacobi SVD did not converge".into()));
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| w.row(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let scale = norms.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (c, &j) in order.iter().enumerate() {
        let s = norms[j];
        let negligible = s <= 1e-13 * scale || s == 0.0;
        sigma.push(if negligible { 0.0 } else { s });
        for k in 0..m {
            u.set(k, c, if negligible { 0.0 } else { w.get(j, k) / s });
        }
        for k in 0..n {
            vs.set(k, c, v.get(k, j));
        }
    }
    complete_basis(&mut u, &sigma);
    Ok(Svd { u, sigma, v: vs })
}

/// Fills the columns of U that belong to zero singular values with
/// orthonormal vectors (Gram–Schmidt against the unit vectors).
fn complete_basis(u: &mut Matrix, sigma: &[f64]) {
    let m = u.rows;
    for c in 0..sigma.len() {
        if sigma[c] > 0.0 {
            continue;
        }
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for prev in 0..u.cols {
                if prev == c || (prev > c && sigma[prev] == 0.0) {
                    continue;
                }
                let dot: f64 = (0..m).map(|k| cand[k] * u.get(k, prev)).sum();
                for (k, x) in cand.iter_mut().enumerate() {
                    *x -= dot * u.get(k, prev);
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (k, x) in cand.iter().enumerate() {
                    u.set(k, c, x / norm);
                }
                break;
            }
        }
    }
}

fn fix_signs(mut s: Svd) -> Svd {
    for c in 0..s.sigma.len() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for i in 0..s.u.rows {
            let x = s.u.get(i, c);
            if x.abs() > best.abs() + 1e-12 {
                best = x;
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            for i in 0..s.u.rows {
                let x = s.u.get(i, c);
                s.u.set(i, c, -x);
            }
            for j in 0..s.v.rows {
                let x = s.v.get(j, c);
                s.v.set(j, c, -x);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &Matrix) {
        let s = svd(a).unwrap();
        let r = s.reconstruct(s.sigma.len());
        for (x, y) in r.data.iter().zip(&a.data) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        let k = s.sigma.len();
        for p in 0..k {
            for q in 0..k {
                let d: f64 = (0..s.v.rows).map(|i| s.v.get(i, p) * s.v.get(i, q)).sum();
                assert!((d - f64::from(u8::from(p == q))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reconstructs_tall_and_wide() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 10.0],
            vec![-1.0, 0.5, 2.0],
        ])
        .unwrap();
        check(&a);
        check(&a.transpose());
    }

    #[test]
    fn diagonal_values() {
        let a = Matrix::from_rows(&[vec![0.0, 3.0], vec![-4.0, 0.0]]).unwrap();
        let s = svd(&a).unwrap();
        assert!((s.sigma[0] - 4.0).abs() < 1e-14);
        assert!((s.sigma[1] - 3.0).abs() < 1e-14);
        // sign convention
        assert!(s.u.get(1, 0) > 0.0);
    }

    #[test]
    fn rank_deficient() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let s = svd(&a).unwrap();
        assert_eq!(s.sigma[1], 0.0);
        check(&a);
    }
}
