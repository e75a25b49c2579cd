//! Dense linear algebra for the small systems that show up in chain analysis.
//!
//! Matrices are `Vec<Vec<f64>>` in row-major order. Everything here is
//! Gaussian elimination with partial pivoting; the systems are at most a few
//! hundred states, so nothing fancier is warranted.

use crate::error::{Error, Result};

pub type Mat = Vec<Vec<f64>>;

/// Condition numbers above this are logged as a warning.
pub const COND_WARN: f64 = 1e12;

const PIVOT_EPS: f64 = 1e-300;

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            debug_assert_eq!(row.len(), inner);
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Row vector times matrix.
pub fn vec_mat(v: &[f64], m: &Mat) -> Vec<f64> {
    let cols = m.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (vi, row) in v.iter().zip(m) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o += vi * x;
        }
    }
    out
}

fn mat_vec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &Mat) -> f64 {
    m.iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization with partial pivoting, stored compactly.
struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Mat) -> Result<Lu> {
        let n = a.len();
        if a.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix is not square".into()));
        }
        let scale = norm_inf(a).max(1.0);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, maxabs) = (k..n)
                .map(|i| (i, lu[i][k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if maxabs <= PIVOT_EPS.max(scale * 1e-15) {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            lu.swap(k, p);
            perm.swap(k, p);
            let pivot = lu[k][k];
            for i in k + 1..n {
                let f = lu[i][k] / pivot;
                lu[i][k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i][j] -= f * lu[k][j];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

/// Solves `a x = b` with one step of iterative refinement.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.len() {
        return Err(Error::Dimension(format!(
            "rhs has length {}, system has {} rows",
            b.len(),
            a.len()
        )));
    }
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    let ax = mat_vec(a, &x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let d = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(d) {
        *xi += di;
    }
    Ok(x)
}

/// Inverse plus its infinity-norm condition number.
pub fn inverse(a: &Mat) -> Result<(Mat, f64)> {
    let n = a.len();
    let lu = Lu::factor(a)?;
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(lu.solve(&e));
    }
    let inv: Mat = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
    let cond = norm_inf(a) * norm_inf(&inv);
    if cond > COND_WARN {
        log::warn!("ill-conditioned {n}x{n} inverse, condition number {cond:.3e}");
    }
    Ok((inv, cond))
}
