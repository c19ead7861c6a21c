//! Householder QR least squares.

use crate::error::{Error, Result};

pub(crate) struct LeastSquares {
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    /// Diagonal of `(X'X)^-1`.
    pub xtx_inv_diag: Vec<f64>,
}

/// Solves `min ||X b - y||` for a tall design given as columns.
/// A column whose residual norm after orthogonalisation falls below
/// `1e-10` of its original norm marks the design rank deficient.
pub(crate) fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<LeastSquares> {
    let m = columns.len();
    let n = y.len();
    if m == 0 || n < m || columns.iter().any(|c| c.len() != n) {
        return Err(Error::RankDeficient);
    }
    let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let mut r = vec![vec![0.0; m]; m];

    for k in 0..m {
        let sigma = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norms[k] == 0.0 || sigma <= 1e-10 * norms[k] {
            return Err(Error::RankDeficient);
        }
        let alpha = if a[k][k] > 0.0 { -sigma } else { sigma };
        // v = x - alpha e1, stored in place of column k
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let s = 2.0 * v.iter().zip(col.iter()).map(|(p, q)| p * q).sum::<f64>() / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= s * vi;
            }
        };
        for col in a.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut qty[k..]);
        r[k][k] = alpha;
        for j in k + 1..m {
            r[k][j] = a[j][k];
        }
    }

    let mut beta = vec![0.0; m];
    for k in (0..m).rev() {
        let s: f64 = (k + 1..m).map(|j| r[k][j] * beta[j]).sum();
        beta[k] = (qty[k] - s) / r[k][k];
    }
    let fitted = (0..n).map(|i| columns.iter().zip(&beta).map(|(c, b)| c[i] * b).sum()).collect();

    // (X'X)^-1 = R^-1 R^-T; row norms of R^-1 give its diagonal
    let mut rinv = vec![vec![0.0; m]; m];
    for j in 0..m {
        rinv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|l| r[i][l] * rinv[l][j]).sum();
            rinv[i][j] = -s / r[i][i];
        }
    }
    let xtx_inv_diag = (0..m).map(|i| rinv[i][i..].iter().map(|v| v * v).sum()).collect();
    Ok(LeastSquares { beta, fitted, xtx_inv_diag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system() {
        // [[2,1],[1,3]] b = [3,5]  ->  b = (0.8, 1.4)
        let cols = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let ls = least_squares(&cols, &[3.0, 5.0]).unwrap();
        assert!((ls.beta[0] - 0.8).abs() < 1e-14 && (ls.beta[1] - 1.4).abs() < 1e-14);
        // inverse of X'X = [[5,5],[5,10]] has diagonal (0.4, 0.2)
        assert!((ls.xtx_inv_diag[0] - 0.4).abs() < 1e-14 && (ls.xtx_inv_diag[1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn detects_duplicate_column() {
        let x = vec![1.0, 2.0, 4.0, 7.0];
        let cols = vec![vec![1.0; 4], x.clone(), x];
        assert!(matches!(least_squares(&cols, &[1.0, 2.0, 3.0, 4.0]), Err(Error::RankDeficient)));
    }
}
