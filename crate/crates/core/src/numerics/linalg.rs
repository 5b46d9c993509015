//! Cholesky factorization, Schur complements and log-determinants.

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Lower-triangular factor L with L·Lᵀ = A.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn into_factor(self) -> DenseMatrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// log det A = 2·Σ log L_ii.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves L y = b in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves Lᵀ x = y in place.
    pub fn backward(&self, y: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// Solves A X = B column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.column(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// A⁻¹ as L⁻ᵀ·L⁻¹, symmetrized.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut linv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.forward(&mut e);
            for i in j..n {
                linv[(i, j)] = e[i];
            }
        }
        let mut inv = linv.transpose_matmul(&linv);
        inv.symmetrize();
        inv
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Fails with [`Error::NotPositiveDefinite`] carrying the first pivot that is
/// not strictly positive.
pub fn cholesky(m: &DenseMatrix) -> Result<Cholesky> {
    if !m.is_square() {
        return Err(Error::ContractViolation(format!(
            "cholesky needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        {
            let rj = l.row(j);
            for k in 0..j {
                d -= rj[k] * rj[k];
            }
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(Cholesky { l })
}

/// log det of an SPD matrix via Cholesky.
pub fn log_det_spd(m: &DenseMatrix) -> Result<f64> {
    Ok(cholesky(m)?.log_det())
}

/// Inverse of an SPD matrix via Cholesky.
pub fn inverse_spd(m: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(cholesky(m)?.inverse())
}

/// Indices in `0..n` not present in the sorted list `keep`.
pub fn complement(n: usize, keep: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &k in keep {
        mask[k] = true;
    }
    (0..n).filter(|&i| !mask[i]).collect()
}

/// m_KK − m_KB·m_BB⁻¹·m_BK, where B is the complement of `keep`.
pub fn schur_complement(m: &DenseMatrix, keep: &[usize]) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::ContractViolation(
            "schur complement of a non-square matrix".into(),
        ));
    }
    let n = m.rows();
    if keep.iter().any(|&k| k >= n) {
        return Err(Error::InvalidInput("keep index out of range".into()));
    }
    let drop = complement(n, keep);
    let m_kk = m.select(keep, keep);
    if drop.is_empty() {
        return Ok(m_kk);
    }
    let m_bb = m.select(&drop, &drop);
    let m_bk = m.select(&drop, keep);
    let chol = cholesky(&m_bb)?;
    let x = chol.solve_matrix(&m_bk);
    let mut s = m_kk.sub(&m_bk.transpose_matmul(&x));
    s.symmetrize();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let a = DenseMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        a.transpose_matmul(&a).add(&DenseMatrix::identity(n).scaled(0.5))
    }

    #[test]
    fn scalar_and_identity() {
        let c = cholesky(&DenseMatrix::new(1, 1, vec![4.0]).unwrap()).unwrap();
        assert_eq!(c.factor()[(0, 0)], 2.0);
        let c = cholesky(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(c.factor(), &DenseMatrix::identity(4));
    }

    #[test]
    fn log_det_two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((log_det_spd(&m).unwrap() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn reports_failing_pivot() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]]).unwrap();
        match cholesky(&m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reconstruction_and_inverse() {
        let m = spd(12, 3);
        let c = cholesky(&m).unwrap();
        let l = c.factor();
        let rec = l.matmul(&l.transpose());
        assert!(rec.max_abs_diff(&m) <= 1e-12 * m.max_abs());
        let inv = c.inverse();
        assert!(m.matmul(&inv).max_abs_diff(&DenseMatrix::identity(12)) < 1e-10);
    }

    #[test]
    fn schur_scalar() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = schur_complement(&m, &[0]).unwrap();
        assert!((s[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn schur_inverse_block_identity() {
        let m = spd(20, 9);
        let keep = [1, 4, 5, 11, 19];
        let s = schur_complement(&m, &keep).unwrap();
        let inv = inverse_spd(&m).unwrap().select(&keep, &keep);
        let sinv = inverse_spd(&s).unwrap();
        assert!(inv.max_abs_diff(&sinv) <= 1e-10 * inv.max_abs());
    }

    #[test]
    fn schur_block_diagonal_decouples() {
        let a = spd(3, 1);
        let b = spd(2, 2);
        let mut m = DenseMatrix::zeros(5, 5);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = a[(i, j)];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                m[(3 + i, 3 + j)] = b[(i, j)];
            }
        }
        let s = schur_complement(&m, &[0, 1, 3, 4]).unwrap();
        let sa = schur_complement(&a, &[0, 1]).unwrap();
        assert!(s.select(&[0, 1], &[0, 1]).max_abs_diff(&sa) < 1e-14);
        assert!(s.select(&[2, 3], &[2, 3]).max_abs_diff(&b) < 1e-14);
        assert_eq!(s[(0, 2)], 0.0);
    }
}
