//! Perron–Frobenius analysis shared by chain transfer matrices and Segal
//! amplitude operators: leading pair, mixing, free energy and Gibbs ratios.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{dot, norm, power_pair, DenseMatrix, SymEigen};

/// Leading spectral data of a symmetric positivity-preserving operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda0: f64,
    pub lambda1: f64,
    /// |λ₁|/λ₀.
    pub alpha: f64,
    pub ground: Vec<f64>,
}

impl SpectralReport {
    /// λ₀ − |λ₁|.
    pub fn gap(&self) -> f64 {
        self.lambda0 - self.lambda1.abs()
    }

    /// No negative entries, and strictly positive wherever the diagonal of
    /// the operator is representable (entries that vanish lie below the
    /// smallest positive double).
    pub fn ground_positive(&self, m: &DenseMatrix) -> bool {
        self.ground.iter().all(|&g| g >= 0.0) && self.ground.iter().zip(m.diag()).all(|(&g, d)| g > 0.0 || d < 1e-280)
    }
}

pub fn spectral_report(m: &DenseMatrix) -> Result<SpectralReport> {
    let pp = power_pair(m)?;
    if pp.lambda0 <= 0.0 {
        return Err(Error::ContractViolation("leading eigenvalue is not positive".into()));
    }
    Ok(SpectralReport {
        alpha: pp.lambda1.abs() / pp.lambda0,
        lambda0: pp.lambda0,
        lambda1: pp.lambda1,
        ground: pp.ground,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub k: usize,
    pub value: f64,
    pub bound: f64,
}

impl MixingRow {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

/// |⟨f, T̂^k g⟩ − ⟨f,Ω₀⟩⟨Ω₀,g⟩| for k = 1..=k_max with the bound α^k‖f‖‖g‖ + 1e−10.
pub fn mixing_table(
    m: &DenseMatrix,
    report: &SpectralReport,
    f: &[f64],
    g: &[f64],
    k_max: usize,
) -> Result<Vec<MixingRow>> {
    let n = m.rows();
    if f.len() != n || g.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: if f.len() != n { f.len() } else { g.len() },
        });
    }
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    let omega = &report.ground;
    let baseline = dot(f, omega) * dot(omega, g);
    let scale = norm(f) * norm(g);
    let mut v = g.to_vec();
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        v = m.mat_vec(&v);
        v.iter_mut().for_each(|x| *x /= report.lambda0);
        rows.push(MixingRow {
            k,
            value: (dot(f, &v) - baseline).abs(),
            bound: report.alpha.powi(k as i32) * scale + 1e-10,
        });
    }
    Ok(rows)
}

/// log Σ λ_i^n, computed relative to the largest eigenvalue.
pub fn log_trace_power(values: &[f64], n: usize) -> f64 {
    let top = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let tail: f64 = values.iter().map(|&v| pow_ratio(v / top, n)).sum();
    n as f64 * top.ln() + tail.ln()
}

fn pow_ratio(mu: f64, n: usize) -> f64 {
    if n > i32::MAX as usize {
        return if mu.abs() >= 1.0 { mu.signum() } else { 0.0 };
    }
    mu.powi(n as i32)
}

/// V·diag(μ^p)·Vᵀ·v, with μ = λ/λ₀.
fn apply_normalized_power(eig: &SymEigen, v: &[f64], p: usize) -> Vec<f64> {
    let lam0 = eig.values[0];
    let coords = eig.vectors.transpose().mat_vec(v);
    let scaled: Vec<f64> = coords
        .iter()
        .zip(&eig.values)
        .map(|(c, l)| c * pow_ratio(l / lam0, p))
        .collect();
    eig.vectors.mat_vec(&scaled)
}

fn check_sites(sites: &[usize], fs: &[&[f64]], dim: usize, n: Option<usize>) -> Result<()> {
    if sites.len() != fs.len() {
        return invalid("one functional per insertion site");
    }
    if sites.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("insertion sites must be strictly increasing");
    }
    if sites.first().is_some_and(|&s| s == 0) {
        return invalid("sites are numbered from 1");
    }
    if let (Some(n), Some(&last)) = (n, sites.last()) {
        if last > n {
            return invalid(format!("site {last} exceeds chain length {n}"));
        }
    }
    if let Some(f) = fs.iter().find(|f| f.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: f.len(),
        });
    }
    Ok(())
}

/// tr(T^{n+1−i_k}F_k ··· F₁T^{i₁−1}) / tr(T^n) for diagonal insertions F_j.
pub fn gibbs_ratio_finite(eig: &SymEigen, sites: &[usize], fs: &[&[f64]], n: usize) -> Result<f64> {
    let dim = eig.values.len();
    check_sites(sites, fs, dim, Some(n))?;
    if sites.is_empty() {
        return Ok(1.0);
    }
    let lam0 = eig.values[0];
    let mu: Vec<f64> = eig.values.iter().map(|l| l / lam0).collect();
    let vt = eig.vectors.transpose();
    // Cyclic form: tr(F_k T̂^{d_k} ··· F₂ T̂^{d₂} F₁ T̂^{n − (i_k − i₁)}).
    let insertion = |f: &[f64]| {
        let mut fv = eig.vectors.clone();
        for i in 0..dim {
            for c in 0..dim {
                fv[(i, c)] *= f[i];
            }
        }
        vt.matmul(&fv)
    };
    let scale_cols = |m: &mut DenseMatrix, p: usize| {
        for c in 0..dim {
            let s = pow_ratio(mu[c], p);
            for r in 0..dim {
                m[(r, c)] *= s;
            }
        }
    };
    let k = sites.len();
    let mut acc = insertion(fs[0]);
    scale_cols(&mut acc, n - (sites[k - 1] - sites[0]));
    for j in 1..k {
        let mut next = insertion(fs[j]);
        scale_cols(&mut next, sites[j] - sites[j - 1]);
        acc = next.matmul(&acc);
    }
    let denom: f64 = mu.iter().map(|&m| pow_ratio(m, n)).sum();
    Ok(acc.trace() / denom)
}

/// ⟨Ω₀, F_k T̂^{i_k−i_{k−1}} ··· F₁ Ω₀⟩, the infinite-volume limit of the ratio.
pub fn gibbs_ratio_limit(eig: &SymEigen, sites: &[usize], fs: &[&[f64]]) -> Result<f64> {
    let dim = eig.values.len();
    check_sites(sites, fs, dim, None)?;
    let mut omega = eig.vector(0);
    if omega.iter().sum::<f64>() < 0.0 {
        omega.iter_mut().for_each(|x| *x = -*x);
    }
    if sites.is_empty() {
        return Ok(1.0);
    }
    let mut v: Vec<f64> = omega.iter().zip(fs[0]).map(|(o, f)| o * f).collect();
    for j in 1..sites.len() {
        v = apply_normalized_power(eig, &v, sites[j] - sites[j - 1]);
        v.iter_mut().zip(fs[j]).for_each(|(x, f)| *x *= f);
    }
    Ok(dot(&omega, &v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsRow {
    pub n: usize,
    pub finite: f64,
    pub limit: f64,
    pub discrepancy: f64,
}

/// Finite-n Gibbs ratios against the limit, with the geometric rate fitted to
/// the discrepancies that lie above rounding level.
pub fn gibbs_convergence(
    eig: &SymEigen,
    sites: &[usize],
    fs: &[&[f64]],
    n_list: &[usize],
) -> Result<(Vec<GibbsRow>, Option<f64>)> {
    let limit = gibbs_ratio_limit(eig, sites, fs)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let finite = gibbs_ratio_finite(eig, sites, fs, n)?;
        rows.push(GibbsRow {
            n,
            finite,
            limit,
            discrepancy: (finite - limit).abs(),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.discrepancy > 1e-12 * limit.abs().max(1.0))
        .map(|r| (r.n as f64, r.discrepancy.ln()))
        .collect();
    let rate = fit_slope(&pts).map(f64::exp);
    Ok((rows, rate))
}

/// Least-squares slope of y against x; None with fewer than two points.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eigen;

    fn kernel_matrix(n: usize) -> DenseMatrix {
        let x: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
        let h = x[1] - x[0];
        DenseMatrix::from_fn(n, n, |i, j| {
            h * (-(x[i] - x[j]).powi(2) - 0.5 * (x[i].powi(4) + x[j].powi(4))).exp()
        })
    }

    #[test]
    fn mixing_zero_on_ground() {
        let m = kernel_matrix(40);
        let r = spectral_report(&m).unwrap();
        let rows = mixing_table(&m, &r, &r.ground, &r.ground, 10).unwrap();
        assert!(rows.iter().all(|row| row.value < 1e-10));
    }

    #[test]
    fn log_trace_matches_direct() {
        let vals = [3.0, 1.0, -0.5];
        let direct = (3f64.powi(5) + 1.0 - 0.5f64.powi(5)).ln();
        assert!((log_trace_power(&vals, 5) - direct).abs() < 1e-14);
    }

    #[test]
    fn gibbs_without_insertions_is_one() {
        let m = kernel_matrix(30);
        let e = sym_eigen(&m).unwrap();
        assert_eq!(gibbs_ratio_finite(&e, &[], &[], 7).unwrap(), 1.0);
        assert_eq!(gibbs_ratio_limit(&e, &[], &[]).unwrap(), 1.0);
    }

    #[test]
    fn gibbs_finite_matches_direct_trace() {
        let m = kernel_matrix(25);
        let e = sym_eigen(&m).unwrap();
        let f: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).cos()).collect();
        let g: Vec<f64> = (0..25).map(|i| 1.0 + 0.1 * i as f64).collect();
        let n = 6;
        let got = gibbs_ratio_finite(&e, &[2, 4], &[&f, &g], n).unwrap();
        let pow = |p: usize| {
            let mut a = DenseMatrix::identity(25);
            for _ in 0..p {
                a = a.matmul(&m);
            }
            a
        };
        let df = DenseMatrix::diagonal(&f);
        let dg = DenseMatrix::diagonal(&g);
        let num = pow(n + 1 - 4)
            .matmul(&dg)
            .matmul(&pow(2))
            .matmul(&df)
            .matmul(&pow(1))
            .trace();
        let want = num / pow(n).trace();
        assert!((got - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn rejects_unordered_sites() {
        let m = kernel_matrix(10);
        let e = sym_eigen(&m).unwrap();
        let f = vec![1.0; 10];
        assert!(gibbs_ratio_finite(&e, &[3, 2], &[&f, &f], 5).is_err());
        assert!(gibbs_ratio_finite(&e, &[3, 6], &[&f, &f], 5).is_err());
    }
}
