//! Circular one-dimensional spin chain with nearest-neighbour coupling
//! (x−y)² and single-site potential P, discretized by Nyström quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{dot, sym_eigen, DenseMatrix, QuadratureGrid, SymEigen};
use crate::poly::Polynomial;
use crate::spectral::{self, GibbsRow, MixingRow, SpectralReport};

/// Default Gauss–Hermite order for chain grids.
pub const DEFAULT_ORDER: usize = 200;

/// log K(x,y) = −(x−y)² − ½(P(x)+P(y)).
pub fn log_kernel(p: &Polynomial, x: f64, y: f64) -> f64 {
    -(x - y).powi(2) - 0.5 * (p.eval(x) + p.eval(y))
}

pub fn kernel(p: &Polynomial, x: f64, y: f64) -> f64 {
    log_kernel(p, x, y).exp()
}

/// Symmetrized Nyström matrix √W_i·K(x_i,x_j)·√W_j of the chain kernel.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    polynomial: Polynomial,
    grid: QuadratureGrid,
    matrix: DenseMatrix,
    /// Overall factor c applied to the kernel (1 unless rescaled).
    kernel_scale: f64,
    eigen: OnceLock<SymEigen>,
}

pub fn build_transfer(p: &Polynomial, grid: &QuadratureGrid) -> Result<TransferOperator> {
    if !p.is_bounded_below() {
        return Err(Error::InvalidInteraction(format!(
            "P of degree {} with leading coefficient {} is not bounded below",
            p.degree(),
            p.leading()
        )));
    }
    let x = grid.nodes();
    let lw = grid.log_weights();
    let pv: Vec<f64> = x.iter().map(|&v| p.eval(v)).collect();
    let n = x.len();
    let mut matrix = DenseMatrix::from_fn(n, n, |i, j| {
        (0.5 * (lw[i] + lw[j]) - (x[i] - x[j]).powi(2) - 0.5 * (pv[i] + pv[j])).exp()
    });
    matrix.symmetrize();
    Ok(TransferOperator {
        polynomial: p.clone(),
        grid: grid.clone(),
        matrix,
        kernel_scale: 1.0,
        eigen: OnceLock::new(),
    })
}

impl TransferOperator {
    pub fn polynomial(&self) -> &Polynomial {
        &self.polynomial
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// The operator for the kernel c·K.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid("kernel scale must be positive");
        }
        Ok(Self {
            polynomial: self.polynomial.clone(),
            grid: self.grid.clone(),
            matrix: self.matrix.scaled(c),
            kernel_scale: self.kernel_scale * c,
            eigen: OnceLock::new(),
        })
    }

    /// Full eigendecomposition, computed once.
    pub fn eigen(&self) -> Result<&SymEigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = sym_eigen(&self.matrix)?;
        Ok(self.eigen.get_or_init(|| e))
    }

    fn kernel_at(&self, x: f64, y: f64) -> f64 {
        self.kernel_scale * kernel(&self.polynomial, x, y)
    }

    /// √W_i·K(x_i, y) on the grid.
    fn weighted_column(&self, y: f64) -> Vec<f64> {
        let lw = self.grid.log_weights();
        self.grid
            .nodes()
            .iter()
            .zip(lw)
            .map(|(&x, l)| self.kernel_scale * (0.5 * l + log_kernel(&self.polynomial, x, y)).exp())
            .collect()
    }

    fn check_hull(&self, v: f64, name: &str) -> Result<()> {
        if !(v >= self.grid.lower() && v <= self.grid.upper()) {
            return Err(Error::OutOfDomain(format!(
                "{name} = {v} lies outside the grid hull [{}, {}]",
                self.grid.lower(),
                self.grid.upper()
            )));
        }
        Ok(())
    }
}

/// tr(T^n) = Σ λ_i^n.
pub fn partition_function(t: &TransferOperator, n: usize) -> Result<f64> {
    Ok(log_partition_function(t, n)?.exp())
}

/// log tr(T^n) from the eigenvalues, stable for large n.
pub fn log_partition_function(t: &TransferOperator, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("chain length must be at least 1");
    }
    Ok(spectral::log_trace_power(&t.eigen()?.values, n))
}

/// log tr(T^n) by repeated squaring of the matrix with running normalization.
pub fn log_partition_by_multiplication(t: &TransferOperator, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("chain length must be at least 1");
    }
    Ok(log_trace_matrix_power(t.matrix(), n))
}

/// log tr(M^n) for a nonnegative square matrix by binary powering, rescaling
/// after each product so entries stay representable.
pub fn log_trace_matrix_power(m: &DenseMatrix, n: usize) -> f64 {
    let normalize = |a: DenseMatrix| -> (DenseMatrix, f64) {
        let s = a.max_abs();
        (a.scaled(1.0 / s), s.ln())
    };
    let (mut base, mut base_log) = normalize(m.clone());
    let mut acc: Option<(DenseMatrix, f64)> = None;
    let mut e = n;
    loop {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => (base.clone(), base_log),
                Some((a, l)) => {
                    let (p, s) = normalize(a.matmul(&base));
                    (p, l + base_log + s)
                }
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        let (sq, s) = normalize(base.matmul(&base));
        base = sq;
        base_log = 2.0 * base_log + s;
    }
    let (a, l) = acc.expect("n >= 1");
    l + a.trace().ln()
}

/// K_n(σ_out, σ_in): the n-step kernel with n−1 interior sites integrated out.
///
/// Endpoints are joined to the grid through the exact kernel (Nyström
/// interpolation); points outside the grid hull are refused.
pub fn conditioned_kernel(t: &TransferOperator, n: usize, sigma_in: f64, sigma_out: f64) -> Result<f64> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    t.check_hull(sigma_in, "sigma_in")?;
    t.check_hull(sigma_out, "sigma_out")?;
    if n == 1 {
        return Ok(t.kernel_at(sigma_out, sigma_in));
    }
    let mut u = t.weighted_column(sigma_in);
    for _ in 0..n - 2 {
        u = t.matrix.mat_vec(&u);
    }
    Ok(dot(&t.weighted_column(sigma_out), &u))
}

/// K₂(x,y) = √(π/2)·e^{−(x−y)²/2} for P = 0.
pub fn free_two_step_kernel(x: f64, y: f64) -> f64 {
    (PI / 2.0).sqrt() * (-(x - y).powi(2) / 2.0).exp()
}

/// Relative residual of ∫K_{n₂}(z_out,σ)K_{n₁}(σ,z_in)dσ against K_{n₁+n₂}(z_out,z_in),
/// with the σ-integral done on an independent trapezoid grid inside the hull.
pub fn chapman_kolmogorov_residual(t: &TransferOperator, n1: usize, n2: usize, z_in: f64, z_out: f64) -> Result<f64> {
    let half = 0.95 * t.grid.upper().min(-t.grid.lower());
    let mid = QuadratureGrid::uniform_truncated(801, half)?;
    let mut lhs = 0.0;
    for (&s, &w) in mid.nodes().iter().zip(mid.weights()) {
        lhs += w * conditioned_kernel(t, n2, s, z_out)? * conditioned_kernel(t, n1, z_in, s)?;
    }
    let rhs = conditioned_kernel(t, n1 + n2, z_in, z_out)?;
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// tr(T^n) as Σ_i W_i·K_n(x_i, x_i).
pub fn partition_by_kernel_diagonal(t: &TransferOperator, n: usize) -> Result<f64> {
    let mut total = 0.0;
    for (&x, &w) in t.grid.nodes().iter().zip(t.grid.weights()) {
        total += w * conditioned_kernel(t, n, x, x)?;
    }
    Ok(total)
}

pub fn spectral_report(t: &TransferOperator) -> Result<SpectralReport> {
    spectral::spectral_report(t.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyRow {
    pub n: usize,
    pub log_z: f64,
    pub free_energy: f64,
    pub log_lambda0: f64,
    pub alpha: f64,
}

/// (n, (1/n)·log Z(n)) rows with log λ₀ and α for reference.
pub fn free_energy(t: &TransferOperator, n_list: &[usize]) -> Result<Vec<FreeEnergyRow>> {
    if n_list.is_empty() {
        return invalid("n_list must not be empty");
    }
    let e = t.eigen()?;
    let lam0 = e.values[0];
    let lam1 = e.values[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return invalid("chain lengths must be at least 1");
        }
        let log_z = spectral::log_trace_power(&e.values, n);
        rows.push(FreeEnergyRow {
            n,
            log_z,
            free_energy: log_z / n as f64,
            log_lambda0: lam0.ln(),
            alpha: lam1 / lam0,
        });
    }
    Ok(rows)
}

/// Gibbs expectation of diagonal grid functionals at the given sites
/// (numbered from 1). `n = None` is the infinite-volume limit.
pub fn gibbs_expectation(t: &TransferOperator, insertions: &[(usize, Vec<f64>)], n: Option<usize>) -> Result<f64> {
    let sites: Vec<usize> = insertions.iter().map(|(s, _)| *s).collect();
    let fs: Vec<&[f64]> = insertions.iter().map(|(_, f)| f.as_slice()).collect();
    let e = t.eigen()?;
    match n {
        Some(n) => spectral::gibbs_ratio_finite(e, &sites, &fs, n),
        None => spectral::gibbs_ratio_limit(e, &sites, &fs),
    }
}

/// Finite-n Gibbs values against the limit, with fitted geometric rate.
pub fn gibbs_convergence(
    t: &TransferOperator,
    insertions: &[(usize, Vec<f64>)],
    n_list: &[usize],
) -> Result<(Vec<GibbsRow>, Option<f64>)> {
    let sites: Vec<usize> = insertions.iter().map(|(s, _)| *s).collect();
    let fs: Vec<&[f64]> = insertions.iter().map(|(_, f)| f.as_slice()).collect();
    spectral::gibbs_convergence(t.eigen()?, &sites, &fs, n_list)
}

pub fn mixing_check(t: &TransferOperator, f: &[f64], g: &[f64], k_max: usize) -> Result<Vec<MixingRow>> {
    let report = spectral_report(t)?;
    spectral::mixing_table(t.matrix(), &report, f, g, k_max)
}

/// Samples f(x_i)·√W_i so that grid vectors represent L² functions.
pub fn grid_vector(t: &TransferOperator, f: impl Fn(f64) -> f64) -> Vec<f64> {
    t.grid
        .nodes()
        .iter()
        .zip(t.grid.log_weights())
        .map(|(&x, l)| f(x) * (0.5 * l).exp())
        .collect()
}

/// Per-site log of the measure normalization √(2/π) that turns the chain with
/// P(σ) = 2m²σ² into det(A_N)^{−1/2}, A_N the circulant with symbol 1+m²−cos(2πk/N).
pub const GAUSSIAN_LOG_NORMALIZATION: f64 = -0.225_791_352_644_727_4; // ½·ln(2/π)

/// Single-site potential of the Gaussian benchmark: P(σ) = 2m²σ².
pub fn gaussian_benchmark_polynomial(m: f64) -> Polynomial {
    Polynomial::new(vec![0.0, 0.0, 2.0 * m * m])
}

/// log Z(n) in the normalized-determinant convention.
pub fn normalized_log_partition(t: &TransferOperator, n: usize) -> Result<f64> {
    Ok(log_partition_function(t, n)? + n as f64 * GAUSSIAN_LOG_NORMALIZATION)
}

/// −½ Σ_k log(1 + m² − cos(2πk/n)), the circulant-product log partition function.
pub fn circulant_log_partition(m: f64, n: usize) -> f64 {
    -0.5 * (0..n)
        .map(|k| (1.0 + m * m - (2.0 * PI * k as f64 / n as f64).cos()).ln())
        .sum::<f64>()
}

/// Limit of (1/n)·log Z(n): −½·log((a + √(a²−1))/2) with a = 1 + m².
pub fn gaussian_free_energy_limit(m: f64) -> f64 {
    let a = 1.0 + m * m;
    -0.5 * ((a + (a * a - 1.0).sqrt()) / 2.0).ln()
}
