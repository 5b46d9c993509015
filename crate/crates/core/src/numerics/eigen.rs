//! Symmetric eigenproblems: cyclic Jacobi, tridiagonal QL and power iteration.

use super::dense::{dot, norm, DenseMatrix};
use crate::error::{Error, Result};

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// Rebuilds V·diag(f(λ))·Vᵀ.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = f(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= s;
            }
        }
        let mut out = scaled.matmul(&self.vectors.transpose());
        out.symmetrize();
        out
    }
}

const MAX_SWEEPS: usize = 60;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigen(m: &DenseMatrix) -> Result<SymEigen> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    if !m.is_symmetric() {
        return Err(Error::ContractViolation(format!(
            "sym_eigen needs a symmetric matrix (asymmetry {:e})",
            m.asymmetry()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let mut d = a.diag();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let rotate = |mat: &mut DenseMatrix, s: f64, tau: f64, i: (usize, usize), k: (usize, usize)| {
        let g = mat[i];
        let h = mat[k];
        mat[i] = g - s * (h + g * tau);
        mat[k] = h + s * (g - h * tau);
    };

    for sweep in 1..=MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].abs();
            }
        }
        if off == 0.0 {
            return Ok(sorted(d, v));
        }
        let thresh = if sweep < 4 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                if sweep > 4 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[(p, q)] = 0.0;
                } else if apq.abs() > thresh {
                    let h = d[q] - d[p];
                    let t = if h.abs() + g == h.abs() {
                        apq / h
                    } else {
                        let theta = 0.5 * h / apq;
                        let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            -t
                        } else {
                            t
                        }
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let h = t * apq;
                    z[p] -= h;
                    z[q] += h;
                    d[p] -= h;
                    d[q] += h;
                    a[(p, q)] = 0.0;
                    for j in 0..p {
                        rotate(&mut a, s, tau, (j, p), (j, q));
                    }
                    for j in (p + 1)..q {
                        rotate(&mut a, s, tau, (p, j), (j, q));
                    }
                    for j in (q + 1)..n {
                        rotate(&mut a, s, tau, (p, j), (q, j));
                    }
                    for j in 0..n {
                        rotate(&mut v, s, tau, (j, p), (j, q));
                    }
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }
    let mut residual = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            residual += a[(p, q)].abs();
        }
    }
    Err(Error::Convergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

fn sorted(d: Vec<f64>, v: DenseMatrix) -> SymEigen {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    SymEigen { values, vectors }
}

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal, by implicit QL with Wilkinson shifts.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::Dimension {
            expected: n - 1,
            found: off.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Convergence {
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Leading eigenpair and second-largest-modulus eigenvalue of a symmetric
/// matrix with a positive top eigenvector.
#[derive(Debug, Clone)]
pub struct PowerPair {
    pub lambda0: f64,
    pub ground: Vec<f64>,
    pub lambda1: f64,
    pub iterations: usize,
}

pub const POWER_TOLERANCE: f64 = 1e-12;
/// Step size ‖x_{k+1} − x_k‖ at which the ground vector counts as converged.
const VECTOR_TOLERANCE: f64 = 1e-14;
pub const POWER_MAX_ITERATIONS: usize = 100_000;

/// Power iteration for (λ₀, v₀), then deflated iteration for λ₁.
///
/// The deflated phase tracks ‖m x‖ so that eigenvalue pairs ±λ of equal
/// modulus still converge; the sign of λ₁ is read from the Rayleigh quotient.
pub fn power_pair(m: &DenseMatrix) -> Result<PowerPair> {
    if !m.is_symmetric() {
        return Err(Error::ContractViolation("power_pair needs a symmetric matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = dot(&x, &m.mat_vec(&x));
    let mut step = f64::INFINITY;
    let mut it0 = 0;
    loop {
        it0 += 1;
        let mut y = m.mat_vec(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return Err(Error::InvalidInput(
                "matrix annihilates the positive start vector".into(),
            ));
        }
        y.iter_mut().for_each(|v| *v /= ny);
        let next = dot(&y, &m.mat_vec(&y));
        let change = (next - lambda).abs();
        let next_step = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        x = y;
        lambda = next;
        // The Rayleigh quotient settles at the square of the vector error, so
        // iterate until the vector itself stops moving or hits rounding level.
        if change <= POWER_TOLERANCE * lambda.abs() && (next_step <= VECTOR_TOLERANCE || next_step >= step) {
            break;
        }
        step = next_step;
        if it0 >= POWER_MAX_ITERATIONS {
            return Err(Error::Convergence {
                iterations: it0,
                residual: change,
            });
        }
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let ground = x;

    let project = |v: &mut Vec<f64>| {
        let c = dot(v, &ground);
        v.iter_mut().zip(&ground).for_each(|(a, g)| *a -= c * g);
    };
    let mut u: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.754_877_666_246_692_7).fract() - 0.5)
        .collect();
    project(&mut u);
    let nu = norm(&u);
    if nu == 0.0 || n == 1 {
        return Ok(PowerPair {
            lambda0: lambda,
            ground,
            lambda1: 0.0,
            iterations: it0,
        });
    }
    u.iter_mut().for_each(|v| *v /= nu);
    let mut modulus = f64::INFINITY;
    let mut it1 = 0;
    let lambda1 = loop {
        it1 += 1;
        let mut w = m.mat_vec(&u);
        project(&mut w);
        let nw = norm(&w);
        if nw <= 1e-300 {
            break 0.0;
        }
        let rayleigh = dot(&u, &w);
        w.iter_mut().for_each(|v| *v /= nw);
        let change = (nw - modulus).abs();
        modulus = nw;
        if change <= POWER_TOLERANCE * lambda.abs() {
            // Sign from the Rayleigh quotient of the converged direction.
            break if rayleigh < 0.0 && rayleigh.abs() > 0.5 * nw {
                -nw
            } else {
                nw
            };
        }
        if it1 >= POWER_MAX_ITERATIONS {
            return Err(Error::Convergence {
                iterations: it0 + it1,
                residual: change,
            });
        }
        u = w;
        project(&mut u);
        let nu = norm(&u);
        u.iter_mut().for_each(|v| *v /= nu);
    };
    Ok(PowerPair {
        lambda0: lambda,
        ground,
        lambda1,
        iterations: it0 + it1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let mut a = DenseMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        a.symmetrize();
        a
    }

    #[test]
    fn two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v0 = e.vector(0);
        assert!((v0[0].abs() - v0[1].abs()).abs() < 1e-14);
    }

    #[test]
    fn identity_values() {
        let e = sym_eigen(&DenseMatrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn reconstruction_50() {
        let m = lcg_symmetric(50, 11);
        let e = sym_eigen(&m).unwrap();
        let rec = e.map_values(|x| x);
        assert!(rec.max_abs_diff(&m) <= 1e-9 * m.max_abs());
        let vtv = e.vectors.transpose_matmul(&e.vectors);
        assert!(vtv.max_abs_diff(&DenseMatrix::identity(50)) < 1e-10);
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn rejects_asymmetric_and_nan() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::ContractViolation(_))));
        let m = DenseMatrix::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn tridiagonal_matches_jacobi() {
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + (i as f64 * 0.11).cos()).collect();
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let mut jac = sym_eigen(&m).unwrap().values;
        jac.reverse();
        let ql = tridiagonal_eigenvalues(&diag, &off).unwrap();
        for (a, b) in jac.iter().zip(&ql) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn power_pair_small_cases() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = power_pair(&m).unwrap();
        assert!((p.lambda0 - 3.0).abs() < 1e-12);
        assert!((p.lambda1 - 1.0).abs() < 1e-10);
        assert!((p.ground[0] - 0.5f64.sqrt()).abs() < 1e-8);

        let ones = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
        let p = power_pair(&ones).unwrap();
        assert!((p.lambda0 - 4.0).abs() < 1e-12);
        assert!(p.lambda1.abs() < 1e-10);
    }

    #[test]
    fn power_pair_matches_jacobi_on_kernel() {
        let n = 100;
        let x: Vec<f64> = (0..n).map(|i| -4.0 + 8.0 * i as f64 / (n - 1) as f64).collect();
        let h = x[1] - x[0];
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            h * (-(x[i] - x[j]).powi(2) - 0.5 * (x[i].powi(2) + x[j].powi(2))).exp()
        });
        let p = power_pair(&m).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert!((p.lambda0 - e.values[0]).abs() <= 1e-8 * e.values[0]);
        let second = e.values[1..]
            .iter()
            .fold(0.0f64, |a, &v| if v.abs() > a.abs() { v } else { a });
        assert!((p.lambda1 - second).abs() <= 1e-8 * e.values[0]);
        assert!(p.ground.iter().all(|&g| g > 0.0));
    }
}
