//! Zeta-regularized and Fredholm determinants for operators with explicit
//! spectra: circles, flat tori, Dirichlet cylinders and the jumpy
//! Dirichlet-to-Neumann operator of a circle inside a torus.
//!
//! ζ(0) and ζ′(0) are obtained from the heat trace θ(t) = Σ m_k e^{−tλ_k}.
//! Below a split time t_s the trace is written as a finite expansion
//! Σ c_p t^p plus an exactly computable remainder R(t); above t_s the Mellin
//! integral is a sum of exponential integrals. Near s = 0 this gives
//!
//! ζ(0) = c₀,
//! ζ′(0) = Σ_{p≠0} c_p t_s^p/p + c₀(log t_s + γ) + ∫₀^{t_s} R(t)/t dt + Σ m_k E₁(λ_k t_s).

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{
    cholesky, exp_integral_e1, exp_taylor_remainder, factorial, gauss_legendre, sym_eigen, DenseMatrix, EULER_GAMMA,
};

/// Eigenvalues with λ·t_s above this contribute below 1e−26 to ζ′(0).
const E1_CUTOFF: f64 = 60.0;
const EXPANSION_TERMS: usize = 6;
const REMAINDER_NODES: usize = 48;

/// Operators whose spectrum is generated on demand.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum EigenvalueFamily {
    /// Finitely many (λ, multiplicity) pairs.
    Finite { values: Vec<(f64, f64)> },
    /// λ_n = scale·n², n ≥ 1.
    Harmonic { scale: f64 },
    /// −d²/dx² + m² on a circle of circumference L.
    Circle { mass: f64, length: f64 },
    /// Δ + m² on the flat torus L × T.
    Torus { mass: f64, length: f64, height: f64 },
    /// Δ + m² on the cylinder S¹_L × [0, T] with Dirichlet ends.
    DirichletCylinder { mass: f64, length: f64, height: f64 },
    /// Square of the jumpy DN operator of a circle in the L × T torus:
    /// eigenvalues 4ω_k²·tanh²(ω_kT/2), ω_k² = (2πk/L)² + m².
    JumpyDnSquared { mass: f64, length: f64, height: f64 },
}

/// Piece coef·t^{p0}·e^{−t·shift}·(1 + tail(t)) of a heat trace.
struct HeatPiece {
    coef: f64,
    p0: f64,
    shift: f64,
    terms: usize,
    tail: Box<dyn Fn(f64) -> f64>,
}

impl HeatPiece {
    fn expansion(&self, out: &mut Vec<(f64, f64)>) {
        for j in 0..self.terms {
            let c = self.coef * (-self.shift).powi(j as i32) / factorial(j);
            if c != 0.0 {
                out.push((self.p0 + j as f64, c));
            }
        }
    }

    fn remainder(&self, t: f64) -> f64 {
        let x = t * self.shift;
        let tail = (self.tail)(t);
        self.coef * t.powf(self.p0) * (exp_taylor_remainder(x, self.terms) + (-x).exp() * tail)
    }
}

/// 2·Σ_{k≥1} e^{−k²x}.
fn theta_tail(x: f64) -> f64 {
    let mut sum = 0.0;
    for k in 1.. {
        let term = (-((k * k) as f64) * x).exp();
        sum += term;
        if term < 1e-300 || term < 1e-18 * sum {
            break;
        }
    }
    2.0 * sum
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite"))
    }
}

/// ω_k = √((2πk/L)² + m²).
pub fn mode_frequency(mass: f64, length: f64, k: i64) -> f64 {
    ((2.0 * PI * k as f64 / length).powi(2) + mass * mass).sqrt()
}

impl EigenvalueFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Finite { values } => {
                if values.is_empty() {
                    return invalid("finite family is empty");
                }
                for &(l, m) in values {
                    positive("eigenvalue", l)?;
                    positive("multiplicity", m)?;
                }
                Ok(())
            }
            Self::Harmonic { scale } => positive("scale", *scale),
            Self::Circle { mass, length } => {
                positive("mass", *mass)?;
                positive("length", *length)
            }
            Self::Torus { mass, length, height }
            | Self::DirichletCylinder { mass, length, height }
            | Self::JumpyDnSquared { mass, length, height } => {
                positive("mass", *mass)?;
                positive("length", *length)?;
                positive("height", *height)
            }
        }
    }

    fn pieces(&self) -> Vec<HeatPiece> {
        let sqrt4pi = (4.0 * PI).sqrt();
        match self.clone() {
            Self::Finite { values } => values
                .into_iter()
                .map(|(l, m)| HeatPiece {
                    coef: m,
                    p0: 0.0,
                    shift: l,
                    terms: 1,
                    tail: Box::new(|_| 0.0),
                })
                .collect(),
            Self::Harmonic { scale } => vec![
                HeatPiece {
                    coef: 0.5 * (PI / scale).sqrt(),
                    p0: -0.5,
                    shift: 0.0,
                    terms: 1,
                    tail: Box::new(move |t| theta_tail(PI * PI / (scale * t))),
                },
                HeatPiece {
                    coef: -0.5,
                    p0: 0.0,
                    shift: 0.0,
                    terms: 1,
                    tail: Box::new(|_| 0.0),
                },
            ],
            Self::Circle { mass, length } => vec![HeatPiece {
                coef: length / sqrt4pi,
                p0: -0.5,
                shift: mass * mass,
                terms: EXPANSION_TERMS,
                tail: Box::new(move |t| theta_tail(length * length / (4.0 * t))),
            }],
            Self::Torus { mass, length, height } => vec![HeatPiece {
                coef: length * height / (4.0 * PI),
                p0: -1.0,
                shift: mass * mass,
                terms: EXPANSION_TERMS,
                tail: Box::new(move |t| {
                    let a = theta_tail(length * length / (4.0 * t));
                    let b = theta_tail(height * height / (4.0 * t));
                    a + b + a * b
                }),
            }],
            Self::DirichletCylinder { mass, length, height } => vec![
                HeatPiece {
                    coef: length * height / (4.0 * PI),
                    p0: -1.0,
                    shift: mass * mass,
                    terms: EXPANSION_TERMS,
                    tail: Box::new(move |t| {
                        let a = theta_tail(length * length / (4.0 * t));
                        let b = theta_tail(height * height / t);
                        a + b + a * b
                    }),
                },
                HeatPiece {
                    coef: -0.5 * length / sqrt4pi,
                    p0: -0.5,
                    shift: mass * mass,
                    terms: EXPANSION_TERMS,
                    tail: Box::new(move |t| theta_tail(length * length / (4.0 * t))),
                },
            ],
            Self::JumpyDnSquared { mass, length, .. } => vec![HeatPiece {
                coef: length / (2.0 * sqrt4pi),
                p0: -0.5,
                shift: 4.0 * mass * mass,
                terms: EXPANSION_TERMS,
                tail: Box::new(move |t| theta_tail(length * length / (16.0 * t))),
            }],
        }
    }

    /// Part of the heat-trace remainder not carried by the pieces.
    fn extra_remainder(&self, t: f64) -> f64 {
        match *self {
            // Σ_k e^{−4tω²}(e^{4tω²sech²(ωT/2)} − 1): the difference from 4(Δ+m²).
            Self::JumpyDnSquared { mass, length, height } => {
                let mut sum = 0.0;
                for k in 0i64.. {
                    let w = mode_frequency(mass, length, k);
                    let sech = 1.0 / (0.5 * w * height).cosh();
                    let term = (-4.0 * t * w * w).exp() * (4.0 * t * w * w * sech * sech).exp_m1();
                    sum += if k == 0 { term } else { 2.0 * term };
                    if term < 1e-20 * sum.abs().max(1e-300) {
                        break;
                    }
                }
                sum
            }
            _ => 0.0,
        }
    }

    /// Small-t expansion coefficients (p, c_p); equal powers may repeat.
    pub fn heat_expansion(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for piece in self.pieces() {
            piece.expansion(&mut out);
        }
        out
    }

    /// θ(t) − Σ c_p t^p, evaluated without cancellation.
    pub fn heat_remainder(&self, t: f64) -> f64 {
        self.pieces().iter().map(|p| p.remainder(t)).sum::<f64>() + self.extra_remainder(t)
    }

    /// (λ, multiplicity) for every eigenvalue with λ ≤ `max`.
    pub fn eigenvalues_below(&self, max: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let sym = |k: i64| if k == 0 { 1.0 } else { 2.0 };
        match *self {
            Self::Finite { ref values } => out.extend(values.iter().filter(|v| v.0 <= max)),
            Self::Harmonic { scale } => {
                for n in 1.. {
                    let l = scale * (n * n) as f64;
                    if l > max {
                        break;
                    }
                    out.push((l, 1.0));
                }
            }
            Self::Circle { mass, length } => {
                for k in 0i64.. {
                    let l = mode_frequency(mass, length, k).powi(2);
                    if l > max {
                        break;
                    }
                    out.push((l, sym(k)));
                }
            }
            Self::Torus { mass, length, height } | Self::DirichletCylinder { mass, length, height } => {
                let dirichlet = matches!(self, Self::DirichletCylinder { .. });
                for k in 0i64.. {
                    let wk = mode_frequency(mass, length, k).powi(2);
                    if wk > max {
                        break;
                    }
                    let start = if dirichlet { 1 } else { 0 };
                    for n in start.. {
                        let vertical = if dirichlet {
                            (PI * n as f64 / height).powi(2)
                        } else {
                            (2.0 * PI * n as f64 / height).powi(2)
                        };
                        let l = wk + vertical;
                        if l > max {
                            break;
                        }
                        let mult = sym(k) * if dirichlet { 1.0 } else { sym(n) };
                        out.push((l, mult));
                    }
                }
            }
            Self::JumpyDnSquared { mass, length, height } => {
                for k in 0i64.. {
                    let w = mode_frequency(mass, length, k);
                    let l = (2.0 * w * (0.5 * w * height).tanh()).powi(2);
                    if l > max {
                        break;
                    }
                    out.push((l, sym(k)));
                }
            }
        }
        out
    }

    /// Direct θ(t) = Σ m_k e^{−tλ_k} from the eigenvalue list.
    pub fn heat_trace_direct(&self, t: f64) -> f64 {
        self.eigenvalues_below(80.0 / t)
            .iter()
            .map(|(l, m)| m * (-t * l).exp())
            .sum()
    }
}

/// ζ(0), ζ′(0) and log det = −ζ′(0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaResult {
    pub zeta0: f64,
    pub zeta_prime0: f64,
    pub logdet: f64,
    /// Change of the remainder integral under doubling of the quadrature order.
    pub error_estimate: f64,
    pub t_split: f64,
}

impl ZetaResult {
    pub fn det(&self) -> f64 {
        self.logdet.exp()
    }
}

fn remainder_integral(fam: &EigenvalueFamily, t_split: f64, nodes: usize) -> Result<f64> {
    // ∫₀^{t_s} R(t)/t dt = 2∫₀^{√t_s} R(u²)/u du, in two panels.
    let top = t_split.sqrt();
    let mut total = 0.0;
    for (a, b) in [(0.0, 0.5 * top), (0.5 * top, top)] {
        let (x, w) = gauss_legendre(nodes, a, b)?;
        total += x
            .iter()
            .zip(&w)
            .map(|(u, w)| w * 2.0 * fam.heat_remainder(u * u) / u)
            .sum::<f64>();
    }
    Ok(total)
}

/// Mellin continuation of ζ to s = 0 with split time `t_split`.
pub fn zeta_continue(fam: &EigenvalueFamily, t_split: f64) -> Result<ZetaResult> {
    fam.validate()?;
    positive("t_split", t_split)?;
    let mut zeta0 = 0.0;
    let mut prime = 0.0;
    for (p, c) in fam.heat_expansion() {
        if p == 0.0 {
            zeta0 += c;
        } else {
            prime += c * t_split.powf(p) / p;
        }
    }
    prime += zeta0 * (t_split.ln() + EULER_GAMMA);
    let coarse = remainder_integral(fam, t_split, REMAINDER_NODES / 2)?;
    let fine = remainder_integral(fam, t_split, REMAINDER_NODES)?;
    prime += fine;
    let tail: f64 = fam
        .eigenvalues_below(E1_CUTOFF / t_split)
        .iter()
        .rev()
        .map(|(l, m)| m * exp_integral_e1(l * t_split))
        .sum();
    prime += tail;
    let error_estimate = (fine - coarse).abs();
    if !prime.is_finite() || error_estimate > 1e-6 * prime.abs().max(1.0) {
        return Err(Error::Accuracy(format!(
            "continuation unstable at t_split = {t_split} (quadrature change {error_estimate:e})"
        )));
    }
    Ok(ZetaResult {
        zeta0,
        zeta_prime0: prime,
        logdet: -prime,
        error_estimate,
        t_split,
    })
}

/// Continuation at t_s, 2t_s and 4t_s; returns the first result and the
/// largest spread of log det across the three.
pub fn zeta_robust(fam: &EigenvalueFamily, t_split: f64) -> Result<(ZetaResult, f64)> {
    let base = zeta_continue(fam, t_split)?;
    let mut spread = 0.0f64;
    for f in [2.0, 4.0] {
        let r = zeta_continue(fam, f * t_split)?;
        spread = spread.max((r.logdet - base.logdet).abs());
    }
    Ok((base, spread))
}

pub const DEFAULT_T_SPLIT: f64 = 0.125;

#[derive(Debug, Clone, Serialize)]
pub struct CircleDeterminant {
    pub result: ZetaResult,
    /// log(4·sinh²(mL/2)).
    pub closed_form: f64,
    pub error: f64,
    pub t_split_spread: f64,
    /// log det of 𝔇 = (Δ+m²)^{1/2}: half of log det(Δ+m²).
    pub logdet_sqrt: f64,
    /// log det(2𝔇) = log det 𝔇 + ζ_𝔇(0)·log 2.
    pub logdet_twice_sqrt: f64,
}

/// log(4·sinh²(x/2)) for x > 0, stable for large x.
pub fn log_four_sinh_sq_half(x: f64) -> f64 {
    x + 2.0 * (-(-x).exp()).ln_1p()
}

pub fn detzeta_circle(mass: f64, length: f64, t_split: f64) -> Result<CircleDeterminant> {
    let fam = EigenvalueFamily::Circle { mass, length };
    let (result, spread) = zeta_robust(&fam, t_split)?;
    let closed_form = log_four_sinh_sq_half(mass * length);
    let logdet_sqrt = 0.5 * result.logdet;
    Ok(CircleDeterminant {
        result,
        closed_form,
        error: (result.logdet - closed_form).abs(),
        t_split_spread: spread,
        logdet_sqrt,
        logdet_twice_sqrt: logdet_sqrt + result.zeta0 * 2f64.ln(),
    })
}

/// One Fourier mode of the cylinder of height T over a circle of length L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderMode {
    pub k: i64,
    pub omega: f64,
    /// Two-boundary DN matrix ω[[coth ωT, −csch ωT], [−csch ωT, coth ωT]].
    pub dn: [[f64; 2]; 2],
    /// 2ω·tanh(ωT/2).
    pub jumpy: f64,
    /// e^{−ωT}.
    pub transition: f64,
}

impl CylinderMode {
    /// ⟨(f,g), DN(f,g)⟩.
    pub fn dn_form(&self, f: f64, g: f64) -> f64 {
        self.dn[0][0] * f * f + 2.0 * self.dn[0][1] * f * g + self.dn[1][1] * g * g
    }

    /// ∫₀^T (u′² + ω²u²) dt for the solution of u″ = ω²u with u(0)=f, u(T)=g,
    /// by Gauss–Legendre quadrature.
    pub fn dirichlet_energy(&self, f: f64, g: f64, height: f64) -> Result<f64> {
        let w = self.omega;
        let s = (w * height).sinh();
        let (x, wt) = gauss_legendre(64, 0.0, height)?;
        Ok(x.iter()
            .zip(&wt)
            .map(|(t, q)| {
                let u = (f * (w * (height - t)).sinh() + g * (w * t).sinh()) / s;
                let du = w * (-f * (w * (height - t)).cosh() + g * (w * t).cosh()) / s;
                q * (du * du + w * w * u * u)
            })
            .sum())
    }
}

/// Per-mode DN data of the flat cylinder.
pub fn dn_cylinder(mass: f64, length: f64, height: f64, k: i64) -> Result<CylinderMode> {
    positive("mass", mass)?;
    positive("length", length)?;
    positive("height", height)?;
    let w = mode_frequency(mass, length, k);
    let x = w * height;
    let coth = 1.0 / x.tanh();
    let csch = 2.0 * (-x).exp() / (1.0 - (-2.0 * x).exp());
    Ok(CylinderMode {
        k,
        omega: w,
        dn: [[w * coth, -w * csch], [-w * csch, w * coth]],
        jumpy: 2.0 * w * (0.5 * x).tanh(),
        transition: (-x).exp(),
    })
}

/// Σ_{|k|≤K} |2ω_k tanh(ω_kT/2) − 2ω_k| for each K in `cutoffs`.
pub fn jumpy_deviation_sums(mass: f64, length: f64, height: f64, cutoffs: &[i64]) -> Result<Vec<(i64, f64)>> {
    let kmax = cutoffs.iter().copied().max().unwrap_or(0);
    let mut partial = 0.0;
    let mut out = Vec::new();
    for k in 0..=kmax {
        let m = dn_cylinder(mass, length, height, k)?;
        let d = (m.jumpy - 2.0 * m.omega).abs();
        partial += if k == 0 { d } else { 2.0 * d };
        if cutoffs.contains(&k) {
            out.push((k, partial));
        }
    }
    Ok(out)
}

/// log det of the jumpy DN operator in closed form:
/// ½·log det(Δ_circle + m²) + Σ_k log tanh(ω_kT/2).
pub fn jumpy_dn_logdet_closed_form(mass: f64, length: f64, height: f64) -> Result<f64> {
    Ok(0.5 * log_four_sinh_sq_half(mass * length) + log_tanh_sum(mass, length, height)?)
}

/// Σ_{k∈ℤ} log tanh(ω_kT/2), the log of the Fredholm factor.
pub fn log_tanh_sum(mass: f64, length: f64, height: f64) -> Result<f64> {
    let values = trace_class_modes(
        |k| {
            let w = mode_frequency(mass, length, k as i64);
            (0.5 * w * height).tanh() - 1.0
        },
        1_000_000,
    )?;
    fredholm_log_det_diagonal(&values, 1.0)
}

/// Expands a symmetric mode sequence f(0), f(±1), … into a list with
/// multiplicity, stopping once |f(k)| < 1e−18.
pub fn trace_class_modes(f: impl Fn(usize) -> f64, max_modes: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..max_modes {
        let v = f(k);
        if !v.is_finite() {
            return Err(Error::NotTraceClass(format!("mode {k} is not finite")));
        }
        if v.abs() < 1e-18 {
            return Ok(out);
        }
        out.push(v);
        if k > 0 {
            out.push(v);
        }
    }
    Err(Error::NotTraceClass(format!(
        "mode values have not decayed after {max_modes} modes"
    )))
}

/// ∏(1 + zλ_k) for a diagonal trace-class family.
pub fn fredholm_det_diagonal(values: &[f64], z: f64) -> Result<f64> {
    let norm = trace_norm_of(values)?;
    let det: f64 = values.iter().map(|l| 1.0 + z * l).product();
    check_fredholm_bound(det, z, norm)?;
    Ok(det)
}

/// Σ log(1 + zλ_k), for families with every factor positive.
pub fn fredholm_log_det_diagonal(values: &[f64], z: f64) -> Result<f64> {
    let norm = trace_norm_of(values)?;
    let mut total = 0.0;
    for l in values {
        let f = 1.0 + z * l;
        if f <= 0.0 {
            return invalid("a Fredholm factor is not positive; use fredholm_det_diagonal");
        }
        total += (z * l).ln_1p();
    }
    if total > z.abs() * norm + 1e-12 {
        return Err(Error::Accuracy("Fredholm bound |det| ≤ exp(|z|‖A‖₁) violated".into()));
    }
    Ok(total)
}

fn trace_norm_of(values: &[f64]) -> Result<f64> {
    let n: f64 = values.iter().map(|l| l.abs()).sum();
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::NotTraceClass("trace norm diverges".into()))
    }
}

fn check_fredholm_bound(det: f64, z: f64, norm: f64) -> Result<()> {
    if det.abs() > (z.abs() * norm).exp() * (1.0 + 1e-12) {
        Err(Error::Accuracy("Fredholm bound |det| ≤ exp(|z|‖A‖₁) violated".into()))
    } else {
        Ok(())
    }
}

/// Trace norm Σ σ_i of a square matrix.
pub fn trace_norm(a: &DenseMatrix) -> Result<f64> {
    let mut ata = a.transpose_matmul(a);
    ata.symmetrize();
    Ok(sym_eigen(&ata)?.values.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// det(1 + zA) from power traces through the Plemelj–Smithies recursion
/// α_n = (1/n)·Σ_{k=1}^{n} (−1)^{k+1} tr(A^k) α_{n−k}.
pub fn fredholm_det_matrix(a: &DenseMatrix, z: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::ContractViolation(
            "Fredholm determinant of a non-square matrix".into(),
        ));
    }
    let n = a.rows();
    let za = a.scaled(z);
    let mut traces = Vec::with_capacity(n);
    let mut power = za.clone();
    for k in 0..n {
        if k > 0 {
            power = power.matmul(&za);
        }
        traces.push(power.trace());
    }
    let mut alpha = vec![1.0];
    for m in 1..=n {
        let mut s = 0.0;
        for k in 1..=m {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * traces[k - 1] * alpha[m - k];
        }
        alpha.push(s / m as f64);
    }
    let det: f64 = alpha.iter().sum();
    check_fredholm_bound(det, z, trace_norm(a)?)?;
    Ok(det)
}

/// log det(1 + A) for a matrix with 1 + A symmetric positive definite,
/// via Cholesky; used as an oracle for the recursion.
pub fn log_det_one_plus(a: &DenseMatrix) -> Result<f64> {
    let mut m = a.add(&DenseMatrix::identity(a.rows()));
    m.symmetrize();
    Ok(cholesky(&m)?.log_det())
}

#[derive(Debug, Clone, Serialize)]
pub struct BfkTorusReport {
    pub torus: ZetaResult,
    pub dirichlet: ZetaResult,
    pub dn: ZetaResult,
    /// ½·log det(circle) + Σ log tanh(ω_kT/2).
    pub dn_closed_form: f64,
    /// |log det torus − log det Dirichlet − log det DN|.
    pub residual: f64,
    /// max_k |4sinh²(ωT/2) / ((2sinh(ωT)/ω)·(2ω tanh(ωT/2))) − ½|·2, i.e. the
    /// deviation of the per-mode ratio from the constant ½.
    pub per_mode_ratio_deviation: f64,
    /// Regularized transverse mode count ζ_ω(0) from the continuation.
    pub zeta_omega0: f64,
    /// ζ_ω(0) from the directly summed heat trace at small t.
    pub zeta_omega0_direct: f64,
    /// (K, log of the naive per-mode product discrepancy over |k| ≤ K):
    /// grows like (2K+1)·log 2.
    pub naive_discrepancy: Vec<(i64, f64)>,
    /// Largest t_split spread among the three continuations.
    pub t_split_spread: f64,
}

/// Constant term of the circle heat trace at small t from the eigenvalue sum.
fn circle_constant_term_direct(mass: f64, length: f64) -> f64 {
    let t: f64 = 1e-5;
    let fam = EigenvalueFamily::Circle { mass, length };
    let singular: f64 = fam
        .heat_expansion()
        .iter()
        .filter(|(p, _)| *p != 0.0 && *p < 2.0)
        .map(|(p, c)| c * t.powf(*p))
        .sum();
    fam.heat_trace_direct(t) - singular
}

pub fn bfk_torus_check(mass: f64, length: f64, height: f64, t_split: f64) -> Result<BfkTorusReport> {
    let (torus, s1) = zeta_robust(&EigenvalueFamily::Torus { mass, length, height }, t_split)?;
    let (dirichlet, s2) = zeta_robust(&EigenvalueFamily::DirichletCylinder { mass, length, height }, t_split)?;
    let (dn_sq, s3) = zeta_robust(&EigenvalueFamily::JumpyDnSquared { mass, length, height }, t_split)?;
    let dn = ZetaResult {
        zeta0: dn_sq.zeta0,
        zeta_prime0: 0.5 * dn_sq.zeta_prime0,
        logdet: 0.5 * dn_sq.logdet,
        error_estimate: 0.5 * dn_sq.error_estimate,
        t_split: dn_sq.t_split,
    };
    let residual = (torus.logdet - dirichlet.logdet - dn.logdet).abs();

    let mut ratio_dev = 0.0f64;
    let mut naive = Vec::new();
    let mut partial = 0.0;
    for k in 0..=64i64 {
        let m = dn_cylinder(mass, length, height, k)?;
        let x = m.omega * height;
        let log_torus_mode = log_four_sinh_sq_half(x);
        let log_dirichlet_mode = (2.0 * x.sinh() / m.omega).ln();
        let log_dn_mode = m.jumpy.ln();
        let log_ratio = log_torus_mode - log_dirichlet_mode - log_dn_mode;
        ratio_dev = ratio_dev.max((log_ratio.exp() - 0.5).abs() * 2.0);
        partial += if k == 0 { -log_ratio } else { -2.0 * log_ratio };
        if [0, 1, 2, 4, 8, 16, 32, 64].contains(&k) {
            naive.push((k, partial));
        }
    }
    let zeta_omega0 = zeta_continue(&EigenvalueFamily::Circle { mass, length }, t_split)?.zeta0;
    Ok(BfkTorusReport {
        torus,
        dirichlet,
        dn,
        dn_closed_form: jumpy_dn_logdet_closed_form(mass, length, height)?,
        residual,
        per_mode_ratio_deviation: ratio_dev,
        zeta_omega0,
        zeta_omega0_direct: circle_constant_term_direct(mass, length),
        naive_discrepancy: naive,
        t_split_spread: s1.max(s2).max(0.5 * s3),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RnDetReport {
    /// log det_ζ(2𝔇).
    pub log_det_twice_sqrt: f64,
    /// log det_F(1 + (2𝔇)⁻¹(DN − 2𝔇)) = Σ log tanh(ω_kT/2).
    pub log_fredholm: f64,
    /// log det_ζ(DN) by continuation of DN².
    pub log_det_dn: f64,
    /// |log det(2𝔇) + log det_F − log det(DN)|.
    pub residual: f64,
}

/// det_ζ(2𝔇)·det_F(1 + (2𝔇)⁻¹(DN − 2𝔇)) = det_ζ(DN) on the jumpy DN family.
pub fn rn_det_identity(mass: f64, length: f64, height: f64, t_split: f64) -> Result<RnDetReport> {
    let circle = detzeta_circle(mass, length, t_split)?;
    let log_fredholm = log_tanh_sum(mass, length, height)?;
    let dn_sq = zeta_continue(&EigenvalueFamily::JumpyDnSquared { mass, length, height }, t_split)?;
    let log_det_dn = 0.5 * dn_sq.logdet;
    Ok(RnDetReport {
        log_det_twice_sqrt: circle.logdet_twice_sqrt,
        log_fredholm,
        log_det_dn,
        residual: (circle.logdet_twice_sqrt + log_fredholm - log_det_dn).abs(),
    })
}
