//! Wick-ordered polynomial interactions on the lattice free field.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{
    markov_decompose, quad_perturb, sample, sample_mean, GraphKind, LatticeGraph, PrecisionOperator, VertexSet,
};
use crate::numerics::{cholesky, factorial, sym_eigen, DenseMatrix, MeanAccumulator, RngStream};
use crate::poly::Polynomial;
use crate::spectral::fit_slope;
use crate::wick::{reorder_coefficients, wick_lower_bound};

/// Interaction polynomial and a nonnegative cutoff weight per vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionSpec {
    p: Polynomial,
    chi: Vec<f64>,
}

impl InteractionSpec {
    pub fn new(p: Polynomial, chi: Vec<f64>) -> Result<Self> {
        if !p.is_bounded_below() {
            return Err(Error::InvalidInteraction(format!(
                "degree {} polynomial with leading coefficient {} is not bounded below",
                p.degree(),
                p.leading()
            )));
        }
        if let Some(c) = chi.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return invalid(format!("cutoff weight {c} must be finite and nonnegative"));
        }
        Ok(Self { p, chi })
    }

    /// Cutoff χ ≡ 1 on n vertices.
    pub fn uniform(p: Polynomial, n: usize) -> Result<Self> {
        Self::new(p, vec![1.0; n])
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.p
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.chi.len() == n {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: n,
                found: self.chi.len(),
            })
        }
    }
}

/// Per-vertex Wick variances c_x = (Q⁻¹)_xx.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TadpoleField {
    pub values: Vec<f64>,
}

impl TadpoleField {
    /// max_x c_x − min_x c_x.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    }
}

/// Diagonal of Q⁻¹; the exact Fourier sum on tori, the dense inverse otherwise.
pub fn tadpole(q: &PrecisionOperator) -> TadpoleField {
    if let Some(GraphKind::Torus { n1, n2, spacing }) = q.graph().map(|g| g.kind()) {
        let c = torus_tadpole(*n1, *n2, *spacing, q.mass());
        return TadpoleField {
            values: vec![c; n1 * n2],
        };
    }
    TadpoleField {
        values: q.covariance().diag(),
    }
}

/// Eigenvalues 2 − 2cos(2πk/n) of the cycle Laplacian, with merged edges for n ≤ 2.
fn cycle_laplacian_symbol(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if n == 1 {
                0.0
            } else {
                2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()
            }
        })
        .collect()
}

/// (1/N)·Σ_k 1/(ℓ_{k1} + ℓ_{k2} + m²a²) on an n1 × n2 torus with unit edges.
pub fn torus_tadpole(n1: usize, n2: usize, spacing: f64, mass: f64) -> f64 {
    let s1 = cycle_laplacian_symbol(n1);
    let s2 = cycle_laplacian_symbol(n2);
    let shift = mass * mass * spacing * spacing;
    let mut total = 0.0;
    for a in &s2 {
        for b in &s1 {
            total += 1.0 / (a + b + shift);
        }
    }
    total / (n1 * n2) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct TadpoleFit {
    /// (a, c(a)) pairs.
    pub points: Vec<(f64, f64)>,
    /// Coefficient β of log(1/a).
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits c(a) = β·log(1/a) + γ on a torus of fixed side length.
pub fn tadpole_fit(side: f64, mass: f64, spacings: &[f64]) -> Result<TadpoleFit> {
    if spacings.len() < 3 {
        return invalid("tadpole fit needs at least three spacings");
    }
    let mut points = Vec::with_capacity(spacings.len());
    for &a in spacings {
        let n = (side / a).round();
        if n < 1.0 || ((n * a) - side).abs() > 1e-9 * side {
            return invalid(format!("spacing {a} does not divide the side {side}"));
        }
        let n = n as usize;
        points.push((a, torus_tadpole(n, n, a, mass)));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(a, c)| (-a.ln(), c)).collect();
    let slope = fit_slope(&xy).ok_or_else(|| Error::InvalidInput("degenerate spacing list".into()))?;
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let intercept = my - slope * mx;
    let ss_res: f64 = xy.iter().map(|&(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = xy.iter().map(|&(_, y)| (y - my).powi(2)).sum();
    Ok(TadpoleFit {
        points,
        slope,
        intercept,
        r_squared: 1.0 - ss_res / ss_tot,
    })
}

/// Evaluates S(φ) = Σ_x μ_x χ_x :P:_{c_x}(φ_x).
#[derive(Debug, Clone)]
pub struct WickAction {
    coeffs: Vec<f64>,
    weight: Vec<f64>,
    variance: Vec<f64>,
}

impl WickAction {
    /// Wick ordering at the exact per-vertex variances.
    pub fn new(spec: &InteractionSpec, q: &PrecisionOperator) -> Result<Self> {
        let t = tadpole(q);
        Self::with_variances(spec, &q.vertex_measure(), &t.values)
    }

    pub fn with_variances(spec: &InteractionSpec, measure: &[f64], variance: &[f64]) -> Result<Self> {
        spec.check_dim(measure.len())?;
        if variance.len() != measure.len() {
            return Err(Error::Dimension {
                expected: measure.len(),
                found: variance.len(),
            });
        }
        if variance.iter().any(|c| !(*c >= 0.0)) {
            return invalid("Wick variances must be nonnegative");
        }
        Ok(Self {
            coeffs: spec.p.coeffs().to_vec(),
            weight: measure.iter().zip(&spec.chi).map(|(m, c)| m * c).collect(),
            variance: variance.to_vec(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn variances(&self) -> &[f64] {
        &self.variance
    }

    /// :P:_c(x) through H_{k+1} = x·H_k − k·c·H_{k−1}.
    pub fn site_value(&self, x: f64, c: f64) -> f64 {
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut total = 0.0;
        for (k, &pk) in self.coeffs.iter().enumerate() {
            total += pk * cur;
            let next = x * cur - k as f64 * c * prev;
            prev = cur;
            cur = next;
        }
        total
    }

    pub fn eval(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.weight.len() {
            return Err(Error::Dimension {
                expected: self.weight.len(),
                found: phi.len(),
            });
        }
        Ok(self.eval_on(phi, 0..phi.len()))
    }

    /// Sum restricted to the listed vertices.
    pub fn eval_on(&self, phi: &[f64], vertices: impl IntoIterator<Item = usize>) -> f64 {
        vertices
            .into_iter()
            .filter(|&x| self.weight[x] != 0.0)
            .map(|x| self.weight[x] * self.site_value(phi[x], self.variance[x]))
            .sum()
    }

    /// Σ_x μ_x χ_x · min_ℝ :P:_{c_x}.
    pub fn lower_bound(&self) -> Result<f64> {
        let p = Polynomial::new(self.coeffs.clone());
        let mut cache: HashMap<u64, f64> = HashMap::new();
        let mut total = 0.0;
        for (w, c) in self.weight.iter().zip(&self.variance) {
            if *w == 0.0 {
                continue;
            }
            let min = match cache.get(&c.to_bits()) {
                Some(m) => *m,
                None => {
                    let m = wick_lower_bound(&p, *c)?;
                    cache.insert(c.to_bits(), m);
                    m
                }
            };
            total += w * min;
        }
        Ok(total)
    }

    /// E[S] = p₀·Σ μχ.
    pub fn mean(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0) * self.weight.iter().sum::<f64>()
    }

    /// Coefficients of :P:_{c_x} in the :·:_{c_ref} basis at vertex x.
    pub fn reference_coefficients(&self, x: usize, c_ref: f64) -> Vec<f64> {
        reorder_coefficients(&self.coeffs, c_ref - self.variance[x])
    }
}

pub fn wick_action(spec: &InteractionSpec, q: &PrecisionOperator, phi: &[f64]) -> Result<f64> {
    WickAction::new(spec, q)?.eval(phi)
}

/// Var(S) for P = λ·θ^{2n}: λ²(2n)!·Σ_{x,y} w_x w_y (C_xy)^{2n}.
pub fn action_variance(spec: &InteractionSpec, q: &PrecisionOperator) -> Result<f64> {
    match spec.p.as_monomial() {
        Some((k, _)) if k % 2 == 0 && k > 0 => action_variance_general(spec, q),
        _ if spec.p.is_zero() => Ok(0.0),
        _ => invalid("action_variance needs a pure even power; use action_variance_general"),
    }
}

/// Var(S) = Σ_{k≥1} p_k²·k!·Σ_{x,y} w_x w_y (C_xy)^k, from orthogonality of
/// Wick powers taken at the exact variances.
pub fn action_variance_general(spec: &InteractionSpec, q: &PrecisionOperator) -> Result<f64> {
    spec.check_dim(q.dim())?;
    let c = q.covariance();
    let w: Vec<f64> = q.vertex_measure().iter().zip(&spec.chi).map(|(m, x)| m * x).collect();
    Ok(weighted_power_sum(spec.p.coeffs(), &w, &w, |x, y| c[(x, y)]))
}

fn weighted_power_sum(coeffs: &[f64], wa: &[f64], wb: &[f64], cov: impl Fn(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    for (x, &a) in wa.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (y, &b) in wb.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let cxy = cov(x, y);
            let mut power = 1.0;
            let mut s = 0.0;
            for (k, &pk) in coeffs.iter().enumerate().skip(1) {
                power *= cxy;
                s += pk * pk * factorial(k) * power;
            }
            total += a * b * s;
        }
    }
    total
}

/// Monte-Carlo E[e^{−S}] under the free field.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    /// (Σw)²/Σw² of the weights e^{−S}.
    pub effective_sample_size: f64,
}

pub fn partition_mc(
    spec: &InteractionSpec,
    q: &PrecisionOperator,
    n_samples: usize,
    rng: &RngStream,
) -> Result<McEstimate> {
    let action = WickAction::new(spec, q)?;
    if spec.p.is_zero() {
        return Ok(McEstimate {
            estimate: 1.0,
            std_error: 0.0,
            samples: n_samples,
            effective_sample_size: n_samples as f64,
        });
    }
    let acc = sample_mean(q, n_samples, rng, |phi| (-action.eval_on(phi, 0..phi.len())).exp());
    let second = acc.variance() * (acc.count.saturating_sub(1)) as f64 / acc.count.max(1) as f64 + acc.mean * acc.mean;
    let ess = if second > 0.0 {
        n_samples as f64 * acc.mean * acc.mean / second
    } else {
        n_samples as f64
    };
    if ess < 0.01 * n_samples as f64 {
        eprintln!("warning: effective sample size {ess:.1} of {n_samples} draws");
    }
    Ok(McEstimate {
        estimate: acc.mean,
        std_error: acc.std_error(),
        samples: n_samples,
        effective_sample_size: ess,
    })
}

/// Exact E[e^{−S}] for P = p₀ + p₂θ²: with :θ²: = θ² − c this is
/// exp(−Σ w(p₀ − p₂c))·det(I + C^{1/2}VC^{1/2})^{−1/2}, V = diag(2p₂w).
pub fn quadratic_oracle(spec: &InteractionSpec, q: &PrecisionOperator) -> Result<f64> {
    let p = &spec.p;
    if p.degree() > 2 || p.coeff(1) != 0.0 {
        return invalid("quadratic oracle needs P = p0 + p2·θ²");
    }
    let action = WickAction::new(spec, q)?;
    let (p0, p2) = (p.coeff(0), p.coeff(2));
    let shift: f64 = action
        .weight
        .iter()
        .zip(&action.variance)
        .map(|(w, c)| w * (p0 - p2 * c))
        .sum();
    let v = DenseMatrix::diagonal(&action.weight.iter().map(|w| 2.0 * p2 * w).collect::<Vec<_>>());
    Ok((-shift + quad_perturb(q, &v)?.log_z).exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct DecoupleReport {
    pub samples: usize,
    pub regions: usize,
    /// max |S_M(φ) − Σ_regions S_R(φ^D + PI·φ_Σ)|.
    pub decomposition_error: f64,
    /// max |PI·φ_Σ on a region − the same extension solved inside that region|.
    pub locality_error: f64,
    /// Largest change of a region action when φ is perturbed outside the
    /// region and Σ (zero means bit-identical).
    pub perturbation_change: f64,
}

/// Splits the action along the components of the graph with Σ removed and
/// checks the pieces against the Markov decomposition of sampled fields.
pub fn decouple_check(
    q: &PrecisionOperator,
    sigma: &VertexSet,
    spec: &InteractionSpec,
    samples: usize,
    rng: &RngStream,
) -> Result<DecoupleReport> {
    let graph = q.require_graph()?;
    let regions = graph.components_without(sigma.indices());
    if regions.len() < 2 {
        return invalid("Σ does not dissect the graph");
    }
    let action = WickAction::new(spec, q)?;
    let decomposition = markov_decompose(q, sigma)?;
    let qm = q.matrix();

    let mut local_poisson = Vec::with_capacity(regions.len());
    for r in &regions {
        let q_rr = cholesky(&qm.select(r, r))?;
        let q_rs = qm.select(r, sigma.indices());
        local_poisson.push(q_rr.solve_matrix(&q_rs).scaled(-1.0));
    }
    let fields = sample(q, samples, rng);
    let mut perturb = rng.substream(u64::MAX);

    let (mut dec_err, mut loc_err, mut pert) = (0.0f64, 0.0f64, 0.0f64);
    for s in 0..samples {
        let phi = fields.row(s);
        let total = action.eval(phi)?;
        let (harmonic, dirichlet) = decomposition.split(phi);
        let rebuilt: Vec<f64> = harmonic.iter().zip(&dirichlet).map(|(h, d)| h + d).collect();
        let mut pieces = action.eval_on(&rebuilt, sigma.indices().iter().copied());
        for r in &regions {
            pieces += action.eval_on(&rebuilt, r.iter().copied());
        }
        dec_err = dec_err.max((total - pieces).abs());

        let boundary: Vec<f64> = sigma.indices().iter().map(|&v| phi[v]).collect();
        for (r, lp) in regions.iter().zip(&local_poisson) {
            let local = lp.mat_vec(&boundary);
            for (i, &v) in r.iter().enumerate() {
                loc_err = loc_err.max((local[i] - harmonic[v]).abs());
            }
        }

        let target = &regions[0];
        let before = action.eval_on(phi, target.iter().copied());
        let mut moved = phi.to_vec();
        for r in &regions[1..] {
            for &v in r {
                moved[v] += perturb.normal();
            }
        }
        let after = action.eval_on(&moved, target.iter().copied());
        pert = pert.max((after - before).abs());
    }
    Ok(DecoupleReport {
        samples,
        regions: regions.len(),
        decomposition_error: dec_err,
        locality_error: loc_err,
        perturbation_change: pert,
    })
}

/// Row of the mollifier comparison.
#[derive(Debug, Clone, Serialize)]
pub struct MollifierRow {
    pub radius: usize,
    /// Physical smoothing scale r·a.
    pub epsilon: f64,
    /// Heat-flow time τ = r(r+1)/6 in lattice units.
    pub heat_time: f64,
    /// Exact L²(μ) distance between the two mollified Wick actions.
    pub distance: f64,
    /// Monte-Carlo estimate of the same distance, with standard error.
    pub distance_mc: Option<f64>,
    pub distance_mc_error: Option<f64>,
}

/// Averaging over 2r+1 consecutive sites of an n-cycle.
fn cycle_box(n: usize, r: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    let w = 1.0 / (2 * r + 1) as f64;
    for i in 0..n {
        for d in -(r as isize)..=(r as isize) {
            let j = (i as isize + d).rem_euclid(n as isize) as usize;
            m[(i, j)] += w;
        }
    }
    m
}

/// e^{−τL} on an n-cycle with unit edges (merged edges for n ≤ 2).
fn cycle_heat(n: usize, tau: f64) -> Result<DenseMatrix> {
    if tau == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }
    let g = LatticeGraph::cycle(n, 1.0)?;
    let l = crate::lattice::graph_laplacian(&g);
    Ok(sym_eigen(&l)?.map_values(|v| (-tau * v).exp()))
}

/// Box average and heat flow on an n1 × n2 torus, as Kronecker products of
/// ring operators.
pub fn torus_mollifiers(n1: usize, n2: usize, radius: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let tau = (radius * (radius + 1)) as f64 / 6.0;
    let boxed = cycle_box(n2, radius).kron(&cycle_box(n1, radius));
    let heat = cycle_heat(n2, tau)?.kron(&cycle_heat(n1, tau)?);
    Ok((boxed, heat))
}

/// L²(μ) distance between the Wick actions of the box-averaged and
/// heat-smoothed fields, each Wick ordered at its own variance, for every
/// radius in `radii`. `mc_samples > 0` adds a Monte-Carlo estimate.
pub fn mollifier_compare(
    q: &PrecisionOperator,
    spec: &InteractionSpec,
    radii: &[usize],
    mc_samples: usize,
    rng: &RngStream,
) -> Result<Vec<MollifierRow>> {
    let graph = q.require_graph()?;
    let (n1, n2, spacing) = match graph.kind() {
        GraphKind::Torus { n1, n2, spacing } => (*n1, *n2, *spacing),
        _ => return invalid("mollifier comparison needs a torus"),
    };
    spec.check_dim(q.dim())?;
    let c = q.covariance();
    let w: Vec<f64> = q.vertex_measure().iter().zip(&spec.chi).map(|(m, x)| m * x).collect();
    let mut rows = Vec::with_capacity(radii.len());
    for (i, &r) in radii.iter().enumerate() {
        let (b, h) = torus_mollifiers(n1, n2, r)?;
        let c_bb = b.matmul(c).matmul(&b.transpose());
        let c_hh = h.matmul(c).matmul(&h.transpose());
        let c_bh = b.matmul(c).matmul(&h.transpose());
        let sq = weighted_power_sum(spec.p.coeffs(), &w, &w, |x, y| c_bb[(x, y)])
            + weighted_power_sum(spec.p.coeffs(), &w, &w, |x, y| c_hh[(x, y)])
            - 2.0 * weighted_power_sum(spec.p.coeffs(), &w, &w, |x, y| c_bh[(x, y)]);
        let distance = sq.max(0.0).sqrt();
        let (distance_mc, distance_mc_error) = if mc_samples > 0 {
            let measure = q.vertex_measure();
            let sb = WickAction::with_variances(spec, &measure, &c_bb.diag())?;
            let sh = WickAction::with_variances(spec, &measure, &c_hh.diag())?;
            let acc: MeanAccumulator = sample_mean(q, mc_samples, &rng.substream(i as u64), |phi| {
                let d = sb.eval_on(&b.mat_vec(phi), 0..phi.len()) - sh.eval_on(&h.mat_vec(phi), 0..phi.len());
                d * d
            });
            let est = acc.mean.max(0.0).sqrt();
            let err = if est > 0.0 {
                acc.std_error() / (2.0 * est)
            } else {
                acc.std_error().sqrt()
            };
            (Some(est), Some(err))
        } else {
            (None, None)
        };
        rows.push(MollifierRow {
            radius: r,
            epsilon: r as f64 * spacing,
            heat_time: (r * (r + 1)) as f64 / 6.0,
            distance,
            distance_mc,
            distance_mc_error,
        });
    }
    Ok(rows)
}
