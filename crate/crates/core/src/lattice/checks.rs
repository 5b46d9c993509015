//! Exact finite-dimensional identities: Schur determinant gluing, Gaussian
//! conditioning in both orders, and reflection positivity on doubles.

use serde::Serialize;

use super::gff::{dn_map, log_density_from_precision, poisson_matrix, GaussianLaw, PrecisionOperator};
use super::graph::{GraphKind, VertexSet};
use crate::error::{invalid, Result};
use crate::numerics::{cholesky, complement, schur_complement, sym_eigen, DenseMatrix, RngStream};

#[derive(Debug, Clone, Serialize)]
pub struct BfkReport {
    pub log_det_q: f64,
    /// Sum over the components of the graph with Σ removed.
    pub log_det_dirichlet: f64,
    pub log_det_dn: f64,
    pub components: usize,
    /// |log det Q − log det Q_BB − log det DN| / |log det Q|.
    pub relative_residual: f64,
}

/// log det Q = log det Q_BB + log det DN, with Q_BB factorized per component
/// of the complement of Σ when a graph is attached.
pub fn bfk(q: &PrecisionOperator, sigma: &VertexSet) -> Result<BfkReport> {
    if sigma.is_empty() {
        return invalid("Σ must be nonempty");
    }
    let n = q.dim();
    let rest = sigma.complement(n);
    let comps = match q.graph() {
        Some(g) => g.components_without(sigma.indices()),
        None if rest.is_empty() => Vec::new(),
        None => vec![rest],
    };
    let mut log_det_dirichlet = 0.0;
    for c in &comps {
        log_det_dirichlet += cholesky(&q.matrix().select(c, c))?.log_det();
    }
    let log_det_dn = cholesky(&dn_map(q, sigma)?)?.log_det();
    let log_det_q = q.log_det();
    let residual = (log_det_q - log_det_dirichlet - log_det_dn).abs();
    Ok(BfkReport {
        log_det_q,
        log_det_dirichlet,
        log_det_dn,
        components: comps.len(),
        relative_residual: residual / log_det_q.abs().max(1.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BayesReport {
    pub points: usize,
    /// max |log p(x₁,x₂) − log p(x₁) − log p(x₂|x₁)|.
    pub forward_discrepancy: f64,
    /// max |log p(x₁,x₂) − log p(x₂) − log p(x₁|x₂)|.
    pub backward_discrepancy: f64,
    /// max |M₂₁ − C₂₁C₁₁⁻¹| over entries.
    pub transition_error: f64,
    /// Discrepancy of both factorizations at x = 0.
    pub zero_point_error: f64,
}

impl BayesReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.forward_discrepancy
            .max(self.backward_discrepancy)
            .max(self.zero_point_error)
    }
}

/// Conditional structure of φ_b given φ_a computed from Q alone.
struct Conditional {
    marginal_precision: crate::numerics::Cholesky,
    transition: DenseMatrix,
    conditional_precision: crate::numerics::Cholesky,
}

impl Conditional {
    fn new(q: &PrecisionOperator, a: &VertexSet, b: &VertexSet) -> Result<Self> {
        let n = q.dim();
        let marginal_precision = cholesky(&dn_map(q, a)?)?;
        let pi = poisson_matrix(q, a)?;
        let transition = pi.select(b.indices(), &(0..a.len()).collect::<Vec<_>>());
        let grounded = complement(n, a.indices());
        let q_free = q.matrix().select(&grounded, &grounded);
        let pos: Vec<usize> = b
            .indices()
            .iter()
            .map(|v| grounded.binary_search(v).expect("b is disjoint from a"))
            .collect();
        let conditional_precision = cholesky(&schur_complement(&q_free, &pos)?)?;
        Ok(Self {
            marginal_precision,
            transition,
            conditional_precision,
        })
    }

    fn log_factorized(&self, xa: &[f64], xb: &[f64]) -> f64 {
        let mean = self.transition.mat_vec(xa);
        let r: Vec<f64> = xb.iter().zip(&mean).map(|(x, m)| x - m).collect();
        log_density_from_precision(&self.marginal_precision, xa)
            + log_density_from_precision(&self.conditional_precision, &r)
    }
}

/// Compares the dense-covariance joint density of (φ_{s1}, φ_{s2}) with the
/// two factorizations marginal × conditional built from blocks of Q, at
/// `points` draws of the joint law.
pub fn bayes_check(
    q: &PrecisionOperator,
    s1: &VertexSet,
    s2: &VertexSet,
    points: usize,
    rng: &RngStream,
) -> Result<BayesReport> {
    if s1.is_empty() || s2.is_empty() {
        return invalid("both vertex sets must be nonempty");
    }
    if !s1.is_disjoint(s2) {
        return invalid("vertex sets overlap");
    }
    let idx: Vec<usize> = s1.indices().iter().chain(s2.indices()).copied().collect();
    let (k1, k2) = (s1.len(), s2.len());
    let joint_cov = q.covariance().select(&idx, &idx);
    let joint = GaussianLaw::centered(joint_cov.clone())?;
    let joint_chol = cholesky(&joint_cov)?;

    let forward = Conditional::new(q, s1, s2)?;
    let backward = Conditional::new(q, s2, s1)?;

    let c21 = q.covariance().select(s2.indices(), s1.indices());
    let c11 = q.covariance().select(s1.indices(), s1.indices());
    let regression = cholesky(&c11)?.solve_matrix(&c21.transpose()).transpose();
    let transition_error = regression.max_abs_diff(&forward.transition);

    let evaluate = |x: &[f64]| -> Result<(f64, f64)> {
        let (x1, x2) = x.split_at(k1);
        let lj = joint.log_density(x)?;
        Ok((
            (lj - forward.log_factorized(x1, x2)).abs(),
            (lj - backward.log_factorized(x2, x1)).abs(),
        ))
    };
    let zero = evaluate(&vec![0.0; k1 + k2])?;

    let l = joint_chol.factor();
    let mut stream = rng.clone();
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let z = stream.normal_vec(k1 + k2);
        let x = l.mat_vec(&z);
        let (a, b) = evaluate(&x)?;
        fwd = fwd.max(a);
        bwd = bwd.max(b);
    }
    Ok(BayesReport {
        points,
        forward_discrepancy: fwd,
        backward_discrepancy: bwd,
        transition_error,
        zero_point_error: zero.0.max(zero.1),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RpReport {
    /// max |(Q⁻¹)_ΩΩ − C_D − PI·DN⁻¹·PIᵀ|.
    pub markov_error: f64,
    /// max |2·C[θx, y] − (C_N − C_D)[x, y]| over x, y ∈ Ω.
    pub pairing_error: f64,
    /// Smallest eigenvalue of C_N − C_D.
    pub min_eigenvalue: f64,
    /// max |C_ΣΣ − DN⁻¹|: the pairing restricted to Σ-supported functions.
    pub sigma_pairing_error: f64,
}

/// Reflection-positivity identities on a double with Σ, Ω and involution θ.
///
/// C_D = (Q_ΩΩ)⁻¹, PI is the Poisson kernel from Σ into Ω, the one-sided DN
/// is ½Q_ΣΣ − Q_ΣΩQ_ΩΩ⁻¹Q_ΩΣ and C_N = C_D + PI·DN_Ω⁻¹·PIᵀ.
pub fn rp_check(q: &PrecisionOperator) -> Result<RpReport> {
    let graph = q.require_graph()?;
    let (sigma, omega, involution) = match graph.kind() {
        GraphKind::Double {
            sigma,
            omega,
            involution,
        } => (sigma, omega, involution),
        _ => return invalid("reflection positivity needs a double with an involution"),
    };
    let qm = q.matrix();
    let q_oo = cholesky(&qm.select(omega, omega))?;
    let c_d = q_oo.inverse();
    let q_os = qm.select(omega, sigma);
    let x = q_oo.solve_matrix(&q_os);
    let pi = x.scaled(-1.0);
    let mut dn_half = qm.select(sigma, sigma).scaled(0.5).sub(&q_os.transpose_matmul(&x));
    dn_half.symmetrize();
    let dn_half_inv = cholesky(&dn_half)?.inverse();
    let mut gap = pi.matmul(&dn_half_inv).matmul(&pi.transpose());
    gap.symmetrize();

    let c = q.covariance();
    let dn_full_inv = cholesky(&dn_map(q, &VertexSet::new(q.dim(), sigma.clone())?)?)?.inverse();
    let mut harmonic = pi.matmul(&dn_full_inv).matmul(&pi.transpose());
    harmonic.symmetrize();
    let markov_error = c.select(omega, omega).sub(&c_d).max_abs_diff(&harmonic);

    let mirrored: Vec<usize> = omega.iter().map(|&v| involution[v]).collect();
    let pairing = c.select(&mirrored, omega).scaled(2.0);
    let pairing_error = pairing.max_abs_diff(&gap);

    let min_eigenvalue = sym_eigen(&gap)?.values.last().copied().unwrap_or(0.0);
    let sigma_pairing_error = c.select(sigma, sigma).max_abs_diff(&dn_full_inv);
    Ok(RpReport {
        markov_error,
        pairing_error,
        min_eigenvalue,
        sigma_pairing_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::graph::LatticeGraph;

    #[test]
    fn bfk_on_torus_cycle() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(16, 16, 1.0 / 16.0).unwrap(), 1.0).unwrap();
        let r = bfk(&q, &VertexSet::torus_row(16, 0)).unwrap();
        assert_eq!(r.components, 1);
        assert!(r.relative_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn bfk_dissecting() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(8, 8, 0.125).unwrap(), 1.0).unwrap();
        let sigma = VertexSet::new(64, (0..8).chain(32..40).collect::<Vec<_>>()).unwrap();
        let r = bfk(&q, &sigma).unwrap();
        assert_eq!(r.components, 2);
        assert!(r.relative_residual < 1e-10);
    }

    #[test]
    fn bayes_on_torus() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(12, 12, 1.0 / 12.0).unwrap(), 1.0).unwrap();
        let s1 = VertexSet::new(144, (0..12).collect::<Vec<_>>()).unwrap();
        let s2 = VertexSet::new(144, vec![6 * 12 + 5, 6 * 12 + 6, 8 * 12 + 2]).unwrap();
        let r = bayes_check(&q, &s1, &s2, 1000, &RngStream::new(4, 0)).unwrap();
        assert!(r.max_discrepancy() < 1e-8, "{r:?}");
        assert!(r.transition_error < 1e-10);
        assert!(r.zero_point_error < 1e-10);
        assert!(bayes_check(&q, &s1, &s1, 1, &RngStream::new(4, 0)).is_err());
    }

    #[test]
    fn rp_on_doubles() {
        for g in [
            LatticeGraph::grid_double(2, 4, 1.0, false).unwrap(),
            LatticeGraph::torus_double(6, 8, 0.5).unwrap(),
            LatticeGraph::grid_double(5, 3, 0.25, true).unwrap(),
        ] {
            let q = PrecisionOperator::new(&g, 1.0).unwrap();
            let r = rp_check(&q).unwrap();
            assert!(r.markov_error < 1e-10, "{r:?}");
            assert!(r.pairing_error < 1e-10, "{r:?}");
            assert!(r.min_eigenvalue >= -1e-10, "{r:?}");
            assert!(r.sigma_pairing_error < 1e-10, "{r:?}");
        }
        let plain = PrecisionOperator::new(&LatticeGraph::torus(4, 4, 1.0).unwrap(), 1.0).unwrap();
        assert!(rp_check(&plain).is_err());
    }
}
