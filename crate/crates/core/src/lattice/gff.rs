use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use super::graph::{LatticeGraph, VertexSet};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    cholesky, chunked_parallel, dot, schur_complement, Cholesky, DenseMatrix, MeanAccumulator, RngStream,
};

/// Q = L_w + m²·diag(μ) on a lattice graph, or an arbitrary SPD precision.
#[derive(Debug)]
pub struct PrecisionOperator {
    graph: Option<LatticeGraph>,
    mass: f64,
    q: DenseMatrix,
    chol: Cholesky,
    cov: OnceLock<DenseMatrix>,
}

impl Clone for PrecisionOperator {
    fn clone(&self) -> Self {
        Self {
            graph: self.graph.clone(),
            mass: self.mass,
            q: self.q.clone(),
            chol: self.chol.clone(),
            cov: self.cov.get().cloned().map(OnceLock::from).unwrap_or_default(),
        }
    }
}

/// Weighted graph Laplacian Σ_edges w(e_i − e_j)(e_i − e_j)ᵀ.
pub fn graph_laplacian(graph: &LatticeGraph) -> DenseMatrix {
    let n = graph.n_vertices();
    let mut l = DenseMatrix::zeros(n, n);
    for e in graph.edges() {
        l[(e.i, e.i)] += e.weight;
        l[(e.j, e.j)] += e.weight;
        l[(e.i, e.j)] -= e.weight;
        l[(e.j, e.i)] -= e.weight;
    }
    l
}

impl PrecisionOperator {
    pub fn new(graph: &LatticeGraph, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return invalid("mass must be positive");
        }
        let mut q = graph_laplacian(graph);
        for (v, mu) in graph.vertex_measure().iter().enumerate() {
            q[(v, v)] += mass * mass * mu;
        }
        let chol = cholesky(&q)?;
        Ok(Self {
            graph: Some(graph.clone()),
            mass,
            q,
            chol,
            cov: OnceLock::new(),
        })
    }

    /// Wraps a symmetric positive-definite matrix with no graph attached.
    pub fn from_matrix(q: DenseMatrix) -> Result<Self> {
        if !q.is_finite() {
            return invalid("precision has non-finite entries");
        }
        if !q.is_symmetric() {
            return Err(Error::ContractViolation("precision matrix is not symmetric".into()));
        }
        let chol = cholesky(&q)?;
        Ok(Self {
            graph: None,
            mass: 0.0,
            q,
            chol,
            cov: OnceLock::new(),
        })
    }

    pub fn graph(&self) -> Option<&LatticeGraph> {
        self.graph.as_ref()
    }

    pub fn require_graph(&self) -> Result<&LatticeGraph> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("operation needs a lattice graph".into()))
    }

    /// Zero when built from a bare matrix.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    /// Q⁻¹, computed once.
    pub fn covariance(&self) -> &DenseMatrix {
        self.cov.get_or_init(|| self.chol.inverse())
    }

    pub fn vertex_measure(&self) -> Vec<f64> {
        match &self.graph {
            Some(g) => g.vertex_measure().to_vec(),
            None => vec![1.0; self.dim()],
        }
    }

    fn check_set(&self, s: &VertexSet) -> Result<()> {
        match s.indices().last() {
            Some(&v) if v >= self.dim() => invalid("vertex set exceeds operator dimension"),
            _ => Ok(()),
        }
    }
}

/// Centered or shifted Gaussian law on ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianLaw {
    mean: Vec<f64>,
    covariance: DenseMatrix,
}

impl GaussianLaw {
    /// Rejects asymmetric covariances and ones with an eigenvalue below
    /// −1e−10·‖C‖.
    pub fn new(mean: Vec<f64>, covariance: DenseMatrix) -> Result<Self> {
        let n = covariance.rows();
        if covariance.cols() != n || mean.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: mean.len(),
            });
        }
        if !covariance.is_finite() || mean.iter().any(|m| !m.is_finite()) {
            return invalid("Gaussian law has non-finite parameters");
        }
        if !covariance.is_symmetric() {
            return Err(Error::ContractViolation("covariance is not symmetric".into()));
        }
        if n > 0 {
            let shift = 1e-10 * covariance.max_abs().max(f64::MIN_POSITIVE);
            let shifted = covariance.add(&DenseMatrix::identity(n).scaled(shift));
            if cholesky(&shifted).is_err() {
                return Err(Error::ContractViolation(
                    "covariance is not positive semidefinite".into(),
                ));
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn centered(covariance: DenseMatrix) -> Result<Self> {
        Self::new(vec![0.0; covariance.rows()], covariance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DenseMatrix {
        &self.covariance
    }

    /// Log of the Lebesgue density; needs a nondegenerate covariance.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let chol = cholesky(&self.covariance)?;
        let mut r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        chol.forward(&mut r);
        Ok(-0.5 * dot(&r, &r) - 0.5 * chol.log_det() - 0.5 * self.dim() as f64 * (2.0 * PI).ln())
    }
}

/// Log-density of N(0, P⁻¹) from a precision factorization.
pub fn log_density_from_precision(precision: &Cholesky, x: &[f64]) -> f64 {
    let l = precision.factor();
    let n = x.len();
    let mut quad = 0.0;
    for j in 0..n {
        let s: f64 = (j..n).map(|i| l[(i, j)] * x[i]).sum();
        quad += s * s;
    }
    -0.5 * quad + 0.5 * precision.log_det() - 0.5 * n as f64 * (2.0 * PI).ln()
}

/// The lattice Gaussian free field: mean zero, covariance Q⁻¹.
pub fn green(q: &PrecisionOperator) -> GaussianLaw {
    GaussianLaw {
        mean: vec![0.0; q.dim()],
        covariance: q.covariance().clone(),
    }
}

/// `count` independent draws from the free field, one per row, obtained as
/// L⁻ᵀz with Q = LLᵀ and z standard normal.
pub fn sample(q: &PrecisionOperator, count: usize, rng: &RngStream) -> DenseMatrix {
    let n = q.dim();
    let chol = q.cholesky();
    let chunks = chunked_parallel(rng, count, |stream, draws| {
        let mut out = Vec::with_capacity(draws * n);
        for _ in 0..draws {
            let mut z = stream.normal_vec(n);
            chol.backward(&mut z);
            out.extend_from_slice(&z);
        }
        out
    });
    let data: Vec<f64> = chunks.into_iter().flatten().collect();
    DenseMatrix::new(count, n, data).expect("sample buffer has count·n entries")
}

/// Applies `f` to each free-field draw without storing the samples and
/// accumulates the results in chunk order.
pub fn sample_mean(
    q: &PrecisionOperator,
    count: usize,
    rng: &RngStream,
    f: impl Fn(&[f64]) -> f64 + Sync,
) -> MeanAccumulator {
    let n = q.dim();
    let chol = q.cholesky();
    let parts = chunked_parallel(rng, count, |stream, draws| {
        let mut acc = MeanAccumulator::default();
        let mut z = vec![0.0; n];
        for _ in 0..draws {
            stream.fill_normal(&mut z);
            chol.backward(&mut z);
            acc.push(f(&z));
        }
        acc
    });
    MeanAccumulator::merge_all(&parts)
}

/// Schur complement of Q onto Σ.
pub fn dn_map(q: &PrecisionOperator, sigma: &VertexSet) -> Result<DenseMatrix> {
    q.check_set(sigma)?;
    schur_complement(q.matrix(), sigma.indices())
}

/// Harmonic extension of boundary values f on Σ: u|_Σ = f and (Qu) = 0 off Σ.
pub fn poisson_extend(q: &PrecisionOperator, sigma: &VertexSet, f: &[f64]) -> Result<Vec<f64>> {
    q.check_set(sigma)?;
    if f.len() != sigma.len() {
        return Err(Error::Dimension {
            expected: sigma.len(),
            found: f.len(),
        });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return invalid("boundary data must be finite");
    }
    let n = q.dim();
    let mut u = vec![0.0; n];
    for (&s, &v) in sigma.indices().iter().zip(f) {
        u[s] = v;
    }
    let rest = sigma.complement(n);
    if rest.is_empty() || sigma.is_empty() {
        return Ok(u);
    }
    let qm = q.matrix();
    let rhs: Vec<f64> = rest
        .iter()
        .map(|&b| {
            -sigma
                .indices()
                .iter()
                .zip(f)
                .map(|(&s, &v)| qm[(b, s)] * v)
                .sum::<f64>()
        })
        .collect();
    let inner = cholesky(&qm.select(&rest, &rest))?.solve(&rhs);
    for (&b, v) in rest.iter().zip(inner) {
        u[b] = v;
    }
    Ok(u)
}

/// Poisson kernel: n × |Σ| matrix whose columns extend unit boundary data.
pub fn poisson_matrix(q: &PrecisionOperator, sigma: &VertexSet) -> Result<DenseMatrix> {
    q.check_set(sigma)?;
    let n = q.dim();
    let k = sigma.len();
    let mut pi = DenseMatrix::zeros(n, k);
    for (a, &s) in sigma.indices().iter().enumerate() {
        pi[(s, a)] = 1.0;
    }
    let rest = sigma.complement(n);
    if rest.is_empty() || k == 0 {
        return Ok(pi);
    }
    let qm = q.matrix();
    let q_rs = qm.select(&rest, sigma.indices());
    let sol = cholesky(&qm.select(&rest, &rest))?.solve_matrix(&q_rs);
    for (r, &b) in rest.iter().enumerate() {
        for a in 0..k {
            pi[(b, a)] = -sol[(r, a)];
        }
    }
    Ok(pi)
}

/// φ = PI·φ_Σ + φ^D with the two summands independent.
#[derive(Debug, Clone)]
pub struct MarkovDecomposition {
    pub sigma: VertexSet,
    /// n × |Σ| Poisson kernel.
    pub poisson: DenseMatrix,
    /// Schur complement of Q onto Σ.
    pub dn: DenseMatrix,
    /// Law of the harmonic part PI·φ_Σ on all vertices.
    pub harmonic_law: GaussianLaw,
    /// Law of the Dirichlet part: (Q_BB)⁻¹ on B = complement of Σ, zero on Σ.
    pub dirichlet_law: GaussianLaw,
}

impl MarkovDecomposition {
    /// max |Q⁻¹ − (harmonic + Dirichlet covariance)| against the dense inverse.
    pub fn covariance_residual(&self, q: &PrecisionOperator) -> f64 {
        let sum = self.harmonic_law.covariance().add(self.dirichlet_law.covariance());
        q.covariance().max_abs_diff(&sum)
    }

    /// Splits a field into (harmonic part, Dirichlet part).
    pub fn split(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let boundary: Vec<f64> = self.sigma.indices().iter().map(|&s| phi[s]).collect();
        let harmonic = self.poisson.mat_vec(&boundary);
        let dirichlet = phi.iter().zip(&harmonic).map(|(p, h)| p - h).collect();
        (harmonic, dirichlet)
    }
}

pub fn markov_decompose(q: &PrecisionOperator, sigma: &VertexSet) -> Result<MarkovDecomposition> {
    let n = q.dim();
    let poisson = poisson_matrix(q, sigma)?;
    let dn = dn_map(q, sigma)?;
    let harmonic_cov = if sigma.is_empty() {
        DenseMatrix::zeros(n, n)
    } else {
        let dn_inv = cholesky(&dn)?.inverse();
        let mut h = poisson.matmul(&dn_inv).matmul(&poisson.transpose());
        h.symmetrize();
        h
    };
    let rest = sigma.complement(n);
    let dirichlet_cov = if rest.is_empty() {
        DenseMatrix::zeros(n, n)
    } else {
        cholesky(&q.matrix().select(&rest, &rest))?.inverse().embed(n, &rest)
    };
    Ok(MarkovDecomposition {
        sigma: sigma.clone(),
        poisson,
        dn,
        harmonic_law: GaussianLaw::centered(harmonic_cov)?,
        dirichlet_law: GaussianLaw::centered(dirichlet_cov)?,
    })
}

/// Normalization and Gibbs law of the quadratic perturbation e^{−½xᵀVx}.
#[derive(Debug, Clone)]
pub struct QuadraticPerturbation {
    /// log det(I + C^{1/2}VC^{1/2})^{−1/2} = −½(log det(Q+V) − log det Q).
    pub log_z: f64,
    pub gibbs: GaussianLaw,
}

impl QuadraticPerturbation {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

pub fn quad_perturb(q: &PrecisionOperator, v: &DenseMatrix) -> Result<QuadraticPerturbation> {
    if v.rows() != q.dim() || v.cols() != q.dim() {
        return Err(Error::Dimension {
            expected: q.dim(),
            found: v.rows(),
        });
    }
    if !v.is_symmetric() {
        return Err(Error::ContractViolation("perturbation is not symmetric".into()));
    }
    let perturbed = cholesky(&q.matrix().add(v))?;
    Ok(QuadraticPerturbation {
        log_z: -0.5 * (perturbed.log_det() - q.log_det()),
        gibbs: GaussianLaw::centered(perturbed.inverse())?,
    })
}

/// Monte-Carlo estimate of E_C[e^{−½xᵀVx}] with its standard error.
pub fn quad_perturb_mc(q: &PrecisionOperator, v: &DenseMatrix, count: usize, rng: &RngStream) -> (f64, f64) {
    let acc = sample_mean(q, count, rng, |x| (-0.5 * v.bilinear(x, x)).exp());
    (acc.mean, acc.std_error())
}

/// Radon–Nikodym density of the trace law N(0, DN⁻¹) on Σ against a
/// reference Gaussian N(0, R).
#[derive(Debug, Clone)]
pub struct TraceLawDensity {
    dn: DenseMatrix,
    reference: GaussianLaw,
    ref_precision: DenseMatrix,
    log_prefactor: f64,
}

pub fn trace_law_density(q: &PrecisionOperator, sigma: &VertexSet, reference: &GaussianLaw) -> Result<TraceLawDensity> {
    if sigma.is_empty() {
        return invalid("trace law needs a nonempty vertex set");
    }
    if reference.dim() != sigma.len() {
        return Err(Error::Dimension {
            expected: sigma.len(),
            found: reference.dim(),
        });
    }
    if reference.mean().iter().any(|&m| m != 0.0) {
        return invalid("reference law must be centered");
    }
    let dn = dn_map(q, sigma)?;
    let ref_chol = cholesky(reference.covariance())?;
    let ref_precision = ref_chol.inverse();
    let log_prefactor = 0.5 * cholesky(&dn)?.log_det() + 0.5 * ref_chol.log_det();
    Ok(TraceLawDensity {
        dn,
        reference: reference.clone(),
        ref_precision,
        log_prefactor,
    })
}

impl TraceLawDensity {
    /// ½log det DN − ½log det R⁻¹ − ½φᵀ(DN − R⁻¹)φ.
    pub fn log_density(&self, phi: &[f64]) -> f64 {
        self.log_prefactor - 0.5 * (self.dn.bilinear(phi, phi) - self.ref_precision.bilinear(phi, phi))
    }

    pub fn density(&self, phi: &[f64]) -> f64 {
        self.log_density(phi).exp()
    }

    pub fn dn(&self) -> &DenseMatrix {
        &self.dn
    }

    /// ∫ density dN(0,R), evaluated in closed form from the Gaussian integral
    /// E_R[e^{−½φᵀAφ}] = det(I + LᵀAL)^{−1/2} with R = LLᵀ.
    pub fn exact_integral(&self) -> Result<f64> {
        let l = cholesky(self.reference.covariance())?.into_factor();
        let a = self.dn.sub(&self.ref_precision);
        let n = a.rows();
        let mut m = l.transpose_matmul(&a).matmul(&l).add(&DenseMatrix::identity(n));
        m.symmetrize();
        let log_expect = -0.5 * cholesky(&m)?.log_det();
        Ok((self.log_prefactor + log_expect).exp())
    }

    /// Monte-Carlo ∫ density dN(0,R).
    pub fn mc_integral(&self, count: usize, rng: &RngStream) -> Result<(f64, f64)> {
        let chol = cholesky(self.reference.covariance())?;
        let l = chol.factor();
        let n = l.rows();
        let parts = chunked_parallel(rng, count, |stream, draws| {
            let mut acc = MeanAccumulator::default();
            for _ in 0..draws {
                let z = stream.normal_vec(n);
                let x = l.mat_vec(&z);
                acc.push(self.density(&x));
            }
            acc
        });
        let acc = MeanAccumulator::merge_all(&parts);
        Ok((acc.mean, acc.std_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eigen;

    #[test]
    fn single_vertex_green() {
        let g = LatticeGraph::explicit(1, vec![], vec![1.0]).unwrap();
        let q = PrecisionOperator::new(&g, 2.0).unwrap();
        assert!((green(&q).covariance()[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cycle_covariance_matches_fourier_symbol() {
        let (n, a, m) = (12usize, 0.3, 1.3);
        let q = PrecisionOperator::new(&LatticeGraph::cycle(n, a).unwrap(), m).unwrap();
        let c = q.covariance();
        for d in 0..n {
            let expected: f64 = (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    (th * d as f64).cos() / (2.0 * (1.0 - th.cos()) / a + m * m * a)
                })
                .sum::<f64>()
                / n as f64;
            assert!((c[(0, d)] - expected).abs() < 1e-12, "d={d}");
        }
        let qc = q.matrix().matmul(c);
        assert!(qc.max_abs_diff(&DenseMatrix::identity(n)) < 1e-9);
    }

    #[test]
    fn dn_inverse_is_green_block() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(8, 8, 0.25).unwrap(), 1.0).unwrap();
        let sigma = VertexSet::torus_row(8, 3);
        let dn = dn_map(&q, &sigma).unwrap();
        let block = q.covariance().select(sigma.indices(), sigma.indices());
        assert!(dn.matmul(&block).max_abs_diff(&DenseMatrix::identity(8)) < 1e-9);
        assert!(cholesky(&dn).is_ok());
        assert!(dn.asymmetry() < 1e-12);
    }

    #[test]
    fn two_vertex_dn_is_scalar_schur() {
        let q =
            PrecisionOperator::from_matrix(DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        let dn = dn_map(&q, &VertexSet::new(2, vec![0]).unwrap()).unwrap();
        assert!((dn[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn poisson_extension_properties() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(8, 8, 0.25).unwrap(), 1.0).unwrap();
        let sigma = VertexSet::torus_row(8, 0);
        let mut rng = RngStream::new(3, 0);
        let f = rng.normal_vec(8);
        let u = poisson_extend(&q, &sigma, &f).unwrap();
        let qu = q.matrix().mat_vec(&u);
        for v in sigma.complement(64) {
            assert!(qu[v].abs() < 1e-9);
        }
        for (a, &s) in sigma.indices().iter().enumerate() {
            assert_eq!(u[s], f[a]);
        }
        let dn = dn_map(&q, &sigma).unwrap();
        assert!((dn.bilinear(&f, &f) - q.matrix().bilinear(&u, &u)).abs() < 1e-9);
        assert!(poisson_extend(&q, &sigma, &[0.0; 8]).unwrap().iter().all(|&x| x == 0.0));
        let all = VertexSet::all(64);
        let g = rng.normal_vec(64);
        assert_eq!(poisson_extend(&q, &all, &g).unwrap(), g);
    }

    #[test]
    fn markov_identity_and_trivial_sets() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(8, 8, 0.25).unwrap(), 1.0).unwrap();
        let d = markov_decompose(&q, &VertexSet::torus_row(8, 2)).unwrap();
        assert!(d.covariance_residual(&q) < 1e-10);
        let empty = markov_decompose(&q, &VertexSet::empty()).unwrap();
        assert_eq!(empty.harmonic_law.covariance().max_abs(), 0.0);
        assert!(empty.dirichlet_law.covariance().max_abs_diff(q.covariance()) < 1e-12);
        let full = markov_decompose(&q, &VertexSet::all(64)).unwrap();
        assert_eq!(full.dirichlet_law.covariance().max_abs(), 0.0);
    }

    #[test]
    fn markov_parts_are_uncorrelated() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(6, 6, 0.5).unwrap(), 1.0).unwrap();
        let d = markov_decompose(&q, &VertexSet::torus_row(6, 0)).unwrap();
        let samples = sample(&q, 40_000, &RngStream::new(11, 0));
        let (i, j) = (7, 15);
        let mut acc = MeanAccumulator::default();
        for r in 0..samples.rows() {
            let (h, dpart) = d.split(samples.row(r));
            acc.push(h[i] * dpart[j]);
        }
        assert!(acc.mean.abs() < 4.0 * acc.std_error());
    }

    #[test]
    fn quad_perturb_against_eigenvalues() {
        let mut rng = RngStream::new(5, 1);
        let n = 8;
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.normal());
        let q = PrecisionOperator::from_matrix(a.transpose_matmul(&a).add(&DenseMatrix::identity(n))).unwrap();
        let b = DenseMatrix::from_fn(n, n, |_, _| 0.2 * rng.normal());
        let mut v = b.add(&b.transpose());
        v.symmetrize();
        let res = quad_perturb(&q, &v).unwrap();
        let root = sym_eigen(q.covariance()).unwrap().map_values(f64::sqrt);
        let mut m = root.matmul(&v).matmul(&root);
        m.symmetrize();
        let oracle: f64 = sym_eigen(&m)
            .unwrap()
            .values
            .iter()
            .map(|l| -0.5 * (1.0 + l).ln())
            .sum();
        assert!((res.log_z - oracle).abs() < 1e-10);
        let prod = q.matrix().add(&v).matmul(res.gibbs.covariance());
        assert!(prod.max_abs_diff(&DenseMatrix::identity(n)) < 1e-10);
        let zero = quad_perturb(&q, &DenseMatrix::zeros(n, n)).unwrap();
        assert_eq!(zero.log_z, 0.0);
    }

    #[test]
    fn quad_perturb_diagonal_closed_form() {
        let q = PrecisionOperator::from_matrix(DenseMatrix::identity(3)).unwrap();
        let v = DenseMatrix::diagonal(&[0.5, 1.0, 2.0]);
        let z = quad_perturb(&q, &v).unwrap().z();
        assert!((z - (1.5f64 * 2.0 * 3.0).powf(-0.5)).abs() < 1e-14);
        assert!(quad_perturb(&q, &DenseMatrix::diagonal(&[-2.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn trace_density_normalization() {
        let q = PrecisionOperator::new(&LatticeGraph::torus(8, 8, 0.25).unwrap(), 1.0).unwrap();
        let sigma = VertexSet::torus_row(8, 0);
        let dn = dn_map(&q, &sigma).unwrap();
        let diag: Vec<f64> = dn.diag().iter().map(|d| 1.0 / d).collect();
        let reference = GaussianLaw::centered(DenseMatrix::diagonal(&diag)).unwrap();
        let dens = trace_law_density(&q, &sigma, &reference).unwrap();
        assert!((dens.exact_integral().unwrap() - 1.0).abs() < 1e-9);
        let (mc, se) = dens.mc_integral(100_000, &RngStream::new(1, 2)).unwrap();
        assert!((mc - 1.0).abs() < 4.0 * se);

        let own = GaussianLaw::centered(q.covariance().select(sigma.indices(), sigma.indices())).unwrap();
        let same = trace_law_density(&q, &sigma, &own).unwrap();
        let phi = RngStream::new(2, 0).normal_vec(8);
        assert!(same.log_density(&phi).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic_and_matches_covariance() {
        let q = PrecisionOperator::new(&LatticeGraph::cycle(3, 1.0).unwrap(), 1.0).unwrap();
        let rng = RngStream::new(9, 0);
        let s1 = sample(&q, 100_000, &rng);
        let s2 = sample(&q, 100_000, &rng);
        assert_eq!(s1, s2);
        let c = q.covariance();
        for (i, j) in [(0, 0), (0, 1), (1, 2)] {
            let mut acc = MeanAccumulator::default();
            for r in 0..s1.rows() {
                acc.push(s1[(r, i)] * s1[(r, j)]);
            }
            assert!((acc.mean - c[(i, j)]).abs() < 3.5 * acc.std_error(), "({i},{j})");
        }
    }
}
