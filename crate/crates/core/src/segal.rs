//! Segal amplitudes on discrete cylinders S¹_n × {0, …, n_layers+1}.
//!
//! A slab carries the weight exp(−ΦᵀQΦ) with Q = L + 2m²a², the boundary
//! circles contributing half of their diagonal so that slabs glue into tori.
//! Every site carries the measure √(2/π)·dφ, which makes the partition
//! function of a glued torus det(Q/2)^{−1/2}.
//!
//! Operators are Nyström matrices on a tensor Gauss–Hermite grid over the
//! boundary field, laid out along the real Fourier modes of the circle and
//! scaled by the stationary law of the infinite cylinder.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::log_trace_matrix_power;
use crate::error::{invalid, Error, Result};
use crate::lattice::{bfk, sample_mean, GaussianLaw, LatticeGraph, PrecisionOperator, VertexSet};
use crate::numerics::{cholesky, schur_complement, sym_eigen, DenseMatrix, QuadratureGrid, RngStream};
use crate::poly::Polynomial;
use crate::pphi2::{InteractionSpec, McEstimate, WickAction};
use crate::spectral::{self, GibbsRow, MixingRow};

pub const MAX_TRANSVERSE: usize = 4;
pub const MAX_GRID: usize = 4096;
pub const MAX_INTERIOR_DIM: usize = 8;
/// Kernel entries × interior quadrature points.
pub const MAX_INTERIOR_WORK: usize = 200_000_000;
pub const DEFAULT_INTERIOR_ORDER: usize = 16;

/// log √(2/π), the per-site measure constant.
const LOG_SITE_MEASURE: f64 = -0.225_791_352_644_727_4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabInteraction {
    pub polynomial: Polynomial,
    /// Cutoff per slab vertex, layer-major with the incoming circle first;
    /// `None` is χ ≡ 1.
    pub chi: Option<Vec<f64>>,
    /// Wick variance; `None` uses the one-site variance of the infinite cylinder.
    pub wick_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderSlab {
    pub n_transverse: usize,
    pub n_layers: usize,
    pub spacing: f64,
    pub mass: f64,
    pub interaction: Option<SlabInteraction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureOptions {
    /// Gauss–Hermite nodes per Fourier mode on the boundary.
    pub boundary_order: usize,
    /// Gauss–Hermite nodes per interior site for interacting slabs.
    pub interior_order: usize,
}

impl QuadratureOptions {
    pub fn for_transverse(n_transverse: usize) -> Self {
        let boundary_order = match n_transverse {
            0 | 1 => 64,
            2 => 32,
            3 => 12,
            _ => 8,
        };
        Self {
            boundary_order,
            interior_order: DEFAULT_INTERIOR_ORDER,
        }
    }
}

/// Orthonormal real Fourier basis of the n-cycle (columns) and the ring
/// Laplacian eigenvalue 2 − 2cos(2πk/n) of each column.
pub fn real_fourier_basis(n: usize) -> (DenseMatrix, Vec<f64>) {
    let mut cols: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
    let nf = n as f64;
    let ell = |k: usize| 2.0 - 2.0 * (2.0 * PI * k as f64 / nf).cos();
    cols.push((vec![1.0 / nf.sqrt(); n], 0.0));
    for k in 1..=n / 2 {
        if 2 * k == n {
            cols.push((
                (0..n)
                    .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / nf.sqrt())
                    .collect(),
                4.0,
            ));
        } else {
            let c = (2.0 / nf).sqrt();
            let th = |j: usize| 2.0 * PI * (k * j) as f64 / nf;
            cols.push(((0..n).map(|j| c * th(j).cos()).collect(), ell(k)));
            cols.push(((0..n).map(|j| c * th(j).sin()).collect(), ell(k)));
        }
    }
    let basis = DenseMatrix::from_fn(n, n, |i, k| cols[k].0[i]);
    (basis, cols.into_iter().map(|c| c.1).collect())
}

/// 2I − P − Pᵀ for the cyclic shift P on n sites.
pub fn ring_laplacian(n: usize) -> DenseMatrix {
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] += 2.0;
        l[(i, (i + 1) % n)] -= 1.0;
        l[((i + 1) % n, i)] -= 1.0;
    }
    l
}

impl CylinderSlab {
    pub fn free(n_transverse: usize, n_layers: usize, spacing: f64, mass: f64) -> Self {
        Self {
            n_transverse,
            n_layers,
            spacing,
            mass,
            interaction: None,
        }
    }

    pub fn with_interaction(mut self, interaction: SlabInteraction) -> Self {
        self.interaction = Some(interaction);
        self
    }

    pub fn without_interaction(&self) -> Self {
        Self {
            interaction: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_transverse == 0 {
            return invalid("n_transverse must be at least 1");
        }
        if self.n_transverse > MAX_TRANSVERSE {
            return Err(Error::Capacity {
                limit: "transverse sites for tensor quadrature",
                requested: self.n_transverse,
                maximum: MAX_TRANSVERSE,
            });
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return invalid("spacing must be positive");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return invalid("mass must be positive");
        }
        if let Some(int) = &self.interaction {
            if let Some(chi) = &int.chi {
                if chi.len() != self.n_vertices() {
                    return Err(Error::Dimension {
                        expected: self.n_vertices(),
                        found: chi.len(),
                    });
                }
            }
            if let Some(c) = int.wick_variance {
                if !(c >= 0.0 && c.is_finite()) {
                    return invalid("Wick variance must be nonnegative");
                }
            }
            if self.n_layers * self.n_transverse > MAX_INTERIOR_DIM {
                return Err(Error::Capacity {
                    limit: "interior quadrature dimension n_layers·n_transverse",
                    requested: self.n_layers * self.n_transverse,
                    maximum: MAX_INTERIOR_DIM,
                });
            }
            self.interaction_spec()?;
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        (self.n_layers + 2) * self.n_transverse
    }

    pub fn layer(&self, j: usize) -> Vec<usize> {
        (j * self.n_transverse..(j + 1) * self.n_transverse).collect()
    }

    pub fn incoming(&self) -> Vec<usize> {
        self.layer(0)
    }

    pub fn outgoing(&self) -> Vec<usize> {
        self.layer(self.n_layers + 1)
    }

    pub fn boundary(&self) -> Vec<usize> {
        let mut b = self.incoming();
        b.extend(self.outgoing());
        b
    }

    pub fn interior(&self) -> Vec<usize> {
        (self.n_transverse..(self.n_layers + 1) * self.n_transverse).collect()
    }

    /// b_k = ℓ_k + 2m²a² per real Fourier mode.
    pub fn mode_symbols(&self) -> Vec<f64> {
        let shift = 2.0 * (self.mass * self.spacing).powi(2);
        real_fourier_basis(self.n_transverse)
            .1
            .iter()
            .map(|l| l + shift)
            .collect()
    }

    /// Precision √(b(b+4)) of each Fourier mode of one circle of the infinite
    /// cylinder, in the convention exp(−r·ψ²).
    pub fn reference_precisions(&self) -> Vec<f64> {
        self.mode_symbols().iter().map(|b| (b * (b + 4.0)).sqrt()).collect()
    }

    /// Single-site variance of the infinite cylinder, (1/n)·Σ_k 1/(2r_k).
    pub fn cylinder_variance(&self) -> f64 {
        let r = self.reference_precisions();
        r.iter().map(|r| 0.5 / r).sum::<f64>() / r.len() as f64
    }

    /// Slab quadratic form: diagonal blocks B + 2I inside and ½B + I on the
    /// two circles, B = L_ring + 2m²a², off-diagonal blocks −I.
    pub fn precision(&self) -> DenseMatrix {
        let n = self.n_transverse;
        let layers = self.n_layers + 2;
        let b = ring_laplacian(n).add(&DenseMatrix::identity(n).scaled(2.0 * (self.mass * self.spacing).powi(2)));
        let mut q = DenseMatrix::zeros(layers * n, layers * n);
        for j in 0..layers {
            let boundary = j == 0 || j + 1 == layers;
            let f = if boundary { 0.5 } else { 1.0 };
            for s in 0..n {
                for t in 0..n {
                    q[(j * n + s, j * n + t)] = f * (b[(s, t)] + if s == t { 2.0 } else { 0.0 });
                }
                if j + 1 < layers {
                    q[(j * n + s, (j + 1) * n + s)] -= 1.0;
                    q[((j + 1) * n + s, j * n + s)] -= 1.0;
                }
            }
        }
        q
    }

    /// Schur complement of the slab form onto (incoming, outgoing).
    pub fn boundary_form(&self) -> Result<DenseMatrix> {
        let mut s = schur_complement(&self.precision(), &self.boundary())?;
        s.symmetrize();
        Ok(s)
    }

    /// log det(Q_II/2), zero without interior layers.
    pub fn log_det_interior_half(&self) -> Result<f64> {
        let inner = self.interior();
        if inner.is_empty() {
            return Ok(0.0);
        }
        let q = self.precision().select(&inner, &inner);
        Ok(cholesky(&q)?.log_det() - inner.len() as f64 * 2f64.ln())
    }

    /// Whether the slab is invariant under exchanging the two circles.
    pub fn is_reflection_symmetric(&self) -> bool {
        let Some(chi) = self.interaction.as_ref().and_then(|i| i.chi.as_ref()) else {
            return true;
        };
        let n = self.n_transverse;
        let layers = self.n_layers + 2;
        (0..layers).all(|j| (0..n).all(|s| chi[j * n + s] == chi[(layers - 1 - j) * n + s]))
    }

    /// Per-vertex weights a²·χ (halved on the circles) and the Wick action.
    fn interaction_spec(&self) -> Result<Option<WickAction>> {
        let Some(int) = &self.interaction else {
            return Ok(None);
        };
        let nv = self.n_vertices();
        let chi = int.chi.clone().unwrap_or_else(|| vec![1.0; nv]);
        let spec = InteractionSpec::new(int.polynomial.clone(), chi)?;
        let a2 = self.spacing * self.spacing;
        let boundary = self.boundary();
        let measure: Vec<f64> = (0..nv)
            .map(|v| if boundary.contains(&v) { 0.5 * a2 } else { a2 })
            .collect();
        let c = int.wick_variance.unwrap_or_else(|| self.cylinder_variance());
        Ok(Some(WickAction::with_variances(&spec, &measure, &vec![c; nv])?))
    }

    /// Free-field log K(x, y) = −½·log det(Q_II/2) − [x;y]ᵀS[x;y].
    pub fn free_log_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let s = self.boundary_form()?;
        let z: Vec<f64> = x.iter().chain(y).copied().collect();
        Ok(-0.5 * self.log_det_interior_half()? - s.bilinear(&z, &z))
    }
}

/// Tensor Gauss–Hermite grid over the boundary field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryGrid {
    pub n_transverse: usize,
    pub order: usize,
    /// Per-mode precision r_k of the weight exp(−r_k ψ_k²).
    pub mode_precision: Vec<f64>,
    /// Field values on the circle at each grid point.
    pub points: Vec<Vec<f64>>,
    /// log of the Lebesgue weight times the site measure (2/π)^{n/2}.
    pub log_weights: Vec<f64>,
}

impl BoundaryGrid {
    pub fn new(slab: &CylinderSlab, order: usize) -> Result<Self> {
        slab.validate()?;
        let n = slab.n_transverse;
        if order == 0 {
            return invalid("boundary order must be at least 1");
        }
        let size = order.checked_pow(n as u32).unwrap_or(usize::MAX);
        if size > MAX_GRID {
            return Err(Error::Capacity {
                limit: "boundary grid size",
                requested: size,
                maximum: MAX_GRID,
            });
        }
        let (basis, _) = real_fourier_basis(n);
        let r = slab.reference_precisions();
        let rules = r
            .iter()
            .map(|rk| QuadratureGrid::gauss_hermite_scaled(order, 1.0 / rk.sqrt()))
            .collect::<Result<Vec<_>>>()?;
        let mut points = Vec::with_capacity(size);
        let mut log_weights = Vec::with_capacity(size);
        for idx in 0..size {
            let mut rem = idx;
            let mut digits = vec![0; n];
            for k in (0..n).rev() {
                digits[k] = rem % order;
                rem /= order;
            }
            let psi: Vec<f64> = digits.iter().zip(&rules).map(|(&d, g)| g.nodes()[d]).collect();
            points.push(basis.mat_vec(&psi));
            log_weights.push(
                digits.iter().zip(&rules).map(|(&d, g)| g.log_weights()[d]).sum::<f64>() + n as f64 * LOG_SITE_MEASURE,
            );
        }
        Ok(Self {
            n_transverse: n,
            order,
            mode_precision: r,
            points,
            log_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn matches(&self, other: &Self) -> bool {
        self.n_transverse == other.n_transverse
            && self.order == other.order
            && self
                .mode_precision
                .iter()
                .zip(&other.mode_precision)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(1.0))
    }

    /// log ρ(x) for the normalized reference density Π_k √(r_k/π)·e^{−r_kψ_k²}.
    pub fn log_reference_density(&self, x: &[f64]) -> f64 {
        let (basis, _) = real_fourier_basis(self.n_transverse);
        let psi = basis.transpose().mat_vec(x);
        psi.iter()
            .zip(&self.mode_precision)
            .map(|(p, r)| 0.5 * (r / PI).ln() - r * p * p)
            .sum()
    }
}

/// Nyström matrix √w_i·K(x_i, x_j)·√w_j = exp(log_scale)·matrix.
#[derive(Debug, Clone)]
pub struct AmplitudeOperator {
    grid: BoundaryGrid,
    matrix: DenseMatrix,
    log_scale: f64,
    /// Number of layer steps spanned (n_layers + 1 for a built slab).
    thickness: usize,
    reflection_symmetric: bool,
}

impl AmplitudeOperator {
    fn from_log_entries(grid: BoundaryGrid, logs: Vec<f64>, thickness: usize, symmetric: bool) -> Result<Self> {
        let g = grid.len();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Accuracy("amplitude kernel is not finite on the grid".into()));
        }
        let matrix = DenseMatrix::new(g, g, logs.iter().map(|l| (l - top).exp()).collect())?;
        Ok(Self {
            grid,
            matrix,
            log_scale: top,
            thickness,
            reflection_symmetric: symmetric,
        })
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    /// Matrix normalized to unit largest entry.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn thickness(&self) -> usize {
        self.thickness
    }

    pub fn is_reflection_symmetric(&self) -> bool {
        self.reflection_symmetric
    }

    /// The operator of the kernel c·K.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid("scale must be positive");
        }
        Ok(Self {
            log_scale: self.log_scale + c.ln(),
            ..self.clone()
        })
    }

    /// Smallest normalized entry.
    pub fn min_entry(&self) -> f64 {
        self.matrix.data().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// f(x_i)·√w_i: the grid representative of an L² function.
    pub fn grid_function(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.grid
            .points
            .iter()
            .zip(&self.grid.log_weights)
            .map(|(x, lw)| f(x) * (0.5 * lw).exp())
            .collect()
    }

    /// f(x_i) without weights, for diagonal insertions.
    pub fn grid_values(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.grid.points.iter().map(|x| f(x)).collect()
    }
}

/// Operator of a slab on its boundary grid.
pub fn build_amplitude(slab: &CylinderSlab, opts: &QuadratureOptions) -> Result<AmplitudeOperator> {
    let grid = BoundaryGrid::new(slab, opts.boundary_order)?;
    let g = grid.len();
    let n = slab.n_transverse;
    let s = slab.boundary_form()?;
    let log_det = slab.log_det_interior_half()?;
    let sii = s.select(&(0..n).collect::<Vec<_>>(), &(0..n).collect::<Vec<_>>());
    let soo = s.select(&(n..2 * n).collect::<Vec<_>>(), &(n..2 * n).collect::<Vec<_>>());
    let sio = s.select(&(0..n).collect::<Vec<_>>(), &(n..2 * n).collect::<Vec<_>>());
    let diag_in: Vec<f64> = grid.points.iter().map(|x| sii.bilinear(x, x)).collect();
    let diag_out: Vec<f64> = grid.points.iter().map(|y| soo.bilinear(y, y)).collect();
    let cross: Vec<Vec<f64>> = grid.points.iter().map(|y| sio.mat_vec(y)).collect();

    let interacting = Interior::new(slab, opts)?;
    if let Some(int) = &interacting {
        let work = g.saturating_mul(g).saturating_mul(int.nodes.len().max(1));
        if work > MAX_INTERIOR_WORK {
            return Err(Error::Capacity {
                limit: "interior quadrature work (grid² × interior nodes)",
                requested: work,
                maximum: MAX_INTERIOR_WORK,
            });
        }
    }

    let rows: Vec<Vec<f64>> = (0..g)
        .into_par_iter()
        .map(|i| {
            let x = &grid.points[i];
            (0..g)
                .map(|j| {
                    let y = &grid.points[j];
                    let quad =
                        diag_in[i] + diag_out[j] + 2.0 * x.iter().zip(&cross[j]).map(|(a, b)| a * b).sum::<f64>();
                    let mut l = 0.5 * (grid.log_weights[i] + grid.log_weights[j]) - 0.5 * log_det - quad;
                    if let Some(int) = &interacting {
                        l += int.log_factor(x, y);
                    }
                    l
                })
                .collect()
        })
        .collect();
    AmplitudeOperator::from_log_entries(
        grid,
        rows.into_iter().flatten().collect(),
        slab.n_layers + 1,
        slab.is_reflection_symmetric(),
    )
}

/// Conditional expectation of e^{−S} over interior fields, by tensor
/// Gauss–Hermite quadrature of the conditional Gaussian.
struct Interior {
    action: WickAction,
    incoming: Vec<usize>,
    outgoing: Vec<usize>,
    interior: Vec<usize>,
    /// Conditional mean = transfer·[x; y].
    transfer: DenseMatrix,
    /// Interior field offsets L·z at each quadrature node, and log weights.
    nodes: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
}

impl Interior {
    fn new(slab: &CylinderSlab, opts: &QuadratureOptions) -> Result<Option<Self>> {
        let Some(action) = slab.interaction_spec()? else {
            return Ok(None);
        };
        let interior = slab.interior();
        let boundary = slab.boundary();
        let (transfer, nodes, log_weights) = if interior.is_empty() {
            (DenseMatrix::zeros(0, boundary.len()), vec![Vec::new()], vec![0.0])
        } else {
            let order = opts.interior_order;
            if order == 0 {
                return invalid("interior order must be at least 1");
            }
            let q = slab.precision();
            let qii = cholesky(&q.select(&interior, &interior))?;
            let transfer = qii.solve_matrix(&q.select(&interior, &boundary)).scaled(-1.0);
            // Conditional covariance (2Q_II)⁻¹ = L Lᵀ.
            let mut cov = qii.inverse().scaled(0.5);
            cov.symmetrize();
            let l = cholesky(&cov)?.into_factor();
            let rule = QuadratureGrid::gauss_hermite(order)?;
            let d = interior.len();
            let count = order.checked_pow(d as u32).unwrap_or(usize::MAX);
            if count > MAX_INTERIOR_WORK {
                return Err(Error::Capacity {
                    limit: "interior quadrature nodes",
                    requested: count,
                    maximum: MAX_INTERIOR_WORK,
                });
            }
            let mut nodes = Vec::with_capacity(count);
            let mut log_weights = Vec::with_capacity(count);
            for idx in 0..count {
                let mut rem = idx;
                let mut z = vec![0.0; d];
                let mut lw = 0.0;
                for zk in z.iter_mut() {
                    let k = rem % order;
                    rem /= order;
                    let u = rule.nodes()[k];
                    *zk = std::f64::consts::SQRT_2 * u;
                    lw += rule.log_weights()[k] - u * u - 0.5 * PI.ln();
                }
                nodes.push(l.mat_vec(&z));
                log_weights.push(lw);
            }
            (transfer, nodes, log_weights)
        };
        Ok(Some(Self {
            action,
            incoming: slab.incoming(),
            outgoing: slab.outgoing(),
            interior,
            transfer,
            nodes,
            log_weights,
        }))
    }

    fn circle_action(&self, field: &[f64], vertices: &[usize]) -> f64 {
        let w = self.action.weights();
        let c = self.action.variances();
        field
            .iter()
            .zip(vertices)
            .filter(|(_, &v)| w[v] != 0.0)
            .map(|(&x, &v)| w[v] * self.action.site_value(x, c[v]))
            .sum()
    }

    fn log_factor(&self, x: &[f64], y: &[f64]) -> f64 {
        let boundary = self.circle_action(x, &self.incoming) + self.circle_action(y, &self.outgoing);
        if self.interior.is_empty() {
            return -boundary;
        }
        let z: Vec<f64> = x.iter().chain(y).copied().collect();
        let mean = self.transfer.mat_vec(&z);
        let mut terms = Vec::with_capacity(self.nodes.len());
        let mut field = vec![0.0; mean.len()];
        for (off, lw) in self.nodes.iter().zip(&self.log_weights) {
            for ((f, m), o) in field.iter_mut().zip(&mean).zip(off) {
                *f = m + o;
            }
            terms.push(lw - self.circle_action(&field, &self.interior));
        }
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        -boundary + top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }
}

/// Matrix product on a shared grid: the operator of the glued slab.
pub fn compose(u1: &AmplitudeOperator, u2: &AmplitudeOperator) -> Result<AmplitudeOperator> {
    if !u1.grid.matches(&u2.grid) {
        return Err(Error::InvalidComposition(
            "operators live on different boundary grids or reference measures".into(),
        ));
    }
    let product = u1.matrix.matmul(&u2.matrix);
    let top = product.max_abs();
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::Accuracy("composed kernel vanished on the grid".into()));
    }
    Ok(AmplitudeOperator {
        grid: u1.grid.clone(),
        matrix: product.scaled(1.0 / top),
        log_scale: u1.log_scale + u2.log_scale + top.ln(),
        thickness: u1.thickness + u2.thickness,
        reflection_symmetric: u1.reflection_symmetric && u2.reflection_symmetric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GluingMode {
    /// Kernels including their constants.
    Strict,
    /// Kernels up to an overall positive factor.
    Projective,
}

/// max|U − V| / max|V| in the chosen mode.
pub fn relative_deviation(u: &AmplitudeOperator, v: &AmplitudeOperator, mode: GluingMode) -> Result<f64> {
    if !u.grid.matches(&v.grid) {
        return Err(Error::InvalidComposition("operators live on different grids".into()));
    }
    let c = match mode {
        GluingMode::Strict => (u.log_scale - v.log_scale).exp(),
        GluingMode::Projective => 1.0,
    };
    Ok(u.matrix.scaled(c).max_abs_diff(&v.matrix))
}

/// log tr(U^n).
pub fn log_trace(u: &AmplitudeOperator, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("trace power must be at least 1");
    }
    Ok(log_trace_matrix_power(&u.matrix, n) + n as f64 * u.log_scale)
}

/// −½·log det(Q/2) for the torus glued from `copies` slabs, from a dense
/// Cholesky factorization of the assembled lattice precision.
pub fn torus_log_partition(slab: &CylinderSlab, copies: usize) -> Result<f64> {
    let q = glued_torus(slab, copies)?;
    Ok(-0.5 * (q.log_det() - q.dim() as f64 * 2f64.ln()))
}

/// The same quantity mode by mode: −½·Σ_k Σ_j log((b_k + 2 − 2cos(2πj/M))/2).
pub fn torus_log_partition_modes(slab: &CylinderSlab, copies: usize) -> f64 {
    let m = copies * (slab.n_layers + 1);
    let mut total = 0.0;
    for b in slab.mode_symbols() {
        for j in 0..m {
            total += ((b + 2.0 - 2.0 * (2.0 * PI * j as f64 / m as f64).cos()) / 2.0).ln();
        }
    }
    -0.5 * total
}

/// Lattice precision L + 2m²a² of the torus glued from `copies` slabs.
pub fn glued_torus(slab: &CylinderSlab, copies: usize) -> Result<PrecisionOperator> {
    slab.validate()?;
    if copies == 0 {
        return invalid("at least one slab is needed");
    }
    let g = LatticeGraph::torus(slab.n_transverse, copies * (slab.n_layers + 1), slab.spacing)?;
    PrecisionOperator::new(&g, std::f64::consts::SQRT_2 * slab.mass)
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeTraceReport {
    pub copies: usize,
    pub log_trace: f64,
    pub log_partition: f64,
    pub log_partition_modes: f64,
    /// |tr(U^N)/Z − 1|.
    pub relative_error: f64,
}

pub fn free_trace_check(slab: &CylinderSlab, u: &AmplitudeOperator, copies: usize) -> Result<FreeTraceReport> {
    let log_trace = log_trace(u, copies)?;
    let log_partition = torus_log_partition(slab, copies)?;
    Ok(FreeTraceReport {
        copies,
        log_trace,
        log_partition,
        log_partition_modes: torus_log_partition_modes(slab, copies),
        relative_error: (log_trace - log_partition).exp_m1().abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InteractingTraceReport {
    pub copies: usize,
    /// tr(U_P^N)/tr(U_0^N).
    pub segal_ratio: f64,
    /// E[e^{−S}] on the glued torus.
    pub monte_carlo: McEstimate,
    /// |segal − MC| / standard error.
    pub z_score: f64,
}

/// Compares tr(U_P^N)/tr(U_0^N) with a Monte-Carlo estimate of E[e^{−S}]
/// under the free field of the glued torus, both with the slab's fixed Wick
/// variance.
pub fn interacting_trace_check(
    slab: &CylinderSlab,
    opts: &QuadratureOptions,
    copies: usize,
    samples: usize,
    rng: &RngStream,
) -> Result<InteractingTraceReport> {
    let Some(int) = &slab.interaction else {
        return invalid("interacting trace check needs an interaction");
    };
    if int.chi.as_ref().is_some_and(|c| c.iter().any(|&v| v != 1.0)) {
        return invalid("the glued-torus comparison needs χ ≡ 1");
    }
    let u_int = build_amplitude(slab, opts)?;
    let u_free = build_amplitude(&slab.without_interaction(), opts)?;
    let segal_ratio = (log_trace(&u_int, copies)? - log_trace(&u_free, copies)?).exp();

    let torus = glued_torus(slab, copies)?;
    // The slab weight exp(−φᵀQφ) is the Gaussian with precision 2Q.
    let q2 = PrecisionOperator::from_matrix(torus.matrix().scaled(2.0))?;
    let n = torus.dim();
    let spec = InteractionSpec::uniform(int.polynomial.clone(), n)?;
    let c = int.wick_variance.unwrap_or_else(|| slab.cylinder_variance());
    let action = WickAction::with_variances(&spec, &torus.vertex_measure(), &vec![c; n])?;
    let acc = sample_mean(&q2, samples, rng, |phi| (-action.eval_on(phi, 0..phi.len())).exp());
    let second = acc.variance() + acc.mean * acc.mean;
    let monte_carlo = McEstimate {
        estimate: acc.mean,
        std_error: acc.std_error(),
        samples,
        effective_sample_size: samples as f64 * acc.mean * acc.mean / second,
    };
    let z_score = (segal_ratio - monte_carlo.estimate).abs() / monte_carlo.std_error.max(f64::MIN_POSITIVE);
    Ok(InteractingTraceReport {
        copies,
        segal_ratio,
        monte_carlo,
        z_score,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointReport {
    /// max|M − Mᵀ| / max|M|.
    pub asymmetry: f64,
    pub reflection_symmetric: bool,
    /// Asymmetry above 1e−10.
    pub flagged: bool,
}

pub fn adjoint_check(u: &AmplitudeOperator) -> AdjointReport {
    let asymmetry = u.matrix.max_abs_diff(&u.matrix.transpose()) / u.matrix.max_abs();
    AdjointReport {
        asymmetry,
        reflection_symmetric: u.reflection_symmetric,
        flagged: asymmetry > 1e-10,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyPoint {
    pub n: usize,
    /// (1/n)·log tr(U^n).
    pub free_energy: f64,
    /// |(1/n)·log tr(U^n) − log λ₀|.
    pub error: f64,
    /// (dim − 1)·α^n/n, which bounds the error.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegalSpectralReport {
    pub log_lambda0: f64,
    pub lambda1_over_lambda0: f64,
    pub alpha: f64,
    pub ground_positive: bool,
    pub free_energy: Vec<FreeEnergyPoint>,
    pub mixing: Vec<MixingRow>,
    pub gibbs: Vec<GibbsRow>,
    /// Fitted geometric rate of the Gibbs discrepancies.
    pub gibbs_rate: Option<f64>,
}

impl SegalSpectralReport {
    pub fn mixing_holds(&self) -> bool {
        self.mixing.iter().all(|r| r.holds())
    }

    pub fn free_energy_holds(&self) -> bool {
        self.free_energy.iter().all(|p| p.error <= p.bound + 1e-12)
    }
}

/// Inputs of the spectral suite: L² test functions for mixing and diagonal
/// observables F = D_g U^L D_f for Gibbs ratios.
#[derive(Debug, Clone)]
pub struct SpectralProbe {
    pub mix_f: Vec<f64>,
    pub mix_g: Vec<f64>,
    pub k_max: usize,
    pub gibbs_f: Vec<f64>,
    pub gibbs_g: Vec<f64>,
    pub gibbs_separation: usize,
    pub n_list: Vec<usize>,
}

pub fn spectral_suite(u: &AmplitudeOperator, probe: &SpectralProbe) -> Result<SegalSpectralReport> {
    let m = u.matrix();
    if !m.is_symmetric() {
        return Err(Error::ContractViolation(
            "spectral suite needs a reflection-symmetric operator".into(),
        ));
    }
    let report = spectral::spectral_report(m)?;
    let eig = sym_eigen(m)?;
    let dim = u.dim() as f64;
    let log_lambda0 = report.lambda0.ln() + u.log_scale;
    let free_energy = probe
        .n_list
        .iter()
        .map(|&n| {
            let fe = spectral::log_trace_power(&eig.values, n) / n as f64 + u.log_scale;
            FreeEnergyPoint {
                n,
                free_energy: fe,
                error: (fe - log_lambda0).abs(),
                bound: (dim - 1.0) * report.alpha.powi(n as i32) / n as f64,
            }
        })
        .collect();
    let mixing = spectral::mixing_table(m, &report, &probe.mix_f, &probe.mix_g, probe.k_max)?;
    let sites = [1, 1 + probe.gibbs_separation];
    let min_n = sites[1];
    let n_list: Vec<usize> = probe.n_list.iter().copied().filter(|&n| n >= min_n).collect();
    let (gibbs, gibbs_rate) = spectral::gibbs_convergence(&eig, &sites, &[&probe.gibbs_f, &probe.gibbs_g], &n_list)?;
    Ok(SegalSpectralReport {
        log_lambda0,
        lambda1_over_lambda0: report.lambda1 / report.lambda0,
        alpha: report.alpha,
        ground_positive: report.ground_positive(m),
        free_energy,
        mixing,
        gibbs,
        gibbs_rate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeDensityReport {
    pub points: usize,
    /// max |log(|A|²ρρ) − log(p_trace·Z_double·(π/2)^n)|.
    pub max_log_error: f64,
    pub zero_point_error: f64,
    /// log Z of the doubled slab from the BFK split.
    pub log_z_double: f64,
    pub bfk_relative_residual: f64,
}

/// |A(x,y)|²·ρ(x)ρ(y) = p(x,y)·Z_double·(π/2)^n for a free slab, where p is
/// the law of the two circles in the torus made of the slab and its mirror
/// image and A = K/√(ρρ) with the reference density ρ of the grid.
pub fn amplitude_density_check(slab: &CylinderSlab, points: usize, rng: &RngStream) -> Result<AmplitudeDensityReport> {
    if slab.interaction.is_some() {
        return invalid("the amplitude-density identity is stated for free slabs");
    }
    let grid = BoundaryGrid::new(slab, 1)?;
    let n = slab.n_transverse;
    let q_double = glued_torus(slab, 2)?;
    let boundary = VertexSet::new(q_double.dim(), slab.boundary())?;
    let split = bfk(&q_double, &boundary)?;
    let log_det = split.log_det_dirichlet + split.log_det_dn;
    let log_z_double = -0.5 * (log_det - q_double.dim() as f64 * 2f64.ln());
    let mut cov = q_double
        .covariance()
        .select(boundary.indices(), boundary.indices())
        .scaled(0.5);
    cov.symmetrize();
    let law = GaussianLaw::centered(cov.clone())?;
    let log_const = log_z_double + n as f64 * (0.5 * PI).ln();

    let s = slab.boundary_form()?;
    let log_det_half = slab.log_det_interior_half()?;
    let error_at = |z: &[f64]| -> Result<f64> {
        let (x, y) = z.split_at(n);
        let log_k = -0.5 * log_det_half - s.bilinear(z, z);
        let (rx, ry) = (grid.log_reference_density(x), grid.log_reference_density(y));
        let log_a = log_k - 0.5 * (rx + ry);
        let lhs = 2.0 * log_a + rx + ry;
        let rhs = law.log_density(z)? + log_const;
        Ok((lhs - rhs).abs())
    };
    let zero_point_error = error_at(&vec![0.0; 2 * n])?;
    let chol = cholesky(&cov)?;
    let mut stream = rng.clone();
    let mut max_log_error = zero_point_error;
    for _ in 0..points {
        let z = chol.factor().mat_vec(&stream.normal_vec(2 * n));
        max_log_error = max_log_error.max(error_at(&z)?);
    }
    Ok(AmplitudeDensityReport {
        points,
        max_log_error,
        zero_point_error,
        log_z_double,
        bfk_relative_residual: split.relative_residual,
    })
}

/// Operators of each Fourier mode as one-site slabs with mass √(b_k/2)/a.
pub fn mode_operators(slab: &CylinderSlab, opts: &QuadratureOptions) -> Result<Vec<AmplitudeOperator>> {
    slab.validate()?;
    slab.mode_symbols()
        .iter()
        .map(|b| {
            let mode = CylinderSlab::free(1, slab.n_layers, slab.spacing, (0.5 * b).sqrt() / slab.spacing);
            build_amplitude(&mode, opts)
        })
        .collect()
}

/// Kronecker product of the per-mode operators, mode 0 most significant.
pub fn kron_modes(modes: &[AmplitudeOperator]) -> Result<(DenseMatrix, f64)> {
    let Some(first) = modes.first() else {
        return invalid("no modes");
    };
    let mut m = first.matrix.clone();
    let mut ls = first.log_scale;
    for u in &modes[1..] {
        m = m.kron(&u.matrix);
        ls += u.log_scale;
    }
    Ok((m, ls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain;

    fn opts(order: usize) -> QuadratureOptions {
        QuadratureOptions {
            boundary_order: order,
            interior_order: DEFAULT_INTERIOR_ORDER,
        }
    }

    #[test]
    fn fourier_basis_diagonalizes_ring() {
        for n in 1..=5 {
            let (f, ell) = real_fourier_basis(n);
            let d = f.transpose().matmul(&ring_laplacian(n)).matmul(&f);
            assert!(d.max_abs_diff(&DenseMatrix::diagonal(&ell)) < 1e-12, "n={n}");
            assert!(f.transpose_matmul(&f).max_abs_diff(&DenseMatrix::identity(n)) < 1e-12);
        }
    }

    #[test]
    fn one_site_slab_is_chain_kernel() {
        let slab = CylinderSlab::free(1, 0, 1.0, 1.0);
        let p = chain::gaussian_benchmark_polynomial(1.0);
        for (x, y) in [(0.3, -0.2), (1.1, 0.7), (0.0, 0.0)] {
            let k = slab.free_log_kernel(&[x], &[y]).unwrap();
            assert!((k - chain::log_kernel(&p, x, y)).abs() < 1e-14);
        }
    }

    #[test]
    fn free_energy_matches_chain_limit() {
        let slab = CylinderSlab::free(1, 0, 1.0, 1.0);
        let u = build_amplitude(&slab, &opts(64)).unwrap();
        let r = spectral::spectral_report(u.matrix()).unwrap();
        let log_l0 = r.lambda0.ln() + u.log_scale();
        assert!(
            (log_l0 - chain::gaussian_free_energy_limit(1.0)).abs() < 1e-8,
            "{log_l0}"
        );
    }

    #[test]
    fn composition_free() {
        for (n, order) in [(1, 64), (2, 32)] {
            let thin = build_amplitude(&CylinderSlab::free(n, 0, 1.0, 1.0), &opts(order)).unwrap();
            let thick = build_amplitude(&CylinderSlab::free(n, 1, 1.0, 1.0), &opts(order)).unwrap();
            let glued = compose(&thin, &thin).unwrap();
            let dev = relative_deviation(&glued, &thick, GluingMode::Strict).unwrap();
            assert!(dev < 1e-8, "n={n}: {dev:e}");
        }
    }

    #[test]
    fn free_trace_matches_torus() {
        for (n, layers, order) in [(1, 0, 64), (2, 0, 32), (2, 1, 32)] {
            let slab = CylinderSlab::free(n, layers, 1.0, 1.0);
            let u = build_amplitude(&slab, &opts(order)).unwrap();
            for copies in [1, 3, 8] {
                let r = free_trace_check(&slab, &u, copies).unwrap();
                assert!(r.relative_error < 1e-6, "{r:?}");
                assert!((r.log_partition - r.log_partition_modes).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn factorizes_over_modes() {
        let slab = CylinderSlab::free(3, 1, 1.0, 0.8);
        let o = opts(6);
        let u = build_amplitude(&slab, &o).unwrap();
        let (k, ls) = kron_modes(&mode_operators(&slab, &o).unwrap()).unwrap();
        let dev = u.matrix().scaled((u.log_scale() - ls).exp()).max_abs_diff(&k);
        assert!(dev < 1e-10, "{dev:e}");
    }

    #[test]
    fn own_boundary_form_as_reference_leaves_constant() {
        let slab = CylinderSlab::free(2, 1, 1.0, 1.0);
        let s = slab.boundary_form().unwrap();
        let c = slab.log_det_interior_half().unwrap();
        for z in [[0.1, -0.4, 0.3, 0.9], [1.0, 2.0, -1.0, 0.5]] {
            let k = slab.free_log_kernel(&z[..2], &z[2..]).unwrap();
            assert!((k + s.bilinear(&z, &z) + 0.5 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_and_negative_control() {
        let slab = CylinderSlab::free(2, 1, 1.0, 1.0);
        let u = build_amplitude(&slab, &opts(12)).unwrap();
        assert!(!adjoint_check(&u).flagged);
        let mut chi = vec![1.0; slab.n_vertices()];
        chi[0] = 0.0;
        let skew = slab.clone().with_interaction(SlabInteraction {
            polynomial: Polynomial::monomial(4, 0.5),
            chi: Some(chi),
            wick_variance: None,
        });
        assert!(!skew.is_reflection_symmetric());
        let v = build_amplitude(
            &skew,
            &QuadratureOptions {
                boundary_order: 6,
                interior_order: 4,
            },
        )
        .unwrap();
        let r = adjoint_check(&v);
        assert!(r.flagged && !r.reflection_symmetric);
    }

    #[test]
    fn composition_interacting() {
        let int = SlabInteraction {
            polynomial: Polynomial::new(vec![0.0, 0.0, 0.0, 0.0, 0.1]),
            chi: None,
            wick_variance: None,
        };
        let thin = CylinderSlab::free(1, 0, 1.0, 1.0).with_interaction(int.clone());
        let thick = CylinderSlab::free(1, 1, 1.0, 1.0).with_interaction(int);
        let o = opts(64);
        let glued = compose(
            &build_amplitude(&thin, &o).unwrap(),
            &build_amplitude(&thin, &o).unwrap(),
        )
        .unwrap();
        let direct = build_amplitude(&thick, &o).unwrap();
        let dev = relative_deviation(&glued, &direct, GluingMode::Strict).unwrap();
        assert!(dev < 1e-3, "{dev:e}");
        assert!(adjoint_check(&direct).asymmetry < 1e-10);
    }

    #[test]
    fn decompositions_agree() {
        let o = opts(32);
        let l0 = log_trace(&build_amplitude(&CylinderSlab::free(2, 0, 1.0, 1.0), &o).unwrap(), 4).unwrap();
        let l1 = log_trace(&build_amplitude(&CylinderSlab::free(2, 1, 1.0, 1.0), &o).unwrap(), 2).unwrap();
        let l3 = log_trace(&build_amplitude(&CylinderSlab::free(2, 3, 1.0, 1.0), &o).unwrap(), 1).unwrap();
        assert!((l0 - l1).abs() < 1e-6 && (l1 - l3).abs() < 1e-6, "{l0} {l1} {l3}");
    }

    #[test]
    fn amplitude_density() {
        for slab in [CylinderSlab::free(1, 0, 1.0, 1.0), CylinderSlab::free(2, 2, 0.5, 1.3)] {
            let r = amplitude_density_check(&slab, 1000, &RngStream::new(3, 0)).unwrap();
            assert!(r.max_log_error < 1e-8, "{r:?}");
            assert!(r.bfk_relative_residual < 1e-10);
        }
    }

    #[test]
    fn capacity_and_grid_errors() {
        let big = CylinderSlab::free(5, 0, 1.0, 1.0);
        assert!(matches!(build_amplitude(&big, &opts(2)), Err(Error::Capacity { .. })));
        assert!(matches!(
            build_amplitude(&CylinderSlab::free(2, 0, 1.0, 1.0), &opts(100)),
            Err(Error::Capacity { .. })
        ));
        let a = build_amplitude(&CylinderSlab::free(1, 0, 1.0, 1.0), &opts(10)).unwrap();
        let b = build_amplitude(&CylinderSlab::free(1, 0, 1.0, 2.0), &opts(10)).unwrap();
        assert!(matches!(compose(&a, &b), Err(Error::InvalidComposition(_))));
    }

    #[test]
    fn spectral_suite_on_slab() {
        let slab = CylinderSlab::free(2, 0, 1.0, 1.0);
        let u = build_amplitude(&slab, &opts(12)).unwrap();
        let probe = SpectralProbe {
            mix_f: u.grid_function(|x| (-x[0] * x[0]).exp()),
            mix_g: u.grid_function(|x| x[1] * (-x[1] * x[1]).exp()),
            k_max: 50,
            gibbs_f: u.grid_values(|x| x[0] * x[0]),
            gibbs_g: u.grid_values(|x| 1.0 / (1.0 + x[1] * x[1])),
            gibbs_separation: 2,
            n_list: vec![10, 12, 14, 16],
        };
        let r = spectral_suite(&u, &probe).unwrap();
        assert!(r.ground_positive && r.alpha < 1.0);
        assert!(r.mixing_holds() && r.free_energy_holds(), "{r:?}");
        assert!(r.gibbs_rate.unwrap() <= r.alpha + 1e-6, "{r:?}");
    }
}
