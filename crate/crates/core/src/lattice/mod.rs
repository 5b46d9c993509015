//! Lattice Gaussian free field on weighted graphs.
//!
//! Every identity here is finite-dimensional linear algebra on the precision
//! matrix Q, so each one can be checked against a dense inverse.

mod checks;
mod gff;
mod graph;

pub use checks::{bayes_check, bfk, rp_check, BayesReport, BfkReport, RpReport};
pub use gff::{
    dn_map, graph_laplacian, green, log_density_from_precision, markov_decompose, poisson_extend, poisson_matrix,
    quad_perturb, quad_perturb_mc, sample, sample_mean, trace_law_density, GaussianLaw, MarkovDecomposition,
    PrecisionOperator, QuadraticPerturbation, TraceLawDensity,
};
pub use graph::{Edge, GraphKind, LatticeGraph, VertexSet};
