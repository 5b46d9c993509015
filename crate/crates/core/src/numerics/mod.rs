//! Dense linear algebra, quadrature rules, special functions and
//! deterministic random streams shared by every other module.

mod dense;
mod eigen;
mod linalg;
mod quadrature;
mod rng;
mod special;

pub use dense::{dot, norm, DenseMatrix};
pub use eigen::{
    power_pair, sym_eigen, tridiagonal_eigenvalues, PowerPair, SymEigen, POWER_MAX_ITERATIONS, POWER_TOLERANCE,
};
pub use linalg::{cholesky, complement, inverse_spd, log_det_spd, schur_complement, Cholesky};
pub use quadrature::{gauss_legendre, QuadratureGrid, QuadratureKind, MAX_HERMITE_ORDER};
pub use rng::{chunked_parallel, MeanAccumulator, RngStream, MC_CHUNK};
pub use special::{double_factorial_odd, exp_integral_e1, exp_taylor_remainder, factorial, EULER_GAMMA};
