//! Gaussian free field on a periodic lattice: determinant splitting along a
//! circle, the Markov decomposition, reflection positivity and a quadratic
//! perturbation with its Monte-Carlo estimate.

use fieldlab::lattice::{
    bfk, markov_decompose, quad_perturb, quad_perturb_mc, rp_check, LatticeGraph, PrecisionOperator, VertexSet,
};
use fieldlab::numerics::{DenseMatrix, RngStream};

fn main() -> fieldlab::Result<()> {
    let n = 16;
    let q = PrecisionOperator::new(&LatticeGraph::torus(n, n, 1.0 / n as f64)?, 1.0)?;

    let sigma = VertexSet::torus_row(n, 0);
    let split = bfk(&q, &sigma)?;
    println!("log det Q            {:.12}", split.log_det_q);
    println!("  Dirichlet part     {:.12}", split.log_det_dirichlet);
    println!("  DN part            {:.12}", split.log_det_dn);
    println!("  relative residual  {:.2e}", split.relative_residual);

    let two_rows = VertexSet::new(n * n, (0..n).chain(n * n / 2..n * n / 2 + n).collect::<Vec<_>>())?;
    let markov = markov_decompose(&q, &two_rows)?;
    println!(
        "covariance = harmonic + Dirichlet, max error {:.2e}",
        markov.covariance_residual(&q)
    );

    println!("\nreflection positivity");
    for (label, g) in [
        ("grid 2x(2*4)", LatticeGraph::grid_double(2, 4, 1.0, false)?),
        ("torus 6x8", LatticeGraph::torus_double(6, 8, 0.5)?),
        ("cylinder 5x(2*3)", LatticeGraph::grid_double(5, 3, 0.25, true)?),
    ] {
        let r = rp_check(&PrecisionOperator::new(&g, 1.0)?)?;
        println!(
            "  {label:<18} min eig {:>10.3e}  pairing {:.1e}  markov {:.1e}",
            r.min_eigenvalue, r.pairing_error, r.markov_error
        );
    }

    let ring = PrecisionOperator::new(&LatticeGraph::cycle(8, 0.125)?, 1.0)?;
    let v = DenseMatrix::from_fn(8, 8, |i, j| if i == j { 0.5 } else { 0.0 });
    let exact = quad_perturb(&ring, &v)?;
    let (mc, se) = quad_perturb_mc(&ring, &v, 200_000, &RngStream::new(1, 0));
    println!("\nE[exp(-x.Vx/2)]  exact {:.6}  MC {mc:.6} +- {se:.1e}", exact.z());
    Ok(())
}
