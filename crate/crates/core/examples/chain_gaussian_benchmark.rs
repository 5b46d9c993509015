//! Free energy of the Gaussian spin chain: transfer-matrix trace against the
//! circulant determinant and the closed-form thermodynamic limit.

use std::time::Instant;

use fieldlab::chain::{
    build_transfer, circulant_log_partition, free_energy, gaussian_benchmark_polynomial, gaussian_free_energy_limit,
    normalized_log_partition, spectral_report, GAUSSIAN_LOG_NORMALIZATION,
};
use fieldlab::numerics::QuadratureGrid;

fn main() -> fieldlab::Result<()> {
    let m = 1.0;
    let start = Instant::now();
    let grid = QuadratureGrid::gauss_hermite(200)?;
    let t = build_transfer(&gaussian_benchmark_polynomial(m), &grid)?;
    let limit = gaussian_free_energy_limit(m);

    println!("{:>6} {:>16} {:>16} {:>12}", "N", "transfer", "circulant", "|diff|");
    for n in [1usize, 2, 4, 16, 128, 2048] {
        let a = normalized_log_partition(&t, n)? / n as f64;
        let b = circulant_log_partition(m, n) / n as f64;
        println!("{n:>6} {a:>16.10} {b:>16.10} {:>12.2e}", (a - b).abs());
    }
    let rows = free_energy(&t, &[2048])?;
    let report = spectral_report(&t)?;
    println!("limit                     {limit:.10}");
    println!(
        "log λ0 (normalized)       {:.10}",
        report.lambda0.ln() + GAUSSIAN_LOG_NORMALIZATION
    );
    println!("raw (Lebesgue) f(2048)    {:.10}", rows[0].free_energy);
    println!("alpha                     {:.6}", report.alpha);
    println!("elapsed                   {:.2?}", start.elapsed());
    Ok(())
}
