//! Hermite polynomials, Wick powers, change of Wick ordering and Gaussian
//! moments by pair matchings.

use fieldlab::numerics::{DenseMatrix, RngStream};
use fieldlab::wick::{change_ordering, hermite, isserlis, matching_count, wick_cov, wick_power, wick_product_mc};

fn main() -> fieldlab::Result<()> {
    println!("h_n(1.5): {:?}", (0..6).map(|n| hermite(n, 1.5)).collect::<Vec<_>>());

    let w = wick_power(4, 0.7)?;
    println!(":x^4: at c=0.7, x=1.2  -> {:.6}", w.eval(1.2));
    let a = change_ordering(4, 0.3);
    let rebuilt: f64 = a
        .iter()
        .enumerate()
        .map(|(j, c)| c * wick_power(4 - 2 * j, 1.0).unwrap().eval(1.2))
        .sum();
    println!("same value in the c=1.0 basis       {rebuilt:.6}  (coefficients {a:?})");

    let exact = wick_cov(4, 4, 0.5, 1.0, 1.0)?;
    let mc = wick_product_mc(4, 4, 0.5, 1.0, 1.0, 1_000_000, &RngStream::new(7, 0))?;
    println!(
        "E[:X^4::Y^4:]  exact {exact:.5}  MC {:.5} +- {:.5}",
        mc.mean,
        mc.std_error()
    );

    let cov = DenseMatrix::from_rows(&[vec![1.0, 0.4, 0.1], vec![0.4, 2.0, -0.3], vec![0.1, -0.3, 0.5]])?;
    for labels in [vec![0, 1], vec![0, 0, 1, 2], vec![0, 1, 1, 2, 2, 2]] {
        println!(
            "E[X{labels:?}] = {:.6}  ({} matchings)",
            isserlis(&cov, &labels)?,
            matching_count(labels.len())
        );
    }
    Ok(())
}
