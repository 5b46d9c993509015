//! Wick-ordered polynomial interactions on a lattice torus: the logarithmic
//! growth of the tadpole, the partition function by Monte Carlo against a
//! quadratic closed form, and smoothing by box and heat mollifiers.

use fieldlab::lattice::{LatticeGraph, PrecisionOperator};
use fieldlab::numerics::RngStream;
use fieldlab::poly::Polynomial;
use fieldlab::pphi2::{mollifier_compare, partition_mc, quadratic_oracle, tadpole_fit, InteractionSpec};

fn main() -> fieldlab::Result<()> {
    let fit = tadpole_fit(1.0, 1.0, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0])?;
    for (a, c) in &fit.points {
        println!("a {a:<9.6} log(1/a) {:6.3}  tadpole {c:.6}", (1.0 / a).ln());
    }
    println!("slope {:.5}, R^2 {:.6}\n", fit.slope, fit.r_squared);

    let n = 6;
    let q = PrecisionOperator::new(&LatticeGraph::torus(n, n, 1.0 / n as f64)?, 1.0)?;
    let quadratic = InteractionSpec::uniform(Polynomial::new(vec![0.0, 0.0, 0.5]), n * n)?;
    let est = partition_mc(&quadratic, &q, 100_000, &RngStream::new(2, 0))?;
    println!(
        "Z for :x^2:/2   MC {:.6} +- {:.1e}   exact {:.6}",
        est.estimate,
        est.std_error,
        quadratic_oracle(&quadratic, &q)?
    );

    let quartic = InteractionSpec::uniform(Polynomial::monomial(4, 1.0), n * n)?;
    let est = partition_mc(&quartic, &q, 100_000, &RngStream::new(3, 0))?;
    println!("Z for :x^4:     MC {:.6} +- {:.1e}\n", est.estimate, est.std_error);

    let m = 16;
    let q = PrecisionOperator::new(&LatticeGraph::torus(m, m, 1.0 / m as f64)?, 1.0)?;
    let spec = InteractionSpec::uniform(Polynomial::monomial(4, 1.0), m * m)?;
    for row in mollifier_compare(&q, &spec, &[0, 1, 2, 4], 0, &RngStream::new(4, 0))? {
        println!(
            "radius {}  eps {:.4}  heat time {:.3}  distance {:.4e}",
            row.radius, row.epsilon, row.heat_time, row.distance
        );
    }
    Ok(())
}
