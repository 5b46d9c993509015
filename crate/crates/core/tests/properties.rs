use fieldlab::chain::{build_transfer, log_partition_by_multiplication, log_partition_function};
use fieldlab::cli::config::{ChainConfig, LatticeConfig, Pphi2Config, SegalConfig, ZetaConfig};
use fieldlab::cli::ReportBuilder;
use fieldlab::lattice::{bfk, Edge, LatticeGraph, PrecisionOperator, VertexSet};
use fieldlab::numerics::{DenseMatrix, QuadratureGrid, RngStream};
use fieldlab::poly::Polynomial;
use fieldlab::segal::{build_amplitude, compose, relative_deviation, CylinderSlab, GluingMode, QuadratureOptions};
use fieldlab::wick::{change_ordering, gaussian_moment, hermite, isserlis, wick_power};
use fieldlab::zeta::fredholm_det_diagonal;
use proptest::prelude::*;

/// Random SPD matrix B·Bᵀ + d·I.
fn spd(n: usize, entries: &[f64], shift: f64) -> DenseMatrix {
    let b = DenseMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    let mut c = b.matmul(&b.transpose());
    for i in 0..n {
        c[(i, i)] += shift;
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn isserlis_matches_generating_function(
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        labels in prop::collection::vec(0usize..4, 0..=8),
    ) {
        let cov = spd(4, &entries, 0.5);
        let a = isserlis(&cov, &labels).unwrap();
        let b = gaussian_moment(&cov, &labels).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn hermite_polynomials_are_orthogonal(n in 0usize..9, m in 0usize..9) {
        let grid = QuadratureGrid::gauss_hermite_scaled(24, std::f64::consts::SQRT_2).unwrap();
        let inner = grid.integrate(|x| hermite(n, x) * hermite(m, x) * (-x * x / 2.0).exp())
            / (2.0 * std::f64::consts::PI).sqrt();
        let expected = if n == m { (1..=n).map(|k| k as f64).product() } else { 0.0 };
        prop_assert!((inner - expected).abs() <= 1e-9 * (1.0 + expected), "<h{n},h{m}> = {inner}");
    }

    #[test]
    fn change_of_wick_ordering_is_an_identity(
        n in 0usize..9, c1 in 0.1f64..2.0, c2 in 0.1f64..2.0, x in -3.0f64..3.0,
    ) {
        let lhs = wick_power(n, c1).unwrap().eval(x);
        let rhs: f64 = change_ordering(n, c2 - c1)
            .iter()
            .enumerate()
            .map(|(j, a)| a * wick_power(n - 2 * j, c2).unwrap().eval(x))
            .sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn bfk_holds_on_random_graphs(
        n in 5usize..12,
        extra in prop::collection::vec((0usize..64, 0usize..64, 0.2f64..3.0), 0..12),
        measures in prop::collection::vec(0.2f64..2.0, 12),
        mass in 0.1f64..2.0,
        cut in 1usize..4,
    ) {
        // A path keeps the graph connected; random chords add cycles.
        let mut edges: Vec<Edge> = (0..n - 1).map(|i| Edge { i, j: i + 1, weight: 1.0 }).collect();
        edges.extend(
            extra.iter()
                .map(|&(i, j, weight)| Edge { i: i % n, j: j % n, weight })
                .filter(|e| e.i != e.j),
        );
        let g = LatticeGraph::explicit(n, edges, measures[..n].to_vec()).unwrap();
        let q = PrecisionOperator::new(&g, mass).unwrap();
        let sigma = VertexSet::new(n, (0..n).step_by(cut + 1).collect::<Vec<_>>()).unwrap();
        let r = bfk(&q, &sigma).unwrap();
        prop_assert!(r.relative_residual <= 1e-10, "residual {}", r.relative_residual);
    }

    #[test]
    fn fredholm_diagonal_is_a_product(values in prop::collection::vec(-0.5f64..0.5, 1..20), z in -1.0f64..1.0) {
        let det = fredholm_det_diagonal(&values, z).unwrap();
        let logs: f64 = values.iter().map(|l| (1.0 + z * l).abs().ln()).sum();
        prop_assert!((det.abs().ln() - logs).abs() <= 1e-12);
        let norm: f64 = values.iter().map(|l| l.abs()).sum();
        prop_assert!(det.abs() <= (z.abs() * norm).exp() * (1.0 + 1e-12));
    }

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), id in any::<u64>(), child in any::<u64>()) {
        let draw = |r: &mut RngStream| (0..8).map(|_| r.next_u64()).collect::<Vec<_>>();
        let mut a = RngStream::new(seed, id).substream(child);
        let mut b = RngStream::new(seed, id).substream(child);
        prop_assert_eq!(draw(&mut a), draw(&mut b));
        let mut c = RngStream::new(seed, id).substream(child.wrapping_add(1));
        let mut d = RngStream::new(seed, id).substream(child);
        prop_assert_ne!(draw(&mut c), draw(&mut d));
    }

    #[test]
    fn tolerance_scale_is_monotone(error in 0.0f64..1.0, tol in 1e-6f64..1.0, s1 in 0.01f64..100.0, s2 in 0.01f64..100.0) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let pass = |scale| {
            let mut rb = ReportBuilder::new(scale, 0);
            rb.check("x", 0.0, error, tol);
            rb.finish("t", serde_json::Value::Null).pass
        };
        prop_assert!(!pass(lo) || pass(hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectral_and_multiplied_traces_agree(
        quad in 0.1f64..1.5, quart in 0.0f64..1.0, n in 1usize..200,
    ) {
        let p = Polynomial::new(vec![0.0, 0.0, quad, 0.0, quart]);
        let t = build_transfer(&p, &QuadratureGrid::gauss_hermite(60).unwrap()).unwrap();
        let a = log_partition_function(&t, n).unwrap();
        let b = log_partition_by_multiplication(&t, n).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn gluing_is_associative(mass in 0.3f64..2.0, spacing in 0.3f64..1.5, layers in 0usize..3) {
        let slab = CylinderSlab::free(1, layers, spacing, mass);
        let opts = QuadratureOptions { boundary_order: 24, interior_order: 16 };
        let u = build_amplitude(&slab, &opts).unwrap();
        let left = compose(&compose(&u, &u).unwrap(), &u).unwrap();
        let right = compose(&u, &compose(&u, &u).unwrap()).unwrap();
        let dev = relative_deviation(&left, &right, GluingMode::Strict).unwrap();
        prop_assert!(dev <= 1e-10, "deviation {dev}");
    }
}

fn round_trip<T>(value: &T) -> T
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    serde_json::from_str(&serde_json::to_string(value).unwrap()).unwrap()
}

#[test]
fn default_configs_survive_serialization() {
    assert_eq!(round_trip(&ChainConfig::default()), ChainConfig::default());
    assert_eq!(round_trip(&LatticeConfig::default()), LatticeConfig::default());
    assert_eq!(round_trip(&Pphi2Config::default()), Pphi2Config::default());
    assert_eq!(round_trip(&SegalConfig::default()), SegalConfig::default());
    assert_eq!(round_trip(&ZetaConfig::default()), ZetaConfig::default());
}
