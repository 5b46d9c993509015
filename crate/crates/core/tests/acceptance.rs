//! Acceptance criteria, run concurrently with one PASS/FAIL line each. Reference
//! values come from oracles computed here, independently of the routines under test.

use std::f64::consts::{LN_2, PI};
use std::process::Command;
use std::time::Instant;

use fieldlab::chain::{
    build_transfer, chapman_kolmogorov_residual, circulant_log_partition, conditioned_kernel,
    gaussian_benchmark_polynomial, gibbs_convergence, grid_vector, mixing_check, normalized_log_partition,
    spectral_report,
};
use fieldlab::lattice::{
    bayes_check, bfk, quad_perturb, quad_perturb_mc, rp_check, LatticeGraph, PrecisionOperator, VertexSet,
};
use fieldlab::numerics::{DenseMatrix, QuadratureGrid, RngStream};
use fieldlab::poly::Polynomial;
use fieldlab::pphi2::tadpole_fit;
use fieldlab::segal::{
    adjoint_check, build_amplitude, compose, free_trace_check, interacting_trace_check, relative_deviation,
    spectral_suite, CylinderSlab, GluingMode, QuadratureOptions, SlabInteraction, SpectralProbe,
};
use fieldlab::wick::{hermite, isserlis, wick_product_mc};
use fieldlab::zeta::{bfk_torus_check, detzeta_circle, rn_det_identity, DEFAULT_T_SPLIT};

struct Outcome {
    pass: bool,
    line: String,
}

fn report(criterion: u32, title: &str, pass: bool, detail: String) -> Outcome {
    let verdict = if pass { "PASS" } else { "FAIL" };
    Outcome {
        pass,
        line: format!("criterion {criterion:>2} [{verdict}] {title}: {detail}"),
    }
}

/// Eigenvalues 2 − 2cos(2πk/n) of the unit-weight n-cycle Laplacian.
fn ring_symbol(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
fn gauss_jordan_inverse(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let pivot = a[c].clone();
                a[r].iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    DenseMatrix::from_fn(n, n, |i, j| a[i][n + j])
}

/// Sum over perfect matchings of the covariance products, by recursion on
/// the first index.
fn matching_sum(cov: &DenseMatrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 1.0;
    }
    if labels.len() % 2 == 1 {
        return 0.0;
    }
    let first = labels[0];
    (1..labels.len())
        .map(|j| {
            let rest: Vec<usize> = labels[1..]
                .iter()
                .enumerate()
                .filter(|(i, _)| *i + 1 != j)
                .map(|(_, &l)| l)
                .collect();
            cov[(first, labels[j])] * matching_sum(cov, &rest)
        })
        .sum()
}

fn criterion_01_gaussian_chain_benchmark() -> Outcome {
    let start = Instant::now();
    let limit = -0.5 * ((2.0 + 3f64.sqrt()) / 2.0).ln();
    let t = build_transfer(
        &gaussian_benchmark_polynomial(1.0),
        &QuadratureGrid::gauss_hermite(200).unwrap(),
    )
    .unwrap();
    let n = 2048;
    let by_trace = normalized_log_partition(&t, n).unwrap() / n as f64;
    let by_circulant = circulant_log_partition(1.0, n) / n as f64;
    let elapsed = start.elapsed().as_secs_f64();
    let (e1, e2) = ((by_trace - limit).abs(), (by_circulant - limit).abs());
    report(
        1,
        "Gaussian chain free energy at N=2048",
        e1 <= 1e-4 && e2 <= 1e-4 && elapsed < 10.0,
        format!("limit {limit:.9}, trace error {e1:.2e}, circulant error {e2:.2e}, {elapsed:.2}s"),
    )
}

fn criterion_02_chapman_kolmogorov() -> Outcome {
    let grid = QuadratureGrid::gauss_hermite(120).unwrap();
    let mut worst = 0.0f64;
    for p in [Polynomial::zero(), Polynomial::monomial(4, 1.0)] {
        let t = build_transfer(&p, &grid).unwrap();
        for (n1, n2, a, b) in [(1, 1, 0.3, -0.2), (2, 3, 0.5, 0.1), (1, 4, -0.7, 0.4)] {
            worst = worst.max(chapman_kolmogorov_residual(&t, n1, n2, a, b).unwrap());
        }
    }
    // Two free steps: √(π/2)·e^{−(x−y)²/2}.
    let free = build_transfer(&Polynomial::zero(), &grid).unwrap();
    let (x, y) = (0.4, -0.3);
    let k2 = conditioned_kernel(&free, 2, x, y).unwrap();
    let closed = (PI / 2.0).sqrt() * (-(x - y) * (x - y) / 2.0).exp();
    let closed_err = (k2 - closed).abs() / closed;
    report(
        2,
        "Chapman-Kolmogorov for P=0 and P=x^4 on 120 nodes",
        worst <= 1e-8 && closed_err <= 1e-8,
        format!("max residual {worst:.2e}, two-step closed form error {closed_err:.2e}"),
    )
}

fn criterion_03_discrete_bfk() -> Outcome {
    let start = Instant::now();
    let (n, a, m) = (16, 1.0 / 16.0, 1.0);
    let q = PrecisionOperator::new(&LatticeGraph::torus(n, n, a).unwrap(), m).unwrap();
    let r = bfk(&q, &VertexSet::torus_row(n, 0)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let s = ring_symbol(n);
    let spectral: f64 = s
        .iter()
        .flat_map(|x| s.iter().map(move |y| (x + y + m * m * a * a).ln()))
        .sum();
    let oracle_err = (r.log_det_q - spectral).abs() / spectral.abs();
    report(
        3,
        "discrete BFK on a 16x16 torus cut along a cycle",
        r.relative_residual <= 1e-10 && oracle_err <= 1e-12 && elapsed < 5.0,
        format!(
            "relative residual {:.2e}, log det Q vs spectrum {oracle_err:.2e}, {elapsed:.2}s",
            r.relative_residual
        ),
    )
}

fn criterion_04_bayes_principle() -> Outcome {
    let q = PrecisionOperator::new(&LatticeGraph::torus(12, 12, 1.0 / 12.0).unwrap(), 1.0).unwrap();
    let s1 = VertexSet::new(144, (0..12).collect::<Vec<_>>()).unwrap();
    let s2 = VertexSet::new(144, vec![6 * 12 + 5, 6 * 12 + 6, 8 * 12 + 2, 10 * 12 + 11]).unwrap();
    let r = bayes_check(&q, &s1, &s2, 1000, &RngStream::new(0, 1)).unwrap();
    report(
        4,
        "Bayes principle at 1000 points on a 12x12 torus",
        r.max_discrepancy() <= 1e-8,
        format!(
            "forward {:.2e}, backward {:.2e}, at zero {:.2e}",
            r.forward_discrepancy, r.backward_discrepancy, r.zero_point_error
        ),
    )
}

fn criterion_05_reflection_positivity() -> Outcome {
    let doubles = [
        LatticeGraph::grid_double(2, 4, 1.0, false).unwrap(),
        LatticeGraph::torus_double(6, 8, 0.5).unwrap(),
        LatticeGraph::grid_double(5, 3, 0.25, true).unwrap(),
        LatticeGraph::torus_double(8, 12, 1.0 / 8.0).unwrap(),
    ];
    let (mut min_eig, mut pairing) = (f64::INFINITY, 0.0f64);
    for g in &doubles {
        let r = rp_check(&PrecisionOperator::new(g, 1.0).unwrap()).unwrap();
        min_eig = min_eig.min(r.min_eigenvalue);
        pairing = pairing.max(r.pairing_error);
    }
    report(
        5,
        "reflection positivity on four lattice doubles",
        min_eig >= -1e-10 && pairing <= 1e-10,
        format!("smallest eigenvalue of C_N - C_D {min_eig:.2e}, pairing error {pairing:.2e}"),
    )
}

fn criterion_06_quadratic_perturbation() -> Outcome {
    let n = 8;
    let q = PrecisionOperator::new(&LatticeGraph::cycle(n, 0.125).unwrap(), 1.0).unwrap();
    let v = DenseMatrix::from_fn(n, n, |i, j| {
        let d = (i as isize - j as isize).rem_euclid(n as isize) as usize;
        match d {
            0 => 0.5,
            1 | 7 => 0.125,
            _ => 0.0,
        }
    });
    let exact = quad_perturb(&q, &v).unwrap();
    // det(I + C^{1/2}VC^{1/2})^{−1/2} = (det Q / det(Q+V))^{1/2}.
    let det = |m: &DenseMatrix| {
        let inv = gauss_jordan_inverse(m);
        // Product of elimination pivots.
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            if p != c {
                a.swap(c, p);
                d = -d;
            }
            d *= a[c][c];
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                let pivot = a[c].clone();
                a[r].iter_mut().zip(&pivot).for_each(|(x, p)| *x -= f * p);
            }
        }
        (d, inv)
    };
    let (det_q, _) = det(q.matrix());
    let (det_qv, inv_qv) = det(&q.matrix().add(&v));
    let z_oracle = (det_q / det_qv).sqrt();
    let (mc, se) = quad_perturb_mc(&q, &v, 1_000_000, &RngStream::new(0, 2));
    let sigmas = (mc - z_oracle).abs() / se;
    let cov_err = exact.gibbs.covariance().max_abs_diff(&inv_qv);
    let z_err = (exact.z() - z_oracle).abs();
    report(
        6,
        "quadratic perturbation on an 8-cycle",
        sigmas <= 3.0 && cov_err <= 1e-10 && z_err <= 1e-12,
        format!("MC {mc:.6} vs {z_oracle:.6} ({sigmas:.2} SE), Gibbs covariance error {cov_err:.2e}"),
    )
}

fn criterion_07_wick_suite() -> Outcome {
    let mut herr = 0.0f64;
    for x in [-3.0, -1.2, -0.5, 0.0, 0.25, 1.0, 2.7] {
        let x2: f64 = x * x;
        let (h2, h4) = (x2 - 1.0, x2 * x2 - 6.0 * x2 + 3.0);
        herr = herr.max((hermite(2, x) - h2).abs() / h2.abs().max(1.0));
        herr = herr.max((hermite(4, x) - h4).abs() / h4.abs().max(1.0));
    }

    let c = 0.6;
    let acc = wick_product_mc(4, 4, c, 1.0, 1.0, 4_000_000, &RngStream::new(0, 3)).unwrap();
    let exact = 24.0 * c.powi(4);
    let sigmas = (acc.mean - exact).abs() / acc.std_error();

    let cov = DenseMatrix::from_rows(&[
        vec![2.0, 0.3, -0.4, 0.1],
        vec![0.3, 1.5, 0.2, -0.6],
        vec![-0.4, 0.2, 1.2, 0.5],
        vec![0.1, -0.6, 0.5, 1.8],
    ])
    .unwrap();
    let mut rng = RngStream::new(0, 4);
    let mut iss = 0.0f64;
    for legs in 1..=8 {
        for _ in 0..20 {
            let labels: Vec<usize> = (0..legs).map(|_| (rng.next_u64() % 4) as usize).collect();
            let v = isserlis(&cov, &labels).unwrap();
            let o = matching_sum(&cov, &labels);
            iss = iss.max((v - o).abs() / o.abs().max(1.0));
        }
    }
    report(
        7,
        "Wick suite",
        herr <= 4.0 * f64::EPSILON && sigmas <= 3.0 && iss <= 1e-13,
        format!(
            "h2/h4 error {herr:.1e}, E[:X^4::Y^4:] MC {:.5} vs {exact:.5} ({sigmas:.2} SE), Isserlis vs matchings {iss:.1e}",
            acc.mean
        ),
    )
}

fn criterion_08_tadpole_log_divergence() -> Outcome {
    let spacings = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let fit = tadpole_fit(1.0, 1.0, &spacings).unwrap();
    // Dense inverse diagonal at the coarsest spacing.
    let q = PrecisionOperator::new(&LatticeGraph::torus(8, 8, 1.0 / 8.0).unwrap(), 1.0).unwrap();
    let dense = gauss_jordan_inverse(q.matrix())[(0, 0)];
    let coarse_err = (fit.points[0].1 - dense).abs();
    report(
        8,
        "tadpole grows like log(1/a)",
        fit.r_squared >= 0.99 && coarse_err <= 1e-12 && fit.slope > 0.0,
        format!(
            "R^2 {:.6}, slope {:.5} (1/(2pi) = {:.5}), a=1/8 tadpole vs dense inverse {coarse_err:.1e}",
            fit.r_squared,
            fit.slope,
            1.0 / (2.0 * PI)
        ),
    )
}

/// −½·log det(Q/2) of the glued n_t × m torus with Q = L + 2m²a², from its spectrum.
fn torus_oracle(n_t: usize, m: usize, spacing: f64, mass: f64) -> f64 {
    let shift = 2.0 * mass * mass * spacing * spacing;
    let (a, b) = (ring_symbol(n_t), ring_symbol(m));
    -0.5 * a
        .iter()
        .flat_map(|x| b.iter().map(move |y| ((x + y + shift) / 2.0).ln()))
        .sum::<f64>()
}

fn criterion_09_segal_compose_trace_adjoint() -> Outcome {
    let opts = |order| QuadratureOptions {
        boundary_order: order,
        interior_order: 16,
    };
    let mut notes = Vec::new();
    let mut pass = true;

    let thin = CylinderSlab::free(2, 0, 1.0, 1.0);
    let thick = CylinderSlab::free(2, 1, 1.0, 1.0);
    let u = build_amplitude(&thin, &opts(32)).unwrap();
    let dev = relative_deviation(
        &compose(&u, &u).unwrap(),
        &build_amplitude(&thick, &opts(32)).unwrap(),
        GluingMode::Strict,
    )
    .unwrap();
    pass &= dev <= 1e-8;
    notes.push(format!("free compose {dev:.1e}"));

    let int = SlabInteraction {
        polynomial: Polynomial::monomial(4, 0.5),
        chi: None,
        wick_variance: None,
    };
    let i1 = CylinderSlab::free(1, 1, 1.0, 1.0).with_interaction(int.clone());
    let i3 = CylinderSlab::free(1, 3, 1.0, 1.0).with_interaction(int);
    let ui = build_amplitude(&i1, &opts(64)).unwrap();
    let idev = relative_deviation(
        &compose(&ui, &ui).unwrap(),
        &build_amplitude(&i3, &opts(64)).unwrap(),
        GluingMode::Strict,
    )
    .unwrap();
    pass &= idev <= 1e-3;
    notes.push(format!("interacting compose {idev:.1e}"));

    let mut trace_err = 0.0f64;
    for copies in [1, 3, 8] {
        let r = free_trace_check(&thin, &u, copies).unwrap();
        let oracle = torus_oracle(2, copies, 1.0, 1.0);
        trace_err = trace_err.max((r.log_trace - oracle).exp_m1().abs());
    }
    pass &= trace_err <= 1e-6;
    notes.push(format!("free trace {trace_err:.1e}"));

    let mut z_max = 0.0f64;
    for copies in [1, 3] {
        let r = interacting_trace_check(
            &i1,
            &opts(64),
            copies,
            200_000,
            &RngStream::new(0, 5).substream(copies as u64),
        )
        .unwrap();
        z_max = z_max.max(r.z_score);
    }
    pass &= z_max <= 3.0;
    notes.push(format!("interacting trace {z_max:.2} SE"));

    let asym = adjoint_check(&u).asymmetry.max(adjoint_check(&ui).asymmetry);
    pass &= asym <= 1e-10;
    notes.push(format!("adjoint {asym:.1e}"));
    report(9, "Segal composition, trace and adjoint", pass, notes.join(", "))
}

fn criterion_10_mass_gap_mixing_gibbs() -> Outcome {
    const RATE_SLACK: f64 = 1e-3;
    let mut notes = Vec::new();
    let mut pass = true;

    let grid = QuadratureGrid::gauss_hermite(200).unwrap();
    for (label, p) in [
        ("gaussian chain", gaussian_benchmark_polynomial(1.0)),
        ("quartic chain", Polynomial::new(vec![0.0, 0.0, 0.5, 0.0, 1.0])),
    ] {
        let t = build_transfer(&p, &grid).unwrap();
        let sr = spectral_report(&t).unwrap();
        let f = grid_vector(&t, |x| (-x * x).exp());
        let g = grid_vector(&t, |x| (x + 0.5) * (-x * x).exp());
        let rows = mixing_check(&t, &f, &g, 50).unwrap();
        let mixing = rows.iter().all(|r| r.holds());
        let nodes = t.grid().nodes();
        let ins = vec![
            (1, nodes.iter().map(|x| x * x).collect::<Vec<_>>()),
            (3, nodes.iter().map(|x| 1.0 / (1.0 + x * x)).collect()),
        ];
        let (_, rate) = gibbs_convergence(&t, &ins, &[8, 10, 12, 14, 16]).unwrap();
        let rate = rate.unwrap_or(0.0);
        pass &= mixing && sr.alpha < 1.0 && rate <= sr.alpha + RATE_SLACK;
        notes.push(format!(
            "{label}: alpha {:.4}, mixing {mixing}, Gibbs rate {rate:.4}",
            sr.alpha
        ));
    }

    for slab in [CylinderSlab::free(2, 0, 1.0, 1.0), CylinderSlab::free(1, 1, 1.0, 0.7)] {
        let u = build_amplitude(
            &slab,
            &QuadratureOptions {
                boundary_order: 12,
                interior_order: 16,
            },
        )
        .unwrap();
        let last = slab.n_transverse - 1;
        let probe = SpectralProbe {
            mix_f: u.grid_function(|x| (-x[0] * x[0]).exp()),
            mix_g: u.grid_function(|x| x[last] * (-x[last] * x[last]).exp()),
            k_max: 50,
            gibbs_f: u.grid_values(|x| x[0] * x[0]),
            gibbs_g: u.grid_values(|x| 1.0 / (1.0 + x[last] * x[last])),
            gibbs_separation: 2,
            n_list: vec![10, 12, 14, 16],
        };
        let s = spectral_suite(&u, &probe).unwrap();
        let rate = s.gibbs_rate.unwrap_or(0.0);
        pass &= s.ground_positive && s.alpha < 1.0 && s.mixing_holds() && rate <= s.alpha + RATE_SLACK;
        notes.push(format!(
            "segal n_t={}: alpha {:.4}, mixing {}, Gibbs rate {rate:.4}",
            slab.n_transverse,
            s.alpha,
            s.mixing_holds()
        ));
    }
    report(10, "mass gap, mixing and Gibbs convergence", pass, notes.join("; "))
}

fn criterion_11_circle_zeta_determinant() -> Outcome {
    let (m, l) = (1.0, 2.0 * PI);
    let closed = (4.0 * (m * l / 2.0f64).sinh().powi(2)).ln();
    let c = detzeta_circle(m, l, DEFAULT_T_SPLIT).unwrap();
    let err = (c.result.logdet - closed).abs();
    let mut spread = 0.0f64;
    for ts in [0.05, 0.1, 0.2, 0.4] {
        spread = spread.max((detzeta_circle(m, l, ts).unwrap().result.logdet - c.result.logdet).abs());
    }
    report(
        11,
        "circle zeta determinant",
        err <= 1e-6 && spread <= 1e-7,
        format!(
            "logdet {:.12} vs {closed:.12}: error {err:.1e}, t_split spread {spread:.1e}",
            c.result.logdet
        ),
    )
}

fn criterion_12_continuum_bfk() -> Outcome {
    let (m, l, t) = (1.0, 2.0 * PI, 1.0);
    let b = bfk_torus_check(m, l, t, DEFAULT_T_SPLIT).unwrap();
    // Independent Mellin continuation of the same three operators.
    let (torus, dirichlet, dn) = (-2.26162812718676, -2.93478986414456, 0.67316173695780);
    let ref_err = (b.torus.logdet - torus)
        .abs()
        .max((b.dirichlet.logdet - dirichlet).abs())
        .max((b.dn.logdet - dn).abs());
    let naive = b
        .naive_discrepancy
        .iter()
        .map(|&(k, s)| (s - (2 * k + 1) as f64 * LN_2).abs())
        .fold(0.0, f64::max);
    let rn = rn_det_identity(m, l, t, DEFAULT_T_SPLIT).unwrap();
    let zeta0 = b.zeta_omega0.abs().max(b.zeta_omega0_direct.abs());
    report(
        12,
        "continuum BFK on the flat torus",
        b.residual <= 1e-4 && ref_err <= 1e-6 && naive <= 1e-9 && zeta0 <= 1e-6 && rn.residual <= 1e-5,
        format!(
            "residual {:.1e}, vs reference {ref_err:.1e}, per-mode product off by (2K+1)ln2 to {naive:.1e}, zeta_omega(0) {zeta0:.1e}, RN identity {:.1e}",
            b.residual, rn.residual
        ),
    )
}

fn criterion_13_cli_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("fieldlab-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for sub in ["chain", "lattice", "pphi2", "segal", "zeta"] {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, "1"), (1, "4")] {
            let path = dir.join(format!("{sub}-{run}.json"));
            let status = Command::new(env!("CARGO_BIN_EXE_fieldlab"))
                .args([sub, "--seed", "17", "--out"])
                .arg(&path)
                .env("FIELDLAB_THREADS", threads)
                .stderr(std::process::Stdio::null())
                .status()
                .unwrap();
            pass &= status.code() == Some(0);
            outputs.push(std::fs::read(&path).unwrap());
        }
        let same = outputs[0] == outputs[1];
        pass &= same;
        notes.push(format!("{sub} {}", if same { "identical" } else { "differs" }));
    }
    std::fs::remove_dir_all(&dir).ok();
    report(13, "same seed gives byte-identical reports", pass, notes.join(", "))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 13] = [
        (1, criterion_01_gaussian_chain_benchmark),
        (2, criterion_02_chapman_kolmogorov),
        (3, criterion_03_discrete_bfk),
        (4, criterion_04_bayes_principle),
        (5, criterion_05_reflection_positivity),
        (6, criterion_06_quadratic_perturbation),
        (7, criterion_07_wick_suite),
        (8, criterion_08_tadpole_log_divergence),
        (9, criterion_09_segal_compose_trace_adjoint),
        (10, criterion_10_mass_gap_mixing_gibbs),
        (11, criterion_11_circle_zeta_determinant),
        (12, criterion_12_continuum_bfk),
        (13, criterion_13_cli_determinism),
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles
            .into_iter()
            .zip(&criteria)
            .map(|(h, (k, _))| {
                h.join().unwrap_or_else(|_| Outcome {
                    pass: false,
                    line: format!("criterion {k:>2} [FAIL] panicked"),
                })
            })
            .collect()
    });
    for o in &outcomes {
        println!("{}", o.line);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    if passed != outcomes.len() {
        std::process::exit(1);
    }
}
