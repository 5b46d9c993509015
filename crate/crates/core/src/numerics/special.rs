pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral E₁(x) = ∫ₓ^∞ e^{−t}/t dt for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// n! as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Number of perfect matchings of 2k points, (2k−1)!!.
pub fn double_factorial_odd(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    (1..n).step_by(2).fold(1.0, |acc, k| acc * k as f64)
}

/// e^{−x} − Σ_{j<terms} (−x)^j/j!, without cancellation for small x.
pub fn exp_taylor_remainder(x: f64, terms: usize) -> f64 {
    if x.abs() > 1.0 {
        let head: f64 = (0..terms).map(|j| (-x).powi(j as i32) / factorial(j)).sum();
        return (-x).exp() - head;
    }
    let mut term = (-x).powi(terms as i32) / factorial(terms);
    let mut sum = 0.0;
    let mut j = terms;
    while term != 0.0 && j < terms + 60 {
        sum += term;
        j += 1;
        term *= -x / j as f64;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // E1(0.5), E1(1), E1(2), E1(10)
        let cases = [
            (0.5, 0.559_773_594_776_160_8),
            (1.0, 0.219_383_934_395_520_27),
            (2.0, 0.048_900_510_708_061_02),
            (10.0, 4.156_968_929_685_324e-6),
        ];
        for (x, want) in cases {
            let got = exp_integral_e1(x);
            assert!((got - want).abs() <= 1e-14 * want.max(1e-300) * 10.0, "{x}: {got}");
        }
    }

    #[test]
    fn remainder_matches_direct() {
        for x in [1e-3f64, 0.1, 0.7, 3.0] {
            let direct = (-x).exp() - (1.0 - x + x * x / 2.0);
            let r = exp_taylor_remainder(x, 3);
            assert!((r - direct).abs() < 1e-15 + 1e-12 * direct.abs());
        }
        let tiny = exp_taylor_remainder(1e-4, 6);
        assert!((tiny - 1e-24 / 720.0).abs() < 1e-30);
    }

    #[test]
    fn counting() {
        assert_eq!(factorial(5), 120.0);
        assert_eq!(double_factorial_odd(6), 15.0);
        assert_eq!(double_factorial_odd(5), 0.0);
        assert_eq!(double_factorial_odd(0), 1.0);
    }
}
