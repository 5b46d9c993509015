use serde::{Deserialize, Serialize};

use super::eigen::tridiagonal_eigenvalues;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    GaussHermite,
    UniformTruncated,
}

/// Nodes and Lebesgue weights on the real line: Σ W_i f(x_i) ≈ ∫ f(x) dx.
///
/// For the Gauss–Hermite kind the stored weights already contain the factor
/// e^{x_i²}, so the rule integrates f(x) = g(x)·e^{−x²} exactly for
/// polynomials g of degree < 2·order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    kind: QuadratureKind,
}

/// Largest supported Gauss–Hermite order.
pub const MAX_HERMITE_ORDER: usize = 2000;

impl QuadratureGrid {
    /// Gauss–Hermite rule of the given order for weight e^{−x²}.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        Self::gauss_hermite_scaled(order, 1.0)
    }

    /// Gauss–Hermite rule with nodes stretched by `scale` (weight e^{−x²/scale²}).
    pub fn gauss_hermite_scaled(order: usize, scale: f64) -> Result<Self> {
        if order == 0 || order > MAX_HERMITE_ORDER {
            return invalid(format!("Gauss-Hermite order must lie in 1..={MAX_HERMITE_ORDER}"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return invalid("quadrature scale must be positive");
        }
        let (nodes, log_w) = hermite_rule(order)?;
        let ls = scale.ln();
        Ok(Self::from_log_weights(
            nodes.iter().map(|x| x * scale).collect(),
            log_w.iter().map(|l| l + ls).collect(),
            QuadratureKind::GaussHermite,
        ))
    }

    /// Trapezoid rule with `count` equally spaced nodes on [−half_width, half_width].
    pub fn uniform_truncated(count: usize, half_width: f64) -> Result<Self> {
        if count < 2 {
            return invalid("uniform grid needs at least two nodes");
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return invalid("half width must be positive");
        }
        let h = 2.0 * half_width / (count - 1) as f64;
        let nodes: Vec<f64> = (0..count).map(|i| -half_width + h * i as f64).collect();
        let log_w = (0..count)
            .map(|i| {
                if i == 0 || i + 1 == count {
                    (0.5 * h).ln()
                } else {
                    h.ln()
                }
            })
            .collect();
        Ok(Self::from_log_weights(nodes, log_w, QuadratureKind::UniformTruncated))
    }

    fn from_log_weights(nodes: Vec<f64>, log_weights: Vec<f64>, kind: QuadratureKind) -> Self {
        let weights = log_weights.iter().map(|l| l.exp()).collect();
        Self {
            nodes,
            weights,
            log_weights,
            kind,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Lebesgue weights W_i.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// log W_i, finite even where W_i overflows.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Σ W_i f(x_i).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// Σ exp(log W_i + g(x_i)); stable for integrands with Gaussian decay.
    pub fn integrate_log(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(x, lw)| (lw + g(*x)).exp())
            .sum()
    }
}

/// Nodes and log Lebesgue weights of the order-n Gauss–Hermite rule.
fn hermite_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (0.5 * k as f64).sqrt()).collect();
    let mut nodes = tridiagonal_eigenvalues(&diag, &off)?;
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = HermiteEval::at(n, *x);
            let step = h.phi_n / ((2.0 * n as f64).sqrt() * h.phi_prev);
            if !step.is_finite() {
                break;
            }
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Symmetrize to remove rounding bias.
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let log_w = nodes
        .iter()
        .map(|&x| x * x - HermiteEval::at(n, x).log_sum_sq)
        .collect();
    Ok((nodes, log_w))
}

/// Orthonormal Hermite polynomials (weight e^{−x²}) evaluated with a shared
/// running scale so that large orders at large |x| neither overflow nor underflow.
struct HermiteEval {
    phi_n: f64,
    phi_prev: f64,
    log_sum_sq: f64,
}

impl HermiteEval {
    fn at(n: usize, x: f64) -> Self {
        const RESCALE: f64 = 1e150;
        let mut log_scale = 0.0f64;
        let mut prev = 0.0f64;
        let mut cur = std::f64::consts::PI.powf(-0.25);
        let mut sum = 0.0f64;
        for k in 0..n {
            sum += cur * cur;
            let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE {
                cur /= RESCALE;
                prev /= RESCALE;
                sum /= RESCALE * RESCALE;
                log_scale += RESCALE.ln();
            }
        }
        Self {
            phi_n: cur,
            phi_prev: prev,
            log_sum_sq: sum.ln() + 2.0 * log_scale,
        }
    }
}

/// Gauss–Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return invalid("Gauss-Legendre order must be positive");
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let mut nodes = tridiagonal_eigenvalues(&diag, &off)?;
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let mut dp = 1.0;
        for _ in 0..3 {
            let (p, d) = legendre(n, *x);
            dp = d;
            let step = p / d;
            *x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, *x);
        dp = if d.is_finite() { d } else { dp };
        weights.push(2.0 / ((1.0 - *x * *x) * dp * dp));
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    Ok((
        nodes.iter().map(|x| mid + half * x).collect(),
        weights.iter().map(|w| w * half).collect(),
    ))
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn gaussian_moments() {
        for order in [1usize, 5, 20, 100, 200, 400] {
            let g = QuadratureGrid::gauss_hermite(order).unwrap();
            let z = g.integrate_log(|x| -x * x);
            assert!((z - SQRT_PI).abs() < 1e-12, "order {order}: {z}");
            if order >= 3 {
                let m2 = g.integrate_log(|x| -x * x + 2.0 * x.abs().ln());
                assert!((m2 - 0.5 * SQRT_PI).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nodes_sorted_weights_positive() {
        let g = QuadratureGrid::gauss_hermite(300).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(g.log_weights().iter().all(|l| l.is_finite()));
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn shifted_gaussian_integral() {
        let g = QuadratureGrid::gauss_hermite(80).unwrap();
        let v = g.integrate_log(|x| -2.0 * (x - 0.7).powi(2));
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn scaled_rule() {
        let g = QuadratureGrid::gauss_hermite_scaled(40, 3.0).unwrap();
        let v = g.integrate_log(|x| -x * x / 9.0);
        assert!((v - 3.0 * SQRT_PI).abs() < 1e-12);
    }

    #[test]
    fn uniform_truncated_gaussian() {
        let g = QuadratureGrid::uniform_truncated(401, 10.0).unwrap();
        assert_eq!(g.kind(), QuadratureKind::UniformTruncated);
        let v = g.integrate(|x| (-x * x).exp());
        assert!((v - SQRT_PI).abs() < 1e-12);
    }

    #[test]
    fn legendre_polynomials() {
        let (x, w) = gauss_legendre(20, 0.0, 2.0).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 2f64.powi(8) / 8.0).abs() < 1e-11);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn bad_orders() {
        assert!(QuadratureGrid::gauss_hermite(0).is_err());
        assert!(QuadratureGrid::uniform_truncated(1, 1.0).is_err());
    }
}
