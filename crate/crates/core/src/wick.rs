//! Probabilists' Hermite polynomials, Wick ordering and Gaussian pairings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{double_factorial_odd, factorial, DenseMatrix, MeanAccumulator, RngStream};
use crate::poly::Polynomial;

/// Largest number of Gaussian factors accepted by the pairing enumerator.
pub const MAX_PAIRING_LEGS: usize = 16;

/// h_n(x) via h_{n+1} = x·h_n − n·h_{n−1}.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// n!/((n−2j)!·j!·2^j), the number of ways to choose j disjoint pairs from n.
pub fn pairing_coefficient(n: usize, j: usize) -> f64 {
    factorial(n) / (factorial(n - 2 * j) * factorial(j) * 2f64.powi(j as i32))
}

/// Monomial coefficients of c^{n/2}·h_n(x/√c).
fn wick_monomial(n: usize, c: f64) -> Vec<f64> {
    let mut coeffs = vec![0.0; n + 1];
    for j in 0..=n / 2 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[n - 2 * j] = sign * pairing_coefficient(n, j) * c.powi(j as i32);
    }
    coeffs
}

/// A polynomial together with its Wick-ordered expansion at variance c.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WickPolynomial {
    pub base: Polynomial,
    pub variance: f64,
    pub expanded: Polynomial,
}

impl WickPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.expanded.eval(x)
    }

    /// Global minimum of the expansion over ℝ.
    pub fn minimum(&self) -> Result<f64> {
        Ok(self.expanded.global_min()?.0)
    }
}

/// :P(x): at variance c, term by term.
pub fn wick_order(p: &Polynomial, c: f64) -> Result<WickPolynomial> {
    if !(c >= 0.0 && c.is_finite()) {
        return invalid("Wick variance must be nonnegative");
    }
    let mut out = vec![0.0; p.coeffs().len()];
    for (k, &pk) in p.coeffs().iter().enumerate() {
        if pk != 0.0 {
            for (i, a) in wick_monomial(k, c).into_iter().enumerate() {
                out[i] += pk * a;
            }
        }
    }
    Ok(WickPolynomial {
        base: p.clone(),
        variance: c,
        expanded: Polynomial::new(out),
    })
}

/// :x^n: at variance c.
pub fn wick_power(n: usize, c: f64) -> Result<WickPolynomial> {
    wick_order(&Polynomial::monomial(n, 1.0), c)
}

/// b_n = −min h_n for even n ≥ 2, so that :x^n:_c ≥ −b_n·c^{n/2}.
pub fn hermite_lower_constant(n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(-1.0);
    }
    if !n.is_multiple_of(2) {
        return invalid("Hermite lower bound needs an even degree");
    }
    Ok(-wick_power(n, 1.0)?.minimum()?)
}

/// min over ℝ of :P:_c for a bounded-below P; for P = x^{2n} this is
/// −b_{2n}·c^n.
pub fn wick_lower_bound(p: &Polynomial, c: f64) -> Result<f64> {
    wick_order(p, c)?.minimum()
}

/// E[X_{i1}···X_{ik}] as the sum over perfect matchings of covariance
/// products; zero for an odd number of factors.
pub fn isserlis(cov: &DenseMatrix, indices: &[usize]) -> Result<f64> {
    check_labels(cov, indices)?;
    if indices.len() % 2 == 1 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for_each_matching(indices.len(), |pairs| {
        total += product_over_pairs(cov, indices, pairs);
    })?;
    Ok(total)
}

fn check_labels(cov: &DenseMatrix, labels: &[usize]) -> Result<()> {
    if !cov.is_square() {
        return Err(Error::ContractViolation("covariance must be square".into()));
    }
    if labels.iter().any(|&i| i >= cov.rows()) {
        return invalid("label out of range of the covariance");
    }
    if labels.len() > MAX_PAIRING_LEGS {
        return Err(Error::Capacity {
            limit: "pairing legs",
            requested: labels.len(),
            maximum: MAX_PAIRING_LEGS,
        });
    }
    Ok(())
}

fn product_over_pairs(cov: &DenseMatrix, labels: &[usize], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().fold(1.0, |acc, &(a, b)| acc * cov[(labels[a], labels[b])])
}

/// Visits every perfect matching of {0..n−1}, pairs listed with a < b and
/// ordered by first element.
pub fn for_each_matching(n: usize, mut visit: impl FnMut(&[(usize, usize)])) -> Result<()> {
    if n > MAX_PAIRING_LEGS {
        return Err(Error::Capacity {
            limit: "pairing legs",
            requested: n,
            maximum: MAX_PAIRING_LEGS,
        });
    }
    if n % 2 == 1 {
        return Ok(());
    }
    fn recurse(free: &mut Vec<usize>, pairs: &mut Vec<(usize, usize)>, visit: &mut dyn FnMut(&[(usize, usize)])) {
        if free.is_empty() {
            visit(pairs);
            return;
        }
        let first = free.remove(0);
        for k in 0..free.len() {
            let partner = free.remove(k);
            pairs.push((first, partner));
            recurse(free, pairs, visit);
            pairs.pop();
            free.insert(k, partner);
        }
        free.insert(0, first);
    }
    let mut free: Vec<usize> = (0..n).collect();
    recurse(&mut free, &mut Vec::new(), &mut visit);
    Ok(())
}

/// (n−1)!! for even n, zero for odd n.
pub fn matching_count(n: usize) -> f64 {
    double_factorial_odd(n)
}

/// A contraction pattern of legs: each pair joins two legs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairingDiagram {
    pub legs: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl PairingDiagram {
    /// Rejects legs used twice and out-of-range legs; legs left unpaired are
    /// allowed here and refused by [`diagram_value`].
    pub fn new(legs: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut used = vec![false; legs];
        for &(a, b) in &pairs {
            if a >= legs || b >= legs || a == b {
                return invalid(format!("bad contraction ({a}, {b})"));
            }
            if used[a] || used[b] {
                return invalid("a leg is contracted twice");
            }
            used[a] = true;
            used[b] = true;
        }
        Ok(Self { legs, pairs })
    }

    pub fn is_fully_contracted(&self) -> bool {
        2 * self.pairs.len() == self.legs
    }
}

/// Product of covariances over the edges of a fully contracted diagram whose
/// legs carry the variable labels `labels`.
pub fn diagram_value(cov: &DenseMatrix, labels: &[usize], diagram: &PairingDiagram) -> Result<f64> {
    check_labels(cov, labels)?;
    if labels.len() != diagram.legs {
        return Err(Error::Dimension {
            expected: diagram.legs,
            found: labels.len(),
        });
    }
    if !diagram.is_fully_contracted() {
        return invalid("diagram has dangling legs");
    }
    Ok(product_over_pairs(cov, labels, &diagram.pairs))
}

/// Topology of a labelled contraction: the sorted multiset of label pairs.
pub type DiagramShape = Vec<(usize, usize)>;

/// Groups all full contractions of the labelled legs by shape and counts the
/// contractions producing each shape.
pub fn diagram_classes(labels: &[usize]) -> Result<Vec<(DiagramShape, usize)>> {
    let mut classes: BTreeMap<DiagramShape, usize> = BTreeMap::new();
    for_each_matching(labels.len(), |pairs| {
        let mut shape: DiagramShape = pairs
            .iter()
            .map(|&(a, b)| (labels[a].min(labels[b]), labels[a].max(labels[b])))
            .collect();
        shape.sort_unstable();
        *classes.entry(shape).or_insert(0) += 1;
    })?;
    Ok(classes.into_iter().collect())
}

/// E[:X^n:_{cx} :Y^m:_{cy}] = δ_{nm}·n!·cxy^n.
pub fn wick_cov(n: usize, m: usize, cxy: f64, cx: f64, cy: f64) -> Result<f64> {
    if cx < 0.0 || cy < 0.0 {
        return invalid("variances must be nonnegative");
    }
    if cxy.abs() > (cx * cy).sqrt() * (1.0 + 1e-12) {
        return invalid("covariance violates Cauchy–Schwarz");
    }
    Ok(if n == m { factorial(n) * cxy.powi(n as i32) } else { 0.0 })
}

/// E[X_{i1}···X_{ik}] read off the generating function exp(½tᵀCt): the
/// coefficient of Π t_l^{a_l} in (½tᵀCt)^{k/2}/(k/2)!, times Π a_l!.
pub fn gaussian_moment(cov: &DenseMatrix, indices: &[usize]) -> Result<f64> {
    check_labels(cov, indices)?;
    if indices.len() % 2 == 1 {
        return Ok(0.0);
    }
    let mut target: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in indices {
        *target.entry(i).or_default() += 1;
    }
    let labels: Vec<usize> = target.keys().copied().collect();
    let want: Vec<usize> = target.values().copied().collect();
    let d = labels.len();
    // Quadratic form terms t_a t_b with coefficient ½C_aa or C_ab.
    let mut quad = Vec::new();
    for a in 0..d {
        for b in a..d {
            let c = cov[(labels[a], labels[b])];
            quad.push((a, b, if a == b { 0.5 * c } else { c }));
        }
    }
    let mut poly: BTreeMap<Vec<usize>, f64> = BTreeMap::from([(vec![0; d], 1.0)]);
    for _ in 0..indices.len() / 2 {
        let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (exp, coef) in &poly {
            for &(a, b, c) in &quad {
                let mut e = exp.clone();
                e[a] += 1;
                e[b] += 1;
                if e.iter().zip(&want).all(|(x, w)| x <= w) {
                    *next.entry(e).or_default() += coef * c;
                }
            }
        }
        poly = next;
    }
    let coef = poly.get(&want).copied().unwrap_or(0.0);
    let fact: f64 = want.iter().map(|&a| factorial(a)).product();
    Ok(coef * fact / factorial(indices.len() / 2))
}

/// Monte-Carlo E[:X^n:_{cx}·:Y^m:_{cy}] for a centered Gaussian pair.
pub fn wick_product_mc(
    n: usize,
    m: usize,
    cxy: f64,
    cx: f64,
    cy: f64,
    samples: usize,
    rng: &RngStream,
) -> Result<MeanAccumulator> {
    wick_cov(n, m, cxy, cx, cy)?;
    if cx == 0.0 || cy == 0.0 {
        return invalid("Monte-Carlo check needs positive variances");
    }
    let wx = wick_power(n, cx)?;
    let wy = wick_power(m, cy)?;
    let rho = cxy / (cx * cy).sqrt();
    let mut stream = rng.clone();
    let mut acc = MeanAccumulator::default();
    for _ in 0..samples {
        let (z1, z2) = (stream.normal(), stream.normal());
        let x = cx.sqrt() * z1;
        let y = cy.sqrt() * (rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2);
        acc.push(wx.eval(x) * wy.eval(y));
    }
    Ok(acc)
}

/// Coefficients a_j with :x^n:_{c₁} = Σ_j a_j·:x^{n−2j}:_{c₂}, delta = c₂ − c₁.
pub fn change_ordering(n: usize, delta: f64) -> Vec<f64> {
    (0..=n / 2)
        .map(|j| pairing_coefficient(n, j) * delta.powi(j as i32))
        .collect()
}

/// Re-expresses a Wick polynomial written in the :·:_{c₁} basis (coefficient
/// k multiplies :x^k:_{c₁}) in the :·:_{c₂} basis.
pub fn reorder_coefficients(coeffs: &[f64], delta: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    for (n, &a) in coeffs.iter().enumerate() {
        for (j, b) in change_ordering(n, delta).into_iter().enumerate() {
            out[n - 2 * j] += a * b;
        }
    }
    out
}
