use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real polynomial, constant term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds the polynomial, trimming trailing zero coefficients.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// c·x^n.
    pub fn monomial(n: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = c;
        Self::new(coeffs)
    }

    /// Fails with [`Error::InvalidInteraction`] unless bounded below.
    pub fn bounded_below_checked(coeffs: impl Into<Vec<f64>>) -> Result<Self> {
        let p = Self::new(coeffs);
        if !p.coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInteraction("non-finite coefficient".into()));
        }
        if !p.is_bounded_below() {
            return Err(Error::InvalidInteraction(format!(
                "polynomial of degree {} with leading coefficient {} is not bounded below",
                p.degree(),
                p.leading()
            )));
        }
        Ok(p)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Degree, with the zero polynomial given degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Even degree with positive leading coefficient, or constant.
    pub fn is_bounded_below(&self) -> bool {
        self.degree() == 0 || (self.degree().is_multiple_of(2) && self.leading() > 0.0)
    }

    /// A single nonzero monomial c·x^n, returned as (n, c).
    pub fn as_monomial(&self) -> Option<(usize, f64)> {
        let nonzero: Vec<usize> = (0..self.coeffs.len()).filter(|&k| self.coeffs[k] != 0.0).collect();
        match nonzero.as_slice() {
            [k] => Some((*k, self.coeffs[*k])),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect::<Vec<_>>(),
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect::<Vec<_>>())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect::<Vec<_>>())
    }

    /// Global minimum of a bounded-below polynomial and a minimizer.
    ///
    /// Critical points are bracketed by sign changes of the derivative on a
    /// fine grid over the Cauchy root bound and refined by bisection.
    pub fn global_min(&self) -> Result<(f64, f64)> {
        if !self.is_bounded_below() {
            return Err(Error::InvalidInteraction("polynomial is not bounded below".into()));
        }
        if self.degree() == 0 {
            return Ok((self.coeff(0), 0.0));
        }
        let d = self.derivative();
        let lead = d.leading();
        let bound = 1.0
            + d.coeffs[..d.coeffs.len() - 1]
                .iter()
                .fold(0.0f64, |m, c| m.max((c / lead).abs()));
        const STEPS: usize = 20_000;
        let h = 2.0 * bound / STEPS as f64;
        let mut best = (self.eval(0.0), 0.0);
        let mut consider = |x: f64| {
            let v = self.eval(x);
            if v < best.0 {
                best = (v, x);
            }
        };
        let mut x0 = -bound;
        let mut d0 = d.eval(x0);
        for i in 1..=STEPS {
            let x1 = -bound + h * i as f64;
            let d1 = d.eval(x1);
            if d0 == 0.0 {
                consider(x0);
            } else if d0 < 0.0 && d1 >= 0.0 {
                let (mut a, mut b) = (x0, x1);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if d.eval(mid) < 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                consider(0.5 * (a + b));
            }
            x0 = x1;
            d0 = d1;
        }
        Ok(best)
    }
}
