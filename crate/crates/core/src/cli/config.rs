//! JSON configurations of the subcommands. Every struct rejects unknown
//! fields and fills missing ones from its default preset.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::segal::GluingMode;

/// A validation failure with the JSON path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

fn field(path: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<(), FieldError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(path, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), FieldError> {
    if v >= min {
        Ok(())
    } else {
        Err(field(path, format!("must be at least {min}, got {v}")))
    }
}

fn finite_all(path: &str, v: &[f64]) -> Result<(), FieldError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(field(&format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

pub trait Validate {
    fn validate(&self) -> Result<(), FieldError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChainPotential {
    /// P(σ) = 2m²σ², with the closed-form free energy available.
    Gaussian { mass: f64 },
    /// Coefficients, constant term first.
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChapmanKolmogorovCase {
    pub n1: usize,
    pub n2: usize,
    pub z_in: f64,
    pub z_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub potential: ChainPotential,
    pub order: usize,
    pub n_list: Vec<usize>,
    pub benchmark_n: usize,
    pub chapman_kolmogorov: Vec<ChapmanKolmogorovCase>,
    /// Potentials (coefficients, constant first) for the composition check.
    pub chapman_kolmogorov_potentials: Vec<Vec<f64>>,
    pub chapman_kolmogorov_order: usize,
    pub mixing_k_max: usize,
    pub gibbs_separation: usize,
    pub gibbs_n_list: Vec<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            potential: ChainPotential::Gaussian { mass: 1.0 },
            order: 200,
            n_list: vec![1, 2, 16, 64, 256, 2048],
            benchmark_n: 2048,
            chapman_kolmogorov: vec![
                ChapmanKolmogorovCase {
                    n1: 1,
                    n2: 1,
                    z_in: 0.3,
                    z_out: -0.2,
                },
                ChapmanKolmogorovCase {
                    n1: 2,
                    n2: 3,
                    z_in: 0.5,
                    z_out: 0.1,
                },
            ],
            chapman_kolmogorov_potentials: vec![vec![], vec![0.0, 0.0, 0.0, 0.0, 1.0]],
            chapman_kolmogorov_order: 120,
            mixing_k_max: 50,
            gibbs_separation: 2,
            gibbs_n_list: vec![8, 10, 12, 14, 16],
        }
    }
}

impl Validate for ChainConfig {
    fn validate(&self) -> Result<(), FieldError> {
        match &self.potential {
            ChainPotential::Gaussian { mass } => positive("potential.mass", *mass)?,
            ChainPotential::Polynomial { coefficients } => finite_all("potential.coefficients", coefficients)?,
        }
        at_least("order", self.order, 2)?;
        at_least("benchmark_n", self.benchmark_n, 1)?;
        if let Some(i) = self.n_list.iter().position(|&n| n == 0) {
            return Err(field(&format!("n_list[{i}]"), "chain lengths must be at least 1"));
        }
        for (i, c) in self.chapman_kolmogorov.iter().enumerate() {
            at_least(&format!("chapman_kolmogorov[{i}].n1"), c.n1, 1)?;
            at_least(&format!("chapman_kolmogorov[{i}].n2"), c.n2, 1)?;
        }
        for (i, c) in self.chapman_kolmogorov_potentials.iter().enumerate() {
            finite_all(&format!("chapman_kolmogorov_potentials[{i}]"), c)?;
        }
        at_least("chapman_kolmogorov_order", self.chapman_kolmogorov_order, 2)?;
        at_least("mixing_k_max", self.mixing_k_max, 1)?;
        if let Some(i) = self.gibbs_n_list.iter().position(|&n| n < self.gibbs_separation + 1) {
            return Err(field(&format!("gibbs_n_list[{i}]"), "must exceed gibbs_separation"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Torus {
        n1: usize,
        n2: usize,
        spacing: f64,
    },
    /// Weighted edges (i, j, w) with a measure per vertex.
    Explicit {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
        measure: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DoubleSpec {
    /// Torus with Σ the two rows 0 and n2/2.
    Torus { n1: usize, n2: usize, spacing: f64 },
    /// Grid of 2·half_rows + 1 rows mirrored across its middle row.
    Grid {
        width: usize,
        half_rows: usize,
        spacing: f64,
        periodic: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesConfig {
    /// Torus on which the two conditioning orders are compared.
    pub n1: usize,
    pub n2: usize,
    pub spacing: f64,
    pub points: usize,
    /// Vertex sets; default to rows 0 and n2/2.
    pub first: Option<Vec<usize>>,
    pub second: Option<Vec<usize>>,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            n1: 12,
            n2: 12,
            spacing: 1.0 / 12.0,
            points: 1000,
            first: None,
            second: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadPerturbConfig {
    /// Vertices of the cycle carrying the perturbation.
    pub n: usize,
    pub spacing: f64,
    pub mass: f64,
    /// V = strength·(I + ¼·nearest-neighbour adjacency).
    pub strength: f64,
    pub samples: usize,
}

impl Default for QuadPerturbConfig {
    fn default() -> Self {
        Self {
            n: 8,
            spacing: 0.125,
            mass: 1.0,
            strength: 0.5,
            samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub graph: GraphSpec,
    pub mass: f64,
    /// Cut set Σ; defaults to the first row of a torus.
    pub sigma: Option<Vec<usize>>,
    pub bayes: BayesConfig,
    pub doubles: Vec<DoubleSpec>,
    pub quad_perturb: QuadPerturbConfig,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            graph: GraphSpec::Torus {
                n1: 16,
                n2: 16,
                spacing: 1.0 / 16.0,
            },
            mass: 1.0,
            sigma: None,
            bayes: BayesConfig::default(),
            doubles: vec![
                DoubleSpec::Grid {
                    width: 2,
                    half_rows: 4,
                    spacing: 1.0,
                    periodic: false,
                },
                DoubleSpec::Torus {
                    n1: 6,
                    n2: 8,
                    spacing: 0.5,
                },
                DoubleSpec::Grid {
                    width: 5,
                    half_rows: 3,
                    spacing: 0.25,
                    periodic: true,
                },
            ],
            quad_perturb: QuadPerturbConfig::default(),
        }
    }
}

impl Validate for LatticeConfig {
    fn validate(&self) -> Result<(), FieldError> {
        match &self.graph {
            GraphSpec::Torus { n1, n2, spacing } => {
                at_least("graph.n1", *n1, 1)?;
                at_least("graph.n2", *n2, 1)?;
                positive("graph.spacing", *spacing)?;
            }
            GraphSpec::Explicit { n, edges, measure } => {
                at_least("graph.n", *n, 1)?;
                if measure.len() != *n {
                    return Err(field(
                        "graph.measure",
                        format!("expected {n} entries, got {}", measure.len()),
                    ));
                }
                for (i, &(a, b, w)) in edges.iter().enumerate() {
                    if a >= *n || b >= *n {
                        return Err(field(&format!("graph.edges[{i}]"), "vertex index out of range"));
                    }
                    positive(&format!("graph.edges[{i}].weight"), w)?;
                }
                if self.sigma.is_none() {
                    return Err(field("sigma", "required for explicit graphs"));
                }
            }
        }
        positive("mass", self.mass)?;
        at_least("bayes.n1", self.bayes.n1, 1)?;
        at_least("bayes.n2", self.bayes.n2, 2)?;
        positive("bayes.spacing", self.bayes.spacing)?;
        at_least("bayes.points", self.bayes.points, 1)?;
        for (i, d) in self.doubles.iter().enumerate() {
            let spacing = match d {
                DoubleSpec::Torus { spacing, .. } | DoubleSpec::Grid { spacing, .. } => *spacing,
            };
            positive(&format!("doubles[{i}].spacing"), spacing)?;
        }
        let qp = &self.quad_perturb;
        at_least("quad_perturb.n", qp.n, 1)?;
        positive("quad_perturb.spacing", qp.spacing)?;
        positive("quad_perturb.mass", qp.mass)?;
        positive("quad_perturb.strength", qp.strength)?;
        at_least("quad_perturb.samples", qp.samples, 2)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TadpoleConfig {
    pub side: f64,
    pub mass: f64,
    pub spacings: Vec<f64>,
    pub min_r_squared: f64,
}

impl Default for TadpoleConfig {
    fn default() -> Self {
        Self {
            side: 1.0,
            mass: 1.0,
            spacings: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            min_r_squared: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WickConfig {
    pub hermite_points: Vec<f64>,
    pub max_legs: usize,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
    pub power: usize,
    pub samples: usize,
}

impl Default for WickConfig {
    fn default() -> Self {
        Self {
            hermite_points: vec![-2.5, -0.7, 0.0, 0.3, 1.0, 3.2],
            max_legs: 8,
            var_x: 1.0,
            var_y: 1.0,
            cov_xy: 0.5,
            power: 4,
            samples: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    /// Side of the square torus.
    pub n: usize,
    pub spacing: f64,
    pub mass: f64,
    pub polynomial: Vec<f64>,
    pub samples: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            n: 6,
            spacing: 1.0 / 6.0,
            mass: 1.0,
            polynomial: vec![0.0, 0.0, 0.5],
            samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoupleConfig {
    pub n: usize,
    pub spacing: f64,
    pub mass: f64,
    pub polynomial: Vec<f64>,
    pub samples: usize,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        Self {
            n: 8,
            spacing: 0.125,
            mass: 1.0,
            polynomial: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            samples: 200,
        }
    }
}

impl DecoupleConfig {
    fn validate_at(&self, p: &str) -> Result<(), FieldError> {
        at_least(&format!("{p}.n"), self.n, 4)?;
        positive(&format!("{p}.spacing"), self.spacing)?;
        positive(&format!("{p}.mass"), self.mass)?;
        finite_all(&format!("{p}.polynomial"), &self.polynomial)?;
        at_least(&format!("{p}.samples"), self.samples, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifierConfig {
    pub n: usize,
    pub spacing: f64,
    pub mass: f64,
    pub polynomial: Vec<f64>,
    pub radii: Vec<usize>,
    pub mc_samples: usize,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self {
            n: 16,
            spacing: 1.0 / 16.0,
            mass: 1.0,
            polynomial: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            radii: vec![0, 1, 4],
            mc_samples: 10_000,
        }
    }
}

impl MollifierConfig {
    fn validate_at(&self, p: &str) -> Result<(), FieldError> {
        at_least(&format!("{p}.n"), self.n, 1)?;
        positive(&format!("{p}.spacing"), self.spacing)?;
        positive(&format!("{p}.mass"), self.mass)?;
        finite_all(&format!("{p}.polynomial"), &self.polynomial)?;
        if self.radii.is_empty() {
            return Err(field(&format!("{p}.radii"), "must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pphi2Config {
    pub tadpole: TadpoleConfig,
    pub wick: WickConfig,
    pub partition: PartitionConfig,
    pub decouple: DecoupleConfig,
    pub mollifier: MollifierConfig,
}

impl Validate for Pphi2Config {
    fn validate(&self) -> Result<(), FieldError> {
        let t = &self.tadpole;
        positive("tadpole.side", t.side)?;
        positive("tadpole.mass", t.mass)?;
        if t.spacings.len() < 3 {
            return Err(field("tadpole.spacings", "needs at least three spacings"));
        }
        for (i, a) in t.spacings.iter().enumerate() {
            positive(&format!("tadpole.spacings[{i}]"), *a)?;
        }
        let w = &self.wick;
        finite_all("wick.hermite_points", &w.hermite_points)?;
        if w.max_legs > crate::wick::MAX_PAIRING_LEGS {
            return Err(field(
                "wick.max_legs",
                format!("at most {}", crate::wick::MAX_PAIRING_LEGS),
            ));
        }
        positive("wick.var_x", w.var_x)?;
        positive("wick.var_y", w.var_y)?;
        if !(w.cov_xy.abs() <= (w.var_x * w.var_y).sqrt()) {
            return Err(field("wick.cov_xy", "violates Cauchy–Schwarz"));
        }
        at_least("wick.samples", w.samples, 2)?;
        let p = &self.partition;
        at_least("partition.n", p.n, 1)?;
        positive("partition.spacing", p.spacing)?;
        positive("partition.mass", p.mass)?;
        finite_all("partition.polynomial", &p.polynomial)?;
        at_least("partition.samples", p.samples, 2)?;
        self.decouple.validate_at("decouple")?;
        self.mollifier.validate_at("mollifier")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegalConfig {
    pub n_transverse: usize,
    pub n_layers: usize,
    pub spacing: f64,
    pub mass: f64,
    /// Interaction polynomial; absent for the free field.
    pub polynomial: Option<Vec<f64>>,
    pub chi: Option<Vec<f64>>,
    pub wick_variance: Option<f64>,
    /// Boundary Gauss–Hermite order per mode; defaults by n_transverse.
    pub quadrature_order: Option<usize>,
    pub interior_order: usize,
    /// Smaller grid used for full diagonalization.
    pub spectral_order: Option<usize>,
    pub mode: GluingMode,
    pub copies: Vec<usize>,
    pub mc_samples: usize,
    pub k_max: usize,
    pub gibbs_separation: usize,
    pub gibbs_n_list: Vec<usize>,
    pub density_points: usize,
}

impl Default for SegalConfig {
    fn default() -> Self {
        Self {
            n_transverse: 2,
            n_layers: 0,
            spacing: 1.0,
            mass: 1.0,
            polynomial: None,
            chi: None,
            wick_variance: None,
            quadrature_order: None,
            interior_order: crate::segal::DEFAULT_INTERIOR_ORDER,
            spectral_order: None,
            mode: GluingMode::Strict,
            copies: vec![1, 3, 8],
            mc_samples: 100_000,
            k_max: 50,
            gibbs_separation: 2,
            gibbs_n_list: vec![10, 12, 14, 16],
            density_points: 1000,
        }
    }
}

impl Validate for SegalConfig {
    fn validate(&self) -> Result<(), FieldError> {
        at_least("n_transverse", self.n_transverse, 1)?;
        positive("spacing", self.spacing)?;
        positive("mass", self.mass)?;
        if let Some(p) = &self.polynomial {
            finite_all("polynomial", p)?;
        }
        if let Some(c) = &self.chi {
            if self.polynomial.is_none() {
                return Err(field("chi", "needs a polynomial"));
            }
            finite_all("chi", c)?;
        }
        if let Some(o) = self.quadrature_order {
            at_least("quadrature_order", o, 1)?;
        }
        if let Some(o) = self.spectral_order {
            at_least("spectral_order", o, 2)?;
        }
        at_least("interior_order", self.interior_order, 1)?;
        if self.copies.is_empty() {
            return Err(field("copies", "must not be empty"));
        }
        if let Some(i) = self.copies.iter().position(|&c| c == 0) {
            return Err(field(&format!("copies[{i}]"), "must be at least 1"));
        }
        at_least("mc_samples", self.mc_samples, 2)?;
        at_least("k_max", self.k_max, 1)?;
        if let Some(i) = self.gibbs_n_list.iter().position(|&n| n < self.gibbs_separation + 1) {
            return Err(field(&format!("gibbs_n_list[{i}]"), "must exceed gibbs_separation"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZetaConfig {
    pub mass: f64,
    pub length: f64,
    pub height: f64,
    pub t_split: f64,
    /// Mode cutoffs K for the partial sums of |DN − 2𝔇|.
    pub deviation_cutoffs: Vec<i64>,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 2.0 * PI,
            height: 1.0,
            t_split: crate::zeta::DEFAULT_T_SPLIT,
            deviation_cutoffs: vec![4, 16, 64],
        }
    }
}

impl Validate for ZetaConfig {
    fn validate(&self) -> Result<(), FieldError> {
        positive("mass", self.mass)?;
        positive("length", self.length)?;
        positive("height", self.height)?;
        positive("t_split", self.t_split)?;
        if let Some(i) = self.deviation_cutoffs.iter().position(|&k| k < 0) {
            return Err(field(&format!("deviation_cutoffs[{i}]"), "must be nonnegative"));
        }
        Ok(())
    }
}
