use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Geometry attached to a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GraphKind {
    /// n1 columns × n2 rows, vertex (row r, column c) ↦ r·n1 + c.
    Torus {
        n1: usize,
        n2: usize,
        spacing: f64,
    },
    Cycle {
        n: usize,
        spacing: f64,
    },
    /// A reflection-symmetric graph: Σ is fixed pointwise by the involution,
    /// which swaps Ω with its mirror image.
    Double {
        sigma: Vec<usize>,
        omega: Vec<usize>,
        involution: Vec<usize>,
    },
    Explicit,
}

/// Weighted graph with vertex measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
    vertex_measure: Vec<f64>,
    kind: GraphKind,
}

impl LatticeGraph {
    /// General constructor: rejects self-loops, non-positive weights or
    /// measures, and disconnected graphs. Parallel edges are merged.
    pub fn explicit(n_vertices: usize, edges: Vec<Edge>, vertex_measure: Vec<f64>) -> Result<Self> {
        let g = Self::assemble(n_vertices, edges, vertex_measure, GraphKind::Explicit)?;
        g.require_connected()?;
        Ok(g)
    }

    /// Disjoint union of two graphs; the one sanctioned disconnected graph.
    pub fn disjoint_union(a: &Self, b: &Self) -> Result<Self> {
        let shift = a.n_vertices;
        let mut edges = a.edges.clone();
        edges.extend(b.edges.iter().map(|e| Edge {
            i: e.i + shift,
            j: e.j + shift,
            weight: e.weight,
        }));
        let mut measure = a.vertex_measure.clone();
        measure.extend_from_slice(&b.vertex_measure);
        Self::assemble(shift + b.n_vertices, edges, measure, GraphKind::Explicit)
    }

    fn assemble(n: usize, edges: Vec<Edge>, measure: Vec<f64>, kind: GraphKind) -> Result<Self> {
        if n == 0 {
            return invalid("graph needs at least one vertex");
        }
        if measure.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: measure.len(),
            });
        }
        if let Some(m) = measure.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return invalid(format!("vertex measure {m} is not positive"));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &edges {
            if e.i >= n || e.j >= n {
                return invalid(format!("edge ({}, {}) references a missing vertex", e.i, e.j));
            }
            if e.i == e.j {
                return invalid(format!("self-loop at vertex {}", e.i));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return invalid(format!("edge ({}, {}) has non-positive weight", e.i, e.j));
            }
            *merged.entry((e.i.min(e.j), e.i.max(e.j))).or_insert(0.0) += e.weight;
        }
        let edges = merged
            .into_iter()
            .map(|((i, j), weight)| Edge { i, j, weight })
            .collect();
        Ok(Self {
            n_vertices: n,
            edges,
            vertex_measure: measure,
            kind,
        })
    }

    /// Periodic n1 × n2 grid with unit edge weights and vertex measure a²,
    /// so that the precision is L + m²a².
    pub fn torus(n1: usize, n2: usize, spacing: f64) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return invalid("torus sides must be positive");
        }
        check_spacing(spacing)?;
        let idx = |r: usize, c: usize| r * n1 + c;
        let mut edges = Vec::new();
        for r in 0..n2 {
            for c in 0..n1 {
                if n1 > 1 {
                    edges.push(Edge {
                        i: idx(r, c),
                        j: idx(r, (c + 1) % n1),
                        weight: 1.0,
                    });
                }
                if n2 > 1 {
                    edges.push(Edge {
                        i: idx(r, c),
                        j: idx((r + 1) % n2, c),
                        weight: 1.0,
                    });
                }
            }
        }
        Self::assemble(
            n1 * n2,
            edges,
            vec![spacing * spacing; n1 * n2],
            GraphKind::Torus { n1, n2, spacing },
        )
    }

    /// Cycle of n sites with edge weight 1/a and vertex measure a.
    pub fn cycle(n: usize, spacing: f64) -> Result<Self> {
        if n == 0 {
            return invalid("cycle needs at least one vertex");
        }
        check_spacing(spacing)?;
        let edges = if n > 1 {
            (0..n)
                .map(|i| Edge {
                    i,
                    j: (i + 1) % n,
                    weight: 1.0 / spacing,
                })
                .collect()
        } else {
            Vec::new()
        };
        Self::assemble(n, edges, vec![spacing; n], GraphKind::Cycle { n, spacing })
    }

    /// Torus with n2 even viewed as a double: Σ = rows 0 and n2/2, Ω = rows
    /// 1..n2/2, and the involution reflects row r to −r mod n2.
    pub fn torus_double(n1: usize, n2: usize, spacing: f64) -> Result<Self> {
        if n2 < 4 || !n2.is_multiple_of(2) {
            return invalid("torus double needs an even number of rows, at least 4");
        }
        let base = Self::torus(n1, n2, spacing)?;
        let idx = |r: usize, c: usize| r * n1 + c;
        let half = n2 / 2;
        let sigma: Vec<usize> = (0..n1).chain((0..n1).map(|c| idx(half, c))).collect();
        let mut sigma = sigma;
        sigma.sort_unstable();
        let omega = (1..half).flat_map(|r| (0..n1).map(move |c| idx(r, c))).collect();
        let involution = (0..n1 * n2).map(|v| idx((n2 - v / n1) % n2, v % n1)).collect();
        base.into_double(sigma, omega, involution)
    }

    /// Open grid of `width` columns and 2h+1 rows, reflected through the middle
    /// row Σ. `periodic` closes each row into a cycle.
    pub fn grid_double(width: usize, half_rows: usize, spacing: f64, periodic: bool) -> Result<Self> {
        if width == 0 || half_rows == 0 {
            return invalid("grid double needs positive width and half height");
        }
        check_spacing(spacing)?;
        let rows = 2 * half_rows + 1;
        let idx = |r: usize, c: usize| r * width + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..width {
                if c + 1 < width || (periodic && width > 2) {
                    edges.push(Edge {
                        i: idx(r, c),
                        j: idx(r, (c + 1) % width),
                        weight: 1.0,
                    });
                }
                if r + 1 < rows {
                    edges.push(Edge {
                        i: idx(r, c),
                        j: idx(r + 1, c),
                        weight: 1.0,
                    });
                }
            }
        }
        let n = rows * width;
        let mut g = Self::assemble(n, edges, vec![spacing * spacing; n], GraphKind::Explicit)?;
        g.require_connected()?;
        let sigma = (0..width).map(|c| idx(half_rows, c)).collect();
        let omega = (0..half_rows)
            .flat_map(|r| (0..width).map(move |c| idx(r, c)))
            .collect();
        let involution = (0..n).map(|v| idx(rows - 1 - v / width, v % width)).collect();
        g.kind = GraphKind::Explicit;
        g.into_double(sigma, omega, involution)
    }

    /// Attaches double metadata after checking the reflection symmetry.
    pub fn into_double(mut self, sigma: Vec<usize>, omega: Vec<usize>, involution: Vec<usize>) -> Result<Self> {
        let n = self.n_vertices;
        if involution.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: involution.len(),
            });
        }
        if involution
            .iter()
            .enumerate()
            .any(|(v, &t)| t >= n || involution[t] != v)
        {
            return invalid("involution must be a self-inverse permutation");
        }
        if sigma.iter().any(|&s| involution[s] != s) {
            return invalid("Σ must be fixed by the involution");
        }
        let mut role = vec![0u8; n];
        for &s in &sigma {
            role[s] = 1;
        }
        for &o in &omega {
            if role[o] != 0 {
                return invalid("Ω overlaps Σ");
            }
            role[o] = 2;
        }
        for &o in &omega {
            let t = involution[o];
            if role[t] != 0 {
                return invalid("mirror of Ω must be disjoint from Ω and Σ");
            }
            role[t] = 3;
        }
        if role.contains(&0) {
            return invalid("Σ, Ω and its mirror must cover the vertex set");
        }
        let weight_of: BTreeMap<(usize, usize), f64> = self.edges.iter().map(|e| ((e.i, e.j), e.weight)).collect();
        for e in &self.edges {
            let (ri, rj) = (role[e.i], role[e.j]);
            if (ri == 2 && rj == 3) || (ri == 3 && rj == 2) {
                return invalid("Ω and its mirror are joined by an edge outside Σ");
            }
            let (a, b) = (involution[e.i], involution[e.j]);
            match weight_of.get(&(a.min(b), a.max(b))) {
                Some(w) if (w - e.weight).abs() <= 1e-12 * e.weight => {}
                _ => return invalid("edge weights are not reflection symmetric"),
            }
        }
        if (0..n).any(|v| {
            (self.vertex_measure[v] - self.vertex_measure[involution[v]]).abs() > 1e-12 * self.vertex_measure[v]
        }) {
            return invalid("vertex measure is not reflection symmetric");
        }
        let mut sigma = sigma;
        sigma.sort_unstable();
        let mut omega = omega;
        omega.sort_unstable();
        self.kind = GraphKind::Double {
            sigma,
            omega,
            involution,
        };
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_measure(&self) -> &[f64] {
        &self.vertex_measure
    }

    pub fn kind(&self) -> &GraphKind {
        &self.kind
    }

    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    }

    /// Connected components of the graph with `removed` vertices deleted,
    /// each sorted, ordered by smallest vertex.
    pub fn components_without(&self, removed: &[usize]) -> Vec<Vec<usize>> {
        let n = self.n_vertices;
        let mut gone = vec![false; n];
        for &r in removed {
            gone[r] = true;
        }
        let adj = self.neighbours();
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if gone[start] || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![start];
            let mut comp = Vec::new();
            label[start] = id;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &adj[v] {
                    if !gone[w] && label[w] == usize::MAX {
                        label[w] = id;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components_without(&[]).len() == 1
    }

    fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            invalid("graph is not connected")
        }
    }
}

fn check_spacing(spacing: f64) -> Result<()> {
    if spacing > 0.0 && spacing.is_finite() {
        Ok(())
    } else {
        invalid("spacing must be positive")
    }
}

/// Strictly increasing set of vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet {
    indices: Vec<usize>,
}

impl VertexSet {
    /// Sorts the indices; duplicates and indices ≥ n are rejected.
    pub fn new(n: usize, indices: impl Into<Vec<usize>>) -> Result<Self> {
        let mut indices = indices.into();
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("vertex set has duplicate entries");
        }
        if indices.last().is_some_and(|&v| v >= n) {
            return invalid("vertex index out of range");
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    /// Row r of an n1-column torus.
    pub fn torus_row(n1: usize, r: usize) -> Self {
        Self {
            indices: (0..n1).map(|c| r * n1 + c).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn complement(&self, n: usize) -> Vec<usize> {
        crate::numerics::complement(n, &self.indices)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        let mut a = self.indices.iter().peekable();
        let mut b = other.indices.iter().peekable();
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            if x == y {
                return false;
            }
            if x < y {
                a.next();
            } else {
                b.next();
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_edges_and_merging() {
        let g = LatticeGraph::torus(4, 3, 0.5).unwrap();
        assert_eq!(g.edges().len(), 24);
        assert!(g.is_connected());
        let g2 = LatticeGraph::torus(2, 1, 1.0).unwrap();
        assert_eq!(g2.edges().len(), 1);
        assert_eq!(g2.edges()[0].weight, 2.0);
        let g1 = LatticeGraph::torus(1, 1, 1.0).unwrap();
        assert!(g1.edges().is_empty());
    }

    #[test]
    fn rejects_bad_graphs() {
        let e = |i, j| Edge { i, j, weight: 1.0 };
        assert!(LatticeGraph::explicit(2, vec![e(0, 0)], vec![1.0; 2]).is_err());
        assert!(LatticeGraph::explicit(3, vec![e(0, 1)], vec![1.0; 3]).is_err());
        assert!(LatticeGraph::explicit(2, vec![e(0, 1)], vec![1.0, -1.0]).is_err());
        assert!(LatticeGraph::explicit(2, vec![e(0, 1)], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn doubles_validate() {
        let t = LatticeGraph::torus_double(5, 8, 1.0).unwrap();
        match t.kind() {
            GraphKind::Double { sigma, omega, .. } => {
                assert_eq!(sigma.len(), 10);
                assert_eq!(omega.len(), 15);
            }
            _ => panic!("expected double"),
        }
        let l = LatticeGraph::grid_double(2, 3, 1.0, false).unwrap();
        assert!(matches!(l.kind(), GraphKind::Double { .. }));
        let base = LatticeGraph::torus(3, 4, 1.0).unwrap();
        let n = base.n_vertices();
        assert!(base.into_double(vec![], (0..3).collect(), (0..n).collect()).is_err());
    }

    #[test]
    fn components() {
        let g = LatticeGraph::torus(4, 4, 1.0).unwrap();
        let removed: Vec<usize> = (0..4).chain(8..12).collect();
        let comps = g.components_without(&removed);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0], vec![4, 5, 6, 7]);
    }

    #[test]
    fn vertex_sets() {
        let s = VertexSet::new(5, vec![3, 1]).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(s.complement(5), vec![0, 2, 4]);
        assert!(VertexSet::new(5, vec![1, 1]).is_err());
        assert!(VertexSet::new(5, vec![5]).is_err());
        assert!(s.is_disjoint(&VertexSet::new(5, vec![0, 2]).unwrap()));
        assert!(!s.is_disjoint(&VertexSet::new(5, vec![3]).unwrap()));
    }
}
