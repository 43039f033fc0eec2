//! Sensing graphs, their Laplacians, and realizability of desired offsets.
//!
//! Agents are indexed `0..n`. An edge `{a, b}` means the two agents measure
//! each other's relative position. The ordered pair `(j, i)` names the
//! measurement of agent `j` taken by agent `i`, and `D_ji` is the desired
//! value of `x_j - x_i`.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for realizability of desired offsets, in meters.
pub const REALIZABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Smaller endpoint.
    pub a: usize,
    /// Larger endpoint.
    pub b: usize,
    pub weight: f64,
}

/// Undirected weighted graph of agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingGraph {
    n: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl SensingGraph {
    /// Unit-weight graph from unordered pairs.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::with_weights(n, edges.into_iter().map(|(a, b)| (a, b, 1.0)))
    }

    pub fn with_weights(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("a graph needs at least one agent".into()));
        }
        let mut list = Vec::new();
        let mut neighbors = vec![Vec::new(); n];
        for (u, v, weight) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::NonPositiveWeight { a, b, weight });
            }
            if neighbors[a].iter().any(|&(k, _)| k == b) {
                return Err(Error::DuplicateEdge(a, b));
            }
            neighbors[a].push((b, weight));
            neighbors[b].push((a, weight));
            list.push(Edge { a, b, weight });
        }
        list.sort_by_key(|e| (e.a, e.b));
        for adj in &mut neighbors {
            adj.sort_by_key(|&(k, _)| k);
        }
        Ok(Self {
            n,
            edges: list,
            neighbors,
        })
    }

    /// Path graph `0 - 1 - ... - (n-1)` with unit weights.
    pub fn chain(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("a chain needs n >= 2, got {n}")));
        }
        Self::new(n, (0..n - 1).map(|i| (i, i + 1)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `i` with edge weights, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && self.neighbors[a].iter().any(|&(k, _)| k == b)
    }

    /// Every ordered pair `(j, i)` with `{i, j}` an edge.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().flat_map(|e| [(e.a, e.b), (e.b, e.a)])
    }

    /// Number of edges incident to `i`.
    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_index(i)?;
        Ok(self.neighbors[i].len())
    }

    /// Sum of incident edge weights; equals [`degree`](Self::degree) for unit weights.
    pub fn weighted_degree(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.neighbors[i].iter().map(|&(_, w)| w).sum())
    }

    pub fn is_unit_weighted(&self) -> bool {
        self.edges.iter().all(|e| e.weight == 1.0)
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::IndexOutOfRange {
                index: i,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    /// `L_ii = sum_j a_ij`, `L_ij = -a_ij` on edges, zero elsewhere.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            l[(e.a, e.b)] -= e.weight;
            l[(e.b, e.a)] -= e.weight;
            l[(e.a, e.a)] += e.weight;
            l[(e.b, e.b)] += e.weight;
        }
        l
    }

    /// `(Lx)_i = sum_j a_ij (x_i - x_j)`, computed without forming `L`.
    pub fn laplacian_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            (0..self.n).map(|i| {
                self.neighbors[i]
                    .iter()
                    .map(|&(j, w)| w * (x[i] - x[j]))
                    .sum::<f64>()
            }),
        )
    }

    /// Component label per agent, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for &(j, _) in &self.neighbors[i] {
                    if label[j] == usize::MAX {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edges.len() == self.n - 1
    }

    /// True for exactly the edges `{k, k+1}`, `k = 0..n-1`.
    pub fn is_chain(&self) -> bool {
        self.n >= 2
            && self.edges.len() == self.n - 1
            && self.edges.iter().enumerate().all(|(k, e)| e.a == k && e.b == k + 1)
    }
}

/// Desired relative offsets `D_ji` on the edges of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredOffsets {
    n: usize,
    values: BTreeMap<(usize, usize), f64>,
}

impl DesiredOffsets {
    /// Builds offsets from `(j, i, D_ji)` triples. Each edge needs at least one
    /// orientation; the other is filled in as `-D_ji`. Giving both orientations
    /// is allowed when they are antisymmetric.
    pub fn new(
        graph: &SensingGraph,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut values: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (j, i, d) in entries {
            if !graph.has_edge(i, j) {
                return Err(Error::OffsetOnNonEdge { j, i });
            }
            if !d.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "offset ({j}, {i}) is not finite"
                )));
            }
            if let Some(&back) = values.get(&(j, i)) {
                if (back - d).abs() > 1e-12 * (1.0 + d.abs()) {
                    return Err(Error::NotAntisymmetric {
                        j,
                        i,
                        forward: d,
                        backward: -back,
                    });
                }
            }
            values.insert((j, i), d);
            values.insert((i, j), -d);
        }
        for e in graph.edges() {
            if !values.contains_key(&(e.a, e.b)) {
                return Err(Error::MissingOffset { a: e.a, b: e.b });
            }
        }
        Ok(Self {
            n: graph.n(),
            values,
        })
    }

    /// Offsets `D_ji = p_j - p_i` induced by absolute positions.
    pub fn from_positions(graph: &SensingGraph, p: &[f64]) -> Result<Self> {
        if p.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                actual: p.len(),
            });
        }
        Self::new(graph, graph.edges().iter().map(|e| (e.b, e.a, p[e.b] - p[e.a])))
    }

    /// `D_(k+1)k = spacing` along a chain.
    pub fn uniform_chain(graph: &SensingGraph, spacing: f64) -> Result<Self> {
        if !graph.is_chain() {
            return Err(Error::NotAChain);
        }
        Self::new(graph, (0..graph.n() - 1).map(|k| (k + 1, k, spacing)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `D_ji`, the desired value of `x_j - x_i`.
    pub fn get(&self, j: usize, i: usize) -> Option<f64> {
        self.values.get(&(j, i)).copied()
    }

    /// All ordered entries `((j, i), D_ji)`.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }
}

/// Absolute positions `p` with `p_j - p_i = D_ji` on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePositions(pub DVector<f64>);

impl ReferencePositions {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Fixes `p_0 = 0`, propagates along a breadth-first spanning tree, then
/// checks every edge against `tol`.
pub fn solve_reference_positions(
    graph: &SensingGraph,
    offsets: &DesiredOffsets,
    tol: f64,
) -> Result<ReferencePositions> {
    if offsets.n() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            actual: offsets.n(),
        });
    }
    if !graph.is_connected() {
        return Err(Error::NotConnected);
    }
    let n = graph.n();
    let mut p: DVector<f64> = DVector::zeros(n);
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for &(j, _) in graph.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                let d = offsets
                    .get(j, i)
                    .ok_or(Error::MissingOffset { a: i.min(j), b: i.max(j) })?;
                p[j] = p[i] + d;
                queue.push_back(j);
            }
        }
    }

    let mut worst: Option<(usize, usize, f64)> = None;
    for e in graph.edges() {
        let d = offsets.get(e.b, e.a).ok_or(Error::MissingOffset { a: e.a, b: e.b })?;
        let residual = (p[e.b] - p[e.a] - d).abs();
        if residual > tol && worst.is_none_or(|(_, _, r)| residual > r) {
            worst = Some((e.b, e.a, residual));
        }
    }
    match worst {
        Some((j, i, residual)) => Err(Error::NotRealizable { j, i, residual }),
        None => Ok(ReferencePositions(p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_edges_and_degrees() {
        let g = SensingGraph::chain(2).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!((g.edges()[0].a, g.edges()[0].b), (0, 1));

        let g = SensingGraph::chain(6).unwrap();
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        assert_eq!(g.degree(0).unwrap(), 1);
        assert_eq!(g.degree(2).unwrap(), 2);
        assert!(g.is_chain());

        let g = SensingGraph::chain(3).unwrap();
        let degrees: Vec<_> = (0..3).map(|i| g.degree(i).unwrap()).collect();
        assert_eq!(degrees, vec![1, 2, 1]);
    }

    #[test]
    fn chain_rejects_small_sizes() {
        assert!(matches!(SensingGraph::chain(1), Err(Error::InvalidSize(_))));
        assert!(matches!(SensingGraph::chain(0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(SensingGraph::new(3, [(1, 1)]), Err(Error::SelfLoop(1)));
        assert_eq!(
            SensingGraph::new(3, [(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert!(matches!(
            SensingGraph::with_weights(3, [(0, 1, 0.0)]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert_eq!(
            SensingGraph::new(3, [(0, 3)]),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        );
    }

    #[test]
    fn degree_out_of_range() {
        let g = SensingGraph::chain(6).unwrap();
        assert_eq!(g.degree(6), Err(Error::IndexOutOfRange { index: 6, n: 6 }));
    }

    #[test]
    fn complete_graph_degree() {
        let g = SensingGraph::complete(4).unwrap();
        for i in 0..4 {
            assert_eq!(g.degree(i).unwrap(), 3);
        }
    }

    #[test]
    fn laplacian_small_cases() {
        let l2 = SensingGraph::chain(2).unwrap().laplacian();
        assert_eq!(l2, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        let l3 = SensingGraph::chain(3).unwrap().laplacian();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 3, &[
             1.0, -1.0,  0.0,
            -1.0,  2.0, -1.0,
             0.0, -1.0,  1.0,
        ]);
        assert_eq!(l3, expected);

        let single = SensingGraph::new(1, []).unwrap();
        assert_eq!(single.laplacian(), DMatrix::from_element(1, 1, 0.0));
    }

    #[test]
    fn connectivity() {
        assert!(SensingGraph::chain(6).unwrap().is_connected());
        let split = SensingGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
        assert_eq!(split.component_count(), 2);
        assert!(SensingGraph::new(1, []).unwrap().is_connected());
    }

    #[test]
    fn reference_positions_chain() {
        let g = SensingGraph::chain(6).unwrap();
        let d = DesiredOffsets::uniform_chain(&g, 1.0).unwrap();
        let p = solve_reference_positions(&g, &d, REALIZABILITY_TOL).unwrap();
        assert_eq!(p.0.as_slice(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn reference_positions_triangle() {
        let g = SensingGraph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let d = DesiredOffsets::new(&g, [(1, 0, 1.0), (2, 1, 1.0), (2, 0, 2.0)]).unwrap();
        let p = solve_reference_positions(&g, &d, 1e-9).unwrap();
        assert_eq!(p.0.as_slice(), &[0.0, 1.0, 2.0]);

        let bad = DesiredOffsets::new(&g, [(1, 0, 1.0), (2, 1, 1.0), (2, 0, 3.0)]).unwrap();
        match solve_reference_positions(&g, &bad, 1e-9) {
            Err(Error::NotRealizable { residual, .. }) => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("expected not-realizable, got {other:?}"),
        }
    }

    #[test]
    fn reference_positions_need_connectivity() {
        let g = SensingGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let d = DesiredOffsets::new(&g, [(1, 0, 1.0), (3, 2, 1.0)]).unwrap();
        assert_eq!(
            solve_reference_positions(&g, &d, 1e-9),
            Err(Error::NotConnected)
        );
    }

    #[test]
    fn offsets_validation() {
        let g = SensingGraph::chain(3).unwrap();
        assert_eq!(
            DesiredOffsets::new(&g, [(1, 0, 1.0)]),
            Err(Error::MissingOffset { a: 1, b: 2 })
        );
        assert_eq!(
            DesiredOffsets::new(&g, [(2, 0, 1.0)]),
            Err(Error::OffsetOnNonEdge { j: 2, i: 0 })
        );
        assert!(matches!(
            DesiredOffsets::new(&g, [(1, 0, 1.0), (0, 1, 1.0), (2, 1, 1.0)]),
            Err(Error::NotAntisymmetric { .. })
        ));
        let d = DesiredOffsets::new(&g, [(1, 0, 1.0), (0, 1, -1.0), (2, 1, 0.5)]).unwrap();
        assert_eq!(d.get(0, 1), Some(-1.0));
        assert_eq!(d.get(1, 2), Some(-0.5));
    }

    #[test]
    fn laplacian_apply_matches_matrix() {
        let g = SensingGraph::with_weights(4, [(0, 1, 2.0), (1, 2, 0.5), (0, 3, 1.5)]).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.0, 2.5, 0.7]);
        let diff = g.laplacian() * &x - g.laplacian_apply(&x);
        assert!(diff.amax() < 1e-14);
    }
}
