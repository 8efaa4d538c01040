//! Weighted graph instances: the unit of perturbation.
//!
//! Instances are immutable after construction and safe to share read-only
//! across experiment workers. Edges are kept in canonical lexicographic order
//! on (u, v); perturbations address edges by index, never by endpoints, so
//! coupled runs on perturbed instances stay aligned.

use crate::error::{Error, Result};
use crate::tape::RandomTape;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Strict lower bound every edge weight must stay above. The formal model
/// permits w ≥ 0 for cuts, but the stability bounds degrade as λ2 → 0 and
/// matching needs w > 0, so all instances enforce one uniform floor.
pub const WEIGHT_FLOOR: f64 = 1e-9;

/// Undirected weighted graph with optional bipartition and vertex capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: usize,
    /// Edges as (u, v) with u < v, sorted lexicographically.
    edges: Vec<(usize, usize)>,
    /// One strictly positive weight per edge, aligned with `edges`.
    weights: Vec<f64>,
    /// If present, vertices 0..u_size form one side and every edge crosses.
    bipartite_u_size: Option<usize>,
    /// Per-vertex capacities b_v ≥ 1 (defaults to 1 everywhere when absent).
    capacities: Option<Vec<u64>>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        Self::with_structure(n, edges, weights, None, None)
    }

    /// Bipartite graph whose left side is vertices `0..u_size`.
    pub fn bipartite(
        n: usize,
        u_size: usize,
        edges: Vec<(usize, usize)>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        Self::with_structure(n, edges, weights, Some(u_size), None)
    }

    pub fn with_structure(
        n: usize,
        edges: Vec<(usize, usize)>,
        weights: Vec<f64>,
        bipartite_u_size: Option<usize>,
        capacities: Option<Vec<u64>>,
    ) -> Result<Self> {
        if edges.len() != weights.len() {
            return Err(Error::InvalidGraph(format!(
                "{} edges but {} weights",
                edges.len(),
                weights.len()
            )));
        }
        let mut pairs: Vec<((usize, usize), f64)> = edges
            .into_iter()
            .map(|(u, v)| if u <= v { (u, v) } else { (v, u) })
            .zip(weights)
            .collect();
        pairs.sort_by_key(|(e, _)| *e);
        for (i, ((u, v), w)) in pairs.iter().enumerate() {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if *v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if i > 0 && pairs[i - 1].0 == (*u, *v) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            if !w.is_finite() || *w < WEIGHT_FLOOR {
                return Err(Error::InvalidGraph(format!(
                    "weight {w} on edge ({u}, {v}) below floor {WEIGHT_FLOOR}"
                )));
            }
        }
        if let Some(us) = bipartite_u_size {
            if us == 0 || us >= n {
                return Err(Error::InvalidGraph(format!(
                    "bipartition size {us} invalid for n = {n}"
                )));
            }
            for ((u, v), _) in &pairs {
                let crosses = (*u < us) != (*v < us);
                if !crosses {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({u}, {v}) does not cross the bipartition (U size {us})"
                    )));
                }
            }
        }
        if let Some(caps) = &capacities {
            if caps.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "{} capacities for {n} vertices",
                    caps.len()
                )));
            }
            if let Some(v) = caps.iter().position(|&b| b < 1) {
                return Err(Error::InvalidGraph(format!("capacity b_{v} < 1")));
            }
        }
        let (edges, weights) = pairs.into_iter().unzip();
        Ok(WeightedGraph {
            n,
            edges,
            weights,
            bipartite_u_size,
            capacities,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, edge: usize) -> f64 {
        self.weights[edge]
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    pub fn bipartite_u_size(&self) -> Option<usize> {
        self.bipartite_u_size
    }

    /// True if `v` is on the left side of the bipartition.
    pub fn on_left(&self, v: usize) -> bool {
        self.bipartite_u_size.map(|us| v < us).unwrap_or(false)
    }

    /// Capacity of vertex `v` (1 when no capacity block is present).
    pub fn capacity(&self, v: usize) -> u64 {
        self.capacities.as_ref().map(|c| c[v]).unwrap_or(1)
    }

    pub fn capacities(&self) -> Option<&[u64]> {
        self.capacities.as_deref()
    }

    /// Same topology with different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::with_structure(
            self.n,
            self.edges.clone(),
            weights,
            self.bipartite_u_size,
            self.capacities.clone(),
        )
    }

    /// New instance identical except for one weight; the original is
    /// unchanged. Rejects results at or below the weight floor.
    pub fn perturb(&self, p: Perturbation) -> Result<Self> {
        if p.edge >= self.m() {
            return Err(Error::InvalidParameter(format!(
                "perturbation edge index {} out of range (m = {})",
                p.edge,
                self.m()
            )));
        }
        let result = self.weights[p.edge] + p.delta;
        if !result.is_finite() || result < WEIGHT_FLOOR {
            return Err(Error::WeightFloor {
                edge: p.edge,
                result,
                floor: WEIGHT_FLOOR,
            });
        }
        let mut g = self.clone();
        g.weights[p.edge] = result;
        Ok(g)
    }

    /// Total weight of edges with exactly one endpoint in `in_set`.
    pub fn cut_weight(&self, in_set: &[bool]) -> f64 {
        self.edges
            .iter()
            .zip(&self.weights)
            .filter(|((u, v), _)| in_set[*u] != in_set[*v])
            .map(|(_, w)| w)
            .sum()
    }

    pub fn neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, (a, b)) in self.edges.iter().enumerate() {
            if *a == v {
                out.push((*b, i));
            } else if *b == v {
                out.push((*a, i));
            }
        }
        out
    }

    /// Stable 16-hex-digit digest of the full instance, for report labelling.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.n.to_le_bytes());
        for ((u, v), w) in self.edges.iter().zip(&self.weights) {
            h.update(u.to_le_bytes());
            h.update(v.to_le_bytes());
            h.update(w.to_bits().to_le_bytes());
        }
        if let Some(us) = self.bipartite_u_size {
            h.update([1u8]);
            h.update(us.to_le_bytes());
        }
        if let Some(caps) = &self.capacities {
            for c in caps {
                h.update(c.to_le_bytes());
            }
        }
        let out = h.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Single-coordinate weight perturbation, addressed by edge index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub edge: usize,
    pub delta: f64,
}

impl Perturbation {
    pub fn new(edge: usize, delta: f64) -> Self {
        Perturbation { edge, delta }
    }
}

/// A minimum S-T cut instance: disjoint non-empty terminal sets with
/// designated representatives s0 ∈ S, t0 ∈ T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutInstance {
    pub graph: WeightedGraph,
    s_set: Vec<usize>,
    t_set: Vec<usize>,
}

impl CutInstance {
    pub fn new(graph: WeightedGraph, mut s_set: Vec<usize>, mut t_set: Vec<usize>) -> Result<Self> {
        s_set.sort_unstable();
        s_set.dedup();
        t_set.sort_unstable();
        t_set.dedup();
        if s_set.is_empty() || t_set.is_empty() {
            return Err(Error::InvalidParameter("S and T must be non-empty".into()));
        }
        if s_set.iter().any(|v| t_set.contains(v)) {
            return Err(Error::InvalidParameter("S and T must be disjoint".into()));
        }
        let n = graph.n();
        if s_set.iter().chain(&t_set).any(|&v| v >= n) {
            return Err(Error::InvalidParameter("terminal out of vertex range".into()));
        }
        Ok(CutInstance { graph, s_set, t_set })
    }

    pub fn s_set(&self) -> &[usize] {
        &self.s_set
    }

    pub fn t_set(&self) -> &[usize] {
        &self.t_set
    }

    pub fn s0(&self) -> usize {
        self.s_set[0]
    }

    pub fn t0(&self) -> usize {
        self.t_set[0]
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Same terminals over a perturbed graph.
    pub fn perturb(&self, p: Perturbation) -> Result<Self> {
        Ok(CutInstance {
            graph: self.graph.perturb(p)?,
            s_set: self.s_set.clone(),
            t_set: self.t_set.clone(),
        })
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Ok(CutInstance {
            graph: self.graph.with_weights(weights)?,
            s_set: self.s_set.clone(),
            t_set: self.t_set.clone(),
        })
    }

    /// True if `in_set` describes a feasible cut side: S ⊆ A, A ∩ T = ∅ and
    /// A ∉ {∅, V}.
    pub fn feasible_side(&self, in_set: &[bool]) -> bool {
        let count = in_set.iter().filter(|b| **b).count();
        count > 0
            && count < self.graph.n()
            && self.s_set.iter().all(|&v| in_set[v])
            && self.t_set.iter().all(|&v| !in_set[v])
    }
}

/// Lower-bound construction: a complete bipartite graph K_{|U|,|R|} with
/// s, t ∈ R and two weight vectors that move the unique near-optimal cut from
/// {s} all the way to V∖{t} while every other cut stays expensive.
///
/// Returns the instance carrying the first weight vector together with the
/// second weight vector (same topology, same edge order).
pub fn lower_bound_instance(n: usize, c_approx: f64, f_n: f64) -> Result<(CutInstance, Vec<f64>)> {
    if c_approx < 0.0 || f_n <= 0.0 {
        return Err(Error::InvalidParameter(
            "lower-bound construction needs C >= 0 and f_n > 0".into(),
        ));
    }
    if f_n >= n as f64 / (2.0 * (c_approx + 2.0)) {
        return Err(Error::InvalidParameter(format!(
            "f_n = {f_n} must be < n / (2(C+2)) = {}",
            n as f64 / (2.0 * (c_approx + 2.0))
        )));
    }
    let u_size = ((c_approx + 2.0) * f_n).ceil() as usize;
    if u_size < 1 || n - u_size < 2 {
        return Err(Error::InvalidParameter(
            "construction needs |U| >= 1 and |R| >= 2".into(),
        ));
    }
    let light = 1.0 / (4.0 * (c_approx + 2.0));
    // Vertices 0..u_size are U; the rest are R. s and t are the first two
    // vertices of R.
    let s = u_size;
    let t = u_size + 1;
    let mut edges = Vec::with_capacity(u_size * (n - u_size));
    for u in 0..u_size {
        for r in u_size..n {
            edges.push((u, r));
        }
    }
    let w: Vec<f64> = edges
        .iter()
        .map(|&(u, r)| if u == s || r == s { light } else { 1.0 })
        .collect();
    let w_tilde: Vec<f64> = edges
        .iter()
        .map(|&(u, r)| if u == t || r == t { light } else { 1.0 })
        .collect();
    let graph = WeightedGraph::bipartite(n, u_size, edges, w)?;
    let inst = CutInstance::new(graph, vec![s], vec![t])?;
    Ok((inst, w_tilde))
}

/// Connected random graph: a random spanning tree plus extra random edges,
/// weights uniform in `[w_lo, w_hi]` snapped to a dyadic grid of `grid`
/// steps so that cut weights are exact in binary floating point.
pub fn random_connected_graph(
    n: usize,
    extra_edges: usize,
    w_lo: f64,
    w_hi: f64,
    grid: usize,
    tape: &mut RandomTape,
) -> Result<WeightedGraph> {
    assert!(n >= 2 && w_hi > w_lo && grid >= 1);
    let mut edges = Vec::new();
    // random spanning tree: attach each vertex to a uniformly chosen earlier one
    for v in 1..n {
        let u = (tape.draw() * v as f64) as usize;
        edges.push((u.min(v - 1), v));
    }
    let mut present: std::collections::BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let max_extra = n * (n - 1) / 2 - edges.len();
    let mut added = 0;
    let mut attempts = 0;
    while added < extra_edges.min(max_extra) && attempts < 50 * extra_edges + 100 {
        attempts += 1;
        let u = (tape.draw() * n as f64) as usize;
        let v = (tape.draw() * n as f64) as usize;
        let (u, v) = (u.min(v), u.max(v));
        if u == v || u >= n || v >= n || present.contains(&(u, v)) {
            continue;
        }
        present.insert((u, v));
        edges.push((u, v));
        added += 1;
    }
    let weights = (0..edges.len())
        .map(|_| dyadic_weight(w_lo, w_hi, grid, tape))
        .collect();
    WeightedGraph::new(n, edges, weights)
}

/// Random bipartite graph with each cross pair kept with probability `p`
/// (at least one edge guaranteed).
pub fn random_bipartite_graph(
    u_size: usize,
    r_size: usize,
    p: f64,
    w_lo: f64,
    w_hi: f64,
    grid: usize,
    tape: &mut RandomTape,
) -> Result<WeightedGraph> {
    let n = u_size + r_size;
    let mut edges = Vec::new();
    for u in 0..u_size {
        for r in 0..r_size {
            if tape.draw() < p {
                edges.push((u, u_size + r));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, u_size));
    }
    let weights = (0..edges.len())
        .map(|_| dyadic_weight(w_lo, w_hi, grid, tape))
        .collect();
    WeightedGraph::bipartite(n, u_size, edges, weights)
}

fn dyadic_weight(lo: f64, hi: f64, grid: usize, tape: &mut RandomTape) -> f64 {
    let step = (tape.draw() * (grid as f64 + 1.0)) as usize;
    let step = step.min(grid);
    lo + (hi - lo) * step as f64 / grid as f64
}

/// Union-find connectivity check (test oracle and precondition guard).
pub fn is_connected(g: &WeightedGraph) -> bool {
    if g.n() == 0 {
        return true;
    }
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in g.edges() {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let r0 = find(&mut parent, 0);
    (1..g.n()).all(|v| find(&mut parent, v) == r0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_edge_order() {
        let g = WeightedGraph::new(4, vec![(3, 1), (0, 2), (2, 1)], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 2), (1, 3)]);
        assert_eq!(g.weights(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn rejects_self_loop_duplicate_and_bad_weight() {
        assert!(WeightedGraph::new(3, vec![(1, 1)], vec![1.0]).is_err());
        assert!(WeightedGraph::new(3, vec![(0, 1), (1, 0)], vec![1.0, 1.0]).is_err());
        assert!(WeightedGraph::new(3, vec![(0, 1)], vec![0.0]).is_err());
        assert!(WeightedGraph::new(3, vec![(0, 1)], vec![-1.0]).is_err());
    }

    #[test]
    fn bipartition_must_be_crossed() {
        assert!(WeightedGraph::bipartite(4, 2, vec![(0, 1)], vec![1.0]).is_err());
        assert!(WeightedGraph::bipartite(4, 2, vec![(0, 2)], vec![1.0]).is_ok());
    }

    #[test]
    fn perturb_basic() {
        let g = WeightedGraph::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let g2 = g.perturb(Perturbation::new(0, 0.1)).unwrap();
        assert!((g2.weight(0) - 1.1).abs() < 1e-15);
        assert_eq!(g.weight(0), 1.0);

        let same = g.perturb(Perturbation::new(0, 0.0)).unwrap();
        assert_eq!(same, g);

        match g.perturb(Perturbation::new(0, -1.0)) {
            Err(Error::WeightFloor { .. }) => {}
            other => panic!("expected floor rejection, got {other:?}"),
        }
    }

    #[test]
    fn cut_instance_validation() {
        let g = WeightedGraph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        assert!(CutInstance::new(g.clone(), vec![0], vec![2]).is_ok());
        assert!(CutInstance::new(g.clone(), vec![0], vec![0]).is_err());
        assert!(CutInstance::new(g.clone(), vec![], vec![2]).is_err());
        assert!(CutInstance::new(g, vec![0], vec![7]).is_err());
    }

    #[test]
    fn lower_bound_shape() {
        let (inst, w_tilde) = lower_bound_instance(10, 1.0, 1.0).unwrap();
        // |U| = ceil(3*1) = 3, s = 3, t = 4
        assert_eq!(inst.graph.bipartite_u_size(), Some(3));
        assert_eq!(inst.s0(), 3);
        assert_eq!(inst.t0(), 4);
        assert_eq!(inst.graph.m(), 3 * 7);
        assert_eq!(w_tilde.len(), inst.graph.m());
        let light = 1.0 / 12.0;
        for (i, &(u, v)) in inst.graph.edges().iter().enumerate() {
            let w = inst.graph.weight(i);
            if u == 3 || v == 3 {
                assert_eq!(w, light);
            } else {
                assert_eq!(w, 1.0);
            }
            if u == 4 || v == 4 {
                assert_eq!(w_tilde[i], light);
            } else {
                assert_eq!(w_tilde[i], 1.0);
            }
        }
        assert!(lower_bound_instance(10, 1.0, 2.0).is_err());
    }

    #[test]
    fn connectivity_oracle() {
        let g = WeightedGraph::new(4, vec![(0, 1), (2, 3)], vec![1.0, 1.0]).unwrap();
        assert!(!is_connected(&g));
        let g = WeightedGraph::new(4, vec![(0, 1), (1, 2), (2, 3)], vec![1.0; 3]).unwrap();
        assert!(is_connected(&g));
    }

    #[test]
    fn random_generators_respect_invariants() {
        let mut tape = RandomTape::new(11);
        for _ in 0..20 {
            let g = random_connected_graph(9, 6, 0.5, 2.0, 16, &mut tape).unwrap();
            assert!(is_connected(&g));
            assert!(g.min_weight() >= 0.5);
        }
        let g = random_bipartite_graph(3, 4, 0.5, 0.5, 2.0, 16, &mut tape).unwrap();
        assert!(g.bipartite_u_size() == Some(3));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let g = WeightedGraph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        let d1 = g.digest();
        assert_eq!(d1, g.clone().digest());
        let g2 = g.perturb(Perturbation::new(0, 0.5)).unwrap();
        assert_ne!(d1, g2.digest());
    }
}
