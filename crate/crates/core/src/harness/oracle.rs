//! Exact minimum S-T cut oracles: augmenting-path max-flow for instances up
//! to n = 200 and exhaustive subset enumeration up to 16 interior vertices.
//! The two methods cross-validate each other in tests.

use crate::error::{Error, Result};
use crate::graph::CutInstance;
use crate::mincut::CutResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactMethod {
    Auto,
    MaxFlow,
    Enumerate,
}

/// Exact minimum S-T cut (the side containing S).
pub fn mincut_exact(inst: &CutInstance) -> Result<CutResult> {
    mincut_exact_with(inst, ExactMethod::Auto)
}

pub fn mincut_exact_with(inst: &CutInstance, method: ExactMethod) -> Result<CutResult> {
    match method {
        ExactMethod::MaxFlow => maxflow_mincut(inst),
        ExactMethod::Enumerate => enumerate_mincut(inst),
        ExactMethod::Auto => {
            let interior = inst.n() - inst.s_set().len() - inst.t_set().len();
            if interior <= 16 && inst.n() <= 20 {
                enumerate_mincut(inst)
            } else {
                maxflow_mincut(inst)
            }
        }
    }
}

/// Edmonds-Karp on the directed expansion (each undirected edge becomes two
/// antiparallel arcs of the same capacity), with super terminals. The number
/// of augmentations is bounded by O(VE) independently of the capacities.
fn maxflow_mincut(inst: &CutInstance) -> Result<CutResult> {
    let n = inst.n();
    if n > 200 {
        return Err(Error::OracleSize(format!(
            "max-flow oracle capped at n = 200, got {n}"
        )));
    }
    let source = n;
    let sink = n + 1;
    let nodes = n + 2;

    struct Arc {
        to: usize,
        cap: f64,
        rev: usize,
    }
    let mut graph: Vec<Vec<Arc>> = (0..nodes).map(|_| Vec::new()).collect();
    let add = |graph: &mut Vec<Vec<Arc>>, u: usize, v: usize, cap: f64| {
        let ru = graph[v].len();
        let rv = graph[u].len();
        graph[u].push(Arc { to: v, cap, rev: ru });
        graph[v].push(Arc {
            to: u,
            cap: 0.0,
            rev: rv,
        });
    };
    for (&(u, v), &w) in inst.graph.edges().iter().zip(inst.graph.weights()) {
        add(&mut graph, u, v, w);
        add(&mut graph, v, u, w);
    }
    let inf = f64::INFINITY;
    for &s in inst.s_set() {
        add(&mut graph, source, s, inf);
    }
    for &t in inst.t_set() {
        add(&mut graph, t, sink, inf);
    }

    loop {
        // BFS for a shortest augmenting path
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        let mut seen = vec![false; nodes];
        seen[source] = true;
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for (ai, arc) in graph[u].iter().enumerate() {
                if arc.cap > 1e-14 && !seen[arc.to] {
                    seen[arc.to] = true;
                    prev[arc.to] = Some((u, ai));
                    queue.push_back(arc.to);
                }
            }
        }
        if !seen[sink] {
            break;
        }
        let mut bottleneck = inf;
        let mut v = sink;
        while let Some((u, ai)) = prev[v] {
            bottleneck = bottleneck.min(graph[u][ai].cap);
            v = u;
        }
        let mut v = sink;
        while let Some((u, ai)) = prev[v] {
            let rev = graph[u][ai].rev;
            graph[u][ai].cap -= bottleneck;
            graph[v][rev].cap += bottleneck;
            v = u;
        }
    }

    // source side of the residual graph
    let mut reach = vec![false; nodes];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(source);
    reach[source] = true;
    while let Some(u) = queue.pop_front() {
        for arc in &graph[u] {
            if arc.cap > 1e-9 && !reach[arc.to] {
                reach[arc.to] = true;
                queue.push_back(arc.to);
            }
        }
    }
    let in_set: Vec<bool> = (0..n).map(|v| reach[v]).collect();
    Ok(CutResult::from_side(inst, &in_set))
}

/// Exhaustive minimum over all feasible sides (S fixed in, T fixed out,
/// interior vertices free). Ties resolve to the first mask in ascending
/// order.
fn enumerate_mincut(inst: &CutInstance) -> Result<CutResult> {
    let n = inst.n();
    let interior: Vec<usize> = (0..n)
        .filter(|v| !inst.s_set().contains(v) && !inst.t_set().contains(v))
        .collect();
    if interior.len() > 16 {
        return Err(Error::OracleSize(format!(
            "enumeration oracle capped at 16 interior vertices, got {}",
            interior.len()
        )));
    }
    let mut base = vec![false; n];
    for &s in inst.s_set() {
        base[s] = true;
    }
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1u32 << interior.len()) {
        let mut side = base.clone();
        for (k, &v) in interior.iter().enumerate() {
            if mask & (1 << k) != 0 {
                side[v] = true;
            }
        }
        let w = inst.graph.cut_weight(&side);
        if best.as_ref().map(|(bw, _)| w < *bw).unwrap_or(true) {
            best = Some((w, side));
        }
    }
    let (_, side) = best.expect("at least one feasible side");
    Ok(CutResult::from_side(inst, &side))
}
