//! Minimum S-T cut via regularized LP relaxations and stable rounding.
//!
//! The fractional step minimizes Σ w_uv|y_u − y_v| + (ε/2) yᵀL_w y subject to
//! the anchor gap y_{t0} − y_{s0} = 1, equality on S and on T, ⟨1,y⟩ = 0 and
//! a box; the Laplacian regularizer makes the optimum unique and stable in
//! the weights. Three rounding schemes turn a fractional solution into a
//! vertex set: plain threshold rounding, exponential-mechanism boosting over
//! per-size-bucket relaxations, and k-way-submodularity boosting for the
//! balanced variant. An unweighted-ℓ2 baseline with anchored endpoints is
//! included for comparison experiments.
//!
//! All tape draw orders below are public contract (coupled runs depend on
//! them):
//! - `threshold_round`: 1 draw (threshold).
//! - `CutExpmech::round`: 1 draw (Λ2), 1 draw (exponential-mechanism fork),
//!   1 draw (threshold).
//! - `CutKway::round`: k draws (thresholds in set order), 1 draw (r).
//! - `CutNaive::round`: 1 draw (threshold).

use crate::error::{Error, Result};
use crate::graph::CutInstance;
use crate::sample::{exp_mech_sample, stable_sample_uniform};
use crate::solver::{
    solve, BoxSlab, DiffTerm, NonsmoothTerm, Projector, RegularizedProgram, SmoothTerm,
    SolveResult,
};
use crate::spectral::lambda_extremes;
use ndarray::{Array1, Array2};

/// Default iteration cap for the fractional solves.
const SOLVE_CAP: usize = 400_000;

/// Solver diagnostics carried by fractional solutions.
#[derive(Debug, Clone)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl From<&SolveResult> for SolveDiagnostics {
    fn from(r: &SolveResult) -> Self {
        SolveDiagnostics {
            iterations: r.iterations,
            residual: r.residual,
            converged: r.converged,
        }
    }
}

/// Fractional cut solution over the vertices.
///
/// For the Laplacian-regularized programs `y` is reported in sum-zero
/// coordinates (⟨1,y⟩ = 0, y_{t0} − y_{s0} = 1, constant on S and on T, all
/// values inside `interval`). The unweighted baseline keeps its native
/// anchored coordinates (y_{s0} = 0, y_{t0} = 1) and stores its Λ in
/// `epsilon`.
#[derive(Debug, Clone)]
pub struct CutFractional {
    pub y: Array1<f64>,
    pub epsilon: f64,
    pub interval: (f64, f64),
    /// Unregularized cut objective Σ w_uv |y_u − y_v|.
    pub objective_f: f64,
    pub diagnostics: SolveDiagnostics,
}

impl CutFractional {
    /// E_τ[cut(A_τ)] for τ uniform on `interval`: objective_f / (hi − lo).
    pub fn expected_rounded_weight(&self) -> f64 {
        self.objective_f / (self.interval.1 - self.interval.0)
    }

    /// Check the feasibility invariants against an instance.
    pub fn check_invariants(&self, inst: &CutInstance, tol: f64, centered: bool) -> Result<()> {
        let y = &self.y;
        let gap = y[inst.t0()] - y[inst.s0()];
        if (gap - 1.0).abs() > tol {
            return Err(Error::Numeric(format!("anchor gap {gap} != 1")));
        }
        if centered {
            let sum: f64 = y.sum();
            if sum.abs() > tol * inst.n() as f64 {
                return Err(Error::Numeric(format!("sum {sum} != 0")));
            }
        }
        for &s in inst.s_set() {
            if (y[s] - y[inst.s0()]).abs() > tol {
                return Err(Error::Numeric("y not constant on S".into()));
            }
        }
        for &t in inst.t_set() {
            if (y[t] - y[inst.t0()]).abs() > tol {
                return Err(Error::Numeric("y not constant on T".into()));
            }
        }
        let (lo, hi) = self.interval;
        if y.iter().any(|&v| v < lo - tol || v > hi + tol) {
            return Err(Error::Numeric("y leaves the interval box".into()));
        }
        let recomputed: f64 = inst
            .graph
            .edges()
            .iter()
            .zip(inst.graph.weights())
            .map(|(&(u, v), &w)| w * (y[u] - y[v]).abs())
            .sum();
        if (recomputed - self.objective_f).abs() > tol * (1.0 + recomputed.abs()) {
            return Err(Error::Numeric("stored objective_f does not match y".into()));
        }
        Ok(())
    }
}

/// A rounded cut: the vertex set A, its weight and the feasibility flag
/// (S ⊆ A, A ∩ T = ∅, A ∉ {∅, V}).
#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub members: Vec<usize>,
    pub weight: f64,
    pub feasible: bool,
}

impl CutResult {
    pub fn from_side(inst: &CutInstance, in_set: &[bool]) -> Self {
        let weight = inst.graph.cut_weight(in_set);
        let feasible = inst.feasible_side(in_set);
        let members = (0..inst.n()).filter(|&v| in_set[v]).collect();
        CutResult {
            members,
            weight,
            feasible,
        }
    }

    pub fn side(&self, n: usize) -> Vec<bool> {
        let mut s = vec![false; n];
        for &v in &self.members {
            s[v] = true;
        }
        s
    }

    /// |A Δ B| between two results over the same vertex set.
    pub fn symmetric_difference(&self, other: &CutResult) -> usize {
        let mut i = 0;
        let mut j = 0;
        let mut diff = 0;
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    diff += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    diff += 1;
                    j += 1;
                }
            }
        }
        diff + (self.members.len() - i) + (other.members.len() - j)
    }
}

/// Anchored reformulation shared by every cut program: S is pinned to 0 and
/// T to 1, interior vertices are the free variables in [0,1], and the
/// original numeric box [lo,hi] becomes a slab on the coordinate sum.
struct Anchored {
    interior: Vec<usize>,
    pos: Vec<Option<usize>>,
    anchor: Vec<f64>,
    terms: Vec<DiffTerm>,
}

impl Anchored {
    fn build(inst: &CutInstance) -> Self {
        let n = inst.n();
        let mut anchor = vec![f64::NAN; n];
        for &s in inst.s_set() {
            anchor[s] = 0.0;
        }
        for &t in inst.t_set() {
            anchor[t] = 1.0;
        }
        let mut interior = Vec::new();
        let mut pos = vec![None; n];
        for v in 0..n {
            if anchor[v].is_nan() {
                pos[v] = Some(interior.len());
                interior.push(v);
            }
        }
        let mut terms = Vec::new();
        for (&(u, v), &w) in inst.graph.edges().iter().zip(inst.graph.weights()) {
            match (pos[u], pos[v]) {
                (Some(i), Some(j)) => terms.push(DiffTerm {
                    i: Some(i),
                    j: Some(j),
                    offset: 0.0,
                    weight: w,
                }),
                (Some(i), None) => terms.push(DiffTerm {
                    i: Some(i),
                    j: None,
                    offset: -anchor[v],
                    weight: w,
                }),
                (None, Some(j)) => terms.push(DiffTerm {
                    i: Some(j),
                    j: None,
                    offset: -anchor[u],
                    weight: w,
                }),
                // both endpoints anchored: constant objective contribution,
                // tracked through fractional_cut_value on the full vector
                (None, None) => {}
            }
        }
        Anchored {
            interior,
            pos,
            anchor,
            terms,
        }
    }

    fn dim(&self) -> usize {
        self.interior.len()
    }

    /// Embed interior values into a full vertex vector.
    fn embed(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut y = Array1::from(self.anchor.clone());
        for (k, &v) in self.interior.iter().enumerate() {
            y[v] = x[k];
        }
        y
    }

    /// Laplacian quadratic form restricted to the interior block:
    /// (ε/2) yᵀL y as ½ xᵀQx + dᵀx + c0 with the anchors substituted.
    fn laplacian_smooth(&self, inst: &CutInstance, eps: f64) -> SmoothTerm {
        let d = self.dim();
        let mut q = Array2::<f64>::zeros((d, d));
        let mut lin = Array1::<f64>::zeros(d);
        let mut c0 = 0.0;
        for (&(u, v), &w) in inst.graph.edges().iter().zip(inst.graph.weights()) {
            // (ε/2) w (y_u − y_v)²
            match (self.pos[u], self.pos[v]) {
                (Some(i), Some(j)) => {
                    q[[i, i]] += eps * w;
                    q[[j, j]] += eps * w;
                    q[[i, j]] -= eps * w;
                    q[[j, i]] -= eps * w;
                }
                (Some(i), None) => {
                    q[[i, i]] += eps * w;
                    lin[i] -= eps * w * self.anchor[v];
                    c0 += 0.5 * eps * w * self.anchor[v] * self.anchor[v];
                }
                (None, Some(j)) => {
                    q[[j, j]] += eps * w;
                    lin[j] -= eps * w * self.anchor[u];
                    c0 += 0.5 * eps * w * self.anchor[u] * self.anchor[u];
                }
                (None, None) => {
                    c0 += 0.5 * eps * w * (self.anchor[u] - self.anchor[v]).powi(2);
                }
            }
        }
        SmoothTerm::Quadratic { q, d: lin, c0 }
    }

    /// Slab bounds on Σ_interior x implied by the numeric box [lo,hi] after
    /// centering: mean(y_full) must lie in [1−hi, −lo] ∩ [0,1].
    fn slab(&self, inst: &CutInstance, lo: f64, hi: f64) -> Result<BoxSlab> {
        let n = inst.n() as f64;
        let t_count = inst.t_set().len() as f64;
        let mean_lo = (1.0 - hi).max(0.0);
        let mean_hi = (-lo).min(1.0);
        if mean_lo > mean_hi + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "interval [{lo}, {hi}] cannot contain both anchor values"
            )));
        }
        let dim = self.dim();
        BoxSlab::new(
            Array1::zeros(dim),
            Array1::ones(dim),
            n * mean_lo - t_count,
            n * mean_hi - t_count,
        )
    }
}

fn validate_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bad interval [{lo}, {hi}]")));
    }
    // centred anchors are (-mean, 1 - mean) for some mean in [0, 1]; both fit
    // in [lo, hi] for some mean iff the width is >= 1 and the box straddles 0
    if hi - lo < 1.0 - 1e-12 || lo > 1e-12 || hi < -1e-12 {
        return Err(Error::InvalidParameter(format!(
            "interval [{lo}, {hi}] cannot contain both anchor values (need width >= 1 and lo <= 0 <= hi)"
        )));
    }
    Ok(())
}

/// Solve the Laplacian-regularized fractional cut program over the numeric
/// box `interval`. The returned solution is centered (⟨1,y⟩ = 0).
pub fn solve_fractional(
    inst: &CutInstance,
    eps: f64,
    interval: (f64, f64),
    tol: f64,
) -> Result<CutFractional> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter("eps must be > 0".into()));
    }
    let (lo, hi) = interval;
    validate_interval(lo, hi)?;
    let anchored = Anchored::build(inst);
    let slab = anchored.slab(inst, lo, hi)?;
    let (l2, ln) = lambda_extremes(&inst.graph, tol.min(1e-9))?;
    if l2 <= 1e-9 {
        log::warn!(
            "graph {} is disconnected (lambda2 = {l2:.3e}); the fractional optimum is not unique",
            inst.graph.digest()
        );
    }
    let sigma = (eps * l2 / 2.0).max(1e-12);
    let lsmooth = (2.0 * eps * ln).max(sigma);
    let prog = RegularizedProgram {
        dim: anchored.dim(),
        f: NonsmoothTerm::WeightedDifferences(anchored.terms.clone()),
        g: anchored.laplacian_smooth(inst, eps),
        sigma,
        lsmooth,
        projector: Projector::BoxSlab(slab),
    };
    let x0 = Array1::from_elem(anchored.dim(), 0.5);
    let res = solve(&prog, &x0, tol, SOLVE_CAP)?;
    if !res.converged {
        return Err(Error::NonConvergence {
            iterations: res.iterations,
            residual: res.residual,
            last: res.x.to_vec(),
        });
    }
    let mut y = anchored.embed(&res.x);
    let mean = y.mean().unwrap();
    y.mapv_inplace(|v| v - mean);
    let objective_f = fractional_cut_value(inst, &y);
    Ok(CutFractional {
        y,
        epsilon: eps,
        interval,
        objective_f,
        diagnostics: SolveDiagnostics::from(&res),
    })
}

pub fn fractional_cut_value(inst: &CutInstance, y: &Array1<f64>) -> f64 {
    inst.graph
        .edges()
        .iter()
        .zip(inst.graph.weights())
        .map(|(&(u, v), &w)| w * (y[u] - y[v]).abs())
        .sum()
}

/// Threshold rounding: τ uniform on the solution's interval,
/// A_τ = {v : y_v ≤ τ}. Consumes one tape draw. Feasible whenever
/// τ ∈ [y_{s0}, y_{t0}).
pub fn threshold_round(
    frac: &CutFractional,
    inst: &CutInstance,
    tape: &mut crate::tape::RandomTape,
) -> CutResult {
    let tau = stable_sample_uniform(frac.interval.0, frac.interval.1, tape);
    threshold_cut(frac, inst, tau)
}

pub fn threshold_cut(frac: &CutFractional, inst: &CutInstance, tau: f64) -> CutResult {
    let in_set: Vec<bool> = frac.y.iter().map(|&v| v <= tau).collect();
    CutResult::from_side(inst, &in_set)
}

// ---------------------------------------------------------------------------
// Exponential-mechanism boosting
// ---------------------------------------------------------------------------

/// One per-size-bucket relaxation: bucket i restricts the box to
/// [−γi, 1−(i−1)γ] (cut sizes in [γ(i−1)n, γin]). Buckets whose restriction
/// is infeasible carry no solution and an infinite score.
#[derive(Debug, Clone)]
pub struct Bucket {
    pub index: usize,
    pub interval: (f64, f64),
    pub frac: Option<CutFractional>,
    pub theta: f64,
}

/// Prepared exponential-mechanism rounder: the 1/γ bucket relaxations are
/// solved once, after which `round` only consumes three tape draws.
#[derive(Debug, Clone)]
pub struct CutExpmech {
    pub gamma: f64,
    pub epsilon: f64,
    pub lambda2: f64,
    pub buckets: Vec<Bucket>,
}

impl CutExpmech {
    pub fn prepare(inst: &CutInstance, gamma: f64, tol: f64) -> Result<Self> {
        if inst.n() < 2 {
            return Err(Error::InvalidParameter("need n >= 2".into()));
        }
        let inv = 1.0 / gamma;
        if gamma <= 0.0 || gamma >= 1.0 || (inv - inv.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "1/gamma must be a positive integer, got gamma = {gamma}"
            )));
        }
        let buckets_n = inv.round() as usize;
        let l2 = crate::spectral::lambda2(&inst.graph, 1e-10)?;
        if l2 <= 1e-9 {
            return Err(Error::Disconnected(
                "the exponential-mechanism rounder needs lambda2 > 0 to set eta".into(),
            ));
        }
        let epsilon = 1.0 / (inst.n() as f64).sqrt();
        let mut buckets = Vec::with_capacity(buckets_n);
        for i in 1..=buckets_n {
            let interval = (-gamma * i as f64, 1.0 - (i as f64 - 1.0) * gamma);
            match solve_fractional(inst, epsilon, interval, tol) {
                Ok(frac) => {
                    let theta = frac.objective_f
                        + regularizer_value(inst, &frac.y, epsilon);
                    buckets.push(Bucket {
                        index: i,
                        interval,
                        frac: Some(frac),
                        theta,
                    });
                }
                Err(Error::InvalidParameter(_)) => buckets.push(Bucket {
                    index: i,
                    interval,
                    frac: None,
                    theta: f64::INFINITY,
                }),
                Err(e) => return Err(e),
            }
        }
        if buckets.iter().all(|b| b.frac.is_none()) {
            return Err(Error::InvalidParameter(
                "every size bucket is infeasible".into(),
            ));
        }
        Ok(CutExpmech {
            gamma,
            epsilon,
            lambda2: l2,
            buckets,
        })
    }

    /// Draw order: Λ2 ~ U[λ2/2, λ2], exponential-mechanism fork, threshold.
    pub fn round(&self, inst: &CutInstance, tape: &mut crate::tape::RandomTape) -> CutResult {
        let cap_lambda2 = stable_sample_uniform(self.lambda2 / 2.0, self.lambda2, tape);
        let n = inst.n() as f64;
        let eta = self.gamma * (1.0 / self.epsilon) * (1.0 / cap_lambda2) / n.sqrt();
        let scores: Vec<f64> = self.buckets.iter().map(|b| b.theta).collect();
        let chosen = exp_mech_sample(&scores, eta, tape);
        let bucket = &self.buckets[chosen];
        match &bucket.frac {
            Some(frac) => threshold_round(frac, inst, tape),
            // infinite-score buckets have probability exactly 0; this branch
            // is unreachable but kept total
            None => {
                let _ = tape.draw();
                CutResult::from_side(inst, &vec![false; inst.n()])
            }
        }
    }
}

fn regularizer_value(inst: &CutInstance, y: &Array1<f64>, eps: f64) -> f64 {
    0.5 * eps
        * inst
            .graph
            .edges()
            .iter()
            .zip(inst.graph.weights())
            .map(|(&(u, v), &w)| w * (y[u] - y[v]).powi(2))
            .sum::<f64>()
}

/// Minimum S-T cut via exponential-mechanism boosting.
pub fn cut_expmech(
    inst: &CutInstance,
    gamma: f64,
    tape: &mut crate::tape::RandomTape,
    tol: f64,
) -> Result<CutResult> {
    Ok(CutExpmech::prepare(inst, gamma, tol)?.round(inst, tape))
}

// ---------------------------------------------------------------------------
// k-way-submodularity boosting
// ---------------------------------------------------------------------------

/// Prepared k-way rounder over the β-balanced relaxation.
#[derive(Debug, Clone)]
pub struct CutKway {
    pub beta: f64,
    pub gamma: f64,
    pub k: usize,
    pub r_range: (usize, usize),
    pub frac: CutFractional,
    /// True when the balanced relaxation was infeasible and the default box
    /// was used as a fallback.
    pub balanced_infeasible: bool,
}

impl CutKway {
    pub fn prepare(inst: &CutInstance, beta: f64, gamma: f64, tol: f64) -> Result<Self> {
        if !(0.0 < beta && beta < 0.5) {
            return Err(Error::InvalidParameter("beta must be in (0, 1/2)".into()));
        }
        if !(0.0 < gamma && gamma < 1.0) {
            return Err(Error::InvalidParameter("gamma must be in (0, 1)".into()));
        }
        let k = 4 * ((12.0 / (beta * beta) * (2.0 / gamma).ln() / 4.0).ceil() as usize).max(1);
        let r_lo = k / 2;
        let r_hi = ((0.5 + beta / 4.0) * k as f64).floor() as usize;
        if r_hi < r_lo {
            return Err(Error::InvalidParameter(format!(
                "empty r range for k = {k}, beta = {beta}"
            )));
        }
        let interval = (-1.0 + beta, 1.0 - beta);
        let (frac, balanced_infeasible) = match solve_fractional(inst, 1.0, interval, tol) {
            Ok(f) => (f, false),
            Err(Error::InvalidParameter(msg)) => {
                log::warn!(
                    "balanced relaxation infeasible ({msg}); falling back to the default box"
                );
                let mut f = solve_fractional(inst, 1.0, (-1.0, 1.0), tol)?;
                f.interval = interval;
                (f, true)
            }
            Err(e) => return Err(e),
        };
        Ok(CutKway {
            beta,
            gamma,
            k,
            r_range: (r_lo, r_hi),
            frac,
            balanced_infeasible,
        })
    }

    /// Draw order: k thresholds (τ_1..τ_k), then r.
    pub fn round(&self, inst: &CutInstance, tape: &mut crate::tape::RandomTape) -> CutResult {
        let sides: Vec<Vec<bool>> = (0..self.k)
            .map(|_| {
                let tau =
                    stable_sample_uniform(self.frac.interval.0, self.frac.interval.1, tape);
                self.frac.y.iter().map(|&v| v <= tau).collect()
            })
            .collect();
        let (r_lo, r_hi) = self.r_range;
        let span = (r_hi - r_lo + 1) as f64;
        let r = r_lo + ((tape.draw() * span) as usize).min(r_hi - r_lo);
        let combined = combine_majority(&sides, r);
        CutResult::from_side(inst, &combined)
    }
}

/// B_{r,k} of a family of sets: vertices belonging to at least r of them.
/// Equivalent to the union over r-subsets of their intersections.
pub fn combine_majority(sides: &[Vec<bool>], r: usize) -> Vec<bool> {
    assert!(!sides.is_empty());
    let n = sides[0].len();
    let mut counts = vec![0usize; n];
    for side in sides {
        for (v, &inside) in side.iter().enumerate() {
            if inside {
                counts[v] += 1;
            }
        }
    }
    counts.into_iter().map(|c| c >= r).collect()
}

/// Minimum β-balanced S-T cut via k-way-submodularity boosting.
pub fn cut_kway(
    inst: &CutInstance,
    beta: f64,
    gamma: f64,
    tape: &mut crate::tape::RandomTape,
    tol: f64,
) -> Result<CutResult> {
    Ok(CutKway::prepare(inst, beta, gamma, tol)?.round(inst, tape))
}

// ---------------------------------------------------------------------------
// Unweighted-ℓ2 baseline
// ---------------------------------------------------------------------------

/// Prepared baseline: anchored LP over [0,1] with the unweighted regularizer
/// (Λ/2)‖y‖². Its fractional objective satisfies
/// f_w(y) ≤ OPT_LP + Λn/2 and its ℓ1 stability is δn/(2Λ).
#[derive(Debug, Clone)]
pub struct CutNaive {
    pub lambda: f64,
    pub frac: CutFractional,
}

impl CutNaive {
    pub fn prepare(inst: &CutInstance, lambda: f64, tol: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::InvalidParameter("Lambda must be > 0".into()));
        }
        let anchored = Anchored::build(inst);
        let dim = anchored.dim();
        // (Λ/2)‖y‖² with the anchored block contributing a constant
        let anchored_sq: f64 = anchored
            .anchor
            .iter()
            .filter(|a| !a.is_nan())
            .map(|a| a * a)
            .sum();
        let g = SmoothTerm::Quadratic {
            q: Array2::from_diag(&Array1::from_elem(dim, lambda)),
            d: Array1::zeros(dim),
            c0: 0.5 * lambda * anchored_sq,
        };
        let prog = RegularizedProgram {
            dim,
            f: NonsmoothTerm::WeightedDifferences(anchored.terms.clone()),
            g,
            sigma: lambda,
            lsmooth: lambda,
            projector: Projector::BoxSlab(BoxSlab::cube(dim)),
        };
        let x0 = Array1::from_elem(dim, 0.5);
        let res = solve(&prog, &x0, tol, SOLVE_CAP)?;
        if !res.converged {
            return Err(Error::NonConvergence {
                iterations: res.iterations,
                residual: res.residual,
                last: res.x.to_vec(),
            });
        }
        let y = anchored.embed(&res.x);
        let objective_f = fractional_cut_value(inst, &y);
        Ok(CutNaive {
            lambda,
            frac: CutFractional {
                y,
                epsilon: lambda,
                interval: (0.0, 1.0),
                objective_f,
                diagnostics: SolveDiagnostics::from(&res),
            },
        })
    }

    /// Draw order: one threshold τ ~ U[0,1].
    pub fn round(&self, inst: &CutInstance, tape: &mut crate::tape::RandomTape) -> CutResult {
        threshold_round(&self.frac, inst, tape)
    }
}

/// Minimum S-T cut via the unweighted-ℓ2 baseline.
pub fn cut_naive_baseline(
    inst: &CutInstance,
    lambda: f64,
    tape: &mut crate::tape::RandomTape,
    tol: f64,
) -> Result<CutResult> {
    Ok(CutNaive::prepare(inst, lambda, tol)?.round(inst, tape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_connected_graph, CutInstance, Perturbation, WeightedGraph};
    use crate::spectral::lambda2;
    use crate::tape::RandomTape;
    use approx::assert_abs_diff_eq;

    fn single_edge_instance(w: f64) -> CutInstance {
        let g = WeightedGraph::new(2, vec![(0, 1)], vec![w]).unwrap();
        CutInstance::new(g, vec![0], vec![1]).unwrap()
    }

    /// 4-cycle s(0) - a(1) - t(2) - b(3) - s(0), unit weights: min cut 2.
    fn four_cycle() -> CutInstance {
        let g = WeightedGraph::new(
            4,
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            vec![1.0; 4],
        )
        .unwrap();
        CutInstance::new(g, vec![0], vec![2]).unwrap()
    }

    #[test]
    fn single_edge_solution_is_determined() {
        let inst = single_edge_instance(2.5);
        let frac = solve_fractional(&inst, 0.3, (-1.0, 1.0), 1e-9).unwrap();
        assert_abs_diff_eq!(frac.y[0], -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(frac.y[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(frac.objective_f, 2.5, epsilon = 1e-9);
        frac.check_invariants(&inst, 1e-6, true).unwrap();
    }

    #[test]
    fn four_cycle_objective_near_mincut() {
        let inst = four_cycle();
        for eps in [0.1, 0.5] {
            let frac = solve_fractional(&inst, eps, (-1.0, 1.0), 1e-9).unwrap();
            frac.check_invariants(&inst, 1e-6, true).unwrap();
            assert!(
                frac.objective_f <= (1.0 + eps) * 2.0 + 1e-6,
                "objective {} for eps {eps}",
                frac.objective_f
            );
            assert!(frac.objective_f >= 2.0 - 1e-6);
        }
    }

    #[test]
    fn fractional_invariants_on_random_instances() {
        let mut tape = RandomTape::new(17);
        for trial in 0..10 {
            let n = 5 + trial % 6;
            let g = random_connected_graph(n, n, 0.5, 2.0, 16, &mut tape).unwrap();
            let inst = CutInstance::new(g, vec![0], vec![n - 1]).unwrap();
            let frac = solve_fractional(&inst, 0.2, (-1.0, 1.0), 1e-8).unwrap();
            frac.check_invariants(&inst, 1e-6, true).unwrap();
        }
    }

    #[test]
    fn fractional_stability_bound() {
        // ‖y − ỹ‖₂ ≤ 10 δ/(ε λ2), slack-10 form of the perturbation corollary
        let mut tape = RandomTape::new(23);
        for trial in 0..6 {
            let n = 6 + trial;
            let g = random_connected_graph(n, n + 2, 0.5, 2.0, 16, &mut tape).unwrap();
            let inst = CutInstance::new(g.clone(), vec![0], vec![n - 1]).unwrap();
            let eps = 0.25;
            let l2 = lambda2(&g, 1e-10).unwrap();
            let frac = solve_fractional(&inst, eps, (-1.0, 1.0), 1e-9).unwrap();
            let e = trial % g.m();
            let delta = 1e-3 * g.weight(e);
            let inst2 = inst.perturb(Perturbation::new(e, delta)).unwrap();
            let frac2 = solve_fractional(&inst2, eps, (-1.0, 1.0), 1e-9).unwrap();
            let dist = (&frac.y - &frac2.y).dot(&(&frac.y - &frac2.y)).sqrt();
            let bound = 10.0 * delta / (eps * l2);
            assert!(
                dist <= bound,
                "n={n}: distance {dist:.3e} exceeds 10δ/(ελ2) = {bound:.3e}"
            );
        }
    }

    #[test]
    fn threshold_round_examples() {
        // y = (0, 0.5, 1) on a unit path, τ ~ U[0,1]: E[cut] = 1
        let g = WeightedGraph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        let inst = CutInstance::new(g, vec![0], vec![2]).unwrap();
        let frac = CutFractional {
            y: ndarray::array![0.0, 0.5, 1.0],
            epsilon: 0.1,
            interval: (0.0, 1.0),
            objective_f: 1.0,
            diagnostics: SolveDiagnostics {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        };
        assert_abs_diff_eq!(frac.expected_rounded_weight(), 1.0, epsilon = 1e-12);
        let mut tape = RandomTape::new(5);
        let trials = 200_000;
        let mean: f64 = (0..trials)
            .map(|_| threshold_round(&frac, &inst, &mut tape).weight)
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() < 0.01, "MC mean {mean}");

        // τ below every y value gives the empty set, flagged infeasible
        let mut scripted = RandomTape::scripted(vec![0.0]);
        let frac2 = CutFractional {
            y: ndarray::array![0.25, 0.5, 0.75],
            ..frac.clone()
        };
        let res = threshold_round(&frac2, &inst, &mut scripted);
        assert!(res.members.is_empty());
        assert!(!res.feasible);
    }

    #[test]
    fn threshold_feasible_inside_anchor_window() {
        let inst = four_cycle();
        let frac = solve_fractional(&inst, 0.3, (-1.0, 1.0), 1e-9).unwrap();
        let (s0, t0) = (inst.s0(), inst.t0());
        for k in 0..50 {
            let tau = frac.y[s0] + (frac.y[t0] - frac.y[s0]) * (k as f64 / 50.0);
            let res = threshold_cut(&frac, &inst, tau);
            assert!(res.feasible, "tau {tau} in window must be feasible");
        }
    }

    #[test]
    fn expmech_single_edge_enumeration() {
        // γ = 1/2: buckets i=1 box [-1/2, 1], i=2 box [-1, 1/2]; on the single
        // edge both bucket solutions are the fully-determined y = (-1/2, 1/2),
        // so every feasible draw returns exactly {s}.
        let inst = single_edge_instance(1.0);
        let prep = CutExpmech::prepare(&inst, 0.5, 1e-9).unwrap();
        assert_eq!(prep.buckets.len(), 2);
        let mut tape = RandomTape::new(9);
        let mut feasible = 0;
        let trials = 4000;
        for _ in 0..trials {
            let res = prep.round(&inst, &mut tape);
            if res.feasible {
                feasible += 1;
                assert_eq!(res.members, vec![0]);
                assert_abs_diff_eq!(res.weight, 1.0, epsilon = 1e-12);
            }
        }
        // feasibility rate 1/(1+γ) = 2/3
        let rate = feasible as f64 / trials as f64;
        assert!((rate - 2.0 / 3.0).abs() < 0.03, "rate {rate}");
    }

    #[test]
    fn expmech_rejects_bad_gamma_and_disconnected() {
        let inst = single_edge_instance(1.0);
        assert!(CutExpmech::prepare(&inst, 0.3, 1e-9).is_err());
        let g = WeightedGraph::new(4, vec![(0, 1), (2, 3)], vec![1.0, 1.0]).unwrap();
        let inst = CutInstance::new(g, vec![0], vec![1]).unwrap();
        match CutExpmech::prepare(&inst, 0.5, 1e-9) {
            Err(Error::Disconnected(_)) => {}
            other => panic!("expected Disconnected, got {other:?}"),
        }
    }

    #[test]
    fn kway_majority_examples() {
        // A1 = {1,2}, A2 = {2,3}, A3 = {2}, universe {0..3}
        let a1 = vec![false, true, true, false];
        let a2 = vec![false, false, true, true];
        let a3 = vec![false, false, true, false];
        let sides = [a1.clone(), a2.clone(), a3.clone()];
        assert_eq!(combine_majority(&sides, 2), vec![false, false, true, false]);
        // r = 1: union
        assert_eq!(combine_majority(&sides, 1), vec![false, true, true, true]);
        // r = k with equal sets: the set itself
        let eq = [a1.clone(), a1.clone(), a1.clone()];
        assert_eq!(combine_majority(&eq, 3), a1);
    }

    #[test]
    fn kway_majority_equals_brute_force() {
        // union over r-subsets of intersections == membership counting
        fn brute(sides: &[Vec<bool>], r: usize) -> Vec<bool> {
            let k = sides.len();
            let n = sides[0].len();
            let mut out = vec![false; n];
            // iterate bitmask subsets of size r
            for mask in 0u32..(1 << k) {
                if mask.count_ones() as usize != r {
                    continue;
                }
                for v in 0..n {
                    let mut all = true;
                    for i in 0..k {
                        if mask & (1 << i) != 0 && !sides[i][v] {
                            all = false;
                            break;
                        }
                    }
                    if all {
                        out[v] = true;
                    }
                }
            }
            out
        }
        let mut tape = RandomTape::new(33);
        for _ in 0..300 {
            let k = 2 + (tape.draw() * 5.0) as usize; // 2..=6
            let n = 1 + (tape.draw() * 8.0) as usize;
            let sides: Vec<Vec<bool>> = (0..k)
                .map(|_| (0..n).map(|_| tape.draw() < 0.5).collect())
                .collect();
            for r in 1..=k {
                assert_eq!(combine_majority(&sides, r), brute(&sides, r));
            }
        }
    }

    #[test]
    fn kway_round_runs_and_r_in_range() {
        let inst = four_cycle();
        let prep = CutKway::prepare(&inst, 0.25, 0.25, 1e-8).unwrap();
        assert!(prep.k % 4 == 0);
        assert!(prep.r_range.0 <= prep.r_range.1);
        let mut tape = RandomTape::new(2);
        let mut feasible = 0;
        for _ in 0..200 {
            let res = prep.round(&inst, &mut tape);
            if res.feasible {
                feasible += 1;
            }
        }
        assert!(feasible >= 150, "feasible {feasible}/200");
    }

    #[test]
    fn naive_baseline_single_edge() {
        let inst = single_edge_instance(1.5);
        // small Λ recovers the exact LP optimum; interior coordinates absent,
        // y = (0, 1) forced
        let prep = CutNaive::prepare(&inst, 1e-4, 1e-10).unwrap();
        assert_abs_diff_eq!(prep.frac.y[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prep.frac.y[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prep.frac.objective_f, 1.5, epsilon = 1e-12);
        let mut tape = RandomTape::new(1);
        let res = prep.round(&inst, &mut tape);
        assert!(res.feasible);
        assert_abs_diff_eq!(res.weight, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn naive_additive_error_bound() {
        // f_w(y) <= OPT_LP + Λn/2 on a path where OPT is one light edge
        let g = WeightedGraph::new(4, vec![(0, 1), (1, 2), (2, 3)], vec![1.0, 0.5, 1.0]).unwrap();
        let inst = CutInstance::new(g, vec![0], vec![3]).unwrap();
        let lambda = 0.2;
        let prep = CutNaive::prepare(&inst, lambda, 1e-10).unwrap();
        let bound = 0.5 + lambda * 4.0 / 2.0;
        assert!(prep.frac.objective_f <= bound + 1e-8);
    }

    #[test]
    fn naive_l1_stability_bound() {
        // ‖y − ỹ‖₁ ≤ δ n / (2Λ)
        let mut tape = RandomTape::new(44);
        let g = random_connected_graph(8, 8, 0.5, 2.0, 16, &mut tape).unwrap();
        let inst = CutInstance::new(g.clone(), vec![0], vec![7]).unwrap();
        let lambda = 0.3;
        let a = CutNaive::prepare(&inst, lambda, 1e-10).unwrap();
        let delta = 1e-3;
        let inst2 = inst.perturb(Perturbation::new(2, delta)).unwrap();
        let b = CutNaive::prepare(&inst2, lambda, 1e-10).unwrap();
        let l1: f64 = a
            .frac
            .y
            .iter()
            .zip(b.frac.y.iter())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(
            l1 <= delta * 8.0 / (2.0 * lambda) + 1e-8,
            "l1 {l1} vs bound {}",
            delta * 8.0 / (2.0 * lambda)
        );
    }

    #[test]
    fn rounding_is_tape_deterministic() {
        let inst = four_cycle();
        let prep = CutExpmech::prepare(&inst, 0.25, 1e-9).unwrap();
        let a = prep.round(&inst, &mut RandomTape::new(7));
        let b = prep.round(&inst, &mut RandomTape::new(7));
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_difference_counts() {
        let a = CutResult {
            members: vec![0, 2, 5],
            weight: 0.0,
            feasible: true,
        };
        let b = CutResult {
            members: vec![0, 3],
            weight: 0.0,
            feasible: true,
        };
        assert_eq!(a.symmetric_difference(&b), 3);
        assert_eq!(a.symmetric_difference(&a), 0);
    }
}
