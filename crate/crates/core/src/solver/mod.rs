//! First-order solver for composite strongly-convex programs
//! min_{x∈K} f(x) + g(x).
//!
//! The nonsmooth part f comes in the two shapes the regularized relaxations
//! in this crate need: linear forms (matching, packing), solved by the
//! proximal gradient method whose prox step is a shifted projection, and
//! weighted absolute differences (cut objectives), solved by an ADMM
//! splitting with closed-form blocks. Both routes are deterministic: identical
//! inputs give bit-identical outputs.

mod admm;
pub mod constraint;
mod pgm;

pub use constraint::{dykstra_project, BoxSlab, ConstraintSet, Projector};
pub use pgm::pgm_step;

use crate::error::{Error, Result};
use crate::tape::RandomTape;
use ndarray::{Array1, Array2};

/// One |·| term of a weighted-differences objective:
/// weight · |x_i − x_j + offset| (either index may be absent).
#[derive(Debug, Clone, Copy)]
pub struct DiffTerm {
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub offset: f64,
    pub weight: f64,
}

impl DiffTerm {
    fn eval(&self, x: &Array1<f64>) -> f64 {
        let mut v = self.offset;
        if let Some(i) = self.i {
            v += x[i];
        }
        if let Some(j) = self.j {
            v -= x[j];
        }
        v
    }
}

/// Nonsmooth convex part, exposing (value, subgradient) plus enough structure
/// for the solver to pick a proximal route.
#[derive(Debug, Clone)]
pub enum NonsmoothTerm {
    /// f(x) = ⟨c, x⟩
    Linear(Array1<f64>),
    /// f(x) = Σ_k w_k |x_{i_k} − x_{j_k} + o_k|, all w_k ≥ 0
    WeightedDifferences(Vec<DiffTerm>),
}

impl NonsmoothTerm {
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        match self {
            NonsmoothTerm::Linear(c) => c.dot(x),
            NonsmoothTerm::WeightedDifferences(terms) => {
                terms.iter().map(|t| t.weight * t.eval(x).abs()).sum()
            }
        }
    }

    pub fn subgradient(&self, x: &Array1<f64>) -> Array1<f64> {
        match self {
            NonsmoothTerm::Linear(c) => c.clone(),
            NonsmoothTerm::WeightedDifferences(terms) => {
                let mut g = Array1::zeros(x.len());
                for t in terms {
                    let s = t.eval(x).signum();
                    if let Some(i) = t.i {
                        g[i] += t.weight * s;
                    }
                    if let Some(j) = t.j {
                        g[j] -= t.weight * s;
                    }
                }
                g
            }
        }
    }
}

/// Smooth strongly-convex regularizer, exposing (value, gradient).
#[derive(Debug, Clone)]
pub enum SmoothTerm {
    /// g(x) = ½ xᵀQx + dᵀx + c0 with symmetric PSD Q
    Quadratic {
        q: Array2<f64>,
        d: Array1<f64>,
        c0: f64,
    },
    /// g(x) = ½ Σ a_i x_i² + Σ d_i x_i
    Diagonal { a: Array1<f64>, d: Array1<f64> },
}

impl SmoothTerm {
    pub fn diagonal(a: Array1<f64>) -> Self {
        let d = Array1::zeros(a.len());
        SmoothTerm::Diagonal { a, d }
    }

    pub fn value(&self, x: &Array1<f64>) -> f64 {
        match self {
            SmoothTerm::Quadratic { q, d, c0 } => 0.5 * x.dot(&q.dot(x)) + d.dot(x) + c0,
            SmoothTerm::Diagonal { a, d } => {
                0.5 * x.iter().zip(a).map(|(xi, ai)| ai * xi * xi).sum::<f64>() + d.dot(x)
            }
        }
    }

    pub fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        match self {
            SmoothTerm::Quadratic { q, d, .. } => q.dot(x) + d,
            SmoothTerm::Diagonal { a, d } => {
                Array1::from_iter(x.iter().zip(a).zip(d).map(|((xi, ai), di)| ai * xi + di))
            }
        }
    }
}

/// Composite strongly-convex program min_{x∈K} f(x) + g(x), with the strong
/// convexity modulus σ and smoothness modulus L of g.
#[derive(Debug, Clone)]
pub struct RegularizedProgram {
    pub dim: usize,
    pub f: NonsmoothTerm,
    pub g: SmoothTerm,
    pub sigma: f64,
    pub lsmooth: f64,
    pub projector: Projector,
}

impl RegularizedProgram {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.lsmooth >= self.sigma) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < sigma <= lsmooth, got sigma = {}, lsmooth = {}",
                self.sigma, self.lsmooth
            )));
        }
        if self.projector.dim() != self.dim {
            return Err(Error::InvalidParameter(
                "projector dimension mismatch".into(),
            ));
        }
        Ok(())
    }

    pub fn objective(&self, x: &Array1<f64>) -> f64 {
        self.f.value(x) + self.g.value(x)
    }
}

/// Solver output: the iterate, its composite objective, and convergence
/// diagnostics (`residual` is the last optimality residual seen).
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solve a program to tolerance `tol` from `x0`.
///
/// Dispatch: proximal gradient when the prox of f under K is cheap (linear f:
/// prox = projection of a shifted point), ADMM splitting for weighted
/// absolute differences. Non-convergence at the iteration cap yields
/// `converged = false`, not an error; NaN/∞ anywhere is an error.
pub fn solve(
    prog: &RegularizedProgram,
    x0: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    prog.validate()?;
    if x0.len() != prog.dim {
        return Err(Error::InvalidParameter("x0 dimension mismatch".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("x0 contains NaN/infinite entries".into()));
    }
    if prog.dim == 0 {
        let x = Array1::zeros(0);
        let objective = prog.objective(&x);
        return Ok(SolveResult {
            x,
            objective,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let res = match &prog.f {
        NonsmoothTerm::Linear(_) => pgm::solve_pgm(prog, x0, tol, max_iter)?,
        NonsmoothTerm::WeightedDifferences(_) => admm::solve_admm(prog, x0, tol, max_iter)?,
    };
    if !res.objective.is_finite() || res.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("solver produced NaN/infinite values".into()));
    }
    Ok(res)
}

/// Movement threshold of the convergence certificate: iterate movement must
/// stay below tol·max(1,σ)/L for this many consecutive iterations while the
/// optimality residual is below tol.
pub(crate) const QUIET_ITERS: usize = 5;

pub(crate) fn movement_threshold(prog: &RegularizedProgram, tol: f64) -> f64 {
    tol * prog.sigma.max(1.0) / prog.lsmooth
}

/// Empirical check of the gradient-step expansiveness bound: with step
/// η ≤ 1/L, the map x ↦ x − η∇g(x) contracts distances by at least (1 − ησ).
/// Returns the maximum observed ratio ‖G(x)−G(y)‖/‖x−y‖ over random pairs in
/// the domain.
pub fn gradient_step_expansiveness_check(
    g: &SmoothTerm,
    domain: &Projector,
    eta: f64,
    trials: usize,
    tape: &mut RandomTape,
) -> Result<f64> {
    let (lo, hi) = domain.sampling_box();
    let dim = lo.len();
    let sample = |tape: &mut RandomTape| -> Result<Array1<f64>> {
        let raw = Array1::from_iter(
            (0..dim).map(|i| lo[i] + (hi[i] - lo[i]) * tape.draw()),
        );
        domain.project(&raw, 1e-10)
    };
    let step = |x: &Array1<f64>| -> Array1<f64> { x - &(g.gradient(x) * eta) };
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let x = sample(tape)?;
        let y = sample(tape)?;
        let d = (&x - &y).dot(&(&x - &y)).sqrt();
        if d < 1e-12 {
            continue;
        }
        let gx = step(&x);
        let gy = step(&y);
        let dg = (&gx - &gy).dot(&(&gx - &gy)).sqrt();
        max_ratio = max_ratio.max(dg / d);
    }
    Ok(max_ratio)
}

#[cfg(test)]
mod tests;
