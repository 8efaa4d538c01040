//! Euclidean projections onto feasible regions.
//!
//! Two projector families cover every program in this crate:
//! [`ConstraintSet`] (box ∩ hyperplanes ∩ halfspaces, projected with Dykstra's
//! alternating scheme) and [`BoxSlab`] (box ∩ one sum interval, projected in
//! closed form by a breakpoint walk). Dykstra converges to the exact Euclidean
//! projection for intersections of closed convex sets; the box-slab projector
//! is exact by KKT.

use crate::error::{Error, Result};
use ndarray::Array1;

/// Intersection of a coordinate box, hyperplanes ⟨a,x⟩ = c and halfspaces
/// ⟨a,x⟩ ≤ c.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    /// Per-coordinate [lo, hi]; use ±infinity for unbounded coordinates.
    pub bounds: Vec<(f64, f64)>,
    pub hyperplanes: Vec<(Array1<f64>, f64)>,
    pub halfspaces: Vec<(Array1<f64>, f64)>,
}

impl ConstraintSet {
    pub fn box_only(bounds: Vec<(f64, f64)>) -> Self {
        ConstraintSet {
            bounds,
            hyperplanes: Vec::new(),
            halfspaces: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn set_count(&self) -> usize {
        1 + self.hyperplanes.len() + self.halfspaces.len()
    }

    pub fn clamp(&self, x: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .zip(&self.bounds)
                .map(|(&xi, &(lo, hi))| xi.max(lo).min(hi)),
        )
    }

    /// Largest constraint violation at `x` (normalized by ‖a‖ for rows).
    pub fn violation(&self, x: &Array1<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for (xi, &(lo, hi)) in x.iter().zip(&self.bounds) {
            v = v.max(lo - xi).max(xi - hi);
        }
        for (a, c) in &self.hyperplanes {
            let na = a.dot(a).sqrt().max(1e-300);
            v = v.max((a.dot(x) - c).abs() / na);
        }
        for (a, c) in &self.halfspaces {
            let na = a.dot(a).sqrt().max(1e-300);
            v = v.max((a.dot(x) - c) / na);
        }
        v
    }

    pub fn is_feasible(&self, x: &Array1<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// One Dykstra run from the origin; errors if the region looks empty.
    pub fn validate(&self) -> Result<()> {
        let origin = Array1::zeros(self.dim());
        dykstra_project(self, &origin, 1e-8, 0).map(|_| ())
    }
}

/// Dykstra's alternating projection algorithm.
///
/// `max_iter = 0` means the default cap of 10 · dim · set-count passes.
/// Returns a point feasible within `tol` that is the Euclidean projection of
/// `x0` within the same order of tolerance; a hit iteration cap yields a
/// non-convergence error carrying the last iterate.
pub fn dykstra_project(
    cs: &ConstraintSet,
    x0: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Array1<f64>> {
    if cs.hyperplanes.is_empty() && cs.halfspaces.is_empty() {
        return Ok(cs.clamp(x0));
    }
    let cap = if max_iter == 0 {
        10 * cs.dim().max(1) * cs.set_count()
    } else {
        max_iter
    };
    let sets = cs.set_count();
    let mut x = x0.clone();
    let mut corrections: Vec<Array1<f64>> = vec![Array1::zeros(cs.dim()); sets];
    let mut movement = f64::INFINITY;
    for _pass in 0..cap {
        movement = 0.0;
        for (s, p) in corrections.iter_mut().enumerate() {
            let y = &x + &*p;
            let projected = if s == 0 {
                cs.clamp(&y)
            } else if s - 1 < cs.hyperplanes.len() {
                let (a, c) = &cs.hyperplanes[s - 1];
                project_hyperplane(&y, a, *c)
            } else {
                let (a, c) = &cs.halfspaces[s - 1 - cs.hyperplanes.len()];
                project_halfspace(&y, a, *c)
            };
            *p = &y - &projected;
            movement += (&projected - &x).dot(&(&projected - &x));
            x = projected;
        }
        if movement.sqrt() <= tol * 0.1 && cs.is_feasible(&x, tol) {
            return Ok(x);
        }
    }
    // a cap exit is acceptable only when the final pass had stalled anyway
    if cs.is_feasible(&x, tol) && movement.sqrt() <= tol {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        iterations: cap,
        residual: cs.violation(&x).max(movement.sqrt()),
        last: x.to_vec(),
    })
}

pub fn project_hyperplane(x: &Array1<f64>, a: &Array1<f64>, c: f64) -> Array1<f64> {
    let na2 = a.dot(a);
    if na2 == 0.0 {
        return x.clone();
    }
    let shift = (c - a.dot(x)) / na2;
    x + &(a * shift)
}

pub fn project_halfspace(x: &Array1<f64>, a: &Array1<f64>, c: f64) -> Array1<f64> {
    let val = a.dot(x);
    if val <= c {
        return x.clone();
    }
    project_hyperplane(x, a, c)
}

/// Box ∩ {sum_lo ≤ Σx ≤ sum_hi} with a closed-form projection.
#[derive(Debug, Clone)]
pub struct BoxSlab {
    pub lo: Array1<f64>,
    pub hi: Array1<f64>,
    pub sum_lo: f64,
    pub sum_hi: f64,
}

impl BoxSlab {
    pub fn new(lo: Array1<f64>, hi: Array1<f64>, sum_lo: f64, sum_hi: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidParameter("box bound length mismatch".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) || sum_lo > sum_hi {
            return Err(Error::InvalidParameter("empty box or slab".into()));
        }
        let min_sum: f64 = lo.sum();
        let max_sum: f64 = hi.sum();
        if max_sum < sum_lo - 1e-12 || min_sum > sum_hi + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "box sums [{min_sum}, {max_sum}] do not meet slab [{sum_lo}, {sum_hi}]"
            )));
        }
        Ok(BoxSlab { lo, hi, sum_lo, sum_hi })
    }

    pub fn cube(dim: usize) -> Self {
        BoxSlab {
            lo: Array1::zeros(dim),
            hi: Array1::ones(dim),
            sum_lo: f64::NEG_INFINITY,
            sum_hi: f64::INFINITY,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn clamp_shifted(&self, x: &Array1<f64>, t: f64) -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .map(|(&xi, (&l, &h))| (xi - t).max(l).min(h)),
        )
    }

    /// Exact Euclidean projection: clamp, and if the sum constraint binds,
    /// shift by the multiplier t solving Σ clamp(x − t) = bound, found by a
    /// walk over the sorted breakpoints {x_i − hi_i, x_i − lo_i}.
    pub fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        let clamped = self.clamp_shifted(x, 0.0);
        let s: f64 = clamped.sum();
        let target = if s > self.sum_hi {
            self.sum_hi
        } else if s < self.sum_lo {
            self.sum_lo
        } else {
            return clamped;
        };
        let t = self.solve_shift(x, target);
        self.clamp_shifted(x, t)
    }

    /// Find t with Σ_i clamp(x_i − t) = target. φ(t) is continuous, piecewise
    /// linear and nonincreasing; walk its kinks.
    fn solve_shift(&self, x: &Array1<f64>, target: f64) -> f64 {
        let mut kinks: Vec<f64> = Vec::with_capacity(2 * x.len());
        for (&xi, (&l, &h)) in x.iter().zip(self.lo.iter().zip(self.hi.iter())) {
            if l.is_finite() {
                kinks.push(xi - l);
            }
            if h.is_finite() {
                kinks.push(xi - h);
            }
        }
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup();
        let phi = |t: f64| -> f64 { self.clamp_shifted(x, t).sum() };
        // locate the segment [kink_j, kink_{j+1}] containing the target value
        let mut lo_idx = None;
        for (j, &t) in kinks.iter().enumerate() {
            if phi(t) <= target {
                lo_idx = Some(j);
                break;
            }
        }
        let (t_lo, t_hi) = match lo_idx {
            Some(0) => return kinks[0],
            Some(j) => (kinks[j - 1], kinks[j]),
            // target below every kink value: φ stays at Σlo, return last kink
            None => return *kinks.last().unwrap_or(&0.0),
        };
        // φ is linear on [t_lo, t_hi]
        let (p_lo, p_hi) = (phi(t_lo), phi(t_hi));
        if (p_lo - p_hi).abs() < 1e-300 {
            return t_lo;
        }
        t_lo + (p_lo - target) / (p_lo - p_hi) * (t_hi - t_lo)
    }

    pub fn violation(&self, x: &Array1<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for (xi, (&l, &h)) in x.iter().zip(self.lo.iter().zip(self.hi.iter())) {
            v = v.max(l - xi).max(xi - h);
        }
        let s: f64 = x.sum();
        let scale = (self.dim() as f64).sqrt().max(1.0);
        if self.sum_lo.is_finite() {
            v = v.max((self.sum_lo - s) / scale);
        }
        if self.sum_hi.is_finite() {
            v = v.max((s - self.sum_hi) / scale);
        }
        v
    }
}

/// The projection backend a program carries.
#[derive(Debug, Clone)]
pub enum Projector {
    Sets(ConstraintSet),
    BoxSlab(BoxSlab),
}

impl Projector {
    pub fn dim(&self) -> usize {
        match self {
            Projector::Sets(cs) => cs.dim(),
            Projector::BoxSlab(bs) => bs.dim(),
        }
    }

    pub fn project(&self, x: &Array1<f64>, tol: f64) -> Result<Array1<f64>> {
        match self {
            Projector::Sets(cs) => dykstra_project(cs, x, tol, 0),
            Projector::BoxSlab(bs) => Ok(bs.project(x)),
        }
    }

    pub fn violation(&self, x: &Array1<f64>) -> f64 {
        match self {
            Projector::Sets(cs) => cs.violation(x),
            Projector::BoxSlab(bs) => bs.violation(x),
        }
    }

    /// A point of K to sample around, and per-coordinate ranges for sampling.
    pub fn sampling_box(&self) -> (Array1<f64>, Array1<f64>) {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            Projector::Sets(cs) => cs
                .bounds
                .iter()
                .map(|&(l, h)| (if l.is_finite() { l } else { -1.0 }, if h.is_finite() { h } else { 1.0 }))
                .unzip(),
            Projector::BoxSlab(bs) => bs
                .lo
                .iter()
                .zip(bs.hi.iter())
                .map(|(&l, &h)| (if l.is_finite() { l } else { -1.0 }, if h.is_finite() { h } else { 1.0 }))
                .unzip(),
        };
        (Array1::from(lo), Array1::from(hi))
    }
}
