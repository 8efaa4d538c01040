//! Packing integer programs: regularized relaxation plus scaled independent
//! rounding.
//!
//! The relaxation maximizes wᵀx − ½ Σ w_i x_i² over [0,1]^m ∩ {Ax ≤ b} (the
//! ½ coefficient is fixed — the 2-approximation depends on it). Rounding
//! scales the fractional optimum down by γ = e(cp)^{1/B} and rounds each
//! coordinate independently: y_i = 1 iff τ_i ≤ x*_i/γ with per-coordinate
//! uniforms τ_i consumed in index order (the identity coupling on the τ_i is
//! the shared-randomness contract).

use crate::error::{Error, Result};
use crate::mincut::SolveDiagnostics;
use crate::solver::{solve, ConstraintSet, NonsmoothTerm, Projector, RegularizedProgram, SmoothTerm};
use crate::tape::RandomTape;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// A packing instance: A ∈ [0,1]^{p×m}, budgets b ≥ 1, weights w > 0 and the
/// feasibility-confidence parameter c ≥ 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipInstance {
    /// Row-major constraint matrix, p rows of length m.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
    pub c: f64,
}

impl PipInstance {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, w: Vec<f64>, c: f64) -> Result<Self> {
        let inst = PipInstance { a, b, w, c };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.a.len();
        let m = self.w.len();
        if self.b.len() != p {
            return Err(Error::InvalidParameter(format!(
                "{} budget entries for {p} constraint rows",
                self.b.len()
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one variable".into()));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidParameter(format!(
                    "constraint row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!(
                    "constraint row {i} leaves [0,1]"
                )));
            }
        }
        if self.b.iter().any(|&v| !(v >= 1.0)) {
            return Err(Error::InvalidParameter(
                "budgets must satisfy B >= 1 (every b_j >= 1)".into(),
            ));
        }
        if self.w.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        if !(self.c >= 1.0) {
            return Err(Error::InvalidParameter("c must be >= 1".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    /// B := min_j b_j (1 when there are no constraint rows).
    pub fn min_budget(&self) -> f64 {
        if self.b.is_empty() {
            1.0
        } else {
            self.b.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    }

    /// Scaling factor γ = e (cp)^{1/B}.
    pub fn gamma(&self) -> f64 {
        let p = self.p().max(1) as f64;
        std::f64::consts::E * (self.c * p).powf(1.0 / self.min_budget())
    }

    pub fn value(&self, y: &[bool]) -> f64 {
        y.iter()
            .zip(&self.w)
            .filter(|(on, _)| **on)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn is_feasible(&self, y: &[bool]) -> bool {
        self.a.iter().zip(&self.b).all(|(row, &cap)| {
            let load: f64 = row
                .iter()
                .zip(y)
                .filter(|(_, on)| **on)
                .map(|(a, _)| a)
                .sum();
            load <= cap + 1e-9
        })
    }

    /// Perturb one weight coordinate.
    pub fn perturb(&self, index: usize, delta: f64) -> Result<Self> {
        if index >= self.m() {
            return Err(Error::InvalidParameter("weight index out of range".into()));
        }
        let mut w = self.w.clone();
        w[index] += delta;
        PipInstance::new(self.a.clone(), self.b.clone(), w, self.c)
    }

    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for row in &self.a {
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for v in self.b.iter().chain(&self.w) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.c.to_bits().to_le_bytes());
        let out = h.finalize();
        out[..8].iter().map(|x| format!("{x:02x}")).collect()
    }
}

/// Rounded packing solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PipSolution {
    pub y: Vec<bool>,
    pub value: f64,
    pub feasible: bool,
}

impl PipSolution {
    pub fn from_assignment(inst: &PipInstance, y: Vec<bool>) -> Self {
        let value = inst.value(&y);
        let feasible = inst.is_feasible(&y);
        PipSolution { y, value, feasible }
    }

    pub fn symmetric_difference(&self, other: &PipSolution) -> usize {
        self.y
            .iter()
            .zip(&other.y)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Solve the regularized packing relaxation. The optimum is a 2-approximation
/// to the packing LP value, and a single-weight δ-perturbation moves it by
/// O(√m |δ|/w_min) in ℓ1.
pub fn solve_pip_fractional(inst: &PipInstance, tol: f64) -> Result<(Array1<f64>, SolveDiagnostics)> {
    inst.validate()?;
    let m = inst.m();
    let w = Array1::from(inst.w.clone());
    let halfspaces = inst
        .a
        .iter()
        .zip(&inst.b)
        .map(|(row, &cap)| (Array1::from(row.clone()), cap))
        .collect();
    let w_min = inst.w.iter().cloned().fold(f64::INFINITY, f64::min);
    let w_max = inst.w.iter().cloned().fold(0.0_f64, f64::max);
    let prog = RegularizedProgram {
        dim: m,
        f: NonsmoothTerm::Linear(-&w),
        g: SmoothTerm::diagonal(w.clone()),
        sigma: w_min / 2.0,
        lsmooth: 2.0 * w_max,
        projector: Projector::Sets(ConstraintSet {
            bounds: vec![(0.0, 1.0); m],
            hyperplanes: vec![],
            halfspaces,
        }),
    };
    let res = solve(&prog, &Array1::zeros(m), tol, 400_000)?;
    if !res.converged {
        return Err(Error::NonConvergence {
            iterations: res.iterations,
            residual: res.residual,
            last: res.x.to_vec(),
        });
    }
    let diag = SolveDiagnostics::from(&res);
    Ok((res.x, diag))
}

/// Scaled independent rounding: y_i ~ Bernoulli(x_i/γ) via per-coordinate
/// tape thresholds in index order. E[wᵀy] = wᵀx*/γ and the output is
/// feasible with probability at least 1 − 1/c.
pub fn round_pip(x: &Array1<f64>, inst: &PipInstance, tape: &mut RandomTape) -> PipSolution {
    let gamma = inst.gamma();
    let y: Vec<bool> = x.iter().map(|&xi| tape.draw() <= xi / gamma).collect();
    PipSolution::from_assignment(inst, y)
}

/// Exhaustive packing optimum (test oracle, m ≤ 22).
pub fn pip_exact_small(inst: &PipInstance) -> Result<PipSolution> {
    let m = inst.m();
    if m > 22 {
        return Err(Error::OracleSize(format!(
            "exact PIP oracle capped at m = 22, got {m}"
        )));
    }
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1u32 << m) {
        let y: Vec<bool> = (0..m).map(|i| mask & (1 << i) != 0).collect();
        if !inst.is_feasible(&y) {
            continue;
        }
        let v = inst.value(&y);
        if best.map(|(bv, _)| v > bv).unwrap_or(true) {
            best = Some((v, mask));
        }
    }
    let (_, mask) = best.ok_or_else(|| Error::Numeric("no feasible assignment".into()))?;
    let y: Vec<bool> = (0..m).map(|i| mask & (1 << i) != 0).collect();
    Ok(PipSolution::from_assignment(inst, y))
}

/// Incidence-matrix view of a bipartite b-matching instance as a packing
/// program (rows = vertices with incident edges, columns = edges).
pub fn pip_from_bmatching(g: &crate::graph::WeightedGraph, c: f64) -> Result<PipInstance> {
    let m = g.m();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for v in 0..g.n() {
        let incident = g.neighbors(v);
        if incident.is_empty() {
            continue;
        }
        let mut row = vec![0.0; m];
        for (_, e) in incident {
            row[e] = 1.0;
        }
        a.push(row);
        b.push(g.capacity(v) as f64);
    }
    PipInstance::new(a, b, g.weights().to_vec(), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::solve_matching_fractional;
    use approx::assert_abs_diff_eq;

    fn tiny(c: f64) -> PipInstance {
        PipInstance::new(vec![vec![1.0]], vec![1.0], vec![1.0], c).unwrap()
    }

    #[test]
    fn gamma_spot_value() {
        // (c, p, B) = (1, 1, 1): γ = e exactly
        assert_abs_diff_eq!(tiny(1.0).gamma(), std::f64::consts::E, epsilon = 0.0);
    }

    #[test]
    fn validation_rejects_bad_instances() {
        assert!(PipInstance::new(vec![vec![1.0]], vec![0.5], vec![1.0], 1.0).is_err());
        assert!(PipInstance::new(vec![vec![1.5]], vec![1.0], vec![1.0], 1.0).is_err());
        assert!(PipInstance::new(vec![vec![0.5]], vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(PipInstance::new(vec![vec![0.5]], vec![1.0], vec![1.0], 0.5).is_err());
    }

    #[test]
    fn single_variable_fractional() {
        // minimize -w x + (w/2) x² over [0,1] ∩ {x <= 1}: x* = 1
        let inst = tiny(1.0);
        let (x, _) = solve_pip_fractional(&inst, 1e-10).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn weight_scaling_leaves_argmin_unchanged() {
        let a = vec![vec![0.5, 1.0, 0.2], vec![1.0, 0.3, 0.8]];
        let b = vec![1.0, 1.5];
        let w = vec![1.0, 2.0, 0.7];
        let inst1 = PipInstance::new(a.clone(), b.clone(), w.clone(), 2.0).unwrap();
        let scaled = w.iter().map(|v| v * 3.7).collect();
        let inst2 = PipInstance::new(a, b, scaled, 2.0).unwrap();
        let (x1, _) = solve_pip_fractional(&inst1, 1e-10).unwrap();
        let (x2, _) = solve_pip_fractional(&inst2, 1e-10).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(x1[i], x2[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn matches_matching_module_on_incidence_instance() {
        // the b-matching incidence PIP with the matching module at ε = 1 is
        // the same strictly convex program; the optima must agree
        let mut tape = RandomTape::new(4);
        let g = crate::graph::random_bipartite_graph(3, 3, 0.7, 0.5, 2.0, 16, &mut tape).unwrap();
        let pip = pip_from_bmatching(&g, 1.0).unwrap();
        let (x_pip, _) = solve_pip_fractional(&pip, 1e-10).unwrap();
        let frac = solve_matching_fractional(&g, 1.0, 1e-10).unwrap();
        for e in 0..g.m() {
            assert_abs_diff_eq!(x_pip[e], frac.x[e], epsilon = 1e-6);
        }
    }

    #[test]
    fn rounding_examples() {
        let inst = tiny(1.0);
        // x* ≡ 0 rounds to the all-zero feasible solution
        let zero = Array1::zeros(1);
        let mut tape = RandomTape::new(9);
        for _ in 0..50 {
            let sol = round_pip(&zero, &inst, &mut tape);
            assert!(!sol.y[0]);
            assert!(sol.feasible);
            assert_eq!(sol.value, 0.0);
        }
        // m = 1, x* = 1, γ = e: P(y = 1) = 1/e
        let one = Array1::ones(1);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| round_pip(&one, &inst, &mut tape).y[0])
            .count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 1.0 / std::f64::consts::E).abs() < 0.004, "rate {rate}");
    }

    #[test]
    fn oracle_trivial_cases() {
        let inst = tiny(1.0);
        let sol = pip_exact_small(&inst).unwrap();
        assert_eq!(sol.y, vec![true]);
        // all-slack budget: y ≡ 1
        let inst =
            PipInstance::new(vec![vec![0.3, 0.3, 0.3]], vec![2.0], vec![1.0, 2.0, 3.0], 1.0)
                .unwrap();
        let sol = pip_exact_small(&inst).unwrap();
        assert_eq!(sol.y, vec![true, true, true]);
        assert_abs_diff_eq!(sol.value, 6.0);
    }

    #[test]
    fn oracle_random_instance_beats_greedy() {
        let mut tape = RandomTape::new(6);
        let a: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| tape.draw()).collect())
            .collect();
        let b = vec![1.0, 1.3, 2.0];
        let w: Vec<f64> = (0..5).map(|_| 0.5 + tape.draw()).collect();
        let inst = PipInstance::new(a, b, w, 1.0).unwrap();
        let sol = pip_exact_small(&inst).unwrap();
        assert!(sol.feasible);
        // greedy by weight is never better than the oracle
        let mut greedy = vec![false; 5];
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&i, &j| inst.w[j].partial_cmp(&inst.w[i]).unwrap());
        for i in order {
            greedy[i] = true;
            if !inst.is_feasible(&greedy) {
                greedy[i] = false;
            }
        }
        assert!(sol.value >= inst.value(&greedy) - 1e-12);
    }

    #[test]
    fn feasibility_rate_and_mean_value() {
        let mut tape = RandomTape::new(8);
        let a: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..8).map(|_| tape.draw()).collect())
            .collect();
        let b = vec![1.0, 2.0, 1.5, 1.0];
        let w: Vec<f64> = (0..8).map(|_| 0.5 + 1.5 * tape.draw()).collect();
        let c = 2.0;
        let inst = PipInstance::new(a, b, w, c).unwrap();
        let (x, _) = solve_pip_fractional(&inst, 1e-9).unwrap();
        let gamma = inst.gamma();
        let expect = x.dot(&Array1::from(inst.w.clone())) / gamma;
        let trials = 50_000;
        let mut feasible = 0usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..trials {
            let sol = round_pip(&x, &inst, &mut tape);
            feasible += sol.feasible as usize;
            sum += sol.value;
            sq += sol.value * sol.value;
        }
        let rate = feasible as f64 / trials as f64;
        let rate_sem = (rate * (1.0 - rate) / trials as f64).sqrt();
        assert!(
            rate >= 1.0 - 1.0 / c - 3.0 * rate_sem,
            "feasibility {rate} below 1 - 1/c"
        );
        let mean = sum / trials as f64;
        let sem = ((sq / trials as f64 - mean * mean).max(0.0) / trials as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * sem,
            "mean value {mean} vs wᵀx*/γ = {expect} (sem {sem})"
        );
    }

    #[test]
    fn identity_coupled_rounding_distance() {
        // E|y Δ ỹ| = ‖x/γ − x̃/γ‖₁ exactly in expectation
        let a = vec![vec![0.6, 0.8, 0.1, 0.9], vec![0.2, 0.5, 1.0, 0.4]];
        let b = vec![1.0, 1.4];
        let w = vec![1.0, 0.8, 1.2, 0.9];
        let inst = PipInstance::new(a, b, w, 2.0).unwrap();
        let inst2 = inst.perturb(2, 0.05).unwrap();
        let (x1, _) = solve_pip_fractional(&inst, 1e-10).unwrap();
        let (x2, _) = solve_pip_fractional(&inst2, 1e-10).unwrap();
        let gamma = inst.gamma();
        let l1_scaled: f64 = x1
            .iter()
            .zip(x2.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / gamma;
        let trials = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for t in 0..trials {
            let mut t1 = RandomTape::derive(77, t);
            let mut t2 = RandomTape::derive(77, t);
            let y1 = round_pip(&x1, &inst, &mut t1);
            let y2 = round_pip(&x2, &inst2, &mut t2);
            let d = y1.symmetric_difference(&y2) as f64;
            sum += d;
            sq += d * d;
        }
        let mean = sum / trials as f64;
        let sem = ((sq / trials as f64 - mean * mean).max(0.0) / trials as f64).sqrt();
        assert!(
            (mean - l1_scaled).abs() <= 3.0 * sem + 1e-9,
            "coupled distance {mean:.5} vs exact {l1_scaled:.5} (sem {sem:.5})"
        );
    }
}
