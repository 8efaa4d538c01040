//! Empirical stability measurement via coupled randomized runs.
//!
//! The pointwise Lipschitz constant of an algorithm is the EMD between its
//! output distributions on perturbed inputs, divided by the ℓ1 perturbation
//! size, in the small-perturbation limit. The EMD infimum over couplings is
//! not directly computable, but any explicit coupling upper-bounds it; the
//! default estimator runs both executions on one shared tape (common random
//! numbers) and averages the output distance. Exact EMD on enumerable output
//! distributions is available at small scale for cross-checks.

mod emd;
mod oracle;

pub use emd::{emd_exact, Atom};
pub use oracle::{mincut_exact, mincut_exact_with, ExactMethod};

pub use crate::sample::{coupled_exp_mech, exp_mech_probs, exp_mech_sample, stable_sample_uniform};

use crate::error::{Error, Result};
use crate::graph::{CutInstance, Perturbation, WeightedGraph};
use crate::matching::{auction_round, solve_matching_fractional, BMatching, MatchFractional};
use crate::mincut::{
    solve_fractional, CutExpmech, CutFractional, CutKway, CutNaive, CutResult,
};
use crate::pip::{round_pip, solve_pip_fractional, PipInstance, PipSolution};
use crate::spectral::lambda2;
use crate::tape::RandomTape;
use ndarray::Array1;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

/// Empirical slack constants multiplying the structural bound forms; see
/// `calibration.json` (calibrated once on a frozen seed set, asserted by the
/// calibration tests thereafter).
#[derive(Debug, Clone, Deserialize)]
pub struct Calibration {
    pub fractional_cut_slack: f64,
    pub expmech_cut_slack: f64,
    pub kway_cut_slack: f64,
    pub naive_cut_slack: f64,
    pub recourse_slack: f64,
}

pub static CALIBRATION: Lazy<Calibration> = Lazy::new(|| {
    serde_json::from_str(include_str!("calibration.json"))
        .expect("embedded calibration.json parses")
});

/// How two coupled executions source their randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapePolicy {
    /// Common random numbers: both runs read the identical stream.
    Shared,
    /// Independent streams (estimates a product coupling instead).
    Independent,
}

/// Algorithm under measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algo {
    CutFractional { eps: f64 },
    /// Exact minimum-cut oracle (deterministic; measured to demonstrate the
    /// instability lower bound of near-optimal algorithms).
    CutExact,
    CutExpmech { gamma: f64 },
    CutKway { beta: f64, gamma: f64 },
    CutNaive { lambda: f64 },
    MatchFractional { eps: f64 },
    MatchAuction { eps: f64 },
    PipFractional,
    PipRounded,
}

impl Algo {
    pub fn id(&self) -> String {
        match self {
            Algo::CutFractional { eps } => format!("cut_fractional(eps={eps})"),
            Algo::CutExact => "cut_exact".into(),
            Algo::CutExpmech { gamma } => format!("cut_expmech(gamma={gamma})"),
            Algo::CutKway { beta, gamma } => format!("cut_kway(beta={beta},gamma={gamma})"),
            Algo::CutNaive { lambda } => format!("cut_naive(lambda={lambda})"),
            Algo::MatchFractional { eps } => format!("match_fractional(eps={eps})"),
            Algo::MatchAuction { eps } => format!("match_auction(eps={eps})"),
            Algo::PipFractional => "pip_fractional".into(),
            Algo::PipRounded => "pip_rounded".into(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            Algo::CutFractional { .. }
                | Algo::CutExact
                | Algo::MatchFractional { .. }
                | Algo::PipFractional
        )
    }
}

/// Instance an algorithm runs on.
#[derive(Debug, Clone)]
pub enum Instance {
    Cut(CutInstance),
    Bipartite(WeightedGraph),
    Pip(PipInstance),
}

impl Instance {
    pub fn digest(&self) -> String {
        match self {
            Instance::Cut(i) => i.graph.digest(),
            Instance::Bipartite(g) => g.digest(),
            Instance::Pip(p) => p.digest(),
        }
    }

    pub fn coordinate_weight(&self, index: usize) -> Result<f64> {
        match self {
            Instance::Cut(i) => {
                if index >= i.graph.m() {
                    return Err(Error::InvalidParameter("edge index out of range".into()));
                }
                Ok(i.graph.weight(index))
            }
            Instance::Bipartite(g) => {
                if index >= g.m() {
                    return Err(Error::InvalidParameter("edge index out of range".into()));
                }
                Ok(g.weight(index))
            }
            Instance::Pip(p) => {
                if index >= p.m() {
                    return Err(Error::InvalidParameter("weight index out of range".into()));
                }
                Ok(p.w[index])
            }
        }
    }

    pub fn perturb(&self, pert: Perturbation) -> Result<Instance> {
        Ok(match self {
            Instance::Cut(i) => Instance::Cut(i.perturb(pert)?),
            Instance::Bipartite(g) => Instance::Bipartite(g.perturb(pert)?),
            Instance::Pip(p) => Instance::Pip(p.perturb(pert.edge, pert.delta)?),
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            Instance::Cut(i) => i.graph.weights().to_vec(),
            Instance::Bipartite(g) => g.weights().to_vec(),
            Instance::Pip(p) => p.w.clone(),
        }
    }

    pub fn with_weights(&self, w: Vec<f64>) -> Result<Instance> {
        Ok(match self {
            Instance::Cut(i) => Instance::Cut(i.with_weights(w)?),
            Instance::Bipartite(g) => Instance::Bipartite(g.with_weights(w)?),
            Instance::Pip(p) => {
                Instance::Pip(PipInstance::new(p.a.clone(), p.b.clone(), w, p.c)?)
            }
        })
    }
}

/// One execution's output, in the metric its theorem uses.
#[derive(Debug, Clone)]
pub enum RunOutput {
    Cut(CutResult),
    Matching { m: BMatching, weight: f64 },
    Pip(PipSolution),
    /// ℓ2 metric (fractional cut) or ℓ1 (fractional matching / PIP).
    Fractional { x: Array1<f64>, objective: f64, l2: bool },
}

impl RunOutput {
    pub fn distance(&self, other: &RunOutput) -> f64 {
        match (self, other) {
            (RunOutput::Cut(a), RunOutput::Cut(b)) => a.symmetric_difference(b) as f64,
            (RunOutput::Matching { m: a, .. }, RunOutput::Matching { m: b, .. }) => {
                a.symmetric_difference(b) as f64
            }
            (RunOutput::Pip(a), RunOutput::Pip(b)) => a.symmetric_difference(b) as f64,
            (
                RunOutput::Fractional { x: a, l2, .. },
                RunOutput::Fractional { x: b, .. },
            ) => {
                if *l2 {
                    (a - b).dot(&(a - b)).sqrt()
                } else {
                    a.iter().zip(b.iter()).map(|(p, q)| (p - q).abs()).sum()
                }
            }
            _ => f64::NAN,
        }
    }

    pub fn objective(&self) -> f64 {
        match self {
            RunOutput::Cut(c) => c.weight,
            RunOutput::Matching { weight, .. } => *weight,
            RunOutput::Pip(p) => p.value,
            RunOutput::Fractional { objective, .. } => *objective,
        }
    }

    pub fn feasible(&self) -> bool {
        match self {
            RunOutput::Cut(c) => c.feasible,
            RunOutput::Matching { .. } => true,
            RunOutput::Pip(p) => p.feasible,
            RunOutput::Fractional { .. } => true,
        }
    }
}

/// Algorithm with its per-instance preparation (fractional solves) done, so
/// that repeated rounding trials are cheap.
pub enum Prepared {
    CutFractional(CutInstance, CutFractional),
    CutExact(CutResult),
    CutExpmech(CutInstance, CutExpmech),
    CutKway(CutInstance, CutKway),
    CutNaive(CutInstance, CutNaive),
    MatchFractional(MatchFractional),
    MatchAuction(WeightedGraph, MatchFractional),
    PipFractional(Array1<f64>, f64),
    PipRounded(PipInstance, Array1<f64>),
}

impl Prepared {
    pub fn new(algo: &Algo, inst: &Instance, tol: f64) -> Result<Prepared> {
        match (algo, inst) {
            (Algo::CutFractional { eps }, Instance::Cut(ci)) => Ok(Prepared::CutFractional(
                ci.clone(),
                solve_fractional(ci, *eps, (-1.0, 1.0), tol)?,
            )),
            (Algo::CutExact, Instance::Cut(ci)) => Ok(Prepared::CutExact(mincut_exact(ci)?)),
            (Algo::CutExpmech { gamma }, Instance::Cut(ci)) => Ok(Prepared::CutExpmech(
                ci.clone(),
                CutExpmech::prepare(ci, *gamma, tol)?,
            )),
            (Algo::CutKway { beta, gamma }, Instance::Cut(ci)) => Ok(Prepared::CutKway(
                ci.clone(),
                CutKway::prepare(ci, *beta, *gamma, tol)?,
            )),
            (Algo::CutNaive { lambda }, Instance::Cut(ci)) => Ok(Prepared::CutNaive(
                ci.clone(),
                CutNaive::prepare(ci, *lambda, tol)?,
            )),
            (Algo::MatchFractional { eps }, Instance::Bipartite(g)) => Ok(
                Prepared::MatchFractional(solve_matching_fractional(g, *eps, tol)?),
            ),
            (Algo::MatchAuction { eps }, Instance::Bipartite(g)) => Ok(Prepared::MatchAuction(
                g.clone(),
                solve_matching_fractional(g, *eps, tol)?,
            )),
            (Algo::PipFractional, Instance::Pip(p)) => {
                let (x, _) = solve_pip_fractional(p, tol)?;
                let obj = x.dot(&Array1::from(p.w.clone()));
                Ok(Prepared::PipFractional(x, obj))
            }
            (Algo::PipRounded, Instance::Pip(p)) => {
                let (x, _) = solve_pip_fractional(p, tol)?;
                Ok(Prepared::PipRounded(p.clone(), x))
            }
            _ => Err(Error::AlgoMismatch(format!(
                "{} cannot run on this instance kind",
                algo.id()
            ))),
        }
    }

    pub fn run(&self, tape: &mut RandomTape) -> Result<RunOutput> {
        Ok(match self {
            Prepared::CutFractional(_, frac) => RunOutput::Fractional {
                x: frac.y.clone(),
                objective: frac.objective_f,
                l2: true,
            },
            Prepared::CutExact(cut) => RunOutput::Cut(cut.clone()),
            Prepared::CutExpmech(ci, prep) => RunOutput::Cut(prep.round(ci, tape)),
            Prepared::CutKway(ci, prep) => RunOutput::Cut(prep.round(ci, tape)),
            Prepared::CutNaive(ci, prep) => RunOutput::Cut(prep.round(ci, tape)),
            Prepared::MatchFractional(frac) => RunOutput::Fractional {
                x: frac.x.clone(),
                objective: frac.objective,
                l2: false,
            },
            Prepared::MatchAuction(g, frac) => {
                let m = auction_round(frac, g, tape)?;
                let weight = m.weight(g);
                RunOutput::Matching { m, weight }
            }
            Prepared::PipFractional(x, obj) => RunOutput::Fractional {
                x: x.clone(),
                objective: *obj,
                l2: false,
            },
            Prepared::PipRounded(p, x) => RunOutput::Pip(round_pip(x, p, tape)),
        })
    }

    /// Use one fractional solve for rounding trials; deterministic outputs
    /// need a single evaluation.
    pub fn needs_trials(&self) -> bool {
        !matches!(
            self,
            Prepared::CutFractional(..)
                | Prepared::CutExact(..)
                | Prepared::MatchFractional(..)
                | Prepared::PipFractional(..)
        )
    }
}

/// The structural stability bound from the relevant theorem, with the
/// calibrated slack constant folded in:
/// - fractional cut: slack / (ε λ2)        (ℓ2 metric)
/// - exponential-mechanism cut: slack · n / λ2
/// - k-way cut: slack · √n ln(1/γ) / (β² λ2)
/// - naive cut: slack · n / (2Λ)
/// - fractional matching: (2√m/w_min)(1+1/ε)  (proven constant, slack 1)
/// - auction matching: 2 · (2√m/w_min)(1+1/ε)
/// - fractional PIP: 4√m / w_min
/// - rounded PIP: 4√m / (w_min γ)
pub fn theory_bound(algo: &Algo, inst: &Instance) -> Result<Option<f64>> {
    let cal = &CALIBRATION;
    Ok(Some(match (algo, inst) {
        (Algo::CutFractional { eps }, Instance::Cut(ci)) => {
            let l2 = lambda2(&ci.graph, 1e-10)?;
            cal.fractional_cut_slack / (eps * l2)
        }
        (Algo::CutExpmech { .. }, Instance::Cut(ci)) => {
            let l2 = lambda2(&ci.graph, 1e-10)?;
            cal.expmech_cut_slack * ci.n() as f64 / l2
        }
        (Algo::CutKway { beta, gamma }, Instance::Cut(ci)) => {
            let l2 = lambda2(&ci.graph, 1e-10)?;
            cal.kway_cut_slack * (ci.n() as f64).sqrt() * (1.0 / gamma).ln()
                / (beta * beta * l2)
        }
        (Algo::CutNaive { lambda }, Instance::Cut(ci)) => {
            cal.naive_cut_slack * ci.n() as f64 / (2.0 * lambda)
        }
        (Algo::MatchFractional { eps }, Instance::Bipartite(g)) => {
            2.0 * (g.m() as f64).sqrt() / g.min_weight() * (1.0 + 1.0 / eps)
        }
        (Algo::MatchAuction { eps }, Instance::Bipartite(g)) => {
            4.0 * (g.m() as f64).sqrt() / g.min_weight() * (1.0 + 1.0 / eps)
        }
        (Algo::PipFractional, Instance::Pip(p)) => {
            let w_min = p.w.iter().cloned().fold(f64::INFINITY, f64::min);
            4.0 * (p.m() as f64).sqrt() / w_min
        }
        (Algo::PipRounded, Instance::Pip(p)) => {
            let w_min = p.w.iter().cloned().fold(f64::INFINITY, f64::min);
            4.0 * (p.m() as f64).sqrt() / (w_min * p.gamma())
        }
        // the exact oracle has no stability upper bound (that is the point
        // of the lower-bound experiment)
        (Algo::CutExact, Instance::Cut(_)) => return Ok(None),
        _ => return Err(Error::AlgoMismatch(algo.id())),
    }))
}

/// Per-experiment record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub algorithm: String,
    pub instance_digest: String,
    /// ℓ1 size of the perturbation.
    pub delta: f64,
    pub trials: usize,
    /// Mean output distance under the chosen coupling (ℓ2 for the fractional
    /// cut, ℓ1 for other fractional outputs, |Δ| for sets).
    pub mean_output_distance: f64,
    pub lipschitz_quotient: f64,
    pub feasibility_rate: f64,
    pub objective_mean: f64,
    pub objective_min: f64,
    pub objective_max: f64,
    pub theory_bound: Option<f64>,
    pub tape_policy: TapePolicy,
}

impl StabilityReport {
    pub fn check_invariants(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        let q = self.mean_output_distance / self.delta;
        if (q - self.lipschitz_quotient).abs() > 1e-9 * (1.0 + q.abs()) {
            return Err(Error::Numeric(
                "stored quotient does not equal distance/delta".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LipschitzOptions {
    pub trials: usize,
    pub policy: TapePolicy,
    pub master_seed: u64,
    pub solve_tol: f64,
    /// Reject perturbations with |delta| > max_rel_delta · w_e.
    pub max_rel_delta: f64,
    /// Worker threads fanning the trials (1 = sequential; results are
    /// identical for any value).
    pub jobs: usize,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        LipschitzOptions {
            trials: 1000,
            policy: TapePolicy::Shared,
            master_seed: 0,
            solve_tol: 1e-8,
            max_rel_delta: 1e-3,
            jobs: 1,
        }
    }
}

/// Estimate the pointwise Lipschitz quotient of `algo` at `inst` under a
/// single-coordinate perturbation, by coupled randomized runs.
pub fn estimate_lipschitz(
    algo: &Algo,
    inst: &Instance,
    pert: Perturbation,
    opts: &LipschitzOptions,
) -> Result<StabilityReport> {
    let (report, _) = estimate_lipschitz_with_rows(algo, inst, pert, opts)?;
    Ok(report)
}

/// Like [`estimate_lipschitz`] but also returning the per-trial rows (for
/// CSV emission).
pub fn estimate_lipschitz_with_rows(
    algo: &Algo,
    inst: &Instance,
    pert: Perturbation,
    opts: &LipschitzOptions,
) -> Result<(StabilityReport, Vec<TrialRow>)> {
    let w_e = inst.coordinate_weight(pert.edge)?;
    if pert.delta.abs() > opts.max_rel_delta * w_e * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "|delta| = {} exceeds {} · w_e = {}",
            pert.delta.abs(),
            opts.max_rel_delta,
            opts.max_rel_delta * w_e
        )));
    }
    if !algo.is_deterministic() && opts.trials < 100 {
        return Err(Error::InvalidParameter(
            "randomized algorithms need trials >= 100".into(),
        ));
    }
    let perturbed = inst.perturb(pert)?;
    let base = Prepared::new(algo, inst, opts.solve_tol)?;
    let other = Prepared::new(algo, &perturbed, opts.solve_tol)?;
    let rows = run_coupled_trials(
        &base,
        &other,
        opts.trials,
        opts.policy,
        opts.master_seed,
        opts.jobs,
    )?;
    let (mean, feasibility_rate, trials, (obj_mean, obj_min, obj_max)) = aggregate(&rows);
    let delta = pert.delta.abs();
    let report = StabilityReport {
        algorithm: algo.id(),
        instance_digest: inst.digest(),
        delta,
        trials,
        mean_output_distance: mean,
        lipschitz_quotient: mean / delta,
        feasibility_rate,
        objective_mean: obj_mean,
        objective_min: obj_min,
        objective_max: obj_max,
        theory_bound: theory_bound(algo, inst)?,
        tape_policy: opts.policy,
    };
    report.check_invariants()?;
    Ok((report, rows))
}

/// Quotients at relative δ ∈ {1e-2, 1e-3, 1e-4}; any finite-δ measurement
/// only approximates the limiting quotient, so trends are reported, not
/// asserted. `non_monotone` is set when the quotient sequence (by decreasing
/// δ) is neither non-increasing nor non-decreasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzScan {
    pub reports: Vec<StabilityReport>,
    pub non_monotone: bool,
}

pub fn lipschitz_scan(
    algo: &Algo,
    inst: &Instance,
    edge: usize,
    opts: &LipschitzOptions,
) -> Result<LipschitzScan> {
    let w_e = inst.coordinate_weight(edge)?;
    let mut reports = Vec::new();
    for rel in [1e-2, 1e-3, 1e-4] {
        let mut o = opts.clone();
        o.max_rel_delta = o.max_rel_delta.max(rel);
        reports.push(estimate_lipschitz(
            algo,
            inst,
            Perturbation::new(edge, rel * w_e),
            &o,
        )?);
    }
    let q: Vec<f64> = reports.iter().map(|r| r.lipschitz_quotient).collect();
    let nonincreasing = q.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let nondecreasing = q.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    Ok(LipschitzScan {
        reports,
        non_monotone: !(nonincreasing || nondecreasing),
    })
}

/// Componentwise-monotone weight path (each coordinate moves monotonically
/// from the first waypoint to the last).
#[derive(Debug, Clone)]
pub struct PerturbationPath {
    pub waypoints: Vec<Vec<f64>>,
}

impl PerturbationPath {
    /// Straight-line interpolation in `steps` steps (always monotone).
    pub fn linear(from: Vec<f64>, to: Vec<f64>, steps: usize) -> Result<Self> {
        if from.len() != to.len() {
            return Err(Error::InvalidParameter("endpoint dimension mismatch".into()));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("need at least one step".into()));
        }
        let waypoints = (0..=steps)
            .map(|k| {
                let r = k as f64 / steps as f64;
                from.iter()
                    .zip(&to)
                    .map(|(a, b)| a + (b - a) * r)
                    .collect()
            })
            .collect();
        Ok(PerturbationPath { waypoints })
    }

    pub fn from_waypoints(waypoints: Vec<Vec<f64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidParameter("need at least two waypoints".into()));
        }
        let path = PerturbationPath { waypoints };
        path.validate_monotone()?;
        Ok(path)
    }

    pub fn validate_monotone(&self) -> Result<()> {
        let dim = self.waypoints[0].len();
        for i in 0..dim {
            let first = self.waypoints[0][i];
            let mut prev_dev = 0.0;
            for wp in &self.waypoints[1..] {
                if wp.len() != dim {
                    return Err(Error::InvalidParameter("waypoint dimension mismatch".into()));
                }
                let dev = (wp[i] - first).abs();
                if dev < prev_dev - 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "coordinate {i} is not monotone along the path"
                    )));
                }
                prev_dev = dev;
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.waypoints.len() - 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub steps: Vec<StabilityReport>,
    /// max per-step quotient: the empirical c_sup of the path.
    pub c_sup_estimate: f64,
    pub total_step_distance: f64,
    pub end_to_end_distance: f64,
    pub end_to_end_l1: f64,
}

/// One coupled trial's outcome (the base run's objective and feasibility,
/// and the distance to the perturbed run).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub distance: f64,
    pub feasible: bool,
    pub objective: f64,
}

fn trial_tapes(policy: TapePolicy, master_seed: u64, t: usize) -> (RandomTape, RandomTape) {
    match policy {
        TapePolicy::Shared => (
            RandomTape::derive(master_seed, t as u64),
            RandomTape::derive(master_seed, t as u64),
        ),
        TapePolicy::Independent => (
            RandomTape::derive(master_seed, 2 * t as u64),
            RandomTape::derive(master_seed, 2 * t as u64 + 1),
        ),
    }
}

/// Run coupled trials, fanning across `jobs` workers. Trial t always owns the
/// tape derived from (master_seed, t), so the result is independent of the
/// worker count; rows are merged in trial order by a single aggregator.
pub fn run_coupled_trials(
    a: &Prepared,
    b: &Prepared,
    trials: usize,
    policy: TapePolicy,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<TrialRow>> {
    let trials = if a.needs_trials() { trials } else { 1 };
    let one = |t: usize| -> Result<TrialRow> {
        let (mut ta, mut tb) = trial_tapes(policy, master_seed, t);
        let oa = a.run(&mut ta)?;
        let ob = b.run(&mut tb)?;
        Ok(TrialRow {
            trial: t,
            distance: oa.distance(&ob),
            feasible: oa.feasible(),
            objective: oa.objective(),
        })
    };
    if jobs <= 1 || trials < 2 * jobs {
        return (0..trials).map(one).collect();
    }
    let chunk = trials.div_ceil(jobs);
    let mut rows: Vec<Vec<TrialRow>> = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for j in 0..jobs {
            let lo = j * chunk;
            let hi = ((j + 1) * chunk).min(trials);
            if lo >= hi {
                break;
            }
            handles.push(scope.spawn(move || (lo..hi).map(one).collect::<Result<Vec<_>>>()));
        }
        for h in handles {
            rows.push(h.join().expect("worker panicked")?);
        }
        Ok(())
    })?;
    Ok(rows.into_iter().flatten().collect())
}

fn aggregate(rows: &[TrialRow]) -> (f64, f64, usize, (f64, f64, f64)) {
    let trials = rows.len();
    let sum: f64 = rows.iter().map(|r| r.distance).sum();
    let feasible = rows.iter().filter(|r| r.feasible).count();
    let obj_sum: f64 = rows.iter().map(|r| r.objective).sum();
    let obj_min = rows.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    let obj_max = rows
        .iter()
        .map(|r| r.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    (
        sum / trials as f64,
        feasible as f64 / trials as f64,
        trials,
        (obj_sum / trials as f64, obj_min, obj_max),
    )
}

/// Mean coupled distance between two prepared executions.
fn coupled_distance(
    a: &Prepared,
    b: &Prepared,
    trials: usize,
    policy: TapePolicy,
    master_seed: u64,
) -> Result<(f64, f64, usize, (f64, f64, f64))> {
    let rows = run_coupled_trials(a, b, trials, policy, master_seed, 1)?;
    Ok(aggregate(&rows))
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Walk `algo` along a monotone weight path, measuring per-step coupled
/// distances. The per-step sum upper-bounds the end-to-end distance
/// (triangle inequality), which is also measured directly.
pub fn path_sweep(
    algo: &Algo,
    inst: &Instance,
    path: &PerturbationPath,
    trials_per_step: usize,
    opts: &LipschitzOptions,
) -> Result<SweepResult> {
    path.validate_monotone()?;
    let instances: Vec<Instance> = path
        .waypoints
        .iter()
        .map(|w| inst.with_weights(w.clone()))
        .collect::<Result<_>>()?;
    let prepared: Vec<Prepared> = instances
        .iter()
        .map(|i| Prepared::new(algo, i, opts.solve_tol))
        .collect::<Result<_>>()?;
    let mut steps = Vec::new();
    let mut total = 0.0;
    let mut c_sup: f64 = 0.0;
    for k in 0..path.steps() {
        let delta = l1(&path.waypoints[k], &path.waypoints[k + 1]);
        let (mean, feas, trials, (om, omin, omax)) = coupled_distance(
            &prepared[k],
            &prepared[k + 1],
            trials_per_step,
            opts.policy,
            opts.master_seed.wrapping_add(k as u64),
        )?;
        total += mean;
        let quotient = if delta > 0.0 { mean / delta } else { 0.0 };
        c_sup = c_sup.max(quotient);
        steps.push(StabilityReport {
            algorithm: algo.id(),
            instance_digest: instances[k].digest(),
            delta,
            trials,
            mean_output_distance: mean,
            lipschitz_quotient: quotient,
            feasibility_rate: feas,
            objective_mean: om,
            objective_min: omin,
            objective_max: omax,
            theory_bound: theory_bound(algo, &instances[k])?,
            tape_policy: opts.policy,
        });
    }
    let (end_to_end, _, _, _) = coupled_distance(
        &prepared[0],
        &prepared[path.steps()],
        trials_per_step,
        opts.policy,
        opts.master_seed,
    )?;
    Ok(SweepResult {
        steps,
        c_sup_estimate: c_sup,
        total_step_distance: total,
        end_to_end_distance: end_to_end,
        end_to_end_l1: l1(&path.waypoints[0], &path.waypoints[path.steps()]),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecourseStep {
    pub step: usize,
    /// ℓ1 weight change applied at this step.
    pub delta: f64,
    pub mean_recourse: f64,
    pub lambda2: f64,
    /// recourse per unit of weight change.
    pub quotient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecourseResult {
    pub algorithm: String,
    pub steps: Vec<RecourseStep>,
    pub total_recourse: f64,
    pub mean_quotient: f64,
    /// Calibrated n/λ2 reference (max over steps).
    pub recourse_bound: f64,
}

/// Dynamic re-run simulation: apply `updates` one at a time, re-running the
/// algorithm each step on the same tape (shared policy) and recording
/// |out_t Δ out_{t+1}|.
pub fn recourse_sim(
    algo: &Algo,
    inst: &Instance,
    updates: &[Perturbation],
    opts: &LipschitzOptions,
) -> Result<RecourseResult> {
    let mut instances = vec![inst.clone()];
    for (k, &u) in updates.iter().enumerate() {
        let next = instances.last().unwrap().perturb(u).map_err(|e| {
            Error::InvalidParameter(format!("update {k} rejected: {e}"))
        })?;
        instances.push(next);
    }
    let prepared: Vec<Prepared> = instances
        .iter()
        .map(|i| Prepared::new(algo, i, opts.solve_tol))
        .collect::<Result<_>>()?;
    let mut steps = Vec::new();
    let mut total = 0.0;
    let mut quotient_sum = 0.0;
    let mut bound: f64 = 0.0;
    for k in 0..updates.len() {
        let delta = updates[k].delta.abs();
        let (mean, _, _, _) = coupled_distance(
            &prepared[k],
            &prepared[k + 1],
            opts.trials,
            opts.policy,
            opts.master_seed,
        )?;
        let l2 = match &instances[k] {
            Instance::Cut(ci) => lambda2(&ci.graph, 1e-10)?,
            _ => f64::NAN,
        };
        total += mean;
        let quotient = if delta > 0.0 { mean / delta } else { 0.0 };
        quotient_sum += quotient;
        if let Instance::Cut(ci) = &instances[k] {
            bound = bound.max(CALIBRATION.recourse_slack * ci.n() as f64 / l2);
        }
        steps.push(RecourseStep {
            step: k,
            delta,
            mean_recourse: mean,
            lambda2: l2,
            quotient,
        });
    }
    Ok(RecourseResult {
        algorithm: algo.id(),
        total_recourse: total,
        mean_quotient: if updates.is_empty() {
            0.0
        } else {
            quotient_sum / updates.len() as f64
        },
        recourse_bound: bound,
        steps,
    })
}

/// Exact output distribution of the prepared naive-cut rounder (threshold
/// level sets with interval masses) — enumerable reference for EMD checks.
pub fn naive_cut_distribution(inst: &CutInstance, prep: &CutNaive) -> Vec<Atom> {
    let frac = &prep.frac;
    let mut cuts: Vec<f64> = frac.y.to_vec();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut atoms = Vec::new();
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0].max(0.0), seg[1].min(1.0));
        if hi <= lo {
            continue;
        }
        let tau = 0.5 * (lo + hi);
        let members: Vec<usize> = (0..inst.n()).filter(|&v| frac.y[v] <= tau).collect();
        atoms.push((members, hi - lo));
    }
    // merge equal sets
    let mut merged: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    for (set, p) in atoms {
        *merged.entry(set).or_insert(0.0) += p;
    }
    merged.into_iter().collect()
}

/// Same for threshold rounding of any fractional cut solution.
pub fn threshold_cut_distribution(inst: &CutInstance, frac: &CutFractional) -> Vec<Atom> {
    let (lo_box, hi_box) = frac.interval;
    let width = hi_box - lo_box;
    let mut cuts: Vec<f64> = frac.y.to_vec();
    cuts.push(lo_box);
    cuts.push(hi_box);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut merged: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0].max(lo_box), seg[1].min(hi_box));
        if hi <= lo {
            continue;
        }
        let tau = 0.5 * (lo + hi);
        let members: Vec<usize> = (0..inst.n()).filter(|&v| frac.y[v] <= tau).collect();
        *merged.entry(members).or_insert(0.0) += (hi - lo) / width;
    }
    merged.into_iter().collect()
}

/// Exact E_τ[cut(A_τ)] by enumerating threshold intervals (independent of the
/// objective_f identity; used to verify it).
pub fn expected_threshold_cut_by_enumeration(inst: &CutInstance, frac: &CutFractional) -> f64 {
    threshold_cut_distribution(inst, frac)
        .iter()
        .map(|(members, p)| {
            let mut side = vec![false; inst.n()];
            for &v in members {
                side[v] = true;
            }
            p * inst.graph.cut_weight(&side)
        })
        .sum()
}
