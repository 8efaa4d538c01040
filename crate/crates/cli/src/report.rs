//! Report bodies emitted by the CLI.
//!
//! Every JSON report carries a `kind` tag so `lipgraph validate` can
//! re-parse it; CSV bodies start with a versioned header comment so
//! downstream scripts notice schema changes instead of breaking silently.

use lipgraph::harness::{LipschitzScan, RecourseResult, StabilityReport, SweepResult, TrialRow};
use serde::{Deserialize, Serialize};

pub const CSV_VERSION: &str = "lipgraph-csv v1";

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub digest: String,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FractionalSummary {
    pub objective_f: f64,
    pub reg_param: f64,
    pub interval: (f64, f64),
    pub y: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CutSummary {
    pub members: Vec<usize>,
    pub weight: f64,
    pub feasible: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MincutReport {
    pub seed: u64,
    pub algo: String,
    pub instance: InstanceMeta,
    pub params: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractional: Option<FractionalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<CutSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchTrialRow {
    pub trial: usize,
    pub weight: f64,
    pub edges: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchReport {
    pub seed: u64,
    pub instance: InstanceMeta,
    pub eps: f64,
    pub trials: usize,
    pub fractional_objective: f64,
    pub fractional_x: Vec<f64>,
    pub mean_rounded_weight: f64,
    pub sem: f64,
    pub capacity_feasibility_rate: f64,
    pub sample: MatchTrialRow,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PipReport {
    pub seed: u64,
    pub instance_digest: String,
    pub p: usize,
    pub m: usize,
    pub c: f64,
    pub gamma: f64,
    pub trials: usize,
    pub fractional_x: Vec<f64>,
    pub fractional_value: f64,
    pub scaled_expectation: f64,
    pub mean_value: f64,
    pub sem: f64,
    pub feasibility_rate: f64,
    pub sample_y: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StabilityJson {
    pub seed: u64,
    pub edge: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<LipschitzScan>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecourseJson {
    pub seed: u64,
    pub steps: usize,
    pub result: RecourseResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepJson {
    pub seed: u64,
    pub result: SweepResult,
}

/// Tagged envelope, the unit `lipgraph validate` re-parses.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    MincutReport(MincutReport),
    MatchReport(MatchReport),
    PipReport(PipReport),
    StabilityReport(StabilityJson),
    RecourseReport(RecourseJson),
    SweepReport(SweepJson),
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        match self {
            Report::MincutReport(r) => format!(
                "mincut report: algo {}, instance {} (n={}, m={}){}",
                r.algo,
                r.instance.digest,
                r.instance.n,
                r.instance.m,
                r.cut
                    .as_ref()
                    .map(|c| format!(", cut weight {:?} feasible {}", c.weight, c.feasible))
                    .unwrap_or_default()
            ),
            Report::MatchReport(r) => format!(
                "match report: instance {}, eps {:?}, mean rounded weight {:?} over {} trials",
                r.instance.digest, r.eps, r.mean_rounded_weight, r.trials
            ),
            Report::PipReport(r) => format!(
                "pip report: instance {}, gamma {:?}, feasibility {:?}, mean value {:?}",
                r.instance_digest, r.gamma, r.feasibility_rate, r.mean_value
            ),
            Report::StabilityReport(r) => {
                let q = r
                    .report
                    .as_ref()
                    .map(|x| x.lipschitz_quotient)
                    .or_else(|| {
                        r.scan
                            .as_ref()
                            .and_then(|s| s.reports.last().map(|x| x.lipschitz_quotient))
                    });
                format!(
                    "stability report: edge {}, quotient {:?}",
                    r.edge,
                    q.unwrap_or(f64::NAN)
                )
            }
            Report::RecourseReport(r) => format!(
                "recourse report: {} steps, total recourse {:?}",
                r.result.steps.len(),
                r.result.total_recourse
            ),
            Report::SweepReport(r) => format!(
                "sweep report: {} steps, c_sup {:?}",
                r.result.steps.len(),
                r.result.c_sup_estimate
            ),
        }
    }
}

fn csv_header(kind: &str, columns: &str) -> String {
    format!("# {CSV_VERSION} {kind}\n{columns}\n")
}

pub fn mincut_csv(r: &MincutReport) -> String {
    let mut s = csv_header("mincut", "algo,digest,weight,feasible,members");
    if let Some(c) = &r.cut {
        let members: Vec<String> = c.members.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!(
            "{},{},{:?},{},{}\n",
            r.algo,
            r.instance.digest,
            c.weight,
            c.feasible,
            members.join("|")
        ));
    }
    if let Some(f) = &r.fractional {
        s.push_str(&format!(
            "# fractional objective {:?} over interval [{:?},{:?}]\n",
            f.objective_f, f.interval.0, f.interval.1
        ));
    }
    s
}

pub fn match_csv(rows: &[MatchTrialRow]) -> String {
    let mut s = csv_header("match", "trial,weight,edges");
    for r in rows {
        let edges: Vec<String> = r.edges.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{},{:?},{}\n", r.trial, r.weight, edges.join("|")));
    }
    s
}

pub fn pip_csv(rows: &[(usize, f64, bool)]) -> String {
    let mut s = csv_header("pip", "trial,value,feasible");
    for (t, v, f) in rows {
        s.push_str(&format!("{t},{v:?},{f}\n"));
    }
    s
}

pub fn stability_csv(rows: &[TrialRow]) -> String {
    let mut s = csv_header("stability", "trial,distance,feasible,objective");
    for r in rows {
        s.push_str(&format!(
            "{},{:?},{},{:?}\n",
            r.trial, r.distance, r.feasible, r.objective
        ));
    }
    s
}

pub fn recourse_csv(r: &RecourseResult) -> String {
    let mut s = csv_header("recourse", "step,delta,mean_recourse,lambda2,quotient");
    for step in &r.steps {
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            step.step, step.delta, step.mean_recourse, step.lambda2, step.quotient
        ));
    }
    s
}

pub fn sweep_csv(r: &SweepResult) -> String {
    let mut s = csv_header(
        "sweep",
        "step,delta,mean_distance,quotient,feasibility_rate,objective_mean",
    );
    for (k, step) in r.steps.iter().enumerate() {
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?}\n",
            k,
            step.delta,
            step.mean_output_distance,
            step.lipschitz_quotient,
            step.feasibility_rate,
            step.objective_mean
        ));
    }
    s
}
