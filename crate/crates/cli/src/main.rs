//! lipgraph: stability-preserving graph algorithms and their measurement.
//!
//! Every subcommand requires an explicit `--seed` (reproducibility is the
//! product; there is no silent entropy source) and two runs with identical
//! configuration produce byte-identical report bodies. Verbosity is
//! controlled by the `LIPGRAPH_LOG` environment variable.

mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lipgraph::graph::{
    lower_bound_instance, random_bipartite_graph, random_connected_graph, CutInstance,
    Perturbation, WeightedGraph,
};
use lipgraph::harness::{
    estimate_lipschitz_with_rows, lipschitz_scan, path_sweep, recourse_sim, Algo, Instance,
    LipschitzOptions, PerturbationPath, TapePolicy,
};
use lipgraph::io::{read_instance, write_instance, InstanceFile};
use lipgraph::matching::{auction_round, solve_matching_fractional};
use lipgraph::mincut::{solve_fractional, CutExpmech, CutKway, CutNaive};
use lipgraph::pip::{round_pip, solve_pip_fractional, PipInstance};
use lipgraph::{Error, RandomTape};
use report::*;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "lipgraph", version, about = "Pointwise-Lipschitz graph algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum S-T cut via regularized relaxations and stable rounding
    Mincut(MincutArgs),
    /// Maximum-weight bipartite b-matching with auction rounding
    #[command(name = "match")]
    Match(MatchArgs),
    /// Packing integer program with scaled independent rounding
    Pip(PipArgs),
    /// Coupled-run pointwise Lipschitz estimation
    Stability(StabilityArgs),
    /// Dynamic re-run recourse simulation
    Recourse(RecourseArgs),
    /// Perturbation-path sweep between two weight vectors
    Sweep(SweepArgs),
    /// Instance generators (including the lower-bound construction)
    Gen(GenArgs),
    /// Validate and pretty-print an instance or report file
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct OutArgs {
    /// Report format
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
    /// Write the report here instead of stdout
    #[arg(long)]
    out_file: Option<PathBuf>,
}

impl OutArgs {
    fn emit(&self, json: String, csv: Option<String>) -> Result<(), Error> {
        let body = match self.out {
            OutFormat::Json => json,
            OutFormat::Csv => csv.ok_or_else(|| {
                Error::InvalidParameter("this subcommand has no CSV form".into())
            })?,
        };
        match &self.out_file {
            Some(p) => std::fs::write(p, body)?,
            None => print!("{body}"),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CutAlgoName {
    Expmech,
    Kway,
    Naive,
    Fractional,
}

#[derive(Args)]
struct MincutArgs {
    /// Instance file (text or JSON) with a `cut S: ... / T: ...` block
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: CutAlgoName,
    /// Regularization strength for --algo fractional
    #[arg(long)]
    eps: Option<f64>,
    /// Failure probability for --algo expmech / kway (1/gamma integral for expmech)
    #[arg(long)]
    gamma: Option<f64>,
    /// Balancedness for --algo kway
    #[arg(long)]
    beta: Option<f64>,
    /// Regularization strength for --algo naive
    #[arg(long)]
    lambda: Option<f64>,
    /// Solver tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Tape seed (required; reproducibility is the product)
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct MatchArgs {
    /// Bipartite instance file
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    eps: f64,
    /// `default` (capacities from the instance, 1 otherwise) or a path to a
    /// capacity file with `v b` lines
    #[arg(long, default_value = "default")]
    b: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PipArgs {
    /// JSON instance {a, b, w, c}
    #[arg(long)]
    instance: PathBuf,
    /// Override the instance's feasibility-confidence parameter c >= 1
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AlgoArgs {
    /// Algorithm under measurement
    #[arg(long, value_enum)]
    algo: HarnessAlgoName,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HarnessAlgoName {
    CutFractional,
    CutExact,
    CutExpmech,
    CutKway,
    CutNaive,
    MatchFractional,
    MatchAuction,
    PipFractional,
    PipRounded,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyName {
    Shared,
    Independent,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Perturbed coordinate (edge index, or weight index for PIP)
    #[arg(long, default_value_t = 0)]
    edge: usize,
    /// Perturbation as a fraction of the coordinate's weight
    #[arg(long, default_value_t = 1e-3)]
    delta_rel: f64,
    /// Absolute perturbation (overrides --delta-rel)
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = PolicyName::Shared)]
    policy: PolicyName,
    /// Measure at relative deltas 1e-2, 1e-3, 1e-4 and flag non-monotone trends
    #[arg(long)]
    scan: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RecourseArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Number of random ±delta updates
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    delta_rel: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = PolicyName::Shared)]
    policy: PolicyName,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Instance with the target weight vector (same topology)
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    trials_per_step: usize,
    #[arg(long, value_enum, default_value_t = PolicyName::Shared)]
    policy: PolicyName,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Random,
    Bipartite,
    Lowerbound,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Vertex count (random, lowerbound)
    #[arg(long)]
    n: Option<usize>,
    /// Extra edges beyond the spanning tree (random; default n)
    #[arg(long)]
    extra: Option<usize>,
    /// Left/right sizes (bipartite)
    #[arg(long)]
    left: Option<usize>,
    #[arg(long)]
    right: Option<usize>,
    /// Edge probability (bipartite)
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 0.5)]
    w_lo: f64,
    #[arg(long, default_value_t = 2.0)]
    w_hi: f64,
    /// Weights snap to a dyadic grid with this many steps
    #[arg(long, default_value_t = 16)]
    grid: usize,
    /// Approximation constant C of the lower-bound construction
    #[arg(long, default_value_t = 1.0)]
    capprox: f64,
    /// Additive-error function value f(n) of the lower-bound construction
    #[arg(long, default_value_t = 4.0)]
    f_n: f64,
    /// Attach a `cut` block (S = {0}, T = {n-1}) to random instances
    #[arg(long)]
    with_cut: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_file: PathBuf,
    /// Second weight vector of the lower-bound pair
    #[arg(long)]
    out_tilde: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    path: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LIPGRAPH_LOG")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } | Error::Numeric(_) => 3,
                Error::Io(_) | Error::Json(_) => 1,
                _ => 2,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Mincut(a) => cmd_mincut(a),
        Command::Match(a) => cmd_match(a),
        Command::Pip(a) => cmd_pip(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Recourse(a) => cmd_recourse(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn instance_meta(g: &WeightedGraph) -> InstanceMeta {
    InstanceMeta {
        digest: g.digest(),
        n: g.n(),
        m: g.m(),
    }
}

fn load_cut_instance(path: &Path) -> Result<CutInstance, Error> {
    let file = read_instance(path)?;
    if file.cut.is_none() {
        return Err(Error::InvalidParameter(format!(
            "{}: cut algorithms need a `cut S: ... / T: ...` block",
            path.display()
        )));
    }
    file.to_cut_instance()
}

fn load_bipartite(path: &Path, caps: &str) -> Result<WeightedGraph, Error> {
    let file = read_instance(path)?;
    let g = file.to_graph()?;
    if g.bipartite_u_size().is_none() {
        return Err(Error::InvalidParameter(format!(
            "{}: matching needs a bipartite instance (header `n m bipartite U`)",
            path.display()
        )));
    }
    if caps == "default" {
        return Ok(g);
    }
    let mut full = vec![1u64; g.n()];
    for (lineno, line) in std::fs::read_to_string(caps)?.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::Parse {
            line: lineno + 1,
            msg: format!("capacity line must be `v b`, got `{s}`"),
        };
        if toks.len() != 2 {
            return Err(bad());
        }
        let v: usize = toks[0].parse().map_err(|_| bad())?;
        let b: u64 = toks[1].parse().map_err(|_| bad())?;
        if v >= g.n() {
            return Err(bad());
        }
        full[v] = b;
    }
    WeightedGraph::with_structure(
        g.n(),
        g.edges().to_vec(),
        g.weights().to_vec(),
        g.bipartite_u_size(),
        Some(full),
    )
}

fn load_pip(path: &Path, c_override: Option<f64>) -> Result<PipInstance, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut inst: PipInstance = serde_json::from_str(&text)?;
    if let Some(c) = c_override {
        inst.c = c;
    }
    inst.validate()?;
    Ok(inst)
}

fn cmd_mincut(a: MincutArgs) -> Result<(), Error> {
    let inst = load_cut_instance(&a.instance)?;
    let mut tape = RandomTape::new(a.seed);
    let need = |opt: Option<f64>, name: &str| {
        opt.ok_or_else(|| Error::InvalidParameter(format!("--algo requires --{name}")))
    };
    let (algo_name, fractional, cut) = match a.algo {
        CutAlgoName::Fractional => {
            let eps = need(a.eps, "eps")?;
            let frac = solve_fractional(&inst, eps, (-1.0, 1.0), a.tol)?;
            (
                "fractional".to_string(),
                Some(FractionalSummary {
                    objective_f: frac.objective_f,
                    reg_param: frac.epsilon,
                    interval: frac.interval,
                    y: frac.y.to_vec(),
                    iterations: frac.diagnostics.iterations,
                    residual: frac.diagnostics.residual,
                }),
                None,
            )
        }
        CutAlgoName::Expmech => {
            let gamma = need(a.gamma, "gamma")?;
            let prep = CutExpmech::prepare(&inst, gamma, a.tol)?;
            let cut = prep.round(&inst, &mut tape);
            (
                "expmech".to_string(),
                None,
                Some(CutSummary {
                    members: cut.members,
                    weight: cut.weight,
                    feasible: cut.feasible,
                }),
            )
        }
        CutAlgoName::Kway => {
            let beta = need(a.beta, "beta")?;
            let gamma = need(a.gamma, "gamma")?;
            let prep = CutKway::prepare(&inst, beta, gamma, a.tol)?;
            let cut = prep.round(&inst, &mut tape);
            (
                "kway".to_string(),
                None,
                Some(CutSummary {
                    members: cut.members,
                    weight: cut.weight,
                    feasible: cut.feasible,
                }),
            )
        }
        CutAlgoName::Naive => {
            let lambda = need(a.lambda, "lambda")?;
            let prep = CutNaive::prepare(&inst, lambda, a.tol)?;
            let cut = prep.round(&inst, &mut tape);
            (
                "naive".to_string(),
                Some(FractionalSummary {
                    objective_f: prep.frac.objective_f,
                    reg_param: prep.lambda,
                    interval: prep.frac.interval,
                    y: prep.frac.y.to_vec(),
                    iterations: prep.frac.diagnostics.iterations,
                    residual: prep.frac.diagnostics.residual,
                }),
                Some(CutSummary {
                    members: cut.members,
                    weight: cut.weight,
                    feasible: cut.feasible,
                }),
            )
        }
    };
    let report = MincutReport {
        seed: a.seed,
        algo: algo_name,
        instance: instance_meta(&inst.graph),
        params: serde_json::json!({
            "eps": a.eps, "gamma": a.gamma, "beta": a.beta, "lambda": a.lambda, "tol": a.tol,
        }),
        fractional,
        cut,
    };
    let csv = mincut_csv(&report);
    a.out.emit(Report::MincutReport(report).to_json(), Some(csv))
}

/// Deterministic fan-out of indexed trials across workers; results merge in
/// index order, so worker count never changes output.
fn parallel_trials<T: Send>(
    trials: usize,
    jobs: usize,
    f: impl Fn(usize) -> Result<T, Error> + Sync,
) -> Result<Vec<T>, Error> {
    if jobs <= 1 || trials < 2 * jobs {
        return (0..trials).map(f).collect();
    }
    let chunk = trials.div_ceil(jobs);
    let mut out: Vec<Vec<T>> = Vec::new();
    std::thread::scope(|scope| -> Result<(), Error> {
        let mut handles = Vec::new();
        for j in 0..jobs {
            let lo = j * chunk;
            let hi = ((j + 1) * chunk).min(trials);
            if lo >= hi {
                break;
            }
            let f = &f;
            handles.push(scope.spawn(move || (lo..hi).map(f).collect::<Result<Vec<T>, _>>()));
        }
        for h in handles {
            out.push(h.join().expect("worker panicked")?);
        }
        Ok(())
    })?;
    Ok(out.into_iter().flatten().collect())
}

fn cmd_match(a: MatchArgs) -> Result<(), Error> {
    let g = load_bipartite(&a.instance, &a.b)?;
    let frac = solve_matching_fractional(&g, a.eps, a.tol)?;
    let rows_feas = parallel_trials(a.trials, a.jobs, |t| {
        let mut tape = RandomTape::derive(a.seed, t as u64);
        let m = auction_round(&frac, &g, &mut tape)?;
        let weight = m.weight(&g);
        let feasible = m.respects_capacities(&g);
        Ok((
            MatchTrialRow {
                trial: t,
                weight,
                edges: m.edges,
            },
            feasible,
        ))
    })?;
    let feasible_count = rows_feas.iter().filter(|(_, f)| *f).count();
    let rows: Vec<MatchTrialRow> = rows_feas.into_iter().map(|(r, _)| r).collect();
    let mean: f64 = rows.iter().map(|r| r.weight).sum::<f64>() / a.trials.max(1) as f64;
    let var: f64 = rows
        .iter()
        .map(|r| (r.weight - mean).powi(2))
        .sum::<f64>()
        / a.trials.max(1) as f64;
    let sem = (var / a.trials.max(1) as f64).sqrt();
    let sample = MatchTrialRow {
        trial: 0,
        weight: rows.first().map(|r| r.weight).unwrap_or(0.0),
        edges: rows.first().map(|r| r.edges.clone()).unwrap_or_default(),
    };
    let report = MatchReport {
        seed: a.seed,
        instance: instance_meta(&g),
        eps: a.eps,
        trials: a.trials,
        fractional_objective: frac.objective,
        fractional_x: frac.x.to_vec(),
        mean_rounded_weight: mean,
        sem,
        capacity_feasibility_rate: feasible_count as f64 / a.trials.max(1) as f64,
        sample,
    };
    let csv = match_csv(&rows);
    a.out.emit(Report::MatchReport(report).to_json(), Some(csv))
}

fn cmd_pip(a: PipArgs) -> Result<(), Error> {
    let inst = load_pip(&a.instance, a.c)?;
    let (x, _) = solve_pip_fractional(&inst, a.tol)?;
    let gamma = inst.gamma();
    let rows = parallel_trials(a.trials, a.jobs, |t| {
        let mut tape = RandomTape::derive(a.seed, t as u64);
        let sol = round_pip(&x, &inst, &mut tape);
        Ok((t, sol.value, sol.feasible, sol.y))
    })?;
    let mean: f64 = rows.iter().map(|r| r.1).sum::<f64>() / a.trials.max(1) as f64;
    let var: f64 = rows.iter().map(|r| (r.1 - mean).powi(2)).sum::<f64>() / a.trials.max(1) as f64;
    let feasibility = rows.iter().filter(|r| r.2).count() as f64 / a.trials.max(1) as f64;
    let frac_value: f64 = x.iter().zip(&inst.w).map(|(xi, wi)| xi * wi).sum();
    let report = PipReport {
        seed: a.seed,
        instance_digest: inst.digest(),
        p: inst.p(),
        m: inst.m(),
        c: inst.c,
        gamma,
        trials: a.trials,
        fractional_x: x.to_vec(),
        fractional_value: frac_value,
        scaled_expectation: frac_value / gamma,
        mean_value: mean,
        sem: (var / a.trials.max(1) as f64).sqrt(),
        feasibility_rate: feasibility,
        sample_y: rows.first().map(|r| r.3.clone()).unwrap_or_default(),
    };
    let csv = pip_csv(&rows.iter().map(|r| (r.0, r.1, r.2)).collect::<Vec<_>>());
    a.out.emit(Report::PipReport(report).to_json(), Some(csv))
}

fn resolve_algo(a: &AlgoArgs) -> Result<Algo, Error> {
    let need = |opt: Option<f64>, name: &str| {
        opt.ok_or_else(|| Error::InvalidParameter(format!("--algo requires --{name}")))
    };
    Ok(match a.algo {
        HarnessAlgoName::CutFractional => Algo::CutFractional {
            eps: need(a.eps, "eps")?,
        },
        HarnessAlgoName::CutExact => Algo::CutExact,
        HarnessAlgoName::CutExpmech => Algo::CutExpmech {
            gamma: need(a.gamma, "gamma")?,
        },
        HarnessAlgoName::CutKway => Algo::CutKway {
            beta: need(a.beta, "beta")?,
            gamma: need(a.gamma, "gamma")?,
        },
        HarnessAlgoName::CutNaive => Algo::CutNaive {
            lambda: need(a.lambda, "lambda")?,
        },
        HarnessAlgoName::MatchFractional => Algo::MatchFractional {
            eps: need(a.eps, "eps")?,
        },
        HarnessAlgoName::MatchAuction => Algo::MatchAuction {
            eps: need(a.eps, "eps")?,
        },
        HarnessAlgoName::PipFractional => Algo::PipFractional,
        HarnessAlgoName::PipRounded => Algo::PipRounded,
    })
}

fn load_harness_instance(algo: &Algo, path: &Path) -> Result<Instance, Error> {
    Ok(match algo {
        Algo::CutFractional { .. }
        | Algo::CutExact
        | Algo::CutExpmech { .. }
        | Algo::CutKway { .. }
        | Algo::CutNaive { .. } => Instance::Cut(load_cut_instance(path)?),
        Algo::MatchFractional { .. } | Algo::MatchAuction { .. } => {
            Instance::Bipartite(load_bipartite(path, "default")?)
        }
        Algo::PipFractional | Algo::PipRounded => Instance::Pip(load_pip(path, None)?),
    })
}

fn policy(p: PolicyName) -> TapePolicy {
    match p {
        PolicyName::Shared => TapePolicy::Shared,
        PolicyName::Independent => TapePolicy::Independent,
    }
}

fn cmd_stability(a: StabilityArgs) -> Result<(), Error> {
    let algo = resolve_algo(&a.algo)?;
    let inst = load_harness_instance(&algo, &a.instance)?;
    let opts = LipschitzOptions {
        trials: a.trials,
        policy: policy(a.policy),
        master_seed: a.seed,
        solve_tol: a.tol,
        max_rel_delta: a.delta_rel.max(1e-3),
        jobs: a.jobs,
    };
    if a.scan {
        let scan = lipschitz_scan(&algo, &inst, a.edge, &opts)?;
        let report = StabilityJson {
            seed: a.seed,
            edge: a.edge,
            report: None,
            scan: Some(scan),
        };
        return a
            .out
            .emit(Report::StabilityReport(report).to_json(), None);
    }
    let delta = match a.delta {
        Some(d) => d,
        None => a.delta_rel * inst.coordinate_weight(a.edge)?,
    };
    let (rep, rows) =
        estimate_lipschitz_with_rows(&algo, &inst, Perturbation::new(a.edge, delta), &opts)?;
    let csv = stability_csv(&rows);
    let report = StabilityJson {
        seed: a.seed,
        edge: a.edge,
        report: Some(rep),
        scan: None,
    };
    a.out
        .emit(Report::StabilityReport(report).to_json(), Some(csv))
}

fn cmd_recourse(a: RecourseArgs) -> Result<(), Error> {
    let algo = resolve_algo(&a.algo)?;
    let inst = load_harness_instance(&algo, &a.instance)?;
    // random ±delta update stream from a dedicated tape; signs flip to +
    // when a decrease would cross the weight floor
    let mut stream_tape = RandomTape::derive(a.seed, u64::MAX / 2);
    let mut weights = inst.weights();
    let mut updates = Vec::with_capacity(a.steps);
    for _ in 0..a.steps {
        let e = ((stream_tape.draw() * weights.len() as f64) as usize).min(weights.len() - 1);
        let mut delta = a.delta_rel * weights[e];
        if stream_tape.draw() < 0.5 && weights[e] - delta > lipgraph::WEIGHT_FLOOR {
            delta = -delta;
        }
        weights[e] += delta;
        updates.push(Perturbation::new(e, delta));
    }
    let opts = LipschitzOptions {
        trials: a.trials,
        policy: policy(a.policy),
        master_seed: a.seed,
        solve_tol: a.tol,
        max_rel_delta: a.delta_rel.max(1e-3),
        jobs: a.jobs,
    };
    let result = recourse_sim(&algo, &inst, &updates, &opts)?;
    let csv = recourse_csv(&result);
    let report = RecourseJson {
        seed: a.seed,
        steps: a.steps,
        result,
    };
    a.out
        .emit(Report::RecourseReport(report).to_json(), Some(csv))
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Error> {
    let algo = resolve_algo(&a.algo)?;
    let inst = load_harness_instance(&algo, &a.instance)?;
    let target = read_instance(&a.target)?.to_graph()?;
    let from = inst.weights();
    if target.m() != from.len() {
        return Err(Error::InvalidParameter(
            "target instance must have the same topology".into(),
        ));
    }
    let path = PerturbationPath::linear(from, target.weights().to_vec(), a.steps)?;
    let opts = LipschitzOptions {
        trials: a.trials_per_step,
        policy: policy(a.policy),
        master_seed: a.seed,
        solve_tol: a.tol,
        max_rel_delta: 1e-3,
        jobs: a.jobs,
    };
    let result = path_sweep(&algo, &inst, &path, a.trials_per_step, &opts)?;
    let csv = sweep_csv(&result);
    let report = SweepJson {
        seed: a.seed,
        result,
    };
    a.out.emit(Report::SweepReport(report).to_json(), Some(csv))
}

fn cmd_gen(a: GenArgs) -> Result<(), Error> {
    let mut tape = RandomTape::new(a.seed);
    match a.kind {
        GenKind::Random => {
            let n = a
                .n
                .ok_or_else(|| Error::InvalidParameter("--kind random needs --n".into()))?;
            let g = random_connected_graph(n, a.extra.unwrap_or(n), a.w_lo, a.w_hi, a.grid, &mut tape)?;
            let cut: Option<(Vec<usize>, Vec<usize>)> =
                a.with_cut.then(|| (vec![0], vec![n - 1]));
            write_instance(
                &a.out_file,
                &g,
                cut.as_ref().map(|(s, t)| (s.as_slice(), t.as_slice())),
            )?;
        }
        GenKind::Bipartite => {
            let left = a
                .left
                .ok_or_else(|| Error::InvalidParameter("--kind bipartite needs --left".into()))?;
            let right = a
                .right
                .ok_or_else(|| Error::InvalidParameter("--kind bipartite needs --right".into()))?;
            let g = random_bipartite_graph(left, right, a.density, a.w_lo, a.w_hi, a.grid, &mut tape)?;
            write_instance(&a.out_file, &g, None)?;
        }
        GenKind::Lowerbound => {
            let n = a
                .n
                .ok_or_else(|| Error::InvalidParameter("--kind lowerbound needs --n".into()))?;
            let (inst, w_tilde) = lower_bound_instance(n, a.capprox, a.f_n)?;
            write_instance(
                &a.out_file,
                &inst.graph,
                Some((inst.s_set(), inst.t_set())),
            )?;
            let tilde_path = a.out_tilde.ok_or_else(|| {
                Error::InvalidParameter("--kind lowerbound needs --out-tilde".into())
            })?;
            let g_tilde = inst.graph.with_weights(w_tilde)?;
            write_instance(&tilde_path, &g_tilde, Some((inst.s_set(), inst.t_set())))?;
        }
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&a.path)?;
    // reports are tagged JSON objects
    if text.trim_start().starts_with('{') && text.contains("\"kind\"") {
        let report: Report = serde_json::from_str(&text)?;
        println!("valid {}", report.summary());
        return Ok(());
    }
    let file = lipgraph::io::parse_instance_str(&text, text.trim_start().starts_with('{'))?;
    println!("{}", describe_instance(&file)?);
    Ok(())
}

fn describe_instance(file: &InstanceFile) -> Result<String, Error> {
    let g = file.to_graph()?;
    let mut out = format!(
        "valid instance: n = {}, m = {}, weights in [{:?}, {:?}], digest {}",
        g.n(),
        g.m(),
        g.min_weight(),
        g.max_weight(),
        g.digest()
    );
    if let Some(us) = g.bipartite_u_size() {
        out.push_str(&format!(", bipartite (|U| = {us})"));
    }
    if g.capacities().is_some() {
        out.push_str(", capacities present");
    }
    if let Some(cut) = &file.cut {
        out.push_str(&format!(", cut terminals |S| = {}, |T| = {}", cut.s.len(), cut.t.len()));
    }
    Ok(out)
}
