use super::*;
use crate::tape::RandomTape;
use approx::assert_abs_diff_eq;
use ndarray::array;

fn one_var_program(w: f64, eps: f64) -> RegularizedProgram {
    // f(x) = -w x, g(x) = (eps/2) w x², K = [0,1]
    RegularizedProgram {
        dim: 1,
        f: NonsmoothTerm::Linear(array![-w]),
        g: SmoothTerm::diagonal(array![eps * w]),
        sigma: eps * w / 2.0,
        lsmooth: 2.0 * eps * w,
        projector: Projector::Sets(ConstraintSet::box_only(vec![(0.0, 1.0)])),
    }
}

#[test]
fn one_variable_clipped_minimizer() {
    // unconstrained minimizer 1/eps = 2 clipped to the box -> x* = 1
    let prog = one_var_program(1.0, 0.5);
    let res = solve(&prog, &array![0.3], 1e-10, 100_000).unwrap();
    assert!(res.converged);
    assert_abs_diff_eq!(res.x[0], 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(res.objective, -1.0 + 0.25, epsilon = 1e-8);
}

#[test]
fn pure_quadratic_goes_to_zero() {
    // f ≡ 0, g = ||x||²/2 over [0,1]^4 -> x* = 0 from anywhere
    let prog = RegularizedProgram {
        dim: 4,
        f: NonsmoothTerm::Linear(Array1::zeros(4)),
        g: SmoothTerm::diagonal(Array1::ones(4)),
        sigma: 1.0,
        lsmooth: 1.0,
        projector: Projector::Sets(ConstraintSet::box_only(vec![(0.0, 1.0); 4])),
    };
    let res = solve(&prog, &array![0.9, 0.1, 1.0, 0.5], 1e-10, 100_000).unwrap();
    assert!(res.converged);
    for i in 0..4 {
        assert_abs_diff_eq!(res.x[i], 0.0, epsilon = 1e-8);
    }
}

/// Empirical Assumption-1 constants for a pair of programs differing in one
/// weight coordinate, measured on random feasible points.
fn measure_c_d(
    prog: &RegularizedProgram,
    prog_tilde: &RegularizedProgram,
    delta: f64,
    tape: &mut RandomTape,
) -> (f64, f64) {
    let l = prog.lsmooth;
    let (lo, hi) = prog.projector.sampling_box();
    let mut c_max: f64 = 0.0;
    let mut d_max: f64 = 0.0;
    for _ in 0..200 {
        let raw = Array1::from_iter((0..prog.dim).map(|i| lo[i] + (hi[i] - lo[i]) * tape.draw()));
        let x = prog.projector.project(&raw, 1e-10).unwrap();
        let dg = &prog.g.gradient(&x) - &prog_tilde.g.gradient(&x);
        c_max = c_max.max(dg.dot(&dg).sqrt() / (l * delta.abs()));
        // prox difference for linear f: prox(x) = P(x - c/L)
        let (ca, cb) = match (&prog.f, &prog_tilde.f) {
            (NonsmoothTerm::Linear(a), NonsmoothTerm::Linear(b)) => (a, b),
            _ => panic!("linear programs expected"),
        };
        let pa = prog.projector.project(&(&x - &(ca / l)), 1e-10).unwrap();
        let pb = prog.projector.project(&(&x - &(cb / l)), 1e-10).unwrap();
        let dp = (&pa - &pb).dot(&(&pa - &pb)).sqrt();
        d_max = d_max.max(dp / delta.abs());
    }
    (c_max, d_max)
}

#[test]
fn perturbed_pair_within_trajectory_bound() {
    // two single-variable programs with a small weight perturbation:
    // ||x* - x̃*|| <= (L(C+D)/sigma)|delta| with C, D measured empirically
    let mut tape = RandomTape::new(5);
    let eps = 2.0; // interior optimum 1/eps = 0.5 so the constraint is slack
    let delta = 1e-3;
    let a = one_var_program(1.0, eps);
    let b = one_var_program(1.0 + delta, eps);
    let (c_meas, d_meas) = measure_c_d(&a, &b, delta, &mut tape);
    let xa = solve(&a, &array![0.2], 1e-11, 200_000).unwrap();
    let xb = solve(&b, &array![0.8], 1e-11, 200_000).unwrap();
    let dist = (xa.x[0] - xb.x[0]).abs();
    let bound = a.lsmooth * (c_meas + d_meas) / a.sigma * delta;
    assert!(
        dist <= bound + 1e-8,
        "distance {dist} exceeds trajectory bound {bound}"
    );
}

#[test]
fn dykstra_non_convergence_carries_iterate() {
    let cs = ConstraintSet {
        bounds: vec![(0.0, 1.0); 3],
        hyperplanes: vec![(array![1.0, 1.0, 1.0], 1.5)],
        halfspaces: vec![(array![1.0, -1.0, 0.0], 0.2)],
    };
    // one pass is not enough to satisfy tol=0 exactly -> must error with iterate
    match dykstra_project(&cs, &array![5.0, -3.0, 2.0], 0.0, 1) {
        Err(crate::error::Error::NonConvergence { last, .. }) => assert_eq!(last.len(), 3),
        other => panic!("expected NonConvergence, got {other:?}"),
    }
}

#[test]
fn expansiveness_quadratic_identity_step() {
    // g quadratic with sigma = L = 1, eta = 1: gradient step maps everything
    // to the minimizer, ratio 0
    let g = SmoothTerm::diagonal(Array1::ones(3));
    let domain = Projector::Sets(ConstraintSet::box_only(vec![(-1.0, 1.0); 3]));
    let mut tape = RandomTape::new(1);
    let r = gradient_step_expansiveness_check(&g, &domain, 1.0, 500, &mut tape).unwrap();
    assert!(r <= 1e-12, "ratio {r}");
}

#[test]
fn expansiveness_anisotropic_quadratic() {
    // g(x) = ½ xᵀ diag(1,2) x, eta = 0.5: ratio = 1 - eta*sigma = 0.5
    let g = SmoothTerm::diagonal(array![1.0, 2.0]);
    let domain = Projector::Sets(ConstraintSet::box_only(vec![(-1.0, 1.0); 2]));
    let mut tape = RandomTape::new(2);
    let r = gradient_step_expansiveness_check(&g, &domain, 0.5, 2000, &mut tape).unwrap();
    assert!(r <= 0.5 + 1e-10, "ratio {r}");
    assert!(r >= 0.5 - 0.05, "ratio {r} should approach 0.5");
}

#[test]
fn expansiveness_sigma_equals_l_limit() {
    let g = SmoothTerm::diagonal(Array1::from_elem(4, 3.0));
    let domain = Projector::Sets(ConstraintSet::box_only(vec![(-2.0, 2.0); 4]));
    let mut tape = RandomTape::new(3);
    let r = gradient_step_expansiveness_check(&g, &domain, 1.0 / 3.0, 500, &mut tape).unwrap();
    assert!(r <= 1e-10, "sigma = L, eta = 1/L must contract to a point");
}

#[test]
fn solve_is_deterministic() {
    let prog = one_var_program(1.3, 0.7);
    let a = solve(&prog, &array![0.123], 1e-9, 50_000).unwrap();
    let b = solve(&prog, &array![0.123], 1e-9, 50_000).unwrap();
    assert_eq!(a.x[0].to_bits(), b.x[0].to_bits());
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn admm_solves_anchored_difference_program() {
    // min |x - 0| * 2 + |x - 1| * 1 + (1/2) x², one variable in [0,1]:
    // subgradient at x in (0,1): 2 - 1 + x = 0 -> would need x = -1, so the
    // optimum clamps to x = 0 where f' jumps; check against fine grid search.
    let prog = RegularizedProgram {
        dim: 1,
        f: NonsmoothTerm::WeightedDifferences(vec![
            DiffTerm { i: Some(0), j: None, offset: 0.0, weight: 2.0 },
            DiffTerm { i: Some(0), j: None, offset: -1.0, weight: 1.0 },
        ]),
        g: SmoothTerm::diagonal(array![1.0]),
        sigma: 1.0,
        lsmooth: 1.0,
        projector: Projector::BoxSlab(BoxSlab::cube(1)),
    };
    let res = solve(&prog, &array![0.5], 1e-10, 100_000).unwrap();
    assert!(res.converged);
    let grid_best = (0..=10_000)
        .map(|i| i as f64 / 10_000.0)
        .map(|x| prog.objective(&array![x]))
        .fold(f64::INFINITY, f64::min);
    assert_abs_diff_eq!(res.objective, grid_best, epsilon = 1e-6);
    assert_abs_diff_eq!(res.x[0], 0.0, epsilon = 1e-6);
}

#[test]
fn admm_matches_grid_on_two_variable_tv() {
    // min 1.5|x0 - x1| + |x0 - 1| + ½(x0² + 2 x1²) over [0,1]², vs 2-d grid
    let prog = RegularizedProgram {
        dim: 2,
        f: NonsmoothTerm::WeightedDifferences(vec![
            DiffTerm { i: Some(0), j: Some(1), offset: 0.0, weight: 1.5 },
            DiffTerm { i: Some(0), j: None, offset: -1.0, weight: 1.0 },
        ]),
        g: SmoothTerm::diagonal(array![1.0, 2.0]),
        sigma: 1.0,
        lsmooth: 2.0,
        projector: Projector::BoxSlab(BoxSlab::cube(2)),
    };
    let res = solve(&prog, &array![0.4, 0.9], 1e-10, 200_000).unwrap();
    assert!(res.converged);
    let mut best = f64::INFINITY;
    let mut best_xy = (0.0, 0.0);
    for i in 0..=400 {
        for j in 0..=400 {
            let x = array![i as f64 / 400.0, j as f64 / 400.0];
            let v = prog.objective(&x);
            if v < best {
                best = v;
                best_xy = (x[0], x[1]);
            }
        }
    }
    assert!(res.objective <= best + 1e-5, "{} vs {}", res.objective, best);
    assert_abs_diff_eq!(res.x[0], best_xy.0, epsilon = 5e-3);
    assert_abs_diff_eq!(res.x[1], best_xy.1, epsilon = 5e-3);
}

#[test]
fn admm_respects_slab_constraint() {
    // same objective but with sum(x) <= 0.5: solution must satisfy the slab
    let prog = RegularizedProgram {
        dim: 2,
        f: NonsmoothTerm::WeightedDifferences(vec![DiffTerm {
            i: Some(0),
            j: None,
            offset: -1.0,
            weight: 3.0,
        }]),
        g: SmoothTerm::diagonal(array![1.0, 1.0]),
        sigma: 1.0,
        lsmooth: 1.0,
        projector: Projector::BoxSlab(
            BoxSlab::new(Array1::zeros(2), Array1::ones(2), f64::NEG_INFINITY, 0.5).unwrap(),
        ),
    };
    let res = solve(&prog, &array![1.0, 1.0], 1e-10, 200_000).unwrap();
    assert!(res.converged);
    assert!(res.x.sum() <= 0.5 + 1e-8);
    // grid search restricted to the slab
    let mut best = f64::INFINITY;
    for i in 0..=500 {
        for j in 0..=500 {
            let x = array![i as f64 / 500.0, j as f64 / 500.0];
            if x.sum() <= 0.5 {
                best = best.min(prog.objective(&x));
            }
        }
    }
    assert!(res.objective <= best + 1e-5);
}

#[test]
fn zero_dimensional_program_is_trivial() {
    let prog = RegularizedProgram {
        dim: 0,
        f: NonsmoothTerm::WeightedDifferences(vec![]),
        g: SmoothTerm::diagonal(Array1::zeros(0)),
        sigma: 1.0,
        lsmooth: 1.0,
        projector: Projector::BoxSlab(BoxSlab::cube(0)),
    };
    let res = solve(&prog, &Array1::zeros(0), 1e-9, 10).unwrap();
    assert!(res.converged);
}

#[test]
fn coupled_pgm_trajectories_contract() {
    // from two starts, the distance between PGM iterate sequences is
    // non-increasing after projection (prox non-expansive + gradient step
    // (1 - eta sigma)-expansive)
    let mut tape = RandomTape::new(77);
    for trial in 0..10 {
        let dim = 3 + trial % 4;
        let a = Array1::from_iter((0..dim).map(|_| 0.5 + tape.draw()));
        let prog = RegularizedProgram {
            dim,
            f: NonsmoothTerm::Linear(Array1::from_iter((0..dim).map(|_| -tape.draw()))),
            g: SmoothTerm::diagonal(a.clone()),
            sigma: a.iter().cloned().fold(f64::INFINITY, f64::min),
            lsmooth: a.iter().cloned().fold(0.0, f64::max),
            projector: Projector::Sets(ConstraintSet {
                bounds: vec![(0.0, 1.0); dim],
                hyperplanes: vec![],
                halfspaces: vec![(Array1::ones(dim), 1.5)],
            }),
        };
        let mut x = Array1::from_iter((0..dim).map(|_| tape.draw()));
        let mut y = Array1::from_iter((0..dim).map(|_| tape.draw()));
        x = prog.projector.project(&x, 1e-10).unwrap();
        y = prog.projector.project(&y, 1e-10).unwrap();
        let mut dist = (&x - &y).dot(&(&x - &y)).sqrt();
        for _ in 0..50 {
            x = pgm_step(&prog, &x, 1e-10).unwrap();
            y = pgm_step(&prog, &y, 1e-10).unwrap();
            let nd = (&x - &y).dot(&(&x - &y)).sqrt();
            assert!(
                nd <= dist + 1e-9,
                "distance increased {dist} -> {nd} on trial {trial}"
            );
            dist = nd;
        }
    }
}
