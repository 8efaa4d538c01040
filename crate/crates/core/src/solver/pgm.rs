//! Proximal gradient method for programs with linear nonsmooth part.
//!
//! With f(x) = ⟨c,x⟩, the prox step argmin_z (L/2)‖z − v‖² + f(z) over K is
//! the projection of v − c/L onto K, so each iteration is one gradient of g,
//! one shift and one projection:
//!
//!   x ← P_K(x − (∇g(x) + c)/L).
//!
//! The step size 1/L makes the gradient part (1 − σ/L)-expansive and the
//! projection non-expansive, so coupled trajectories contract geometrically.

use super::{movement_threshold, NonsmoothTerm, RegularizedProgram, SolveResult, QUIET_ITERS};
use crate::error::{Error, Result};
use ndarray::Array1;

pub(super) fn solve_pgm(
    prog: &RegularizedProgram,
    x0: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    let c = match &prog.f {
        NonsmoothTerm::Linear(c) => c,
        _ => unreachable!("pgm route requires linear f"),
    };
    let inner_tol = tol / 10.0;
    let l = prog.lsmooth;
    let move_thresh = movement_threshold(prog, tol);

    let mut x = prog.projector.project(x0, inner_tol)?;
    let mut quiet = 0usize;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let grad = prog.g.gradient(&x);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("gradient callback produced NaN".into()));
        }
        let v = &x - &((&grad + c) / l);
        let xn = prog.projector.project(&v, inner_tol)?;
        let movement = (&xn - &x).dot(&(&xn - &x)).sqrt();
        // gradient-mapping residual for the composite problem
        residual = l * movement;
        x = xn;
        if movement <= move_thresh {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= QUIET_ITERS && residual <= tol {
            return Ok(SolveResult {
                objective: prog.objective(&x),
                x,
                iterations: it,
                residual,
                converged: true,
            });
        }
    }
    Ok(SolveResult {
        objective: prog.objective(&x),
        x,
        iterations: max_iter,
        residual,
        converged: false,
    })
}

/// One proximal-gradient step from `x` (exposed for trajectory-contraction
/// property tests).
pub fn pgm_step(prog: &RegularizedProgram, x: &Array1<f64>, tol: f64) -> Result<Array1<f64>> {
    let c = match &prog.f {
        NonsmoothTerm::Linear(c) => c,
        _ => {
            return Err(Error::InvalidParameter(
                "pgm_step requires a linear nonsmooth part".into(),
            ))
        }
    };
    let v = x - &((&prog.g.gradient(x) + c) / prog.lsmooth);
    prog.projector.project(&v, tol / 10.0)
}
