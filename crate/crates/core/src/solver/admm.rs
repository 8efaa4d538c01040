//! ADMM splitting for weighted-absolute-difference objectives.
//!
//! For f(x) = Σ_k w_k|(Dx + o)_k| with g quadratic and K projectable, split
//!
//!   min g(x) + Σ_k w_k |z_k| + ι_K(v)   s.t.  Dx + o = z,  x = v.
//!
//! Every block is closed-form: the x-update is a dense Cholesky backsolve of
//! a matrix factored once per penalty value, the z-update is per-coordinate
//! soft-thresholding and the v-update is the projection onto K. Convergence
//! is linear for strongly convex g over polyhedral K, and the whole iteration
//! is deterministic.

use super::{movement_threshold, NonsmoothTerm, RegularizedProgram, SmoothTerm, SolveResult, QUIET_ITERS};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

pub(super) fn solve_admm(
    prog: &RegularizedProgram,
    x0: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    let terms = match &prog.f {
        NonsmoothTerm::WeightedDifferences(t) => t,
        _ => unreachable!("admm route requires weighted differences"),
    };
    let n = prog.dim;
    let k = terms.len();
    let inner_tol = tol / 10.0;

    // D as (i, j) index pairs; rows are sparse with at most two entries.
    let apply_d = |x: &Array1<f64>, out: &mut Array1<f64>| {
        for (r, t) in terms.iter().enumerate() {
            let mut v = t.offset;
            if let Some(i) = t.i {
                v += x[i];
            }
            if let Some(j) = t.j {
                v -= x[j];
            }
            out[r] = v;
        }
    };
    let apply_dt = |y: &Array1<f64>, out: &mut Array1<f64>| {
        out.fill(0.0);
        for (r, t) in terms.iter().enumerate() {
            if let Some(i) = t.i {
                out[i] += y[r];
            }
            if let Some(j) = t.j {
                out[j] -= y[r];
            }
        }
    };

    // DᵀD (constant) and the quadratic part of g.
    let mut dtd = Array2::<f64>::zeros((n, n));
    for t in terms.iter() {
        match (t.i, t.j) {
            (Some(i), Some(j)) => {
                dtd[[i, i]] += 1.0;
                dtd[[j, j]] += 1.0;
                dtd[[i, j]] -= 1.0;
                dtd[[j, i]] -= 1.0;
            }
            (Some(i), None) => dtd[[i, i]] += 1.0,
            (None, Some(j)) => dtd[[j, j]] += 1.0,
            (None, None) => {}
        }
    }
    let (q, d_lin) = match &prog.g {
        SmoothTerm::Quadratic { q, d, .. } => (q.clone(), d.clone()),
        SmoothTerm::Diagonal { a, d } => {
            let mut q = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                q[[i, i]] = a[i];
            }
            (q, d.clone())
        }
    };

    let mean_w = if k > 0 {
        terms.iter().map(|t| t.weight).sum::<f64>() / k as f64
    } else {
        1.0
    };
    let mut rho = mean_w.max(prog.sigma).max(1e-6);
    let factor = |rho: f64| -> Result<Cholesky> {
        let mut a = &q + &(&dtd * rho);
        for i in 0..n {
            a[[i, i]] += rho;
        }
        Cholesky::new(a)
    };
    let mut chol = factor(rho)?;

    let mut x = prog.projector.project(x0, inner_tol)?;
    let mut z = Array1::<f64>::zeros(k);
    apply_d(&x, &mut z);
    let mut v = x.clone();
    let mut uz = Array1::<f64>::zeros(k);
    let mut uv = Array1::<f64>::zeros(n);

    let move_thresh = movement_threshold(prog, tol);
    let mut quiet = 0usize;
    let mut residual = f64::INFINITY;
    let mut dx_buf = Array1::<f64>::zeros(k);
    let mut dt_buf = Array1::<f64>::zeros(n);
    let mut rho_changes = 0usize;

    for it in 1..=max_iter {
        // x-update: (Q + rho(DᵀD + I)) x = -d_lin - rho Dᵀ(o - z + uz) + rho(v - uv)
        // where the offset o is folded into the D application.
        let mut rhs = Array1::<f64>::zeros(n);
        // Dᵀ(z - uz - o): build z - uz - o in dx_buf (apply_d of zero gives o)
        for (r, t) in terms.iter().enumerate() {
            dx_buf[r] = z[r] - uz[r] - t.offset;
        }
        apply_dt(&dx_buf, &mut dt_buf);
        for i in 0..n {
            rhs[i] = -d_lin[i] + rho * (dt_buf[i] + v[i] - uv[i]);
        }
        let x_new = chol.solve(&rhs);
        let movement = (&x_new - &x).dot(&(&x_new - &x)).sqrt();
        x = x_new;

        // z-update: soft-threshold
        apply_d(&x, &mut dx_buf);
        let z_prev = z.clone();
        for r in 0..k {
            z[r] = soft(dx_buf[r] + uz[r], terms[r].weight / rho);
        }
        // v-update: projection
        let v_prev = v.clone();
        let vin = &x + &uv;
        v = prog.projector.project(&vin, inner_tol)?;

        // duals
        for r in 0..k {
            uz[r] += dx_buf[r] - z[r];
        }
        for i in 0..n {
            uv[i] += x[i] - v[i];
        }

        // residuals
        let mut pri: f64 = 0.0;
        for r in 0..k {
            pri += (dx_buf[r] - z[r]).powi(2);
        }
        for i in 0..n {
            pri += (x[i] - v[i]).powi(2);
        }
        let pri = pri.sqrt();
        let mut dz = Array1::<f64>::zeros(k);
        for r in 0..k {
            dz[r] = z[r] - z_prev[r];
        }
        apply_dt(&dz, &mut dt_buf);
        let mut dual: f64 = 0.0;
        for i in 0..n {
            dual += (rho * (dt_buf[i] + v[i] - v_prev[i])).powi(2);
        }
        let dual = dual.sqrt();
        residual = pri.max(dual);
        if !residual.is_finite() {
            return Err(Error::Numeric("ADMM residual became non-finite".into()));
        }

        if movement <= move_thresh {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= QUIET_ITERS && residual <= tol {
            let x_out = prog.projector.project(&x, inner_tol)?;
            return Ok(SolveResult {
                objective: prog.objective(&x_out),
                x: x_out,
                iterations: it,
                residual,
                converged: true,
            });
        }

        // residual balancing, bounded and deterministic
        if it % 25 == 0 && rho_changes < 20 {
            if pri > 10.0 * dual && rho < 1e8 {
                rho *= 2.0;
                uz.mapv_inplace(|u| u * 0.5);
                uv.mapv_inplace(|u| u * 0.5);
                chol = factor(rho)?;
                rho_changes += 1;
            } else if dual > 10.0 * pri && rho > 1e-8 {
                rho *= 0.5;
                uz.mapv_inplace(|u| u * 2.0);
                uv.mapv_inplace(|u| u * 2.0);
                chol = factor(rho)?;
                rho_changes += 1;
            }
        }
    }
    let x_out = prog.projector.project(&x, inner_tol)?;
    Ok(SolveResult {
        objective: prog.objective(&x_out),
        x: x_out,
        iterations: max_iter,
        residual,
        converged: false,
    })
}

fn soft(v: f64, thresh: f64) -> f64 {
    if v > thresh {
        v - thresh
    } else if v < -thresh {
        v + thresh
    } else {
        0.0
    }
}

/// Dense Cholesky factorization (lower triangular), enough for the SPD
/// systems the x-update produces.
struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    fn new(a: Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[[i, j]];
                for p in 0..j {
                    s -= l[[i, p]] * l[[j, p]];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Numeric(format!(
                            "Cholesky pivot {s} <= 0 at row {i}; system not SPD"
                        )));
                    }
                    l[[i, i]] = s.sqrt();
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        Ok(Cholesky { l })
    }

    fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = b.len();
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.l[[i, j]] * y[j];
            }
            y[i] = s / self.l[[i, i]];
        }
        let mut x = Array1::<f64>::zeros(n);
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.l[[j, i]] * x[j];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }
}
