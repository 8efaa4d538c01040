//! Laplacian spectral quantities.
//!
//! `lambda2` is the algebraic connectivity: the second-smallest eigenvalue of
//! the unnormalized Laplacian L_w = B W Bᵀ. It governs the stability bounds of
//! every cut algorithm in this crate, so it is computed carefully: a dense
//! cyclic-Jacobi eigendecomposition up to n = 512, and a deflated power
//! iteration on the spectrum-reversed matrix above that.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use ndarray::{Array1, Array2};

/// Dense unnormalized Laplacian: diag(weighted degrees) − weighted adjacency.
pub fn laplacian(g: &WeightedGraph) -> Array2<f64> {
    let n = g.n();
    let mut l = Array2::<f64>::zeros((n, n));
    for (&(u, v), &w) in g.edges().iter().zip(g.weights()) {
        l[[u, u]] += w;
        l[[v, v]] += w;
        l[[u, v]] -= w;
        l[[v, u]] -= w;
    }
    l
}

/// Threshold between the dense eigensolver and the iterative path.
const DENSE_LIMIT: usize = 512;

/// Algebraic connectivity λ2 of the weighted Laplacian, within additive `tol`
/// (0 for disconnected graphs, up to `tol`).
pub fn lambda2(g: &WeightedGraph, tol: f64) -> Result<f64> {
    Ok(lambda_extremes(g, tol)?.0)
}

/// (λ2, λn) of the weighted Laplacian.
pub fn lambda_extremes(g: &WeightedGraph, tol: f64) -> Result<(f64, f64)> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "lambda2 needs at least 2 vertices".into(),
        ));
    }
    let l = laplacian(g);
    if n <= DENSE_LIMIT {
        let mut eigs = jacobi_eigenvalues(&l);
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok((eigs[1].max(0.0), eigs[n - 1].max(0.0)))
    } else {
        let lmax = power_iteration_max(&l, tol)?;
        let l2 = deflated_lambda2(&l, lmax, tol)?;
        Ok((l2.max(0.0), lmax))
    }
}

/// All eigenvalues of a symmetric matrix by the cyclic Jacobi method.
///
/// Robust and simple; O(n³) per sweep with quadratic convergence once
/// off-diagonal mass is small. Ample for the dense regime.
pub fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-14 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].abs();
            }
        }
        if off <= tol * (n as f64) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).collect()
}

/// Largest eigenvalue of a PSD matrix by power iteration.
fn power_iteration_max(l: &Array2<f64>, tol: f64) -> Result<f64> {
    let n = l.nrows();
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    // deterministic non-degenerate start
    for i in 0..n {
        v[i] += 0.01 * ((i % 7) as f64 - 3.0) / (n as f64).sqrt();
    }
    normalize(&mut v);
    let mut lambda = 0.0;
    for it in 0..200_000 {
        let mut w = l.dot(&v);
        let nl = v.dot(&w);
        if (nl - lambda).abs() <= tol * 0.1 * nl.abs().max(1.0) && it > 10 {
            return Ok(nl);
        }
        lambda = nl;
        if norm(&w) == 0.0 {
            return Ok(0.0);
        }
        normalize(&mut w);
        v = w;
    }
    Err(Error::NonConvergence {
        iterations: 200_000,
        residual: f64::NAN,
        last: v.to_vec(),
    })
}

/// λ2 via power iteration on cI − L with the all-ones eigenvector projected
/// out: the dominant eigenvalue of the deflated matrix is c − λ2.
fn deflated_lambda2(l: &Array2<f64>, lmax: f64, tol: f64) -> Result<f64> {
    let n = l.nrows();
    let c = lmax * 1.01 + 1.0;
    let mut v = Array1::<f64>::zeros(n);
    for i in 0..n {
        v[i] = ((i as f64 * 0.7391 + 0.17).sin()).abs() + 0.05;
    }
    project_out_ones(&mut v);
    normalize(&mut v);
    let mut mu = 0.0;
    for it in 0..500_000 {
        // w = (cI - L) v
        let mut w = l.dot(&v);
        for i in 0..n {
            w[i] = c * v[i] - w[i];
        }
        project_out_ones(&mut w);
        let nmu = v.dot(&w);
        if (nmu - mu).abs() <= tol * 0.1 && it > 10 {
            return Ok(c - nmu);
        }
        mu = nmu;
        if norm(&w) == 0.0 {
            return Ok(c);
        }
        normalize(&mut w);
        v = w;
    }
    Err(Error::NonConvergence {
        iterations: 500_000,
        residual: f64::NAN,
        last: v.to_vec(),
    })
}

fn project_out_ones(v: &mut Array1<f64>) {
    let mean = v.mean().unwrap_or(0.0);
    v.mapv_inplace(|x| x - mean);
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn normalize(v: &mut Array1<f64>) {
    let nv = norm(v);
    if nv > 0.0 {
        v.mapv_inplace(|x| x / nv);
    }
}
