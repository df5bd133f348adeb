//! Lowest eigenpair of a real symmetric operator by restarted Lanczos with
//! full reorthogonalization.
//!
//! The operator is supplied as a matrix-free closure. Every new Krylov vector
//! is orthogonalized twice against all stored vectors. When the Krylov space
//! reaches `krylov_dim` the iteration restarts from the current Ritz vector.

use crate::linalg::{axpy, dot, norm, scale, symmetric_eigen};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Convergence threshold on `‖Hx − θx‖ / max(1, |θ|)`.
    pub tol: f64,
    /// Total number of operator applications allowed.
    pub max_iter: usize,
    /// Krylov vectors kept before a restart.
    pub krylov_dim: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            krylov_dim: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit norm.
    pub vector: Vec<f64>,
    /// Estimated `‖Hx − θx‖` (absolute).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs Lanczos from `start`, which must be nonzero.
pub fn lowest_eigenpair<F>(mut apply: F, start: &[f64], opts: LanczosOptions) -> Result<Eigenpair>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let dim = start.len();
    let mut x = start.to_vec();
    let n0 = norm(&x);
    assert!(n0 > 0.0, "Lanczos start vector must be nonzero");
    scale(1.0 / n0, &mut x);

    let krylov_dim = opts.krylov_dim.max(2).min(dim.max(1));
    let mut iterations = 0usize;
    let mut best = Eigenpair {
        value: f64::INFINITY,
        vector: x.clone(),
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(krylov_dim);
    let mut alpha: Vec<f64> = Vec::with_capacity(krylov_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(krylov_dim);
    let mut w = vec![0.0; dim];

    loop {
        basis.clear();
        alpha.clear();
        beta.clear();
        basis.push(x.clone());

        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            iterations += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            let b = norm(&w);

            let (theta, y) = lowest_ritz(&alpha, &beta)?;
            let resid = b * y.last().copied().unwrap_or(0.0).abs();
            let scale_e = theta.abs().max(1.0);
            let invariant = b <= 1e-14 * scale_e || basis.len() == dim;
            let done = resid <= opts.tol * scale_e || invariant;
            let restart = basis.len() >= krylov_dim;
            let exhausted = iterations >= opts.max_iter;

            if done || restart || exhausted {
                let mut ritz = vec![0.0; dim];
                for (v, c) in basis.iter().zip(&y) {
                    axpy(*c, v, &mut ritz);
                }
                let nr = norm(&ritz);
                scale(1.0 / nr, &mut ritz);
                if resid <= best.residual || !best.value.is_finite() {
                    best = Eigenpair {
                        value: theta,
                        vector: ritz.clone(),
                        residual: resid,
                        iterations,
                        converged: false,
                    };
                }
                if done {
                    // Confirm with an explicit residual; the Lanczos estimate
                    // can be optimistic once rounding dominates.
                    apply(&ritz, &mut w);
                    iterations += 1;
                    let e = dot(&ritz, &w);
                    axpy(-e, &ritz, &mut w);
                    let true_resid = norm(&w);
                    if true_resid <= opts.tol.max(1e-10) * e.abs().max(1.0) || invariant {
                        return Ok(Eigenpair {
                            value: e,
                            vector: ritz,
                            residual: true_resid,
                            iterations,
                            converged: true,
                        });
                    }
                }
                if exhausted {
                    best.iterations = iterations;
                    return Ok(best);
                }
                x = ritz;
                break;
            }

            scale(1.0 / b, &mut w);
            beta.push(b);
            basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
        }
    }
}

/// Lowest eigenpair of the tridiagonal matrix `(alpha, beta)`.
fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = alpha.len();
    if k == 1 {
        return Ok((alpha[0], vec![1.0]));
    }
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alpha[i];
        if i + 1 < k {
            t[i * k + i + 1] = beta[i];
            t[(i + 1) * k + i] = beta[i];
        }
    }
    let eig = symmetric_eigen(&t, k)?;
    Ok((eig.values[0], eig.vector(0)))
}
