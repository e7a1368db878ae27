//! Matrix-free Lanczos for the smallest eigenpair of a Hermitian operator.
//!
//! Used both by the exact statevector oracle and by the local tensor
//! optimizer. Full reorthogonalization is always on: the Krylov spaces here
//! are small (≤ a few hundred vectors) and ghost eigenvalues are not worth
//! debugging.

use serde::{Deserialize, Serialize};

use crate::dense::eigh_jacobi;
use crate::error::{QttnError, Result};
use crate::precision::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LanczosConfig {
    pub max_iter: usize,
    /// Convergence tolerance on the change of the smallest Ritz value. At
    /// low precision the effective tolerance is floored at a small multiple
    /// of |lambda| * epsilon, since the arithmetic cannot resolve below that.
    pub tol: f64,
    pub full_reorthogonalization: bool,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig {
            max_iter: 100,
            tol: 1e-7,
            full_reorthogonalization: true,
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> num_complex::Complex64 {
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj().to_c64() * y.to_c64();
    }
    acc
}

fn norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt()
}

fn scale_in_place<T: Scalar>(a: &mut [T], f: f64) {
    let f = T::from_f64(f);
    for x in a.iter_mut() {
        *x *= f;
    }
}

fn axpy<T: Scalar>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Smallest eigenvalue of the symmetric tridiagonal (alpha; beta) and its
/// eigenvector, via a dense Jacobi solve (the matrix is tiny).
fn tridiag_ground(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let mut m = vec![0.0f64; k * k];
    for i in 0..k {
        m[i * k + i] = alpha[i];
        if i + 1 < k {
            m[i * k + (i + 1)] = beta[i];
            m[(i + 1) * k + i] = beta[i];
        }
    }
    let (vals, vecs) = eigh_jacobi(&m, k);
    let y: Vec<f64> = (0..k).map(|i| vecs[i * k]).collect();
    (vals[0], y)
}

/// Ground eigenpair of the Hermitian operator represented by `matvec`,
/// started from `init`. Returns the eigenvalue and a normalized eigenvector.
///
/// A breakdown (the residual vanishes, so the Krylov space is invariant)
/// yields an exact eigenpair — but possibly not the ground one if the start
/// vector misses it. On early breakdown the iteration therefore restarts
/// once from a deterministically perturbed vector and the lower of the two
/// Ritz values wins; a breakdown that produced no usable pair at all is a
/// solver error.
pub fn lanczos_ground<T, F>(matvec: &mut F, init: &[T], cfg: &LanczosConfig) -> Result<(f64, Vec<T>)>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
{
    let mut start = init.to_vec();
    let mut candidate: Option<(f64, Vec<T>)> = None;
    for attempt in 0..2 {
        match lanczos_attempt(matvec, &start, cfg)? {
            Outcome::Converged(val, vec) | Outcome::Exhausted(val, vec) => {
                return Ok(match candidate {
                    Some((cv, cvec)) if cv < val => (cv, cvec),
                    _ => (val, vec),
                });
            }
            Outcome::Breakdown(pair) => {
                match (&candidate, pair) {
                    (Some((cv, _)), Some((v, vec))) if v < *cv => candidate = Some((v, vec)),
                    (None, p) => candidate = p,
                    _ => {}
                }
                if attempt == 1 {
                    return candidate.ok_or_else(|| {
                        QttnError::Solver("lanczos: repeated breakdown before convergence".into())
                    });
                }
                // deterministic perturbation: shift each entry by an
                // index-dependent amount comparable to the vector norm
                let n = start.len();
                let s = norm(&start).max(1.0) / n as f64;
                for (i, x) in start.iter_mut().enumerate() {
                    *x += T::from_f64(s * (0.5 + (i % 7) as f64 / 7.0));
                }
            }
        }
    }
    unreachable!()
}

enum Outcome<T> {
    Converged(f64, Vec<T>),
    Exhausted(f64, Vec<T>),
    /// Krylov closure before the settle criterion; the carried pair (if any)
    /// is an exact eigenpair of the invariant subspace.
    Breakdown(Option<(f64, Vec<T>)>),
}

fn lanczos_attempt<T, F>(matvec: &mut F, init: &[T], cfg: &LanczosConfig) -> Result<Outcome<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
{
    let n = init.len();
    let dim_cap = n; // Krylov space cannot exceed the problem dimension
    let max_iter = cfg.max_iter.min(dim_cap).max(1);
    let init_norm = norm(init);
    if init_norm == 0.0 || !init_norm.is_finite() {
        return Err(QttnError::Solver("lanczos: zero or non-finite start vector".into()));
    }
    let mut q = init.to_vec();
    scale_in_place(&mut q, 1.0 / init_norm);

    let mut basis: Vec<Vec<T>> = vec![q.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_ritz = f64::INFINITY;

    for it in 0..max_iter {
        let mut w = matvec(&q);
        if w.len() != n {
            return Err(QttnError::Solver(format!(
                "lanczos: matvec returned length {} for input length {n}",
                w.len()
            )));
        }
        let alpha = dot(&q, &w).re;
        if !alpha.is_finite() {
            return Err(QttnError::Numeric("lanczos: non-finite Rayleigh quotient".into()));
        }
        alphas.push(alpha);
        // w -= alpha q + beta q_prev, then optionally reproject against the
        // whole basis to suppress the usual orthogonality drift
        axpy(&mut w, T::from_f64(-alpha), &q);
        if let Some(b) = betas.last() {
            let prev = &basis[basis.len() - 2];
            axpy(&mut w, T::from_f64(-b), prev);
        }
        if cfg.full_reorthogonalization {
            for v in &basis {
                let c = dot(v, &w);
                axpy(&mut w, T::from_c64(-c), v);
            }
        }

        let (ritz, _) = tridiag_ground(&alphas, &betas);
        let scale_floor = ritz.abs().max(1.0) * T::PRECISION.epsilon() * 10.0;
        let tol_eff = cfg.tol.max(scale_floor);
        let converged = (last_ritz - ritz).abs() < tol_eff;
        last_ritz = ritz;

        let beta = norm(&w);
        let breakdown = beta < 1e-14 * alphas.iter().map(|a| a.abs()).fold(1.0, f64::max);
        if converged || breakdown || it + 1 == max_iter {
            let (val, y) = tridiag_ground(&alphas, &betas);
            let mut out = vec![T::zero(); n];
            for (coef, v) in y.iter().zip(&basis) {
                axpy(&mut out, T::from_f64(*coef), v);
            }
            let on = norm(&out);
            if on == 0.0 {
                return Ok(Outcome::Breakdown(None));
            }
            scale_in_place(&mut out, 1.0 / on);
            if breakdown && !converged && alphas.len() < dim_cap {
                // closed early without settling: the pair is exact for the
                // invariant subspace but may not be the global ground state
                return Ok(Outcome::Breakdown(Some((val, out))));
            }
            return Ok(if converged {
                Outcome::Converged(val, out)
            } else {
                Outcome::Exhausted(val, out)
            });
        }

        betas.push(beta);
        scale_in_place(&mut w, 1.0 / beta);
        basis.push(w.clone());
        q = w;
    }
    unreachable!()
}
