//! Dense linear-algebra backends.
//!
//! Two interchangeable implementations share the tensor contract: a plain
//! `reference` backend (straightforward loops, always correct) and an
//! `optimized` backend (cache-blocked matrix multiply with an optional
//! thread-count hint). Both produce elementwise-equal results up to
//! floating-point summation-order effects.

use serde::{Deserialize, Serialize};

use crate::error::{QttnError, Result};
use crate::precision::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendName {
    Reference,
    Optimized,
}

impl std::fmt::Display for BackendName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendName::Reference => write!(f, "reference"),
            BackendName::Optimized => write!(f, "optimized"),
        }
    }
}

impl std::str::FromStr for BackendName {
    type Err = QttnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(BackendName::Reference),
            "optimized" => Ok(BackendName::Optimized),
            other => Err(QttnError::Config(format!("unknown backend '{other}'"))),
        }
    }
}

/// Identifies which dense backend executes tensor operations, plus a
/// thread-count hint forwarded to the backend internals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackendId {
    pub name: BackendName,
    pub thread_count: usize,
}

impl BackendId {
    pub fn reference() -> Self {
        BackendId {
            name: BackendName::Reference,
            thread_count: 1,
        }
    }

    pub fn optimized(thread_count: usize) -> Self {
        BackendId {
            name: BackendName::Optimized,
            thread_count: thread_count.max(1),
        }
    }
}

impl Default for BackendId {
    fn default() -> Self {
        BackendId::optimized(1)
    }
}

/// C (m x n) = A (m x k) * B (k x n), all row-major.
pub fn matmul<T: Scalar>(backend: BackendId, a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    match backend.name {
        BackendName::Reference => matmul_reference(a, b, m, k, n),
        BackendName::Optimized => matmul_blocked(a, b, m, k, n, backend.thread_count),
    }
}

fn matmul_reference<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
    c
}

const BLOCK_I: usize = 32;
const BLOCK_K: usize = 128;
const BLOCK_J: usize = 256;

fn matmul_blocked<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, threads: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    let threads = threads.max(1);
    if threads == 1 || m < 2 * BLOCK_I {
        matmul_blocked_rows(a, b, &mut c, 0, m, k, n);
        return c;
    }
    // Each worker owns a disjoint band of output rows, so the result is
    // deterministic for any thread count.
    let rows_per = m.div_ceil(threads);
    let mut bands: Vec<&mut [T]> = c.chunks_mut(rows_per * n).collect();
    std::thread::scope(|s| {
        for (idx, band) in bands.iter_mut().enumerate() {
            let i0 = idx * rows_per;
            let i1 = (i0 + band.len() / n).min(m);
            let a = &a[i0 * k..i1 * k];
            s.spawn(move || {
                matmul_blocked_rows(a, b, band, 0, i1 - i0, k, n);
            });
        }
    });
    c
}

fn matmul_blocked_rows<T: Scalar>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    i_start: usize,
    i_end: usize,
    k: usize,
    n: usize,
) {
    for ib in (i_start..i_end).step_by(BLOCK_I) {
        let imax = (ib + BLOCK_I).min(i_end);
        for pb in (0..k).step_by(BLOCK_K) {
            let pmax = (pb + BLOCK_K).min(k);
            for jb in (0..n).step_by(BLOCK_J) {
                let jmax = (jb + BLOCK_J).min(n);
                for i in ib..imax {
                    let arow = &a[i * k..];
                    let crow = &mut c[i * n + jb..i * n + jmax];
                    for p in pb..pmax {
                        let aip = arow[p];
                        let brow = &b[p * n + jb..p * n + jmax];
                        for (cv, bv) in crow.iter_mut().zip(brow) {
                            *cv += aip * *bv;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(len: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn backends_agree() {
        let (m, k, n) = (37, 53, 29);
        let a = seeded(m * k, 1);
        let b = seeded(k * n, 2);
        let c_ref = matmul(BackendId::reference(), &a, &b, m, k, n);
        for threads in [1, 4] {
            let c_opt = matmul(BackendId::optimized(threads), &a, &b, m, k, n);
            for (x, y) in c_ref.iter().zip(&c_opt) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn threaded_is_deterministic() {
        let (m, k, n) = (128, 64, 64);
        let a = seeded(m * k, 3);
        let b = seeded(k * n, 4);
        let c1 = matmul(BackendId::optimized(4), &a, &b, m, k, n);
        let c2 = matmul(BackendId::optimized(4), &a, &b, m, k, n);
        assert_eq!(c1, c2);
        let c3 = matmul(BackendId::optimized(2), &a, &b, m, k, n);
        assert_eq!(c1, c3);
    }
}
