//! Matrix decompositions on matricized tensors: Householder QR, Hermitian
//! Jacobi eigendecomposition, and SVD via one-sided Jacobi or via the Gram
//! matrix ("via_eigh").

use serde::{Deserialize, Serialize};

use crate::error::{QttnError, Result};
use crate::precision::Scalar;

use super::Tensor;

/// Which construction computes the SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdAlgorithm {
    /// One-sided Jacobi on the (pre-QR reduced) matrix.
    #[default]
    Direct,
    /// Form the Gram matrix on the smaller side, eigendecompose, recover the
    /// other factor by applying the input. Negative near-zero eigenvalues are
    /// clamped to 0.
    ViaEigh,
}

/// Result of a (possibly truncated) singular value decomposition.
///
/// `u` has shape (left dims..., kept_rank) and `v` has shape
/// (kept_rank, right dims...); `u . diag(s) . v` reconstructs the matricized
/// input up to `truncation_error` in Frobenius norm.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Scalar> {
    pub u: Tensor<T>,
    pub singular_values: Vec<f64>,
    pub v: Tensor<T>,
    pub truncation_error: f64,
    pub kept_rank: usize,
}

impl<T: Scalar> Tensor<T> {
    /// QR of the matricization over (left_axes | right_axes).
    /// Q has shape (left dims..., k), R has shape (k, right dims...),
    /// k = min(m, n); Q is an isometry on its fused left index.
    pub fn qr(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        if !self.is_finite() {
            return Err(QttnError::Numeric("qr: non-finite input".into()));
        }
        let (mat, left_dims, right_dims) = self.matricize(left_axes, right_axes)?;
        let m = mat.shape()[0];
        let n = mat.shape()[1];
        let k = m.min(n);
        let (q, r) = householder_qr(mat.data(), m, n);
        let mut q_shape = left_dims;
        q_shape.push(k);
        let mut r_shape = vec![k];
        r_shape.extend(right_dims);
        Ok((
            Tensor::from_data(q_shape, q, self.backend())?,
            Tensor::from_data(r_shape, r, self.backend())?,
        ))
    }

    /// Eigendecomposition of a Hermitian matricization. Eigenvalues ascending;
    /// eigenvector `i` is column `i` of the returned tensor (shape: left
    /// dims..., n).
    pub fn eigh(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(Vec<f64>, Tensor<T>)> {
        if !self.is_finite() {
            return Err(QttnError::Numeric("eigh: non-finite input".into()));
        }
        let (mat, left_dims, _) = self.matricize(left_axes, right_axes)?;
        let m = mat.shape()[0];
        let n = mat.shape()[1];
        if m != n {
            return Err(QttnError::Argument(format!(
                "eigh: matricization is {m} x {n}, not square"
            )));
        }
        let scale = mat.data().iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
        let herm_tol = match T::PRECISION {
            crate::precision::Precision::S | crate::precision::Precision::C => 1e-4,
            crate::precision::Precision::D | crate::precision::Precision::Z => 1e-10,
        };
        for i in 0..n {
            for j in i..n {
                let d = (mat.data()[i * n + j] - mat.data()[j * n + i].conj()).abs();
                if d > herm_tol * scale {
                    return Err(QttnError::Argument(format!(
                        "eigh: input not Hermitian (|A - A^H| up to {d:.3e})"
                    )));
                }
            }
        }
        let (vals, vecs) = eigh_jacobi(mat.data(), n);
        let mut v_shape = left_dims;
        v_shape.push(n);
        Ok((vals, Tensor::from_data(v_shape, vecs, self.backend())?))
    }

    /// Truncated SVD of the matricization over (left_axes | right_axes).
    ///
    /// kept_rank = min(max_rank, number of singular values with
    /// s_i / s_1 > cutoff). A zero input keeps rank 1 with singular value 0
    /// and orthonormal (identity-column) factors.
    pub fn svd(
        &self,
        left_axes: &[usize],
        right_axes: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
    ) -> Result<SvdResult<T>> {
        self.svd_tiled(left_axes, right_axes, max_rank, cutoff, algorithm, None)
    }

    /// Like [`Tensor::svd`], with the kept rank rounded up to a multiple of
    /// `tile_entries` (never padded past the available rank or `max_rank`).
    pub fn svd_tiled(
        &self,
        left_axes: &[usize],
        right_axes: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
        tile_entries: Option<usize>,
    ) -> Result<SvdResult<T>> {
        if max_rank == 0 {
            return Err(QttnError::Argument("svd: max_rank must be >= 1".into()));
        }
        if cutoff < 0.0 {
            return Err(QttnError::Argument("svd: cutoff must be >= 0".into()));
        }
        if !self.is_finite() {
            return Err(QttnError::Numeric("svd: non-finite input".into()));
        }
        let (mat, left_dims, right_dims) = self.matricize(left_axes, right_axes)?;
        let m = mat.shape()[0];
        let n = mat.shape()[1];
        let (u_full, s_full, vt_full) = match algorithm {
            SvdAlgorithm::Direct => svd_jacobi(mat.data(), m, n, self.backend()),
            SvdAlgorithm::ViaEigh => svd_via_eigh(mat.data(), m, n),
        };
        let avail = s_full.len();
        let kept = decide_kept(&s_full, max_rank, cutoff, tile_entries);
        let truncation_error = s_full[kept..].iter().map(|s| s * s).sum::<f64>().sqrt();

        // column-truncate u (m x avail -> m x kept) and row-truncate vt
        let mut u_data = Vec::with_capacity(m * kept);
        for i in 0..m {
            u_data.extend_from_slice(&u_full[i * avail..i * avail + kept]);
        }
        let vt_data = vt_full[..kept * n].to_vec();

        let mut u_shape = left_dims;
        u_shape.push(kept);
        let mut v_shape = vec![kept];
        v_shape.extend(right_dims);
        Ok(SvdResult {
            u: Tensor::from_data(u_shape, u_data, self.backend())?,
            singular_values: s_full[..kept].to_vec(),
            v: Tensor::from_data(v_shape, vt_data, self.backend())?,
            truncation_error,
            kept_rank: kept,
        })
    }
}

/// Number of singular values to keep out of a non-increasing list: at most
/// `max_rank`, only values with s_i / s_1 > cutoff (relative cutoff), at
/// least 1. With tiling, the count is rounded up to the next multiple of
/// `tile_entries`, capped at both the available rank and `max_rank` — extra
/// (smaller) values are kept, never zero-padded.
pub fn decide_kept(s: &[f64], max_rank: usize, cutoff: f64, tile_entries: Option<usize>) -> usize {
    let avail = s.len();
    if avail == 0 {
        return 0;
    }
    let s1 = s[0];
    let mut kept = if s1 <= 0.0 {
        1
    } else {
        s.iter().take_while(|&&v| v / s1 > cutoff).count().max(1)
    };
    kept = kept.min(max_rank).min(avail).max(1);
    if let Some(tile) = tile_entries {
        if tile > 1 {
            let rounded = kept.div_ceil(tile) * tile;
            kept = rounded.min(avail).min(max_rank);
        }
    }
    kept
}

/// Householder QR of a row-major m x n matrix. Returns thin (Q: m x k, R: k x n).
pub(crate) fn householder_qr<T: Scalar>(a: &[T], m: usize, n: usize) -> (Vec<T>, Vec<T>) {
    let k = m.min(n);
    let mut r = a.to_vec();
    // reflectors: v_j lives in rows j..m; tau_j real
    let mut vs: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut taus: Vec<f64> = Vec::with_capacity(k);
    for j in 0..k {
        let col_norm_sq: f64 = (j..m).map(|i| r[i * n + j].abs_sq()).sum();
        let col_norm = col_norm_sq.sqrt();
        if col_norm == 0.0 {
            vs.push(Vec::new());
            taus.push(0.0);
            continue;
        }
        let ajj = r[j * n + j];
        let ajj_abs = ajj.abs();
        let phase = if ajj_abs > 0.0 {
            ajj * T::from_f64(1.0 / ajj_abs)
        } else {
            T::one()
        };
        let alpha = -phase * T::from_f64(col_norm);
        let mut v: Vec<T> = (j..m).map(|i| r[i * n + j]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x.abs_sq()).sum();
        if vnorm_sq <= f64::MIN_POSITIVE {
            vs.push(Vec::new());
            taus.push(0.0);
            continue;
        }
        let tau = 2.0 / vnorm_sq;
        // apply H = I - tau v v^H to R[j.., j..]
        for c in j..n {
            let mut s = T::zero();
            for (vi, i) in v.iter().zip(j..m) {
                s += vi.conj() * r[i * n + c];
            }
            s *= T::from_f64(tau);
            for (vi, i) in v.iter().zip(j..m) {
                r[i * n + c] -= *vi * s;
            }
        }
        r[j * n + j] = alpha;
        for i in j + 1..m {
            r[i * n + j] = T::zero();
        }
        vs.push(v);
        taus.push(tau);
    }
    // Q = H_0 ... H_{k-1} applied to the first k identity columns
    let mut q = vec![T::zero(); m * k];
    for j in 0..k {
        q[j * k + j] = T::one();
    }
    for j in (0..k).rev() {
        if vs[j].is_empty() {
            continue;
        }
        let v = &vs[j];
        let tau = taus[j];
        for c in 0..k {
            let mut s = T::zero();
            for (vi, i) in v.iter().zip(j..m) {
                s += vi.conj() * q[i * k + c];
            }
            s *= T::from_f64(tau);
            for (vi, i) in v.iter().zip(j..m) {
                q[i * k + c] -= *vi * s;
            }
        }
    }
    // R: keep rows 0..k
    let r_out = r[..k * n].to_vec();
    (q, r_out)
}

/// Cyclic Jacobi eigendecomposition of a Hermitian n x n matrix.
/// Returns eigenvalues ascending and the eigenvector matrix (columns).
pub(crate) fn eigh_jacobi<T: Scalar>(a: &[T], n: usize) -> (Vec<f64>, Vec<T>) {
    let mut a = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let fro: f64 = a.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt();
    if fro == 0.0 || n == 1 {
        let vals = (0..n).map(|i| a[i * n + i].re()).collect();
        return sorted_eig(vals, v, n);
    }
    let eps = T::PRECISION.epsilon();
    let stop = fro * eps;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q].abs_sq();
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let apq_abs = apq.abs();
                if apq_abs <= stop / (n as f64) {
                    continue;
                }
                let app = a[p * n + p].re();
                let aqq = a[q * n + q].re();
                let u = apq * T::from_f64(1.0 / apq_abs); // phase
                let theta = (aqq - app) / (2.0 * apq_abs);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J columns: p -> (c, -s*conj(u)); q -> (s, c*conj(u))
                let cu = u.conj();
                let tc = T::from_f64(c);
                let ts = T::from_f64(s);
                // A <- J^H A J: update columns then rows
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = aip * tc - aiq * cu * ts;
                    a[i * n + q] = aip * ts + aiq * cu * tc;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = apj * tc - aqj * u * ts;
                    a[q * n + j] = apj * ts + aqj * u * tc;
                }
                // clean the zeroed pair and enforce real diagonal
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                a[p * n + p] = T::from_f64(a[p * n + p].re());
                a[q * n + q] = T::from_f64(a[q * n + q].re());
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = vip * tc - viq * cu * ts;
                    v[i * n + q] = vip * ts + viq * cu * tc;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| a[i * n + i].re()).collect();
    sorted_eig(vals, v, n)
}

fn sorted_eig<T: Scalar>(vals: Vec<f64>, vecs: Vec<T>, n: usize) -> (Vec<f64>, Vec<T>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = vec![T::zero(); n * n];
    for (new_c, &old_c) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vecs[i * n + new_c] = vecs[i * n + old_c];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// Full SVD of a row-major m x n matrix by pre-QR + one-sided Jacobi.
/// Returns (U: m x k, s descending, V^H: k x n), k = min(m, n).
fn svd_jacobi<T: Scalar>(a: &[T], m: usize, n: usize, backend: crate::backend::BackendId) -> (Vec<T>, Vec<f64>, Vec<T>) {
    if m < n {
        // SVD of A^H = V S U^H
        let mut ah = vec![T::zero(); n * m];
        for i in 0..m {
            for j in 0..n {
                ah[j * m + i] = a[i * n + j].conj();
            }
        }
        let (v, s, uh) = svd_jacobi(&ah, n, m, backend);
        let k = s.len();
        // U = (U^H)^H : m x k ; V^H from v (n x k)
        let mut u = vec![T::zero(); m * k];
        for r in 0..k {
            for i in 0..m {
                u[i * k + r] = uh[r * m + i].conj();
            }
        }
        let mut vt = vec![T::zero(); k * n];
        for r in 0..k {
            for j in 0..n {
                vt[r * n + j] = v[j * k + r].conj();
            }
        }
        return (u, s, vt);
    }
    let k = n;
    // pre-QR: A = Q1 R, then SVD(R)
    let (q1, r) = householder_qr(a, m, n);
    // one-sided Jacobi on R (n x n), column-major work arrays
    let mut w = vec![T::zero(); n * n]; // w[col][row] column-major
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = r[i * n + j];
        }
    }
    let mut v = vec![T::zero(); n * n]; // column-major accumulator
    for j in 0..n {
        v[j * n + j] = T::one();
    }
    let eps = T::PRECISION.epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (cp, rest) = w.split_at_mut(q * n);
                let colp = &mut cp[p * n..p * n + n];
                let colq = &mut rest[..n];
                let mut g = T::zero();
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                for i in 0..n {
                    g += colp[i].conj() * colq[i];
                    app += colp[i].abs_sq();
                    aqq += colq[i].abs_sq();
                }
                let g_abs = g.abs();
                if g_abs <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let u = g * T::from_f64(1.0 / g_abs);
                let theta = (aqq - app) / (2.0 * g_abs);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let cu = u.conj();
                let tc = T::from_f64(c);
                let ts = T::from_f64(s);
                for i in 0..n {
                    let wp = colp[i];
                    let wq = colq[i];
                    colp[i] = wp * tc - wq * cu * ts;
                    colq[i] = wp * ts + wq * cu * tc;
                }
                let (vp_part, v_rest) = v.split_at_mut(q * n);
                let vcolp = &mut vp_part[p * n..p * n + n];
                let vcolq = &mut v_rest[..n];
                for i in 0..n {
                    let vp = vcolp[i];
                    let vq = vcolq[i];
                    vcolp[i] = vp * tc - vq * cu * ts;
                    vcolq[i] = vp * ts + vq * cu * tc;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    // singular values and left vectors of R
    let mut s: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| w[j * n + i].abs_sq()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());
    let smax = order.first().map(|&i| s[i]).unwrap_or(0.0);
    // U2 (n x k column entries), V (n x k) reordered
    let mut u2 = vec![T::zero(); n * k];
    let mut vt = vec![T::zero(); k * n];
    for (new_c, &old_c) in order.iter().enumerate() {
        let sv = s[old_c];
        if sv > smax * f64::EPSILON && sv > 0.0 {
            let inv = T::from_f64(1.0 / sv);
            for i in 0..n {
                u2[i * k + new_c] = w[old_c * n + i] * inv;
            }
        } else {
            // zero singular direction: identity column keeps factors well formed
            u2[new_c * k + new_c] = T::one();
        }
        for j in 0..n {
            vt[new_c * n + j] = v[old_c * n + j].conj();
        }
    }
    let s_sorted: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    s = s_sorted;
    // U = Q1 (m x n) * U2 (n x k)
    let u = crate::backend::matmul(backend, &q1, &u2, m, n, k);
    (u, s, vt)
}

/// SVD via the Gram matrix on the smaller side.
fn svd_via_eigh<T: Scalar>(a: &[T], m: usize, n: usize) -> (Vec<T>, Vec<f64>, Vec<T>) {
    let k = m.min(n);
    if m >= n {
        // G = A^H A (n x n) = V S^2 V^H
        let mut g = vec![T::zero(); n * n];
        for i in 0..m {
            let row = &a[i * n..(i + 1) * n];
            for p in 0..n {
                let cp = row[p].conj();
                for q in 0..n {
                    g[p * n + q] += cp * row[q];
                }
            }
        }
        let (vals, vecs) = eigh_jacobi(&g, n);
        // descending order of sqrt(clamped eigenvalues)
        let mut s = Vec::with_capacity(k);
        let mut u = vec![T::zero(); m * k];
        let mut vt = vec![T::zero(); k * n];
        for r in 0..k {
            let src = n - 1 - r; // eigenvalues ascend
            let lam = vals[src].max(0.0);
            let sv = lam.sqrt();
            s.push(sv);
            for j in 0..n {
                vt[r * n + j] = vecs[j * n + src].conj();
            }
            // u_r = A v_r / s
            if sv > 0.0 {
                let inv = T::from_f64(1.0 / sv);
                for i in 0..m {
                    let mut acc = T::zero();
                    let row = &a[i * n..(i + 1) * n];
                    for j in 0..n {
                        acc += row[j] * vecs[j * n + src];
                    }
                    u[i * k + r] = acc * inv;
                }
            } else if r < m {
                u[r * k + r] = T::one();
            }
        }
        (u, s, vt)
    } else {
        let mut ah = vec![T::zero(); n * m];
        for i in 0..m {
            for j in 0..n {
                ah[j * m + i] = a[i * n + j].conj();
            }
        }
        let (v, s, uh) = svd_via_eigh(&ah, n, m);
        let kk = s.len();
        let mut u = vec![T::zero(); m * kk];
        for r in 0..kk {
            for i in 0..m {
                u[i * kk + r] = uh[r * m + i].conj();
            }
        }
        let mut vt = vec![T::zero(); kk * n];
        for r in 0..kk {
            for j in 0..n {
                vt[r * n + j] = v[j * kk + r].conj();
            }
        }
        (u, s, vt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendId;
    use num_complex::Complex64;

    fn backend() -> BackendId {
        BackendId::reference()
    }

    fn max_iso_dev<T: Scalar>(q: &Tensor<T>) -> f64 {
        // max |Q^H Q - I| with Q matricized over all-but-last vs last axis
        let rank = q.rank();
        let left: Vec<usize> = (0..rank - 1).collect();
        let (mat, _, _) = q.matricize(&left, &[rank - 1]).unwrap();
        let m = mat.shape()[0];
        let k = mat.shape()[1];
        let mut dev = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    acc += mat.data()[i * k + a].conj().to_c64() * mat.data()[i * k + b].to_c64();
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((acc - expect).norm());
            }
        }
        dev
    }

    fn reconstruct<T: Scalar>(r: &SvdResult<T>) -> Tensor<T> {
        let k = r.kept_rank;
        let mut sv = r.v.clone();
        // scale row r of v by s_r
        let n: usize = sv.shape()[1..].iter().product();
        for (row, &s) in (0..k).zip(&r.singular_values) {
            for j in 0..n {
                sv.data_mut()[row * n + j] *= T::from_f64(s);
            }
        }
        r.u.contract(&sv, &[r.u.rank() - 1], &[0]).unwrap()
    }

    #[test]
    fn qr_identity() {
        let eye: Tensor<f64> = Tensor::identity(4, backend());
        let (q, r) = eye.qr(&[0], &[1]).unwrap();
        let qr = q.contract(&r, &[1], &[0]).unwrap();
        for (x, y) in qr.data().iter().zip(eye.data()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(max_iso_dev(&q) < 1e-14);
    }

    #[test]
    fn qr_tall_isometry() {
        let a = Tensor::<f64>::random(vec![6, 3], 5, backend());
        let (q, _r) = a.qr(&[0], &[1]).unwrap();
        assert!(max_iso_dev(&q) < 1e-12);
    }

    #[test]
    fn qr_complex_reconstruction() {
        let a = Tensor::<Complex64>::random(vec![5, 7], 6, backend());
        let (q, r) = a.qr(&[0], &[1]).unwrap();
        let qr = q.contract(&r, &[1], &[0]).unwrap();
        let mut err = 0.0f64;
        for (x, y) in qr.data().iter().zip(a.data()) {
            err += (*x - *y).abs_sq();
        }
        assert!(err.sqrt() < 1e-12, "Frobenius error {}", err.sqrt());
        assert!(max_iso_dev(&q) < 1e-12);
    }

    #[test]
    fn eigh_pauli_z() {
        let sz = Tensor::from_data(vec![2, 2], vec![1.0, 0.0, 0.0, -1.0], backend()).unwrap();
        let (vals, _) = sz.eigh(&[0], &[1]).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_pauli_x() {
        let sx = Tensor::from_data(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0], backend()).unwrap();
        let (vals, vecs) = sx.eigh(&[0], &[1]).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        // residual check A v = lambda v
        for c in 0..2 {
            for i in 0..2 {
                let av: f64 = (0..2).map(|j| sx.get(&[i, j]) * vecs.get(&[j, c])).sum();
                assert!((av - vals[c] * vecs.get(&[i, c])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn eigh_two_site_ising_block() {
        // [[-2g, -J], [-J, 2g]] with J = 1, g = 1 has minimum eigenvalue -sqrt(5)
        let m = Tensor::from_data(vec![2, 2], vec![-2.0, -1.0, -1.0, 2.0], backend()).unwrap();
        let (vals, _) = m.eigh(&[0], &[1]).unwrap();
        assert!((vals[0] + 5.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = Tensor::from_data(vec![2, 2], vec![0.0, 1.0, 0.0, 0.0], backend()).unwrap();
        assert!(matches!(m.eigh(&[0], &[1]), Err(QttnError::Argument(_))));
    }

    #[test]
    fn eigh_random_hermitian_reconstructs() {
        let a = Tensor::<Complex64>::random(vec![6, 6], 8, backend());
        let h = {
            // (A + A^H)/2
            let at = a.permute(&[1, 0]).unwrap().conj();
            let mut h = a.clone();
            h.add_scaled(&at, Complex64::new(1.0, 0.0)).unwrap();
            h.scale_real(0.5);
            h
        };
        let (vals, vecs) = h.eigh(&[0], &[1]).unwrap();
        for c in 0..6 {
            for i in 0..6 {
                let mut av = Complex64::new(0.0, 0.0);
                for j in 0..6 {
                    av += h.get(&[i, j]) * vecs.get(&[j, c]);
                }
                let d = (av - vecs.get(&[i, c]) * vals[c]).norm();
                assert!(d < 1e-11, "residual {d}");
            }
        }
        // ascending
        assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn svd_rank_one() {
        // outer product of unit vectors has a single singular value 1
        let u = Tensor::from_data(vec![3, 1], vec![0.6, 0.8, 0.0], backend()).unwrap();
        let v = Tensor::from_data(vec![1, 4], vec![0.0, 1.0, 0.0, 0.0], backend()).unwrap();
        let a = u.contract(&v, &[1], &[0]).unwrap();
        let r = a.svd(&[0], &[1], 4, 1e-9, SvdAlgorithm::Direct).unwrap();
        assert_eq!(r.kept_rank, 1);
        assert!((r.singular_values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_diagonal_truncation() {
        let a = Tensor::from_data(
            vec![3, 3],
            vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0],
            backend(),
        )
        .unwrap();
        let r = a.svd(&[0], &[1], 2, 0.0, SvdAlgorithm::Direct).unwrap();
        assert_eq!(r.kept_rank, 2);
        assert!((r.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((r.singular_values[1] - 2.0).abs() < 1e-12);
        assert!((r.truncation_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_via_eigh_matches_direct() {
        let a = Tensor::<f64>::random(vec![8, 8], 17, backend());
        let d = a.svd(&[0], &[1], 8, 0.0, SvdAlgorithm::Direct).unwrap();
        let e = a.svd(&[0], &[1], 8, 0.0, SvdAlgorithm::ViaEigh).unwrap();
        for (x, y) in d.singular_values.iter().zip(&e.singular_values) {
            assert!((x - y).abs() < 1e-9 * x.max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn svd_reconstruction_error_equals_truncation_error() {
        let a = Tensor::<f64>::random(vec![6, 9], 23, backend());
        let r = a.svd(&[0], &[1], 3, 0.0, SvdAlgorithm::Direct).unwrap();
        let rec = reconstruct(&r);
        let mut err = 0.0f64;
        for (x, y) in rec.data().iter().zip(a.data()) {
            err += (x - y) * (x - y);
        }
        assert!((err.sqrt() - r.truncation_error).abs() < 1e-10);
        assert!(max_iso_dev(&r.u) < 1e-12);
    }

    #[test]
    fn svd_wide_matrix() {
        let a = Tensor::<Complex64>::random(vec![3, 7], 29, backend());
        let r = a.svd(&[0], &[1], 3, 0.0, SvdAlgorithm::Direct).unwrap();
        let rec = reconstruct(&r);
        let mut err = 0.0f64;
        for (x, y) in rec.data().iter().zip(a.data()) {
            err += (*x - *y).abs_sq();
        }
        assert!(err.sqrt() < 1e-11, "err {}", err.sqrt());
    }

    #[test]
    fn svd_zero_matrix_convention() {
        let a: Tensor<f64> = Tensor::zeros(vec![3, 3], backend());
        let r = a.svd(&[0], &[1], 3, 1e-9, SvdAlgorithm::Direct).unwrap();
        assert_eq!(r.kept_rank, 1);
        assert_eq!(r.singular_values[0], 0.0);
        assert!(max_iso_dev(&r.u) < 1e-14);
    }

    #[test]
    fn svd_singular_values_non_increasing() {
        let a = Tensor::<f64>::random(vec![7, 5], 31, backend());
        let r = a.svd(&[0], &[1], 5, 0.0, SvdAlgorithm::Direct).unwrap();
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.singular_values.iter().all(|&s| s >= 0.0));
    }
}
