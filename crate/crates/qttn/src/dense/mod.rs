//! Dense multi-linear arrays with row-major element storage.
//!
//! `Tensor<T>` is the building block everything else is assembled from:
//! TTN nodes, environment matrices, and the per-charge blocks of the
//! symmetric tensors. Elements are stored row-major independent of the
//! backend, so serialized tensors are backend-portable.

mod decomp;

pub use decomp::{decide_kept, SvdAlgorithm, SvdResult};
pub(crate) use decomp::eigh_jacobi;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::backend::{matmul, BackendId};
use crate::error::{QttnError, Result};
use crate::precision::{Precision, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
    backend: BackendId,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_data(shape: Vec<usize>, data: Vec<T>, backend: BackendId) -> Result<Self> {
        let count: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(QttnError::Shape(format!(
                "link dimensions must be positive, got {shape:?}"
            )));
        }
        if data.len() != count {
            return Err(QttnError::Shape(format!(
                "element count {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor { shape, data, backend })
    }

    pub fn zeros(shape: Vec<usize>, backend: BackendId) -> Self {
        let count: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::zero(); count],
            backend,
        }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize, backend: BackendId) -> Self {
        let mut t = Tensor::zeros(vec![n, n], backend);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    /// Deterministic random tensor; entries i.i.d. uniform on [-1, 1]
    /// (each complex component independently).
    pub fn random(shape: Vec<usize>, seed: u64, backend: BackendId) -> Self {
        let count: usize = shape.iter().product();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..count)
            .map(|_| {
                let re: f64 = rng.gen_range(-1.0..=1.0);
                if T::PRECISION.is_complex() {
                    let im: f64 = rng.gen_range(-1.0..=1.0);
                    T::from_c64(num_complex::Complex64::new(re, im))
                } else {
                    T::from_f64(re)
                }
            })
            .collect();
        Tensor { shape, data, backend }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn backend(&self) -> BackendId {
        self.backend
    }

    pub fn set_backend(&mut self, backend: BackendId) {
        self.backend = backend;
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn get(&self, index: &[usize]) -> T {
        debug_assert_eq!(index.len(), self.rank());
        let mut flat = 0;
        for (i, &d) in index.iter().zip(&self.shape) {
            debug_assert!(*i < d);
            flat = flat * d + i;
        }
        self.data[flat]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let mut flat = 0;
        for (i, &d) in index.iter().zip(&self.shape) {
            flat = flat * d + i;
        }
        self.data[flat] = value;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn conj(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x.conj()).collect(),
            backend: self.backend,
        }
    }

    pub fn scale_real(&mut self, f: f64) {
        let f = T::from_f64(f);
        for x in &mut self.data {
            *x *= f;
        }
    }

    pub fn scaled(&self, f: T) -> Self {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= f;
        }
        out
    }

    /// self += alpha * other (shapes must match).
    pub fn add_scaled(&mut self, other: &Self, alpha: T) -> Result<()> {
        if self.shape != other.shape {
            return Err(QttnError::Shape(format!(
                "add_scaled shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * *y;
        }
        Ok(())
    }

    /// Full inner product <self|other> = sum conj(self_i) * other_i.
    pub fn inner(&self, other: &Self) -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for (x, y) in self.data.iter().zip(&other.data) {
            acc += x.conj().to_c64() * y.to_c64();
        }
        acc
    }

    /// Reorder axes; elements are repositioned accordingly.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let rank = self.rank();
        if order.len() != rank {
            return Err(QttnError::Argument(format!(
                "permutation length {} does not match rank {rank}",
                order.len()
            )));
        }
        let mut seen = vec![false; rank];
        for &ax in order {
            if ax >= rank || seen[ax] {
                return Err(QttnError::Argument(format!("invalid permutation {order:?}")));
            }
            seen[ax] = true;
        }
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = order.iter().map(|&ax| self.shape[ax]).collect();
        let old_strides = strides(&self.shape);
        // stride in the input for each output axis
        let in_strides: Vec<usize> = order.iter().map(|&ax| old_strides[ax]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; rank];
        let mut offset = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[offset]);
            // odometer increment over the output index
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                offset += in_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                offset -= in_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Tensor {
            shape: new_shape,
            data,
            backend: self.backend,
        })
    }

    /// Fuse consecutive index groups into single axes. Groups must cover all
    /// axes, in order (permute first if needed); the data is unchanged.
    pub fn fuse(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let mut expected = 0usize;
        let mut new_shape = Vec::with_capacity(groups.len());
        for group in groups {
            let mut dim = 1usize;
            for &ax in group {
                if ax != expected {
                    return Err(QttnError::Shape(format!(
                        "fuse groups must list all axes consecutively in order, got {groups:?}"
                    )));
                }
                dim *= self.shape[ax];
                expected += 1;
            }
            new_shape.push(dim);
        }
        if expected != self.rank() {
            return Err(QttnError::Shape(format!(
                "fuse groups cover {expected} of {} axes",
                self.rank()
            )));
        }
        Ok(Tensor {
            shape: new_shape,
            data: self.data.clone(),
            backend: self.backend,
        })
    }

    /// Split one axis into several; `dims` must multiply to the axis dimension.
    pub fn split(&self, axis: usize, dims: &[usize]) -> Result<Self> {
        if axis >= self.rank() {
            return Err(QttnError::Argument(format!("split axis {axis} out of range")));
        }
        let prod: usize = dims.iter().product();
        if prod != self.shape[axis] {
            return Err(QttnError::Shape(format!(
                "split dims {:?} do not factor axis dimension {}",
                dims, self.shape[axis]
            )));
        }
        let mut new_shape = Vec::with_capacity(self.rank() + dims.len() - 1);
        new_shape.extend_from_slice(&self.shape[..axis]);
        new_shape.extend_from_slice(dims);
        new_shape.extend_from_slice(&self.shape[axis + 1..]);
        Ok(Tensor {
            shape: new_shape,
            data: self.data.clone(),
            backend: self.backend,
        })
    }

    /// Tensor-dot over the paired axes. Remaining axes are ordered: free axes
    /// of `self`, then free axes of `other`.
    pub fn contract(&self, other: &Self, axes_a: &[usize], axes_b: &[usize]) -> Result<Self> {
        if axes_a.len() != axes_b.len() {
            return Err(QttnError::Argument(format!(
                "axis lists differ in length: {} vs {}",
                axes_a.len(),
                axes_b.len()
            )));
        }
        for (&ax_a, &ax_b) in axes_a.iter().zip(axes_b) {
            if ax_a >= self.rank() || ax_b >= other.rank() {
                return Err(QttnError::Argument(format!(
                    "contraction axis out of range: ({ax_a}, {ax_b})"
                )));
            }
            if self.shape[ax_a] != other.shape[ax_b] {
                return Err(QttnError::Shape(format!(
                    "contracted dimensions differ: axis {ax_a} ({}) vs axis {ax_b} ({})",
                    self.shape[ax_a], other.shape[ax_b]
                )));
            }
        }
        let free_a: Vec<usize> = (0..self.rank()).filter(|ax| !axes_a.contains(ax)).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|ax| !axes_b.contains(ax)).collect();

        let mut order_a = free_a.clone();
        order_a.extend_from_slice(axes_a);
        let mut order_b: Vec<usize> = axes_b.to_vec();
        order_b.extend_from_slice(&free_b);

        let pa = self.permute(&order_a)?;
        let pb = other.permute(&order_b)?;

        let m: usize = free_a.iter().map(|&ax| self.shape[ax]).product();
        let k: usize = axes_a.iter().map(|&ax| self.shape[ax]).product();
        let n: usize = free_b.iter().map(|&ax| other.shape[ax]).product();

        let data = matmul(self.backend, &pa.data, &pb.data, m, k, n);
        let mut shape: Vec<usize> = free_a.iter().map(|&ax| self.shape[ax]).collect();
        shape.extend(free_b.iter().map(|&ax| other.shape[ax]));
        if shape.is_empty() {
            shape.push(1);
        }
        Tensor::from_data(shape, data, self.backend)
    }

    /// Cast elements to another scalar kind. Complex -> real requires the
    /// imaginary content to be negligible (max |Im| < 1e-8 * norm).
    pub fn convert<U: Scalar>(&self) -> Result<Tensor<U>> {
        if T::PRECISION.is_complex() && !U::PRECISION.is_complex() {
            let norm = self.norm();
            let max_im = self.data.iter().map(|x| x.im().abs()).fold(0.0, f64::max);
            if max_im >= 1e-8 * norm.max(f64::MIN_POSITIVE) {
                return Err(QttnError::Precision(format!(
                    "lossy complex->real conversion: max |Im| = {max_im:.3e}, norm = {norm:.3e}"
                )));
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::from_c64(x.to_c64())).collect(),
            backend: self.backend,
        })
    }

    /// Permute-and-fuse into a matrix: (product of left axes) x (product of
    /// right axes). Returns the matrix tensor together with the axis dims.
    pub fn matricize(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(Tensor<T>, Vec<usize>, Vec<usize>)> {
        let rank = self.rank();
        let mut order: Vec<usize> = left_axes.to_vec();
        order.extend_from_slice(right_axes);
        if order.len() != rank {
            return Err(QttnError::Argument(format!(
                "left {left_axes:?} + right {right_axes:?} must cover all {rank} axes"
            )));
        }
        let permuted = self.permute(&order)?;
        let left_dims: Vec<usize> = left_axes.iter().map(|&ax| self.shape[ax]).collect();
        let right_dims: Vec<usize> = right_axes.iter().map(|&ax| self.shape[ax]).collect();
        let m: usize = left_dims.iter().product();
        let n: usize = right_dims.iter().product();
        let mat = Tensor {
            shape: vec![m, n],
            data: permuted.data,
            backend: self.backend,
        };
        Ok((mat, left_dims, right_dims))
    }

    /// Write in the binary tensor format shared with `DynTensor`: magic
    /// "QTTN", version, precision tag, rank, dims as u64 list, raw
    /// little-endian elements.
    pub fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(crate::dyn_tensor::TENSOR_MAGIC)?;
        w.write_all(&crate::dyn_tensor::TENSOR_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[T::PRECISION.tag()])?;
        if self.rank() > u8::MAX as usize {
            return Err(QttnError::Format("tensor rank exceeds format limit".into()));
        }
        w.write_all(&[self.rank() as u8])?;
        for &d in &self.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for x in &self.data {
            write_element(w, x.to_c64(), T::PRECISION)?;
        }
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(r: &mut R, backend: BackendId) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != crate::dyn_tensor::TENSOR_MAGIC {
            return Err(QttnError::Format("bad tensor magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != crate::dyn_tensor::TENSOR_FORMAT_VERSION {
            return Err(QttnError::Format("unsupported tensor format version".into()));
        }
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        let precision = Precision::from_tag(b[0])?;
        if precision != T::PRECISION {
            return Err(QttnError::Precision(format!(
                "stored precision {precision} does not match requested {}",
                T::PRECISION
            )));
        }
        r.read_exact(&mut b)?;
        let rank = b[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut b8 = [0u8; 8];
        for _ in 0..rank {
            r.read_exact(&mut b8)?;
            shape.push(u64::from_le_bytes(b8) as usize);
        }
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(T::from_c64(read_element(r, T::PRECISION)?));
        }
        Tensor::from_data(shape, data, backend)
    }
}

pub(crate) fn write_element<W: std::io::Write>(
    w: &mut W,
    v: num_complex::Complex64,
    precision: Precision,
) -> Result<()> {
    match precision {
        Precision::S => w.write_all(&(v.re as f32).to_le_bytes())?,
        Precision::D => w.write_all(&v.re.to_le_bytes())?,
        Precision::C => {
            w.write_all(&(v.re as f32).to_le_bytes())?;
            w.write_all(&(v.im as f32).to_le_bytes())?;
        }
        Precision::Z => {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn read_element<R: std::io::Read>(
    r: &mut R,
    precision: Precision,
) -> Result<num_complex::Complex64> {
    let mut f4 = [0u8; 4];
    let mut f8 = [0u8; 8];
    Ok(match precision {
        Precision::S => {
            r.read_exact(&mut f4)?;
            num_complex::Complex64::new(f32::from_le_bytes(f4) as f64, 0.0)
        }
        Precision::C => {
            r.read_exact(&mut f4)?;
            let re = f32::from_le_bytes(f4) as f64;
            r.read_exact(&mut f4)?;
            num_complex::Complex64::new(re, f32::from_le_bytes(f4) as f64)
        }
        Precision::D => {
            r.read_exact(&mut f8)?;
            num_complex::Complex64::new(f64::from_le_bytes(f8), 0.0)
        }
        Precision::Z => {
            r.read_exact(&mut f8)?;
            let re = f64::from_le_bytes(f8);
            r.read_exact(&mut f8)?;
            num_complex::Complex64::new(re, f64::from_le_bytes(f8))
        }
    })
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}
