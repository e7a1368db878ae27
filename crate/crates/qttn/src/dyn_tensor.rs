//! Precision-tagged dynamic tensor and the binary interchange format.
//!
//! `DynTensor` wraps the four concrete `Tensor<T>` instantiations behind one
//! runtime type. Mixed-precision operands are an error by contract: callers
//! convert explicitly. This is the surface used by serialization,
//! checkpointing, and the CLI; the solver internals stay generic.

use std::io::{Read, Write};

use num_complex::{Complex32, Complex64};

use crate::backend::BackendId;
use crate::dense::{SvdAlgorithm, Tensor};
use crate::error::{QttnError, Result};
use crate::precision::Precision;

pub const TENSOR_MAGIC: &[u8; 4] = b"QTTN";
pub const TENSOR_FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum DynTensor {
    S(Tensor<f32>),
    C(Tensor<Complex32>),
    D(Tensor<f64>),
    Z(Tensor<Complex64>),
}

macro_rules! for_each_variant {
    ($self:expr, $t:ident => $body:expr) => {
        match $self {
            DynTensor::S($t) => $body,
            DynTensor::C($t) => $body,
            DynTensor::D($t) => $body,
            DynTensor::Z($t) => $body,
        }
    };
}

macro_rules! same_variant_binop {
    ($a:expr, $b:expr, $ta:ident, $tb:ident => $body:expr, $opname:expr) => {
        match ($a, $b) {
            (DynTensor::S($ta), DynTensor::S($tb)) => $body.map(DynTensor::S),
            (DynTensor::C($ta), DynTensor::C($tb)) => $body.map(DynTensor::C),
            (DynTensor::D($ta), DynTensor::D($tb)) => $body.map(DynTensor::D),
            (DynTensor::Z($ta), DynTensor::Z($tb)) => $body.map(DynTensor::Z),
            (a, b) => Err(QttnError::Precision(format!(
                "{}: operand precisions differ ({} vs {}); convert explicitly",
                $opname,
                a.precision(),
                b.precision()
            ))),
        }
    };
}

impl DynTensor {
    pub fn random(shape: Vec<usize>, precision: Precision, seed: u64, backend: BackendId) -> Self {
        match precision {
            Precision::S => DynTensor::S(Tensor::random(shape, seed, backend)),
            Precision::C => DynTensor::C(Tensor::random(shape, seed, backend)),
            Precision::D => DynTensor::D(Tensor::random(shape, seed, backend)),
            Precision::Z => DynTensor::Z(Tensor::random(shape, seed, backend)),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            DynTensor::S(_) => Precision::S,
            DynTensor::C(_) => Precision::C,
            DynTensor::D(_) => Precision::D,
            DynTensor::Z(_) => Precision::Z,
        }
    }

    pub fn shape(&self) -> &[usize] {
        for_each_variant!(self, t => t.shape())
    }

    pub fn rank(&self) -> usize {
        self.shape().len()
    }

    pub fn norm(&self) -> f64 {
        for_each_variant!(self, t => t.norm())
    }

    pub fn backend(&self) -> BackendId {
        for_each_variant!(self, t => t.backend())
    }

    pub fn contract(&self, other: &DynTensor, axes_a: &[usize], axes_b: &[usize]) -> Result<DynTensor> {
        same_variant_binop!(self, other, a, b => a.contract(b, axes_a, axes_b), "contract")
    }

    pub fn permute(&self, order: &[usize]) -> Result<DynTensor> {
        Ok(match self {
            DynTensor::S(t) => DynTensor::S(t.permute(order)?),
            DynTensor::C(t) => DynTensor::C(t.permute(order)?),
            DynTensor::D(t) => DynTensor::D(t.permute(order)?),
            DynTensor::Z(t) => DynTensor::Z(t.permute(order)?),
        })
    }

    pub fn fuse(&self, groups: &[Vec<usize>]) -> Result<DynTensor> {
        Ok(match self {
            DynTensor::S(t) => DynTensor::S(t.fuse(groups)?),
            DynTensor::C(t) => DynTensor::C(t.fuse(groups)?),
            DynTensor::D(t) => DynTensor::D(t.fuse(groups)?),
            DynTensor::Z(t) => DynTensor::Z(t.fuse(groups)?),
        })
    }

    pub fn split(&self, axis: usize, dims: &[usize]) -> Result<DynTensor> {
        Ok(match self {
            DynTensor::S(t) => DynTensor::S(t.split(axis, dims)?),
            DynTensor::C(t) => DynTensor::C(t.split(axis, dims)?),
            DynTensor::D(t) => DynTensor::D(t.split(axis, dims)?),
            DynTensor::Z(t) => DynTensor::Z(t.split(axis, dims)?),
        })
    }

    pub fn qr(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(DynTensor, DynTensor)> {
        Ok(match self {
            DynTensor::S(t) => {
                let (q, r) = t.qr(left_axes, right_axes)?;
                (DynTensor::S(q), DynTensor::S(r))
            }
            DynTensor::C(t) => {
                let (q, r) = t.qr(left_axes, right_axes)?;
                (DynTensor::C(q), DynTensor::C(r))
            }
            DynTensor::D(t) => {
                let (q, r) = t.qr(left_axes, right_axes)?;
                (DynTensor::D(q), DynTensor::D(r))
            }
            DynTensor::Z(t) => {
                let (q, r) = t.qr(left_axes, right_axes)?;
                (DynTensor::Z(q), DynTensor::Z(r))
            }
        })
    }

    /// Truncated SVD; singular values and truncation error are always real.
    pub fn svd(
        &self,
        left_axes: &[usize],
        right_axes: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
    ) -> Result<(DynTensor, Vec<f64>, DynTensor, f64, usize)> {
        macro_rules! go {
            ($t:expr, $variant:ident) => {{
                let r = $t.svd(left_axes, right_axes, max_rank, cutoff, algorithm)?;
                Ok((
                    DynTensor::$variant(r.u),
                    r.singular_values,
                    DynTensor::$variant(r.v),
                    r.truncation_error,
                    r.kept_rank,
                ))
            }};
        }
        match self {
            DynTensor::S(t) => go!(t, S),
            DynTensor::C(t) => go!(t, C),
            DynTensor::D(t) => go!(t, D),
            DynTensor::Z(t) => go!(t, Z),
        }
    }

    pub fn eigh(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(Vec<f64>, DynTensor)> {
        Ok(match self {
            DynTensor::S(t) => {
                let (vals, vecs) = t.eigh(left_axes, right_axes)?;
                (vals, DynTensor::S(vecs))
            }
            DynTensor::C(t) => {
                let (vals, vecs) = t.eigh(left_axes, right_axes)?;
                (vals, DynTensor::C(vecs))
            }
            DynTensor::D(t) => {
                let (vals, vecs) = t.eigh(left_axes, right_axes)?;
                (vals, DynTensor::D(vecs))
            }
            DynTensor::Z(t) => {
                let (vals, vecs) = t.eigh(left_axes, right_axes)?;
                (vals, DynTensor::Z(vecs))
            }
        })
    }

    pub fn convert(&self, target: Precision) -> Result<DynTensor> {
        macro_rules! conv {
            ($t:expr) => {
                match target {
                    Precision::S => $t.convert::<f32>().map(DynTensor::S),
                    Precision::C => $t.convert::<Complex32>().map(DynTensor::C),
                    Precision::D => $t.convert::<f64>().map(DynTensor::D),
                    Precision::Z => $t.convert::<Complex64>().map(DynTensor::Z),
                }
            };
        }
        for_each_variant!(self, t => conv!(t))
    }

    /// Write in the binary tensor format: magic "QTTN", version, precision
    /// tag, rank, dims as u64 list, then raw little-endian elements.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&TENSOR_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.precision().tag()])?;
        let shape = self.shape();
        if shape.len() > u8::MAX as usize {
            return Err(QttnError::Format("tensor rank exceeds format limit".into()));
        }
        w.write_all(&[shape.len() as u8])?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        match self {
            DynTensor::S(t) => {
                for x in t.data() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            DynTensor::C(t) => {
                for x in t.data() {
                    w.write_all(&x.re.to_le_bytes())?;
                    w.write_all(&x.im.to_le_bytes())?;
                }
            }
            DynTensor::D(t) => {
                for x in t.data() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            DynTensor::Z(t) => {
                for x in t.data() {
                    w.write_all(&x.re.to_le_bytes())?;
                    w.write_all(&x.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, backend: BackendId) -> Result<DynTensor> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(QttnError::Format("bad tensor magic".into()));
        }
        let mut buf2 = [0u8; 2];
        r.read_exact(&mut buf2)?;
        let version = u16::from_le_bytes(buf2);
        if version != TENSOR_FORMAT_VERSION {
            return Err(QttnError::Format(format!("unsupported tensor format version {version}")));
        }
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        let precision = Precision::from_tag(b[0])?;
        r.read_exact(&mut b)?;
        let rank = b[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut buf8 = [0u8; 8];
        for _ in 0..rank {
            r.read_exact(&mut buf8)?;
            shape.push(u64::from_le_bytes(buf8) as usize);
        }
        let count: usize = shape.iter().product();
        Ok(match precision {
            Precision::S => {
                let mut data = Vec::with_capacity(count);
                let mut buf = [0u8; 4];
                for _ in 0..count {
                    r.read_exact(&mut buf)?;
                    data.push(f32::from_le_bytes(buf));
                }
                DynTensor::S(Tensor::from_data(shape, data, backend)?)
            }
            Precision::C => {
                let mut data = Vec::with_capacity(count);
                let mut buf = [0u8; 4];
                for _ in 0..count {
                    r.read_exact(&mut buf)?;
                    let re = f32::from_le_bytes(buf);
                    r.read_exact(&mut buf)?;
                    let im = f32::from_le_bytes(buf);
                    data.push(Complex32::new(re, im));
                }
                DynTensor::C(Tensor::from_data(shape, data, backend)?)
            }
            Precision::D => {
                let mut data = Vec::with_capacity(count);
                for _ in 0..count {
                    r.read_exact(&mut buf8)?;
                    data.push(f64::from_le_bytes(buf8));
                }
                DynTensor::D(Tensor::from_data(shape, data, backend)?)
            }
            Precision::Z => {
                let mut data = Vec::with_capacity(count);
                for _ in 0..count {
                    r.read_exact(&mut buf8)?;
                    let re = f64::from_le_bytes(buf8);
                    r.read_exact(&mut buf8)?;
                    let im = f64::from_le_bytes(buf8);
                    data.push(Complex64::new(re, im));
                }
                DynTensor::Z(Tensor::from_data(shape, data, backend)?)
            }
        })
    }
}

impl From<Tensor<f32>> for DynTensor {
    fn from(t: Tensor<f32>) -> Self {
        DynTensor::S(t)
    }
}
impl From<Tensor<f64>> for DynTensor {
    fn from(t: Tensor<f64>) -> Self {
        DynTensor::D(t)
    }
}
impl From<Tensor<Complex32>> for DynTensor {
    fn from(t: Tensor<Complex32>) -> Self {
        DynTensor::C(t)
    }
}
impl From<Tensor<Complex64>> for DynTensor {
    fn from(t: Tensor<Complex64>) -> Self {
        DynTensor::Z(t)
    }
}
