//! Scalar precisions and the element trait the tensor types are generic over.
//!
//! Four scalar kinds are supported: single real (`S`), single complex (`C`),
//! double real (`D`), and double complex (`Z`). Algorithms are written once,
//! generic over [`Scalar`]; a sweep schedule picks the concrete kind per sweep.

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{QttnError, Result};

/// Scalar precision tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    /// 32-bit real.
    S,
    /// 64-bit complex (two 32-bit parts).
    C,
    /// 64-bit real.
    D,
    /// 128-bit complex (two 64-bit parts).
    Z,
}

impl Precision {
    pub fn bytes_per_scalar(self) -> usize {
        match self {
            Precision::S => 4,
            Precision::C => 8,
            Precision::D => 8,
            Precision::Z => 16,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Precision::C | Precision::Z)
    }

    /// Machine epsilon of the underlying real type.
    pub fn epsilon(self) -> f64 {
        match self {
            Precision::S | Precision::C => f32::EPSILON as f64,
            Precision::D | Precision::Z => f64::EPSILON,
        }
    }

    /// Tolerance used for isometry and reconstruction checks at this precision.
    pub fn check_tol(self) -> f64 {
        match self {
            Precision::S | Precision::C => 1e-5,
            Precision::D | Precision::Z => 1e-12,
        }
    }

    /// Whether a value of `self` can be converted to `target` without a
    /// lossiness check. Real -> complex and low -> high always upcast; any
    /// complex -> real conversion needs the runtime imaginary-part check.
    pub fn upcast_ok(self, target: Precision) -> bool {
        use Precision::*;
        matches!(
            (self, target),
            (S, S) | (S, C) | (S, D) | (S, Z) | (C, C) | (C, Z) | (D, D) | (D, Z) | (Z, Z)
        ) || matches!((self, target), (D, C))
        // D -> C loses mantissa but is real -> complex; treated as a cast, not lossy.
    }

    pub fn from_tag(tag: u8) -> Result<Precision> {
        match tag {
            0 => Ok(Precision::S),
            1 => Ok(Precision::C),
            2 => Ok(Precision::D),
            3 => Ok(Precision::Z),
            t => Err(QttnError::Format(format!("unknown precision tag {t}"))),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Precision::S => 0,
            Precision::C => 1,
            Precision::D => 2,
            Precision::Z => 3,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Precision::S => 'S',
            Precision::C => 'C',
            Precision::D => 'D',
            Precision::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Result<Precision> {
        match c {
            'S' => Ok(Precision::S),
            'C' => Ok(Precision::C),
            'D' => Ok(Precision::D),
            'Z' => Ok(Precision::Z),
            _ => Err(QttnError::Config(format!(
                "schedule characters must be one of S, C, D, Z; got '{c}'"
            ))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Element type of a tensor. Implemented for `f32`, `f64`, `Complex32`,
/// and `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + Send
    + Sync
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + 'static
{
    const PRECISION: Precision;

    fn zero() -> Self;
    fn one() -> Self;
    fn conj(self) -> Self;
    /// Real part as f64.
    fn re(self) -> f64;
    /// Imaginary part as f64 (zero for real kinds).
    fn im(self) -> f64;
    /// |x|^2 as f64.
    fn abs_sq(self) -> f64;
    fn to_c64(self) -> Complex64;
    /// Build from a complex value; for real kinds the imaginary part is dropped
    /// (callers check lossiness beforehand).
    fn from_c64(v: Complex64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn is_finite(self) -> bool;

    fn abs(self) -> f64 {
        self.abs_sq().sqrt()
    }
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::S;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self as f64
    }
    fn im(self) -> f64 {
        0.0
    }
    fn abs_sq(self) -> f64 {
        (self as f64) * (self as f64)
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self as f64, 0.0)
    }
    fn from_c64(v: Complex64) -> Self {
        v.re as f32
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::D;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_c64(v: Complex64) -> Self {
        v.re
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex32 {
    const PRECISION: Precision = Precision::C;
    fn zero() -> Self {
        Complex32::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex32::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex32::conj(&self)
    }
    fn re(self) -> f64 {
        self.re as f64
    }
    fn im(self) -> f64 {
        self.im as f64
    }
    fn abs_sq(self) -> f64 {
        (self.re as f64) * (self.re as f64) + (self.im as f64) * (self.im as f64)
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
    fn from_c64(v: Complex64) -> Self {
        Complex32::new(v.re as f32, v.im as f32)
    }
    fn from_f64(v: f64) -> Self {
        Complex32::new(v as f32, 0.0)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Scalar for Complex64 {
    const PRECISION: Precision = Precision::Z;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn abs_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn from_c64(v: Complex64) -> Self {
        v
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}
