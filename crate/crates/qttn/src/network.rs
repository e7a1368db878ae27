//! The tensor surface the tree-network code is written against.
//!
//! [`NetTensor`] is implemented by the dense [`Tensor`] and by the Z2
//! block-sparse [`BlockSparseTensor`], so state handling, environment
//! contraction, and the sweep driver exist exactly once. Link-direction
//! conventions used throughout:
//!
//! - a state tensor has axes `[left child, right child, parent]`; child
//!   axes are incoming, the parent axis is outgoing (these labels are fixed
//!   by the tree, not by where the isometry points);
//! - an environment matrix is `[bra-facing, ket-facing]`: axis 1 contracts
//!   with the state tensor, axis 0 with its conjugate.

use num_complex::Complex64;

use crate::backend::BackendId;
use crate::dense::{SvdAlgorithm, Tensor};
use crate::error::Result;
use crate::model::PauliOp;
use crate::precision::Scalar;
use crate::sparse::{BlockSparseTensor, LinkDir, Z2Link};

/// A tree link: a plain dimension for dense tensors, a graded dimension
/// pair for Z2 tensors.
pub trait NetLink: Copy + std::fmt::Debug + Send + Sync + 'static {
    fn total_dim(&self) -> usize;
    /// Uncapped product link of two child links.
    fn fuse(a: &Self, b: &Self) -> Self;
    /// Cap the link at chi total states.
    fn cap(&self, chi: usize) -> Self;
    /// Dimension equality, ignoring direction labels.
    fn dims_eq(a: &Self, b: &Self) -> bool;
    /// Normalize the direction label for use as a child axis (incoming).
    fn as_child(self) -> Self;
    /// Normalize the direction label for use as a parent axis (outgoing).
    fn as_parent(self) -> Self;
}

impl NetLink for usize {
    fn total_dim(&self) -> usize {
        *self
    }
    fn fuse(a: &Self, b: &Self) -> Self {
        a * b
    }
    fn cap(&self, chi: usize) -> Self {
        (*self).min(chi)
    }
    fn dims_eq(a: &Self, b: &Self) -> bool {
        a == b
    }
    fn as_child(self) -> Self {
        self
    }
    fn as_parent(self) -> Self {
        self
    }
}

impl NetLink for Z2Link {
    fn total_dim(&self) -> usize {
        Z2Link::total_dim(self)
    }
    fn fuse(a: &Self, b: &Self) -> Self {
        // even x even and odd x odd fuse to even; mixed fuses to odd
        Z2Link::new(
            a.dims[0] * b.dims[0] + a.dims[1] * b.dims[1],
            a.dims[0] * b.dims[1] + a.dims[1] * b.dims[0],
            LinkDir::Incoming,
        )
    }
    fn cap(&self, chi: usize) -> Self {
        if self.total_dim() <= chi {
            return *self;
        }
        // split the budget as evenly as the sectors allow, even first
        let even = self.dims[0].min(chi.div_ceil(2));
        let odd = self.dims[1].min(chi - even);
        let even = self.dims[0].min(chi - odd); // give leftover budget back
        Z2Link::new(even, odd, self.dir)
    }
    fn dims_eq(a: &Self, b: &Self) -> bool {
        a.dims == b.dims
    }
    fn as_child(self) -> Self {
        Z2Link { dir: LinkDir::Incoming, ..self }
    }
    fn as_parent(self) -> Self {
        Z2Link { dir: LinkDir::Outgoing, ..self }
    }
}

/// Tensor operations the network layer needs, implemented for both tensor
/// representations at every precision.
pub trait NetTensor: Clone + Send + Sync + 'static {
    type Elem: Scalar;
    type Link: NetLink;

    /// The physical (qubit) link.
    fn phys_link() -> Self::Link;
    /// The dimension-1 top selector link. For the Z2 family this pins the
    /// state to the even parity sector.
    fn selector_link() -> Self::Link;
    /// Random rank-3 state tensor over `[left, right, parent]` links.
    fn random3(links: [Self::Link; 3], seed: u64, backend: BackendId) -> Self;
    /// Single-site Pauli operator as an environment-shaped matrix.
    fn site_op(op: PauliOp, backend: BackendId) -> Self;
    /// Identity environment on a ket-facing link.
    fn identity_env(ket_link: Self::Link, backend: BackendId) -> Self;

    fn rank(&self) -> usize;
    fn link(&self, axis: usize) -> Self::Link;
    fn backend(&self) -> BackendId;
    fn set_backend(&mut self, backend: BackendId);

    fn contract(&self, other: &Self, axes_a: &[usize], axes_b: &[usize]) -> Result<Self>;
    fn permute(&self, order: &[usize]) -> Result<Self>;
    fn conj(&self) -> Self;
    fn norm(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn scale_real(&mut self, f: f64);
    fn add_scaled(&mut self, other: &Self, alpha: Self::Elem) -> Result<()>;
    fn inner(&self, other: &Self) -> Complex64;

    /// Flip the direction label of one link (no data change; the matching
    /// tensor on the other side of the link must flip too).
    fn flip_link(&mut self, axis: usize);

    /// Thin QR over the (left | right) matricization. Q carries the left
    /// axes plus a new last axis; R is `[new axis, right axes]`.
    fn qr(&self, left: &[usize], right: &[usize]) -> Result<(Self, Self)>;

    /// Truncated SVD returning `(U, S·V, truncation_error, kept_rank)`,
    /// with the singular values already absorbed into the right factor.
    fn svd_sv(
        &self,
        left: &[usize],
        right: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
        tile_entries: Option<usize>,
    ) -> Result<(Self, Self, f64, usize)>;

    /// Stable flat view of the coefficients (basis order fixed by the link
    /// structure), for use as a Lanczos vector.
    fn to_flat(&self) -> Vec<Self::Elem>;
    /// Rebuild a tensor with the same link structure as `self` from a flat
    /// view of the same length.
    fn from_flat(&self, data: &[Self::Elem]) -> Result<Self>;

    /// Dense embedding (identity for the dense family).
    fn densify(&self) -> Tensor<Self::Elem>;

    /// Serialize in the self-describing binary tensor format.
    fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()>;
    fn read_from<R: std::io::Read>(r: &mut R, backend: BackendId) -> Result<Self>;
}

impl<T: Scalar> NetTensor for Tensor<T> {
    type Elem = T;
    type Link = usize;

    fn phys_link() -> usize {
        2
    }
    fn selector_link() -> usize {
        1
    }
    fn random3(links: [usize; 3], seed: u64, backend: BackendId) -> Self {
        Tensor::random(links.to_vec(), seed, backend)
    }
    fn site_op(op: PauliOp, backend: BackendId) -> Self {
        let data = match op {
            PauliOp::X => vec![T::zero(), T::one(), T::one(), T::zero()],
            PauliOp::Z => vec![T::one(), T::zero(), T::zero(), -T::one()],
        };
        Tensor::from_data(vec![2, 2], data, backend).expect("fixed shape")
    }
    fn identity_env(ket_link: usize, backend: BackendId) -> Self {
        Tensor::identity(ket_link, backend)
    }

    fn rank(&self) -> usize {
        Tensor::rank(self)
    }
    fn link(&self, axis: usize) -> usize {
        self.dim(axis)
    }
    fn backend(&self) -> BackendId {
        Tensor::backend(self)
    }
    fn set_backend(&mut self, backend: BackendId) {
        Tensor::set_backend(self, backend)
    }

    fn contract(&self, other: &Self, axes_a: &[usize], axes_b: &[usize]) -> Result<Self> {
        Tensor::contract(self, other, axes_a, axes_b)
    }
    fn permute(&self, order: &[usize]) -> Result<Self> {
        Tensor::permute(self, order)
    }
    fn conj(&self) -> Self {
        Tensor::conj(self)
    }
    fn norm(&self) -> f64 {
        Tensor::norm(self)
    }
    fn is_finite(&self) -> bool {
        Tensor::is_finite(self)
    }
    fn scale_real(&mut self, f: f64) {
        Tensor::scale_real(self, f)
    }
    fn add_scaled(&mut self, other: &Self, alpha: T) -> Result<()> {
        Tensor::add_scaled(self, other, alpha)
    }
    fn inner(&self, other: &Self) -> Complex64 {
        Tensor::inner(self, other)
    }

    fn flip_link(&mut self, _axis: usize) {}

    fn qr(&self, left: &[usize], right: &[usize]) -> Result<(Self, Self)> {
        Tensor::qr(self, left, right)
    }

    fn svd_sv(
        &self,
        left: &[usize],
        right: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
        tile_entries: Option<usize>,
    ) -> Result<(Self, Self, f64, usize)> {
        let res = self.svd_tiled(left, right, max_rank, cutoff, algorithm, tile_entries)?;
        let mut sv = res.v;
        scale_rows(&mut sv, &res.singular_values);
        Ok((res.u, sv, res.truncation_error, res.kept_rank))
    }

    fn to_flat(&self) -> Vec<T> {
        self.data().to_vec()
    }
    fn from_flat(&self, data: &[T]) -> Result<Self> {
        Tensor::from_data(self.shape().to_vec(), data.to_vec(), Tensor::backend(self))
    }

    fn densify(&self) -> Tensor<T> {
        self.clone()
    }

    fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        Tensor::write_to(self, w)
    }
    fn read_from<R: std::io::Read>(r: &mut R, backend: BackendId) -> Result<Self> {
        Tensor::read_from(r, backend)
    }
}

/// Multiply row i of the matricized tensor (first axis) by s[i].
fn scale_rows<T: Scalar>(t: &mut Tensor<T>, s: &[f64]) {
    let rows = t.shape()[0];
    let cols: usize = t.shape()[1..].iter().product();
    debug_assert_eq!(rows, s.len());
    for (i, &f) in s.iter().enumerate().take(rows) {
        let f = T::from_f64(f);
        for v in &mut t.data_mut()[i * cols..(i + 1) * cols] {
            *v *= f;
        }
    }
}

impl<T: Scalar> NetTensor for BlockSparseTensor<T> {
    type Elem = T;
    type Link = Z2Link;

    fn phys_link() -> Z2Link {
        Z2Link::new(1, 1, LinkDir::Incoming)
    }
    fn selector_link() -> Z2Link {
        // even-sector selector: the model ground state has even parity
        Z2Link::new(1, 0, LinkDir::Outgoing)
    }
    fn random3(links: [Z2Link; 3], seed: u64, backend: BackendId) -> Self {
        BlockSparseTensor::random(
            vec![links[0].as_child(), links[1].as_child(), links[2].as_parent()],
            0,
            seed,
            backend,
        )
    }
    fn site_op(op: PauliOp, backend: BackendId) -> Self {
        let links = vec![
            Z2Link::new(1, 1, LinkDir::Incoming),
            Z2Link::new(1, 1, LinkDir::Outgoing),
        ];
        let one = |v: f64| Tensor::from_data(vec![1, 1], vec![T::from_f64(v)], backend).expect("1x1");
        match op {
            PauliOp::X => {
                let mut t = BlockSparseTensor::new(links, 1, backend);
                t.insert_block(vec![0, 1], one(1.0)).expect("charge rule");
                t.insert_block(vec![1, 0], one(1.0)).expect("charge rule");
                t
            }
            PauliOp::Z => {
                let mut t = BlockSparseTensor::new(links, 0, backend);
                t.insert_block(vec![0, 0], one(1.0)).expect("charge rule");
                t.insert_block(vec![1, 1], one(-1.0)).expect("charge rule");
                t
            }
        }
    }
    fn identity_env(ket_link: Z2Link, backend: BackendId) -> Self {
        // axis 1 must oppose the ket link it contracts with
        BlockSparseTensor::identity_on(ket_link.flipped(), backend)
    }

    fn rank(&self) -> usize {
        BlockSparseTensor::rank(self)
    }
    fn link(&self, axis: usize) -> Z2Link {
        self.links()[axis]
    }
    fn backend(&self) -> BackendId {
        BlockSparseTensor::backend(self)
    }
    fn set_backend(&mut self, backend: BackendId) {
        BlockSparseTensor::set_backend(self, backend)
    }

    fn contract(&self, other: &Self, axes_a: &[usize], axes_b: &[usize]) -> Result<Self> {
        BlockSparseTensor::contract(self, other, axes_a, axes_b)
    }
    fn permute(&self, order: &[usize]) -> Result<Self> {
        BlockSparseTensor::permute(self, order)
    }
    fn conj(&self) -> Self {
        BlockSparseTensor::conj(self)
    }
    fn norm(&self) -> f64 {
        BlockSparseTensor::norm(self)
    }
    fn is_finite(&self) -> bool {
        BlockSparseTensor::is_finite(self)
    }
    fn scale_real(&mut self, f: f64) {
        BlockSparseTensor::scale_real(self, f)
    }
    fn add_scaled(&mut self, other: &Self, alpha: T) -> Result<()> {
        BlockSparseTensor::add_scaled(self, other, alpha)
    }
    fn inner(&self, other: &Self) -> Complex64 {
        BlockSparseTensor::inner(self, other)
    }

    fn flip_link(&mut self, axis: usize) {
        BlockSparseTensor::flip_link(self, axis)
    }

    fn qr(&self, left: &[usize], right: &[usize]) -> Result<(Self, Self)> {
        BlockSparseTensor::qr(self, left, right)
    }

    fn svd_sv(
        &self,
        left: &[usize],
        right: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
        tile_entries: Option<usize>,
    ) -> Result<(Self, Self, f64, usize)> {
        let res = self.svd_tiled(left, right, max_rank, cutoff, algorithm, tile_entries)?;
        let mut sv = res.v;
        // scale the rows of V per charge sector of the internal link
        let internal = sv.link(0);
        for c in 0..2u8 {
            let factors: Vec<f64> = res
                .singular_values
                .iter()
                .zip(&res.value_charges)
                .filter(|&(_, &vc)| vc == c)
                .map(|(s, _)| *s)
                .collect();
            if factors.is_empty() {
                continue;
            }
            debug_assert_eq!(factors.len(), internal.dims[c as usize]);
            sv.scale_block_rows(c, &factors);
        }
        Ok((res.u, sv, res.truncation_error, res.kept_rank))
    }

    fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for charges in self.flat_charge_order() {
            let count: usize = self.sector_shape(&charges).iter().product();
            match self.blocks().get(&charges) {
                Some(b) => out.extend_from_slice(b.data()),
                None => out.extend(std::iter::repeat(T::zero()).take(count)),
            }
        }
        out
    }

    fn from_flat(&self, data: &[T]) -> Result<Self> {
        let mut out = BlockSparseTensor::new(self.links().to_vec(), self.parity(), NetTensor::backend(self));
        let mut offset = 0usize;
        for charges in self.flat_charge_order() {
            let shape = self.sector_shape(&charges);
            let count: usize = shape.iter().product();
            let block = Tensor::from_data(
                shape,
                data[offset..offset + count].to_vec(),
                NetTensor::backend(self),
            )?;
            out.insert_block(charges, block)?;
            offset += count;
        }
        if offset != data.len() {
            return Err(crate::error::QttnError::Shape(format!(
                "flat length {} does not match block structure total {offset}",
                data.len()
            )));
        }
        Ok(out)
    }

    fn densify(&self) -> Tensor<T> {
        BlockSparseTensor::densify(self)
    }

    fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        BlockSparseTensor::write_to(self, w)
    }
    fn read_from<R: std::io::Read>(r: &mut R, backend: BackendId) -> Result<Self> {
        BlockSparseTensor::read_from(r, backend)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_link_fuse_and_cap() {
        let a = Z2Link::new(1, 1, LinkDir::Incoming);
        let f = <Z2Link as NetLink>::fuse(&a, &a);
        assert_eq!(f.dims, [2, 2]);
        let c = f.cap(3);
        assert_eq!(c.total_dim(), 3);
        assert_eq!(c.dims, [2, 1]);
        let c1 = f.cap(1);
        assert_eq!(c1.dims, [1, 0]);
        // uneven sectors: budget not usable by one side flows to the other
        let skew = Z2Link::new(1, 7, LinkDir::Incoming);
        let cs = skew.cap(4);
        assert_eq!(cs.dims, [1, 3]);
    }

    #[test]
    fn flat_round_trip_z2() {
        let links = vec![
            Z2Link::new(2, 1, LinkDir::Incoming),
            Z2Link::new(1, 2, LinkDir::Incoming),
            Z2Link::new(2, 2, LinkDir::Outgoing),
        ];
        let t = BlockSparseTensor::<f64>::random(links, 0, 5, BackendId::reference());
        let flat = t.to_flat();
        let back = t.from_flat(&flat).unwrap();
        let mut diff = back.densify();
        diff.add_scaled(&BlockSparseTensor::densify(&t), -1.0).unwrap();
        assert_eq!(diff.norm(), 0.0);
    }

    #[test]
    fn site_ops_match_dense() {
        let bx = <BlockSparseTensor<f64> as NetTensor>::site_op(PauliOp::X, BackendId::reference());
        let dx = <Tensor<f64> as NetTensor>::site_op(PauliOp::X, BackendId::reference());
        assert_eq!(BlockSparseTensor::densify(&bx).data(), dx.data());
        let bz = <BlockSparseTensor<f64> as NetTensor>::site_op(PauliOp::Z, BackendId::reference());
        let dz = <Tensor<f64> as NetTensor>::site_op(PauliOp::Z, BackendId::reference());
        assert_eq!(BlockSparseTensor::densify(&bz).data(), dz.data());
    }

    #[test]
    fn svd_sv_reconstructs_dense() {
        let t = Tensor::<f64>::random(vec![4, 3, 5], 3, BackendId::reference());
        let (u, sv, err, kept) =
            NetTensor::svd_sv(&t, &[0, 1], &[2], 12, 0.0, SvdAlgorithm::Direct, None).unwrap();
        assert!(err < 1e-12);
        assert!(kept <= 5);
        let rebuilt = NetTensor::contract(&u, &sv, &[2], &[0]).unwrap();
        for (a, b) in rebuilt.data().iter().zip(t.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn svd_sv_reconstructs_z2() {
        let links = vec![
            Z2Link::new(2, 2, LinkDir::Incoming),
            Z2Link::new(1, 1, LinkDir::Incoming),
            Z2Link::new(2, 2, LinkDir::Outgoing),
        ];
        let t = BlockSparseTensor::<f64>::random(links, 0, 8, BackendId::reference());
        let (u, sv, err, _) =
            NetTensor::svd_sv(&t, &[0, 1], &[2], 8, 0.0, SvdAlgorithm::Direct, None).unwrap();
        assert!(err < 1e-12);
        let rebuilt = NetTensor::contract(&u, &sv, &[2], &[0]).unwrap();
        let mut diff = NetTensor::densify(&rebuilt);
        diff.add_scaled(&BlockSparseTensor::densify(&t), -1.0).unwrap();
        assert!(diff.norm() < 1e-10);
    }
}
