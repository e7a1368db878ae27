//! Z2-graded block-sparse tensors.
//!
//! Every link carries two charge sectors (parity 0 and 1); a tensor stores
//! one dense block per charge combination allowed by the conservation rule
//! `sum of charges == tensor parity (mod 2)`. State tensors have parity 0;
//! charge-shifting operators (a single sigma-x factor) have parity 1.
//!
//! The dense embedding places sector 0 at offset 0 and sector 1 after it on
//! each link; `densify` is the oracle bridge used to check every block
//! operation against its dense counterpart.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::backend::BackendId;
use crate::dense::{decide_kept, strides, SvdAlgorithm, Tensor};
use crate::error::{QttnError, Result};
use crate::precision::{Precision, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkDir {
    Incoming,
    Outgoing,
}

impl LinkDir {
    pub fn flip(self) -> LinkDir {
        match self {
            LinkDir::Incoming => LinkDir::Outgoing,
            LinkDir::Outgoing => LinkDir::Incoming,
        }
    }

    fn tag(self) -> u8 {
        match self {
            LinkDir::Incoming => 0,
            LinkDir::Outgoing => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(LinkDir::Incoming),
            1 => Ok(LinkDir::Outgoing),
            _ => Err(QttnError::Format(format!("bad link direction tag {t}"))),
        }
    }
}

/// A tensor link graded into two Z2 charge sectors. Either sector dimension
/// may be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Z2Link {
    /// dims[c] is the dimension of the charge-c sector.
    pub dims: [usize; 2],
    pub dir: LinkDir,
}

impl Z2Link {
    pub fn new(dim0: usize, dim1: usize, dir: LinkDir) -> Self {
        Z2Link { dims: [dim0, dim1], dir }
    }

    pub fn total_dim(&self) -> usize {
        self.dims[0] + self.dims[1]
    }

    pub fn flipped(&self) -> Z2Link {
        Z2Link {
            dims: self.dims,
            dir: self.dir.flip(),
        }
    }

    /// Offset of a charge sector in the dense embedding.
    pub fn offset(&self, charge: u8) -> usize {
        if charge == 0 {
            0
        } else {
            self.dims[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseTensor<T: Scalar> {
    links: Vec<Z2Link>,
    parity: u8,
    blocks: BTreeMap<Vec<u8>, Tensor<T>>,
    backend: BackendId,
}

/// Result of a block-wise truncated SVD. Singular values are the merged,
/// globally sorted union over charge sectors; `value_charges[i]` tags the
/// sector each kept value came from.
#[derive(Debug, Clone)]
pub struct BsvdResult<T: Scalar> {
    pub u: BlockSparseTensor<T>,
    pub singular_values: Vec<f64>,
    pub value_charges: Vec<u8>,
    pub v: BlockSparseTensor<T>,
    pub truncation_error: f64,
    pub kept_rank: usize,
}

impl<T: Scalar> BlockSparseTensor<T> {
    pub fn new(links: Vec<Z2Link>, parity: u8, backend: BackendId) -> Self {
        BlockSparseTensor {
            links,
            parity: parity % 2,
            blocks: BTreeMap::new(),
            backend,
        }
    }

    pub fn links(&self) -> &[Z2Link] {
        &self.links
    }

    pub fn parity(&self) -> u8 {
        self.parity
    }

    pub fn rank(&self) -> usize {
        self.links.len()
    }

    pub fn backend(&self) -> BackendId {
        self.backend
    }

    pub fn set_backend(&mut self, backend: BackendId) {
        self.backend = backend;
        for b in self.blocks.values_mut() {
            b.set_backend(backend);
        }
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn blocks(&self) -> &BTreeMap<Vec<u8>, Tensor<T>> {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total dimension of a link.
    pub fn dim(&self, axis: usize) -> usize {
        self.links[axis].total_dim()
    }

    fn charge_ok(&self, charges: &[u8]) -> bool {
        charges.iter().map(|&c| c as usize).sum::<usize>() % 2 == self.parity as usize
    }

    fn block_shape(&self, charges: &[u8]) -> Vec<usize> {
        charges
            .iter()
            .zip(&self.links)
            .map(|(&c, l)| l.dims[c as usize])
            .collect()
    }

    pub fn insert_block(&mut self, charges: Vec<u8>, block: Tensor<T>) -> Result<()> {
        if charges.len() != self.rank() {
            return Err(QttnError::Charge(format!(
                "charge tuple length {} does not match rank {}",
                charges.len(),
                self.rank()
            )));
        }
        if !self.charge_ok(&charges) {
            return Err(QttnError::Charge(format!(
                "charge tuple {charges:?} violates the parity-{} conservation rule",
                self.parity
            )));
        }
        let expect = self.block_shape(&charges);
        if block.shape() != expect.as_slice() {
            return Err(QttnError::Shape(format!(
                "block shape {:?} does not match sector dims {:?} for charges {:?}",
                block.shape(),
                expect,
                charges
            )));
        }
        self.blocks.insert(charges, block);
        Ok(())
    }

    /// Shape a block with the given charges would have.
    pub fn sector_shape(&self, charges: &[u8]) -> Vec<usize> {
        self.block_shape(charges)
    }

    /// Flip the direction label of one link. Pure relabeling: the data is
    /// unchanged, and the tensor on the other side of the link must flip the
    /// matching axis to stay contractible.
    pub fn flip_link(&mut self, axis: usize) {
        self.links[axis] = self.links[axis].flipped();
    }

    /// Multiply row j (first axis) of every charge-c block by factors[j].
    pub fn scale_block_rows(&mut self, charge: u8, factors: &[f64]) {
        for (charges, block) in self.blocks.iter_mut() {
            if charges[0] != charge {
                continue;
            }
            let rows = block.shape()[0];
            let cols: usize = block.shape()[1..].iter().product();
            debug_assert_eq!(rows, factors.len());
            for (j, &f) in factors.iter().enumerate().take(rows) {
                let f = T::from_f64(f);
                for v in &mut block.data_mut()[j * cols..(j + 1) * cols] {
                    *v *= f;
                }
            }
        }
    }

    /// Deterministic charge-tuple order used by the flat (Lanczos-vector)
    /// view: all allowed tuples, lexicographically sorted.
    pub fn flat_charge_order(&self) -> Vec<Vec<u8>> {
        let mut order = self.allowed_charges();
        order.sort();
        order
    }

    /// All charge tuples allowed by conservation whose sectors are all
    /// non-degenerate.
    pub fn allowed_charges(&self) -> Vec<Vec<u8>> {
        let rank = self.rank();
        let mut out = Vec::new();
        for bits in 0..(1usize << rank) {
            let charges: Vec<u8> = (0..rank).map(|i| ((bits >> i) & 1) as u8).collect();
            if !self.charge_ok(&charges) {
                continue;
            }
            if self
                .block_shape(&charges)
                .iter()
                .any(|&d| d == 0)
            {
                continue;
            }
            out.push(charges);
        }
        out
    }

    /// Deterministic random tensor with every allowed block populated.
    pub fn random(links: Vec<Z2Link>, parity: u8, seed: u64, backend: BackendId) -> Self {
        let mut t = BlockSparseTensor::new(links, parity, backend);
        for (i, charges) in t.allowed_charges().into_iter().enumerate() {
            let shape = t.block_shape(&charges);
            let block = Tensor::random(shape, seed.wrapping_add(i as u64).wrapping_mul(0x9e3779b9), backend);
            t.blocks.insert(charges, block);
        }
        t
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .values()
            .map(|b| {
                let n = b.norm();
                n * n
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.values().all(|b| b.is_finite())
    }

    /// Elementwise conjugate; link directions flip (bra tensor).
    pub fn conj(&self) -> Self {
        BlockSparseTensor {
            links: self.links.iter().map(|l| l.flipped()).collect(),
            parity: self.parity,
            blocks: self.blocks.iter().map(|(k, v)| (k.clone(), v.conj())).collect(),
            backend: self.backend,
        }
    }

    pub fn scale_real(&mut self, f: f64) {
        for b in self.blocks.values_mut() {
            b.scale_real(f);
        }
    }

    /// self += alpha * other; structures must match linkwise.
    pub fn add_scaled(&mut self, other: &Self, alpha: T) -> Result<()> {
        if self.links != other.links || self.parity != other.parity {
            return Err(QttnError::Charge("add_scaled: link structures differ".into()));
        }
        for (charges, block) in &other.blocks {
            match self.blocks.get_mut(charges) {
                Some(mine) => mine.add_scaled(block, alpha)?,
                None => {
                    let mut b = Tensor::zeros(block.shape().to_vec(), self.backend);
                    b.add_scaled(block, alpha)?;
                    self.blocks.insert(charges.clone(), b);
                }
            }
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for (charges, a) in &self.blocks {
            if let Some(b) = other.blocks.get(charges) {
                acc += a.inner(b);
            }
        }
        acc
    }

    pub fn convert<U: Scalar>(&self) -> Result<BlockSparseTensor<U>> {
        let mut out = BlockSparseTensor::new(self.links.clone(), self.parity, self.backend);
        for (charges, block) in &self.blocks {
            out.blocks.insert(charges.clone(), block.convert::<U>()?);
        }
        Ok(out)
    }

    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let links: Vec<Z2Link> = order
            .iter()
            .map(|&ax| {
                self.links
                    .get(ax)
                    .copied()
                    .ok_or_else(|| QttnError::Argument(format!("permutation axis {ax} out of range")))
            })
            .collect::<Result<_>>()?;
        let mut out = BlockSparseTensor::new(links, self.parity, self.backend);
        for (charges, block) in &self.blocks {
            let new_charges: Vec<u8> = order.iter().map(|&ax| charges[ax]).collect();
            out.blocks.insert(new_charges, block.permute(order)?);
        }
        Ok(out)
    }

    /// Dense embedding: blocks at their sector offsets, zeros elsewhere.
    pub fn densify(&self) -> Tensor<T> {
        let shape: Vec<usize> = self.links.iter().map(|l| l.total_dim()).collect();
        let shape = if shape.is_empty() { vec![1] } else { shape };
        let mut out = Tensor::zeros(shape.clone(), self.backend);
        let out_strides = strides(&shape);
        for (charges, block) in &self.blocks {
            let offsets: Vec<usize> = charges
                .iter()
                .zip(&self.links)
                .map(|(&c, l)| l.offset(c))
                .collect();
            let bshape = block.shape().to_vec();
            let rank = bshape.len();
            let mut idx = vec![0usize; rank.max(1)];
            for &v in block.data() {
                let flat: usize = if rank == 0 {
                    0
                } else {
                    idx.iter()
                        .zip(&offsets)
                        .zip(&out_strides)
                        .map(|((&i, &o), &s)| (i + o) * s)
                        .sum()
                };
                out.data_mut()[flat] = v;
                for ax in (0..rank).rev() {
                    idx[ax] += 1;
                    if idx[ax] < bshape[ax] {
                        break;
                    }
                    idx[ax] = 0;
                }
            }
        }
        out
    }

    /// Extract the charge-conserving sectors of a dense tensor. Content
    /// outside the allowed sectors is ignored.
    pub fn sparsify(dense: &Tensor<T>, links: Vec<Z2Link>, parity: u8) -> Result<Self> {
        let expect: Vec<usize> = links.iter().map(|l| l.total_dim()).collect();
        if dense.shape() != expect.as_slice() {
            return Err(QttnError::Shape(format!(
                "dense shape {:?} does not match link dims {:?}",
                dense.shape(),
                expect
            )));
        }
        let mut out = BlockSparseTensor::new(links, parity, dense.backend());
        let dense_strides = strides(dense.shape());
        for charges in out.allowed_charges() {
            let bshape = out.block_shape(&charges);
            let offsets: Vec<usize> = charges
                .iter()
                .zip(&out.links)
                .map(|(&c, l)| l.offset(c))
                .collect();
            let count: usize = bshape.iter().product();
            let mut data = Vec::with_capacity(count);
            let rank = bshape.len();
            let mut idx = vec![0usize; rank];
            for _ in 0..count {
                let flat: usize = idx
                    .iter()
                    .zip(&offsets)
                    .zip(&dense_strides)
                    .map(|((&i, &o), &s)| (i + o) * s)
                    .sum();
                data.push(dense.data()[flat]);
                for ax in (0..rank).rev() {
                    idx[ax] += 1;
                    if idx[ax] < bshape[ax] {
                        break;
                    }
                    idx[ax] = 0;
                }
            }
            let block = Tensor::from_data(bshape, data, dense.backend())?;
            out.blocks.insert(charges, block);
        }
        Ok(out)
    }

    /// Block-sparse tensor-dot. Paired links must have matching sector dims
    /// and opposite directions; densify(bcontract(a, b)) equals
    /// contract(densify(a), densify(b)).
    pub fn contract(&self, other: &Self, axes_a: &[usize], axes_b: &[usize]) -> Result<Self> {
        if axes_a.len() != axes_b.len() {
            return Err(QttnError::Argument("axis lists differ in length".into()));
        }
        for (&aa, &ab) in axes_a.iter().zip(axes_b) {
            let la = self
                .links
                .get(aa)
                .ok_or_else(|| QttnError::Argument(format!("axis {aa} out of range")))?;
            let lb = other
                .links
                .get(ab)
                .ok_or_else(|| QttnError::Argument(format!("axis {ab} out of range")))?;
            if la.dims != lb.dims {
                return Err(QttnError::Charge(format!(
                    "sector dims differ on contracted pair ({aa}, {ab}): {:?} vs {:?}",
                    la.dims, lb.dims
                )));
            }
            if la.dir == lb.dir {
                return Err(QttnError::Charge(format!(
                    "contracted pair ({aa}, {ab}) must have opposite directions"
                )));
            }
        }
        let free_a: Vec<usize> = (0..self.rank()).filter(|ax| !axes_a.contains(ax)).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|ax| !axes_b.contains(ax)).collect();
        let mut links: Vec<Z2Link> = free_a.iter().map(|&ax| self.links[ax]).collect();
        links.extend(free_b.iter().map(|&ax| other.links[ax]));
        let parity = (self.parity + other.parity) % 2;
        let mut out = BlockSparseTensor::new(links, parity, self.backend);
        for (ca, ba) in &self.blocks {
            for (cb, bb) in &other.blocks {
                if axes_a
                    .iter()
                    .zip(axes_b)
                    .any(|(&aa, &ab)| ca[aa] != cb[ab])
                {
                    continue;
                }
                let mut charges: Vec<u8> = free_a.iter().map(|&ax| ca[ax]).collect();
                charges.extend(free_b.iter().map(|&ax| cb[ax]));
                let piece = ba.contract(bb, axes_a, axes_b)?;
                match out.blocks.get_mut(&charges) {
                    Some(existing) => existing.add_scaled(&piece, T::one())?,
                    None => {
                        out.blocks.insert(charges, piece);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Block-wise QR over the matricization (left_axes | right_axes).
    /// Q carries the left links plus a new internal link (outgoing); R the
    /// matching incoming internal link plus the right links.
    pub fn qr(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(Self, Self)> {
        if !self.is_finite() {
            return Err(QttnError::Numeric("qr: non-finite input".into()));
        }
        let m = self.matricize(left_axes, right_axes)?;
        let mut k_dims = [0usize; 2];
        let mut qs: [Option<Tensor<T>>; 2] = [None, None];
        let mut rs: [Option<Tensor<T>>; 2] = [None, None];
        for c in 0..2 {
            if let Some(mat) = &m.mats[c] {
                let (q, r) = mat.qr(&[0], &[1])?;
                k_dims[c] = q.shape()[1];
                qs[c] = Some(q);
                rs[c] = Some(r);
            }
        }
        let internal = Z2Link::new(k_dims[0], k_dims[1], LinkDir::Outgoing);
        let q = m.left.unfuse_rows(&qs, internal, 0, self.backend)?;
        let r = m.right.unfuse_cols(&rs, internal.flipped(), self.parity, self.backend)?;
        Ok((q, r))
    }

    /// Block-wise truncated SVD. Truncation keeps the globally largest
    /// singular values across sectors (ties: lower charge, then lower
    /// block-internal index).
    pub fn svd(
        &self,
        left_axes: &[usize],
        right_axes: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
    ) -> Result<BsvdResult<T>> {
        self.svd_tiled(left_axes, right_axes, max_rank, cutoff, algorithm, None)
    }

    pub fn svd_tiled(
        &self,
        left_axes: &[usize],
        right_axes: &[usize],
        max_rank: usize,
        cutoff: f64,
        algorithm: SvdAlgorithm,
        tile_entries: Option<usize>,
    ) -> Result<BsvdResult<T>> {
        if max_rank == 0 {
            return Err(QttnError::Argument("svd: max_rank must be >= 1".into()));
        }
        if !self.is_finite() {
            return Err(QttnError::Numeric("svd: non-finite input".into()));
        }
        let m = self.matricize(left_axes, right_axes)?;
        let mut per_charge: [Option<crate::dense::SvdResult<T>>; 2] = [None, None];
        for c in 0..2 {
            if let Some(mat) = &m.mats[c] {
                // full decomposition; global truncation happens on the merge
                let avail = mat.shape()[0].min(mat.shape()[1]);
                per_charge[c] = Some(mat.svd(&[0], &[1], avail, 0.0, algorithm)?);
            }
        }
        // merged, sorted union tagged by charge
        let mut merged: Vec<(f64, u8, usize)> = Vec::new();
        for c in 0..2u8 {
            if let Some(r) = &per_charge[c as usize] {
                for (i, &s) in r.singular_values.iter().enumerate() {
                    merged.push((s, c, i));
                }
            }
        }
        merged.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let values: Vec<f64> = merged.iter().map(|m| m.0).collect();
        let kept = decide_kept(&values, max_rank, cutoff, tile_entries);
        let truncation_error = values[kept..].iter().map(|s| s * s).sum::<f64>().sqrt();
        let mut kept_per_charge = [0usize; 2];
        for &(_, c, _) in &merged[..kept] {
            kept_per_charge[c as usize] += 1;
        }
        let mut us: [Option<Tensor<T>>; 2] = [None, None];
        let mut vs: [Option<Tensor<T>>; 2] = [None, None];
        for c in 0..2 {
            let kc = kept_per_charge[c];
            if kc == 0 {
                continue;
            }
            let r = per_charge[c].as_ref().expect("kept values imply a sector");
            us[c] = Some(truncate_cols(&r.u, kc));
            vs[c] = Some(truncate_rows(&r.v, kc));
        }
        let internal = Z2Link::new(kept_per_charge[0], kept_per_charge[1], LinkDir::Outgoing);
        let u = m.left.unfuse_rows(&us, internal, 0, self.backend)?;
        let v = m.right.unfuse_cols(&vs, internal.flipped(), self.parity, self.backend)?;
        Ok(BsvdResult {
            u,
            singular_values: values[..kept].to_vec(),
            value_charges: merged[..kept].iter().map(|m| m.1).collect(),
            v,
            truncation_error,
            kept_rank: kept,
        })
    }

    /// Block-wise Hermitian eigendecomposition. Returns (value, charge)
    /// pairs merged ascending across sectors and the per-sector eigenvector
    /// tensor (columns ascend within each charge sector).
    pub fn eigh(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<(Vec<(f64, u8)>, Self)> {
        if self.parity != 0 {
            return Err(QttnError::Charge("eigh requires a parity-0 (charge-conserving) tensor".into()));
        }
        let m = self.matricize(left_axes, right_axes)?;
        let mut vecs: [Option<Tensor<T>>; 2] = [None, None];
        let mut merged: Vec<(f64, u8)> = Vec::new();
        let mut n_dims = [0usize; 2];
        for c in 0..2 {
            if let Some(mat) = &m.mats[c] {
                let (vals, v) = mat.eigh(&[0], &[1])?;
                n_dims[c] = vals.len();
                merged.extend(vals.into_iter().map(|v| (v, c as u8)));
                vecs[c] = Some(v);
            }
        }
        merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let internal = Z2Link::new(n_dims[0], n_dims[1], LinkDir::Outgoing);
        let v = m.left.unfuse_rows(&vecs, internal, 0, self.backend)?;
        Ok((merged, v))
    }

    fn matricize(&self, left_axes: &[usize], right_axes: &[usize]) -> Result<BlockMatricized<T>> {
        let mut order: Vec<usize> = left_axes.to_vec();
        order.extend_from_slice(right_axes);
        if order.len() != self.rank() {
            return Err(QttnError::Argument(format!(
                "left {left_axes:?} + right {right_axes:?} must cover all {} axes",
                self.rank()
            )));
        }
        let permuted = self.permute(&order)?;
        let nl = left_axes.len();
        let left = FusedSide::build(&permuted.links[..nl]);
        let right = FusedSide::build(&permuted.links[nl..]);
        let mut mats: [Option<Tensor<T>>; 2] = [None, None];
        for c in 0..2usize {
            let rc = (c + self.parity as usize) % 2;
            if left.dims[c] > 0 && right.dims[rc] > 0 {
                mats[c] = Some(Tensor::zeros(vec![left.dims[c], right.dims[rc]], self.backend));
            }
        }
        for (charges, block) in &permuted.blocks {
            let lc: u8 = charges[..nl].iter().fold(0, |a, &c| (a + c) % 2);
            let (loff, lsize) = left.locate(&charges[..nl]);
            let (roff, rsize) = right.locate(&charges[nl..]);
            let mat = mats[lc as usize]
                .as_mut()
                .expect("stored block implies non-degenerate fused sectors");
            let ncols = mat.shape()[1];
            // block, flattened row-major over (left dims | right dims), is a
            // lsize x rsize matrix
            for i in 0..lsize {
                let src = &block.data()[i * rsize..(i + 1) * rsize];
                let dst_base = (loff + i) * ncols + roff;
                mat.data_mut()[dst_base..dst_base + rsize].copy_from_slice(src);
            }
        }
        Ok(BlockMatricized { mats, left, right })
    }

    /// Identity operator on a link: block-diagonal ones.
    pub fn identity_on(link: Z2Link, backend: BackendId) -> Self {
        let mut t = BlockSparseTensor::new(vec![link, link.flipped()], 0, backend);
        for c in 0..2u8 {
            let d = link.dims[c as usize];
            if d > 0 {
                t.blocks.insert(vec![c, c], Tensor::identity(d, backend));
            }
        }
        t
    }

    /// Serialization: dense-format header extended with a sector table (per
    /// link: dims of charge 0/1 and direction; per block: charge tuple)
    /// before the raw block payloads.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(BLOCK_MAGIC)?;
        w.write_all(&TENSOR_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[T::PRECISION.tag()])?;
        w.write_all(&[self.rank() as u8])?;
        w.write_all(&[self.parity])?;
        for l in &self.links {
            w.write_all(&(l.dims[0] as u64).to_le_bytes())?;
            w.write_all(&(l.dims[1] as u64).to_le_bytes())?;
            w.write_all(&[l.dir.tag()])?;
        }
        w.write_all(&(self.blocks.len() as u32).to_le_bytes())?;
        for charges in self.blocks.keys() {
            w.write_all(charges)?;
        }
        for block in self.blocks.values() {
            for x in block.data() {
                let c = x.to_c64();
                match T::PRECISION {
                    Precision::S => w.write_all(&(c.re as f32).to_le_bytes())?,
                    Precision::D => w.write_all(&c.re.to_le_bytes())?,
                    Precision::C => {
                        w.write_all(&(c.re as f32).to_le_bytes())?;
                        w.write_all(&(c.im as f32).to_le_bytes())?;
                    }
                    Precision::Z => {
                        w.write_all(&c.re.to_le_bytes())?;
                        w.write_all(&c.im.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, backend: BackendId) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BLOCK_MAGIC {
            return Err(QttnError::Format("bad block tensor magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != TENSOR_FORMAT_VERSION {
            return Err(QttnError::Format("unsupported block tensor version".into()));
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
        r.read_exact(&mut b)?;
        let parity = b[0];
        let mut links = Vec::with_capacity(rank);
        let mut b8 = [0u8; 8];
        for _ in 0..rank {
            r.read_exact(&mut b8)?;
            let d0 = u64::from_le_bytes(b8) as usize;
            r.read_exact(&mut b8)?;
            let d1 = u64::from_le_bytes(b8) as usize;
            r.read_exact(&mut b)?;
            links.push(Z2Link::new(d0, d1, LinkDir::from_tag(b[0])?));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let nblocks = u32::from_le_bytes(b4) as usize;
        let mut charge_list = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let mut charges = vec![0u8; rank];
            r.read_exact(&mut charges)?;
            charge_list.push(charges);
        }
        let mut out = BlockSparseTensor::new(links, parity, backend);
        for charges in charge_list {
            let shape = out.block_shape(&charges);
            let count: usize = shape.iter().product();
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let v = match T::PRECISION {
                    Precision::S | Precision::C => {
                        let mut f4 = [0u8; 4];
                        r.read_exact(&mut f4)?;
                        let re = f32::from_le_bytes(f4) as f64;
                        let im = if T::PRECISION == Precision::C {
                            r.read_exact(&mut f4)?;
                            f32::from_le_bytes(f4) as f64
                        } else {
                            0.0
                        };
                        T::from_c64(num_complex::Complex64::new(re, im))
                    }
                    Precision::D | Precision::Z => {
                        r.read_exact(&mut b8)?;
                        let re = f64::from_le_bytes(b8);
                        let im = if T::PRECISION == Precision::Z {
                            r.read_exact(&mut b8)?;
                            f64::from_le_bytes(b8)
                        } else {
                            0.0
                        };
                        T::from_c64(num_complex::Complex64::new(re, im))
                    }
                };
                data.push(v);
            }
            out.insert_block(charges, Tensor::from_data(shape, data, backend)?)?;
        }
        Ok(out)
    }
}

pub const BLOCK_MAGIC: &[u8; 4] = b"QTTB";
use crate::dyn_tensor::TENSOR_FORMAT_VERSION;

fn truncate_cols<T: Scalar>(u: &Tensor<T>, kept: usize) -> Tensor<T> {
    let m = u.shape()[0];
    let k = u.shape()[1];
    let mut data = Vec::with_capacity(m * kept);
    for i in 0..m {
        data.extend_from_slice(&u.data()[i * k..i * k + kept]);
    }
    Tensor::from_data(vec![m, kept], data, u.backend()).expect("shape is consistent")
}

fn truncate_rows<T: Scalar>(v: &Tensor<T>, kept: usize) -> Tensor<T> {
    let n = v.shape()[1];
    Tensor::from_data(vec![kept, n], v.data()[..kept * n].to_vec(), v.backend())
        .expect("shape is consistent")
}

/// Bookkeeping for fusing one side of a matricization: which original charge
/// combinations land at which offset of each fused charge sector.
struct FusedSide {
    links: Vec<Z2Link>,
    /// per fused charge: (charge combo, combo size, offset)
    entries: [Vec<(Vec<u8>, usize, usize)>; 2],
    dims: [usize; 2],
}

impl FusedSide {
    fn build(links: &[Z2Link]) -> Self {
        let rank = links.len();
        let mut entries: [Vec<(Vec<u8>, usize, usize)>; 2] = [Vec::new(), Vec::new()];
        let mut dims = [0usize; 2];
        // scalar side (rank 0): a single charge-0 combo of size 1
        if rank == 0 {
            entries[0].push((Vec::new(), 1, 0));
            dims[0] = 1;
        } else {
            for bits in 0..(1usize << rank) {
                let combo: Vec<u8> = (0..rank).map(|i| ((bits >> i) & 1) as u8).collect();
                let size: usize = combo
                    .iter()
                    .zip(links)
                    .map(|(&c, l)| l.dims[c as usize])
                    .product();
                if size == 0 {
                    continue;
                }
                let fused: usize = combo.iter().map(|&c| c as usize).sum::<usize>() % 2;
                entries[fused].push((combo, size, dims[fused]));
                dims[fused] += size;
            }
        }
        FusedSide {
            links: links.to_vec(),
            entries,
            dims,
        }
    }

    fn locate(&self, combo: &[u8]) -> (usize, usize) {
        let fused: usize = combo.iter().map(|&c| c as usize).sum::<usize>() % 2;
        for (c, size, offset) in &self.entries[fused] {
            if c.as_slice() == combo {
                return (*offset, *size);
            }
        }
        panic!("charge combo {combo:?} not present in fused side");
    }

    /// Rebuild a block tensor from per-charge matrices whose ROWS are this
    /// fused side: result links = side links + internal link.
    fn unfuse_rows<T: Scalar>(
        &self,
        mats: &[Option<Tensor<T>>; 2],
        internal: Z2Link,
        parity: u8,
        backend: BackendId,
    ) -> Result<BlockSparseTensor<T>> {
        let mut links = self.links.clone();
        links.push(internal);
        let mut out = BlockSparseTensor::new(links, parity, backend);
        for c in 0..2usize {
            let Some(mat) = &mats[c] else { continue };
            let k = mat.shape()[1];
            if k == 0 {
                continue;
            }
            for (combo, size, offset) in &self.entries[c] {
                let mut shape: Vec<usize> = combo
                    .iter()
                    .zip(&self.links)
                    .map(|(&cc, l)| l.dims[cc as usize])
                    .collect();
                shape.push(k);
                let mut data = Vec::with_capacity(size * k);
                for i in 0..*size {
                    let row = &mat.data()[(offset + i) * k..(offset + i + 1) * k];
                    data.extend_from_slice(row);
                }
                let mut charges = combo.clone();
                charges.push(c as u8);
                out.insert_block(charges, Tensor::from_data(shape, data, backend)?)?;
            }
        }
        Ok(out)
    }

    /// Rebuild a block tensor from per-charge matrices whose COLUMNS are this
    /// fused side: result links = internal link + side links. `mats[c]` is
    /// indexed by the ROW (internal) charge c; its columns live in fused
    /// charge (c + parity) % 2.
    fn unfuse_cols<T: Scalar>(
        &self,
        mats: &[Option<Tensor<T>>; 2],
        internal: Z2Link,
        parity: u8,
        backend: BackendId,
    ) -> Result<BlockSparseTensor<T>> {
        let mut links = vec![internal];
        links.extend(self.links.iter().copied());
        let mut out = BlockSparseTensor::new(links, parity, backend);
        for c in 0..2usize {
            let Some(mat) = &mats[c] else { continue };
            let k = mat.shape()[0];
            let ncols = mat.shape()[1];
            if k == 0 {
                continue;
            }
            let col_charge = (c + parity as usize) % 2;
            for (combo, size, offset) in &self.entries[col_charge] {
                let mut shape = vec![k];
                shape.extend(
                    combo
                        .iter()
                        .zip(&self.links)
                        .map(|(&cc, l)| l.dims[cc as usize]),
                );
                let mut data = Vec::with_capacity(k * size);
                for r in 0..k {
                    let row = &mat.data()[r * ncols + offset..r * ncols + offset + size];
                    data.extend_from_slice(row);
                }
                let mut charges = vec![c as u8];
                charges.extend_from_slice(combo);
                out.insert_block(charges, Tensor::from_data(shape, data, backend)?)?;
            }
        }
        Ok(out)
    }
}

struct BlockMatricized<T: Scalar> {
    /// per left fused charge c: dense matrix of the (c, c + parity) sector
    mats: [Option<Tensor<T>>; 2],
    left: FusedSide,
    right: FusedSide,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn links3() -> Vec<Z2Link> {
        vec![
            Z2Link::new(2, 1, LinkDir::Incoming),
            Z2Link::new(1, 2, LinkDir::Incoming),
            Z2Link::new(2, 2, LinkDir::Outgoing),
        ]
    }

    fn assert_close(a: &Tensor<f64>, b: &Tensor<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn random_respects_conservation() {
        let t = BlockSparseTensor::<f64>::random(links3(), 0, 7, BackendId::reference());
        for charges in t.blocks().keys() {
            let sum: u8 = charges.iter().sum();
            assert_eq!(sum % 2, 0);
        }
        // rank 3, parity 0: half of the 8 tuples are allowed, none degenerate here
        assert_eq!(t.num_blocks(), 4);
    }

    #[test]
    fn densify_sparsify_round_trip() {
        let t = BlockSparseTensor::<f64>::random(links3(), 1, 3, BackendId::reference());
        let d = t.densify();
        assert_eq!(d.shape(), &[3, 3, 4]);
        let back = BlockSparseTensor::sparsify(&d, links3(), 1).unwrap();
        assert_close(&back.densify(), &d, 0.0);
        // norms agree with the dense embedding
        assert!((t.norm() - d.norm()).abs() < 1e-12);
    }

    #[test]
    fn contract_matches_dense_oracle() {
        let a = BlockSparseTensor::<f64>::random(links3(), 0, 11, BackendId::reference());
        let b_links = vec![
            Z2Link::new(2, 2, LinkDir::Incoming),
            Z2Link::new(1, 2, LinkDir::Outgoing),
            Z2Link::new(3, 1, LinkDir::Outgoing),
        ];
        let b = BlockSparseTensor::<f64>::random(b_links, 1, 12, BackendId::reference());
        let c = a.contract(&b, &[2, 1], &[0, 1]).unwrap();
        assert_eq!(c.parity(), 1);
        let dense = a.densify().contract(&b.densify(), &[2, 1], &[0, 1]).unwrap();
        assert_close(&c.densify(), &dense, 1e-12);
    }

    #[test]
    fn contract_rejects_same_direction() {
        let a = BlockSparseTensor::<f64>::random(links3(), 0, 1, BackendId::reference());
        let b = BlockSparseTensor::<f64>::random(links3(), 0, 2, BackendId::reference());
        // axis 0 is Incoming on both
        let err = a.contract(&b, &[0], &[0]).unwrap_err();
        assert!(matches!(err, QttnError::Charge(_)));
    }

    #[test]
    fn pauli_x_squares_to_identity() {
        // sigma-x on a (1, 1) physical link is the parity-1 operator with
        // off-diagonal blocks only
        let phys = Z2Link::new(1, 1, LinkDir::Incoming);
        let mut x = BlockSparseTensor::<f64>::new(vec![phys.flipped(), phys], 1, BackendId::reference());
        x.insert_block(vec![0, 1], Tensor::from_data(vec![1, 1], vec![1.0], BackendId::reference()).unwrap()).unwrap();
        x.insert_block(vec![1, 0], Tensor::from_data(vec![1, 1], vec![1.0], BackendId::reference()).unwrap()).unwrap();
        let xx = x.contract(&x, &[1], &[0]).unwrap();
        assert_eq!(xx.parity(), 0);
        let id = BlockSparseTensor::<f64>::identity_on(phys, BackendId::reference());
        assert_close(&xx.densify(), &id.densify(), 0.0);
    }

    #[test]
    fn permute_matches_dense_oracle() {
        let t = BlockSparseTensor::<f64>::random(links3(), 1, 5, BackendId::reference());
        let p = t.permute(&[2, 0, 1]).unwrap();
        let dense = t.densify().permute(&[2, 0, 1]).unwrap();
        assert_close(&p.densify(), &dense, 0.0);
    }

    #[test]
    fn qr_reconstructs_and_q_is_isometry() {
        let t = BlockSparseTensor::<f64>::random(links3(), 0, 9, BackendId::reference());
        let (q, r) = t.qr(&[0, 1], &[2]).unwrap();
        // Q^dag Q = identity on the internal link
        let qq = q.conj().contract(&q, &[0, 1], &[0, 1]).unwrap();
        let internal = q.links()[2];
        let id = BlockSparseTensor::<f64>::identity_on(internal.flipped(), BackendId::reference());
        assert_close(&qq.densify(), &id.densify(), 1e-12);
        // Q R = t
        let qr = q.contract(&r, &[2], &[0]).unwrap();
        assert_close(&qr.densify(), &t.densify(), 1e-12);
    }

    #[test]
    fn qr_of_odd_parity_tensor() {
        let t = BlockSparseTensor::<f64>::random(links3(), 1, 21, BackendId::reference());
        let (q, r) = t.qr(&[0, 1], &[2]).unwrap();
        assert_eq!(q.parity(), 0);
        assert_eq!(r.parity(), 1);
        let qr = q.contract(&r, &[2], &[0]).unwrap();
        assert_close(&qr.densify(), &t.densify(), 1e-12);
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let t = BlockSparseTensor::<f64>::random(links3(), 0, 13, BackendId::reference());
        let res = t.svd(&[0, 1], &[2], 16, 0.0, SvdAlgorithm::Direct).unwrap();
        assert!(res.truncation_error < 1e-12);
        // sorted descending
        for w in res.singular_values.windows(2) {
            assert!(w[0] >= w[1] - 1e-15);
        }
        // rebuild: U * diag(s) * V
        let mut us = res.u.clone();
        // scale columns of U by singular values via a diagonal block tensor
        let internal = res.u.links()[2];
        let mut diag = BlockSparseTensor::<f64>::new(
            vec![internal.flipped(), internal],
            0,
            BackendId::reference(),
        );
        for c in 0..2u8 {
            let d = internal.dims[c as usize];
            if d == 0 {
                continue;
            }
            let mut m = Tensor::zeros(vec![d, d], BackendId::reference());
            let mut j = 0usize;
            for (s, &vc) in res.singular_values.iter().zip(&res.value_charges) {
                if vc == c {
                    let idx = j * d + j;
                    m.data_mut()[idx] = *s;
                    j += 1;
                }
            }
            diag.insert_block(vec![c, c], m).unwrap();
        }
        us = us.contract(&diag, &[2], &[0]).unwrap();
        let rebuilt = us.contract(&res.v, &[2], &[0]).unwrap();
        assert_close(&rebuilt.densify(), &t.densify(), 1e-10);
    }

    #[test]
    fn svd_truncation_matches_dense_oracle() {
        // singular values of the blocked matrix must equal the singular
        // values of the dense embedding (zeros outside sectors change nothing)
        let t = BlockSparseTensor::<f64>::random(links3(), 0, 17, BackendId::reference());
        let res = t.svd(&[0, 1], &[2], 3, 0.0, SvdAlgorithm::Direct).unwrap();
        let dense = t.densify().svd(&[0, 1], &[2], 3, 0.0, SvdAlgorithm::Direct).unwrap();
        assert_eq!(res.kept_rank, dense.kept_rank);
        for (a, b) in res.singular_values.iter().zip(&dense.singular_values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((res.truncation_error - dense.truncation_error).abs() < 1e-10);
    }

    #[test]
    fn eigh_matches_dense_spectrum() {
        // build a Hermitian parity-0 tensor as A^dag A
        let a = BlockSparseTensor::<Complex64>::random(
            vec![
                Z2Link::new(2, 2, LinkDir::Incoming),
                Z2Link::new(2, 2, LinkDir::Outgoing),
            ],
            0,
            19,
            BackendId::reference(),
        );
        let h = a.conj().permute(&[1, 0]).unwrap().contract(&a, &[1], &[0]).unwrap();
        let (vals, v) = h.eigh(&[0], &[1]).unwrap();
        let (dvals, _) = h.densify().eigh(&[0], &[1]).unwrap();
        assert_eq!(vals.len(), dvals.len());
        for ((bv, _), dv) in vals.iter().zip(&dvals) {
            assert!((bv - dv).abs() < 1e-9, "{bv} vs {dv}");
        }
        // eigenvectors reproduce H v = v diag(vals) blockwise: check isometry
        let vv = v.conj().contract(&v, &[0], &[0]).unwrap();
        let id = BlockSparseTensor::<Complex64>::identity_on(v.links()[1].flipped(), BackendId::reference());
        let d = vv.densify();
        let di = id.densify();
        for (x, y) in d.data().iter().zip(di.data()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn add_scaled_and_inner_match_dense() {
        let mut a = BlockSparseTensor::<f64>::random(links3(), 0, 23, BackendId::reference());
        let b = BlockSparseTensor::<f64>::random(links3(), 0, 29, BackendId::reference());
        let ip = a.inner(&b);
        let dip = a.densify().inner(&b.densify());
        assert!((ip - dip).norm() < 1e-12);
        let mut da = a.densify();
        a.add_scaled(&b, 0.5).unwrap();
        da.add_scaled(&b.densify(), 0.5).unwrap();
        assert_close(&a.densify(), &da, 1e-12);
    }

    #[test]
    fn serialization_round_trip() {
        let t = BlockSparseTensor::<Complex64>::random(links3(), 1, 31, BackendId::reference());
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = BlockSparseTensor::<Complex64>::read_from(&mut buf.as_slice(), BackendId::reference()).unwrap();
        assert_eq!(back.links(), t.links());
        assert_eq!(back.parity(), t.parity());
        assert_eq!(back.num_blocks(), t.num_blocks());
        assert!((back.densify().add_scaled(&t.densify(), Complex64::new(-1.0, 0.0)).map(|_| back.densify().norm())).is_ok());
        let mut diff = back.densify();
        diff.add_scaled(&t.densify(), Complex64::new(-1.0, 0.0)).unwrap();
        assert_eq!(diff.norm(), 0.0);
    }

    #[test]
    fn convert_round_trip_through_single() {
        let t = BlockSparseTensor::<f64>::random(links3(), 0, 37, BackendId::reference());
        let s = t.convert::<f32>().unwrap();
        let back = s.convert::<f64>().unwrap();
        let mut diff = back.densify();
        diff.add_scaled(&t.densify(), -1.0).unwrap();
        assert!(diff.norm() < 1e-6 * t.norm());
    }
}
