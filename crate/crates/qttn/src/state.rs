//! The binary-tree tensor network state: tensor storage, isometrization,
//! and isometry-center movement.
//!
//! Every node holds a rank-3 tensor `[left child, right child, parent]`;
//! the top node's parent axis is a dimension-1 selector link. All tensors
//! except the one at `center` are isometries from their two non-center-facing
//! axes to the center-facing axis, so the squared norm of the state is the
//! squared norm of the center tensor.

use num_complex::Complex64;

use crate::backend::BackendId;
use crate::dense::{SvdAlgorithm, Tensor};
use crate::error::{QttnError, Result};
use crate::network::{NetLink, NetTensor};
use crate::precision::Scalar;
use crate::sparse::BlockSparseTensor;
use crate::topology::{Child, NodeId, TTNTopology};

/// Truncation parameters applied when the center moves across a link.
#[derive(Debug, Clone, Copy)]
pub struct TruncParams {
    pub max_rank: usize,
    pub cutoff: f64,
    pub algorithm: SvdAlgorithm,
    pub tile_entries: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TtnState<T: NetTensor> {
    topology: TTNTopology,
    /// Layer-major node storage: layer 0 first, left to right.
    tensors: Vec<T>,
    layer_offsets: Vec<usize>,
    center: NodeId,
    max_bond_dim: usize,
}

impl<T: NetTensor> TtnState<T> {
    /// Random normalized state with all link dimensions at
    /// `min(chi, 2^(subtree size))`, isometrized toward the top node.
    pub fn random(topology: TTNTopology, chi: usize, seed: u64, backend: BackendId) -> Result<Self> {
        if chi < 2 {
            return Err(QttnError::Argument(format!(
                "max bond dimension must be >= 2, got {chi}"
            )));
        }
        let layer_offsets = offsets(&topology);
        // parent link of every node, bottom-up
        let mut up_links: Vec<T::Link> = Vec::with_capacity(topology.num_nodes());
        for node in topology.all_nodes() {
            let [cl, cr] = child_links_from::<T>(&topology, node, &up_links, &layer_offsets);
            let link = if node == topology.top() {
                T::selector_link()
            } else {
                NetLink::fuse(&cl, &cr).cap(chi)
            };
            up_links.push(link);
        }
        let mut tensors: Vec<T> = Vec::with_capacity(topology.num_nodes());
        for (i, node) in topology.all_nodes().into_iter().enumerate() {
            let [cl, cr] = child_links_from::<T>(&topology, node, &up_links, &layer_offsets);
            tensors.push(T::random3(
                [cl.as_child(), cr.as_child(), up_links[i].as_parent()],
                seed.wrapping_add(i as u64).wrapping_mul(0x517c_c1b7_2722_0a95),
                backend,
            ));
        }
        let mut state = TtnState {
            topology,
            tensors,
            layer_offsets,
            center: NodeId::new(0, 0),
            max_bond_dim: chi,
        };
        state.center = state.topology.top();
        // isometrize every layer toward the top
        for node in state.topology.all_nodes() {
            if node == state.topology.top() {
                break;
            }
            let (q, r) = state.tensor(node).qr(&[0, 1], &[2])?;
            *state.tensor_mut(node) = q;
            state.absorb_into_parent(node, &r)?;
        }
        state.normalize();
        Ok(state)
    }

    /// Rebuild a state from stored parts (used by checkpoint loading).
    pub fn from_parts(
        topology: TTNTopology,
        tensors: Vec<T>,
        center: NodeId,
        max_bond_dim: usize,
    ) -> Result<Self> {
        if tensors.len() != topology.num_nodes() {
            return Err(QttnError::Argument(format!(
                "{} tensors supplied for a topology with {} nodes",
                tensors.len(),
                topology.num_nodes()
            )));
        }
        if center.layer >= topology.num_layers() || center.pos >= topology.nodes_in_layer(center.layer) {
            return Err(QttnError::Argument(format!("center {center} is not a node")));
        }
        let layer_offsets = offsets(&topology);
        Ok(TtnState {
            topology,
            tensors,
            layer_offsets,
            center,
            max_bond_dim,
        })
    }

    /// Write all node tensors in storage order (bottom layer first, left to
    /// right), each in the self-describing binary tensor format.
    pub fn write_tensors<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        for t in &self.tensors {
            t.write_to(w)?;
        }
        Ok(())
    }

    /// Counterpart of [`Self::write_tensors`].
    pub fn read_tensors<R: std::io::Read>(
        r: &mut R,
        topology: TTNTopology,
        center: NodeId,
        max_bond_dim: usize,
        backend: BackendId,
    ) -> Result<Self> {
        let mut tensors = Vec::with_capacity(topology.num_nodes());
        for _ in 0..topology.num_nodes() {
            tensors.push(T::read_from(r, backend)?);
        }
        Self::from_parts(topology, tensors, center, max_bond_dim)
    }

    /// (total elements across all node tensors, largest single tensor),
    /// counted from link dimensions; an upper bound for the block-sparse
    /// family, where only the charge-allowed blocks are stored.
    pub fn elem_counts(&self) -> (u64, u64) {
        let mut total = 0u64;
        let mut largest = 0u64;
        for t in &self.tensors {
            let elems: u64 = (0..t.rank()).map(|a| t.link(a).total_dim() as u64).product();
            total += elems;
            largest = largest.max(elems);
        }
        (total, largest)
    }

    pub fn topology(&self) -> &TTNTopology {
        &self.topology
    }

    pub fn center(&self) -> NodeId {
        self.center
    }

    pub fn max_bond_dim(&self) -> usize {
        self.max_bond_dim
    }

    pub fn set_max_bond_dim(&mut self, chi: usize) {
        self.max_bond_dim = chi;
    }

    fn index(&self, node: NodeId) -> usize {
        self.layer_offsets[node.layer] + node.pos
    }

    pub fn tensor(&self, node: NodeId) -> &T {
        &self.tensors[self.index(node)]
    }

    pub fn tensor_mut(&mut self, node: NodeId) -> &mut T {
        let i = self.index(node);
        &mut self.tensors[i]
    }

    pub fn backend(&self) -> BackendId {
        self.tensors[0].backend()
    }

    pub fn set_backend(&mut self, backend: BackendId) {
        for t in &mut self.tensors {
            t.set_backend(backend);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensor(self.center).norm()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.tensor_mut(self.center).scale_real(1.0 / n);
        }
    }

    /// Which axis of `parent` points at `child`.
    pub fn child_axis(&self, parent: NodeId, child: NodeId) -> usize {
        match self.topology.children(parent) {
            [Child::Node(c), _] if c == child => 0,
            [_, Child::Node(c)] if c == child => 1,
            _ => panic!("{child} is not a child of {parent}"),
        }
    }

    /// Contract `r` (`[new link, old link]`) into the parent of `node` at
    /// the corresponding child axis.
    fn absorb_into_parent(&mut self, node: NodeId, r: &T) -> Result<()> {
        let parent = self
            .topology
            .parent(node)
            .ok_or_else(|| QttnError::Topology("top node has no parent".into()))?;
        let a = self.child_axis(parent, node);
        let merged = r.contract(self.tensor(parent), &[1], &[a])?;
        // merged axes: [new link, parent's other axes in order]
        let order: Vec<usize> = match a {
            0 => vec![0, 1, 2],
            1 => vec![1, 0, 2],
            _ => vec![1, 2, 0],
        };
        *self.tensor_mut(parent) = merged.permute(&order)?;
        Ok(())
    }

    /// Contract `r` (`[new link, old link]`) into the child at axis `a`,
    /// over the child's parent axis.
    fn absorb_into_child(&mut self, parent: NodeId, a: usize, r: &T) -> Result<()> {
        let child = match self.topology.children(parent)[a] {
            Child::Node(c) => c,
            Child::Site(_) => {
                return Err(QttnError::Topology(
                    "cannot move the center onto a physical site".into(),
                ))
            }
        };
        let merged = r.contract(self.tensor(child), &[1], &[2])?;
        *self.tensor_mut(child) = merged.permute(&[1, 2, 0])?;
        Ok(())
    }

    /// Move the isometry center one edge, by QR (`trunc = None`) or
    /// truncated SVD. Returns the truncation error (0 for QR).
    fn move_one(&mut self, next: NodeId, trunc: Option<TruncParams>) -> Result<f64> {
        let cur = self.center;
        let factorize = |t: &T, left: &[usize], right: &[usize]| -> Result<(T, T, f64)> {
            match trunc {
                None => {
                    let (q, r) = t.qr(left, right)?;
                    Ok((q, r, 0.0))
                }
                Some(p) => {
                    let (u, sv, err, _) =
                        t.svd_sv(left, right, p.max_rank, p.cutoff, p.algorithm, p.tile_entries)?;
                    Ok((u, sv, err))
                }
            }
        };
        let err;
        if self.topology.parent(cur) == Some(next) {
            let (q, r, e) = factorize(self.tensor(cur), &[0, 1], &[2])?;
            err = e;
            *self.tensor_mut(cur) = q;
            self.absorb_into_parent(cur, &r)?;
        } else {
            // next is a child of cur
            let a = self.child_axis(cur, next);
            let left: Vec<usize> = (0..3).filter(|&x| x != a).collect();
            let (q, mut r, e) = factorize(self.tensor(cur), &left, &[a])?;
            err = e;
            // restore the axis order and the child/parent direction labels
            let order = match a {
                0 => vec![2, 0, 1],
                1 => vec![0, 2, 1],
                _ => vec![0, 1, 2],
            };
            let mut q = q.permute(&order)?;
            q.flip_link(a);
            r.flip_link(0);
            *self.tensor_mut(cur) = q;
            self.absorb_into_child(cur, a, &r)?;
        }
        self.center = next;
        Ok(err)
    }

    /// Relocate the isometry center to `target` along the tree path, using
    /// QR at every step. The state vector is unchanged.
    pub fn move_center(&mut self, target: NodeId) -> Result<()> {
        self.move_center_trunc(target, None).map(|_| ())
    }

    /// Like [`TtnState::move_center`], but each step SVD-truncates the
    /// crossed link. Returns the largest per-step truncation error.
    pub fn move_center_trunc(&mut self, target: NodeId, trunc: Option<TruncParams>) -> Result<f64> {
        self.topology.check(target)?;
        let path = self.topology.path(self.center, target)?;
        let mut max_err: f64 = 0.0;
        for &next in path.iter().skip(1) {
            max_err = max_err.max(self.move_one(next, trunc)?);
        }
        Ok(max_err)
    }

    /// SVD-truncate the link between `node` and its parent. The center must
    /// sit on one end of the link; afterwards it sits at the parent.
    /// Returns the truncation error.
    pub fn truncate_link(&mut self, node: NodeId, params: TruncParams) -> Result<f64> {
        self.topology.check(node)?;
        let parent = self.topology.parent(node).ok_or_else(|| {
            QttnError::Topology("the selector link of the top node cannot be truncated".into())
        })?;
        if self.center != node && self.center != parent {
            return Err(QttnError::Argument(format!(
                "center {} is not adjacent to the link above {node}",
                self.center
            )));
        }
        if self.center == parent {
            self.move_one(node, None)?;
        }
        self.move_one(parent, Some(params))
    }

    /// Whether the tensor at `node` is exact: its parent link is as large as
    /// the fused child links, so no degree of freedom below was truncated.
    pub fn is_ergt(&self, node: NodeId) -> bool {
        let t = self.tensor(node);
        let fused = NetLink::fuse(&t.link(0), &t.link(1));
        NetLink::dims_eq(&t.link(2), &fused)
    }

    /// Isometry audit: every non-center tensor must be an isometry toward
    /// the center within `tol`.
    pub fn isometry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in self.topology.all_nodes() {
            if node == self.center {
                continue;
            }
            let next = self.topology.path(node, self.center).expect("valid nodes")[1];
            let t = self.tensor(node);
            let (iso_axes, open_axis) = if self.topology.parent(node) == Some(next) {
                (vec![0usize, 1], 2usize)
            } else {
                let a = self.child_axis(node, next);
                ((0..3).filter(|&x| x != a).collect(), a)
            };
            let gram = t.conj().contract(t, &iso_axes, &iso_axes).expect("axes valid");
            let id = T::identity_env(t.link(open_axis).as_child(), t.backend());
            let mut diff = gram.densify();
            let idd = id.densify();
            diff.add_scaled(&idd, -T::Elem::one()).expect("same shape");
            worst = worst.max(diff.norm());
        }
        worst
    }

    /// Full statevector (oracle bit convention: bit `s` of the basis index
    /// is the state of leaf `s`). Guarded to 16 sites.
    pub fn densify_state(&self) -> Result<Vec<Complex64>> {
        let n = self.topology.num_sites();
        if n > 16 {
            return Err(QttnError::Argument(format!(
                "densify_state supports at most 16 sites, got {n}"
            )));
        }
        // dense subtree tensor with axes [leaf_0 .. leaf_{k-1}, parent]
        let top = self.dense_subtree(self.topology.top())?;
        let data = top.into_data();
        debug_assert_eq!(data.len(), 1 << n);
        // row-major over [s0 .. s_{n-1}, selector(1)]: axis s is bit
        // position n-1-s of the flat index
        let mut out = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (j, v) in data.into_iter().enumerate() {
            let mut i = 0usize;
            for s in 0..n {
                if (j >> (n - 1 - s)) & 1 == 1 {
                    i |= 1 << s;
                }
            }
            out[i] = v.to_c64();
        }
        Ok(out)
    }

    fn dense_subtree(&self, node: NodeId) -> Result<Tensor<T::Elem>> {
        let a = self.tensor(node).densify();
        if node.layer == 0 {
            return Ok(a);
        }
        let (l, r) = match self.topology.children(node) {
            [Child::Node(l), Child::Node(r)] => (l, r),
            _ => unreachable!("layer > 0"),
        };
        let lt = self.dense_subtree(l)?;
        let rt = self.dense_subtree(r)?;
        let nl = lt.rank() - 1;
        let nr = rt.rank() - 1;
        let t1 = lt.contract(&a, &[nl], &[0])?; // [l_leaves.., r_link, p]
        let t2 = t1.contract(&rt, &[nl], &[nr])?; // [l_leaves.., p, r_leaves..]
        let mut order: Vec<usize> = (0..nl).collect();
        order.extend(nl + 1..nl + 1 + nr);
        order.push(nl);
        t2.permute(&order)
    }

    /// Overlap <self | other> (same topology), via the dense statevectors.
    /// Intended for tests and small systems.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        let a = self.densify_state()?;
        let b = other.densify_state()?;
        Ok(a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum())
    }
}

fn offsets(topology: &TTNTopology) -> Vec<usize> {
    let mut out = Vec::with_capacity(topology.num_layers());
    let mut acc = 0usize;
    for layer in 0..topology.num_layers() {
        out.push(acc);
        acc += topology.nodes_in_layer(layer);
    }
    out
}

fn child_links_from<T: NetTensor>(
    topology: &TTNTopology,
    node: NodeId,
    up_links: &[T::Link],
    layer_offsets: &[usize],
) -> [T::Link; 2] {
    let get = |c: Child| match c {
        Child::Site(_) => T::phys_link(),
        Child::Node(n) => up_links[layer_offsets[n.layer] + n.pos],
    };
    let [l, r] = topology.children(node);
    [get(l), get(r)]
}

/// Precision conversion within a tensor family.
pub trait ConvertNet<Target: NetTensor>: NetTensor {
    fn convert_net(&self) -> Result<Target>;
}

impl<A: Scalar, B: Scalar> ConvertNet<Tensor<B>> for Tensor<A> {
    fn convert_net(&self) -> Result<Tensor<B>> {
        self.convert::<B>()
    }
}

impl<A: Scalar, B: Scalar> ConvertNet<BlockSparseTensor<B>> for BlockSparseTensor<A> {
    fn convert_net(&self) -> Result<BlockSparseTensor<B>> {
        self.convert::<B>()
    }
}

impl<T: NetTensor> TtnState<T> {
    /// Convert every tensor to another precision of the same family.
    pub fn convert_state<U>(&self) -> Result<TtnState<U>>
    where
        U: NetTensor<Link = T::Link>,
        T: ConvertNet<U>,
    {
        Ok(TtnState {
            topology: self.topology.clone(),
            tensors: self.tensors.iter().map(|t| t.convert_net()).collect::<Result<_>>()?,
            layer_offsets: self.layer_offsets.clone(),
            center: self.center,
            max_bond_dim: self.max_bond_dim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::BlockSparseTensor;

    type DState = TtnState<Tensor<f64>>;
    type ZState = TtnState<BlockSparseTensor<f64>>;

    fn be() -> BackendId {
        BackendId::reference()
    }

    #[test]
    fn random_state_dimensions() {
        let t = TTNTopology::new(4).unwrap();
        let s = DState::random(t, 4, 1, be()).unwrap();
        let n0 = s.tensor(NodeId::new(0, 0));
        assert_eq!([n0.link(0), n0.link(1), n0.link(2)], [2, 2, 4]);
        let top = s.tensor(NodeId::new(1, 0));
        assert_eq!([top.link(0), top.link(1), top.link(2)], [4, 4, 1]);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_cap_applies() {
        let t = TTNTopology::new(8).unwrap();
        let s = DState::random(t, 2, 1, be()).unwrap();
        for node in s.topology().all_nodes() {
            if node != s.topology().top() {
                assert_eq!(s.tensor(node).link(2), 2);
            }
        }
    }

    #[test]
    fn random_state_is_isometric() {
        let t = TTNTopology::new(8).unwrap();
        let s = DState::random(t, 4, 7, be()).unwrap();
        assert!(s.isometry_defect() < 1e-12);
    }

    #[test]
    fn z2_random_state_is_isometric_and_normalized() {
        let t = TTNTopology::new(8).unwrap();
        let s = ZState::random(t, 4, 7, be()).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(s.isometry_defect() < 1e-12);
        // even-sector selector
        assert_eq!(s.tensor(s.topology().top()).link(2).dims, [1, 0]);
    }

    #[test]
    fn move_center_preserves_state() {
        let t = TTNTopology::new(8).unwrap();
        let s0 = DState::random(t, 4, 3, be()).unwrap();
        let before = s0.densify_state().unwrap();
        let mut s = s0.clone();
        s.move_center(NodeId::new(0, 2)).unwrap();
        assert_eq!(s.center(), NodeId::new(0, 2));
        assert!(s.isometry_defect() < 1e-12);
        let after = s.densify_state().unwrap();
        let overlap: Complex64 = before.iter().zip(&after).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        // and back
        s.move_center(s.topology().top()).unwrap();
        let overlap2 = s.overlap(&s0).unwrap();
        assert!((overlap2.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn move_center_to_self_is_identity() {
        let t = TTNTopology::new(4).unwrap();
        let mut s = DState::random(t, 4, 9, be()).unwrap();
        let before = s.densify_state().unwrap();
        let top = s.topology().top();
        s.move_center(top).unwrap();
        let after = s.densify_state().unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn z2_move_center_preserves_state() {
        let t = TTNTopology::new(8).unwrap();
        let s0 = ZState::random(t, 4, 11, be()).unwrap();
        let before = s0.densify_state().unwrap();
        let mut s = s0.clone();
        s.move_center(NodeId::new(0, 3)).unwrap();
        s.move_center(NodeId::new(1, 0)).unwrap();
        assert!(s.isometry_defect() < 1e-12);
        let after = s.densify_state().unwrap();
        let overlap: Complex64 = before.iter().zip(&after).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn densified_norm_is_one() {
        let t = TTNTopology::new(16).unwrap();
        let s = DState::random(t, 6, 5, be()).unwrap();
        let v = s.densify_state().unwrap();
        let n: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ergt_detection() {
        let t = TTNTopology::new(8).unwrap();
        // chi large enough that everything is exact
        let s = DState::random(t.clone(), 16, 2, be()).unwrap();
        for node in s.topology().all_nodes() {
            if node != s.topology().top() {
                assert!(s.is_ergt(node), "{node} should be exact");
            }
        }
        // chi = 2 truncates even the layer-0 parent links (2x2x2 < 2x2x4)
        let s2 = DState::random(t.clone(), 2, 2, be()).unwrap();
        assert!(!s2.is_ergt(NodeId::new(0, 0)));
        assert!(!s2.is_ergt(NodeId::new(1, 0)));
        // chi = 4: layer 0 is exact (2x2x4), layer 1 is truncated (4x4x4)
        let s3 = DState::random(t, 4, 2, be()).unwrap();
        assert!(s3.is_ergt(NodeId::new(0, 0)));
        assert!(!s3.is_ergt(NodeId::new(1, 0)));
    }

    #[test]
    fn truncate_link_on_product_state_keeps_rank_one() {
        // rank-1 content across every link: the all-up product state
        let t = TTNTopology::new(4).unwrap();
        let mut s = DState::random(t, 4, 1, be()).unwrap();
        // overwrite with |0000>: each leaf tensor maps |00> onto link index 0
        for node in s.topology().all_nodes() {
            let tn = s.tensor(node).clone();
            let shape: Vec<usize> = (0..3).map(|a| tn.link(a)).collect();
            let mut data = vec![0.0f64; shape.iter().product()];
            data[0] = 1.0; // (0,0,0) element
            *s.tensor_mut(node) =
                Tensor::from_data(shape, data, be()).unwrap();
        }
        let node = NodeId::new(0, 0);
        let params = TruncParams {
            max_rank: 4,
            cutoff: 1e-9,
            algorithm: SvdAlgorithm::Direct,
            tile_entries: None,
        };
        let mut s2 = s.clone();
        s2.move_center(node).unwrap();
        let err = s2.truncate_link(node, params).unwrap();
        assert!(err < 1e-12);
        assert_eq!(s2.tensor(node).link(2), 1);
    }

    #[test]
    fn truncation_error_matches_dense_distance() {
        let t = TTNTopology::new(4).unwrap();
        let mut s = DState::random(t, 4, 21, be()).unwrap();
        let before = s.densify_state().unwrap();
        let node = NodeId::new(0, 1);
        s.move_center(node).unwrap();
        let params = TruncParams {
            max_rank: 2,
            cutoff: 0.0,
            algorithm: SvdAlgorithm::Direct,
            tile_entries: None,
        };
        let err = s.truncate_link(node, params).unwrap();
        let after = s.densify_state().unwrap();
        let dist: f64 = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!((err - dist).abs() < 1e-10, "err {err} vs dense distance {dist}");
    }

    #[test]
    fn exact_product_state_round_trip() {
        // load |0101> into a chi-4 TTN by hand and densify it back
        let t = TTNTopology::new(4).unwrap();
        let mut s = DState::random(t, 4, 1, be()).unwrap();
        for (i, node) in s.topology().all_nodes().into_iter().enumerate() {
            let tn = s.tensor(node).clone();
            let shape: Vec<usize> = (0..3).map(|a| tn.link(a)).collect();
            let mut data = vec![0.0f64; shape.iter().product()];
            if i < 2 {
                // leaf nodes: map |0>|1> onto link index 0
                let idx = 1 * shape[2]; // (0, 1, 0)
                data[idx] = 1.0;
            } else {
                data[0] = 1.0;
            }
            *s.tensor_mut(node) = Tensor::from_data(shape, data, be()).unwrap();
        }
        let v = s.densify_state().unwrap();
        // |0101>: leaves 1 and 3 are |1> -> index 0b1010
        for (i, amp) in v.iter().enumerate() {
            let expect = if i == 0b1010 { 1.0 } else { 0.0 };
            assert!((amp.re - expect).abs() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn convert_round_trip() {
        let t = TTNTopology::new(8).unwrap();
        let s = DState::random(t, 4, 13, be()).unwrap();
        let z: TtnState<Tensor<Complex64>> = s.convert_state().unwrap();
        let back: DState = z.convert_state().unwrap();
        let o = s.overlap(&back).unwrap();
        assert!((o.norm() - 1.0).abs() < 1e-12);
    }
}
