//! Binary tree topology over the physical sites and the Z-order (Morton)
//! map from the 2D lattice onto the leaf ordering.
//!
//! Layer 0 is the lowest layer (its nodes hold two physical sites each);
//! layer `num_layers - 1` is the single top node. Node `(layer, pos)` covers
//! the contiguous leaf range `[pos * 2^(layer+1), (pos+1) * 2^(layer+1))`,
//! so with Morton leaf ordering every subtree covers a square (or
//! two-square) block of the lattice.

use serde::{Deserialize, Serialize};

use crate::error::{QttnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub pos: usize,
}

impl NodeId {
    pub fn new(layer: usize, pos: usize) -> Self {
        NodeId { layer, pos }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.layer, self.pos)
    }
}

/// A child slot of a node: either another node one layer down, or a
/// physical site (for layer-0 nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Node(NodeId),
    Site(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TTNTopology {
    num_sites: usize,
    num_layers: usize,
}

impl TTNTopology {
    pub fn new(num_sites: usize) -> Result<Self> {
        if num_sites < 2 || !num_sites.is_power_of_two() {
            return Err(QttnError::Topology(format!(
                "number of sites must be a power of two >= 2, got {num_sites}"
            )));
        }
        Ok(TTNTopology {
            num_sites,
            num_layers: num_sites.trailing_zeros() as usize,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn nodes_in_layer(&self, layer: usize) -> usize {
        self.num_sites >> (layer + 1)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_sites - 1
    }

    pub fn top(&self) -> NodeId {
        NodeId::new(self.num_layers - 1, 0)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.layer < self.num_layers && node.pos < self.nodes_in_layer(node.layer)
    }

    pub fn check(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(QttnError::Topology(format!(
                "node {node} outside a {}-site tree",
                self.num_sites
            )))
        }
    }

    /// Parent node, or None for the top.
    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        if node.layer + 1 == self.num_layers {
            None
        } else {
            Some(NodeId::new(node.layer + 1, node.pos / 2))
        }
    }

    pub fn children(&self, node: NodeId) -> [Child; 2] {
        if node.layer == 0 {
            [Child::Site(2 * node.pos), Child::Site(2 * node.pos + 1)]
        } else {
            [
                Child::Node(NodeId::new(node.layer - 1, 2 * node.pos)),
                Child::Node(NodeId::new(node.layer - 1, 2 * node.pos + 1)),
            ]
        }
    }

    /// Number of physical sites under (and including) this node's subtree.
    pub fn subtree_sites(&self, node: NodeId) -> usize {
        1 << (node.layer + 1)
    }

    /// Leaf range covered by the subtree: [start, end).
    pub fn leaf_range(&self, node: NodeId) -> (usize, usize) {
        let w = self.subtree_sites(node);
        (node.pos * w, (node.pos + 1) * w)
    }

    /// All nodes, lowest layer first, left to right within a layer.
    pub fn all_nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.num_nodes());
        for layer in 0..self.num_layers {
            for pos in 0..self.nodes_in_layer(layer) {
                out.push(NodeId::new(layer, pos));
            }
        }
        out
    }

    /// The unique tree path between two nodes (inclusive on both ends):
    /// up from `from` to the lowest common ancestor, then down to `to`.
    pub fn path(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>> {
        self.check(from)?;
        self.check(to)?;
        let mut up = vec![from];
        let mut down = vec![to];
        let mut a = from;
        let mut b = to;
        while a != b {
            if a.layer <= b.layer {
                a = self.parent(a).expect("nodes below the top always have parents");
                up.push(a);
            } else {
                b = self.parent(b).expect("nodes below the top always have parents");
                down.push(b);
            }
        }
        down.pop(); // the common ancestor is already the last element of `up`
        down.reverse();
        up.extend(down);
        Ok(up)
    }
}

/// 2D -> 1D site orderings. Every lattice site (x, y) of an N x N lattice is
/// assigned a leaf index; the model builder translates its terms through
/// this map before they ever reach the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeMapping {
    /// Z-order curve: interleave the bits of x and y. Keeps nearest
    /// neighbors of the 2D lattice close in the tree, so each subtree covers
    /// a contiguous square block.
    Morton,
    /// Plain row-major ordering, mostly useful as a worse-locality baseline.
    RowMajor,
}

impl Default for LatticeMapping {
    fn default() -> Self {
        LatticeMapping::Morton
    }
}

impl LatticeMapping {
    pub fn name(self) -> &'static str {
        match self {
            LatticeMapping::Morton => "morton",
            LatticeMapping::RowMajor => "row_major",
        }
    }

    /// Leaf index of lattice site (x, y) on an n x n lattice.
    pub fn leaf_index(self, x: usize, y: usize, n: usize) -> usize {
        debug_assert!(x < n && y < n);
        match self {
            LatticeMapping::Morton => morton_interleave(x, y),
            LatticeMapping::RowMajor => y * n + x,
        }
    }
}

/// Interleave the bits of x (even positions) and y (odd positions).
fn morton_interleave(x: usize, y: usize) -> usize {
    let mut out = 0usize;
    for bit in 0..(usize::BITS as usize / 2) {
        out |= ((x >> bit) & 1) << (2 * bit);
        out |= ((y >> bit) & 1) << (2 * bit + 1);
    }
    out
}
