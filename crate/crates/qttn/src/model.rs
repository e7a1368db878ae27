//! The 2D transverse-field Ising model as a list of weighted Pauli strings.
//!
//! H = -J sum_<i,j> sigma^x_i sigma^x_j - g sum_i sigma^z_i on an N x N
//! lattice with open boundaries: 2 N (N - 1) bond terms and N^2 field
//! terms. Site indices in the emitted strings are already translated
//! through the chosen 2D -> 1D leaf ordering.

use serde::{Deserialize, Serialize};

use crate::error::{QttnError, Result};
use crate::topology::LatticeMapping;

/// Default transverse field: the literature estimate of the quantum
/// critical point of the 2D model at J = 1.
pub const DEFAULT_CRITICAL_FIELD: f64 = 3.04438;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliOp {
    X,
    Z,
}

/// A weighted product of single-site Pauli operators; sites not listed carry
/// the identity. For this model every string has one or two factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub weight: f64,
    /// (site, operator), sorted by site, no duplicates.
    pub factors: Vec<(usize, PauliOp)>,
}

impl PauliString {
    pub fn new(weight: f64, mut factors: Vec<(usize, PauliOp)>) -> Result<Self> {
        factors.sort_by_key(|&(s, _)| s);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(QttnError::Argument(
                "pauli string lists the same site twice".into(),
            ));
        }
        Ok(PauliString { weight, factors })
    }

    /// Largest referenced site index, or None for the identity string.
    pub fn max_site(&self) -> Option<usize> {
        self.factors.last().map(|&(s, _)| s)
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Z2 charge shifts of a Pauli string: an X factor flips the site's charge
/// (shift 1), a Z factor preserves it (shift 0). Every term of the Ising
/// Hamiltonian has total shift 0 mod 2, which is exactly the symmetry the
/// block-sparse tensors exploit.
pub fn term_charges(term: &PauliString) -> Vec<(usize, u8)> {
    term.factors
        .iter()
        .map(|&(site, op)| {
            let shift = match op {
                PauliOp::X => 1,
                PauliOp::Z => 0,
            };
            (site, shift)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingModelSpec {
    /// Linear lattice size; the number of qubits is n * n.
    pub n: usize,
    pub j: f64,
    pub g: f64,
}

impl IsingModelSpec {
    pub fn new(n: usize, j: f64, g: f64) -> Result<Self> {
        if n < 2 {
            return Err(QttnError::Argument(format!("lattice size must be >= 2, got {n}")));
        }
        Ok(IsingModelSpec { n, j, g })
    }

    pub fn critical(n: usize) -> Result<Self> {
        IsingModelSpec::new(n, 1.0, DEFAULT_CRITICAL_FIELD)
    }

    pub fn num_sites(&self) -> usize {
        self.n * self.n
    }

    pub fn num_bonds(&self) -> usize {
        2 * self.n * (self.n - 1)
    }
}

/// All terms of the open-boundary Hamiltonian, with site indices mapped to
/// leaf order: 2 N (N - 1) bond strings of weight -J, then N^2 field strings
/// of weight -g.
pub fn build_hamiltonian(spec: &IsingModelSpec, mapping: LatticeMapping) -> Vec<PauliString> {
    let n = spec.n;
    let leaf = |x: usize, y: usize| mapping.leaf_index(x, y, n);
    let mut terms = Vec::with_capacity(spec.num_bonds() + spec.num_sites());
    for y in 0..n {
        for x in 0..n {
            if x + 1 < n {
                terms.push(
                    PauliString::new(
                        -spec.j,
                        vec![(leaf(x, y), PauliOp::X), (leaf(x + 1, y), PauliOp::X)],
                    )
                    .expect("distinct sites"),
                );
            }
            if y + 1 < n {
                terms.push(
                    PauliString::new(
                        -spec.j,
                        vec![(leaf(x, y), PauliOp::X), (leaf(x, y + 1), PauliOp::X)],
                    )
                    .expect("distinct sites"),
                );
            }
        }
    }
    for y in 0..n {
        for x in 0..n {
            terms.push(
                PauliString::new(-spec.g, vec![(leaf(x, y), PauliOp::Z)]).expect("single site"),
            );
        }
    }
    terms
}
