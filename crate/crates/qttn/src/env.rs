//! Cached environment contractions for expectation values and local
//! effective Hamiltonians.
//!
//! An environment lives on a tree edge and summarizes one side of the
//! network sandwich <psi| H |psi> as matrices on that edge:
//!
//! - `closed` is the weighted sum over all Hamiltonian terms whose factors
//!   lie entirely on that side;
//! - `open` holds, per term, the unweighted transfer matrix of a term with
//!   exactly one factor on that side. Two open halves of the same term meet
//!   at the node where the term's sites join, and are paired there with the
//!   term's weight.
//!
//! Terms in this model have at most two non-identity factors, so every term
//! is either closed on one side of the center or open on exactly two of the
//! center's three edges. Identity terms never enter the environments; their
//! summed weight is carried separately.

use std::collections::BTreeMap;

use crate::error::{QttnError, Result};
use crate::model::PauliString;
use crate::network::NetTensor;
use crate::precision::Scalar;
use crate::state::TtnState;
use crate::topology::{Child, NodeId};

#[derive(Debug, Clone)]
pub struct Env<T: NetTensor> {
    pub closed: Option<T>,
    pub open: BTreeMap<usize, T>,
}

impl<T: NetTensor> Env<T> {
    pub fn empty() -> Self {
        Env {
            closed: None,
            open: BTreeMap::new(),
        }
    }
}

fn add_piece<T: NetTensor>(acc: &mut Option<T>, mut piece: T, weight: f64) -> Result<()> {
    if weight != 1.0 {
        piece.scale_real(weight);
    }
    match acc {
        Some(a) => a.add_scaled(&piece, T::Elem::one())?,
        None => *acc = Some(piece),
    }
    Ok(())
}

/// Contract environment matrix `m` into axis `axis` of `t`, keeping the
/// axis order of `t`.
pub fn apply_env<T: NetTensor>(m: &T, t: &T, axis: usize) -> Result<T> {
    let r = m.contract(t, &[1], &[axis])?;
    let rank = t.rank();
    let order: Vec<usize> = (0..rank)
        .map(|i| match i.cmp(&axis) {
            std::cmp::Ordering::Less => i + 1,
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Greater => i,
        })
        .collect();
    r.permute(&order)
}

/// Transfer operator content upward through the isometry `a`
/// (`[left, right, parent]`, isometric toward the parent): returns the
/// matrix on the parent edge. `None` on a child side means identity there.
fn up_transfer<T: NetTensor>(a: &T, ml: Option<&T>, mr: Option<&T>) -> Result<T> {
    let mut t = a.clone();
    if let Some(m) = ml {
        t = apply_env(m, &t, 0)?;
    }
    if let Some(m) = mr {
        t = apply_env(m, &t, 1)?;
    }
    a.conj().contract(&t, &[0, 1], &[0, 1])
}

/// Transfer operator content downward through the isometry `a` (isometric
/// toward the child at `child_axis`): returns the matrix on that child edge.
fn down_transfer<T: NetTensor>(
    a: &T,
    mp: Option<&T>,
    ms: Option<&T>,
    child_axis: usize,
) -> Result<T> {
    let sib = 1 - child_axis;
    let mut t = a.clone();
    if let Some(m) = mp {
        t = apply_env(m, &t, 2)?;
    }
    if let Some(m) = ms {
        t = apply_env(m, &t, sib)?;
    }
    a.conj().contract(&t, &[sib, 2], &[sib, 2])
}

/// Environment of a single physical site (the trivial one-site subtree).
pub fn leaf_env<T: NetTensor>(
    site: usize,
    terms: &[PauliString],
    backend: crate::backend::BackendId,
) -> Result<Env<T>> {
    let mut env = Env::empty();
    for (t_id, term) in terms.iter().enumerate() {
        let on_site: Vec<_> = term.factors.iter().filter(|&&(s, _)| s == site).collect();
        if on_site.is_empty() {
            continue;
        }
        if on_site.len() > 1 {
            return Err(QttnError::Argument(
                "terms with repeated sites are not supported".into(),
            ));
        }
        let m = T::site_op(on_site[0].1, backend);
        if term.factors.len() == on_site.len() {
            add_piece(&mut env.closed, m, term.weight)?;
        } else {
            env.open.insert(t_id, m);
        }
    }
    Ok(env)
}

/// Environment of the edge above a node, from its tensor (isometric toward
/// the parent) and the environments of its two child edges.
pub fn combine_up<T: NetTensor>(
    a: &T,
    left: &Env<T>,
    right: &Env<T>,
    terms: &[PauliString],
) -> Result<Env<T>> {
    let mut env = Env::empty();
    if let Some(cl) = &left.closed {
        add_piece(&mut env.closed, up_transfer(a, Some(cl), None)?, 1.0)?;
    }
    if let Some(cr) = &right.closed {
        add_piece(&mut env.closed, up_transfer(a, None, Some(cr))?, 1.0)?;
    }
    for (t_id, ml) in &left.open {
        match right.open.get(t_id) {
            Some(mr) => {
                // the two halves of the term meet here and close
                let piece = up_transfer(a, Some(ml), Some(mr))?;
                add_piece(&mut env.closed, piece, terms[*t_id].weight)?;
            }
            None => {
                env.open.insert(*t_id, up_transfer(a, Some(ml), None)?);
            }
        }
    }
    for (t_id, mr) in &right.open {
        if !left.open.contains_key(t_id) {
            env.open.insert(*t_id, up_transfer(a, None, Some(mr))?);
        }
    }
    Ok(env)
}

/// Environment of the edge above the child at `child_axis`, from the node's
/// tensor (isometric toward that child), the environment of the node's own
/// parent edge, and the sibling's subtree environment.
pub fn combine_down<T: NetTensor>(
    a: &T,
    parent: &Env<T>,
    sibling: &Env<T>,
    child_axis: usize,
    terms: &[PauliString],
) -> Result<Env<T>> {
    let mut env = Env::empty();
    if let Some(cp) = &parent.closed {
        add_piece(&mut env.closed, down_transfer(a, Some(cp), None, child_axis)?, 1.0)?;
    }
    if let Some(cs) = &sibling.closed {
        add_piece(&mut env.closed, down_transfer(a, None, Some(cs), child_axis)?, 1.0)?;
    }
    for (t_id, mp) in &parent.open {
        match sibling.open.get(t_id) {
            Some(ms) => {
                let piece = down_transfer(a, Some(mp), Some(ms), child_axis)?;
                add_piece(&mut env.closed, piece, terms[*t_id].weight)?;
            }
            None => {
                env.open
                    .insert(*t_id, down_transfer(a, Some(mp), None, child_axis)?);
            }
        }
    }
    for (t_id, ms) in &sibling.open {
        if !parent.open.contains_key(t_id) {
            env.open
                .insert(*t_id, down_transfer(a, None, Some(ms), child_axis)?);
        }
    }
    Ok(env)
}

/// Effective Hamiltonian applied to the center tensor: every closed
/// environment acts on its own axis, every term open on two axes acts as a
/// weighted product of its two halves, and `id_weight` adds the summed
/// identity-term contribution.
pub fn matvec<T: NetTensor>(
    center: &T,
    envs: [&Env<T>; 3],
    terms: &[PauliString],
    id_weight: f64,
) -> Result<T> {
    let mut acc: Option<T> = None;
    for (axis, env) in envs.iter().enumerate() {
        if let Some(c) = &env.closed {
            add_piece(&mut acc, apply_env(c, center, axis)?, 1.0)?;
        }
    }
    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        for (t_id, mi) in &envs[i].open {
            if let Some(mj) = envs[j].open.get(t_id) {
                let piece = apply_env(mj, &apply_env(mi, center, i)?, j)?;
                add_piece(&mut acc, piece, terms[*t_id].weight)?;
            }
        }
    }
    if id_weight != 0.0 {
        add_piece(&mut acc, center.clone(), id_weight)?;
    }
    Ok(acc.unwrap_or_else(|| {
        let mut z = center.clone();
        z.scale_real(0.0);
        z
    }))
}

/// <center| H |center> given the three edge environments.
pub fn local_energy<T: NetTensor>(
    center: &T,
    envs: [&Env<T>; 3],
    terms: &[PauliString],
    id_weight: f64,
) -> Result<f64> {
    let hv = matvec(center, envs, terms, id_weight)?;
    let e = center.inner(&hv);
    if e.im.abs() > 1e-10 * e.re.abs().max(1.0) && !T::Elem::PRECISION.is_complex() {
        return Err(QttnError::Numeric(format!(
            "energy has a spurious imaginary part {:.3e}",
            e.im
        )));
    }
    Ok(e.re)
}

/// Sum of the weights of identity (factor-free) strings; these bypass the
/// environment machinery entirely.
pub fn identity_weight(terms: &[PauliString]) -> f64 {
    terms
        .iter()
        .filter(|t| t.is_identity())
        .map(|t| t.weight)
        .sum()
}

fn check_sites(terms: &[PauliString], num_sites: usize) -> Result<()> {
    for t in terms {
        if let Some(s) = t.max_site() {
            if s >= num_sites {
                return Err(QttnError::Argument(format!(
                    "term references site {s} outside the {num_sites}-site lattice"
                )));
            }
        }
    }
    Ok(())
}

/// Environments of the child edges of `node`, given the map of subtree
/// environments (leaf envs are built on the fly).
pub fn child_envs<'e, T: NetTensor>(
    state: &TtnState<T>,
    node: NodeId,
    ups: &'e BTreeMap<NodeId, Env<T>>,
    terms: &[PauliString],
) -> Result<[std::borrow::Cow<'e, Env<T>>; 2]>
where
    Env<T>: Clone,
{
    let backend = state.backend();
    let get = |c: Child| -> Result<std::borrow::Cow<'e, Env<T>>> {
        match c {
            Child::Site(s) => Ok(std::borrow::Cow::Owned(leaf_env::<T>(s, terms, backend)?)),
            Child::Node(n) => Ok(std::borrow::Cow::Borrowed(
                ups.get(&n).expect("child env computed before its parent"),
            )),
        }
    };
    let [l, r] = state.topology().children(node);
    Ok([get(l)?, get(r)?])
}

/// Subtree environments of every non-top node, bottom-up. The center must
/// be at the top so every tensor is isometric toward its parent.
pub fn all_up_envs<T: NetTensor>(
    state: &TtnState<T>,
    terms: &[PauliString],
) -> Result<BTreeMap<NodeId, Env<T>>> {
    if state.center() != state.topology().top() {
        return Err(QttnError::Argument(
            "subtree environments require the center at the top node".into(),
        ));
    }
    let mut ups: BTreeMap<NodeId, Env<T>> = BTreeMap::new();
    for node in state.topology().all_nodes() {
        if node == state.topology().top() {
            break;
        }
        let [le, re] = child_envs(state, node, &ups, terms)?;
        ups.insert(node, combine_up(state.tensor(node), &le, &re, terms)?);
    }
    Ok(ups)
}

/// sum_k w_k <psi| P_k |psi> / <psi|psi> via cached environment
/// contractions. Works on a clone; the input state is untouched.
pub fn expectation<T: NetTensor>(state: &TtnState<T>, terms: &[PauliString]) -> Result<f64> {
    check_sites(terms, state.topology().num_sites())?;
    let mut s = state.clone();
    s.move_center(s.topology().top())?;
    let ups = all_up_envs(&s, terms)?;
    let top = s.topology().top();
    let [le, re] = child_envs(&s, top, &ups, terms)?;
    let pe = Env::empty();
    let c = s.tensor(top);
    let n2 = c.norm().powi(2);
    if n2 == 0.0 {
        return Err(QttnError::Numeric("expectation of a zero state".into()));
    }
    Ok(local_energy(c, [&le, &re, &pe], terms, identity_weight(terms))? / n2)
}
