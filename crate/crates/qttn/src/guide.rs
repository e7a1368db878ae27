//! The chapters of the mdbook guide in `book/src`, included as doc
//! comments so `cargo test --doc` compiles and runs every code block.
//! mdbook itself cannot run examples against the crate; this keeps the
//! book honest without duplicating its snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/topology.md")]
pub mod topology {}

#[doc = include_str!("../../../book/src/tensors.md")]
pub mod tensors {}

#[doc = include_str!("../../../book/src/symmetry.md")]
pub mod symmetry {}

#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}
