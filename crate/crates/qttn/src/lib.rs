//! Tree tensor network (TTN) ground-state solver for the two-dimensional
//! transverse-field quantum Ising model.
//!
//! The crate is organized around an abstract tensor surface with swappable
//! implementations (a dense reference backend, a cache-blocked optimized
//! backend, and a Z2 block-sparse tensor), a variational sweep engine with
//! mixed-precision scheduling, and a benchmark harness that records
//! time-versus-energy telemetry.

pub mod backend;
pub mod bench;
pub mod dense;
pub mod dyn_tensor;
pub mod env;
pub mod error;
pub mod guide;
pub mod lanczos;
pub mod model;
pub mod network;
pub mod oracle;
pub mod precision;
pub mod sparse;
pub mod state;
pub mod sweep;
pub mod topology;

pub use backend::{BackendId, BackendName};
pub use bench::{
    append_failure, append_record, make_report, read_records, run_benchmark, run_grid, verify,
    BenchmarkRecord, FailureRecord, GridConfig, Report, ReportRow, RunConfig, VerifyOutcome,
};
pub use dense::{SvdAlgorithm, SvdResult, Tensor};
pub use dyn_tensor::DynTensor;
pub use error::{QttnError, Result};
pub use lanczos::LanczosConfig;
pub use model::{build_hamiltonian, term_charges, IsingModelSpec, PauliOp, PauliString};
pub use precision::{Precision, Scalar};
pub use sparse::{BlockSparseTensor, BsvdResult, LinkDir, Z2Link};
pub use state::{TruncParams, TtnState};
pub use sweep::{
    find_ground_state, DynState, GroundStateResult, PrecisionSchedule, SweepConfig, SweepRecord,
    TensorKind, TilingPolicy,
};
pub use topology::{LatticeMapping, NodeId, TTNTopology};
