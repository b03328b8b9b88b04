//! Construction kit for sparse ReLU networks with uniformly bounded weights.
//!
//! The crate builds networks by explicit wiring rather than training: a small
//! calculus of combination rules (composition, parallel stacking, depth
//! synchronization, width embedding), approximate-multiplication gadgets, and
//! local Taylor interpolation nets assembled from them. On top of those sit
//! chart-based constructions for functions supported on low-dimensional
//! manifolds, and a small empirical-risk-minimization trainer used to compare
//! wired nets against fitted ones.
//!
//! Everything flows through [`Network`], a sparse layered ReLU representation
//! whose nonzero-parameter count is the complexity measure the constructions
//! are budgeted against.

pub mod assemble;
pub mod calculus;
pub mod erm;
pub mod error;
pub mod experiment;
pub mod gadgets;
pub mod holder;
pub mod manifold;
pub mod net;

pub use assemble::{assemble, AssembleBuild, AssembleOptions, AssembleReport, StageOutcome};
pub use erm::{run_erm_experiment, ErmConfig, ErmReport, ErmRow};
pub use error::{Error, Result};
pub use experiment::{
    emit_report, rate_fit, run_experiment, sup_error, ErrorReport, ExperimentConfig, RateRow,
};
pub use holder::{
    build_holder_net, build_local_scheme, taylor_degree, Domain, HolderBuild, HolderFunction,
    HolderReport, LocalScheme, TaylorPolynomial, TaylorSource,
};
pub use manifold::{
    partition::{build_partition, PartitionOfUnity},
    Chart, Manifold,
};
pub use net::{
    count_params, read_network, write_network, Architecture, EvalScratch, FileFormat, Network,
    SparseMat, SparseVec, SparsityReport, ValidationReport, Violation, WeightMode,
};
