//! Parallel-in-time integration of linear ODE systems `u' = A u + g(t)`
//! by splitting into independent particular solves and matrix-exponential
//! propagation of the homogeneous parts.
//!
//! Two model problems ship with the crate: a driven series RLC circuit and
//! a finite-integration discretisation of Maxwell's equations in a
//! perfectly conducting cavity.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expm;
pub mod fitwave;
pub mod linode;
pub mod paraexp;
pub mod reference;
pub mod rlc;
pub mod steppers;

pub use error::{Error, Result};
pub use expm::{expm_action, expm_action_taylor, expm_dense, select_taylor_params, ExpmConfig};
pub use fitwave::{build_wave_system, reference_cavity, FitGrid, FitOperators, WaveProblem, WaveSourceConfig};
pub use linode::{LinearOdeSystem, SampledSolution, Source, SparseMatrix, StateVector, TripletBuilder};
pub use paraexp::{
    global_grid, paraexp_solve, paraexp_solve_partition, partition_uniform, propagate_homogeneous, solve_particular, superpose,
    ParaexpRun, RunMetadata, TimePartition, WorkerReport,
};
pub use reference::{dormand_prince, AdaptiveOptions};
pub use rlc::{rlc_closed_form, rlc_system, ClosedForm, RlcParams};
pub use steppers::{cfl_check, integrate, integrate_on_grid, CflReport, StepperKind};
