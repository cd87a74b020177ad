//! Finite-horizon optimal control on a fixed grid, solved two ways: once for
//! the actual plant and once for a mismatched model whose running cost carries
//! a trajectory-deviation penalty. Forward-backward sweeps realize the
//! minimum-principle conditions of both problems, and the [`equivalence`]
//! module checks, node by node, whether the two constrained Hamiltonian
//! minimizers coincide - either because the control gradients match or because
//! tight control bounds make both problems project onto the same boundary
//! point.
//!
//! All value types are immutable after construction and safe to share across
//! threads; the solvers own their iterate buffers.

// the integrator kernels walk several parallel buffers by index
#![allow(clippy::needless_range_loop)]

pub mod costs;
pub mod equivalence;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod pmp;
pub mod scenario;
pub mod sets;
pub mod systems;

pub use costs::{total_cost, CostKind, PenaltySchedule, QuadraticCostSpec};
pub use equivalence::{
    check_subgradient_alignment, compare_pmp_solutions, saturation_profile, EquivalenceReport,
    StationarityCheck, Verdict,
};
pub use error::{Error, Result};
pub use grid::{trajectory_sup_distance, TimeGrid, Trajectory};
pub use hamiltonian::{
    nonsmooth_abs_spec, normal_cone_residual, BruteForceArgmin, ControlDecision, HamiltonianSpec,
    SaturationFlag, SubdifferentialInterval,
};
pub use pmp::{
    closed_loop_coupled_run, integrate_costate_backward, integrate_state_forward, solve_model,
    solve_plant, CoupledRun, PmpSolution, SweepSettings,
};
pub use scenario::Scenario;
pub use sets::AdmissibleSet;
pub use systems::{ExcitationSpec, LinearAffineSystem};
