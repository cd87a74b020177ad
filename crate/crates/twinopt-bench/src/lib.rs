//! Shared setup for the solver benchmarks.

use nalgebra::DVector;
use twinopt_core::scenario::fixtures;
use twinopt_core::{HamiltonianSpec, Scenario};

/// The mismatched bang-bang scenario at a bench-friendly resolution.
pub fn bang_bang_scenario(num_steps: usize) -> Scenario {
    fixtures::mismatched_scalar(num_steps, 1.0)
}

/// Plant-side Hamiltonian with a representative costate for pointwise
/// minimization benchmarks.
pub fn pointwise_setup(num_steps: usize) -> (HamiltonianSpec, DVector<f64>, DVector<f64>) {
    let scenario = bang_bang_scenario(num_steps);
    let spec = HamiltonianSpec::plant_for(&scenario).expect("valid fixture");
    let state = DVector::from_vec(vec![1.5]);
    let costate = DVector::from_vec(vec![42.0]);
    (spec, state, costate)
}
