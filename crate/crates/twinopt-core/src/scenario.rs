use crate::costs::{PenaltySchedule, QuadraticCostSpec};
use crate::error::{validation, Result};
use crate::grid::TimeGrid;
use crate::sets::AdmissibleSet;
use crate::systems::{ExcitationSpec, LinearAffineSystem};
use nalgebra::DVector;

/// Everything needed to pose the plant-optimal and the penalized model-based
/// problems: both dynamics, the shared cost, the deviation penalty, the
/// exogenous excitation, the control set, the grid, and the common initial
/// state.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub plant: LinearAffineSystem,
    pub model: LinearAffineSystem,
    pub cost: QuadraticCostSpec,
    pub penalty: PenaltySchedule,
    pub excitation: ExcitationSpec,
    pub control_set: AdmissibleSet,
    pub grid: TimeGrid,
    pub initial_state: DVector<f64>,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        plant: LinearAffineSystem,
        model: LinearAffineSystem,
        cost: QuadraticCostSpec,
        penalty: PenaltySchedule,
        excitation: ExcitationSpec,
        control_set: AdmissibleSet,
        grid: TimeGrid,
        initial_state: DVector<f64>,
    ) -> Result<Self> {
        if plant.state_dim() != model.state_dim() {
            return Err(validation(format!(
                "plant state dimension {} does not match model state dimension {}",
                plant.state_dim(),
                model.state_dim()
            )));
        }
        if plant.control_dim() != model.control_dim() {
            return Err(validation(format!(
                "plant control dimension {} does not match model control dimension {}",
                plant.control_dim(),
                model.control_dim()
            )));
        }
        if initial_state.len() != plant.state_dim() {
            return Err(validation(format!(
                "initial state dimension {} does not match state dimension {}",
                initial_state.len(),
                plant.state_dim()
            )));
        }
        if cost.state_dim() != plant.state_dim() {
            return Err(validation(format!(
                "cost state dimension {} does not match system state dimension {}",
                cost.state_dim(),
                plant.state_dim()
            )));
        }
        if cost.control_dim() != plant.control_dim() {
            return Err(validation(format!(
                "cost control dimension {} does not match system control dimension {}",
                cost.control_dim(),
                plant.control_dim()
            )));
        }
        if control_set.dimension() != plant.control_dim() {
            return Err(validation(format!(
                "control set dimension {} does not match control dimension {}",
                control_set.dimension(),
                plant.control_dim()
            )));
        }
        penalty.validate()?;
        excitation.validate()?;
        Ok(Scenario {
            plant,
            model,
            cost,
            penalty,
            excitation,
            control_set,
            grid,
            initial_state,
        })
    }
}

/// Ready-made scenarios used by the command-line examples, the acceptance
/// suite, and the benchmarks.
pub mod fixtures {
    use super::*;

    /// Scalar plant/model pair where both the drift and the control
    /// effectiveness differ, driven by a strong square wave against tight
    /// symmetric control bounds. The bounds dominate the pointwise
    /// minimization, so both problems produce the same bang-bang control even
    /// though their Hamiltonian gradients disagree everywhere.
    pub fn mismatched_scalar(num_steps: usize, beta: f64) -> Scenario {
        let horizon = 6.0;
        Scenario::new(
            LinearAffineSystem::scalar(0.3, 1.3),
            LinearAffineSystem::scalar(-0.6, 0.7),
            QuadraticCostSpec::scalar(0.5, 0.2, 2.0, true).expect("valid weights"),
            PenaltySchedule::Constant(beta),
            ExcitationSpec::SquareWave {
                amplitude: 200.0,
                omega: 4.0 * std::f64::consts::PI / horizon,
            },
            AdmissibleSet::interval(-0.05, 0.05).expect("valid interval"),
            TimeGrid::uniform(horizon, num_steps).expect("valid grid"),
            DVector::from_vec(vec![1.5]),
        )
        .expect("fixture is internally consistent")
    }

    /// Matched scalar dynamics with an unbounded control set and a moderate
    /// square wave. Strong convexity keeps the pointwise minimizers unique
    /// and interior, and with matching dynamics the two problems coincide.
    pub fn unbounded_matched(num_steps: usize) -> Scenario {
        let horizon = 2.0;
        Scenario::new(
            LinearAffineSystem::scalar(0.3, 1.3),
            LinearAffineSystem::scalar(0.3, 1.3),
            QuadraticCostSpec::scalar(0.5, 0.2, 2.0, true).expect("valid weights"),
            PenaltySchedule::Constant(0.0),
            ExcitationSpec::SquareWave {
                amplitude: 2.0,
                omega: 4.0 * std::f64::consts::PI / horizon,
            },
            AdmissibleSet::unbounded(1).expect("valid set"),
            TimeGrid::uniform(horizon, num_steps).expect("valid grid"),
            DVector::from_vec(vec![1.5]),
        )
        .expect("fixture is internally consistent")
    }
}
