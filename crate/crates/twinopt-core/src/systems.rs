use crate::error::{validation, Result};
use crate::grid::{TimeGrid, Trajectory};
use nalgebra::{DMatrix, DVector};

/// Affine-in-control linear dynamics `x' = A x + B u`.
///
/// Covers both the plant and the model; the two differ only in their matrix
/// entries.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearAffineSystem {
    drift: DMatrix<f64>,
    control: DMatrix<f64>,
}

impl LinearAffineSystem {
    pub fn new(drift: DMatrix<f64>, control: DMatrix<f64>) -> Result<Self> {
        if drift.nrows() != drift.ncols() || drift.nrows() == 0 {
            return Err(validation(format!(
                "drift matrix must be square and nonempty, got {}x{}",
                drift.nrows(),
                drift.ncols()
            )));
        }
        if control.nrows() != drift.nrows() || control.ncols() == 0 {
            return Err(validation(format!(
                "control matrix must have {} rows and at least one column, got {}x{}",
                drift.nrows(),
                control.nrows(),
                control.ncols()
            )));
        }
        Ok(LinearAffineSystem { drift, control })
    }

    /// Scalar system `x' = a x + b u`.
    pub fn scalar(a: f64, b: f64) -> Self {
        LinearAffineSystem {
            drift: DMatrix::from_element(1, 1, a),
            control: DMatrix::from_element(1, 1, b),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.control.ncols()
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    /// `A x + B u`.
    pub fn evaluate_dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() || u.len() != self.control_dim() {
            return Err(validation(format!(
                "dynamics expect state dim {} and control dim {}, got {} and {}",
                self.state_dim(),
                self.control_dim(),
                x.len(),
                u.len()
            )));
        }
        let mut out = DVector::zeros(self.state_dim());
        self.evaluate_into(x.as_slice(), u.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Gradient of the dynamics in the control: the constant matrix `B`.
    pub fn control_jacobian(&self) -> &DMatrix<f64> {
        &self.control
    }

    /// Allocation-free `A x + B u` for the integrator hot loop.
    #[inline]
    pub(crate) fn evaluate_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.state_dim();
        let m = self.control_dim();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.drift[(i, j)] * x[j];
            }
            for l in 0..m {
                s += self.control[(i, l)] * u[l];
            }
            out[i] = s;
        }
    }
}

/// Known exogenous excitation entering the running cost.
#[derive(Clone, Debug, PartialEq)]
pub enum ExcitationSpec {
    Zero,
    /// `amplitude * sign(sin(omega * t))`, with `sign(0) := 0` so the switch
    /// instants are deterministic.
    SquareWave { amplitude: f64, omega: f64 },
    /// Nearest-node lookup in a scalar trajectory.
    Tabulated(Trajectory),
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExcitationSpec::Zero => Ok(()),
            ExcitationSpec::SquareWave { amplitude, omega } => {
                if !amplitude.is_finite() || *amplitude < 0.0 {
                    return Err(validation(format!(
                        "square wave amplitude must be >= 0, got {amplitude}"
                    )));
                }
                if !omega.is_finite() || *omega <= 0.0 {
                    return Err(validation(format!(
                        "square wave angular frequency must be > 0, got {omega}"
                    )));
                }
                Ok(())
            }
            ExcitationSpec::Tabulated(traj) => {
                if traj.dim() != 1 {
                    return Err(validation(format!(
                        "tabulated excitation must be scalar, got dimension {}",
                        traj.dim()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        match self {
            ExcitationSpec::Zero => Ok(0.0),
            ExcitationSpec::SquareWave { amplitude, omega } => {
                let s = (omega * t).sin();
                Ok(if s > 0.0 {
                    *amplitude
                } else if s < 0.0 {
                    -*amplitude
                } else {
                    0.0
                })
            }
            ExcitationSpec::Tabulated(traj) => {
                let k = traj.grid().nearest_node(t)?;
                Ok(traj.value(k)[0])
            }
        }
    }

    /// Marks grid nodes that coincide with a sign change of the square wave
    /// (`t = k*pi/omega` strictly inside the horizon). The integrator uses
    /// this to keep control interpolation from straddling a switch.
    pub fn switch_mask(&self, grid: &TimeGrid) -> Vec<bool> {
        let mut mask = vec![false; grid.num_nodes()];
        if let ExcitationSpec::SquareWave { omega, .. } = self {
            let period = std::f64::consts::PI / omega;
            let tol = 1e-9 * grid.horizon().max(1.0);
            let mut j = 1usize;
            loop {
                let t_switch = j as f64 * period;
                if t_switch >= grid.horizon() - tol {
                    break;
                }
                if let Ok(k) = grid.nearest_node(t_switch) {
                    if (grid.node(k) - t_switch).abs() <= tol && k > 0 && k < grid.num_steps() {
                        mask[k] = true;
                    }
                }
                j += 1;
            }
        }
        mask
    }

    /// Nodes where the square wave evaluates to exactly zero under the
    /// `sign(0) := 0` convention. These are isolated, measure-zero instants;
    /// the equivalence report lists them separately instead of letting them
    /// dominate sup-norm comparisons.
    pub fn degenerate_nodes(&self, grid: &TimeGrid) -> Vec<usize> {
        match self {
            ExcitationSpec::SquareWave { omega, .. } => (0..grid.num_nodes())
                .filter(|&k| (omega * grid.node(k)).sin() == 0.0)
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(s: &[f64]) -> DVector<f64> {
        DVector::from_vec(s.to_vec())
    }

    #[test]
    fn dynamics_match_hand_arithmetic() {
        // plant drift alone: 0.3 * 1.5 = 0.45
        let plant = LinearAffineSystem::scalar(0.3, 1.3);
        let dx = plant.evaluate_dynamics(&v(&[1.5]), &v(&[0.0])).unwrap();
        assert!((dx[0] - 0.45).abs() < 1e-15);

        // model with control: -0.6 * 1.5 + 0.7 * 0.05 = -0.865
        let model = LinearAffineSystem::scalar(-0.6, 0.7);
        let dx = model.evaluate_dynamics(&v(&[1.5]), &v(&[0.05])).unwrap();
        assert!((dx[0] - (-0.865)).abs() < 1e-15);

        // zero in, zero out
        let dx = plant.evaluate_dynamics(&v(&[0.0]), &v(&[0.0])).unwrap();
        assert_eq!(dx[0], 0.0);
    }

    #[test]
    fn dynamics_reject_dimension_mismatch() {
        let sys = LinearAffineSystem::scalar(1.0, 1.0);
        assert!(sys.evaluate_dynamics(&v(&[1.0, 2.0]), &v(&[0.0])).is_err());
        assert!(sys.evaluate_dynamics(&v(&[1.0]), &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn control_jacobian_is_b() {
        let plant = LinearAffineSystem::scalar(0.3, 1.3);
        assert_eq!(plant.control_jacobian()[(0, 0)], 1.3);
        let model = LinearAffineSystem::scalar(-0.6, 0.7);
        assert_eq!(model.control_jacobian()[(0, 0)], 0.7);
        let zero = LinearAffineSystem::scalar(1.0, 0.0);
        assert_eq!(zero.control_jacobian()[(0, 0)], 0.0);
    }

    #[test]
    fn system_constructor_validates() {
        assert!(LinearAffineSystem::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1)).is_err());
        assert!(LinearAffineSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(1, 1)).is_err());
        assert!(LinearAffineSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 0)).is_err());
    }

    #[test]
    fn square_wave_examples() {
        let d = ExcitationSpec::SquareWave {
            amplitude: 200.0,
            omega: 2.0 * PI / 3.0,
        };
        assert_eq!(d.evaluate(0.75).unwrap(), 200.0); // sin(pi/2) = 1
        assert_eq!(d.evaluate(0.0).unwrap(), 0.0); // sign(0) convention
        assert_eq!(d.evaluate(2.25).unwrap(), -200.0); // sin(3pi/2) = -1
    }

    #[test]
    fn tabulated_excitation_looks_up_nearest_node() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let table = Trajectory::from_scalar_samples(grid, vec![1.0, 2.0, 3.0]).unwrap();
        let d = ExcitationSpec::Tabulated(table);
        assert_eq!(d.evaluate(0.0).unwrap(), 1.0);
        assert_eq!(d.evaluate(0.6).unwrap(), 2.0);
        assert_eq!(d.evaluate(1.0).unwrap(), 3.0);
        assert!(d.evaluate(1.5).is_err());
        assert!(d.evaluate(-0.5).is_err());
    }

    #[test]
    fn switch_mask_lands_on_interior_nodes() {
        let grid = TimeGrid::uniform(6.0, 8).unwrap();
        let d = ExcitationSpec::SquareWave {
            amplitude: 200.0,
            omega: 2.0 * PI / 3.0,
        };
        // switches at t = 1.5, 3.0, 4.5 -> nodes 2, 4, 6
        let mask = d.switch_mask(&grid);
        let marked: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
        assert_eq!(marked, vec![2, 4, 6]);
        // endpoints never marked
        assert!(!mask[0] && !mask[8]);
    }

    #[test]
    fn degenerate_nodes_only_where_sin_vanishes_exactly() {
        let grid = TimeGrid::uniform(6.0, 8).unwrap();
        let d = ExcitationSpec::SquareWave {
            amplitude: 200.0,
            omega: 2.0 * PI / 3.0,
        };
        // In floating point only t = 0 gives sin == 0 exactly.
        assert_eq!(d.degenerate_nodes(&grid), vec![0]);
        assert!(ExcitationSpec::Zero.degenerate_nodes(&grid).is_empty());
    }

    #[test]
    fn excitation_validation() {
        assert!(ExcitationSpec::SquareWave { amplitude: -1.0, omega: 1.0 }
            .validate()
            .is_err());
        assert!(ExcitationSpec::SquareWave { amplitude: 1.0, omega: 0.0 }
            .validate()
            .is_err());
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let vecsig = Trajectory::zeros(grid, 2).unwrap();
        assert!(ExcitationSpec::Tabulated(vecsig).validate().is_err());
    }

    proptest! {
        // Linearity of the dynamics map, relative tolerance 1e-12.
        #[test]
        fn dynamics_are_linear(
            a in -5.0..5.0f64, b in -5.0..5.0f64,
            x1 in -100.0..100.0f64, x2 in -100.0..100.0f64,
            u1 in -100.0..100.0f64, u2 in -100.0..100.0f64,
            alpha in -10.0..10.0f64,
        ) {
            let sys = LinearAffineSystem::scalar(a, b);
            let lhs = sys
                .evaluate_dynamics(&v(&[alpha * x1 + x2]), &v(&[alpha * u1 + u2]))
                .unwrap()[0];
            let f1 = sys.evaluate_dynamics(&v(&[x1]), &v(&[u1])).unwrap()[0];
            let f2 = sys.evaluate_dynamics(&v(&[x2]), &v(&[u2])).unwrap()[0];
            let rhs = alpha * f1 + f2;
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        // Square-wave values stay in {-amp, 0, +amp}; 0 only when sin is exactly 0.
        #[test]
        fn square_wave_range(amp in 0.0..500.0f64, omega in 0.01..50.0f64, t in 0.0..100.0f64) {
            let d = ExcitationSpec::SquareWave { amplitude: amp, omega };
            let val = d.evaluate(t).unwrap();
            prop_assert!(val == amp || val == -amp || val == 0.0);
            if val == 0.0 && amp > 0.0 {
                prop_assert_eq!((omega * t).sin(), 0.0);
            }
        }
    }
}
