use crate::error::{validation, Result};
use crate::grid::Trajectory;
use crate::scenario::Scenario;
use nalgebra::{DMatrix, DVector};

/// Quadratic running and terminal cost weights.
///
/// Running cost: `x'Qx + (1/2) u'Ru + d * sum(u)` (the excitation term only
/// when `linear_control_weight` is set). Terminal cost: `(1/2) x'Q_T x`.
///
/// `R` must be symmetric positive semidefinite. Strong convexity in the
/// control (`r_min > 0`) is required by the smooth minimizer path and is
/// checked there, so that purely nonsmooth `|u|`-type Hamiltonians with
/// `R = 0` remain constructible.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCostSpec {
    state_weight: DMatrix<f64>,
    control_weight: DMatrix<f64>,
    terminal_weight: DMatrix<f64>,
    linear_control_weight: bool,
    r_min: f64,
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(validation(format!(
            "{name} must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(validation(format!("{name} is not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(validation(format!("{name} contains non-finite entries")));
    }
    Ok(())
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

impl QuadraticCostSpec {
    pub fn new(
        state_weight: DMatrix<f64>,
        control_weight: DMatrix<f64>,
        terminal_weight: DMatrix<f64>,
        linear_control_weight: bool,
    ) -> Result<Self> {
        check_symmetric(&state_weight, "state weight Q")?;
        check_symmetric(&control_weight, "control weight R")?;
        check_symmetric(&terminal_weight, "terminal weight Q_T")?;
        if terminal_weight.nrows() != state_weight.nrows() {
            return Err(validation(format!(
                "terminal weight dimension {} does not match state weight dimension {}",
                terminal_weight.nrows(),
                state_weight.nrows()
            )));
        }
        let psd_tol = |m: &DMatrix<f64>| -1e-10 * (1.0 + m.amax());
        if min_eigenvalue(&state_weight) < psd_tol(&state_weight) {
            return Err(validation("state weight Q must be positive semidefinite"));
        }
        if min_eigenvalue(&terminal_weight) < psd_tol(&terminal_weight) {
            return Err(validation("terminal weight Q_T must be positive semidefinite"));
        }
        let r_min = min_eigenvalue(&control_weight);
        if r_min < psd_tol(&control_weight) {
            return Err(validation("control weight R must be positive semidefinite"));
        }
        Ok(QuadraticCostSpec {
            state_weight,
            control_weight,
            terminal_weight,
            linear_control_weight,
            r_min: r_min.max(0.0),
        })
    }

    /// Scalar weights `q`, `r`, `q_T`.
    pub fn scalar(q: f64, r: f64, q_terminal: f64, linear_control_weight: bool) -> Result<Self> {
        QuadraticCostSpec::new(
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
            DMatrix::from_element(1, 1, q_terminal),
            linear_control_weight,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.state_weight.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.control_weight.nrows()
    }

    /// Smallest eigenvalue of `R`; the strong-convexity modulus when positive.
    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn state_weight(&self) -> &DMatrix<f64> {
        &self.state_weight
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.control_weight
    }

    pub fn terminal_weight(&self) -> &DMatrix<f64> {
        &self.terminal_weight
    }

    pub fn linear_control_weight(&self) -> bool {
        self.linear_control_weight
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(validation(format!(
                "state dimension {} does not match cost dimension {}",
                x.len(),
                self.state_dim()
            )));
        }
        Ok(())
    }

    fn check_control(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.control_dim() {
            return Err(validation(format!(
                "control dimension {} does not match cost dimension {}",
                u.len(),
                self.control_dim()
            )));
        }
        Ok(())
    }

    /// Running cost in plant form: `x'Qx + (1/2) u'Ru [+ d * sum(u)]`.
    pub fn running(&self, x: &DVector<f64>, u: &DVector<f64>, d: f64) -> Result<f64> {
        self.check_state(x)?;
        self.check_control(u)?;
        let mut value = (&self.state_weight * x).dot(x) + 0.5 * (&self.control_weight * u).dot(u);
        if self.linear_control_weight {
            value += d * u.sum();
        }
        Ok(value)
    }

    /// Running cost in model form: plant form at the model state plus
    /// `beta(t) * ||x - x_hat||^2`.
    pub fn running_penalized(
        &self,
        penalty: &PenaltySchedule,
        t: f64,
        x: &DVector<f64>,
        x_hat: &DVector<f64>,
        u: &DVector<f64>,
        d: f64,
    ) -> Result<f64> {
        if x.len() != x_hat.len() {
            return Err(validation(format!(
                "model state dimension {} does not match plant state dimension {}",
                x.len(),
                x_hat.len()
            )));
        }
        let beta = penalty.evaluate(t)?;
        Ok(self.running(x, u, d)? + beta * (x - x_hat).norm_squared())
    }

    /// Terminal cost `(1/2) x'Q_T x`.
    pub fn terminal(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_state(x)?;
        Ok(0.5 * (&self.terminal_weight * x).dot(x))
    }
}

/// Time-varying weight on the model/plant state discrepancy.
#[derive(Clone, Debug, PartialEq)]
pub enum PenaltySchedule {
    Constant(f64),
    /// Nearest-node lookup in a scalar trajectory of nonnegative weights.
    Tabulated(Trajectory),
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule::Constant(1.0)
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            PenaltySchedule::Constant(beta) => {
                if !beta.is_finite() || *beta < 0.0 {
                    return Err(validation(format!(
                        "penalty weight must be finite and >= 0, got {beta}"
                    )));
                }
                Ok(())
            }
            PenaltySchedule::Tabulated(traj) => {
                if traj.dim() != 1 {
                    return Err(validation("tabulated penalty must be scalar"));
                }
                if let Some(k) = traj.values().iter().position(|v| v[0].is_nan() || v[0] < 0.0) {
                    return Err(validation(format!(
                        "penalty weight at node {k} is negative or non-finite"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        match self {
            PenaltySchedule::Constant(beta) => Ok(*beta),
            PenaltySchedule::Tabulated(traj) => {
                let k = traj.grid().nearest_node(t)?;
                Ok(traj.value(k)[0])
            }
        }
    }

    /// True when the schedule contributes nothing anywhere.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            PenaltySchedule::Constant(beta) => *beta == 0.0,
            PenaltySchedule::Tabulated(traj) => traj.values().iter().all(|v| v[0] == 0.0),
        }
    }
}

/// Which cost functional to evaluate along trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostKind {
    Plant,
    Model,
}

/// Trapezoidal quadrature of the running cost over the grid plus terminal
/// cost. `Model` adds the deviation penalty and requires `x_hat`.
pub fn total_cost(
    kind: CostKind,
    scenario: &Scenario,
    x: &Trajectory,
    u: &Trajectory,
    x_hat: Option<&Trajectory>,
) -> Result<f64> {
    if x.grid() != &scenario.grid || u.grid() != &scenario.grid {
        return Err(validation("trajectories must live on the scenario grid"));
    }
    if kind == CostKind::Model && x_hat.is_none() {
        return Err(validation("model-kind total cost requires the plant trajectory"));
    }
    if let Some(xh) = x_hat {
        x.same_layout(xh)?;
    }
    let grid = &scenario.grid;
    let h = grid.spacing();
    let n = grid.num_steps();
    let mut sum = 0.0;
    for k in 0..=n {
        let t = grid.node(k);
        let d = scenario.excitation.evaluate(t)?;
        let integrand = match kind {
            CostKind::Plant => scenario.cost.running(x.value(k), u.value(k), d)?,
            CostKind::Model => scenario.cost.running_penalized(
                &scenario.penalty,
                t,
                x.value(k),
                x_hat.unwrap().value(k),
                u.value(k),
                d,
            )?,
        };
        let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
        sum += weight * integrand;
    }
    Ok(h * sum + scenario.cost.terminal(x.value(n))?)
}
