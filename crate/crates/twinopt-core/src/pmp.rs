//! Fixed-step RK4 integration of the state and costate equations, and the
//! damped forward-backward sweeps that solve the plant-optimal and the
//! penalized model-based problems.
//!
//! One sweep iteration: integrate the state forward under the current
//! control, integrate the costate backward from the terminal-cost gradient,
//! minimize the Hamiltonian pointwise at every node, then blend
//! `theta * minimizer + (1 - theta) * old` and repeat until the control stops
//! moving in sup norm.

use crate::costs::{total_cost, CostKind, PenaltySchedule, QuadraticCostSpec};
use crate::error::{validation, Error, Result};
use crate::grid::{trajectory_sup_distance, Trajectory};
use crate::hamiltonian::HamiltonianSpec;
use crate::scenario::Scenario;
use crate::systems::LinearAffineSystem;
use nalgebra::DVector;

/// Knobs of the forward-backward sweep. The integrator is fixed-step RK4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSettings {
    pub max_iterations: usize,
    /// Control update blend factor in (0, 1].
    pub damping: f64,
    /// Sup-norm control change below which the sweep is converged.
    pub convergence_tol: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            max_iterations: 500,
            damping: 0.5,
            convergence_tol: 1e-10,
        }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(validation("sweep needs at least one iteration"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(validation(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return Err(validation("convergence tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// Converged (or honestly not converged) sweep output.
#[derive(Clone, Debug)]
pub struct PmpSolution {
    pub control: Trajectory,
    pub state: Trajectory,
    pub costate: Trajectory,
    /// Pointwise minimizers ignoring the control set, at the final costate.
    pub unconstrained_control: Trajectory,
    pub converged: bool,
    pub iterations: usize,
    pub final_update_norm: f64,
    pub total_cost: f64,
    /// Cost of each sweep iterate, for convergence diagnostics.
    pub cost_history: Vec<f64>,
}

/// Outcome of the plant/model fixed-point iteration.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub solution: PmpSolution,
    /// Plant trajectory under the model-derived control.
    pub plant_trajectory: Trajectory,
    pub outer_iterations: usize,
}

#[inline]
fn write_stage(stage: &mut [f64], base: &[f64], scale: f64, dir: &[f64]) {
    for i in 0..stage.len() {
        stage[i] = base[i] + scale * dir[i];
    }
}

struct ForwardBuffers {
    k1: DVector<f64>,
    k2: DVector<f64>,
    k3: DVector<f64>,
    k4: DVector<f64>,
    stage: DVector<f64>,
    u_mid: DVector<f64>,
}

impl ForwardBuffers {
    fn new(n: usize, m: usize) -> Self {
        ForwardBuffers {
            k1: DVector::zeros(n),
            k2: DVector::zeros(n),
            k3: DVector::zeros(n),
            k4: DVector::zeros(n),
            stage: DVector::zeros(n),
            u_mid: DVector::zeros(m),
        }
    }
}

/// One forward pass; `out` must hold `num_nodes` state vectors and `out[0]`
/// is overwritten with `x0`.
fn forward_into(
    sys: &LinearAffineSystem,
    h: f64,
    u: &[DVector<f64>],
    x0: &DVector<f64>,
    switch_mask: Option<&[bool]>,
    buf: &mut ForwardBuffers,
    out: &mut [DVector<f64>],
) {
    out[0].copy_from(x0);
    let steps = u.len() - 1;
    for k in 0..steps {
        // Control values at the three stage times. Interpolation is linear
        // except across an excitation switch node, where the value from the
        // step's own side is held constant so bang-bang structure survives.
        let at_switch_left = switch_mask.is_some_and(|m| m[k]);
        let at_switch_right = switch_mask.is_some_and(|m| m[k + 1]);
        let (u_left, u_right): (&DVector<f64>, &DVector<f64>) = if at_switch_left {
            (&u[k + 1], &u[k + 1])
        } else if at_switch_right {
            (&u[k], &u[k])
        } else {
            (&u[k], &u[k + 1])
        };
        for i in 0..buf.u_mid.len() {
            buf.u_mid[i] = 0.5 * (u_left[i] + u_right[i]);
        }

        let (xk, rest) = out.split_at_mut(k + 1);
        let xk = &xk[k];
        let x_next = &mut rest[0];

        sys.evaluate_into(xk.as_slice(), u_left.as_slice(), buf.k1.as_mut_slice());
        write_stage(buf.stage.as_mut_slice(), xk.as_slice(), 0.5 * h, buf.k1.as_slice());
        sys.evaluate_into(buf.stage.as_slice(), buf.u_mid.as_slice(), buf.k2.as_mut_slice());
        write_stage(buf.stage.as_mut_slice(), xk.as_slice(), 0.5 * h, buf.k2.as_slice());
        sys.evaluate_into(buf.stage.as_slice(), buf.u_mid.as_slice(), buf.k3.as_mut_slice());
        write_stage(buf.stage.as_mut_slice(), xk.as_slice(), h, buf.k3.as_slice());
        sys.evaluate_into(buf.stage.as_slice(), u_right.as_slice(), buf.k4.as_mut_slice());

        for i in 0..xk.len() {
            x_next[i] = xk[i]
                + h / 6.0 * (buf.k1[i] + 2.0 * buf.k2[i] + 2.0 * buf.k3[i] + buf.k4[i]);
        }
    }
}

/// `-2Qx - 2 beta (x - x_hat) - A' lambda`.
#[inline]
fn costate_rhs(
    sys: &LinearAffineSystem,
    cost: &QuadraticCostSpec,
    lambda: &[f64],
    x: &[f64],
    x_hat: Option<&[f64]>,
    two_beta: f64,
    out: &mut [f64],
) {
    let a = sys.drift();
    let q = cost.state_weight();
    let n = x.len();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s -= 2.0 * q[(i, j)] * x[j];
            s -= a[(j, i)] * lambda[j];
        }
        if let Some(xh) = x_hat {
            s -= two_beta * (x[i] - xh[i]);
        }
        out[i] = s;
    }
}

struct BackwardBuffers {
    k1: DVector<f64>,
    k2: DVector<f64>,
    k3: DVector<f64>,
    k4: DVector<f64>,
    stage: DVector<f64>,
    x_mid: DVector<f64>,
    xh_mid: DVector<f64>,
}

impl BackwardBuffers {
    fn new(n: usize) -> Self {
        BackwardBuffers {
            k1: DVector::zeros(n),
            k2: DVector::zeros(n),
            k3: DVector::zeros(n),
            k4: DVector::zeros(n),
            stage: DVector::zeros(n),
            x_mid: DVector::zeros(n),
            xh_mid: DVector::zeros(n),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_into(
    sys: &LinearAffineSystem,
    cost: &QuadraticCostSpec,
    penalty: Option<&PenaltySchedule>,
    grid_nodes: &[f64],
    h: f64,
    x: &[DVector<f64>],
    x_hat: Option<&[DVector<f64>]>,
    buf: &mut BackwardBuffers,
    out: &mut [DVector<f64>],
) -> Result<()> {
    let n_nodes = x.len();
    // terminal condition lambda(T) = Q_T x(T), exact by construction
    let terminal = cost.terminal_weight() * &x[n_nodes - 1];
    out[n_nodes - 1].copy_from(&terminal);

    for k in (1..n_nodes).rev() {
        let t_hi = grid_nodes[k];
        let t_lo = grid_nodes[k - 1];
        let t_mid = 0.5 * (t_hi + t_lo);
        let (b_hi, b_mid, b_lo) = match penalty {
            Some(p) => (
                2.0 * p.evaluate(t_hi)?,
                2.0 * p.evaluate(t_mid)?,
                2.0 * p.evaluate(t_lo)?,
            ),
            None => (0.0, 0.0, 0.0),
        };
        for i in 0..buf.x_mid.len() {
            buf.x_mid[i] = 0.5 * (x[k][i] + x[k - 1][i]);
        }
        let (xh_hi, xh_mid, xh_lo) = match x_hat {
            Some(xh) => {
                for i in 0..buf.xh_mid.len() {
                    buf.xh_mid[i] = 0.5 * (xh[k][i] + xh[k - 1][i]);
                }
                (
                    Some(xh[k].as_slice()),
                    Some(buf.xh_mid.as_slice()),
                    Some(xh[k - 1].as_slice()),
                )
            }
            None => (None, None, None),
        };

        let (head, tail) = out.split_at_mut(k);
        let lam_k = &tail[0];
        let lam_prev = &mut head[k - 1];

        costate_rhs(sys, cost, lam_k.as_slice(), x[k].as_slice(), xh_hi, b_hi, buf.k1.as_mut_slice());
        write_stage(buf.stage.as_mut_slice(), lam_k.as_slice(), -0.5 * h, buf.k1.as_slice());
        costate_rhs(sys, cost, buf.stage.as_slice(), buf.x_mid.as_slice(), xh_mid, b_mid, buf.k2.as_mut_slice());
        write_stage(buf.stage.as_mut_slice(), lam_k.as_slice(), -0.5 * h, buf.k2.as_slice());
        costate_rhs(sys, cost, buf.stage.as_slice(), buf.x_mid.as_slice(), xh_mid, b_mid, buf.k3.as_mut_slice());
        write_stage(buf.stage.as_mut_slice(), lam_k.as_slice(), -h, buf.k3.as_slice());
        costate_rhs(sys, cost, buf.stage.as_slice(), x[k - 1].as_slice(), xh_lo, b_lo, buf.k4.as_mut_slice());

        for i in 0..lam_prev.len() {
            lam_prev[i] = lam_k[i]
                - h / 6.0 * (buf.k1[i] + 2.0 * buf.k2[i] + 2.0 * buf.k3[i] + buf.k4[i]);
        }
    }
    Ok(())
}

/// Classical RK4 under a node-sampled control, linearly interpolated between
/// nodes except across excitation switch nodes (see `switch_mask`).
pub fn integrate_state_forward(
    sys: &LinearAffineSystem,
    u: &Trajectory,
    x0: &DVector<f64>,
    switch_mask: Option<&[bool]>,
) -> Result<Trajectory> {
    if u.dim() != sys.control_dim() {
        return Err(validation(format!(
            "control trajectory dimension {} does not match system control dimension {}",
            u.dim(),
            sys.control_dim()
        )));
    }
    if x0.len() != sys.state_dim() {
        return Err(validation(format!(
            "initial state dimension {} does not match system state dimension {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    if let Some(mask) = switch_mask {
        if mask.len() != u.len() {
            return Err(validation("switch mask length does not match the grid"));
        }
    }
    let mut out = vec![DVector::zeros(sys.state_dim()); u.len()];
    let mut buf = ForwardBuffers::new(sys.state_dim(), sys.control_dim());
    forward_into(sys, u.grid().spacing(), u.values(), x0, switch_mask, &mut buf, &mut out);
    Trajectory::new(u.grid().clone(), out)
}

/// Backward RK4 for the costate from the terminal condition
/// `lambda(T) = Q_T x(T)`; the deviation penalty contributes
/// `-2 beta(t) (x - x_hat)` when present.
pub fn integrate_costate_backward(
    sys: &LinearAffineSystem,
    cost: &QuadraticCostSpec,
    penalty: Option<&PenaltySchedule>,
    x: &Trajectory,
    x_hat: Option<&Trajectory>,
) -> Result<Trajectory> {
    if x.dim() != sys.state_dim() || cost.state_dim() != sys.state_dim() {
        return Err(validation("state trajectory/cost dimensions do not match the system"));
    }
    match (penalty, x_hat) {
        (Some(_), None) => {
            return Err(validation(
                "costate with a deviation penalty needs the observed plant trajectory",
            ))
        }
        (None, Some(_)) => {
            return Err(validation("plant trajectory supplied without a penalty"))
        }
        (Some(_), Some(xh)) => x.same_layout(xh)?,
        (None, None) => {}
    }
    let mut out = vec![DVector::zeros(sys.state_dim()); x.len()];
    let mut buf = BackwardBuffers::new(sys.state_dim());
    backward_into(
        sys,
        cost,
        penalty,
        x.grid().nodes(),
        x.grid().spacing(),
        x.values(),
        x_hat.map(|t| t.values()),
        &mut buf,
        &mut out,
    )?;
    Trajectory::new(x.grid().clone(), out)
}

fn raw_running_cost(cost: &QuadraticCostSpec, x: &[f64], u: &[f64], d: f64) -> f64 {
    let q = cost.state_weight();
    let r = cost.control_weight();
    let mut vq = 0.0;
    for i in 0..x.len() {
        let mut row = 0.0;
        for j in 0..x.len() {
            row += q[(i, j)] * x[j];
        }
        vq += x[i] * row;
    }
    let mut vr = 0.0;
    for i in 0..u.len() {
        let mut row = 0.0;
        for j in 0..u.len() {
            row += r[(i, j)] * u[j];
        }
        vr += u[i] * row;
    }
    let mut v = vq + 0.5 * vr;
    if cost.linear_control_weight() {
        v += d * u.iter().sum::<f64>();
    }
    v
}

struct SweepProblem<'a> {
    scenario: &'a Scenario,
    system: &'a LinearAffineSystem,
    hspec: HamiltonianSpec,
    penalty: Option<&'a PenaltySchedule>,
    x_hat: Option<&'a Trajectory>,
    kind: CostKind,
}

fn run_sweep(problem: &SweepProblem, settings: &SweepSettings) -> Result<PmpSolution> {
    settings.validate()?;
    let scenario = problem.scenario;
    let grid = &scenario.grid;
    let n_nodes = grid.num_nodes();
    let h = grid.spacing();
    let state_dim = problem.system.state_dim();
    let control_dim = problem.system.control_dim();

    let switch_mask = scenario.excitation.switch_mask(grid);
    let d_nodes: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&t| scenario.excitation.evaluate(t))
        .collect::<Result<_>>()?;

    if !scenario.control_set.is_bounded() {
        // unbounded sets are admissible only when the Hamiltonian provably
        // grows along every control ray; scale the probe radii past the
        // vertex of the quadratic so a coercive instance is not missed
        let probe_t = grid.node(1);
        let probe_lambda = scenario.cost.terminal_weight() * &scenario.initial_state;
        let probe_xh = problem.x_hat.map(|t| t.value(1).clone());
        let mut dirs = Vec::with_capacity(2 * control_dim);
        for i in 0..control_dim {
            let mut e = DVector::zeros(control_dim);
            e[i] = 1.0;
            dirs.push(e.clone());
            dirs.push(-e);
        }
        let d_max = d_nodes.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        let slope_scale = d_max + problem.system.control_jacobian().amax() * probe_lambda.amax();
        let r_min = scenario.cost.r_min();
        let scale = if r_min > 0.0 {
            1.0 + slope_scale / r_min
        } else {
            1.0
        };
        let radii = [scale, 10.0 * scale, 100.0 * scale, 1000.0 * scale];
        let coercive = problem.hspec.coercivity_probe(
            probe_t,
            &scenario.initial_state,
            probe_xh.as_ref(),
            &probe_lambda,
            &dirs,
            &radii,
        )?;
        if !coercive {
            return Err(validation(
                "control set is unbounded and the Hamiltonian fails the coercivity probe",
            ));
        }
    }

    let u_init = scenario.control_set.project(&DVector::zeros(control_dim));
    let mut u: Vec<DVector<f64>> = vec![u_init; n_nodes];
    let mut x_vals = vec![DVector::zeros(state_dim); n_nodes];
    let mut lam_vals = vec![DVector::zeros(state_dim); n_nodes];
    let mut u_min = vec![DVector::zeros(control_dim); n_nodes];
    let mut u_unc = vec![DVector::zeros(control_dim); n_nodes];
    let mut fwd_buf = ForwardBuffers::new(state_dim, control_dim);
    let mut bwd_buf = BackwardBuffers::new(state_dim);

    let x_hat_vals = problem.x_hat.map(|t| t.values());
    let penalty_terms: Option<Vec<f64>> = match (problem.penalty, x_hat_vals) {
        (Some(p), Some(_)) => Some(
            grid.nodes()
                .iter()
                .map(|&t| p.evaluate(t))
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };

    let mut update_history: Vec<f64> = Vec::new();
    let mut cost_history: Vec<f64> = Vec::new();
    let mut converged = false;
    let theta = settings.damping;

    for _iter in 0..settings.max_iterations {
        forward_into(
            problem.system,
            h,
            &u,
            &scenario.initial_state,
            Some(&switch_mask),
            &mut fwd_buf,
            &mut x_vals,
        );
        backward_into(
            problem.system,
            &scenario.cost,
            problem.penalty,
            grid.nodes(),
            h,
            &x_vals,
            x_hat_vals,
            &mut bwd_buf,
            &mut lam_vals,
        )?;

        // iterate cost, trapezoidal, before the control update
        let mut acc = 0.0;
        for k in 0..n_nodes {
            let mut run =
                raw_running_cost(&scenario.cost, x_vals[k].as_slice(), u[k].as_slice(), d_nodes[k]);
            if let (Some(betas), Some(xh)) = (&penalty_terms, x_hat_vals) {
                let mut dev = 0.0;
                for i in 0..state_dim {
                    let diff = x_vals[k][i] - xh[k][i];
                    dev += diff * diff;
                }
                run += betas[k] * dev;
            }
            let w = if k == 0 || k == n_nodes - 1 { 0.5 } else { 1.0 };
            acc += w * run;
        }
        let terminal = {
            let qt = scenario.cost.terminal_weight();
            let xt = &x_vals[n_nodes - 1];
            let mut v = 0.0;
            for i in 0..state_dim {
                let mut row = 0.0;
                for j in 0..state_dim {
                    row += qt[(i, j)] * xt[j];
                }
                v += xt[i] * row;
            }
            0.5 * v
        };
        cost_history.push(h * acc + terminal);

        for k in 0..n_nodes {
            problem
                .hspec
                .solve_pointwise(d_nodes[k], &lam_vals[k], &mut u_unc[k], &mut u_min[k])?;
        }

        let mut update_norm: f64 = 0.0;
        for k in 0..n_nodes {
            let mut diff_sq = 0.0;
            for i in 0..control_dim {
                let new = theta * u_min[k][i] + (1.0 - theta) * u[k][i];
                let delta = new - u[k][i];
                diff_sq += delta * delta;
                u[k][i] = new;
            }
            update_norm = update_norm.max(diff_sq.sqrt());
        }
        update_history.push(update_norm);

        let it = update_history.len();
        if it > 50 {
            let earlier = update_history[it - 51];
            if update_norm > 10.0 * earlier && update_norm > 1e-9 {
                return Err(Error::SweepDiverged {
                    iterations: it,
                    from: earlier,
                    to: update_norm,
                });
            }
        }
        if update_norm <= settings.convergence_tol {
            converged = true;
            break;
        }
    }

    // final trajectories consistent with the returned control
    forward_into(
        problem.system,
        h,
        &u,
        &scenario.initial_state,
        Some(&switch_mask),
        &mut fwd_buf,
        &mut x_vals,
    );
    backward_into(
        problem.system,
        &scenario.cost,
        problem.penalty,
        grid.nodes(),
        h,
        &x_vals,
        x_hat_vals,
        &mut bwd_buf,
        &mut lam_vals,
    )?;
    for k in 0..n_nodes {
        problem
            .hspec
            .solve_pointwise(d_nodes[k], &lam_vals[k], &mut u_unc[k], &mut u_min[k])?;
    }

    let control = Trajectory::new(grid.clone(), u)?;
    let state = Trajectory::new(grid.clone(), x_vals)?;
    let costate = Trajectory::new(grid.clone(), lam_vals)?;
    let unconstrained_control = Trajectory::new(grid.clone(), u_unc)?;
    let total = total_cost(problem.kind, scenario, &state, &control, problem.x_hat)?;

    Ok(PmpSolution {
        control,
        state,
        costate,
        unconstrained_control,
        converged,
        iterations: update_history.len(),
        final_update_norm: update_history.last().copied().unwrap_or(0.0),
        total_cost: total,
        cost_history,
    })
}

/// Solves the plant-optimal problem by forward-backward sweeps.
pub fn solve_plant(scenario: &Scenario, settings: &SweepSettings) -> Result<PmpSolution> {
    let hspec = HamiltonianSpec::plant_for(scenario)?;
    run_sweep(
        &SweepProblem {
            scenario,
            system: &scenario.plant,
            hspec,
            penalty: None,
            x_hat: None,
            kind: CostKind::Plant,
        },
        settings,
    )
}

/// Solves the penalized model-based problem against an observed plant
/// trajectory, which enters the costate through the deviation penalty but
/// never the pointwise minimization.
pub fn solve_model(
    scenario: &Scenario,
    plant_trajectory: &Trajectory,
    settings: &SweepSettings,
) -> Result<PmpSolution> {
    if plant_trajectory.grid() != &scenario.grid {
        return Err(validation("plant trajectory must live on the scenario grid"));
    }
    if plant_trajectory.dim() != scenario.model.state_dim() {
        return Err(validation(format!(
            "plant trajectory dimension {} does not match state dimension {}",
            plant_trajectory.dim(),
            scenario.model.state_dim()
        )));
    }
    let hspec = HamiltonianSpec::model_for(scenario)?;
    run_sweep(
        &SweepProblem {
            scenario,
            system: &scenario.model,
            hspec,
            penalty: Some(&scenario.penalty),
            x_hat: Some(plant_trajectory),
            kind: CostKind::Model,
        },
        settings,
    )
}

/// Runs plant and model together: solve the model problem against the current
/// plant trajectory, re-simulate the plant under the resulting control,
/// repeat until the plant trajectory stops changing.
///
/// A penalty that is identically zero decouples the model problem from the
/// plant feed, so a single outer pass is exact.
pub fn closed_loop_coupled_run(scenario: &Scenario, settings: &SweepSettings) -> Result<CoupledRun> {
    settings.validate()?;
    let switch_mask = scenario.excitation.switch_mask(&scenario.grid);
    let u_init = scenario
        .control_set
        .project(&DVector::zeros(scenario.plant.control_dim()));
    let idle = Trajectory::constant(scenario.grid.clone(), u_init)?;
    let mut plant_traj =
        integrate_state_forward(&scenario.plant, &idle, &scenario.initial_state, Some(&switch_mask))?;

    if scenario.penalty.is_identically_zero() {
        let solution = solve_model(scenario, &plant_traj, settings)?;
        let plant_trajectory = integrate_state_forward(
            &scenario.plant,
            &solution.control,
            &scenario.initial_state,
            Some(&switch_mask),
        )?;
        return Ok(CoupledRun {
            solution,
            plant_trajectory,
            outer_iterations: 1,
        });
    }

    const MAX_OUTER: usize = 50;
    let mut previous_change = f64::INFINITY;
    let mut last_change = f64::INFINITY;
    for outer in 1..=MAX_OUTER {
        let solution = solve_model(scenario, &plant_traj, settings)?;
        let resimulated = integrate_state_forward(
            &scenario.plant,
            &solution.control,
            &scenario.initial_state,
            Some(&switch_mask),
        )?;
        let change = trajectory_sup_distance(&resimulated, &plant_traj)?;
        previous_change = last_change;
        last_change = change;
        plant_traj = resimulated;
        if change <= settings.convergence_tol {
            return Ok(CoupledRun {
                solution,
                plant_trajectory: plant_traj,
                outer_iterations: outer,
            });
        }
    }
    Err(Error::OuterLoopStalled {
        iterations: MAX_OUTER,
        previous_change,
        last_change,
    })
}
