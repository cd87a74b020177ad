//! Hamiltonian evaluation, control subdifferentials, normal cones, and the
//! pointwise constrained minimization that drives both sweep solvers.
//!
//! Two routes to the minimizer are kept deliberately independent: the
//! projection/soft-threshold form used by the solvers, and
//! [`HamiltonianSpec::brute_force_argmin`], a dense grid search over the
//! control set that the tests use as an oracle.

use crate::costs::{PenaltySchedule, QuadraticCostSpec};
use crate::error::{validation, Error, Result};
use crate::scenario::Scenario;
use crate::sets::AdmissibleSet;
use crate::systems::{ExcitationSpec, LinearAffineSystem};
use nalgebra::DVector;

/// Componentwise closed interval of subgradient values. Equal endpoints
/// denote an ordinary gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdifferentialInterval {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl SubdifferentialInterval {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(validation("subdifferential endpoints need equal nonzero dimensions"));
        }
        for i in 0..lo.len() {
            if lo[i].is_nan() || hi[i].is_nan() || lo[i] > hi[i] {
                return Err(validation(format!(
                    "subdifferential component {i} has lo {} > hi {}",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(SubdifferentialInterval { lo, hi })
    }

    pub fn singleton(g: DVector<f64>) -> Self {
        SubdifferentialInterval { lo: g.clone(), hi: g }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn component(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn is_singleton(&self, tol: f64) -> bool {
        (0..self.dim()).all(|i| self.hi[i] - self.lo[i] <= tol)
    }

    /// Endpointwise comparison within an absolute tolerance.
    pub fn matches(&self, other: &SubdifferentialInterval, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                (self.lo[i] - other.lo[i]).abs() <= tol && (self.hi[i] - other.hi[i]).abs() <= tol
            })
    }

    /// Largest endpoint deviation from `other` over all components.
    pub fn endpoint_distance(&self, other: &SubdifferentialInterval) -> f64 {
        (0..self.dim())
            .map(|i| (self.lo[i] - other.lo[i]).abs().max((self.hi[i] - other.hi[i]).abs()))
            .fold(0.0, f64::max)
    }

    pub fn contains_zero(&self) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= 0.0 && 0.0 <= self.hi[i])
    }
}

/// How each control component relates to its bounds after projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaturationFlag {
    /// Unconstrained minimizer at or below the lower bound.
    Lo,
    Interior,
    /// Unconstrained minimizer at or beyond the upper bound.
    Hi,
}

/// Result of one pointwise constrained Hamiltonian minimization.
#[derive(Clone, Debug)]
pub struct ControlDecision {
    pub minimizer: DVector<f64>,
    /// Minimizer ignoring the control set. Infinite components signal a
    /// piecewise-linear objective running off to the horizon on that side.
    pub unconstrained_minimizer: DVector<f64>,
    pub saturated: Vec<SaturationFlag>,
    pub unique: bool,
    pub hamiltonian_value: f64,
}

/// Output of the dense grid oracle: every grid point whose value lies within
/// `1e-9 * (1 + |min|)` of the minimum, with its flat (row-major) grid index.
#[derive(Clone, Debug)]
pub struct BruteForceArgmin {
    pub points: Vec<DVector<f64>>,
    pub flat_indices: Vec<usize>,
    pub min_value: f64,
}

const ORACLE_REL_TOL: f64 = 1e-9;

/// Bundles everything defining one pointwise Hamiltonian: dynamics, cost,
/// optional deviation penalty (model side only), excitation, control set,
/// and the weight of an optional nonsmooth `|u|` term.
#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    system: LinearAffineSystem,
    cost: QuadraticCostSpec,
    penalty: Option<PenaltySchedule>,
    excitation: ExcitationSpec,
    control_set: AdmissibleSet,
    abs_weight: f64,
}

impl HamiltonianSpec {
    pub fn new(
        system: LinearAffineSystem,
        cost: QuadraticCostSpec,
        penalty: Option<PenaltySchedule>,
        excitation: ExcitationSpec,
        control_set: AdmissibleSet,
        abs_weight: f64,
    ) -> Result<Self> {
        if cost.state_dim() != system.state_dim() || cost.control_dim() != system.control_dim() {
            return Err(validation(format!(
                "cost dimensions ({}, {}) do not match system dimensions ({}, {})",
                cost.state_dim(),
                cost.control_dim(),
                system.state_dim(),
                system.control_dim()
            )));
        }
        if control_set.dimension() != system.control_dim() {
            return Err(validation(format!(
                "control set dimension {} does not match control dimension {}",
                control_set.dimension(),
                system.control_dim()
            )));
        }
        if !abs_weight.is_finite() || abs_weight < 0.0 {
            return Err(validation(format!(
                "nonsmooth |u| weight must be finite and >= 0, got {abs_weight}"
            )));
        }
        if let Some(p) = &penalty {
            p.validate()?;
        }
        excitation.validate()?;
        Ok(HamiltonianSpec {
            system,
            cost,
            penalty,
            excitation,
            control_set,
            abs_weight,
        })
    }

    /// Plant-side Hamiltonian of a scenario (no penalty term).
    pub fn plant_for(scenario: &Scenario) -> Result<Self> {
        HamiltonianSpec::new(
            scenario.plant.clone(),
            scenario.cost.clone(),
            None,
            scenario.excitation.clone(),
            scenario.control_set.clone(),
            0.0,
        )
    }

    /// Model-side Hamiltonian of a scenario (carries the deviation penalty).
    pub fn model_for(scenario: &Scenario) -> Result<Self> {
        HamiltonianSpec::new(
            scenario.model.clone(),
            scenario.cost.clone(),
            Some(scenario.penalty.clone()),
            scenario.excitation.clone(),
            scenario.control_set.clone(),
            0.0,
        )
    }

    pub fn system(&self) -> &LinearAffineSystem {
        &self.system
    }

    pub fn cost(&self) -> &QuadraticCostSpec {
        &self.cost
    }

    pub fn control_set(&self) -> &AdmissibleSet {
        &self.control_set
    }

    pub fn excitation(&self) -> &ExcitationSpec {
        &self.excitation
    }

    pub fn abs_weight(&self) -> f64 {
        self.abs_weight
    }

    pub fn has_penalty(&self) -> bool {
        self.penalty.is_some()
    }

    fn check_args(
        &self,
        x: &DVector<f64>,
        x_hat: Option<&DVector<f64>>,
        lambda: &DVector<f64>,
    ) -> Result<()> {
        if x.len() != self.system.state_dim() || lambda.len() != self.system.state_dim() {
            return Err(validation(format!(
                "state/costate dimension must be {}, got {} and {}",
                self.system.state_dim(),
                x.len(),
                lambda.len()
            )));
        }
        match (&self.penalty, x_hat) {
            (Some(_), None) => Err(validation(
                "this Hamiltonian carries a penalty; the observed plant state is required",
            )),
            (None, Some(_)) => Err(validation(
                "this Hamiltonian has no penalty; no plant state expected",
            )),
            (Some(_), Some(xh)) if xh.len() != x.len() => Err(validation(format!(
                "plant state dimension {} does not match model state dimension {}",
                xh.len(),
                x.len()
            ))),
            _ => Ok(()),
        }
    }

    /// `l(t,x,u) [+ beta(t)||x - x_hat||^2] + lambda'(Ax + Bu) + kappa*||u||_1`.
    pub fn eval(
        &self,
        t: f64,
        x: &DVector<f64>,
        x_hat: Option<&DVector<f64>>,
        u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<f64> {
        self.check_args(x, x_hat, lambda)?;
        let d = self.excitation.evaluate(t)?;
        let mut value = self.cost.running(x, u, d)?;
        if let (Some(penalty), Some(xh)) = (&self.penalty, x_hat) {
            value += penalty.evaluate(t)? * (x - xh).norm_squared();
        }
        value += lambda.dot(&self.system.evaluate_dynamics(x, u)?);
        if self.abs_weight > 0.0 {
            value += self.abs_weight * u.iter().map(|v| v.abs()).sum::<f64>();
        }
        Ok(value)
    }

    /// Linear-in-`u` coefficient `B'lambda + d(t) * 1` (excitation term only
    /// when the cost carries it). The state never enters: the dynamics are
    /// affine in the control and the penalty is control-free.
    fn linear_coefficient(&self, d: f64, lambda: &DVector<f64>) -> DVector<f64> {
        let b = self.system.control_jacobian();
        let offset = if self.cost.linear_control_weight() { d } else { 0.0 };
        let mut c = DVector::from_element(self.system.control_dim(), offset);
        c.gemv_tr(1.0, b, lambda, 1.0);
        c
    }

    /// Componentwise subgradient interval `R u + B'lambda + d*1 + kappa*d|u_i|`.
    pub fn control_subdifferential(
        &self,
        t: f64,
        u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<SubdifferentialInterval> {
        if u.len() != self.system.control_dim() {
            return Err(validation(format!(
                "control dimension must be {}, got {}",
                self.system.control_dim(),
                u.len()
            )));
        }
        if lambda.len() != self.system.state_dim() {
            return Err(validation(format!(
                "costate dimension must be {}, got {}",
                self.system.state_dim(),
                lambda.len()
            )));
        }
        let d = self.excitation.evaluate(t)?;
        let mut smooth = self.linear_coefficient(d, lambda);
        smooth.gemv(1.0, self.cost.control_weight(), u, 1.0);
        if self.abs_weight == 0.0 {
            return Ok(SubdifferentialInterval::singleton(smooth));
        }
        let mut lo = smooth.clone();
        let mut hi = smooth;
        for i in 0..u.len() {
            if u[i] > 0.0 {
                lo[i] += self.abs_weight;
                hi[i] += self.abs_weight;
            } else if u[i] < 0.0 {
                lo[i] -= self.abs_weight;
                hi[i] -= self.abs_weight;
            } else {
                lo[i] -= self.abs_weight;
                hi[i] += self.abs_weight;
            }
        }
        SubdifferentialInterval::new(lo, hi)
    }

    fn control_weight_is_diagonal(&self) -> bool {
        let r = self.cost.control_weight();
        let m = r.nrows();
        (0..m).all(|i| (0..m).all(|j| i == j || r[(i, j)] == 0.0))
    }

    /// Shared kernel of [`Self::minimize`] and the solver hot loop.
    /// Writes the unconstrained and the projected minimizer; returns
    /// uniqueness. Never reads the state, so the result is identical for
    /// every penalty weight.
    pub(crate) fn solve_pointwise(
        &self,
        d: f64,
        lambda: &DVector<f64>,
        u_unc: &mut DVector<f64>,
        u_min: &mut DVector<f64>,
    ) -> Result<bool> {
        let m = self.system.control_dim();
        let r = self.cost.control_weight();
        let b = self.system.control_jacobian();
        let n = self.system.state_dim();
        let offset = if self.cost.linear_control_weight() { d } else { 0.0 };
        let diagonal = self.control_weight_is_diagonal();
        let kappa = self.abs_weight;

        if kappa > 0.0 && !diagonal {
            return Err(Error::Unsupported(
                "nonsmooth |u| weight with a non-diagonal control weight; use brute_force_argmin"
                    .into(),
            ));
        }
        if kappa > 0.0 && matches!(self.control_set, AdmissibleSet::Ball { .. }) {
            return Err(Error::Unsupported(
                "nonsmooth |u| weight with a ball constraint; use brute_force_argmin".into(),
            ));
        }

        if diagonal {
            let mut unique = true;
            for l in 0..m {
                let mut c = offset;
                for i in 0..n {
                    c += b[(i, l)] * lambda[i];
                }
                let rll = r[(l, l)];
                let unc = if kappa == 0.0 {
                    if rll <= 0.0 {
                        return Err(validation(
                            "smooth minimization needs a positive definite control weight; \
                             use brute_force_argmin for degenerate instances",
                        ));
                    }
                    -c / rll
                } else if rll > 0.0 {
                    // soft threshold of the |u| term, exact in 1-D
                    let z = -c;
                    z.signum() * (z.abs() - kappa).max(0.0) / rll
                } else {
                    // piecewise linear: slopes c -/+ kappa on the two sides
                    if c.abs() < kappa {
                        0.0
                    } else if c.abs() == kappa {
                        unique = false; // flat side; break the tie toward zero
                        0.0
                    } else if c > kappa {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                };
                u_unc[l] = unc;
            }
            match &self.control_set {
                AdmissibleSet::Interval { lo, hi } => {
                    u_min[0] = u_unc[0].clamp(*lo, *hi);
                }
                AdmissibleSet::Box { lo, hi } => {
                    for l in 0..m {
                        u_min[l] = u_unc[l].clamp(lo[l], hi[l]);
                    }
                }
                AdmissibleSet::Ball { center, radius } => {
                    // exact only for an isotropic quadratic form
                    let r00 = r[(0, 0)];
                    if (0..m).any(|l| r[(l, l)] != r00) {
                        return Err(Error::Unsupported(
                            "ball projection is exact only for R = r*I; use brute_force_argmin"
                                .into(),
                        ));
                    }
                    let offset_vec = &*u_unc - center;
                    let dist = offset_vec.norm();
                    if dist <= *radius {
                        u_min.copy_from(u_unc);
                    } else {
                        u_min.copy_from(center);
                        u_min.axpy(*radius / dist, &offset_vec, 1.0);
                    }
                }
                AdmissibleSet::Unbounded { .. } => {
                    if u_unc.iter().any(|v| !v.is_finite()) {
                        return Err(validation(
                            "Hamiltonian is unbounded below on the unbounded control set",
                        ));
                    }
                    u_min.copy_from(u_unc);
                }
            }
            Ok(unique)
        } else {
            // dense positive definite R
            if self.cost.r_min() <= 0.0 {
                return Err(validation(
                    "smooth minimization needs a positive definite control weight; \
                     use brute_force_argmin for degenerate instances",
                ));
            }
            let c = self.linear_coefficient(d, lambda);
            let chol = r
                .clone()
                .cholesky()
                .ok_or_else(|| validation("control weight R is not positive definite"))?;
            let unc = chol.solve(&(-&c));
            u_unc.copy_from(&unc);
            match &self.control_set {
                AdmissibleSet::Unbounded { .. } => {
                    u_min.copy_from(&unc);
                }
                AdmissibleSet::Interval { .. } | AdmissibleSet::Box { .. } => {
                    // componentwise clamp of the unconstrained point is not
                    // exact for coupled quadratics; run projected coordinate
                    // descent on (1/2)u'Ru + c'u over the box.
                    let bounds: Vec<(f64, f64)> = (0..m)
                        .map(|l| self.control_set.component_bounds(l).expect("box bounds"))
                        .collect();
                    for l in 0..m {
                        u_min[l] = unc[l].clamp(bounds[l].0, bounds[l].1);
                    }
                    let mut sweeps = 0usize;
                    loop {
                        let mut max_change: f64 = 0.0;
                        for l in 0..m {
                            let mut s = c[l];
                            for j in 0..m {
                                if j != l {
                                    s += r[(l, j)] * u_min[j];
                                }
                            }
                            let new = (-s / r[(l, l)]).clamp(bounds[l].0, bounds[l].1);
                            max_change = max_change.max((new - u_min[l]).abs());
                            u_min[l] = new;
                        }
                        sweeps += 1;
                        if max_change <= 1e-12 || sweeps >= 100_000 {
                            break;
                        }
                    }
                }
                AdmissibleSet::Ball { .. } => {
                    return Err(Error::Unsupported(
                        "ball projection is exact only for R = r*I; use brute_force_argmin".into(),
                    ));
                }
            }
            Ok(true)
        }
    }

    /// Pointwise constrained Hamiltonian minimization.
    ///
    /// Smooth case: unconstrained minimizer `-R^{-1}(B'lambda + d*1)` followed
    /// by exact projection (componentwise clamp for intervals and boxes,
    /// radial scaling for balls under isotropic `R`). With a nonsmooth `|u|`
    /// weight and diagonal `R`: componentwise soft threshold, then clamp.
    pub fn minimize(
        &self,
        t: f64,
        x: &DVector<f64>,
        x_hat: Option<&DVector<f64>>,
        lambda: &DVector<f64>,
    ) -> Result<ControlDecision> {
        self.check_args(x, x_hat, lambda)?;
        let d = self.excitation.evaluate(t)?;
        let m = self.system.control_dim();
        let mut u_unc = DVector::zeros(m);
        let mut u_min = DVector::zeros(m);
        let unique = self.solve_pointwise(d, lambda, &mut u_unc, &mut u_min)?;
        let saturated = saturation_flags(&self.control_set, &u_unc);
        let hamiltonian_value = self.eval(t, x, x_hat, &u_min, lambda)?;
        Ok(ControlDecision {
            minimizer: u_min,
            unconstrained_minimizer: u_unc,
            saturated,
            unique,
            hamiltonian_value,
        })
    }

    /// Dense grid search over a bounded control set: the oracle the
    /// projection-form minimizer is tested against. Returns every grid point
    /// within `1e-9 * (1 + |min|)` of the minimum.
    pub fn brute_force_argmin(
        &self,
        t: f64,
        x: &DVector<f64>,
        x_hat: Option<&DVector<f64>>,
        lambda: &DVector<f64>,
        grid_points: usize,
    ) -> Result<BruteForceArgmin> {
        self.check_args(x, x_hat, lambda)?;
        if grid_points < 3 {
            return Err(validation(format!(
                "oracle needs at least 3 grid points per dimension, got {grid_points}"
            )));
        }
        let m = self.system.control_dim();
        let axes: Vec<(f64, f64)> = match &self.control_set {
            AdmissibleSet::Interval { lo, hi } => vec![(*lo, *hi)],
            AdmissibleSet::Box { lo, hi } => (0..m).map(|i| (lo[i], hi[i])).collect(),
            AdmissibleSet::Ball { center, radius } => {
                (0..m).map(|i| (center[i] - radius, center[i] + radius)).collect()
            }
            AdmissibleSet::Unbounded { .. } => {
                return Err(validation(
                    "brute-force argmin needs a compact control set",
                ))
            }
        };
        let total = grid_points.pow(m as u32);
        let ball = match &self.control_set {
            AdmissibleSet::Ball { center, radius } => Some((center, *radius)),
            _ => None,
        };
        let point_at = |flat: usize| -> DVector<f64> {
            let mut u = DVector::zeros(m);
            let mut rest = flat;
            // row-major: last axis varies fastest
            for i in (0..m).rev() {
                let idx = rest % grid_points;
                rest /= grid_points;
                let (lo, hi) = axes[i];
                u[i] = lo + (hi - lo) * idx as f64 / (grid_points - 1) as f64;
            }
            u
        };
        let mut values = vec![f64::INFINITY; total];
        let mut min_value = f64::INFINITY;
        for flat in 0..total {
            let u = point_at(flat);
            if let Some((center, radius)) = ball {
                if (&u - center).norm() > radius * (1.0 + 1e-12) {
                    continue;
                }
            }
            let v = self.eval(t, x, x_hat, &u, lambda)?;
            values[flat] = v;
            min_value = min_value.min(v);
        }
        if !min_value.is_finite() {
            return Err(validation("Hamiltonian not finite anywhere on the control grid"));
        }
        let tol = ORACLE_REL_TOL * (1.0 + min_value.abs());
        let mut points = Vec::new();
        let mut flat_indices = Vec::new();
        for (flat, &v) in values.iter().enumerate() {
            if v - min_value <= tol {
                points.push(point_at(flat));
                flat_indices.push(flat);
            }
        }
        Ok(BruteForceArgmin {
            points,
            flat_indices,
            min_value,
        })
    }

    /// Finite witness of coercivity: along every ray the value at the largest
    /// radius must exceed the value at the smallest, with a positive final
    /// segment.
    pub fn coercivity_probe(
        &self,
        t: f64,
        x: &DVector<f64>,
        x_hat: Option<&DVector<f64>>,
        lambda: &DVector<f64>,
        ray_directions: &[DVector<f64>],
        radii: &[f64],
    ) -> Result<bool> {
        self.check_args(x, x_hat, lambda)?;
        if radii.len() < 2 || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(validation("radii must be strictly increasing with >= 2 entries"));
        }
        if ray_directions.is_empty() {
            return Err(validation("at least one ray direction is required"));
        }
        let m = self.system.control_dim();
        for dir in ray_directions {
            if dir.len() != m {
                return Err(validation(format!(
                    "ray direction dimension {} does not match control dimension {m}",
                    dir.len()
                )));
            }
            let norm = dir.norm();
            if norm == 0.0 {
                return Err(validation("ray directions must be nonzero"));
            }
            let unit = dir / norm;
            let at = |radius: f64| self.eval(t, x, x_hat, &(&unit * radius), lambda);
            let first = at(radii[0])?;
            let second_last = at(radii[radii.len() - 2])?;
            let last = at(radii[radii.len() - 1])?;
            if !(last > first && last > second_last) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Scalar nonsmooth Hamiltonian `|u| + a*u` over the given set; the slope `a`
/// enters through the costate at call time (unit control effectiveness).
pub fn nonsmooth_abs_spec(control_set: AdmissibleSet) -> Result<HamiltonianSpec> {
    HamiltonianSpec::new(
        LinearAffineSystem::scalar(0.0, 1.0),
        QuadraticCostSpec::scalar(0.0, 0.0, 0.0, false)?,
        None,
        ExcitationSpec::Zero,
        control_set,
        1.0,
    )
}

pub(crate) fn saturation_flags(set: &AdmissibleSet, u_unc: &DVector<f64>) -> Vec<SaturationFlag> {
    match set {
        AdmissibleSet::Interval { lo, hi } => {
            vec![classify_component(u_unc[0], *lo, *hi)]
        }
        AdmissibleSet::Box { lo, hi } => (0..lo.len())
            .map(|i| classify_component(u_unc[i], lo[i], hi[i]))
            .collect(),
        AdmissibleSet::Ball { center, radius } => {
            let flag = if (u_unc - center).norm() > *radius {
                SaturationFlag::Hi
            } else {
                SaturationFlag::Interior
            };
            vec![flag; center.len()]
        }
        AdmissibleSet::Unbounded { dim } => vec![SaturationFlag::Interior; *dim],
    }
}

fn classify_component(u_unc: f64, lo: f64, hi: f64) -> SaturationFlag {
    // a value exactly on a bound counts as saturated
    if u_unc <= lo {
        SaturationFlag::Lo
    } else if u_unc >= hi {
        SaturationFlag::Hi
    } else {
        SaturationFlag::Interior
    }
}

/// Distance from the origin to `g + N_U(u)`: zero exactly when `u` is a
/// stationary point of the constrained minimization.
pub fn normal_cone_residual(
    set: &AdmissibleSet,
    u: &DVector<f64>,
    g: &SubdifferentialInterval,
) -> Result<f64> {
    if u.len() != set.dimension() || g.dim() != set.dimension() {
        return Err(validation(format!(
            "normal cone residual needs matching dimensions, got set {}, u {}, g {}",
            set.dimension(),
            u.len(),
            g.dim()
        )));
    }
    if (set.project(u) - u).norm() > 1e-12 {
        return Err(validation("control is not in the admissible set"));
    }
    match set {
        AdmissibleSet::Interval { .. } | AdmissibleSet::Box { .. } => {
            let mut sq = 0.0;
            for i in 0..u.len() {
                let (lo, hi) = set.component_bounds(i).expect("interval or box");
                let act_tol = 1e-10 * (1.0 + lo.abs().max(hi.abs()));
                let (mut glo, mut ghi) = g.component(i);
                if u[i] - lo <= act_tol {
                    // lower bound active: normal cone adds (-inf, 0]
                    glo = f64::NEG_INFINITY;
                }
                if hi - u[i] <= act_tol {
                    // upper bound active: normal cone adds [0, +inf)
                    ghi = f64::INFINITY;
                }
                sq += interval_distance_to_zero(glo, ghi).powi(2);
            }
            Ok(sq.sqrt())
        }
        AdmissibleSet::Unbounded { .. } => {
            let mut sq = 0.0;
            for i in 0..u.len() {
                let (glo, ghi) = g.component(i);
                sq += interval_distance_to_zero(glo, ghi).powi(2);
            }
            Ok(sq.sqrt())
        }
        AdmissibleSet::Ball { center, radius } => {
            if !g.is_singleton(0.0) {
                return Err(Error::Unsupported(
                    "normal cone residual with a ball set needs a singleton gradient".into(),
                ));
            }
            let grad = g.lo();
            let offset = u - center;
            let dist = offset.norm();
            if radius - dist > 1e-10 * (1.0 + radius) {
                Ok(grad.norm())
            } else {
                let normal = offset / dist;
                let step = (-grad.dot(&normal)).max(0.0);
                Ok((grad + normal * step).norm())
            }
        }
    }
}

fn interval_distance_to_zero(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        -hi
    } else {
        0.0
    }
}
