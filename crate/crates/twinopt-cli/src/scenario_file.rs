//! Scenario files: a TOML document with one section per model ingredient.
//! Parsing applies documented defaults (constant penalty weight 1, N = 2400,
//! standard sweep settings) and anchors every validation failure to the
//! section and field that caused it.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use twinopt_core::{
    AdmissibleSet, ExcitationSpec, LinearAffineSystem, PenaltySchedule, QuadraticCostSpec,
    Scenario, SweepSettings, TimeGrid, Trajectory,
};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: SystemSection,
    pub model: SystemSection,
    pub cost: CostSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltySection>,
    pub excitation: ExcitationSection,
    pub control_set: ControlSetSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub q_matrix: Vec<Vec<f64>>,
    pub r_matrix: Vec<Vec<f64>>,
    pub q_terminal: Vec<Vec<f64>>,
    #[serde(default = "default_true")]
    pub linear_control_weight: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSetSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo_vec: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi_vec: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N", default = "default_grid_n")]
    pub num_steps: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            max_iterations: default_max_iterations(),
            damping: default_damping(),
            tol: default_tol(),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_grid_n() -> usize {
    2400
}

fn default_max_iterations() -> usize {
    500
}

fn default_damping() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-10
}

/// Command-line overrides applied after parsing, before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub grid_n: Option<usize>,
    pub u_lo: Option<f64>,
    pub u_hi: Option<f64>,
}

#[derive(Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub settings: SweepSettings,
    pub warnings: Vec<String>,
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        bail!("{field}: matrix must have at least one row and one column");
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        bail!("{field}: rows have inconsistent lengths");
    }
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn scalar_samples(traj: &Trajectory) -> Vec<f64> {
    traj.values().iter().map(|v| v[0]).collect()
}

/// Parses scenario text, applies overrides, and validates everything,
/// anchoring errors to their `[section].field`.
pub fn parse_scenario_str(text: &str, overrides: &Overrides) -> Result<LoadedScenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| anyhow!("scenario parse error: {e}"))?;
    build_scenario(file, overrides)
}

pub fn parse_scenario(path: &Path, overrides: &Overrides) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))?;
    parse_scenario_str(&text, overrides)
        .with_context(|| format!("in scenario file {}", path.display()))
}

fn build_scenario(mut file: ScenarioFile, overrides: &Overrides) -> Result<LoadedScenario> {
    let mut warnings = Vec::new();

    if let Some(n) = overrides.grid_n {
        file.grid.num_steps = n;
    }
    if let Some(beta) = overrides.beta {
        file.penalty = Some(PenaltySection {
            kind: "constant".into(),
            beta: Some(beta),
            values: None,
        });
    }
    if overrides.u_lo.is_some() || overrides.u_hi.is_some() {
        if file.control_set.kind != "interval" {
            bail!("--u-lo/--u-hi apply only to interval control sets, found kind \"{}\"",
                file.control_set.kind);
        }
        if let Some(lo) = overrides.u_lo {
            file.control_set.lo = Some(lo);
        }
        if let Some(hi) = overrides.u_hi {
            file.control_set.hi = Some(hi);
        }
    }

    let grid = TimeGrid::uniform(file.grid.horizon, file.grid.num_steps)
        .map_err(|e| anyhow!("[grid]: {e}"))?;

    let plant_a = matrix(&file.plant.a, "[plant].A")?;
    let plant_b = matrix(&file.plant.b, "[plant].B")?;
    let plant = LinearAffineSystem::new(plant_a, plant_b).map_err(|e| anyhow!("[plant]: {e}"))?;
    let model_a = matrix(&file.model.a, "[model].A")?;
    let model_b = matrix(&file.model.b, "[model].B")?;
    let model = LinearAffineSystem::new(model_a, model_b).map_err(|e| anyhow!("[model]: {e}"))?;

    let q = matrix(&file.cost.q_matrix, "[cost].q_matrix")?;
    let r = matrix(&file.cost.r_matrix, "[cost].r_matrix")?;
    let q_t = matrix(&file.cost.q_terminal, "[cost].q_terminal")?;
    let cost = QuadraticCostSpec::new(q, r, q_t, file.cost.linear_control_weight)
        .map_err(|e| anyhow!("[cost].q_matrix/r_matrix/q_terminal: {e}"))?;

    let penalty = match &file.penalty {
        None => PenaltySchedule::Constant(1.0),
        Some(section) => match section.kind.as_str() {
            "constant" => {
                let beta = section
                    .beta
                    .ok_or_else(|| anyhow!("[penalty].beta: required for kind \"constant\""))?;
                PenaltySchedule::Constant(beta)
            }
            "tabulated" => {
                let values = section
                    .values
                    .clone()
                    .ok_or_else(|| anyhow!("[penalty].values: required for kind \"tabulated\""))?;
                if values.len() != grid.num_nodes() {
                    bail!(
                        "[penalty].values: expected {} samples (one per grid node), got {}",
                        grid.num_nodes(),
                        values.len()
                    );
                }
                PenaltySchedule::Tabulated(
                    Trajectory::from_scalar_samples(grid.clone(), values)
                        .map_err(|e| anyhow!("[penalty].values: {e}"))?,
                )
            }
            other => bail!("[penalty].kind: unknown kind \"{other}\" (constant | tabulated)"),
        },
    };
    penalty.validate().map_err(|e| anyhow!("[penalty]: {e}"))?;

    let excitation = match file.excitation.kind.as_str() {
        "zero" => ExcitationSpec::Zero,
        "square-wave" => {
            let amplitude = file
                .excitation
                .amplitude
                .ok_or_else(|| anyhow!("[excitation].amplitude: required for kind \"square-wave\""))?;
            let omega = file
                .excitation
                .omega
                .ok_or_else(|| anyhow!("[excitation].omega: required for kind \"square-wave\""))?;
            ExcitationSpec::SquareWave { amplitude, omega }
        }
        "tabulated" => {
            let values = file
                .excitation
                .values
                .clone()
                .ok_or_else(|| anyhow!("[excitation].values: required for kind \"tabulated\""))?;
            if values.len() != grid.num_nodes() {
                bail!(
                    "[excitation].values: expected {} samples (one per grid node), got {}",
                    grid.num_nodes(),
                    values.len()
                );
            }
            ExcitationSpec::Tabulated(
                Trajectory::from_scalar_samples(grid.clone(), values)
                    .map_err(|e| anyhow!("[excitation].values: {e}"))?,
            )
        }
        other => bail!("[excitation].kind: unknown kind \"{other}\" (zero | square-wave | tabulated)"),
    };
    excitation.validate().map_err(|e| anyhow!("[excitation]: {e}"))?;

    let set = &file.control_set;
    let control_set = match set.kind.as_str() {
        "interval" => {
            let lo = set.lo.ok_or_else(|| anyhow!("[control_set].lo: required for kind \"interval\""))?;
            let hi = set.hi.ok_or_else(|| anyhow!("[control_set].hi: required for kind \"interval\""))?;
            AdmissibleSet::interval(lo, hi).map_err(|e| anyhow!("[control_set].lo/hi: {e}"))?
        }
        "box" => {
            let lo = set
                .lo_vec
                .clone()
                .ok_or_else(|| anyhow!("[control_set].lo_vec: required for kind \"box\""))?;
            let hi = set
                .hi_vec
                .clone()
                .ok_or_else(|| anyhow!("[control_set].hi_vec: required for kind \"box\""))?;
            AdmissibleSet::box_bounds(DVector::from_vec(lo), DVector::from_vec(hi))
                .map_err(|e| anyhow!("[control_set].lo_vec/hi_vec: {e}"))?
        }
        "ball" => {
            let center = set
                .center
                .clone()
                .ok_or_else(|| anyhow!("[control_set].center: required for kind \"ball\""))?;
            let radius = set
                .radius
                .ok_or_else(|| anyhow!("[control_set].radius: required for kind \"ball\""))?;
            AdmissibleSet::ball(DVector::from_vec(center), radius)
                .map_err(|e| anyhow!("[control_set].center/radius: {e}"))?
        }
        "unbounded" => {
            let dim = set
                .dimension
                .ok_or_else(|| anyhow!("[control_set].dimension: required for kind \"unbounded\""))?;
            AdmissibleSet::unbounded(dim).map_err(|e| anyhow!("[control_set].dimension: {e}"))?
        }
        other => bail!("[control_set].kind: unknown kind \"{other}\" (interval | box | ball | unbounded)"),
    };
    if control_set.is_singleton() {
        warnings.push(
            "control set is a single point; minimizer-set geometry is degenerate".to_string(),
        );
    }

    let initial_state = DVector::from_vec(file.initial.x0.clone());
    let scenario = Scenario::new(
        plant,
        model,
        cost,
        penalty,
        excitation,
        control_set,
        grid,
        initial_state,
    )
    .map_err(|e| anyhow!("scenario validation: {e}"))?;

    let settings = SweepSettings {
        max_iterations: file.sweep.max_iterations,
        damping: file.sweep.damping,
        convergence_tol: file.sweep.tol,
    };
    settings.validate().map_err(|e| anyhow!("[sweep]: {e}"))?;

    Ok(LoadedScenario {
        scenario,
        settings,
        warnings,
    })
}

/// Canonical TOML dump of a scenario; parsing it back reproduces an equal
/// scenario.
pub fn emit_canonical(scenario: &Scenario, settings: &SweepSettings) -> Result<String> {
    let penalty = match &scenario.penalty {
        PenaltySchedule::Constant(beta) => PenaltySection {
            kind: "constant".into(),
            beta: Some(*beta),
            values: None,
        },
        PenaltySchedule::Tabulated(traj) => {
            if traj.grid() != &scenario.grid {
                bail!("tabulated penalty does not live on the scenario grid");
            }
            PenaltySection {
                kind: "tabulated".into(),
                beta: None,
                values: Some(scalar_samples(traj)),
            }
        }
    };
    let excitation = match &scenario.excitation {
        ExcitationSpec::Zero => ExcitationSection {
            kind: "zero".into(),
            amplitude: None,
            omega: None,
            values: None,
        },
        ExcitationSpec::SquareWave { amplitude, omega } => ExcitationSection {
            kind: "square-wave".into(),
            amplitude: Some(*amplitude),
            omega: Some(*omega),
            values: None,
        },
        ExcitationSpec::Tabulated(traj) => {
            if traj.grid() != &scenario.grid {
                bail!("tabulated excitation does not live on the scenario grid");
            }
            ExcitationSection {
                kind: "tabulated".into(),
                amplitude: None,
                omega: None,
                values: Some(scalar_samples(traj)),
            }
        }
    };
    let control_set = match &scenario.control_set {
        AdmissibleSet::Interval { lo, hi } => ControlSetSection {
            kind: "interval".into(),
            lo: Some(*lo),
            hi: Some(*hi),
            lo_vec: None,
            hi_vec: None,
            center: None,
            radius: None,
            dimension: None,
        },
        AdmissibleSet::Box { lo, hi } => ControlSetSection {
            kind: "box".into(),
            lo: None,
            hi: None,
            lo_vec: Some(lo.iter().cloned().collect()),
            hi_vec: Some(hi.iter().cloned().collect()),
            center: None,
            radius: None,
            dimension: None,
        },
        AdmissibleSet::Ball { center, radius } => ControlSetSection {
            kind: "ball".into(),
            lo: None,
            hi: None,
            lo_vec: None,
            hi_vec: None,
            center: Some(center.iter().cloned().collect()),
            radius: Some(*radius),
            dimension: None,
        },
        AdmissibleSet::Unbounded { dim } => ControlSetSection {
            kind: "unbounded".into(),
            lo: None,
            hi: None,
            lo_vec: None,
            hi_vec: None,
            center: None,
            radius: None,
            dimension: Some(*dim),
        },
    };

    let file = ScenarioFile {
        plant: SystemSection {
            a: rows_of(scenario.plant.drift()),
            b: rows_of(scenario.plant.control_jacobian()),
        },
        model: SystemSection {
            a: rows_of(scenario.model.drift()),
            b: rows_of(scenario.model.control_jacobian()),
        },
        cost: CostSection {
            q_matrix: rows_of(scenario.cost.state_weight()),
            r_matrix: rows_of(scenario.cost.control_weight()),
            q_terminal: rows_of(scenario.cost.terminal_weight()),
            linear_control_weight: scenario.cost.linear_control_weight(),
        },
        penalty: Some(penalty),
        excitation,
        control_set,
        grid: GridSection {
            horizon: scenario.grid.horizon(),
            num_steps: scenario.grid.num_steps(),
        },
        initial: InitialSection {
            x0: scenario.initial_state.iter().cloned().collect(),
        },
        sweep: SweepSection {
            max_iterations: settings.max_iterations,
            damping: settings.damping,
            tol: settings.convergence_tol,
        },
    };
    toml::to_string_pretty(&file).context("serializing scenario")
}
