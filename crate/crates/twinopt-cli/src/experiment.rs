//! Experiment orchestration: solve both problems, build the equivalence
//! report, and emit the trace CSV, the report CSV, and the three SVG charts.

use crate::svg::{self, Series, PALETTE};
use anyhow::{Context, Result};
use std::path::{Path, PathBuf};
use twinopt_core::{
    closed_loop_coupled_run, compare_pmp_solutions, solve_model, solve_plant, AdmissibleSet,
    EquivalenceReport, PmpSolution, Scenario, SweepSettings,
};

/// How the model problem is fed with a plant trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComparisonMode {
    /// Fixed-point iteration: plant re-simulated under the model control.
    Coupled,
    /// One-shot: model solved against the plant-optimal trajectory.
    Direct,
}

pub struct ExperimentOutcome {
    pub report: EquivalenceReport,
    pub plant_solution: PmpSolution,
    pub model_solution: PmpSolution,
    pub outer_iterations: Option<usize>,
    pub all_converged: bool,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
}

/// Runs the full pipeline and writes every artifact into `out_dir`.
pub fn run_experiment(
    scenario: &Scenario,
    settings: &SweepSettings,
    tol: f64,
    mode: ComparisonMode,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let plant_solution = solve_plant(scenario, settings)?;
    let (model_solution, outer_iterations) = match mode {
        ComparisonMode::Coupled => {
            let run = closed_loop_coupled_run(scenario, settings)?;
            (run.solution, Some(run.outer_iterations))
        }
        ComparisonMode::Direct => {
            let sol = solve_model(scenario, &plant_solution.state, settings)?;
            (sol, None)
        }
    };
    let report = compare_pmp_solutions(scenario, &plant_solution, &model_solution, tol)?;
    let all_converged = plant_solution.converged && model_solution.converged;

    let trace_path = out_dir.join("trace.csv");
    write_trace_csv(&trace_path, scenario, &plant_solution, &model_solution, &report)?;
    let report_path = out_dir.join("report.csv");
    write_report_csv(
        &report_path,
        scenario,
        &report,
        &plant_solution,
        &model_solution,
        outer_iterations,
        tol,
        mode,
    )?;
    write_charts(out_dir, scenario, &plant_solution, &model_solution)?;

    Ok(ExperimentOutcome {
        report,
        plant_solution,
        model_solution,
        outer_iterations,
        all_converged,
        trace_path,
        report_path,
    })
}

fn push_components(header: &mut Vec<String>, base: &str, dim: usize) {
    if dim == 1 {
        header.push(base.to_string());
    } else {
        for i in 0..dim {
            header.push(format!("{base}_{i}"));
        }
    }
}

/// One row per grid node; floats are written in shortest round-trip form so
/// repeated runs are byte-identical.
fn write_trace_csv(
    path: &Path,
    scenario: &Scenario,
    plant: &PmpSolution,
    model: &PmpSolution,
    report: &EquivalenceReport,
) -> Result<()> {
    let n_state = scenario.plant.state_dim();
    let n_control = scenario.plant.control_dim();
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;

    let mut header: Vec<String> = vec!["t".into()];
    push_components(&mut header, "u_plant", n_control);
    push_components(&mut header, "u_model", n_control);
    push_components(&mut header, "u_uncon_plant", n_control);
    push_components(&mut header, "u_uncon_model", n_control);
    push_components(&mut header, "x_plant", n_state);
    push_components(&mut header, "x_model", n_state);
    push_components(&mut header, "lambda_plant", n_state);
    push_components(&mut header, "lambda_model", n_state);
    header.push("d".into());
    header.push("grad_match_residual".into());
    writer.write_record(&header)?;

    for k in 0..scenario.grid.num_nodes() {
        let t = scenario.grid.node(k);
        let d = scenario.excitation.evaluate(t).map_err(anyhow::Error::new)?;
        let mut row: Vec<String> = vec![format!("{t}")];
        let push_vec = |row: &mut Vec<String>, v: &nalgebra::DVector<f64>| {
            for i in 0..v.len() {
                row.push(format!("{}", v[i]));
            }
        };
        push_vec(&mut row, plant.control.value(k));
        push_vec(&mut row, model.control.value(k));
        push_vec(&mut row, plant.unconstrained_control.value(k));
        push_vec(&mut row, model.unconstrained_control.value(k));
        push_vec(&mut row, plant.state.value(k));
        push_vec(&mut row, model.state.value(k));
        push_vec(&mut row, plant.costate.value(k));
        push_vec(&mut row, model.costate.value(k));
        row.push(format!("{d}"));
        row.push(format!("{}", report.gradient_match_residual.value(k)[0]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_report_csv(
    path: &Path,
    scenario: &Scenario,
    report: &EquivalenceReport,
    plant: &PmpSolution,
    model: &PmpSolution,
    outer_iterations: Option<usize>,
    tol: f64,
    mode: ComparisonMode,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    writer.write_record(["key", "value"])?;
    let mut kv = |k: &str, v: String| writer.write_record([k, &v]).map_err(anyhow::Error::new);

    kv(
        "mode",
        match mode {
            ComparisonMode::Coupled => "coupled".into(),
            ComparisonMode::Direct => "direct".into(),
        },
    )?;
    kv("verdict", report.verdict.to_string())?;
    kv("equivalence_tol", format!("{tol}"))?;
    kv("control_sup_distance", format!("{}", report.control_sup_distance))?;
    kv(
        "control_sup_distance_all_nodes",
        format!("{}", report.control_sup_distance_all_nodes),
    )?;
    kv("degenerate_node_count", format!("{}", report.degenerate_nodes.len()))?;
    kv(
        "degenerate_nodes",
        report
            .degenerate_nodes
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    )?;
    kv("state_sup_distance", format!("{}", report.state_sup_distance))?;
    kv("costate_sup_distance", format!("{}", report.costate_sup_distance))?;
    kv("both_saturated_fraction", format!("{}", report.both_saturated_fraction))?;
    let residual_max = report
        .gradient_match_residual
        .values()
        .iter()
        .map(|v| v[0])
        .fold(0.0f64, f64::max);
    kv("gradient_match_residual_max", format!("{residual_max}"))?;
    let aligned = report.alignment_holds_per_node.iter().filter(|&&b| b).count();
    kv(
        "alignment_fraction",
        format!("{}", aligned as f64 / report.alignment_holds_per_node.len() as f64),
    )?;
    kv(
        "sufficient_conditions_hold",
        format!("{}", report.sufficient_conditions_hold),
    )?;
    kv("plant_converged", format!("{}", plant.converged))?;
    kv("plant_iterations", format!("{}", plant.iterations))?;
    kv("plant_final_update_norm", format!("{}", plant.final_update_norm))?;
    kv("plant_total_cost", format!("{}", plant.total_cost))?;
    kv("model_converged", format!("{}", model.converged))?;
    kv("model_iterations", format!("{}", model.iterations))?;
    kv("model_final_update_norm", format!("{}", model.final_update_norm))?;
    kv("model_total_cost", format!("{}", model.total_cost))?;
    if let Some(outer) = outer_iterations {
        kv("outer_iterations", format!("{outer}"))?;
    }
    kv("grid_horizon", format!("{}", scenario.grid.horizon()))?;
    kv("grid_steps", format!("{}", scenario.grid.num_steps()))?;
    writer.flush()?;
    Ok(())
}

fn scalar_series(
    label: &str,
    color: &'static str,
    grid: &twinopt_core::TimeGrid,
    traj: &twinopt_core::Trajectory,
) -> Series {
    Series {
        label: label.to_string(),
        color,
        points: (0..traj.len()).map(|k| (grid.node(k), traj.value(k)[0])).collect(),
    }
}

/// Controls overlay, unconstrained minimizers with the bounds, and states
/// overlay. Vector problems chart their first component.
fn write_charts(
    out_dir: &Path,
    scenario: &Scenario,
    plant: &PmpSolution,
    model: &PmpSolution,
) -> Result<()> {
    let grid = &scenario.grid;

    let controls = svg::line_chart(
        "Constrained optimal controls",
        "t",
        "u",
        &[
            scalar_series("plant control", PALETTE[0], grid, &plant.control),
            scalar_series("model control", PALETTE[1], grid, &model.control),
        ],
        &[],
    );
    std::fs::write(out_dir.join("controls.svg"), controls)?;

    let mut hlines = Vec::new();
    if let AdmissibleSet::Interval { lo, hi } = &scenario.control_set {
        hlines.push((*lo, format!("lower bound {lo}")));
        hlines.push((*hi, format!("upper bound {hi}")));
    }
    let unconstrained = svg::line_chart(
        "Unconstrained Hamiltonian minimizers and control bounds",
        "t",
        "u (unconstrained)",
        &[
            scalar_series("plant unconstrained", PALETTE[0], grid, &plant.unconstrained_control),
            scalar_series("model unconstrained", PALETTE[1], grid, &model.unconstrained_control),
        ],
        &hlines,
    );
    std::fs::write(out_dir.join("unconstrained.svg"), unconstrained)?;

    let states = svg::line_chart(
        "State trajectories under the computed controls",
        "t",
        "x",
        &[
            scalar_series("plant state", PALETTE[0], grid, &plant.state),
            scalar_series("model state", PALETTE[1], grid, &model.state),
        ],
        &[],
    );
    std::fs::write(out_dir.join("states.svg"), states)?;
    Ok(())
}
