//! The bundled examples behind `run-example`.

use crate::experiment::{run_experiment, ComparisonMode, ExperimentOutcome};
use crate::scenario_file::{emit_canonical, parse_scenario_str, LoadedScenario, Overrides};
use anyhow::{Context, Result};
use nalgebra::DVector;
use std::path::Path;
use twinopt_core::scenario::fixtures;
use twinopt_core::{
    check_subgradient_alignment, nonsmooth_abs_spec, AdmissibleSet, SweepSettings,
};

/// The mismatched bang-bang scenario, as shipped.
pub const MISMATCHED_BANG_BANG: &str = include_str!("../fixtures/paper_sec5.toml");

pub fn load_mismatched_bang_bang(overrides: &Overrides) -> Result<LoadedScenario> {
    parse_scenario_str(MISMATCHED_BANG_BANG, overrides).context("in the bundled paper-sec5 scenario")
}

/// Matched dynamics on an unbounded control set: unique interior minimizers,
/// equivalence certified by gradient match. Dumped through the canonical
/// serializer so the usual overrides apply.
pub fn load_unbounded_matched(overrides: &Overrides) -> Result<LoadedScenario> {
    let scenario = fixtures::unbounded_matched(800);
    let settings = SweepSettings {
        max_iterations: 20_000,
        damping: 0.02,
        convergence_tol: 1e-10,
    };
    let text = emit_canonical(&scenario, &settings)?;
    parse_scenario_str(&text, overrides).context("in the bundled example2 scenario")
}

pub fn run_coupled(loaded: &LoadedScenario, tol: f64, out_dir: &Path) -> Result<ExperimentOutcome> {
    run_experiment(
        &loaded.scenario,
        &loaded.settings,
        tol,
        ComparisonMode::Coupled,
        out_dir,
    )
}

/// Scalar nonsmooth demonstration: running cost `|u|` on `[-1, 1]` with the
/// costate supplying a linear slope `a`. Sweeps the slope, checks subgradient
/// alignment and stationarity at zero against the brute-force oracle, and
/// writes one CSV row per slope.
pub fn run_nonsmooth_example(slope: f64, out_dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let set = AdmissibleSet::interval(-1.0, 1.0)?;
    let plant = nonsmooth_abs_spec(set.clone())?;
    let model = nonsmooth_abs_spec(set)?;
    let origin = DVector::from_vec(vec![0.0]);

    let mut slopes: Vec<f64> = (0..41).map(|i| -2.0 + 4.0 * i as f64 / 40.0).collect();
    if !slopes.contains(&slope) {
        slopes.push(slope);
    }

    let path = out_dir.join("example1.csv");
    let mut writer =
        csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    writer.write_record([
        "a",
        "subgrad_lo",
        "subgrad_hi",
        "normal_cone_residual",
        "stationary_at_zero",
        "subgradients_match",
        "argmin_count",
        "argmin_min",
        "argmin_max",
    ])?;

    let mut requested_stationary = false;
    for &a in &slopes {
        let lam = DVector::from_vec(vec![a]);
        let check = check_subgradient_alignment(&plant, &model, 0.0, &lam, &lam, &origin)?;
        let g = plant.control_subdifferential(0.0, &origin, &lam)?;
        let oracle = plant.brute_force_argmin(0.0, &origin, None, &lam, 2001)?;
        let argmin_min = oracle.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let argmin_max = oracle.points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        writer.write_record([
            format!("{a}"),
            format!("{}", g.lo()[0]),
            format!("{}", g.hi()[0]),
            format!("{}", check.normal_cone_residual),
            format!("{}", check.normal_cone_holds),
            format!("{}", check.subgradients_match),
            format!("{}", oracle.points.len()),
            format!("{argmin_min}"),
            format!("{argmin_max}"),
        ])?;
        if a == slope {
            requested_stationary = check.subgradients_match && check.normal_cone_holds;
            println!(
                "slope a = {a}: subdifferential [{}, {}], stationarity at 0: {}, \
                 oracle argmin in [{argmin_min}, {argmin_max}]",
                g.lo()[0],
                g.hi()[0],
                if requested_stationary { "holds" } else { "fails" }
            );
        }
    }
    writer.flush()?;
    println!("wrote {}", path.display());
    Ok(requested_stationary)
}
