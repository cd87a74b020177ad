use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use twinopt_cli::examples;
use twinopt_cli::experiment::{run_experiment, ComparisonMode, ExperimentOutcome};
use twinopt_cli::scenario_file::{parse_scenario, LoadedScenario, Overrides};
use twinopt_core::{solve_model, solve_plant, HamiltonianSpec};

/// Finite-horizon optimal control for a plant and a mismatched model with a
/// trajectory-deviation penalty: forward-backward sweep solvers plus a
/// node-by-node report on when the two optimal controls coincide.
#[derive(Parser)]
#[command(name = "twinopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled example end to end
    RunExample {
        #[arg(value_enum)]
        example: ExampleName,
        /// Slope of the linear term in the nonsmooth example1
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        a: f64,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Solve a scenario file with the coupled plant/model pipeline
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Solve both problems (the model fed the plant-optimal trajectory) and
    /// report whether the controls coincide
    CheckEquivalence {
        scenario: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Dump the brute-force Hamiltonian argmin of both problems at one node
    Oracle {
        scenario: PathBuf,
        /// Grid node index to inspect
        #[arg(long)]
        node: usize,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    /// Mismatched scalar dynamics, strong square wave, tight bounds
    #[value(name = "paper-sec5")]
    PaperSec5,
    /// Nonsmooth |u| running cost with a linear slope
    Example1,
    /// Matched dynamics on an unbounded control set
    Example2,
}

#[derive(Args)]
struct CommonFlags {
    /// Output directory for CSV traces and SVG charts
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the penalty weight with a constant
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Override the number of grid steps
    #[arg(long)]
    grid_n: Option<usize>,
    /// Override the interval lower control bound
    #[arg(long, allow_negative_numbers = true)]
    u_lo: Option<f64>,
    /// Override the interval upper control bound
    #[arg(long, allow_negative_numbers = true)]
    u_hi: Option<f64>,
    /// Equivalence tolerance on the control sup distance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl CommonFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            beta: self.beta,
            grid_n: self.grid_n,
            u_lo: self.u_lo,
            u_hi: self.u_hi,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify_error(&err))
        }
    }
}

/// Diverged or stalled solves exit 2 (non-convergence); everything else is a
/// usage or input problem and exits 1.
fn classify_error(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<twinopt_core::Error>() {
        Some(twinopt_core::Error::SweepDiverged { .. })
        | Some(twinopt_core::Error::OuterLoopStalled { .. }) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::RunExample { example, a, flags } => match example {
            ExampleName::PaperSec5 => {
                let loaded = examples::load_mismatched_bang_bang(&flags.overrides())?;
                let out_dir = flags.out_dir.join("paper-sec5");
                report_warnings(&loaded);
                let outcome = examples::run_coupled(&loaded, flags.tol, &out_dir)?;
                print_summary(&outcome);
                Ok(exit_for(&outcome))
            }
            ExampleName::Example2 => {
                let loaded = examples::load_unbounded_matched(&flags.overrides())?;
                let out_dir = flags.out_dir.join("example2");
                report_warnings(&loaded);
                let outcome = examples::run_coupled(&loaded, flags.tol, &out_dir)?;
                print_summary(&outcome);
                Ok(exit_for(&outcome))
            }
            ExampleName::Example1 => {
                let out_dir = flags.out_dir.join("example1");
                examples::run_nonsmooth_example(a, &out_dir)?;
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Solve { scenario, flags } => {
            let loaded = parse_scenario(&scenario, &flags.overrides())?;
            report_warnings(&loaded);
            let outcome = run_experiment(
                &loaded.scenario,
                &loaded.settings,
                flags.tol,
                ComparisonMode::Coupled,
                &flags.out_dir,
            )?;
            print_summary(&outcome);
            Ok(exit_for(&outcome))
        }
        Command::CheckEquivalence { scenario, flags } => {
            let loaded = parse_scenario(&scenario, &flags.overrides())?;
            report_warnings(&loaded);
            let outcome = run_experiment(
                &loaded.scenario,
                &loaded.settings,
                flags.tol,
                ComparisonMode::Direct,
                &flags.out_dir,
            )?;
            print_summary(&outcome);
            Ok(exit_for(&outcome))
        }
        Command::Oracle { scenario, node, flags } => {
            let loaded = parse_scenario(&scenario, &flags.overrides())?;
            report_warnings(&loaded);
            run_oracle(&loaded, node)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn report_warnings(loaded: &LoadedScenario) {
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
}

fn exit_for(outcome: &ExperimentOutcome) -> ExitCode {
    if outcome.all_converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("sweep did not converge; artifacts were still written");
        ExitCode::from(2)
    }
}

fn print_summary(outcome: &ExperimentOutcome) {
    let report = &outcome.report;
    println!("verdict: {}", report.verdict);
    println!(
        "control sup distance: {} (all nodes {}, excitation-zero nodes {:?})",
        report.control_sup_distance,
        report.control_sup_distance_all_nodes,
        report.degenerate_nodes
    );
    println!("state sup distance: {}", report.state_sup_distance);
    println!("costate sup distance: {}", report.costate_sup_distance);
    println!("both-saturated fraction: {}", report.both_saturated_fraction);
    println!(
        "sufficient conditions (matched control matrices + costates): {}",
        report.sufficient_conditions_hold
    );
    println!(
        "plant sweep: converged={} iterations={} cost={}",
        outcome.plant_solution.converged,
        outcome.plant_solution.iterations,
        outcome.plant_solution.total_cost
    );
    println!(
        "model sweep: converged={} iterations={} cost={}",
        outcome.model_solution.converged,
        outcome.model_solution.iterations,
        outcome.model_solution.total_cost
    );
    if let Some(outer) = outcome.outer_iterations {
        println!("coupled outer iterations: {outer}");
    }
    println!(
        "wrote {} and {} plus controls.svg, unconstrained.svg, states.svg",
        outcome.trace_path.display(),
        outcome.report_path.display()
    );
}

/// Solves both problems, then dumps the dense-grid argmin of each Hamiltonian
/// at the requested node next to the projection-form minimizer.
fn run_oracle(loaded: &LoadedScenario, node: usize) -> Result<()> {
    let scenario = &loaded.scenario;
    if node >= scenario.grid.num_nodes() {
        bail!(
            "node {node} out of range; the grid has nodes 0..={}",
            scenario.grid.num_steps()
        );
    }
    let plant_sol = solve_plant(scenario, &loaded.settings)?;
    let model_sol = solve_model(scenario, &plant_sol.state, &loaded.settings)?;
    let t = scenario.grid.node(node);
    let d = scenario.excitation.evaluate(t).map_err(anyhow::Error::new)?;
    println!("node {node}: t = {t}, d = {d}");

    let plant_spec = HamiltonianSpec::plant_for(scenario)?;
    let model_spec = HamiltonianSpec::model_for(scenario)?;
    let grid_points = 2001;

    let plant_oracle = plant_spec
        .brute_force_argmin(t, plant_sol.state.value(node), None, plant_sol.costate.value(node), grid_points)
        .context("plant-side oracle")?;
    println!(
        "plant: projection minimizer {}, unconstrained {}, oracle argmin {:?} (min value {})",
        plant_sol.control.value(node)[0],
        plant_sol.unconstrained_control.value(node)[0],
        plant_oracle.points.iter().map(|p| p[0]).collect::<Vec<_>>(),
        plant_oracle.min_value
    );

    let model_oracle = model_spec
        .brute_force_argmin(
            t,
            model_sol.state.value(node),
            Some(plant_sol.state.value(node)),
            model_sol.costate.value(node),
            grid_points,
        )
        .context("model-side oracle")?;
    println!(
        "model: projection minimizer {}, unconstrained {}, oracle argmin {:?} (min value {})",
        model_sol.control.value(node)[0],
        model_sol.unconstrained_control.value(node)[0],
        model_oracle.points.iter().map(|p| p[0]).collect::<Vec<_>>(),
        model_oracle.min_value
    );
    Ok(())
}
