//! `simulate`: Monte Carlo rate experiment over a grid config file.

use std::path::PathBuf;

use misspca::simulation::run_rate_experiment_with;
use misspca::ExperimentGrid;

use crate::Failure;

#[derive(clap::Args)]
pub struct SimulateArgs {
    /// Grid config file (`key = value` lines).
    config_path: PathBuf,
    /// Report CSV path; the JSON metadata sidecar lands next to it with a
    /// `.json` extension.
    #[arg(long)]
    output_path: PathBuf,
}

pub fn run(args: &SimulateArgs) -> Result<(), Failure> {
    let grid = ExperimentGrid::from_config_path(&args.config_path)?;
    let total = grid.n_values.len()
        * grid.p_values.len()
        * grid.s_values.len()
        * grid.delta_values.len();

    // Cell failures are already recorded in the report; the run itself
    // still succeeds.
    let report = run_rate_experiment_with(&grid, |cell| {
        eprintln!(
            "cell {}/{}: n={} p={} s={} delta={} {}",
            cell.cell + 1,
            total,
            cell.n,
            cell.p,
            cell.s,
            cell.delta,
            if cell.failed { "failed" } else { "ok" }
        );
    })?;

    std::fs::write(&args.output_path, report.to_csv_string())?;
    std::fs::write(args.output_path.with_extension("json"), report.metadata_json())?;
    Ok(())
}
