//! `deviation`: tabulate the sparse deviation process against its
//! envelope for one simulated dataset.

use std::path::PathBuf;

use serde::Serialize;

use misspca::DeviationStudy;

use crate::Failure;

#[derive(clap::Args)]
pub struct DeviationArgs {
    /// Study config file (`key = value` lines).
    config_path: PathBuf,
    /// Profile CSV path; the JSON metadata sidecar lands next to it with a
    /// `.json` extension.
    #[arg(long)]
    output_path: PathBuf,
}

/// Sidecar describing the dataset the profile was measured on.
#[derive(Serialize)]
struct StudyMetadata {
    n: usize,
    p: usize,
    s: usize,
    sigma1: f64,
    sigma2: f64,
    delta: f64,
    seed: u64,
    t: f64,
    s_min: usize,
    s_max: usize,
}

pub fn run(args: &DeviationArgs) -> Result<(), Failure> {
    let study = DeviationStudy::from_config_path(&args.config_path)?;
    let profile = study.run()?;

    let model = &study.config.model;
    let metadata = StudyMetadata {
        n: study.config.n,
        p: model.p(),
        s: model.theta1().sparsity(),
        sigma1: model.sigma1(),
        sigma2: model.sigma2(),
        delta: study.config.delta,
        seed: study.config.seed,
        t: study.t,
        s_min: study.s_min,
        s_max: study.s_max,
    };
    let mut sidecar = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    sidecar.push('\n');

    std::fs::write(&args.output_path, profile.to_csv_string())?;
    std::fs::write(args.output_path.with_extension("json"), sidecar)?;
    Ok(())
}
