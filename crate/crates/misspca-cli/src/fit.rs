//! `fit`: estimate the leading sparse principal component of one dataset.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use misspca::covariance::{
    debias_covariance, empirical_covariance, estimate_delta, spectral_summary,
};
use misspca::solver::{
    data_driven_lambda, default_sbar, enumeration_fits_budget, solve, theoretical_lambda,
    SolverChoice, SolverConfig,
};
use misspca::MaskedSample;

use crate::Failure;

#[derive(Clone, Debug)]
pub enum DeltaMode {
    Estimate,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub enum LambdaRuleArg {
    Theoretical,
    DataDriven,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub enum SbarMode {
    DefaultFormula,
    Fixed(usize),
    Unconstrained,
}

fn parse_delta_mode(raw: &str) -> Result<DeltaMode, String> {
    if raw == "estimate" {
        return Ok(DeltaMode::Estimate);
    }
    raw.strip_prefix("fixed:")
        .and_then(|v| v.trim().parse().ok())
        .map(DeltaMode::Fixed)
        .ok_or_else(|| format!("expected `estimate` or `fixed:<delta>`, got {raw:?}"))
}

fn parse_lambda_rule(raw: &str) -> Result<LambdaRuleArg, String> {
    match raw {
        "theoretical" => return Ok(LambdaRuleArg::Theoretical),
        "data_driven" => return Ok(LambdaRuleArg::DataDriven),
        _ => {}
    }
    raw.strip_prefix("fixed:")
        .and_then(|v| v.trim().parse().ok())
        .map(LambdaRuleArg::Fixed)
        .ok_or_else(|| {
            format!("expected `theoretical`, `data_driven`, or `fixed:<level>`, got {raw:?}")
        })
}

fn parse_sbar_mode(raw: &str) -> Result<SbarMode, String> {
    match raw {
        "default" => return Ok(SbarMode::DefaultFormula),
        "unconstrained" => return Ok(SbarMode::Unconstrained),
        _ => {}
    }
    raw.strip_prefix("fixed:")
        .and_then(|v| v.trim().parse().ok())
        .map(SbarMode::Fixed)
        .ok_or_else(|| {
            format!("expected `default`, `unconstrained`, or `fixed:<count>`, got {raw:?}")
        })
}

fn parse_solver(raw: &str) -> Result<SolverChoice, String> {
    match raw {
        "auto" => Ok(SolverChoice::Auto),
        "exact" => Ok(SolverChoice::Exact),
        "truncated_power" => Ok(SolverChoice::TruncatedPower),
        _ => Err(format!("expected `auto`, `exact`, or `truncated_power`, got {raw:?}")),
    }
}

#[derive(clap::Args)]
pub struct FitArgs {
    /// CSV of observations, one row per sample; empty, `NA`, and `NaN`
    /// fields (case-insensitive) are missing entries.
    #[arg(long)]
    input_path: PathBuf,
    /// Observation probability: `estimate` or `fixed:<delta>`.
    #[arg(long, default_value = "estimate", value_parser = parse_delta_mode)]
    delta_mode: DeltaMode,
    /// Penalty rule: `theoretical` (needs --sigma1/--sigma2),
    /// `data_driven`, or `fixed:<level>`.
    #[arg(long, default_value = "data_driven", value_parser = parse_lambda_rule)]
    lambda_rule: LambdaRuleArg,
    /// Population spike eigenvalue, for the theoretical penalty rule.
    #[arg(long)]
    sigma1: Option<f64>,
    /// Population complement eigenvalue, for the theoretical penalty rule.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Support cap: `default` (sample-size formula), `fixed:<count>`, or
    /// `unconstrained`.
    #[arg(long, default_value = "default", value_parser = parse_sbar_mode)]
    sbar_mode: SbarMode,
    /// `auto`, `exact`, or `truncated_power`; `auto` goes exact whenever
    /// the enumeration budget admits it.
    #[arg(long, default_value = "auto", value_parser = parse_solver)]
    solver: SolverChoice,
    /// Scaling constant in the penalty rules.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Where to write the JSON result; standard output when omitted.
    #[arg(long)]
    output_path: Option<PathBuf>,
    /// Seed for randomized solver restarts.
    #[arg(long)]
    seed: Option<u64>,
    /// Restarts for the truncated power solver; the first is
    /// deterministic, the rest draw seeded random starts.
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct EstimateJson {
    support: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct SolverJson {
    requested: String,
    resolved: String,
    iterations_used: usize,
    restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Everything `fit` reports. Serialization is canonical: rereading a
/// result file and reserializing reproduces it byte for byte.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct FitOutput {
    n: usize,
    p: usize,
    delta: f64,
    delta_mode: String,
    /// True exactly when `delta == 1`: debiasing left the empirical
    /// covariance untouched.
    debias_identity: bool,
    lambda: f64,
    lambda_rule: String,
    c: f64,
    sbar: usize,
    sigma1_hat: f64,
    sigma2_hat: f64,
    effective_rank: f64,
    objective: f64,
    estimate: EstimateJson,
    solver: SolverJson,
}

fn render(output: &FitOutput) -> String {
    let mut text = serde_json::to_string_pretty(output).expect("fit output serializes");
    text.push('\n');
    text
}

pub fn run(args: &FitArgs) -> Result<(), Failure> {
    let sample = MaskedSample::from_csv_path(&args.input_path)?;
    if sample.n() < 2 {
        return Err(Failure::usage(
            "TOO_FEW_ROWS",
            format!("need at least 2 data rows, got {}", sample.n()),
        ));
    }
    let empty = sample.empty_columns();
    if !empty.is_empty() {
        return Err(Failure::runtime(
            "EMPTY_COLUMN",
            format!("columns with no observed entries: {empty:?}"),
        ));
    }

    let (delta, delta_mode) = match args.delta_mode {
        DeltaMode::Estimate => (estimate_delta(&sample)?, "estimate"),
        DeltaMode::Fixed(value) => {
            if !(value > 0.0 && value <= 1.0) {
                return Err(misspca::Error::BadDelta(value).into());
            }
            (value, "fixed")
        }
    };

    let covariance = empirical_covariance(&sample);
    let tilde = debias_covariance(&covariance, delta)?;
    let summary = spectral_summary(&tilde, 1)?;

    let (n, p) = (sample.n(), sample.p());
    let sbar = match args.sbar_mode {
        SbarMode::DefaultFormula => default_sbar(n, p, delta)?,
        SbarMode::Fixed(value) => {
            if value == 0 || value > p {
                return Err(misspca::Error::BadSparsityBound { sbar: value, p }.into());
            }
            value
        }
        SbarMode::Unconstrained => p,
    };

    let (lambda, lambda_rule) = match args.lambda_rule {
        LambdaRuleArg::Theoretical => {
            let (sigma1, sigma2) = match (args.sigma1, args.sigma2) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Failure::usage(
                        "MISSING_SIGMA",
                        "the theoretical penalty rule needs --sigma1 and --sigma2",
                    ))
                }
            };
            (theoretical_lambda(sigma1, sigma2, p, n, delta, args.c)?, "theoretical".to_string())
        }
        LambdaRuleArg::DataDriven => {
            (data_driven_lambda(&tilde, n, delta, args.c, None)?, "data_driven".to_string())
        }
        LambdaRuleArg::Fixed(level) => (level, format!("fixed:{level}")),
    };

    let mut config = SolverConfig::new(lambda, sbar);
    config.solver = args.solver;
    if let Some(restarts) = args.restarts {
        config.restarts = restarts;
    }
    let uses_random_restarts = config.restarts > 1
        && match args.solver {
            SolverChoice::Exact => false,
            SolverChoice::TruncatedPower => true,
            SolverChoice::Auto => !enumeration_fits_budget(p, sbar, config.enumeration_budget),
        };
    match args.seed {
        Some(seed) => config.seed = seed,
        None if uses_random_restarts => {
            return Err(Failure::usage(
                "MISSING_SEED",
                "the truncated power solver draws random restarts; pass --seed (or --restarts 1)",
            ))
        }
        None => {}
    }
    config.validate(p)?;

    let result = solve(&tilde, &config)?;

    let output = FitOutput {
        n,
        p,
        delta,
        delta_mode: delta_mode.to_string(),
        debias_identity: delta == 1.0,
        lambda,
        lambda_rule,
        c: args.c,
        sbar,
        sigma1_hat: summary.sigma1(),
        sigma2_hat: summary.sigma2(),
        effective_rank: summary.effective_rank,
        objective: result.objective,
        estimate: EstimateJson {
            support: result.estimate.support().to_vec(),
            values: result.estimate.values().to_vec(),
        },
        solver: SolverJson {
            requested: args.solver.to_string(),
            resolved: result.solver_kind.to_string(),
            iterations_used: result.iterations_used,
            restarts: config.restarts,
            seed: args.seed,
        },
    };

    let text = render(&output);
    match &args.output_path {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
