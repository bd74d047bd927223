//! Spiked-covariance data generation and Monte Carlo rate experiments.
//!
//! The population model is a single sparse spike over an operator-norm-
//! bounded complement:
//!
//! ```text
//!     Sigma = sigma1 * theta1 theta1' + sigma2 * Upsilon,
//!     |Upsilon|_op <= 1,  Upsilon theta1 = 0,  sigma1 > sigma2 >= 0,
//! ```
//!
//! with the isotropic complement `Upsilon = I - theta1 theta1'` as the
//! default. Data are i.i.d. centered Gaussians with covariance `Sigma`,
//! and each entry is then revealed independently with probability `delta`.
//!
//! [`run_rate_experiment`] sweeps a grid of `(n, p, s, delta)` cells,
//! estimating the spike from masked data in every replicate and recording
//! how the projector loss tracks the theoretical rate
//! `s * sigma_tilde^2 * log(e p) / (delta^2 n)` where
//! `sigma_tilde = sigma1 / (sigma1 - sigma2)`. Everything is a pure
//! function of the grid's root seed: per-replicate seeds come from
//! [`replicate_seed`], and parallel replicates are reduced in index order,
//! so reruns produce byte-identical reports.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, KvFile};
use crate::covariance::{
    debias_covariance, empirical_covariance, spectral_summary, MaskedSample, SymmetricMatrix,
};
use crate::error::{Error, Result};
use crate::metrics::projector_loss;
use crate::seed;
use crate::solver::{
    data_driven_lambda, default_sbar, solve, theoretical_lambda, SolverConfig, SparseUnitVector,
};

/// How the complement of the spike is filled in.
#[derive(Debug, Clone)]
pub enum UpsilonMode {
    /// `Upsilon = I - theta1 theta1'`: every direction orthogonal to the
    /// spike carries variance exactly `sigma2`.
    IsotropicComplement,
    /// A caller-supplied complement, validated at model construction.
    Custom(SymmetricMatrix),
}

/// Ground-truth spiked covariance model.
#[derive(Debug, Clone)]
pub struct SpikedModel {
    theta1: SparseUnitVector,
    sigma1: f64,
    sigma2: f64,
    upsilon: UpsilonMode,
}

impl SpikedModel {
    /// Spike over the isotropic complement.
    ///
    /// # Errors
    ///
    /// [`Error::NoSpectralGap`] unless `sigma1 > sigma2`, and
    /// [`Error::BadConfig`] for a nonpositive `sigma1` or negative `sigma2`.
    pub fn isotropic(theta1: SparseUnitVector, sigma1: f64, sigma2: f64) -> Result<Self> {
        Self::validate_eigenvalues(sigma1, sigma2)?;
        Ok(Self { theta1, sigma1, sigma2, upsilon: UpsilonMode::IsotropicComplement })
    }

    /// Spike over a custom complement `Upsilon`.
    ///
    /// # Errors
    ///
    /// In addition to the eigenvalue checks of [`SpikedModel::isotropic`]:
    /// [`Error::PerturbationTooLarge`] when the spectral norm of `Upsilon`
    /// exceeds `1 + 1e-10`, [`Error::PerturbationNotOrthogonal`] when
    /// `|Upsilon theta1| > 1e-10`, and a dimension error on shape mismatch.
    pub fn with_custom(
        theta1: SparseUnitVector,
        sigma1: f64,
        sigma2: f64,
        upsilon: SymmetricMatrix,
    ) -> Result<Self> {
        Self::validate_eigenvalues(sigma1, sigma2)?;
        if upsilon.dim() != theta1.dim() {
            return Err(Error::Dimension(format!(
                "complement is {}x{0}, spike lives in dimension {1}",
                upsilon.dim(),
                theta1.dim()
            )));
        }
        let summary = spectral_summary(&upsilon, 0)?;
        let p = upsilon.dim();
        let norm = summary.eigenvalues[0].abs().max(summary.eigenvalues[p - 1].abs());
        if norm > 1.0 + 1e-10 {
            return Err(Error::PerturbationTooLarge(norm));
        }
        let image = upsilon.matvec(&theta1.to_dense());
        let image_norm = image.iter().map(|v| v * v).sum::<f64>().sqrt();
        if image_norm > 1e-10 {
            return Err(Error::PerturbationNotOrthogonal(image_norm));
        }
        Ok(Self { theta1, sigma1, sigma2, upsilon: UpsilonMode::Custom(upsilon) })
    }

    fn validate_eigenvalues(sigma1: f64, sigma2: f64) -> Result<()> {
        if !sigma1.is_finite() || sigma1 <= 0.0 {
            return Err(Error::BadConfig(format!("sigma1 must be positive, got {sigma1}")));
        }
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::BadConfig(format!("sigma2 must be nonnegative, got {sigma2}")));
        }
        if sigma1 <= sigma2 {
            return Err(Error::NoSpectralGap { sigma1, sigma2 });
        }
        Ok(())
    }

    /// Ground-truth spike direction.
    pub fn theta1(&self) -> &SparseUnitVector {
        &self.theta1
    }

    /// Leading eigenvalue.
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    /// Complement scale (second eigenvalue in isotropic mode).
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Ambient dimension.
    pub fn p(&self) -> usize {
        self.theta1.dim()
    }
}

/// Assembles the dense population covariance of a [`SpikedModel`].
///
/// Isotropic mode: `(sigma1 - sigma2) theta theta' + sigma2 I`, whose
/// leading eigenpair is `(sigma1, theta1)` with all other eigenvalues
/// `sigma2`. Exactly symmetric: each entry computed once and mirrored.
pub fn build_spiked(model: &SpikedModel) -> SymmetricMatrix {
    let p = model.p();
    let theta = model.theta1.to_dense();
    let mut entries = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let value = match &model.upsilon {
                UpsilonMode::IsotropicComplement => {
                    (model.sigma1 - model.sigma2) * theta[i] * theta[j]
                        + if i == j { model.sigma2 } else { 0.0 }
                }
                UpsilonMode::Custom(upsilon) => {
                    model.sigma1 * theta[i] * theta[j] + model.sigma2 * upsilon.entry(i, j)
                }
            };
            entries[(i, j)] = value;
            entries[(j, i)] = value;
        }
    }
    SymmetricMatrix::from_parts_unchecked(entries)
}

/// Draws `n` i.i.d. rows from `N(0, sigma)`.
///
/// The symmetric square root comes from the deterministic eigensolver and
/// multiplies a row-major field of standard normals from a ChaCha stream,
/// so output is bit-reproducible for a fixed seed. Eigenvalues in
/// `[-1e-10, 0)` are clamped to zero.
///
/// # Errors
///
/// [`Error::NotPsd`] when an eigenvalue sits below `-1e-10`;
/// [`Error::Dimension`] for `n = 0`.
pub fn sample_gaussian(sigma: &SymmetricMatrix, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::Dimension("need n >= 1".into()));
    }
    let p = sigma.dim();
    let (values, vectors) = crate::eigen::sym_eigen(sigma.view())?;
    if values[p - 1] < -1e-10 {
        return Err(Error::NotPsd(values[p - 1]));
    }
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();

    // Symmetric square root: sum_k sqrt(lambda_k) v_k v_k'. Each entry is
    // the same sum in the same order for (i,j) and (j,i), so the root is
    // exactly symmetric.
    let mut root = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += roots[k] * vectors[(i, k)] * vectors[(j, k)];
            }
            root[(i, j)] = acc;
            root[(j, i)] = acc;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    Ok(z.dot(&root))
}

/// Hides each entry of `x` independently with probability `1 - delta`.
///
/// The mask is a function of `(seed, shape)` alone, never of the data, so
/// distinct seed derivations for data and mask give the independence the
/// masking model assumes. Cells are drawn in row-major order.
///
/// # Errors
///
/// [`Error::BadDelta`] unless `0 < delta <= 1`.
pub fn apply_mask(x: &Array2<f64>, delta: f64, seed: u64) -> Result<MaskedSample> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = Array2::from_shape_simple_fn(x.dim(), || rng.gen::<f64>() < delta);
    MaskedSample::new(x.clone(), mask)
}

/// How ground-truth spikes are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMode {
    /// First `s` coordinates, each `1/sqrt(s)`.
    Flat,
    /// `s` uniformly chosen coordinates with Gaussian weights, normalized.
    SeededRandom,
}

/// Builds an `s`-sparse unit spike in dimension `p`.
///
/// `seed` matters only in [`ThetaMode::SeededRandom`].
///
/// # Errors
///
/// [`Error::BadSparsityBound`] unless `1 <= s <= p`.
pub fn make_sparse_theta(p: usize, s: usize, mode: ThetaMode, seed: u64) -> Result<SparseUnitVector> {
    if s == 0 || s > p {
        return Err(Error::BadSparsityBound { sbar: s, p });
    }
    match mode {
        ThetaMode::Flat => {
            let value = 1.0 / (s as f64).sqrt();
            SparseUnitVector::new(p, (0..s).collect(), vec![value; s])
        }
        ThetaMode::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, p, s).into_vec();
            support.sort_unstable();
            let mut values: Vec<f64> = Vec::with_capacity(s);
            for _ in 0..s {
                // Zero draws would shrink the support; redraw (measure zero).
                loop {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    if v != 0.0 {
                        values.push(v);
                        break;
                    }
                }
            }
            let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in values.iter_mut() {
                *v /= norm;
            }
            SparseUnitVector::new(p, support, values)
        }
    }
}

/// Rate penalty of missingness: estimation error inflates by `delta^-2`.
///
/// # Errors
///
/// [`Error::BadDelta`] unless `0 < delta <= 1`.
pub fn delta_inflation(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    Ok(1.0 / (delta * delta))
}

/// Named random streams of one experiment replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    /// Gaussian data draws.
    Data,
    /// Bernoulli observation mask.
    Mask,
    /// Solver restarts.
    Solver,
}

/// Seed of the `(cell, replicate, stream)` random stream under `root_seed`.
///
/// This is the documented derivation scheme reports refer to: the root is
/// folded with the context words through a splitmix64 chain, so any
/// replicate of any published report can be regenerated in isolation.
pub fn replicate_seed(root_seed: u64, cell: usize, replicate: usize, tag: StreamTag) -> u64 {
    let tag = match tag {
        StreamTag::Data => seed::STREAM_DATA,
        StreamTag::Mask => seed::STREAM_MASK,
        StreamTag::Solver => seed::STREAM_SOLVER,
    };
    seed::derive(root_seed, &[cell as u64, replicate as u64, tag])
}

/// How the penalty level is chosen per replicate.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaRule {
    /// From the model's true eigenvalues.
    Theoretical,
    /// From the eigenvalues of the debiased estimate.
    DataDriven,
    /// A fixed level.
    Fixed(f64),
}

impl std::fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaRule::Theoretical => write!(f, "theoretical"),
            LambdaRule::DataDriven => write!(f, "data_driven"),
            LambdaRule::Fixed(value) => write!(f, "fixed:{value}"),
        }
    }
}

/// Monte Carlo sweep definition.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub n_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub s_values: Vec<usize>,
    pub delta_values: Vec<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub replicates: usize,
    pub root_seed: u64,
    /// Template for per-replicate solver configs; `lambda`, `sbar`, and
    /// `seed` are overwritten per cell/replicate.
    pub solver: SolverConfig,
    /// Fixed support cap; `None` derives it per cell from the sample
    /// budget formula.
    pub sbar_override: Option<usize>,
    pub lambda_rule: LambdaRule,
    /// Scaling constant of the penalty rules.
    pub c: f64,
}

/// Config keys understood by [`ExperimentGrid::from_config_str`].
const GRID_KEYS: &[&str] = &[
    "n", "p", "s", "delta", "sigma1", "sigma2", "replicates", "seed", "lambda_rule", "c",
    "solver", "sbar", "restarts", "max_iterations", "tolerance",
];

impl ExperimentGrid {
    /// Reads a grid from `key = value` config text.
    ///
    /// Required keys: `n`, `p`, `s`, `delta` (comma-separated lists) and
    /// `sigma1`, `sigma2`, `replicates`, `seed`, `lambda_rule` (scalars).
    /// Optional: `c` (default 1), `solver` (default `auto`), `sbar`
    /// (default: per-cell sample-budget formula), `restarts`,
    /// `max_iterations`, `tolerance`. `lambda_rule` is one of
    /// `theoretical`, `data_driven`, or `fixed:<level>`.
    ///
    /// # Errors
    ///
    /// [`Error::Parse`] with a line reference for malformed syntax,
    /// unknown or duplicate keys, and unparseable values;
    /// [`Error::Config`] for missing keys; semantic violations surface as
    /// the same errors [`ExperimentGrid::validate`] raises.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text, GRID_KEYS)?;

        let (line, raw) = kv.require("n")?;
        let n_values = config::list::<usize>(line, "n", raw)?;
        let (line, raw) = kv.require("p")?;
        let p_values = config::list::<usize>(line, "p", raw)?;
        let (line, raw) = kv.require("s")?;
        let s_values = config::list::<usize>(line, "s", raw)?;
        let (line, raw) = kv.require("delta")?;
        let delta_values = config::list::<f64>(line, "delta", raw)?;

        let (line, raw) = kv.require("sigma1")?;
        let sigma1 = config::scalar::<f64>(line, "sigma1", raw)?;
        let (line, raw) = kv.require("sigma2")?;
        let sigma2 = config::scalar::<f64>(line, "sigma2", raw)?;
        let (line, raw) = kv.require("replicates")?;
        let replicates = config::scalar::<usize>(line, "replicates", raw)?;
        let (line, raw) = kv.require("seed")?;
        let root_seed = config::scalar::<u64>(line, "seed", raw)?;

        let (line, raw) = kv.require("lambda_rule")?;
        let lambda_rule = parse_lambda_rule(line, raw)?;

        let c = match kv.optional("c") {
            Some((line, raw)) => config::scalar::<f64>(line, "c", raw)?,
            None => 1.0,
        };

        let mut solver = SolverConfig::new(0.0, 1);
        if let Some((line, raw)) = kv.optional("solver") {
            solver.solver = parse_solver_choice(line, raw)?;
        }
        if let Some((line, raw)) = kv.optional("restarts") {
            solver.restarts = config::scalar::<usize>(line, "restarts", raw)?;
        }
        if let Some((line, raw)) = kv.optional("max_iterations") {
            solver.max_iterations = config::scalar::<usize>(line, "max_iterations", raw)?;
        }
        if let Some((line, raw)) = kv.optional("tolerance") {
            solver.tolerance = config::scalar::<f64>(line, "tolerance", raw)?;
        }
        let sbar_override = match kv.optional("sbar") {
            Some((line, raw)) => Some(config::scalar::<usize>(line, "sbar", raw)?),
            None => None,
        };

        let grid = Self {
            n_values,
            p_values,
            s_values,
            delta_values,
            sigma1,
            sigma2,
            replicates,
            root_seed,
            solver,
            sbar_override,
            lambda_rule,
            c,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Reads a grid config file. See [`ExperimentGrid::from_config_str`].
    pub fn from_config_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Checks grid-level invariants: nonempty lists, `replicates >= 1`,
    /// `sigma1 > sigma2 >= 0`, positive `c`, every `delta` in `(0, 1]`,
    /// every `n`/`p`/`s` at least 1, and a nonnegative fixed penalty.
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty()
            || self.p_values.is_empty()
            || self.s_values.is_empty()
            || self.delta_values.is_empty()
        {
            return Err(Error::Config("grid lists must be nonempty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        SpikedModel::validate_eigenvalues(self.sigma1, self.sigma2)?;
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::BadConfig(format!("scaling constant must be positive, got {}", self.c)));
        }
        for &delta in &self.delta_values {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::BadDelta(delta));
            }
        }
        for &v in self.n_values.iter().chain(&self.p_values).chain(&self.s_values) {
            if v == 0 {
                return Err(Error::Config("n, p, and s values must be at least 1".into()));
            }
        }
        if let LambdaRule::Fixed(level) = self.lambda_rule {
            if !level.is_finite() || level < 0.0 {
                return Err(Error::BadLambda(level));
            }
        }
        Ok(())
    }

    /// Grid cells in report order: `n` outermost, then `p`, `s`, `delta`.
    fn cells(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &p in &self.p_values {
                for &s in &self.s_values {
                    for &delta in &self.delta_values {
                        out.push((n, p, s, delta));
                    }
                }
            }
        }
        out
    }
}

fn parse_lambda_rule(line: usize, raw: &str) -> Result<LambdaRule> {
    match raw {
        "theoretical" => Ok(LambdaRule::Theoretical),
        "data_driven" => Ok(LambdaRule::DataDriven),
        _ => {
            if let Some(value) = raw.strip_prefix("fixed:") {
                let level = config::scalar::<f64>(line, "lambda_rule", value.trim())?;
                Ok(LambdaRule::Fixed(level))
            } else {
                Err(Error::Parse {
                    line,
                    message: format!(
                        "lambda_rule must be `theoretical`, `data_driven`, or `fixed:<level>`, got {raw:?}"
                    ),
                })
            }
        }
    }
}

fn parse_solver_choice(line: usize, raw: &str) -> Result<crate::solver::SolverChoice> {
    use crate::solver::SolverChoice;
    match raw {
        "auto" => Ok(SolverChoice::Auto),
        "exact" => Ok(SolverChoice::Exact),
        "truncated_power" => Ok(SolverChoice::TruncatedPower),
        _ => Err(Error::Parse {
            line,
            message: format!("solver must be `auto`, `exact`, or `truncated_power`, got {raw:?}"),
        }),
    }
}

/// Aggregated result of one grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellRecord {
    /// Cell index in report order.
    pub cell: usize,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub delta: f64,
    /// Support cap the solver ran with; `None` when the cell failed before
    /// one was resolved.
    pub sbar: Option<usize>,
    pub mean_loss: Option<f64>,
    pub loss_stderr: Option<f64>,
    pub recovery_rate: Option<f64>,
    pub mean_iterations: Option<f64>,
    /// Theoretical rate `s * sigma_tilde^2 * log(e p) / (delta^2 n)`.
    pub rate_target: f64,
    pub failed: bool,
    /// Error text for failed cells, empty otherwise.
    pub message: String,
}

/// Report metadata: everything needed to regenerate the report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportMetadata {
    pub root_seed: u64,
    pub replicates: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    /// `sigma1 / (sigma1 - sigma2)`, the gap-normalized spike strength in
    /// the rate target.
    pub sigma_tilde: f64,
    pub lambda_rule: String,
    pub c: f64,
    pub solver: String,
    /// `"auto"` or the fixed support cap.
    pub sbar: String,
    pub n_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub s_values: Vec<usize>,
    pub delta_values: Vec<f64>,
    /// Failed cells with their error text.
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub cell: usize,
    pub message: String,
}

/// A full experiment: per-cell aggregates plus reproduction metadata.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<CellRecord>,
    pub metadata: ReportMetadata,
}

impl ExperimentReport {
    /// Canonical CSV rendering, one row per cell. Failed cells leave their
    /// aggregate columns empty and carry `failed` status; shortest
    /// round-trip float formatting keeps reruns byte-identical.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "cell,n,p,s,delta,sbar,mean_loss,loss_stderr,recovery_rate,mean_iterations,rate_target,status\n",
        );
        for cell in &self.cells {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                cell.cell,
                cell.n,
                cell.p,
                cell.s,
                cell.delta,
                cell.sbar.map(|x| x.to_string()).unwrap_or_default(),
                opt(cell.mean_loss),
                opt(cell.loss_stderr),
                opt(cell.recovery_rate),
                opt(cell.mean_iterations),
                cell.rate_target,
                if cell.failed { "failed" } else { "ok" },
            ));
        }
        out
    }

    /// JSON metadata sidecar (pretty-printed, trailing newline).
    pub fn metadata_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        text.push('\n');
        text
    }
}

/// Per-replicate outcome inside a cell.
struct ReplicateOutcome {
    loss: f64,
    recovered: bool,
    iterations: usize,
}

fn run_replicate(
    grid: &ExperimentGrid,
    cell: usize,
    replicate: usize,
    sigma: &SymmetricMatrix,
    theta1: &SparseUnitVector,
    sbar: usize,
    lambda_cell: Option<f64>,
    n: usize,
    delta: f64,
) -> Result<ReplicateOutcome> {
    let data_seed = replicate_seed(grid.root_seed, cell, replicate, StreamTag::Data);
    let mask_seed = replicate_seed(grid.root_seed, cell, replicate, StreamTag::Mask);
    let solver_seed = replicate_seed(grid.root_seed, cell, replicate, StreamTag::Solver);

    let x = sample_gaussian(sigma, n, data_seed)?;
    let sample = apply_mask(&x, delta, mask_seed)?;
    let tilde = debias_covariance(&empirical_covariance(&sample), delta)?;

    let lambda = match lambda_cell {
        Some(value) => value,
        None => data_driven_lambda(&tilde, n, delta, grid.c, None)?,
    };

    let mut config = grid.solver.clone();
    config.lambda = lambda;
    config.sbar = sbar;
    config.seed = solver_seed;
    let result = solve(&tilde, &config)?;

    let loss = projector_loss(&result.estimate, theta1)?;
    let recovered = result.estimate.support() == theta1.support();
    Ok(ReplicateOutcome { loss, recovered, iterations: result.iterations_used })
}

fn run_cell(
    grid: &ExperimentGrid,
    cell: usize,
    n: usize,
    p: usize,
    s: usize,
    delta: f64,
) -> Result<(usize, Vec<ReplicateOutcome>)> {
    let theta1 = make_sparse_theta(p, s, ThetaMode::Flat, 0)?;
    let model = SpikedModel::isotropic(theta1, grid.sigma1, grid.sigma2)?;
    let sigma = build_spiked(&model);
    let sbar = match grid.sbar_override {
        Some(value) => {
            if value == 0 || value > p {
                return Err(Error::BadSparsityBound { sbar: value, p });
            }
            value
        }
        None => default_sbar(n, p, delta)?,
    };
    let lambda_cell = match grid.lambda_rule {
        LambdaRule::Theoretical => {
            Some(theoretical_lambda(grid.sigma1, grid.sigma2, p, n, delta, grid.c)?)
        }
        LambdaRule::Fixed(value) => Some(value),
        LambdaRule::DataDriven => None,
    };

    // Parallel replicates; collect preserves replicate order, and the
    // sequential fold below keeps aggregation deterministic.
    let outcomes: Vec<Result<ReplicateOutcome>> = (0..grid.replicates)
        .into_par_iter()
        .map(|replicate| {
            run_replicate(grid, cell, replicate, &sigma, model.theta1(), sbar, lambda_cell, n, delta)
        })
        .collect();

    let mut collected = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        collected.push(outcome?);
    }
    Ok((sbar, collected))
}

/// Runs the full grid, invoking `on_cell` after each finished cell (for
/// progress reporting; the callback sees the final record).
///
/// Cell-level failures (budget exhaustion, degenerate spectra, invalid
/// per-cell geometry) are recorded in the report and do not abort the
/// sweep. Deterministic: identical grids produce byte-identical reports.
///
/// # Errors
///
/// Only grid-level validation failures abort the run.
pub fn run_rate_experiment_with<F>(grid: &ExperimentGrid, mut on_cell: F) -> Result<ExperimentReport>
where
    F: FnMut(&CellRecord),
{
    grid.validate()?;
    let sigma_tilde = grid.sigma1 / (grid.sigma1 - grid.sigma2);

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (index, (n, p, s, delta)) in grid.cells().into_iter().enumerate() {
        let rate_target =
            s as f64 * sigma_tilde * sigma_tilde * (1.0 + (p as f64).ln()) / (delta * delta * n as f64);
        let record = match run_cell(grid, index, n, p, s, delta) {
            Ok((sbar, outcomes)) => {
                let r = outcomes.len() as f64;
                let mean_loss = outcomes.iter().map(|o| o.loss).sum::<f64>() / r;
                let loss_stderr = if outcomes.len() > 1 {
                    let var = outcomes
                        .iter()
                        .map(|o| (o.loss - mean_loss) * (o.loss - mean_loss))
                        .sum::<f64>()
                        / (r - 1.0);
                    (var / r).sqrt()
                } else {
                    0.0
                };
                let recovery_rate =
                    outcomes.iter().filter(|o| o.recovered).count() as f64 / r;
                let mean_iterations =
                    outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / r;
                CellRecord {
                    cell: index,
                    n,
                    p,
                    s,
                    delta,
                    sbar: Some(sbar),
                    mean_loss: Some(mean_loss),
                    loss_stderr: Some(loss_stderr),
                    recovery_rate: Some(recovery_rate),
                    mean_iterations: Some(mean_iterations),
                    rate_target,
                    failed: false,
                    message: String::new(),
                }
            }
            Err(err) => {
                let message = err.to_string();
                failures.push(CellFailure { cell: index, message: message.clone() });
                CellRecord {
                    cell: index,
                    n,
                    p,
                    s,
                    delta,
                    sbar: None,
                    mean_loss: None,
                    loss_stderr: None,
                    recovery_rate: None,
                    mean_iterations: None,
                    rate_target,
                    failed: true,
                    message,
                }
            }
        };
        on_cell(&record);
        cells.push(record);
    }

    let metadata = ReportMetadata {
        root_seed: grid.root_seed,
        replicates: grid.replicates,
        sigma1: grid.sigma1,
        sigma2: grid.sigma2,
        sigma_tilde,
        lambda_rule: grid.lambda_rule.to_string(),
        c: grid.c,
        solver: grid.solver.solver.to_string(),
        sbar: grid
            .sbar_override
            .map(|v| v.to_string())
            .unwrap_or_else(|| "auto".to_string()),
        n_values: grid.n_values.clone(),
        p_values: grid.p_values.clone(),
        s_values: grid.s_values.clone(),
        delta_values: grid.delta_values.clone(),
        failures,
    };
    Ok(ExperimentReport { cells, metadata })
}

/// [`run_rate_experiment_with`] without progress reporting.
pub fn run_rate_experiment(grid: &ExperimentGrid) -> Result<ExperimentReport> {
    run_rate_experiment_with(grid, |_| {})
}
