//! l0-penalized leading eigenvector search.
//!
//! All solvers maximize the penalized Rayleigh quotient
//!
//! ```text
//!     f(theta) = theta' M theta - lambda * |theta|_0
//! ```
//!
//! over unit vectors `theta` with at most `sbar` nonzero entries, where `M`
//! is typically a debiased covariance estimate. For a fixed support `J` the
//! best unit vector is the leading eigenvector of the principal submatrix
//! `M[J, J]`, so the exact solver reduces to enumerating supports:
//! feasible whenever `sum_{s <= sbar} C(p, s)` fits the evaluation budget.
//! [`truncated_power_l0_pca`] scales past that point by interleaving power
//! steps with hard thresholding, trading the global guarantee for
//! monotone local ascent from several starts.
//!
//! Penalty levels are not free parameters here: [`theoretical_lambda`]
//! computes the level dictated by the model's spectral gap and the
//! observation probability, and [`data_driven_lambda`] plugs in the
//! eigenvalues of the estimate itself when the model is unknown.

use serde::Serialize;

use crate::covariance::{canonicalize_sign, spectral_summary, SymmetricMatrix};
use crate::eigen::sym_eigen;
use crate::error::{Error, Result};
use crate::seed;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Default cap on submatrix eigenproblems the exact solver may attempt.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 2_000_000;

/// Unit vector stored by its support.
///
/// Invariants, enforced at construction: the support is strictly
/// increasing with every index below `dim`, stored values are finite and
/// nonzero, the Euclidean norm is 1 within 1e-12, and the sign is
/// canonical: the largest-magnitude entry is positive (earliest such entry
/// on ties). Canonical signs make equal subspaces compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseUnitVector {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseUnitVector {
    /// Builds a vector from explicit support and values, flipping the sign
    /// to canonical form if needed.
    ///
    /// # Errors
    ///
    /// [`Error::BadVector`] for an empty support, unsorted or out-of-range
    /// indices, zero or non-finite values, mismatched lengths, or a norm
    /// farther than 1e-12 from 1.
    pub fn new(dim: usize, support: Vec<usize>, mut values: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::BadVector("support is empty".into()));
        }
        if support.len() != values.len() {
            return Err(Error::BadVector(format!(
                "support has {} indices but {} values",
                support.len(),
                values.len()
            )));
        }
        for window in support.windows(2) {
            if window[0] >= window[1] {
                return Err(Error::BadVector(format!(
                    "support indices not strictly increasing: {} then {}",
                    window[0], window[1]
                )));
            }
        }
        if *support.last().unwrap() >= dim {
            return Err(Error::BadVector(format!(
                "support index {} out of range for dimension {}",
                support.last().unwrap(),
                dim
            )));
        }
        for &v in &values {
            if !v.is_finite() || v == 0.0 {
                return Err(Error::BadVector(format!("value {v} is zero or not finite")));
            }
        }
        let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::BadVector(format!("norm is {norm}, expected 1")));
        }
        canonicalize_sign(&mut values);
        Ok(Self { dim, support, values })
    }

    /// Builds from a dense vector: exact zeros are dropped, the rest is
    /// normalized and sign-canonicalized.
    pub(crate) fn from_dense(dense: &[f64]) -> Result<Self> {
        let mut support = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                support.push(i);
                values.push(v);
            }
        }
        let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::BadVector(format!("cannot normalize vector of norm {norm}")));
        }
        for v in values.iter_mut() {
            *v /= norm;
        }
        canonicalize_sign(&mut values);
        Ok(Self { dim: dense.len(), support, values })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nonzero entries.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Nonzero positions, strictly increasing.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Values at the support positions.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dense copy with zeros off the support.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            dense[i] = v;
        }
        dense
    }

    /// Inner product with another sparse vector of the same dimension.
    pub fn dot(&self, other: &SparseUnitVector) -> f64 {
        let mut acc = 0.0;
        let (mut a, mut b) = (0, 0);
        while a < self.support.len() && b < other.support.len() {
            match self.support[a].cmp(&other.support[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Quadratic form `theta' M theta`, touching only support entries.
    pub fn quad(&self, m: &SymmetricMatrix) -> f64 {
        let mut acc = 0.0;
        for (a, &i) in self.support.iter().enumerate() {
            let mut row = 0.0;
            for (b, &j) in self.support.iter().enumerate() {
                row += m.entry(i, j) * self.values[b];
            }
            acc += self.values[a] * row;
        }
        acc
    }
}

/// Which solver a caller wants; `Auto` resolves to the exact solver when
/// the enumeration budget admits it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Auto,
    Exact,
    TruncatedPower,
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverChoice::Auto => write!(f, "auto"),
            SolverChoice::Exact => write!(f, "exact"),
            SolverChoice::TruncatedPower => write!(f, "truncated_power"),
        }
    }
}

/// Which algorithm actually produced a [`SolverResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    TruncatedPower,
    OracleConstrained,
    OneSparse,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverKind::Exact => write!(f, "exact"),
            SolverKind::TruncatedPower => write!(f, "truncated_power"),
            SolverKind::OracleConstrained => write!(f, "oracle_constrained"),
            SolverKind::OneSparse => write!(f, "one_sparse"),
        }
    }
}

/// Tuning knobs shared by the solvers.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Penalty per nonzero entry, `>= 0`.
    pub lambda: f64,
    /// Hard cap on the support size, `1..=p`.
    pub sbar: usize,
    /// Power steps allowed per restart of the truncated solver.
    pub max_iterations: usize,
    /// Minimum objective gain for a power step to count as progress.
    pub tolerance: f64,
    /// Number of starts for the truncated solver; the first is the
    /// deterministic diagonal-thresholding start, the rest are seeded
    /// random sparse directions.
    pub restarts: usize,
    /// Seed for the random restarts.
    pub seed: u64,
    /// Cap on submatrix evaluations for the exact path.
    pub enumeration_budget: u64,
    /// Requested solver; consulted by [`solve`] only.
    pub solver: SolverChoice,
}

impl SolverConfig {
    /// Config with conventional defaults for the iterative knobs.
    pub fn new(lambda: f64, sbar: usize) -> Self {
        Self {
            lambda,
            sbar,
            max_iterations: 200,
            tolerance: 1e-10,
            restarts: 8,
            seed: 0,
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            solver: SolverChoice::Auto,
        }
    }

    /// Checks the knobs against problem dimension `p`.
    ///
    /// # Errors
    ///
    /// [`Error::BadLambda`], [`Error::BadSparsityBound`], or
    /// [`Error::BadConfig`] naming the offending field.
    pub fn validate(&self, p: usize) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::BadLambda(self.lambda));
        }
        if self.sbar == 0 || self.sbar > p {
            return Err(Error::BadSparsityBound { sbar: self.sbar, p });
        }
        if self.max_iterations == 0 {
            return Err(Error::BadConfig("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::BadConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.restarts == 0 {
            return Err(Error::BadConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolverResult {
    /// The maximizing sparse unit vector.
    pub estimate: SparseUnitVector,
    /// Penalized objective of `estimate`: `theta' M theta - lambda |theta|_0`.
    pub objective: f64,
    /// Supports evaluated (enumeration solvers) or power steps taken across
    /// all restarts (truncated solver).
    pub iterations_used: usize,
    /// Algorithm that produced the result.
    pub solver_kind: SolverKind,
}

/// `sum_{s=1}^{smax} C(p, s)`, saturating.
pub(crate) fn count_supports(p: usize, smax: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 1..=smax.min(p) {
        binom = binom
            .saturating_mul((p - s + 1) as u128)
            .checked_div(s as u128)
            .unwrap_or(u128::MAX);
        total = total.saturating_add(binom);
    }
    total
}

fn check_budget(p: usize, smax: usize, budget: u64) -> Result<()> {
    let needed = count_supports(p, smax);
    if needed > budget as u128 {
        return Err(Error::EnumerationBudget { needed, budget });
    }
    Ok(())
}

/// Shared enumeration core of [`exact_l0_pca`] and [`oracle_constrained_pca`].
///
/// Walks supports in ascending size then lexicographic order and keeps the
/// first strict maximizer, which implements the tie-break rule: smaller
/// support wins, then the lexicographically earlier one.
fn enumerate_best(
    matrix: &SymmetricMatrix,
    lambda: f64,
    sbar: usize,
    budget: u64,
    kind: SolverKind,
) -> Result<SolverResult> {
    let p = matrix.dim();
    check_budget(p, sbar, budget)?;

    let mut evaluated = 0usize;
    let mut best_objective = f64::NEG_INFINITY;
    let mut best_support: Vec<usize> = Vec::new();
    let mut best_vector: Vec<f64> = Vec::new();

    for s in 1..=sbar {
        for support in (0..p).combinations(s) {
            evaluated += 1;
            let (top_value, top_vector) = if s == 1 {
                (matrix.entry(support[0], support[0]), vec![1.0])
            } else {
                let sub = matrix.principal_submatrix(&support);
                let (values, vectors) = sym_eigen(sub.view())?;
                (values[0], (0..s).map(|r| vectors[(r, 0)]).collect())
            };
            let objective = top_value - lambda * s as f64;
            if objective > best_objective {
                best_objective = objective;
                best_support = support;
                best_vector = top_vector;
            }
        }
    }

    let mut dense = vec![0.0; p];
    for (&i, &v) in best_support.iter().zip(&best_vector) {
        dense[i] = v;
    }
    let estimate = SparseUnitVector::from_dense(&dense)?;
    let objective = estimate.quad(matrix) - lambda * estimate.sparsity() as f64;
    Ok(SolverResult { estimate, objective, iterations_used: evaluated, solver_kind: kind })
}

/// Global maximizer of the penalized objective by support enumeration.
///
/// Exact up to the per-support eigensolve. Deterministic: ties in the
/// objective go to the smaller support, then the lexicographically
/// earlier one, so repeated calls are bit-identical.
///
/// # Errors
///
/// [`Error::EnumerationBudget`] when `sum_{s <= sbar} C(p, s)` exceeds
/// `config.enumeration_budget`; validation errors for bad `lambda`/`sbar`.
pub fn exact_l0_pca(matrix: &SymmetricMatrix, config: &SolverConfig) -> Result<SolverResult> {
    config.validate(matrix.dim())?;
    enumerate_best(matrix, config.lambda, config.sbar, config.enumeration_budget, SolverKind::Exact)
}

/// Constrained (unpenalized) maximizer: the best unit vector with at most
/// `config.sbar` nonzeros, `config.lambda` ignored.
///
/// This is the benchmark an oracle with complete knowledge of the sparsity
/// level would compute; penalized solvers are judged against it.
///
/// # Errors
///
/// As for [`exact_l0_pca`].
pub fn oracle_constrained_pca(matrix: &SymmetricMatrix, config: &SolverConfig) -> Result<SolverResult> {
    let mut unpenalized = config.clone();
    unpenalized.lambda = 0.0;
    unpenalized.validate(matrix.dim())?;
    enumerate_best(matrix, 0.0, config.sbar, config.enumeration_budget, SolverKind::OracleConstrained)
}

/// Best single coordinate: `argmax_j M[j, j]`, ties to the lowest index.
///
/// The cheapest member of the family; useful when the spike is believed to
/// sit on one coordinate. Objective carries no penalty.
pub fn one_sparse_selector(matrix: &SymmetricMatrix) -> SolverResult {
    let p = matrix.dim();
    let mut best = 0;
    for j in 1..p {
        if matrix.entry(j, j) > matrix.entry(best, best) {
            best = j;
        }
    }
    let estimate = SparseUnitVector::new(p, vec![best], vec![1.0]).expect("basis vector is valid");
    SolverResult {
        objective: matrix.entry(best, best),
        estimate,
        iterations_used: p,
        solver_kind: SolverKind::OneSparse,
    }
}

/// One candidate start for the truncated solver, as a dense unit vector.
fn truncated_start(matrix: &SymmetricMatrix, config: &SolverConfig, restart: usize) -> Result<Vec<f64>> {
    let p = matrix.dim();
    if restart == 0 {
        // Diagonal thresholding: restrict to the sbar largest diagonal
        // entries and take the leading eigenvector there.
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| matrix.entry(b, b).total_cmp(&matrix.entry(a, a)).then(a.cmp(&b)));
        let mut support: Vec<usize> = order[..config.sbar].to_vec();
        support.sort_unstable();
        let sub = matrix.principal_submatrix(&support);
        let (_, vectors) = sym_eigen(sub.view())?;
        let mut dense = vec![0.0; p];
        for (r, &i) in support.iter().enumerate() {
            dense[i] = vectors[(r, 0)];
        }
        Ok(dense)
    } else {
        let stream = seed::derive(config.seed, &[seed::STREAM_SOLVER, restart as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let chosen = rand::seq::index::sample(&mut rng, p, config.sbar);
        let mut dense = vec![0.0; p];
        for i in chosen.iter() {
            let v: f64 = StandardNormal.sample(&mut rng);
            dense[i] = v;
        }
        let norm: f64 = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Astronomically unlikely; fall back to the first basis vector.
            dense[0] = 1.0;
        } else {
            for v in dense.iter_mut() {
                *v /= norm;
            }
        }
        Ok(dense)
    }
}

/// Penalized objective of the best `s`-sparse truncation of `w`, for each
/// `s` in `1..=sbar`, returning the winning truncation as a dense vector
/// together with its objective. Smaller `s` wins ties.
fn best_truncation(
    matrix: &SymmetricMatrix,
    lambda: f64,
    sbar: usize,
    w: &[f64],
) -> (Vec<f64>, f64) {
    let p = w.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));

    let mut best_objective = f64::NEG_INFINITY;
    let mut best_s = 1;
    for s in 1..=sbar {
        let kept = &order[..s];
        let norm_sq: f64 = kept.iter().map(|&i| w[i] * w[i]).sum();
        if norm_sq == 0.0 {
            break;
        }
        let mut quad = 0.0;
        for &i in kept {
            let mut row = 0.0;
            for &j in kept {
                row += matrix.entry(i, j) * w[j];
            }
            quad += w[i] * row;
        }
        let nonzeros = kept.iter().filter(|&&i| w[i] != 0.0).count();
        let objective = quad / norm_sq - lambda * nonzeros as f64;
        if objective > best_objective {
            best_objective = objective;
            best_s = s;
        }
    }

    let kept = &order[..best_s];
    let norm: f64 = kept.iter().map(|&i| w[i] * w[i]).sum::<f64>().sqrt();
    let mut dense = vec![0.0; p];
    for &i in kept {
        dense[i] = w[i] / norm;
    }
    (dense, best_objective)
}

/// One restart of the truncated power ascent. Returns the final iterate,
/// its objective, the number of power steps, and the recorded objective
/// trace (non-decreasing by construction: a step that fails to improve by
/// `tolerance` ends the run instead of being accepted).
fn truncated_power_single(
    matrix: &SymmetricMatrix,
    config: &SolverConfig,
    start: Vec<f64>,
) -> (Vec<f64>, f64, usize, Vec<f64>) {
    let p = matrix.dim();
    // Gershgorin shift making the iteration matrix positive definite, so
    // power steps ascend; the shift adds the same constant to every unit
    // vector's quadratic form and cancels from all comparisons.
    let mut shift: f64 = 0.0;
    for i in 0..p {
        let row: f64 = (0..p).map(|j| matrix.entry(i, j).abs()).sum();
        shift = shift.max(row);
    }
    shift += 1.0;

    let nonzeros = start.iter().filter(|&&v| v != 0.0).count();
    let quad: f64 = {
        let mv = matrix.matvec(&start);
        start.iter().zip(&mv).map(|(a, b)| a * b).sum()
    };
    let mut objective = quad - config.lambda * nonzeros as f64;
    let mut iterate = start;
    let mut trace = vec![objective];
    let mut steps = 0;

    for _ in 0..config.max_iterations {
        steps += 1;
        let mut w = matrix.matvec(&iterate);
        for (wi, vi) in w.iter_mut().zip(&iterate) {
            *wi += shift * vi;
        }
        let (candidate, candidate_objective) = best_truncation(matrix, config.lambda, config.sbar, &w);
        if candidate_objective > objective + config.tolerance {
            iterate = candidate;
            objective = candidate_objective;
            trace.push(objective);
        } else {
            break;
        }
    }
    (iterate, objective, steps, trace)
}

/// Truncated power iteration with restarts.
///
/// Each restart alternates a shifted power step with the best penalized
/// hard truncation over all support sizes up to `config.sbar`; the run
/// stops once a step fails to improve the objective by `config.tolerance`,
/// so the recorded objective sequence never decreases. The first start is
/// deterministic (diagonal thresholding), the remaining
/// `config.restarts - 1` are random sparse directions drawn from
/// `config.seed`; ties across restarts go to the earliest. Feasible output,
/// never better than [`exact_l0_pca`] on the same problem.
///
/// # Errors
///
/// Validation errors for bad `lambda`, `sbar`, or iteration knobs.
pub fn truncated_power_l0_pca(matrix: &SymmetricMatrix, config: &SolverConfig) -> Result<SolverResult> {
    config.validate(matrix.dim())?;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut total_steps = 0;
    for restart in 0..config.restarts {
        let start = truncated_start(matrix, config, restart)?;
        let (iterate, objective, steps, _trace) = truncated_power_single(matrix, config, start);
        total_steps += steps;
        if best.as_ref().is_none_or(|(b, _)| objective > *b) {
            best = Some((objective, iterate));
        }
    }

    let (_, dense) = best.expect("at least one restart");
    let estimate = SparseUnitVector::from_dense(&dense)?;
    let objective = estimate.quad(matrix) - config.lambda * estimate.sparsity() as f64;
    Ok(SolverResult {
        estimate,
        objective,
        iterations_used: total_steps,
        solver_kind: SolverKind::TruncatedPower,
    })
}

/// Whether exhaustive support enumeration at dimension `p` and support cap
/// `sbar` fits within `budget` evaluations. The `Auto` dispatch picks the
/// exact solver precisely when this holds.
pub fn enumeration_fits_budget(p: usize, sbar: usize, budget: u64) -> bool {
    count_supports(p, sbar) <= budget as u128
}

/// Dispatches on `config.solver`; `Auto` means exact when the enumeration
/// budget admits it, truncated power otherwise.
pub fn solve(matrix: &SymmetricMatrix, config: &SolverConfig) -> Result<SolverResult> {
    match config.solver {
        SolverChoice::Exact => exact_l0_pca(matrix, config),
        SolverChoice::TruncatedPower => truncated_power_l0_pca(matrix, config),
        SolverChoice::Auto => {
            if enumeration_fits_budget(matrix.dim(), config.sbar, config.enumeration_budget) {
                exact_l0_pca(matrix, config)
            } else {
                truncated_power_l0_pca(matrix, config)
            }
        }
    }
}

/// Penalty level from known model parameters:
///
/// ```text
///     lambda = c * sigma1^2 / (sigma1 - sigma2) * log(e p) / (delta^2 n)
/// ```
///
/// `sigma1` and `sigma2` are the two largest covariance eigenvalues.
///
/// # Errors
///
/// [`Error::NoSpectralGap`] when `sigma1 <= sigma2`; validation errors for
/// `delta`, `c`, `n`, or `p` out of range.
pub fn theoretical_lambda(
    sigma1: f64,
    sigma2: f64,
    p: usize,
    n: usize,
    delta: f64,
    c: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if n == 0 || p == 0 {
        return Err(Error::Dimension(format!("need n >= 1 and p >= 1, got n={n}, p={p}")));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::BadConfig(format!("scaling constant must be positive, got {c}")));
    }
    if !sigma1.is_finite() || !sigma2.is_finite() || sigma1 <= sigma2 {
        return Err(Error::NoSpectralGap { sigma1, sigma2 });
    }
    let log_ep = 1.0 + (p as f64).ln();
    Ok(c * sigma1 * sigma1 / (sigma1 - sigma2) * log_ep / (delta * delta * n as f64))
}

/// Penalty level from the estimate itself: the two largest eigenvalues of
/// `matrix` replace the unknown model eigenvalues in the formula of
/// [`theoretical_lambda`].
///
/// `gap_floor` guards against division by a vanishing estimated gap;
/// `None` means `1e-8 * sigma1_hat`.
///
/// # Errors
///
/// [`Error::GapBelowFloor`] when the estimated gap is at or below the
/// floor; [`Error::Dimension`] when `p < 2`; parameter validation as for
/// [`theoretical_lambda`].
pub fn data_driven_lambda(
    matrix: &SymmetricMatrix,
    n: usize,
    delta: f64,
    c: f64,
    gap_floor: Option<f64>,
) -> Result<f64> {
    let p = matrix.dim();
    if p < 2 {
        return Err(Error::Dimension("gap estimation needs p >= 2".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if n == 0 {
        return Err(Error::Dimension("need n >= 1".into()));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::BadConfig(format!("scaling constant must be positive, got {c}")));
    }
    let summary = spectral_summary(matrix, 0)?;
    let (s1, s2) = (summary.sigma1(), summary.sigma2());
    let floor = gap_floor.unwrap_or(1e-8 * s1);
    let gap = s1 - s2;
    if gap <= floor {
        return Err(Error::GapBelowFloor { gap, floor });
    }
    let log_ep = 1.0 + (p as f64).ln();
    Ok(c * s1 * s1 / gap * log_ep / (delta * delta * n as f64))
}

/// Default support cap from the sample budget:
/// `min(p, floor(delta^2 n / log(e p)) - 1)`.
///
/// The quantity `delta^2 n / log(e p)` is the effective sample size per
/// coordinate of support; one unit is reserved so the cap stays strictly
/// inside the budget.
///
/// # Errors
///
/// [`Error::SampleTooSmall`] when `delta^2 n / log(e p) <= 2`, where no
/// nontrivial cap exists; validation errors for `delta`, `n`, `p`.
pub fn default_sbar(n: usize, p: usize, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if n == 0 || p == 0 {
        return Err(Error::Dimension(format!("need n >= 1 and p >= 1, got n={n}, p={p}")));
    }
    let log_ep = 1.0 + (p as f64).ln();
    let budget = delta * delta * n as f64 / log_ep;
    if budget <= 2.0 {
        return Err(Error::SampleTooSmall(budget));
    }
    Ok((budget.floor() as usize - 1).min(p))
}
