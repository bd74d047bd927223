//! Loss functions and deviation-process measurements.
//!
//! Two quantities drive every experiment in this crate. The projector loss
//!
//! ```text
//!     d(a, b)^2 = |a a' - b b'|_F^2 = 2 - 2 (a'b)^2
//! ```
//!
//! compares estimated and true principal directions independently of sign.
//! The sparse deviation
//!
//! ```text
//!     Z_n(s) = max over |J| = s of the spectral norm of (S - Sigma)[J, J]
//! ```
//!
//! measures how far a covariance estimate strays from its target over all
//! `s`-sparse directions at once; its theoretical envelope is
//! [`zeta_bound`], and [`deviation_profile`] tabulates measured deviation
//! against that envelope on simulated data. The multiplicative constants in
//! the envelope are unidentifiable, so the profile reports the ratio
//! `Z_n(s) / (sigma_max(s) * zeta)` and tests assert only its stability.

use std::ops::RangeInclusive;

use crate::config::{self, KvFile};
use crate::covariance::{debias_covariance, empirical_covariance, SymmetricMatrix};
use crate::eigen::sym_eigen;
use crate::error::{Error, Result};
use crate::seed;
use crate::simulation::{apply_mask, build_spiked, sample_gaussian, SpikedModel};
use crate::solver::{SparseUnitVector, DEFAULT_ENUMERATION_BUDGET};

use itertools::Itertools;

/// Squared projector distance `2 - 2 (a'b)^2`, clamped below at zero to
/// absorb rounding when the directions all but coincide.
///
/// Equals the squared Frobenius distance between the rank-1 projectors
/// `a a'` and `b b'`; in particular it is symmetric, sign-invariant, zero
/// exactly on equal directions, and at most 2.
///
/// # Errors
///
/// [`Error::Dimension`] when the ambient dimensions differ.
pub fn projector_loss(a: &SparseUnitVector, b: &SparseUnitVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "projector loss needs equal dimensions, got {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let overlap = a.dot(b);
    Ok((2.0 - 2.0 * overlap * overlap).max(0.0))
}

/// Measured deviation `Z_n(s)`: the largest spectral norm of any `s x s`
/// principal submatrix of `sigma_hat - sigma_true`.
///
/// Exact by enumeration of all `C(p, s)` supports, each resolved with a
/// symmetric eigendecomposition (spectral norm = largest `|eigenvalue|`).
///
/// # Errors
///
/// [`Error::Dimension`] on mismatched inputs, [`Error::BadSparsityBound`]
/// for `s` outside `1..=p`, [`Error::EnumerationBudget`] when `C(p, s)`
/// exceeds the enumeration budget.
pub fn sparse_deviation(
    sigma_hat: &SymmetricMatrix,
    sigma_true: &SymmetricMatrix,
    s: usize,
) -> Result<f64> {
    if sigma_hat.dim() != sigma_true.dim() {
        return Err(Error::Dimension(format!(
            "deviation needs equal dimensions, got {} and {}",
            sigma_hat.dim(),
            sigma_true.dim()
        )));
    }
    let difference = sigma_hat.sub(sigma_true)?;
    max_over_supports(&difference, s, true)
}

/// `max over |J| = s` of either the spectral norm (`absolute = true`) or
/// the largest eigenvalue (`absolute = false`) of `matrix[J, J]`.
fn max_over_supports(matrix: &SymmetricMatrix, s: usize, absolute: bool) -> Result<f64> {
    let p = matrix.dim();
    if s == 0 || s > p {
        return Err(Error::BadSparsityBound { sbar: s, p });
    }
    let needed = binomial(p, s);
    if needed > DEFAULT_ENUMERATION_BUDGET as u128 {
        return Err(Error::EnumerationBudget { needed, budget: DEFAULT_ENUMERATION_BUDGET });
    }

    let mut best = f64::NEG_INFINITY;
    for support in (0..p).combinations(s) {
        let sub = matrix.principal_submatrix(&support);
        let (values, _) = sym_eigen(sub.view())?;
        let candidate = if absolute {
            values[0].abs().max(values[s - 1].abs())
        } else {
            values[0]
        };
        best = best.max(candidate);
    }
    Ok(best)
}

/// Largest variance captured by any `s`-sparse unit direction,
/// `sigma_max(s) = max over |J| = s of lambda_max(sigma[J, J])`.
pub(crate) fn sparse_sigma_max(sigma: &SymmetricMatrix, s: usize) -> Result<f64> {
    max_over_supports(sigma, s, false)
}

fn binomial(p: usize, s: usize) -> u128 {
    let mut value: u128 = 1;
    for k in 1..=s {
        value = value.saturating_mul((p - k + 1) as u128) / k as u128;
    }
    value
}

/// Theoretical deviation envelope
///
/// ```text
///     zeta(s, p, t, delta, n) = max( sqrt(u), u ),
///     u = (t + s log(e p / s)) / (delta^2 n)
/// ```
///
/// with natural logarithms. The square-root branch dominates in the
/// moderate-sample regime, the linear branch for tiny `delta^2 n`.
///
/// # Errors
///
/// [`Error::BadSparsityBound`] for `s` outside `1..=p`,
/// [`Error::BadDelta`], [`Error::Dimension`] for `n = 0`, or
/// [`Error::BadConfig`] for a negative or non-finite `t`.
pub fn zeta_bound(s: usize, p: usize, t: f64, delta: f64, n: usize) -> Result<f64> {
    if s == 0 || s > p {
        return Err(Error::BadSparsityBound { sbar: s, p });
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if n == 0 {
        return Err(Error::Dimension("need n >= 1".into()));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::BadConfig(format!("confidence parameter t must be nonnegative, got {t}")));
    }
    let u = (t + s as f64 * (1.0 + (p as f64 / s as f64).ln())) / (delta * delta * n as f64);
    Ok(u.sqrt().max(u))
}

/// One simulated dataset for a deviation study: the spiked population, the
/// sample size, the observation probability, and the root seed for the
/// data and mask streams.
#[derive(Debug, Clone)]
pub struct DeviationConfig {
    pub model: SpikedModel,
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
}

/// Deviation measurements against the theoretical envelope, one row per
/// support size.
#[derive(Debug, Clone)]
pub struct DeviationProfile {
    /// Support sizes, ascending.
    pub s_values: Vec<usize>,
    /// Measured `Z_n(s)` at exactly size-`s` supports.
    pub z_values: Vec<f64>,
    /// Running maximum of `z_values`; the deviation over supports of size
    /// at most `s`, monotone by construction and the better plotting curve.
    pub z_running_max: Vec<f64>,
    /// Envelope `zeta(s, p, t, delta, n)` per support size.
    pub bound_values: Vec<f64>,
    /// Population prefactor `sigma_max(s)` per support size.
    pub sigma_max_values: Vec<f64>,
    /// `z / (sigma_max * zeta)`; the envelope's unidentifiable constant.
    pub ratio_values: Vec<f64>,
    /// Confidence parameter the envelope was evaluated at.
    pub t: f64,
}

impl DeviationProfile {
    /// Canonical CSV rendering: header `s,z,zeta,sigma_max,ratio`, one row
    /// per support size, shortest round-trip float formatting.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("s,z,zeta,sigma_max,ratio\n");
        for (i, &s) in self.s_values.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s, self.z_values[i], self.bound_values[i], self.sigma_max_values[i], self.ratio_values[i]
            ));
        }
        out
    }
}

/// Simulates one masked dataset from `config`, debiases its covariance,
/// and tabulates measured deviation, envelope, and population prefactor
/// for every support size in `s_range`.
///
/// Data and mask use independently derived streams, so the profile is a
/// pure function of `config`.
///
/// # Errors
///
/// Validation errors for an empty or out-of-range `s_range`, plus anything
/// [`sparse_deviation`] or the generator can raise.
pub fn deviation_profile(
    config: &DeviationConfig,
    s_range: RangeInclusive<usize>,
    t: f64,
) -> Result<DeviationProfile> {
    let p = config.model.p();
    let (lo, hi) = (*s_range.start(), *s_range.end());
    if lo == 0 || hi < lo {
        return Err(Error::BadConfig(format!("support range {lo}..={hi} is empty or starts at 0")));
    }
    if hi > p {
        return Err(Error::BadSparsityBound { sbar: hi, p });
    }
    // Fail before simulating if any requested size blows the budget.
    for s in lo..=hi {
        let needed = binomial(p, s);
        if needed > DEFAULT_ENUMERATION_BUDGET as u128 {
            return Err(Error::EnumerationBudget { needed, budget: DEFAULT_ENUMERATION_BUDGET });
        }
    }

    let sigma = build_spiked(&config.model);
    let data_seed = seed::derive(config.seed, &[0, 0, seed::STREAM_DATA]);
    let mask_seed = seed::derive(config.seed, &[0, 0, seed::STREAM_MASK]);
    let x = sample_gaussian(&sigma, config.n, data_seed)?;
    let sample = apply_mask(&x, config.delta, mask_seed)?;
    let tilde = debias_covariance(&empirical_covariance(&sample), config.delta)?;

    let mut profile = DeviationProfile {
        s_values: Vec::new(),
        z_values: Vec::new(),
        z_running_max: Vec::new(),
        bound_values: Vec::new(),
        sigma_max_values: Vec::new(),
        ratio_values: Vec::new(),
        t,
    };
    let mut running: f64 = f64::NEG_INFINITY;
    for s in lo..=hi {
        let z = sparse_deviation(&tilde, &sigma, s)?;
        let zeta = zeta_bound(s, p, t, config.delta, config.n)?;
        let scale = sparse_sigma_max(&sigma, s)?;
        running = running.max(z);
        profile.s_values.push(s);
        profile.z_values.push(z);
        profile.z_running_max.push(running);
        profile.bound_values.push(zeta);
        profile.sigma_max_values.push(scale);
        profile.ratio_values.push(z / (scale * zeta));
    }
    Ok(profile)
}

/// Config keys understood by [`DeviationStudy::from_config_str`].
const STUDY_KEYS: &[&str] =
    &["n", "p", "s", "sigma1", "sigma2", "delta", "seed", "t", "s_min", "s_max"];

/// A deviation study read from config: the simulated dataset plus the
/// support range and confidence parameter to profile.
#[derive(Debug, Clone)]
pub struct DeviationStudy {
    pub config: DeviationConfig,
    pub s_min: usize,
    pub s_max: usize,
    pub t: f64,
}

impl DeviationStudy {
    /// Reads a study from `key = value` config text.
    ///
    /// Required keys: `n`, `p`, `s` (spike sparsity, flat direction on the
    /// first `s` coordinates), `sigma1`, `sigma2`, `delta`, `seed`,
    /// `s_min`, `s_max`, `t`.
    ///
    /// # Errors
    ///
    /// [`Error::Parse`] with line references for malformed text,
    /// [`Error::Config`] for missing keys, and model validation errors for
    /// semantic violations. Range and budget problems surface when the
    /// study [`DeviationStudy::run`]s.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text, STUDY_KEYS)?;
        let scalar_usize = |key: &str| -> Result<usize> {
            let (line, raw) = kv.require(key)?;
            config::scalar::<usize>(line, key, raw)
        };
        let scalar_f64 = |key: &str| -> Result<f64> {
            let (line, raw) = kv.require(key)?;
            config::scalar::<f64>(line, key, raw)
        };

        let n = scalar_usize("n")?;
        let p = scalar_usize("p")?;
        let s = scalar_usize("s")?;
        let sigma1 = scalar_f64("sigma1")?;
        let sigma2 = scalar_f64("sigma2")?;
        let delta = scalar_f64("delta")?;
        let (line, raw) = kv.require("seed")?;
        let seed = config::scalar::<u64>(line, "seed", raw)?;
        let t = scalar_f64("t")?;
        let s_min = scalar_usize("s_min")?;
        let s_max = scalar_usize("s_max")?;

        let theta = crate::simulation::make_sparse_theta(
            p,
            s,
            crate::simulation::ThetaMode::Flat,
            0,
        )?;
        let model = SpikedModel::isotropic(theta, sigma1, sigma2)?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::BadDelta(delta));
        }
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        Ok(Self { config: DeviationConfig { model, n, delta, seed }, s_min, s_max, t })
    }

    /// Reads a study config file. See [`DeviationStudy::from_config_str`].
    pub fn from_config_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Runs [`deviation_profile`] over the study's support range.
    pub fn run(&self) -> Result<DeviationProfile> {
        deviation_profile(&self.config, self.s_min..=self.s_max, self.t)
    }
}
