//! Covariance estimation from incompletely observed data.
//!
//! Observations are rows of an `n x p` matrix in which each entry is
//! revealed independently with probability `delta` and hidden otherwise.
//! Hidden entries are stored as literal `0.0` alongside a boolean mask, so
//! the naive Gram matrix `S = (1/n) sum_i y_i y_i'` systematically shrinks
//! toward zero: off-diagonal entries survive masking with probability
//! `delta^2`, diagonal entries with probability `delta`. [`debias_covariance`]
//! undoes exactly that, rescaling the diagonal by `1/delta` and the
//! off-diagonal by `1/delta^2`, which makes the result an unbiased estimate
//! of the full-data covariance. With `delta = 1` the rescaling multiplies by
//! exactly `1.0` and the matrix passes through bit-for-bit.
//!
//! The mask probability itself is rarely known in practice; [`estimate_delta`]
//! recovers it as the observed fraction of revealed entries.

use ndarray::{Array2, ArrayView2};

use crate::eigen::sym_eigen;
use crate::error::{Error, Result};

/// Relative tolerance when validating that a user-supplied matrix is
/// symmetric. Matrices built by this crate are symmetric by construction.
const SYMMETRY_RTOL: f64 = 1e-12;

/// An `n x p` data matrix with an entrywise observation mask.
///
/// Invariants, enforced at construction: `data` and `mask` have identical
/// shape with `n >= 1` and `p >= 1`, every observed entry is finite, and
/// every hidden entry is stored as literal `0.0`.
#[derive(Debug, Clone)]
pub struct MaskedSample {
    data: Array2<f64>,
    mask: Array2<bool>,
}

impl MaskedSample {
    /// Pairs a data matrix with its observation mask.
    ///
    /// Entries where `mask` is `false` are forced to `0.0`, so callers may
    /// pass whatever placeholder values they carry for hidden cells.
    ///
    /// # Errors
    ///
    /// [`Error::Dimension`] if the shapes differ or the matrix is empty,
    /// [`Error::Parse`] never; a non-finite observed entry reports the
    /// offending coordinate via [`Error::Dimension`].
    pub fn new(mut data: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if data.dim() != mask.dim() {
            return Err(Error::Dimension(format!(
                "data is {:?}, mask is {:?}",
                data.dim(),
                mask.dim()
            )));
        }
        let (n, p) = data.dim();
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!("sample is {n}x{p}, need n >= 1 and p >= 1")));
        }
        for ((i, j), value) in data.indexed_iter_mut() {
            if mask[(i, j)] {
                if !value.is_finite() {
                    return Err(Error::Dimension(format!(
                        "observed entry ({i},{j}) is not finite: {value}"
                    )));
                }
            } else {
                *value = 0.0;
            }
        }
        Ok(Self { data, mask })
    }

    /// Wraps a fully observed data matrix.
    pub fn from_complete(data: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(data.dim(), true);
        Self::new(data, mask)
    }

    /// Reads a sample from CSV text.
    ///
    /// Rows are observations, columns are variables. An empty field or the
    /// tokens `NA` / `NaN` (any case) mark a hidden entry. A first line
    /// containing a field that is neither numeric nor a missing-entry token
    /// is treated as a header and skipped. Every data row must have the same
    /// number of fields.
    ///
    /// # Errors
    ///
    /// [`Error::Parse`] with a 1-based line number for ragged rows, fields
    /// that parse to non-finite values, unparseable fields, and inputs with
    /// no data rows.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }

        let mut start = 0;
        if let Some(first) = lines.first() {
            let looks_like_header = first
                .split(',')
                .any(|tok| classify_token(tok).is_none());
            if looks_like_header {
                start = 1;
            }
        }
        let rows = &lines[start..];
        if rows.is_empty() {
            return Err(Error::Parse {
                line: lines.len(),
                message: "no data rows".into(),
            });
        }

        let p = rows[0].split(',').count();
        let n = rows.len();
        let mut data = Array2::zeros((n, p));
        let mut mask = Array2::from_elem((n, p), false);
        for (r, row) in rows.iter().enumerate() {
            let line = start + r + 1;
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != p {
                return Err(Error::Parse {
                    line,
                    message: format!("row has {} fields, expected {}", fields.len(), p),
                });
            }
            for (c, tok) in fields.iter().enumerate() {
                match classify_token(tok) {
                    Some(Some(value)) => {
                        data[(r, c)] = value;
                        mask[(r, c)] = true;
                    }
                    Some(None) => {}
                    None => {
                        return Err(Error::Parse {
                            line,
                            message: format!("field {} is not numeric or missing: {:?}", c + 1, tok.trim()),
                        });
                    }
                }
            }
        }
        Self::new(data, mask)
    }

    /// Reads a sample from a CSV file. See [`MaskedSample::from_csv_str`].
    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    /// The data matrix, hidden entries stored as `0.0`.
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// The observation mask, `true` where the entry was revealed.
    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Count of revealed entries.
    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Indices of columns with no revealed entry at all.
    ///
    /// Such columns carry no information; estimation proceeds but every
    /// statistic touching them is vacuous, so callers should surface this
    /// to the user.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| (0..self.n()).all(|i| !self.mask[(i, j)]))
            .collect()
    }

    /// Canonical CSV rendering: one row per observation, no header, and
    /// missing entries written as empty fields. Round-trips through
    /// [`MaskedSample::from_csv_str`] exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n() {
            for j in 0..self.p() {
                if j > 0 {
                    out.push(',');
                }
                if self.mask[(i, j)] {
                    out.push_str(&self.data[(i, j)].to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// `Some(Some(v))` for a numeric field, `Some(None)` for a missing-entry
/// token, `None` for anything else.
fn classify_token(tok: &str) -> Option<Option<f64>> {
    let t = tok.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Some(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Some(v)),
        _ => None,
    }
}

/// Dense symmetric `p x p` matrix.
///
/// Stored as a full row-major square array; both triangles are kept and are
/// exactly equal. Construction from raw data validates symmetry to relative
/// tolerance [`SYMMETRY_RTOL`] but stores the entries unchanged, so matrices
/// survive round trips bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    entries: Array2<f64>,
}

impl SymmetricMatrix {
    /// Validates and wraps a square symmetric matrix. Floating-point
    /// asymmetry within tolerance (accumulation-order noise) is absorbed
    /// by averaging mirrored entries; exactly symmetric input is stored
    /// bit for bit.
    ///
    /// # Errors
    ///
    /// [`Error::NotSquare`] or [`Error::NotSymmetric`]; non-finite entries
    /// are reported as [`Error::Dimension`].
    pub fn new(mut entries: Array2<f64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::Dimension("matrix is 0x0".into()));
        }
        let mut scale: f64 = 1.0;
        for &v in entries.iter() {
            if !v.is_finite() {
                return Err(Error::Dimension(format!("matrix entry is not finite: {v}")));
            }
            scale = scale.max(v.abs());
        }
        for i in 0..rows {
            for j in (i + 1)..cols {
                let (upper, lower) = (entries[(i, j)], entries[(j, i)]);
                if (upper - lower).abs() > SYMMETRY_RTOL * scale {
                    return Err(Error::NotSymmetric { i, j, upper, lower });
                }
                // (x + x) / 2 == x exactly, so this only moves entries
                // that actually disagree.
                let mean = 0.5 * (upper + lower);
                entries[(i, j)] = mean;
                entries[(j, i)] = mean;
            }
        }
        Ok(Self { entries })
    }

    /// Diagonal matrix from its diagonal entries.
    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let mut entries = Array2::zeros((diag.len(), diag.len()));
        for (i, &d) in diag.iter().enumerate() {
            entries[(i, i)] = d;
        }
        Self::new(entries)
    }

    /// Identity of dimension `p`.
    pub fn identity(p: usize) -> Self {
        Self { entries: Array2::eye(p) }
    }

    /// Dimension `p`.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Single entry.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Full entry array.
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }

    /// Principal submatrix on `support` (indices strictly increasing).
    pub(crate) fn principal_submatrix(&self, support: &[usize]) -> Array2<f64> {
        let s = support.len();
        let mut sub = Array2::zeros((s, s));
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                sub[(a, b)] = self.entries[(i, j)];
            }
        }
        sub
    }

    /// Quadratic form `v' M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let p = self.dim();
        debug_assert_eq!(v.len(), p);
        let mut acc = 0.0;
        for i in 0..p {
            let mut row = 0.0;
            for j in 0..p {
                row += self.entries[(i, j)] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    /// Matrix-vector product `M v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let p = self.dim();
        debug_assert_eq!(v.len(), p);
        (0..p)
            .map(|i| (0..p).map(|j| self.entries[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Entrywise difference, preserving exact symmetry.
    pub fn sub(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot subtract {}x{0} from {1}x{1}",
                other.dim(),
                self.dim()
            )));
        }
        Ok(SymmetricMatrix { entries: &self.entries - &other.entries })
    }

    /// Wraps entries known to be symmetric by construction, skipping
    /// validation. Crate-internal; every use site builds both triangles
    /// from the same scalar.
    pub(crate) fn from_parts_unchecked(entries: Array2<f64>) -> Self {
        Self { entries }
    }

    pub(crate) fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }
}

/// Eigenstructure digest of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Leading eigenvectors as columns (`p x k`), each of unit norm with its
    /// largest-magnitude entry positive.
    pub leading_vectors: Array2<f64>,
    /// `trace / max(|largest eigenvalue|, |smallest eigenvalue|)`, the scale-
    /// free count of directions carrying meaningful variance. `0.0` for the
    /// zero matrix.
    pub effective_rank: f64,
}

impl SpectralSummary {
    /// Largest eigenvalue.
    pub fn sigma1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Second-largest eigenvalue. Requires `p >= 2`.
    pub fn sigma2(&self) -> f64 {
        self.eigenvalues[1]
    }
}

/// Observed fraction of entries, the plug-in estimate of the reveal
/// probability.
///
/// # Errors
///
/// [`Error::AllMissing`] if no entry is observed.
pub fn estimate_delta(sample: &MaskedSample) -> Result<f64> {
    let observed = sample.observed_count();
    if observed == 0 {
        return Err(Error::AllMissing);
    }
    Ok(observed as f64 / (sample.n() * sample.p()) as f64)
}

/// Gram matrix `(1/n) sum_i y_i y_i'` of the masked rows.
///
/// Hidden entries contribute zero. The result is exactly symmetric: each
/// entry is computed once and mirrored.
pub fn empirical_covariance(sample: &MaskedSample) -> SymmetricMatrix {
    let (n, p) = sample.data.dim();
    let inv_n = 1.0 / n as f64;
    let mut entries = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += sample.data[(r, i)] * sample.data[(r, j)];
            }
            let value = acc * inv_n;
            entries[(i, j)] = value;
            entries[(j, i)] = value;
        }
    }
    SymmetricMatrix::from_parts_unchecked(entries)
}

/// Inverts the shrinkage that Bernoulli masking applies to a Gram matrix.
///
/// Off-diagonal entries survive masking with probability `delta^2` and are
/// rescaled by `1/delta^2`; diagonal entries survive with probability
/// `delta` and are rescaled by `1/delta`. For `delta = 1` both factors are
/// exactly `1.0` and the input is returned bit-for-bit.
///
/// # Errors
///
/// [`Error::BadDelta`] unless `0 < delta <= 1`.
pub fn debias_covariance(gram: &SymmetricMatrix, delta: f64) -> Result<SymmetricMatrix> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    let inv = 1.0 / delta;
    let inv_sq = inv * inv;
    let p = gram.dim();
    let mut entries = gram.entries.clone();
    for i in 0..p {
        for j in 0..p {
            entries[(i, j)] *= if i == j { inv } else { inv_sq };
        }
    }
    Ok(SymmetricMatrix { entries })
}

/// Full eigendecomposition digest with `k` leading eigenvectors.
///
/// Deterministic: repeated calls on the same matrix are bit-identical.
/// Every returned eigenpair satisfies `|M v - lambda v| <= 1e-8 (1 + |lambda|)`.
///
/// # Errors
///
/// [`Error::BadSparsityBound`] if `k > p` (reported with `sbar = k`), or
/// [`Error::EigenConvergence`] if the QL iteration stalls.
pub fn spectral_summary(matrix: &SymmetricMatrix, k: usize) -> Result<SpectralSummary> {
    let p = matrix.dim();
    if k > p {
        return Err(Error::BadSparsityBound { sbar: k, p });
    }
    let (eigenvalues, vectors) = sym_eigen(matrix.view())?;

    let mut leading_vectors = Array2::zeros((p, k));
    for col in 0..k {
        let mut v: Vec<f64> = (0..p).map(|r| vectors[(r, col)]).collect();
        canonicalize_sign(&mut v);
        for (r, &x) in v.iter().enumerate() {
            leading_vectors[(r, col)] = x;
        }
    }

    let spectral_norm = eigenvalues[0].abs().max(eigenvalues[p - 1].abs());
    let effective_rank = if spectral_norm == 0.0 {
        0.0
    } else {
        matrix.trace() / spectral_norm
    };

    Ok(SpectralSummary { eigenvalues, leading_vectors, effective_rank })
}

/// Flips `v` so its largest-magnitude entry is positive; ties go to the
/// earliest index. The zero vector is left alone.
pub(crate) fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    if sign < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn masked_entries_forced_to_zero() {
        let data = arr2(&[[1.0, 99.0], [3.0, 4.0]]);
        let mask = arr2(&[[true, false], [true, true]]);
        let sample = MaskedSample::new(data, mask).unwrap();
        assert_eq!(sample.data()[(0, 1)], 0.0);
        assert_eq!(sample.data()[(0, 0)], 1.0);
    }

    #[test]
    fn estimate_delta_counts_observed_fraction() {
        let data = arr2(&[[1.0, 0.0], [3.0, 4.0]]);
        let mask = arr2(&[[true, false], [true, true]]);
        let sample = MaskedSample::new(data, mask).unwrap();
        assert_eq!(estimate_delta(&sample).unwrap(), 0.75);
    }

    #[test]
    fn estimate_delta_rejects_all_missing() {
        let sample = MaskedSample::new(Array2::zeros((2, 2)), Array2::from_elem((2, 2), false)).unwrap();
        assert!(matches!(estimate_delta(&sample), Err(Error::AllMissing)));
    }

    #[test]
    fn empirical_covariance_single_row() {
        let sample = MaskedSample::from_complete(arr2(&[[1.0, 2.0]])).unwrap();
        let s = empirical_covariance(&sample);
        assert_eq!(s.entry(0, 0), 1.0);
        assert_eq!(s.entry(0, 1), 2.0);
        assert_eq!(s.entry(1, 0), 2.0);
        assert_eq!(s.entry(1, 1), 4.0);
    }

    #[test]
    fn debias_rescales_diagonal_and_offdiagonal_separately() {
        // Gram [[8,8],[8,8]] at delta = 1/2: diagonal doubles, off-diagonal
        // quadruples.
        let gram = SymmetricMatrix::new(arr2(&[[8.0, 8.0], [8.0, 8.0]])).unwrap();
        let out = debias_covariance(&gram, 0.5).unwrap();
        assert_eq!(out.entry(0, 0), 16.0);
        assert_eq!(out.entry(1, 1), 16.0);
        assert_eq!(out.entry(0, 1), 32.0);
        assert_eq!(out.entry(1, 0), 32.0);
    }

    #[test]
    fn debias_identity_at_full_observation() {
        let gram = SymmetricMatrix::new(arr2(&[
            [0.1, -2.5, 3.25],
            [-2.5, 7.0, 0.001],
            [3.25, 0.001, 1e-9],
        ]))
        .unwrap();
        let out = debias_covariance(&gram, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(out.entry(i, j).to_bits(), gram.entry(i, j).to_bits());
            }
        }
    }

    #[test]
    fn csv_writer_round_trips() {
        let text = "1.5,,3\n-0.25,2,\n";
        let sample = MaskedSample::from_csv_str(text).unwrap();
        assert_eq!(sample.to_csv_string(), text);
        let again = MaskedSample::from_csv_str(&sample.to_csv_string()).unwrap();
        assert_eq!(again.mask(), sample.mask());
        assert_eq!(again.data(), sample.data());
    }

    #[test]
    fn debias_rejects_bad_delta() {
        let gram = SymmetricMatrix::identity(2);
        assert!(matches!(debias_covariance(&gram, 0.0), Err(Error::BadDelta(_))));
        assert!(matches!(debias_covariance(&gram, 1.5), Err(Error::BadDelta(_))));
        assert!(matches!(debias_covariance(&gram, -0.3), Err(Error::BadDelta(_))));
    }

    #[test]
    fn spectral_summary_of_spiked_matrix() {
        // 5 e1 e1' + (I - e1 e1') in dimension 4: eigenvalues (5,1,1,1),
        // leading vector e1, effective rank 8/5.
        let sigma = SymmetricMatrix::from_diag(&[5.0, 1.0, 1.0, 1.0]).unwrap();
        let summary = spectral_summary(&sigma, 1).unwrap();
        assert!((summary.sigma1() - 5.0).abs() < 1e-12);
        assert!((summary.sigma2() - 1.0).abs() < 1e-12);
        assert!((summary.effective_rank - 1.6).abs() < 1e-12);
        assert!((summary.leading_vectors[(0, 0)] - 1.0).abs() < 1e-12);
        for r in 1..4 {
            assert!(summary.leading_vectors[(r, 0)].abs() < 1e-12);
        }
    }

    #[test]
    fn effective_rank_of_zero_matrix_is_zero() {
        let zero = SymmetricMatrix::new(Array2::zeros((3, 3))).unwrap();
        let summary = spectral_summary(&zero, 0).unwrap();
        assert_eq!(summary.effective_rank, 0.0);
        assert_eq!(summary.leading_vectors.dim(), (3, 0));
    }

    #[test]
    fn symmetric_matrix_rejects_asymmetry() {
        let err = SymmetricMatrix::new(arr2(&[[1.0, 2.0], [2.1, 1.0]]));
        assert!(matches!(err, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn csv_parses_missing_tokens_and_header() {
        let text = "x,y\n1.0,2.0\n,3.0\nNaN,na\n";
        let sample = MaskedSample::from_csv_str(text).unwrap();
        assert_eq!(sample.n(), 3);
        assert_eq!(sample.p(), 2);
        assert_eq!(sample.observed_count(), 3);
        assert!(!sample.mask()[(1, 0)]);
        assert!(!sample.mask()[(2, 0)]);
        assert!(!sample.mask()[(2, 1)]);
        assert_eq!(sample.data()[(2, 0)], 0.0);
    }

    #[test]
    fn csv_reports_ragged_row_with_line_number() {
        let text = "1.0,2.0\n3.0\n";
        match MaskedSample::from_csv_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_non_numeric_field() {
        let text = "1.0,2.0\n3.0,potato\n";
        assert!(matches!(MaskedSample::from_csv_str(text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_rejects_empty_input() {
        assert!(MaskedSample::from_csv_str("").is_err());
        assert!(MaskedSample::from_csv_str("x,y\n").is_err());
    }

    #[test]
    fn empty_columns_reported() {
        let text = "1.0,,2.0\n3.0,,4.0\n";
        let sample = MaskedSample::from_csv_str(text).unwrap();
        assert_eq!(sample.empty_columns(), vec![1]);
    }

    #[test]
    fn canonical_sign_flips_on_largest_entry() {
        let mut v = vec![0.3, -0.9, 0.3];
        canonicalize_sign(&mut v);
        assert_eq!(v, vec![-0.3, 0.9, -0.3]);
        let mut w = vec![0.9, -0.3];
        canonicalize_sign(&mut w);
        assert_eq!(w, vec![0.9, -0.3]);
    }
}
