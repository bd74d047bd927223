//! Property tests of the library's structural invariants.

use misspca::covariance::{debias_covariance, empirical_covariance, estimate_delta};
use misspca::metrics::{projector_loss, zeta_bound};
use misspca::simulation::{build_spiked, make_sparse_theta, ThetaMode};
use misspca::solver::{exact_l0_pca, truncated_power_l0_pca};
use misspca::{MaskedSample, SolverConfig, SparseUnitVector, SpikedModel, SymmetricMatrix};

use ndarray::Array2;
use proptest::prelude::*;

/// Random symmetric matrix with entries in `[-3, 3]`.
fn sym_matrix(p: usize) -> impl Strategy<Value = SymmetricMatrix> {
    proptest::collection::vec(-3.0..3.0f64, p * (p + 1) / 2).prop_map(move |tri| {
        let mut m = Array2::zeros((p, p));
        let mut k = 0;
        for i in 0..p {
            for j in i..p {
                m[(i, j)] = tri[k];
                m[(j, i)] = tri[k];
                k += 1;
            }
        }
        SymmetricMatrix::new(m).unwrap()
    })
}

/// Random dense unit vector with every coordinate bounded away from zero,
/// so it is valid as a fully-supported sparse vector.
fn unit_vector(p: usize) -> impl Strategy<Value = SparseUnitVector> {
    proptest::collection::vec(-1.0..1.0f64, p).prop_filter_map("norm too small", move |v| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-2 {
            return None;
        }
        let values: Vec<f64> = v.iter().map(|x| x / norm).collect();
        if values.iter().any(|x| x.abs() < 1e-9) {
            return None;
        }
        SparseUnitVector::new(p, (0..p).collect(), values).ok()
    })
}

fn vector_pair() -> impl Strategy<Value = (SparseUnitVector, SparseUnitVector)> {
    (2usize..=6).prop_flat_map(|p| (unit_vector(p), unit_vector(p)))
}

fn matrix() -> impl Strategy<Value = SymmetricMatrix> {
    (2usize..=6).prop_flat_map(sym_matrix)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projector_loss_is_a_symmetric_bounded_sign_invariant_metric(
        (a, b) in vector_pair(),
    ) {
        let ab = projector_loss(&a, &b).unwrap();
        let ba = projector_loss(&b, &a).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!((0.0..=2.0).contains(&ab));
        // Identical arguments: zero up to the unit-norm tolerance.
        prop_assert!(projector_loss(&a, &a).unwrap() <= 1e-10);

        // Sign flips are invisible (construction canonicalizes sign).
        let neg_b = SparseUnitVector::new(
            b.dim(),
            b.support().to_vec(),
            b.values().iter().map(|v| -v).collect(),
        )
        .unwrap();
        prop_assert_eq!(projector_loss(&a, &neg_b).unwrap().to_bits(), ab.to_bits());
        prop_assert!(projector_loss(&b, &neg_b).unwrap() <= 1e-10);
    }

    #[test]
    fn projector_loss_matches_explicit_frobenius_difference(
        (a, b) in vector_pair(),
    ) {
        let p = a.dim();
        let ad = a.to_dense();
        let bd = b.to_dense();
        let mut frob = 0.0;
        for i in 0..p {
            for j in 0..p {
                let d = ad[i] * ad[j] - bd[i] * bd[j];
                frob += d * d;
            }
        }
        let loss = projector_loss(&a, &b).unwrap();
        prop_assert!((loss - frob).abs() <= 1e-12, "identity {} vs explicit {}", loss, frob);
    }

    #[test]
    fn debias_scales_diagonal_and_offdiagonal_as_documented(
        m in matrix(),
        delta in 0.05f64..=1.0,
    ) {
        let p = m.dim();
        let out = debias_covariance(&m, delta).unwrap();
        for i in 0..p {
            for j in 0..p {
                let want = if i == j { m.entry(i, j) / delta } else { m.entry(i, j) / (delta * delta) };
                prop_assert!((out.entry(i, j) - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }

        let fix = debias_covariance(&m, 1.0).unwrap();
        for i in 0..p {
            for j in 0..p {
                prop_assert_eq!(fix.entry(i, j).to_bits(), m.entry(i, j).to_bits());
            }
        }
    }

    #[test]
    fn estimate_delta_ignores_row_order(
        rows in proptest::collection::vec(
            proptest::collection::vec(proptest::option::of(-5.0f64..5.0), 4),
            2..10,
        ),
        swap in (0usize..10, 0usize..10),
    ) {
        let n = rows.len();
        let mut data = Array2::zeros((n, 4));
        let mut mask = Array2::from_elem((n, 4), false);
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    data[(i, j)] = *v;
                    mask[(i, j)] = true;
                }
            }
        }
        prop_assume!(mask.iter().any(|&m| m));
        let sample = MaskedSample::new(data.clone(), mask.clone()).unwrap();

        let (a, b) = (swap.0 % n, swap.1 % n);
        for j in 0..4 {
            data.swap((a, j), (b, j));
            mask.swap((a, j), (b, j));
        }
        let permuted = MaskedSample::new(data, mask).unwrap();
        prop_assert_eq!(
            estimate_delta(&sample).unwrap().to_bits(),
            estimate_delta(&permuted).unwrap().to_bits()
        );
    }

    #[test]
    fn solver_results_are_feasible_and_truncated_never_beats_exact(
        m in matrix(),
        lambda in 0.0f64..1.0,
        sbar_raw in 1usize..=6,
        seed in 0u64..1000,
    ) {
        let sbar = sbar_raw.min(m.dim());
        let mut config = SolverConfig::new(lambda, sbar);
        config.seed = seed;

        let exact = exact_l0_pca(&m, &config).unwrap();
        let truncated = truncated_power_l0_pca(&m, &config).unwrap();

        for result in [&exact, &truncated] {
            prop_assert!(result.estimate.sparsity() <= sbar);
            let norm: f64 = result.estimate.values().iter().map(|v| v * v).sum();
            prop_assert!((norm - 1.0).abs() <= 1e-10);
        }
        prop_assert!(
            truncated.objective <= exact.objective + 1e-10,
            "truncated {} beats exact {}",
            truncated.objective,
            exact.objective
        );
    }

    #[test]
    fn exact_support_size_is_monotone_in_penalty(
        m in matrix(),
        lambda in 0.0f64..0.8,
        bump in 0.01f64..1.0,
    ) {
        let p = m.dim();
        let small = exact_l0_pca(&m, &SolverConfig::new(lambda, p)).unwrap();
        let large = exact_l0_pca(&m, &SolverConfig::new(lambda + bump, p)).unwrap();
        prop_assert!(
            large.estimate.sparsity() <= small.estimate.sparsity(),
            "penalty {} -> support {}, penalty {} -> support {}",
            lambda,
            small.estimate.sparsity(),
            lambda + bump,
            large.estimate.sparsity()
        );
    }

    #[test]
    fn solving_twice_is_bit_identical(
        m in matrix(),
        lambda in 0.0f64..0.5,
    ) {
        let config = SolverConfig::new(lambda, m.dim());
        let a = exact_l0_pca(&m, &config).unwrap();
        let b = exact_l0_pca(&m, &config).unwrap();
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(a.estimate.support(), b.estimate.support());
        for (x, y) in a.estimate.values().iter().zip(b.estimate.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn zeta_bound_moves_the_right_way(
        s in 1usize..=5,
        t in 0.1f64..5.0,
        delta in 0.2f64..=1.0,
        n in 50usize..5000,
    ) {
        let p = 8;
        let base = zeta_bound(s, p, t, delta, n).unwrap();
        // Non-increasing in n and delta, non-decreasing in t.
        prop_assert!(zeta_bound(s, p, t, delta, 2 * n).unwrap() <= base + 1e-15);
        prop_assert!(zeta_bound(s, p, t, (delta * 0.5).max(0.01), n).unwrap() >= base - 1e-15);
        prop_assert!(zeta_bound(s, p, t + 1.0, delta, n).unwrap() >= base - 1e-15);
    }

    #[test]
    fn spike_curvature_lower_bounds_the_rayleigh_drop(
        (theta, s, theta_seed) in (3usize..=7).prop_flat_map(|p| {
            (unit_vector(p), 1..=p, 0u64..10_000)
        }),
        sigma1 in 1.0f64..6.0,
        gap_fraction in 0.05f64..1.0,
    ) {
        let p = theta.dim();
        let sigma2 = sigma1 * (1.0 - gap_fraction);

        let theta1 = make_sparse_theta(p, s, ThetaMode::SeededRandom, theta_seed).unwrap();
        let model = SpikedModel::isotropic(theta1.clone(), sigma1, sigma2).unwrap();
        let sigma = build_spiked(&model);

        // sigma1 - theta' Sigma theta dominates half the gap times the
        // squared projector distance.
        let drop = sigma1 - theta.quad(&sigma);
        let loss = projector_loss(&theta, &theta1).unwrap();
        let slack = drop - 0.5 * (sigma1 - sigma2) * loss;
        prop_assert!(slack >= -1e-10, "slack {}", slack);
    }
}

/// Masked sampling of a known design: the observed fraction concentrates
/// at delta (binomial standard deviation).
#[test]
fn estimated_delta_concentrates_at_truth() {
    use misspca::simulation::{apply_mask, sample_gaussian};

    let sigma = SymmetricMatrix::identity(20);
    let x = sample_gaussian(&sigma, 1000, 42).unwrap();
    let sample = apply_mask(&x, 0.7, 43).unwrap();
    let estimate = estimate_delta(&sample).unwrap();
    let cells = (1000 * 20) as f64;
    let sd = (0.7 * 0.3 / cells).sqrt();
    assert!(
        (estimate - 0.7).abs() < 3.0 * sd,
        "estimate {estimate} outside 3 standard deviations of 0.7"
    );

    let gram = empirical_covariance(&sample);
    let tilde = debias_covariance(&gram, estimate).unwrap();
    assert_eq!(tilde.dim(), 20);
}
