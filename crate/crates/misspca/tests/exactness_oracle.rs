//! Cross-checks the exact solver against an independently coded search.

#[path = "support/oracle.rs"]
mod oracle;

use misspca::solver::exact_l0_pca;
use misspca::{SolverConfig, SymmetricMatrix};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> (SymmetricMatrix, Vec<Vec<f64>>) {
    let mut m = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let v: f64 = rng.gen_range(-3.0..3.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let rows = (0..p).map(|i| (0..p).map(|j| m[(i, j)]).collect()).collect();
    (SymmetricMatrix::new(m).unwrap(), rows)
}

#[test]
fn exact_solver_matches_independent_search_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    for trial in 0..200 {
        let p = 2 + (trial % 7);
        let (matrix, rows) = random_symmetric(p, &mut rng);
        for &lambda in &[0.0, 0.1, 0.5, 1.0] {
            for sbar in 1..=p {
                let result = exact_l0_pca(&matrix, &SolverConfig::new(lambda, sbar)).unwrap();
                let reference = oracle::best_penalized_objective(&rows, sbar, lambda);
                assert!(
                    (result.objective - reference).abs() <= 1e-10,
                    "trial {trial} p={p} lambda={lambda} sbar={sbar}: solver {} vs oracle {}",
                    result.objective,
                    reference
                );
            }
        }
    }
}

#[test]
fn jacobi_oracle_agrees_with_closed_forms() {
    // 2x2 [[2,1],[1,2]]: eigenvalues 3 and 1.
    let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
    assert!((oracle::jacobi_largest_eigenvalue(&m) - 3.0).abs() < 1e-12);

    // Unpenalized full search on a diagonal matrix finds the top entry.
    let d = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 5.0, 0.0],
        vec![0.0, 0.0, 3.0],
    ];
    assert!((oracle::best_penalized_objective(&d, 3, 0.0) - 5.0).abs() < 1e-12);
    // Penalty 1 per coordinate: singleton {5} wins at 4.
    assert!((oracle::best_penalized_objective(&d, 3, 1.0) - 4.0).abs() < 1e-12);
}
