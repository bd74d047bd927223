//! Independent reimplementation of the penalized support search, used
//! only to cross-check the exact solver. Deliberately shares nothing with
//! the library: supports come from bitmask counting and the largest
//! eigenvalue from a cyclic Jacobi sweep, so agreement is meaningful.

/// Largest eigenvalue of a dense symmetric matrix by cyclic Jacobi
/// rotations. Plain `Vec<Vec<f64>>` to stay off the library's types.
pub fn jacobi_largest_eigenvalue(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _ in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut best = a[0][0];
    for i in 1..n {
        if a[i][i] > best {
            best = a[i][i];
        }
    }
    best
}

/// Exhaustive maximum of `lambda_max(M_J) - penalty * |J|` over all
/// nonempty supports `J` with `|J| <= sbar`.
pub fn best_penalized_objective(matrix: &[Vec<f64>], sbar: usize, penalty: f64) -> f64 {
    let p = matrix.len();
    assert!(p <= 20, "bitmask enumeration is for small p only");
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1u32 << p) {
        let k = mask.count_ones() as usize;
        if k > sbar {
            continue;
        }
        let idx: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
        let sub: Vec<Vec<f64>> =
            idx.iter().map(|&i| idx.iter().map(|&j| matrix[i][j]).collect()).collect();
        let value = jacobi_largest_eigenvalue(&sub) - penalty * k as f64;
        if value > best {
            best = value;
        }
    }
    best
}
