//! Shared test oracles, independent of the library's computation paths.
#![allow(dead_code)] // each test target uses its own subset

/// Brute-force Euclidean projection onto the probability simplex.
///
/// Enumerates every candidate support set, solves the equality-constrained
/// quadratic program on it in closed form, keeps feasible candidates, and
/// returns the one closest to `s`. Exponential in `n`; intended for
/// `n <= ~12`.
pub fn project_simplex_bruteforce(s: &[f64]) -> Vec<f64> {
    let n = s.len();
    assert!(n >= 1 && n <= 20, "oracle is exponential in n");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let sum: f64 = members.iter().map(|&j| s[j]).sum();
        let kappa = (sum - 1.0) / members.len() as f64;
        let mut candidate = vec![0.0; n];
        let mut feasible = true;
        for &j in &members {
            let w = s[j] - kappa;
            if w < 0.0 {
                feasible = false;
                break;
            }
            candidate[j] = w;
        }
        if !feasible {
            continue;
        }
        let distance: f64 = candidate
            .iter()
            .zip(s)
            .map(|(&w, &v)| (w - v) * (w - v))
            .sum();
        match &best {
            Some((d, _)) if *d <= distance => {}
            _ => best = Some((distance, candidate)),
        }
    }
    best.expect("the full support is always feasible after shifting").1
}

/// Plain dense matrix-vector product.
pub fn matvec(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Max absolute componentwise difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
