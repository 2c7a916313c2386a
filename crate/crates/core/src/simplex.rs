//! Soft thresholding on the probability simplex, and its Jacobian.
//!
//! The soft-thresholding (ST) operation maps a vector of similarity scores
//! `s` to a sparse probability distribution:
//!
//! ```text
//! ST_j(s) = max{ s_j - kappa(s), 0 }
//! ```
//!
//! where the threshold `kappa(s)` is the unique scalar making the result
//! sum to 1. It is computed from the descending sort `s_(1) >= ... >= s_(N)`:
//!
//! ```text
//! T       = max{ k | k * s_(k) + 1 > s_(1) + ... + s_(k) }
//! kappa   = (s_(1) + ... + s_(T) - 1) / T
//! ```
//!
//! This is exactly the Euclidean projection of `s` onto the simplex
//! `{ p | p_j >= 0, sum p_j = 1 }`. Entries strictly above the threshold
//! form the support `T(s)`; everything else is truncated to zero. The
//! operation is piecewise linear, and away from support boundaries its
//! Jacobian has the closed form
//!
//! ```text
//! J(s) = Diag(c) - c c^T / T
//! ```
//!
//! with `c` the 0/1 characteristic vector of the support. Jacobian-vector
//! products therefore cost `O(T)` given the support index list:
//!
//! ```text
//! J(s) r = c .* (r - (c^T r / T) * 1)
//! ```
//!
//! [`softmax`] provides the dense exp-normalized baseline, and
//! [`soft_threshold_topk`] restricts ST to the k largest scores, which
//! reproduces the exact result whenever `k >= T`.

use crate::error::{ensure_finite, Error, Result};

/// Largest `n` for which a dense Jacobian may be materialized.
pub const DENSE_JACOBIAN_LIMIT: usize = 4096;

/// A dense vector of finite similarity scores, `N >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityVector {
    values: Vec<f64>,
}

impl SimilarityVector {
    /// Validates that `values` is nonempty and entirely finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        ensure_finite(&values)?;
        Ok(SimilarityVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Result of a soft-thresholding call: sparse weights on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    weights: Vec<f64>,
    support: Vec<usize>,
    threshold: f64,
}

impl SparseWeights {
    /// The full weight vector; zero off the support.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices with strictly positive weight, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Number of nonzero weights.
    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// The threshold `kappa(s)` subtracted from supported scores.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Captures the support structure needed for backward passes.
    pub fn jacobian_context(&self) -> JacobianContext {
        JacobianContext {
            n: self.weights.len(),
            support: self.support.clone(),
        }
    }
}

/// Support structure of an ST output: everything the Jacobian depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianContext {
    n: usize,
    support: Vec<usize>,
}

impl JacobianContext {
    /// Builds a context from explicit support indices (ascending, unique,
    /// all below `n`, at least one).
    pub fn new(n: usize, support: Vec<usize>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyInput);
        }
        for pair in support.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidConfig(format!(
                    "support indices must be strictly ascending, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        let last = *support.last().expect("nonempty");
        if last >= n {
            return Err(Error::IndexOutOfRange { index: last, n });
        }
        Ok(JacobianContext { n, support })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// The 0/1 characteristic vector `c` of the support.
    pub fn characteristic(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n];
        for &j in &self.support {
            c[j] = 1.0;
        }
        c
    }

    /// Jacobian-vector product `J(s) r = c .* (r - (c^T r / T) * 1)`.
    ///
    /// Touches only support entries, so the arithmetic is `O(T)` on top of
    /// allocating the zeroed output.
    pub fn jvp(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: r.len(),
            });
        }
        let total: f64 = self.support.iter().map(|&j| r[j]).sum();
        let mean = total / self.support.len() as f64;
        let mut out = vec![0.0; self.n];
        for &j in &self.support {
            out[j] = r[j] - mean;
        }
        Ok(out)
    }

    /// Materializes `Diag(c) - c c^T / T`. Test-scale only; guarded by
    /// [`DENSE_JACOBIAN_LIMIT`].
    pub fn jacobian_dense(&self) -> Result<Vec<Vec<f64>>> {
        if self.n > DENSE_JACOBIAN_LIMIT {
            return Err(Error::JacobianTooLarge {
                n: self.n,
                limit: DENSE_JACOBIAN_LIMIT,
            });
        }
        let c = self.characteristic();
        let inv_t = 1.0 / self.support.len() as f64;
        let mut rows = vec![vec![0.0; self.n]; self.n];
        for &j in &self.support {
            for &k in &self.support {
                rows[j][k] = -c[j] * c[k] * inv_t;
            }
            rows[j][j] += 1.0;
        }
        Ok(rows)
    }
}

/// Threshold and support size from scores sorted in descending order.
///
/// Prefix sums are compensated (Kahan) so the exact and top-k paths agree
/// bitwise whenever they consume the same sorted prefix.
fn threshold_from_sorted(sorted: &[f64]) -> (f64, usize) {
    debug_assert!(!sorted.is_empty());
    // k = 1 always satisfies s_(1) + 1 > s_(1) mathematically; seeding the
    // loop with it avoids a spurious miss when |s_(1)| is near 2^53.
    let mut sum = sorted[0];
    let mut comp = 0.0;
    let mut support_size = 1usize;
    let mut support_sum = sum;
    for (i, &v) in sorted.iter().enumerate().skip(1) {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if (i + 1) as f64 * v + 1.0 > sum {
            support_size = i + 1;
            support_sum = sum;
        }
    }
    ((support_sum - 1.0) / support_size as f64, support_size)
}

/// Assembles weights and support from a threshold, scattering over the
/// index set `selected` (all indices for the exact path).
fn gather_weights(values: &[f64], selected: Option<&[usize]>, threshold: f64) -> SparseWeights {
    let n = values.len();
    let mut weights = vec![0.0; n];
    let mut support = Vec::new();
    let mut push = |j: usize| {
        // Strictly-positive membership test: entries equal to kappa get
        // weight zero.
        let w = values[j] - threshold;
        if w > 0.0 {
            weights[j] = w;
            support.push(j);
        }
    };
    match selected {
        Some(idx) => idx.iter().for_each(|&j| push(j)),
        None => (0..n).for_each(push),
    }
    if support.is_empty() {
        // Cancellation at extreme magnitudes (|s| ~ 1e16) can round every
        // s_j - kappa down to zero. The projection is then a vertex: put
        // unit weight on the largest score, lowest index first.
        let pool: Box<dyn Iterator<Item = usize>> = match selected {
            Some(idx) => Box::new(idx.iter().copied()),
            None => Box::new(0..n),
        };
        let best = pool
            .reduce(|a, b| if values[b] > values[a] { b } else { a })
            .expect("nonempty input");
        weights[best] = 1.0;
        return SparseWeights {
            weights,
            support: vec![best],
            threshold,
        };
    }
    support.sort_unstable();
    SparseWeights {
        weights,
        support,
        threshold,
    }
}

/// Exact soft thresholding via a full descending sort.
///
/// Returns the unique simplex point with `weights_j = max(s_j - kappa, 0)`
/// summing to one; equivalently the Euclidean projection of `s` onto the
/// probability simplex.
pub fn soft_threshold_exact(s: &SimilarityVector) -> SparseWeights {
    let values = s.values();
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let (threshold, _) = threshold_from_sorted(&sorted);
    gather_weights(values, None, threshold)
}

/// Soft thresholding restricted to the `k` largest scores.
///
/// Scores outside the top-k are forced to zero weight. Selection is by
/// descending value with ties broken by lowest index, so results are
/// reproducible across runs and thread counts. Whenever `k` is at least
/// the exact support size the result equals [`soft_threshold_exact`]
/// bitwise (identical sorted prefix, identical compensated sums).
pub fn soft_threshold_topk(s: &SimilarityVector, k: usize) -> Result<SparseWeights> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    let values = s.values();
    let n = values.len();
    if k >= n {
        return Ok(soft_threshold_exact(s));
    }
    let by_score_desc = |&a: &usize, &b: &usize| {
        values[b]
            .total_cmp(&values[a])
            .then_with(|| a.cmp(&b))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.select_nth_unstable_by(k - 1, by_score_desc);
    let mut selected = order[..k].to_vec();
    selected.sort_unstable_by(by_score_desc);
    let sorted_values: Vec<f64> = selected.iter().map(|&j| values[j]).collect();
    let (threshold, _) = threshold_from_sorted(&sorted_values);
    Ok(gather_weights(values, Some(&selected), threshold))
}

/// Exp-normalized weights with max subtraction for stability.
///
/// Every weight is strictly positive (full support) for score spreads
/// within the double-precision exp range, in contrast with the sparse
/// output of soft thresholding.
pub fn softmax(s: &SimilarityVector) -> Vec<f64> {
    let values = s.values();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for w in &mut out {
        *w /= sum;
    }
    out
}
