//! Monte-Carlo diagnostics for the softmax-vs-soft-thresholding contrast.
//!
//! Two statistics drive the design of sparse attention weighting:
//!
//! * softmax over i.i.d. standard-normal scores flattens as the sequence
//!   grows: the largest weight shrinks and the entropy approaches `ln N`,
//! * the soft-thresholding support size `T` stays small, bounded through
//!   the order-statistic gap: the event `T > k` forces
//!   `s_(k) - s_(k+1) < 1/k`, so `P(T > k) <= P(gap < 1/k)`.
//!
//! Both are estimated here with per-trial substreams and fixed-order
//! reductions, so every profile is reproducible at any thread count.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{soft_threshold_exact, softmax, SimilarityVector};

/// Softmax flatness and ST support statistics per sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessProfile {
    pub sequence_lengths: Vec<usize>,
    pub mean_max_prob: Vec<f64>,
    pub mean_entropy: Vec<f64>,
    pub mean_support_size_st: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

/// Empirical estimates of both sides of the support-size bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBoundReport {
    pub k_values: Vec<usize>,
    /// `P(T > k)` per k.
    pub p_support_gt_k: Vec<f64>,
    /// `P(s_(k) - s_(k+1) < 1/k)` per k.
    pub p_gap_lt_inv_k: Vec<f64>,
    pub trials: usize,
}

impl SupportBoundReport {
    /// Binomial standard error of the gap-probability estimate at slot `i`.
    pub fn gap_sigma(&self, i: usize) -> f64 {
        let p = self.p_gap_lt_inv_k[i];
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Largest softmax weight and Shannon entropy of one score vector.
fn softmax_stats(s: &SimilarityVector) -> (f64, f64) {
    let w = softmax(s);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let entropy = -w
        .iter()
        .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
        .sum::<f64>();
    (max, entropy)
}

/// Draws `trials` i.i.d. standard-normal score vectors per length and
/// records mean max softmax probability, mean entropy, and mean ST support
/// size.
///
/// Trial `t` of length slot `l` uses substream `l * trials + t` of `seed`.
pub fn flatness_profile(lengths: &[usize], trials: usize, seed: u64) -> Result<FlatnessProfile> {
    if lengths.is_empty() {
        return Err(Error::InvalidConfig("lengths must be nonempty".into()));
    }
    if let Some(&bad) = lengths.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidConfig(format!(
            "sequence lengths must be at least 2, got {bad}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }

    let mut profile = FlatnessProfile {
        sequence_lengths: lengths.to_vec(),
        mean_max_prob: Vec::with_capacity(lengths.len()),
        mean_entropy: Vec::with_capacity(lengths.len()),
        mean_support_size_st: Vec::with_capacity(lengths.len()),
        trials,
        seed,
    };
    for (slot, &n) in lengths.iter().enumerate() {
        let per_trial: Vec<(f64, f64, usize)> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = SplitMix64::substream(seed, (slot * trials) as u64 + t);
                let mut scores = vec![0.0; n];
                rng.fill_normal(&mut scores);
                let s = SimilarityVector::new(scores).expect("normal draws are finite");
                let (max_prob, entropy) = softmax_stats(&s);
                let support = soft_threshold_exact(&s).support_size();
                (max_prob, entropy, support)
            })
            .collect();
        let mut sum_max = 0.0;
        let mut sum_entropy = 0.0;
        let mut sum_support = 0.0;
        for (max_prob, entropy, support) in per_trial {
            sum_max += max_prob;
            sum_entropy += entropy;
            sum_support += support as f64;
        }
        let t = trials as f64;
        profile.mean_max_prob.push(sum_max / t);
        profile.mean_entropy.push(sum_entropy / t);
        profile.mean_support_size_st.push(sum_support / t);
    }
    Ok(profile)
}

/// Support size and descending order statistics for one trial.
fn trial_support_and_gaps(scores: Vec<f64>) -> (usize, Vec<f64>) {
    let s = SimilarityVector::new(scores).expect("normal draws are finite");
    let support = soft_threshold_exact(&s).support_size();
    let mut sorted = s.values().to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    (support, sorted)
}

/// Whether `T > k` and whether the k-th descending gap is below `1/k`.
fn bound_indicators(support: usize, sorted_desc: &[f64], k: usize) -> (bool, bool) {
    let gap = sorted_desc[k - 1] - sorted_desc[k];
    (support > k, gap < 1.0 / k as f64)
}

/// Monte-Carlo estimates of `P(T > k)` and `P(s_(k) - s_(k+1) < 1/k)`
/// under i.i.d. standard-normal scores of length `n`.
///
/// Both indicators are evaluated on the same sampled vectors. Trial `t`
/// uses substream `t` of `seed`.
pub fn support_bound_check(
    n: usize,
    k_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SupportBoundReport> {
    if n < 2 {
        return Err(Error::InvalidConfig("n must be at least 2".into()));
    }
    for &k in k_values {
        if k == 0 || k >= n {
            return Err(Error::InvalidConfig(format!(
                "k values must satisfy 1 <= k < n = {n}, got {k}"
            )));
        }
    }
    if trials < 1000 {
        return Err(Error::InvalidConfig(format!(
            "support bound estimation needs at least 1000 trials, got {trials}"
        )));
    }

    let per_trial: Vec<Vec<(bool, bool)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::substream(seed, t);
            let mut scores = vec![0.0; n];
            rng.fill_normal(&mut scores);
            let (support, sorted) = trial_support_and_gaps(scores);
            k_values
                .iter()
                .map(|&k| bound_indicators(support, &sorted, k))
                .collect()
        })
        .collect();

    let mut support_counts = vec![0usize; k_values.len()];
    let mut gap_counts = vec![0usize; k_values.len()];
    for row in per_trial {
        for (i, (sup, gap)) in row.into_iter().enumerate() {
            support_counts[i] += sup as usize;
            gap_counts[i] += gap as usize;
        }
    }
    let t = trials as f64;
    Ok(SupportBoundReport {
        k_values: k_values.to_vec(),
        p_support_gt_k: support_counts.iter().map(|&c| c as f64 / t).collect(),
        p_gap_lt_inv_k: gap_counts.iter().map(|&c| c as f64 / t).collect(),
        trials,
    })
}

/// Anything that serializes to one of the documented CSV schemas.
pub trait CsvReport {
    fn to_csv(&self) -> String;
}

impl CsvReport for FlatnessProfile {
    /// Schema: `length,mean_max_prob,mean_entropy,mean_support_st`.
    fn to_csv(&self) -> String {
        let mut out = String::from("length,mean_max_prob,mean_entropy,mean_support_st\n");
        for (i, &n) in self.sequence_lengths.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                n, self.mean_max_prob[i], self.mean_entropy[i], self.mean_support_size_st[i]
            )
            .expect("writing to String cannot fail");
        }
        out
    }
}

impl CsvReport for SupportBoundReport {
    /// Schema: `k,p_support_gt_k,p_gap_lt_inv_k`.
    fn to_csv(&self) -> String {
        let mut out = String::from("k,p_support_gt_k,p_gap_lt_inv_k\n");
        for (i, &k) in self.k_values.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                k, self.p_support_gt_k[i], self.p_gap_lt_inv_k[i]
            )
            .expect("writing to String cannot fail");
        }
        out
    }
}

/// Writes a report to `path` in its documented CSV schema.
pub fn emit_csv<T: CsvReport>(report: &T, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores_give_uniform_softmax() {
        let s = SimilarityVector::new(vec![0.7; 25]).unwrap();
        let (max_prob, entropy) = softmax_stats(&s);
        assert!((max_prob - 1.0 / 25.0).abs() < 1e-12);
        assert!((entropy - 25.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn max_prob_flattens_with_length() {
        let profile = flatness_profile(&[16, 400], 2000, 11).unwrap();
        assert!(
            profile.mean_max_prob[0] > profile.mean_max_prob[1],
            "{:?}",
            profile.mean_max_prob
        );
        // entropy must stay below ln N
        for (i, &n) in profile.sequence_lengths.iter().enumerate() {
            assert!(profile.mean_entropy[i] <= (n as f64).ln());
            assert!(profile.mean_support_size_st[i] <= n as f64);
            assert!(profile.mean_support_size_st[i] >= 1.0);
        }
    }

    #[test]
    fn degenerate_equal_scores_saturate_both_sides() {
        // All-equal scores: T = n, and every descending gap is zero.
        let (support, sorted) = trial_support_and_gaps(vec![1.25; 6]);
        assert_eq!(support, 6);
        let (sup_gt, gap_lt) = bound_indicators(support, &sorted, 5);
        assert!(sup_gt);
        assert!(gap_lt);
    }

    #[test]
    fn bound_holds_on_shared_samples() {
        let report = support_bound_check(32, &[1, 2, 4, 8], 2000, 5).unwrap();
        for i in 0..report.k_values.len() {
            assert!(
                report.p_support_gt_k[i] <= report.p_gap_lt_inv_k[i],
                "k={}: {} vs {}",
                report.k_values[i],
                report.p_support_gt_k[i],
                report.p_gap_lt_inv_k[i]
            );
        }
    }

    #[test]
    fn validation_errors() {
        assert!(flatness_profile(&[], 10, 0).is_err());
        assert!(flatness_profile(&[1], 10, 0).is_err());
        assert!(flatness_profile(&[8], 0, 0).is_err());
        assert!(support_bound_check(8, &[8], 2000, 0).is_err());
        assert!(support_bound_check(8, &[0], 2000, 0).is_err());
        assert!(support_bound_check(8, &[1], 10, 0).is_err());
    }

    #[test]
    fn csv_shapes() {
        let report = SupportBoundReport {
            k_values: vec![],
            p_support_gt_k: vec![],
            p_gap_lt_inv_k: vec![],
            trials: 1000,
        };
        assert_eq!(report.to_csv(), "k,p_support_gt_k,p_gap_lt_inv_k\n");

        let profile = FlatnessProfile {
            sequence_lengths: vec![4, 8],
            mean_max_prob: vec![0.5, 0.25],
            mean_entropy: vec![1.0, 1.5],
            mean_support_size_st: vec![2.0, 3.0],
            trials: 10,
            seed: 0,
        };
        let csv = profile.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("length,"));
    }
}
