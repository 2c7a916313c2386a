//! Latency harness for the weighting kernels.
//!
//! Times exact soft thresholding (full sort), its top-k variant (partial
//! selection), softmax, and the Jacobian-vector product over fresh random
//! inputs, reporting nearest-rank p50/p90 nanoseconds per call. Results
//! are machine-dependent and meant for relative comparisons on one host,
//! primarily that partial selection beats the full sort at long lengths.
//!
//! The timing loop runs on a single thread and each record carries an
//! index-weighted output checksum, so a benchmark run can be checked
//! against untimed calls of the same operations on the same inputs.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{soft_threshold_exact, soft_threshold_topk, softmax, SimilarityVector};

/// Operations the harness can time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchOp {
    StExact,
    StTopk,
    Softmax,
    Jvp,
}

impl BenchOp {
    pub const ALL: [BenchOp; 4] = [
        BenchOp::StExact,
        BenchOp::StTopk,
        BenchOp::Softmax,
        BenchOp::Jvp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchOp::StExact => "st_exact",
            BenchOp::StTopk => "st_topk",
            BenchOp::Softmax => "softmax",
            BenchOp::Jvp => "jvp",
        }
    }
}

impl std::str::FromStr for BenchOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "st_exact" => Ok(BenchOp::StExact),
            "st_topk" => Ok(BenchOp::StTopk),
            "softmax" => Ok(BenchOp::Softmax),
            "jvp" => Ok(BenchOp::Jvp),
            other => Err(format!(
                "unknown bench op '{other}' (expected st_exact, st_topk, softmax, jvp)"
            )),
        }
    }
}

/// One (operation, length) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub op: BenchOp,
    pub n: usize,
    /// Top-k width; only set for `st_topk`.
    pub k: Option<usize>,
    pub reps: usize,
    pub p50_ns: u64,
    pub p90_ns: u64,
    /// Index-weighted sum of all outputs; defeats dead-code elimination
    /// and pins the numerical results of the run.
    pub checksum: f64,
}

/// `sum_j out[j] * (j + 1)` accumulated across reps.
fn fold_checksum(acc: f64, out: &[f64]) -> f64 {
    acc + out
        .iter()
        .enumerate()
        .map(|(j, &w)| w * (j + 1) as f64)
        .sum::<f64>()
}

/// Input vectors for one (op slot, length slot): standard-normal scores
/// from substream `(op_slot * num_lengths + len_slot) * reps + rep`.
fn inputs_for(
    seed: u64,
    op_slot: usize,
    len_slot: usize,
    num_lengths: usize,
    reps: usize,
    n: usize,
) -> Vec<Vec<f64>> {
    (0..reps)
        .map(|rep| {
            let stream = ((op_slot * num_lengths + len_slot) * reps + rep) as u64;
            let mut rng = SplitMix64::substream(seed, stream);
            let mut scores = vec![0.0; n];
            rng.fill_normal(&mut scores);
            scores
        })
        .collect()
}

fn nearest_rank(sorted: &[u64], quantile: f64) -> u64 {
    let idx = ((sorted.len() - 1) as f64 * quantile).round() as usize;
    sorted[idx]
}

fn check_params(ops: &[BenchOp], lengths: &[usize], k: usize, reps: usize) -> Result<()> {
    if ops.is_empty() {
        return Err(Error::InvalidConfig("no operations selected".into()));
    }
    if lengths.is_empty() {
        return Err(Error::InvalidConfig("no lengths given".into()));
    }
    if let Some(&bad) = lengths.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidConfig(format!(
            "bench lengths must be at least 2, got {bad}"
        )));
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    Ok(())
}

/// Times every selected op at every length; see the module docs.
pub fn run_bench(
    ops: &[BenchOp],
    lengths: &[usize],
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    check_params(ops, lengths, k, reps)?;
    let mut records = Vec::with_capacity(ops.len() * lengths.len());
    for (op_slot, &op) in ops.iter().enumerate() {
        for (len_slot, &n) in lengths.iter().enumerate() {
            let inputs = inputs_for(seed, op_slot, len_slot, lengths.len(), reps, n);
            let vectors: Vec<SimilarityVector> = inputs
                .into_iter()
                .map(|v| SimilarityVector::new(v).expect("normal draws are finite"))
                .collect();

            // For the JVP the forward pass and direction are prepared
            // outside the timed region; the direction reuses the scores
            // reversed, which keeps the stream layout identical across
            // ops.
            let contexts: Vec<_> = match op {
                BenchOp::Jvp => vectors
                    .iter()
                    .map(|s| {
                        let ctx = soft_threshold_exact(s).jacobian_context();
                        let mut r = s.values().to_vec();
                        r.reverse();
                        (ctx, r)
                    })
                    .collect(),
                _ => Vec::new(),
            };

            let run_one = |rep: usize| -> Vec<f64> {
                match op {
                    BenchOp::StExact => soft_threshold_exact(&vectors[rep]).weights().to_vec(),
                    BenchOp::StTopk => soft_threshold_topk(&vectors[rep], k)
                        .expect("k validated above")
                        .weights()
                        .to_vec(),
                    BenchOp::Softmax => softmax(&vectors[rep]),
                    BenchOp::Jvp => {
                        let (ctx, r) = &contexts[rep];
                        ctx.jvp(r).expect("direction has matching length")
                    }
                }
            };

            // Warmup on the first input, untimed.
            for _ in 0..3.min(reps) {
                std::hint::black_box(run_one(0));
            }

            let mut durations = Vec::with_capacity(reps);
            let mut checksum = 0.0;
            for rep in 0..reps {
                let start = Instant::now();
                let out = run_one(rep);
                let elapsed = start.elapsed();
                durations.push(elapsed.as_nanos() as u64);
                checksum = fold_checksum(checksum, &out);
            }
            durations.sort_unstable();
            records.push(BenchRecord {
                op,
                n,
                k: (op == BenchOp::StTopk).then_some(k),
                reps,
                p50_ns: nearest_rank(&durations, 0.50),
                p90_ns: nearest_rank(&durations, 0.90),
                checksum,
            });
        }
    }
    Ok(records)
}

/// Checksums of the same (op, length) grid computed through plain calls,
/// with no timing instrumentation. Matches [`run_bench`] record order.
pub fn reference_checksums(
    ops: &[BenchOp],
    lengths: &[usize],
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_params(ops, lengths, k, reps)?;
    let mut sums = Vec::with_capacity(ops.len() * lengths.len());
    for (op_slot, &op) in ops.iter().enumerate() {
        for (len_slot, &n) in lengths.iter().enumerate() {
            let inputs = inputs_for(seed, op_slot, len_slot, lengths.len(), reps, n);
            let mut checksum = 0.0;
            for scores in inputs {
                let s = SimilarityVector::new(scores).expect("normal draws are finite");
                let out = match op {
                    BenchOp::StExact => soft_threshold_exact(&s).weights().to_vec(),
                    BenchOp::StTopk => soft_threshold_topk(&s, k)?.weights().to_vec(),
                    BenchOp::Softmax => softmax(&s),
                    BenchOp::Jvp => {
                        let ctx = soft_threshold_exact(&s).jacobian_context();
                        let mut r = s.values().to_vec();
                        r.reverse();
                        ctx.jvp(&r).expect("direction has matching length")
                    }
                };
                checksum = fold_checksum(checksum, &out);
            }
            sums.push(checksum);
        }
    }
    Ok(sums)
}

/// Schema: `op,n,k,reps,p50_ns,p90_ns,checksum`; `k` is empty for ops
/// that ignore it.
pub fn bench_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("op,n,k,reps,p50_ns,p90_ns,checksum\n");
    for r in records {
        let k = r.k.map(|k| k.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.op.name(),
            r.n,
            k,
            r.reps,
            r.p50_ns,
            r.p90_ns,
            r.checksum
        )
        .expect("writing to String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_match_plain_api() {
        let ops = BenchOp::ALL;
        let lengths = [64, 256];
        let records = run_bench(&ops, &lengths, 16, 5, 9).unwrap();
        let reference = reference_checksums(&ops, &lengths, 16, 5, 9).unwrap();
        assert_eq!(records.len(), reference.len());
        for (record, expected) in records.iter().zip(reference) {
            assert_eq!(
                record.checksum, expected,
                "{} n={}",
                record.op.name(),
                record.n
            );
        }
    }

    #[test]
    fn same_seed_same_checksums() {
        let a = run_bench(&[BenchOp::StExact], &[128], 8, 4, 21).unwrap();
        let b = run_bench(&[BenchOp::StExact], &[128], 8, 4, 21).unwrap();
        assert_eq!(a[0].checksum, b[0].checksum);
    }

    #[test]
    fn percentiles_are_ordered() {
        let records = run_bench(&BenchOp::ALL, &[64], 8, 11, 0).unwrap();
        for r in &records {
            assert!(r.p50_ns <= r.p90_ns, "{r:?}");
        }
    }

    #[test]
    fn csv_layout() {
        let records = run_bench(&[BenchOp::StTopk, BenchOp::Softmax], &[32], 4, 3, 1).unwrap();
        let csv = bench_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("op,n,k,reps,p50_ns,p90_ns,checksum"));
        let topk_line = lines.next().unwrap();
        assert!(topk_line.starts_with("st_topk,32,4,3,"));
        let softmax_line = lines.next().unwrap();
        assert!(softmax_line.starts_with("softmax,32,,3,"));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(run_bench(&[], &[64], 8, 3, 0).is_err());
        assert!(run_bench(&[BenchOp::Softmax], &[], 8, 3, 0).is_err());
        assert!(run_bench(&[BenchOp::Softmax], &[1], 8, 3, 0).is_err());
        assert!(run_bench(&[BenchOp::StTopk], &[64], 0, 3, 0).is_err());
        assert!(run_bench(&[BenchOp::Softmax], &[64], 8, 0, 0).is_err());
    }
}
