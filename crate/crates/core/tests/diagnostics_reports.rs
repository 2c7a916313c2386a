//! Report emission and Monte-Carlo self-consistency checks.

use std::path::PathBuf;

use hspa_core::diagnostics::{
    emit_csv, flatness_profile, support_bound_check, CsvReport, FlatnessProfile,
    SupportBoundReport,
};

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("hspa-diagnostics-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Test-side CSV parser: the round-trip oracle for emitted reports.
fn parse_flatness(csv: &str) -> (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("length,mean_max_prob,mean_entropy,mean_support_st")
    );
    let mut out = (vec![], vec![], vec![], vec![]);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4, "{line}");
        out.0.push(fields[0].parse().unwrap());
        out.1.push(fields[1].parse().unwrap());
        out.2.push(fields[2].parse().unwrap());
        out.3.push(fields[3].parse().unwrap());
    }
    out
}

fn parse_support(csv: &str) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,p_support_gt_k,p_gap_lt_inv_k"));
    let mut out = (vec![], vec![], vec![]);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3, "{line}");
        out.0.push(fields[0].parse().unwrap());
        out.1.push(fields[1].parse().unwrap());
        out.2.push(fields[2].parse().unwrap());
    }
    out
}

#[test]
fn flatness_csv_round_trips_exactly() {
    let profile = flatness_profile(&[8, 32, 128], 500, 9).unwrap();
    let path = tmp("flatness.csv");
    emit_csv(&profile, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let (lengths, max_prob, entropy, support) = parse_flatness(&text);
    assert_eq!(lengths, profile.sequence_lengths);
    // Parsed doubles must be bit-identical to the emitted values.
    assert_eq!(max_prob, profile.mean_max_prob);
    assert_eq!(entropy, profile.mean_entropy);
    assert_eq!(support, profile.mean_support_size_st);
}

#[test]
fn support_csv_round_trips_exactly() {
    let report = support_bound_check(32, &[1, 2, 8], 2_000, 3).unwrap();
    let path = tmp("support.csv");
    emit_csv(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let (ks, p_support, p_gap) = parse_support(&text);
    assert_eq!(ks, report.k_values);
    assert_eq!(p_support, report.p_support_gt_k);
    assert_eq!(p_gap, report.p_gap_lt_inv_k);
}

#[test]
fn header_only_files_for_empty_reports() {
    let report = support_bound_check(8, &[], 1_000, 0).unwrap();
    let path = tmp("empty.csv");
    emit_csv(&report, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "k,p_support_gt_k,p_gap_lt_inv_k\n"
    );
}

#[test]
fn emit_surfaces_path_in_errors() {
    let report = FlatnessProfile {
        sequence_lengths: vec![4],
        mean_max_prob: vec![0.5],
        mean_entropy: vec![1.0],
        mean_support_size_st: vec![2.0],
        trials: 1,
        seed: 0,
    };
    let bad = PathBuf::from("/nonexistent-dir-hspa/x.csv");
    let err = emit_csv(&report, &bad).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir-hspa/x.csv"));
    let _ = report.to_csv();
}

#[test]
fn independent_seeds_estimate_the_same_probabilities() {
    // Two runs with different seeds agree within a few binomial sigma.
    let trials = 100_000;
    let a = support_bound_check(3, &[1], trials, 101).unwrap();
    let b = support_bound_check(3, &[1], trials, 202).unwrap();
    for (pa, pb, sa, sb) in [
        (
            a.p_support_gt_k[0],
            b.p_support_gt_k[0],
            a.gap_sigma(0),
            b.gap_sigma(0),
        ),
        (
            a.p_gap_lt_inv_k[0],
            b.p_gap_lt_inv_k[0],
            a.gap_sigma(0),
            b.gap_sigma(0),
        ),
    ] {
        let margin = 2.0 * (sa * sa + sb * sb).sqrt().max(1e-4);
        assert!((pa - pb).abs() <= margin, "{pa} vs {pb} (margin {margin})");
    }
}

#[test]
fn flatness_profile_is_thread_count_independent() {
    let a = flatness_profile(&[16, 64], 400, 5).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| flatness_profile(&[16, 64], 400, 5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn support_report_exposes_sampling_sigma() {
    let report = SupportBoundReport {
        k_values: vec![1],
        p_support_gt_k: vec![0.2],
        p_gap_lt_inv_k: vec![0.25],
        trials: 10_000,
    };
    let sigma = report.gap_sigma(0);
    assert!((sigma - (0.25f64 * 0.75 / 10_000.0).sqrt()).abs() < 1e-12);
}
