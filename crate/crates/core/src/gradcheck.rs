//! Finite-difference validation of the soft-thresholding Jacobian.
//!
//! Soft thresholding is piecewise linear: away from support boundaries the
//! closed-form Jacobian-vector product is exact, so central differences
//! must agree with it to near machine precision. Inputs with a score close
//! to the threshold sit on a boundary between linear pieces, where the
//! derivative is undefined; those are detected and skipped rather than
//! compared.

use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{soft_threshold_exact, SimilarityVector};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-6;
/// Scores within this distance of the threshold disqualify an input.
pub const TIE_GUARD_RADIUS: f64 = 1e-4;
/// Absolute floor: componentwise deviations at or below this are treated
/// as exact (they are pure difference-quotient roundoff), and it also
/// bounds the denominator of relative errors above it.
pub const ABS_ERROR_FLOOR: f64 = 1e-8;
/// Largest relative error accepted by [`GradCheckReport::passed`].
pub const REL_ERROR_TOLERANCE: f64 = 1e-5;

/// Summary of one gradient-check run.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Accepted sample points.
    pub num_points: usize,
    /// Inputs rejected by the tie guard.
    pub num_skipped_ties: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= REL_ERROR_TOLERANCE
    }
}

/// Central difference `(ST(s + step r) - ST(s - step r)) / (2 step)`.
///
/// Fails with [`Error::TieAdjacent`] when any score lies within
/// `10 * step` of the threshold `kappa(s)`, where the operation is not
/// differentiable and the quotient would straddle two linear pieces.
pub fn finite_difference_jvp(s: &SimilarityVector, r: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "step must be positive and finite, got {step}"
        )));
    }
    if r.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            actual: r.len(),
        });
    }
    ensure_finite(r)?;
    check_tie_guard(s, 10.0 * step)?;

    let plus: Vec<f64> = s
        .values()
        .iter()
        .zip(r)
        .map(|(&v, &d)| v + step * d)
        .collect();
    let minus: Vec<f64> = s
        .values()
        .iter()
        .zip(r)
        .map(|(&v, &d)| v - step * d)
        .collect();
    let st_plus = soft_threshold_exact(&SimilarityVector::new(plus)?);
    let st_minus = soft_threshold_exact(&SimilarityVector::new(minus)?);
    Ok(st_plus
        .weights()
        .iter()
        .zip(st_minus.weights())
        .map(|(&p, &m)| (p - m) / (2.0 * step))
        .collect())
}

fn check_tie_guard(s: &SimilarityVector, radius: f64) -> Result<()> {
    let kappa = soft_threshold_exact(s).threshold();
    for (index, &v) in s.values().iter().enumerate() {
        let distance = (v - kappa).abs();
        if distance <= radius {
            return Err(Error::TieAdjacent { index, distance });
        }
    }
    Ok(())
}

/// Samples standard-normal score/direction pairs and compares the analytic
/// JVP against central differences, skipping tie-adjacent inputs.
///
/// Trials draw from per-trial substreams of `seed` and are compared in
/// parallel; the max-error reduction is order-insensitive, so the report
/// does not depend on the thread count.
pub fn run_gradcheck(trials: usize, n: usize, seed: u64) -> Result<GradCheckReport> {
    run_gradcheck_with_step(trials, n, seed, DEFAULT_STEP)
}

/// [`run_gradcheck`] with an explicit finite-difference step.
pub fn run_gradcheck_with_step(
    trials: usize,
    n: usize,
    seed: u64,
    step: f64,
) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidConfig(
            "gradient checks need n >= 2 scores".into(),
        ));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "step must be positive and finite, got {step}"
        )));
    }

    enum Outcome {
        Skipped,
        Checked { max_abs: f64, max_rel: f64 },
    }

    let outcomes: Vec<Outcome> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = SplitMix64::substream(seed, trial);
            let mut scores = vec![0.0; n];
            let mut direction = vec![0.0; n];
            rng.fill_normal(&mut scores);
            rng.fill_normal(&mut direction);
            let s = SimilarityVector::new(scores).expect("normal draws are finite");
            if check_tie_guard(&s, TIE_GUARD_RADIUS).is_err() {
                return Outcome::Skipped;
            }
            let analytic = soft_threshold_exact(&s)
                .jacobian_context()
                .jvp(&direction)
                .expect("direction has matching length");
            let numeric = finite_difference_jvp(&s, &direction, step)
                .expect("tie guard already passed at a wider radius");
            let mut max_abs = 0.0f64;
            let mut max_rel = 0.0f64;
            for (&a, &f) in analytic.iter().zip(&numeric) {
                let abs = (a - f).abs();
                max_abs = max_abs.max(abs);
                if abs > ABS_ERROR_FLOOR {
                    max_rel = max_rel.max(abs / f.abs().max(ABS_ERROR_FLOOR));
                }
            }
            Outcome::Checked { max_abs, max_rel }
        })
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        num_points: 0,
        num_skipped_ties: 0,
    };
    for outcome in outcomes {
        match outcome {
            Outcome::Skipped => report.num_skipped_ties += 1,
            Outcome::Checked { max_abs, max_rel } => {
                report.num_points += 1;
                report.max_abs_error = report.max_abs_error.max(max_abs);
                report.max_rel_error = report.max_rel_error.max(max_rel);
            }
        }
    }
    if report.num_points == 0 {
        return Err(Error::InvalidConfig(
            "every trial was tie-adjacent; nothing to check".into(),
        ));
    }
    Ok(report)
}
