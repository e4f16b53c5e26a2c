//! Post-training orientation: the loss is even in the predictions, so a
//! trained model lands on one of two mirror solutions. The covariance between
//! the predictions and the indirect labels, combined with the known sign of
//! the physical relationship, picks the right one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{mean_and_pop_std, DEGENERATE_STD};

/// Minimum |Pearson r| for an orientation decision to count as confident.
pub const CONFIDENCE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationReport {
    /// Sample covariance (n − 1 denominator).
    pub covariance: f64,
    pub correlation: f64,
    pub resolved_sign: f64,
    pub confident: bool,
}

/// `expected_sign` is the sign of dUCS/dE_dyn, see
/// [`expected_correlation_sign`](crate::physics::expected_correlation_sign).
pub fn covariance_sign(f: &[f64], e: &[f64], expected_sign: f64) -> Result<OrientationReport> {
    if f.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: f.len(),
        });
    }
    if f.len() < 3 {
        return Err(Error::Length {
            min: 3,
            got: f.len(),
        });
    }
    let (mf, sf) = mean_and_pop_std(f);
    let (me, se) = mean_and_pop_std(e);
    if !(sf > DEGENERATE_STD) || !(se > DEGENERATE_STD) {
        return Err(Error::Degenerate(
            "cannot orient a constant prediction or label vector".into(),
        ));
    }
    let n = f.len() as f64;
    let cross: f64 = f.iter().zip(e).map(|(a, b)| (a - mf) * (b - me)).sum();
    let covariance = cross / (n - 1.0);
    let correlation = (cross / n / (sf * se)).clamp(-1.0, 1.0);
    let confident = correlation.abs() >= CONFIDENCE_THRESHOLD;
    let resolved_sign = if confident {
        covariance.signum() * expected_sign.signum()
    } else {
        1.0
    };
    Ok(OrientationReport {
        covariance,
        correlation,
        resolved_sign,
        confident,
    })
}

pub fn resolve_orientation(f: &[f64], report: &OrientationReport) -> Vec<f64> {
    f.iter().map(|v| v * report.resolved_sign).collect()
}

/// Map standardized predictions back to UCS units using training-set moments.
pub fn rescale_to_physical(f_oriented: &[f64], ucs_mean: f64, ucs_std: f64) -> Result<Vec<f64>> {
    if !(ucs_std > 0.0) || !ucs_std.is_finite() {
        return Err(Error::Scale(format!(
            "UCS std must be positive, got {ucs_std}"
        )));
    }
    Ok(f_oriented.iter().map(|v| v * ucs_std + ucs_mean).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::normalize;
    use proptest::prelude::*;

    #[test]
    fn perfect_correlations() {
        let e = [1.0, 3.0, 2.0, 5.0, 4.0];
        let r = covariance_sign(&e, &e, 1.0).unwrap();
        assert!(r.covariance > 0.0 && r.confident);
        assert_eq!(r.resolved_sign, 1.0);
        assert!((r.correlation - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        let r = covariance_sign(&neg, &e, 1.0).unwrap();
        assert!(r.covariance < 0.0);
        assert_eq!(r.resolved_sign, -1.0);
        assert_eq!(resolve_orientation(&neg, &r), e.to_vec());

        // A physically decreasing relation flips the decision.
        let r = covariance_sign(&e, &e, -1.0).unwrap();
        assert_eq!(r.resolved_sign, -1.0);
    }

    #[test]
    fn low_confidence_keeps_positive_sign() {
        let e = [1.0, 2.0, 3.0, 4.0];
        let f = [1.0, -1.0, -1.0, 1.0];
        let r = covariance_sign(&f, &e, 1.0).unwrap();
        assert!(!r.confident);
        assert_eq!(r.resolved_sign, 1.0);
    }

    #[test]
    fn constant_inputs_are_degenerate() {
        assert!(matches!(
            covariance_sign(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0], 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(covariance_sign(&[1.0, 2.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(
            rescale_to_physical(&[-1.0, 0.0, 1.0], 10.0, 2.0).unwrap(),
            vec![8.0, 10.0, 12.0]
        );
        assert_eq!(
            rescale_to_physical(&[0.0; 3], 7.0, 3.0).unwrap(),
            vec![7.0; 3]
        );
        assert!(matches!(
            rescale_to_physical(&[0.0], 1.0, 0.0),
            Err(Error::Scale(_))
        ));
        assert!(rescale_to_physical(&[0.0], 1.0, -2.0).is_err());
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (5usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn resolved_predictions_follow_expected_sign((f, e) in vec_pair()) {
            prop_assume!(covariance_sign(&f, &e, 1.0).is_ok());
            let r = covariance_sign(&f, &e, 1.0).unwrap();
            let oriented = resolve_orientation(&f, &r);
            let after = covariance_sign(&oriented, &e, 1.0).unwrap();
            if r.confident {
                prop_assert!(after.correlation >= 0.0);
                // A second pass is a no-op.
                prop_assert_eq!(resolve_orientation(&oriented, &after), oriented);
            }
        }

        #[test]
        fn negation_flips_resolved_sign((f, e) in vec_pair()) {
            prop_assume!(covariance_sign(&f, &e, 1.0).is_ok());
            let r = covariance_sign(&f, &e, 1.0).unwrap();
            prop_assume!(r.confident);
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let rn = covariance_sign(&neg, &e, 1.0).unwrap();
            prop_assert_eq!(rn.resolved_sign, -r.resolved_sign);
        }

        #[test]
        fn rescale_round_trip_and_reflection(
            f in prop::collection::vec(-3.0f64..3.0, 4..30),
            m in -50.0f64..50.0,
            s in 0.1f64..20.0,
        ) {
            prop_assume!(normalize(&f).is_ok());
            let z = normalize(&f).unwrap();
            let back = normalize(&rescale_to_physical(&z, m, s).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&z) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
            // Negating before rescaling reflects the result about the mean.
            let neg: Vec<f64> = z.iter().map(|v| -v).collect();
            let up = rescale_to_physical(&z, m, s).unwrap();
            let down = rescale_to_physical(&neg, m, s).unwrap();
            for (a, b) in up.iter().zip(&down) {
                prop_assert!((a + b - 2.0 * m).abs() <= 1e-10 * (1.0 + m.abs()));
            }
        }
    }
}
