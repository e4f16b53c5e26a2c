//! Indirect physics-constrained loss `Σ (target(Pf) − f)²` and its gradient
//! with respect to the predictions `f`.
//!
//! The target is either the projection `Pf` itself or its standardized form.
//! Standardizing keeps the projection from dragging predictions toward zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{mean_and_pop_std, ProjectionOperator, DEGENERATE_STD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossConfig {
    pub normalize_projection: bool,
    /// Treat the projected target as a constant when differentiating.
    pub detach_projection_branch: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            normalize_projection: true,
            detach_projection_branch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    /// Summed squared distance; callers divide by `n` for reporting.
    pub value: f64,
    pub grad: Vec<f64>,
}

pub fn indirect_loss(op: &ProjectionOperator, f: &[f64], cfg: LossConfig) -> Result<LossValue> {
    let n = f.len();
    let projected = op.project(f)?;

    if !cfg.normalize_projection {
        // r = Pf − f; d/df Σr² = 2(P − I)r and Pr = 0, so only −2r survives.
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(n);
        for (p, fi) in projected.iter().zip(f) {
            let r = p - fi;
            value += r * r;
            grad.push(-2.0 * r);
        }
        return Ok(LossValue { value, grad });
    }

    let (mean, std) = mean_and_pop_std(&projected);
    if !(std > DEGENERATE_STD) {
        return Err(Error::Degenerate(format!(
            "projected predictions are constant (std {std:e}); the model output has collapsed"
        )));
    }
    let z: Vec<f64> = projected.iter().map(|p| (p - mean) / std).collect();

    let mut value = 0.0;
    // dL/dz
    let mut g = Vec::with_capacity(n);
    for (zi, fi) in z.iter().zip(f) {
        let d = zi - fi;
        value += d * d;
        g.push(2.0 * d);
    }
    let mut grad: Vec<f64> = g.iter().map(|gi| -gi).collect();
    if cfg.detach_projection_branch {
        return Ok(LossValue { value, grad });
    }

    let nf = n as f64;
    let g_mean = g.iter().sum::<f64>() / nf;
    let gz_mean = g.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / nf;
    let d_projected: Vec<f64> = g
        .iter()
        .zip(&z)
        .map(|(gi, zi)| (gi - g_mean - zi * gz_mean) / std)
        .collect();
    // P is symmetric, so the pullback through the projection is another projection.
    let back = op.project(&d_projected)?;
    for (gr, b) in grad.iter_mut().zip(back) {
        *gr += b;
    }
    Ok(LossValue { value, grad })
}

/// Largest component-wise relative error between the analytic gradient and
/// central differences of the loss value. Relative errors use
/// `max(|analytic|, |numeric|, 1e-6)` as the denominator.
pub fn loss_gradient_check(
    op: &ProjectionOperator,
    f: &[f64],
    cfg: LossConfig,
    h: f64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Config(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    let analytic = indirect_loss(op, f, cfg)?.grad;
    let mut probe = f.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..f.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = indirect_loss(op, &probe, cfg)?.value;
        probe[i] = orig - h;
        let down = indirect_loss(op, &probe, cfg)?.value;
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{build_projection, normalize};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RAW: LossConfig = LossConfig {
        normalize_projection: false,
        detach_projection_branch: false,
    };

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn in_range_predictions_have_zero_raw_loss() {
        let e = [1.0, 2.0, 3.5, 0.2];
        let op = build_projection(&e).unwrap();
        let f: Vec<f64> = e.iter().map(|v| 3.0 * v - 2.0).collect();
        let l = indirect_loss(&op, &f, RAW).unwrap();
        assert!(l.value < 1e-20);
    }

    #[test]
    fn hand_evaluated_raw_loss() {
        let op = build_projection(&[1.0, 2.0, 3.0]).unwrap();
        let l = indirect_loss(&op, &[1.0, 0.0, 0.0], RAW).unwrap();
        assert!((l.value - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn loss_is_even_in_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_vec(&mut rng, 12);
        let op = build_projection(&e).unwrap();
        let f = random_vec(&mut rng, 12);
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        for cfg in [RAW, LossConfig::default()] {
            let a = indirect_loss(&op, &f, cfg).unwrap().value;
            let b = indirect_loss(&op, &neg, cfg).unwrap().value;
            assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn collapsed_prediction_is_an_error_when_normalizing() {
        let op = build_projection(&[1.0, 2.0, 3.0]).unwrap();
        let err = indirect_loss(&op, &[2.0, 2.0, 2.0], LossConfig::default());
        assert!(matches!(err, Err(Error::Degenerate(_))));
        // The raw variant is fine with it.
        assert!(indirect_loss(&op, &[2.0, 2.0, 2.0], RAW).unwrap().value < 1e-20);
    }

    #[test]
    fn gradient_matches_finite_differences_for_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = random_vec(&mut rng, 20);
        let op = build_projection(&e).unwrap();
        let f = random_vec(&mut rng, 20);
        for normalize_projection in [false, true] {
            for detach_projection_branch in [false, true] {
                let cfg = LossConfig {
                    normalize_projection,
                    detach_projection_branch,
                };
                let err = if detach_projection_branch && normalize_projection {
                    // The detached gradient is the derivative of Σ(z − f)² with z frozen.
                    let l = indirect_loss(&op, &f, cfg).unwrap();
                    let z = normalize(&op.project(&f).unwrap()).unwrap();
                    let h = 1e-5;
                    (0..f.len())
                        .map(|i| {
                            let q = |d: f64| -> f64 {
                                f.iter()
                                    .enumerate()
                                    .map(|(j, fj)| {
                                        let fj = if j == i { fj + d } else { *fj };
                                        (z[j] - fj).powi(2)
                                    })
                                    .sum()
                            };
                            relative_error(l.grad[i], (q(h) - q(-h)) / (2.0 * h))
                        })
                        .fold(0.0, f64::max)
                } else {
                    loss_gradient_check(&op, &f, cfg, 1e-5).unwrap()
                };
                assert!(err <= 1e-4, "{cfg:?}: {err}");
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_normalized_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let e = random_vec(&mut rng, n);
        let op = build_projection(&e).unwrap();
        let mut f = random_vec(&mut rng, n);
        for _ in 0..5 {
            f = normalize(&op.project(&f).unwrap()).unwrap();
        }
        let l = indirect_loss(&op, &f, LossConfig::default()).unwrap();
        let norm = l.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 1e-6 * n as f64, "{norm}");
        assert!(l.value < 1e-20);
    }

    #[test]
    fn rejects_out_of_range_step() {
        let op = build_projection(&[1.0, 2.0, 3.0]).unwrap();
        assert!(loss_gradient_check(&op, &[1.0, 0.0, 0.0], RAW, 1e-2).is_err());
    }
}
