//! Orthogonal projection onto `range(A)`, where `A = [e 1]` stacks the
//! indirect-label column next to an intercept column.
//!
//! The projector `P = A (AᵀA)⁻¹ Aᵀ` is never formed. Applying it is a simple
//! regression of `y` on `e`, done in centered form (`ȳ + slope·(e − ē)`), so it
//! costs O(n) time and memory. The ridge fallback goes through the 2×2 Gram
//! inverse instead.

use crate::error::{Error, Result};

/// Population standard deviation floor below which a vector counts as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProjectionOptions {
    /// Regularize a collinear Gram matrix instead of rejecting it.
    pub ridge_fallback: bool,
}

/// `range(A)` for one batch of indirect labels.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    e: Vec<f64>,
    mean: f64,
    /// Σ(e − ē)²
    sxx: f64,
    gram: [[f64; 2]; 2],
    gram_inv: [[f64; 2]; 2],
    ridge: f64,
}

/// Coefficients `theta = (slope, intercept)` of the best affine fit of `y` on `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub theta: [f64; 2],
    pub fitted: Vec<f64>,
    /// `A·theta − y`
    pub residual: Vec<f64>,
}

pub fn build_projection(e: &[f64]) -> Result<ProjectionOperator> {
    ProjectionOperator::with_options(e, ProjectionOptions::default())
}

impl ProjectionOperator {
    pub fn with_options(e: &[f64], opts: ProjectionOptions) -> Result<Self> {
        let n = e.len();
        if n < 3 {
            return Err(Error::Length { min: 3, got: n });
        }
        if let Some(bad) = e.iter().find(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite indirect label {bad}"
            )));
        }

        let nf = n as f64;
        let sum: f64 = e.iter().sum();
        let mean = sum / nf;
        let variance = e.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let sum_sq: f64 = e.iter().map(|v| v * v).sum();

        let mut gram = [[sum_sq, sum], [sum, nf]];
        let mut ridge = 0.0;
        if variance <= 1e-12 * (1.0 + mean * mean) {
            if !opts.ridge_fallback {
                return Err(Error::Collinear { variance });
            }
            ridge = 1e-8 * (sum_sq + nf) / 2.0;
            gram[0][0] += ridge;
            gram[1][1] += ridge;
        }

        // det(AᵀA) = n²·var(e); computed from the centered form to avoid cancellation.
        let det = if ridge == 0.0 {
            nf * nf * variance
        } else {
            gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0]
        };
        let gram_inv = [
            [gram[1][1] / det, -gram[0][1] / det],
            [-gram[1][0] / det, gram[0][0] / det],
        ];

        Ok(Self {
            e: e.to_vec(),
            mean,
            sxx: nf * variance,
            gram,
            gram_inv,
            ridge,
        })
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn indirect_labels(&self) -> &[f64] {
        &self.e
    }

    /// `AᵀA`, including any ridge term.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        self.gram
    }

    pub fn gram_inv(&self) -> [[f64; 2]; 2] {
        self.gram_inv
    }

    /// Diagonal regularization that was applied; zero unless the ridge fallback fired.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.e.len() {
            return Err(Error::DimensionMismatch {
                expected: self.e.len(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Centered least-squares fit: (slope, mean of y). Without ridge this is
    /// the same fit as the normal equations but stays accurate when e has a
    /// large mean relative to its spread.
    fn centered_fit(&self, y: &[f64]) -> (f64, f64) {
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let sxy: f64 = self
            .e
            .iter()
            .zip(y)
            .map(|(ei, yi)| (ei - self.mean) * (yi - y_mean))
            .sum();
        (sxy / self.sxx, y_mean)
    }

    /// `(AᵀA)⁻¹ Aᵀ y`
    pub fn coefficients(&self, y: &[f64]) -> Result<[f64; 2]> {
        self.check_len(y)?;
        if self.ridge == 0.0 {
            let (slope, y_mean) = self.centered_fit(y);
            return Ok([slope, y_mean - slope * self.mean]);
        }
        let (mut ey, mut sy) = (0.0, 0.0);
        for (ei, yi) in self.e.iter().zip(y) {
            ey += ei * yi;
            sy += yi;
        }
        let g = &self.gram_inv;
        Ok([g[0][0] * ey + g[0][1] * sy, g[1][0] * ey + g[1][1] * sy])
    }

    pub fn least_squares_coeffs(&self, y: &[f64]) -> Result<LeastSquaresSolution> {
        let theta = self.coefficients(y)?;
        let fitted: Vec<f64> = self.e.iter().map(|ei| theta[0] * ei + theta[1]).collect();
        let residual = fitted.iter().zip(y).map(|(f, yi)| f - yi).collect();
        Ok(LeastSquaresSolution {
            theta,
            fitted,
            residual,
        })
    }

    /// `P y`
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; y.len()];
        self.project_into(y, &mut out)?;
        Ok(out)
    }

    pub fn project_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(y)?;
        if out.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: out.len(),
            });
        }
        if self.ridge == 0.0 {
            let (slope, y_mean) = self.centered_fit(y);
            for (o, ei) in out.iter_mut().zip(&self.e) {
                *o = y_mean + slope * (ei - self.mean);
            }
            return Ok(());
        }
        let theta = self.coefficients(y)?;
        for (o, ei) in out.iter_mut().zip(&self.e) {
            *o = theta[0] * ei + theta[1];
        }
        Ok(())
    }
}

pub(crate) fn mean_and_pop_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardize to zero mean and unit population standard deviation.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::Length {
            min: 2,
            got: v.len(),
        });
    }
    let (mean, std) = mean_and_pop_std(v);
    if !(std > DEGENERATE_STD) {
        return Err(Error::Degenerate(format!(
            "population std {std:e} is too small to normalize"
        )));
    }
    Ok(v.iter().map(|x| (x - mean) / std).collect())
}
