use serde::{Deserialize, Serialize};

use super::{ModelParameters, Param};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Bias-corrected update of every tensor, then clears the gradients.
    pub fn update(&mut self, tensors: &mut [&mut Param]) {
        if self.m.is_empty() {
            self.m = tensors.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(
            self.m.len(),
            tensors.len(),
            "optimizer bound to another parameter set"
        );

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in tensors.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                p.value[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                p.grad[i] = 0.0;
            }
        }
    }
}

pub fn optimizer_step(params: &mut ModelParameters, state: &mut OptimizerState) {
    state.update(&mut params.params_mut());
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(value: f64, grad: f64) -> Param {
        Param {
            shape: [1, 1],
            value: vec![value],
            grad: vec![grad],
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut p = scalar(0.7, 0.0);
        let mut opt = OptimizerState::new(AdamConfig::default());
        opt.update(&mut [&mut p]);
        assert_eq!(p.value, vec![0.7]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(1.0, 1.0);
        let mut opt = OptimizerState::new(AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        });
        opt.update(&mut [&mut p]);
        // m̂ = 1, v̂ = 1, so the step is 0.1 / (1 + 1e-8).
        assert!((p.value[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(p.grad, vec![0.0]);
    }

    #[test]
    fn steps_shrink_on_a_convex_quadratic() {
        // Minimize x²/2 from x = 1: gradient equals x.
        let mut p = scalar(1.0, 0.0);
        let mut opt = OptimizerState::new(AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        });
        let mut prev = f64::INFINITY;
        for _ in 0..2 {
            let before = p.value[0];
            p.grad[0] = before;
            opt.update(&mut [&mut p]);
            let delta = (p.value[0] - before).abs();
            assert!(delta <= prev + 1e-12);
            prev = delta;
        }
    }
}
