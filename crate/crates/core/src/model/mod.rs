//! Single-layer LSTM with an optional batch-normalization layer on the hidden
//! states and a per-step dense head producing one scalar.

mod adam;
mod checkpoint;
mod lstm;

pub use adam::{optimizer_step, AdamConfig, OptimizerState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use lstm::{ForwardCache, Mode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depth, density, resistivity, gamma.
pub const INPUT_CHANNELS: usize = 4;

/// Number of gates per hidden unit (input, forget, cell, output).
pub const GATES: usize = 4;

/// A trainable tensor and its gradient buffer, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub shape: [usize; 2],
    pub value: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            shape: [rows, cols],
            value: vec![0.0; rows * cols],
            grad: vec![0.0; rows * cols],
        }
    }

    fn from_value(shape: [usize; 2], value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { shape, value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight kept on the old running statistics at each update.
    pub momentum: f64,
    pub eps: f64,
}

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-9;

impl BatchNorm {
    pub fn new(hidden: usize) -> Self {
        Self {
            gamma: Param::from_value([1, hidden], vec![1.0; hidden]),
            beta: Param::zeros(1, hidden),
            running_mean: vec![0.0; hidden],
            running_var: vec![1.0; hidden],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }
}

/// Gate rows are stacked `[input; forget; cell; output]`, each `hidden` rows tall.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub hidden: usize,
    /// `4H × 4`
    pub w_ih: Param,
    /// `4H × H`
    pub w_hh: Param,
    /// `4H × 1`
    pub bias: Param,
    pub batchnorm: Option<BatchNorm>,
    /// `1 × H`
    pub head_w: Param,
    /// `1 × 1`
    pub head_b: Param,
}

impl ModelParameters {
    /// All-zero parameters (unit batch-norm scale when enabled).
    pub fn zeros(hidden: usize, batchnorm: bool) -> Self {
        Self {
            hidden,
            w_ih: Param::zeros(GATES * hidden, INPUT_CHANNELS),
            w_hh: Param::zeros(GATES * hidden, hidden),
            bias: Param::zeros(GATES * hidden, 1),
            batchnorm: batchnorm.then(|| BatchNorm::new(hidden)),
            head_w: Param::zeros(1, hidden),
            head_b: Param::zeros(1, 1),
        }
    }

    /// Trainable tensors in a fixed order, paired with their names.
    pub fn named_params(&self) -> Vec<(&'static str, &Param)> {
        let mut out = vec![
            ("w_ih", &self.w_ih),
            ("w_hh", &self.w_hh),
            ("bias", &self.bias),
        ];
        if let Some(bn) = &self.batchnorm {
            out.push(("bn_gamma", &bn.gamma));
            out.push(("bn_beta", &bn.beta));
        }
        out.push(("head_w", &self.head_w));
        out.push(("head_b", &self.head_b));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias];
        if let Some(bn) = &mut self.batchnorm {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn num_parameters(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named_params()
            .iter()
            .all(|(_, p)| p.value.iter().all(|v| v.is_finite()))
            && self.batchnorm.as_ref().is_none_or(|bn| {
                bn.running_mean.iter().all(|v| v.is_finite())
                    && bn.running_var.iter().all(|v| v.is_finite() && *v >= 0.0)
            })
    }
}

/// Uniform weights in `±1/√fan_in`, forget-gate bias 1, every other bias 0.
pub fn init_parameters(seed: u64, hidden: usize, batchnorm: bool) -> Result<ModelParameters> {
    if hidden == 0 {
        return Err(Error::Config("hidden size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParameters::zeros(hidden, batchnorm);

    let mut fill = |param: &mut Param, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in param.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
    };
    fill(&mut p.w_ih, INPUT_CHANNELS);
    fill(&mut p.w_hh, hidden);
    fill(&mut p.head_w, hidden);
    for v in &mut p.bias.value[hidden..2 * hidden] {
        *v = 1.0;
    }
    Ok(p)
}

/// `batch × seq × 4` inputs, laid out `[(b · seq + t) · 4 + channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    pub batch: usize,
    pub seq: usize,
    pub data: Vec<f64>,
}

impl InputTensor {
    pub fn new(batch: usize, seq: usize, data: Vec<f64>) -> Result<Self> {
        if batch == 0 || seq == 0 {
            return Err(Error::Shape(format!("empty input tensor ({batch}×{seq})")));
        }
        if data.len() != batch * seq * INPUT_CHANNELS {
            return Err(Error::Shape(format!(
                "{} values cannot form a {batch}×{seq}×{INPUT_CHANNELS} tensor",
                data.len()
            )));
        }
        Ok(Self { batch, seq, data })
    }

    pub fn step(&self, b: usize, t: usize) -> &[f64] {
        let at = (b * self.seq + t) * INPUT_CHANNELS;
        &self.data[at..at + INPUT_CHANNELS]
    }
}
