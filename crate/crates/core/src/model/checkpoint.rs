//! JSON checkpoints. `f64` values are written in shortest round-trip form and
//! parsed back exactly, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{BatchNorm, ModelParameters, INPUT_CHANNELS};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "indirect-phys-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub hidden: usize,
    pub input_channels: usize,
    pub batchnorm: bool,
    pub tensors: Vec<TensorRecord>,
    /// Training configuration that produced the weights.
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParameters, config: serde_json::Value) -> Self {
        let mut tensors: Vec<TensorRecord> = params
            .named_params()
            .into_iter()
            .map(|(name, p)| TensorRecord {
                name: name.to_string(),
                shape: p.shape,
                data: p.value.clone(),
            })
            .collect();
        if let Some(bn) = &params.batchnorm {
            for (name, data) in [
                ("bn_running_mean", &bn.running_mean),
                ("bn_running_var", &bn.running_var),
            ] {
                tensors.push(TensorRecord {
                    name: name.into(),
                    shape: [1, params.hidden],
                    data: data.clone(),
                });
            }
        }
        Self {
            format: FORMAT.into(),
            version: CHECKPOINT_VERSION,
            hidden: params.hidden,
            input_channels: INPUT_CHANNELS,
            batchnorm: params.batchnorm.is_some(),
            tensors,
            config,
        }
    }

    pub fn into_params(self) -> Result<ModelParameters> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "unknown format {:?}",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.input_channels != INPUT_CHANNELS {
            return Err(Error::Checkpoint(format!(
                "expected {INPUT_CHANNELS} input channels, found {}",
                self.input_channels
            )));
        }
        let mut params = ModelParameters::zeros(self.hidden, self.batchnorm);
        let take = |name: &str, shape: [usize; 2]| -> Result<Vec<f64>> {
            let rec = self
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if rec.shape != shape || rec.data.len() != shape[0] * shape[1] {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?} ({} values), expected {shape:?}",
                    rec.shape,
                    rec.data.len()
                )));
            }
            Ok(rec.data.clone())
        };
        let h = params.hidden;
        params.w_ih.value = take("w_ih", params.w_ih.shape)?;
        params.w_hh.value = take("w_hh", params.w_hh.shape)?;
        params.bias.value = take("bias", params.bias.shape)?;
        params.head_w.value = take("head_w", params.head_w.shape)?;
        params.head_b.value = take("head_b", params.head_b.shape)?;
        if let Some(bn) = params.batchnorm.as_mut() {
            let BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                ..
            } = bn;
            gamma.value = take("bn_gamma", [1, h])?;
            beta.value = take("bn_beta", [1, h])?;
            *running_mean = take("bn_running_mean", [1, h])?;
            *running_var = take("bn_running_var", [1, h])?;
        }
        Ok(params)
    }
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParameters,
    config: &impl Serialize,
) -> Result<()> {
    let ckpt = Checkpoint::from_params(params, serde_json::to_value(config)?);
    let text = serde_json::to_string_pretty(&ckpt)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParameters, serde_json::Value)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    let config = ckpt.config.clone();
    Ok((ckpt.into_params()?, config))
}
