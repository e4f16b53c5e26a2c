use crate::error::{Error, Result};

use super::{InputTensor, ModelParameters, GATES, INPUT_CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; running statistics are updated.
    Train,
    /// Running statistics in batch norm; every sequence is independent.
    Eval,
}

/// Intermediates from [`ModelParameters::forward`] needed by the backward pass.
/// Per-position arrays are indexed by `b · seq + t`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    batch: usize,
    seq: usize,
    hidden: usize,
    x: Vec<f64>,
    /// Post-activation gates `[i f g o]`, `4H` per position.
    gates: Vec<f64>,
    cell: Vec<f64>,
    cell_tanh: Vec<f64>,
    hidden_states: Vec<f64>,
    /// Head input: normalized hidden states, or the raw ones without batch norm.
    head_in: Vec<f64>,
    /// Per-feature `1/√(var + eps)` of the batch (train mode only).
    bn_inv_std: Vec<f64>,
    /// Standardized hidden states before scale and shift.
    bn_xhat: Vec<f64>,
}

impl ForwardCache {
    pub fn shape(&self) -> (usize, usize) {
        (self.batch, self.seq)
    }

    pub fn hidden_states(&self) -> &[f64] {
        &self.hidden_states
    }

    /// Inputs to the dense head (batch-normalized when the layer is present).
    pub fn head_inputs(&self) -> &[f64] {
        &self.head_in
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ModelParameters {
    /// Runs the recurrence from a zero state and returns one prediction per
    /// position, laid out like the input (`b · seq + t`).
    pub fn forward(&mut self, x: &InputTensor, mode: Mode) -> Result<(Vec<f64>, ForwardCache)> {
        let (batch, seq, hidden) = (x.batch, x.seq, self.hidden);
        if x.data.len() != batch * seq * INPUT_CHANNELS || seq == 0 || batch == 0 {
            return Err(Error::Shape(format!(
                "input holds {} values for a {batch}×{seq}×{INPUT_CHANNELS} tensor",
                x.data.len()
            )));
        }
        let positions = batch * seq;
        let g4 = GATES * hidden;
        let mut gates = vec![0.0; positions * g4];
        let mut cell = vec![0.0; positions * hidden];
        let mut cell_tanh = vec![0.0; positions * hidden];
        let mut hs = vec![0.0; positions * hidden];

        let w_ih = &self.w_ih.value;
        let w_hh = &self.w_hh.value;
        let bias = &self.bias.value;
        let zeros = vec![0.0; hidden];
        let mut pre = vec![0.0; g4];

        for b in 0..batch {
            for t in 0..seq {
                let pos = b * seq + t;
                let xt = x.step(b, t);
                let (h_prev, c_prev) = if t == 0 {
                    (&zeros[..], &zeros[..])
                } else {
                    let prev = (pos - 1) * hidden;
                    (&hs[prev..prev + hidden], &cell[prev..prev + hidden])
                };
                for j in 0..g4 {
                    let wi = &w_ih[j * INPUT_CHANNELS..(j + 1) * INPUT_CHANNELS];
                    let wh = &w_hh[j * hidden..(j + 1) * hidden];
                    let mut acc = bias[j];
                    for k in 0..INPUT_CHANNELS {
                        acc += wi[k] * xt[k];
                    }
                    for k in 0..hidden {
                        acc += wh[k] * h_prev[k];
                    }
                    pre[j] = acc;
                }
                let gate = &mut gates[pos * g4..(pos + 1) * g4];
                let mut c_new = vec![0.0; hidden];
                for k in 0..hidden {
                    let i = sigmoid(pre[k]);
                    let f = sigmoid(pre[hidden + k]);
                    let g = pre[2 * hidden + k].tanh();
                    let o = sigmoid(pre[3 * hidden + k]);
                    gate[k] = i;
                    gate[hidden + k] = f;
                    gate[2 * hidden + k] = g;
                    gate[3 * hidden + k] = o;
                    c_new[k] = f * c_prev[k] + i * g;
                }
                let at = pos * hidden;
                for k in 0..hidden {
                    let ct = c_new[k].tanh();
                    cell[at + k] = c_new[k];
                    cell_tanh[at + k] = ct;
                    hs[at + k] = gate[3 * hidden + k] * ct;
                }
            }
        }

        let mut head_in = hs.clone();
        let mut bn_inv_std = Vec::new();
        let mut bn_xhat = Vec::new();
        if let Some(bn) = &mut self.batchnorm {
            match mode {
                Mode::Train => {
                    let n = positions as f64;
                    let mut mean = vec![0.0; hidden];
                    let mut var = vec![0.0; hidden];
                    for row in hs.chunks_exact(hidden) {
                        for k in 0..hidden {
                            mean[k] += row[k];
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= n);
                    for row in hs.chunks_exact(hidden) {
                        for k in 0..hidden {
                            let d = row[k] - mean[k];
                            var[k] += d * d;
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= n);
                    bn_inv_std = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
                    bn_xhat = vec![0.0; positions * hidden];
                    for (p, row) in hs.chunks_exact(hidden).enumerate() {
                        for k in 0..hidden {
                            let xh = (row[k] - mean[k]) * bn_inv_std[k];
                            bn_xhat[p * hidden + k] = xh;
                            head_in[p * hidden + k] = bn.gamma.value[k] * xh + bn.beta.value[k];
                        }
                    }
                    for k in 0..hidden {
                        bn.running_mean[k] =
                            bn.momentum * bn.running_mean[k] + (1.0 - bn.momentum) * mean[k];
                        bn.running_var[k] =
                            bn.momentum * bn.running_var[k] + (1.0 - bn.momentum) * var[k];
                    }
                }
                Mode::Eval => {
                    for row in head_in.chunks_exact_mut(hidden) {
                        for k in 0..hidden {
                            let inv = 1.0 / (bn.running_var[k] + bn.eps).sqrt();
                            row[k] = bn.gamma.value[k] * (row[k] - bn.running_mean[k]) * inv
                                + bn.beta.value[k];
                        }
                    }
                }
            }
        }

        let hw = &self.head_w.value;
        let hb = self.head_b.value[0];
        let preds = head_in
            .chunks_exact(hidden)
            .map(|row| hb + row.iter().zip(hw).map(|(a, w)| a * w).sum::<f64>())
            .collect();

        let cache = ForwardCache {
            mode,
            batch,
            seq,
            hidden,
            x: x.data.clone(),
            gates,
            cell,
            cell_tanh,
            hidden_states: hs,
            head_in,
            bn_inv_std,
            bn_xhat,
        };
        Ok((preds, cache))
    }

    /// Backpropagation through time. Gradients are added to each parameter's
    /// `grad` buffer.
    pub fn backward(&mut self, cache: &ForwardCache, d_pred: &[f64]) -> Result<()> {
        let (batch, seq, hidden) = (cache.batch, cache.seq, cache.hidden);
        let positions = batch * seq;
        if hidden != self.hidden {
            return Err(Error::StaleCache(format!(
                "cache hidden size {hidden} but model has {}",
                self.hidden
            )));
        }
        if d_pred.len() != positions {
            return Err(Error::StaleCache(format!(
                "{} output gradients for {positions} cached positions",
                d_pred.len()
            )));
        }
        if self.batchnorm.is_some() && cache.mode != Mode::Train {
            return Err(Error::StaleCache(
                "backward through batch norm needs a train-mode forward".into(),
            ));
        }
        if self.batchnorm.is_some() != !cache.bn_xhat.is_empty() && cache.mode == Mode::Train {
            return Err(Error::StaleCache(
                "batch-norm layout changed since forward".into(),
            ));
        }

        // Dense head.
        let mut d_head_in = vec![0.0; positions * hidden];
        {
            let hw = &self.head_w.value;
            let gw = &mut self.head_w.grad;
            let mut gb = 0.0;
            for (p, &dp) in d_pred.iter().enumerate() {
                let row = &cache.head_in[p * hidden..(p + 1) * hidden];
                let drow = &mut d_head_in[p * hidden..(p + 1) * hidden];
                for k in 0..hidden {
                    gw[k] += dp * row[k];
                    drow[k] = dp * hw[k];
                }
                gb += dp;
            }
            self.head_b.grad[0] += gb;
        }

        // Batch norm.
        let d_hidden = match &mut self.batchnorm {
            None => d_head_in,
            Some(bn) => {
                let n = positions as f64;
                let mut sum_dxhat = vec![0.0; hidden];
                let mut sum_dxhat_xhat = vec![0.0; hidden];
                for p in 0..positions {
                    for k in 0..hidden {
                        let dy = d_head_in[p * hidden + k];
                        let xh = cache.bn_xhat[p * hidden + k];
                        bn.gamma.grad[k] += dy * xh;
                        bn.beta.grad[k] += dy;
                        let dxh = dy * bn.gamma.value[k];
                        sum_dxhat[k] += dxh;
                        sum_dxhat_xhat[k] += dxh * xh;
                    }
                }
                let mut dh = vec![0.0; positions * hidden];
                for p in 0..positions {
                    for k in 0..hidden {
                        let xh = cache.bn_xhat[p * hidden + k];
                        let dxh = d_head_in[p * hidden + k] * bn.gamma.value[k];
                        dh[p * hidden + k] = cache.bn_inv_std[k] / n
                            * (n * dxh - sum_dxhat[k] - xh * sum_dxhat_xhat[k]);
                    }
                }
                dh
            }
        };

        // Recurrence, newest step first.
        let g4 = GATES * hidden;
        let w_hh = &self.w_hh.value;
        let gw_ih = &mut self.w_ih.grad;
        let gw_hh = &mut self.w_hh.grad;
        let gbias = &mut self.bias.grad;
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut da = vec![0.0; g4];
        for b in 0..batch {
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            dc_next.iter_mut().for_each(|v| *v = 0.0);
            for t in (0..seq).rev() {
                let pos = b * seq + t;
                let at = pos * hidden;
                let gate = &cache.gates[pos * g4..(pos + 1) * g4];
                for k in 0..hidden {
                    let i = gate[k];
                    let f = gate[hidden + k];
                    let g = gate[2 * hidden + k];
                    let o = gate[3 * hidden + k];
                    let ct = cache.cell_tanh[at + k];
                    let c_prev = if t == 0 {
                        0.0
                    } else {
                        cache.cell[at - hidden + k]
                    };
                    let dh = d_hidden[at + k] + dh_next[k];
                    let dc = dh * o * (1.0 - ct * ct) + dc_next[k];
                    da[k] = dc * g * i * (1.0 - i);
                    da[hidden + k] = dc * c_prev * f * (1.0 - f);
                    da[2 * hidden + k] = dc * i * (1.0 - g * g);
                    da[3 * hidden + k] = dh * ct * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                let xt = &cache.x[pos * INPUT_CHANNELS..(pos + 1) * INPUT_CHANNELS];
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..g4 {
                    let d = da[j];
                    gbias[j] += d;
                    let gi = &mut gw_ih[j * INPUT_CHANNELS..(j + 1) * INPUT_CHANNELS];
                    for k in 0..INPUT_CHANNELS {
                        gi[k] += d * xt[k];
                    }
                    if t > 0 {
                        let h_prev = &cache.hidden_states[at - hidden..at];
                        let gh = &mut gw_hh[j * hidden..(j + 1) * hidden];
                        let wh = &w_hh[j * hidden..(j + 1) * hidden];
                        for k in 0..hidden {
                            gh[k] += d * h_prev[k];
                            dh_next[k] += d * wh[k];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_parameters;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(seed: u64, batch: usize, seq: usize) -> InputTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..batch * seq * INPUT_CHANNELS)
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        InputTensor::new(batch, seq, data).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut p = ModelParameters::zeros(6, false);
        let (out, cache) = p.forward(&random_input(0, 3, 5), Mode::Train).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        assert!(cache.hidden_states().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_step_matches_one_cell() {
        let mut p = init_parameters(9, 3, false).unwrap();
        let x = random_input(1, 1, 1);
        let (out, _) = p.forward(&x, Mode::Eval).unwrap();
        let h = 3;
        let xt = x.step(0, 0);
        let pre = |j: usize| {
            p.bias.value[j] + (0..4).map(|k| p.w_ih.value[j * 4 + k] * xt[k]).sum::<f64>()
        };
        let mut expected = p.head_b.value[0];
        for k in 0..h {
            let i = sigmoid(pre(k));
            let g = pre(2 * h + k).tanh();
            let o = sigmoid(pre(3 * h + k));
            expected += p.head_w.value[k] * o * (i * g).tanh();
        }
        assert!((out[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut p = init_parameters(2, 4, true).unwrap();
        let (_, cache) = p.forward(&random_input(2, 2, 4), Mode::Train).unwrap();
        p.backward(&cache, &[0.0; 8]).unwrap();
        for (name, t) in p.named_params() {
            assert!(t.grad.iter().all(|g| *g == 0.0), "{name}");
        }
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let mut p = init_parameters(2, 4, true).unwrap();
        let (_, cache) = p.forward(&random_input(2, 2, 4), Mode::Train).unwrap();
        assert!(matches!(
            p.backward(&cache, &[0.0; 7]),
            Err(Error::StaleCache(_))
        ));
        let (_, eval_cache) = p.forward(&random_input(2, 2, 4), Mode::Eval).unwrap();
        assert!(p.backward(&eval_cache, &[0.0; 8]).is_err());
        let mut other = init_parameters(2, 5, true).unwrap();
        assert!(other.backward(&cache, &[0.0; 8]).is_err());
    }

    #[test]
    fn batchnorm_train_outputs_are_standardized() {
        let mut p = init_parameters(4, 6, true).unwrap();
        let (_, cache) = p.forward(&random_input(4, 8, 10), Mode::Train).unwrap();
        let h = 6;
        let rows: Vec<&[f64]> = cache.head_inputs().chunks_exact(h).collect();
        let n = rows.len() as f64;
        for k in 0..h {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6, "{mean}");
            assert!((var - 1.0).abs() < 1e-6, "{var}");
        }
        let bn = p.batchnorm.as_ref().unwrap();
        assert!(bn.running_var.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn eval_mode_is_batch_size_invariant() {
        let mut p = init_parameters(5, 4, true).unwrap();
        // Move the running statistics away from their initial values.
        p.forward(&random_input(7, 4, 6), Mode::Train).unwrap();
        let batch = random_input(8, 3, 6);
        let (all, _) = p.forward(&batch, Mode::Eval).unwrap();
        for b in 0..3 {
            let one = InputTensor::new(1, 6, batch.data[b * 24..(b + 1) * 24].to_vec()).unwrap();
            let (alone, _) = p.forward(&one, Mode::Eval).unwrap();
            for t in 0..6 {
                assert!((alone[t] - all[b * 6 + t]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut p = init_parameters(3, 5, false).unwrap();
        let x = random_input(3, 2, 7);
        let (a, _) = p.forward(&x, Mode::Train).unwrap();
        let (b, _) = p.forward(&x, Mode::Train).unwrap();
        assert_eq!(a, b);
    }
}
