//! Brute-force reference implementations for tests. Nothing here calls into
//! the production projection, loss or model code paths; the LSTM reference
//! only reads parameter values.
#![allow(dead_code)]

use indirect_phys::model::ModelParameters;

/// Explicit `A` (n×2) and `P = A (AᵀA)⁻¹ Aᵀ` (n×n).
pub struct DenseProjection {
    pub a: Vec<[f64; 2]>,
    pub p: Vec<Vec<f64>>,
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, String> {
    let n = m.len();
    let mut aug: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        if aug[pivot][col].abs() <= 1e-14 * scale {
            return Err("singular Gram matrix".into());
        }
        aug.swap(col, pivot);
        let d = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= d);
        for row in 0..n {
            if row != col {
                let factor = aug[row][col];
                let pivot_row = aug[col].clone();
                for (v, pv) in aug[row].iter_mut().zip(pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
    }
    Ok(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

impl DenseProjection {
    pub fn new(e: &[f64]) -> Result<Self, String> {
        let n = e.len();
        assert!((3..=300).contains(&n), "dense oracle is for 3 ≤ n ≤ 300");
        let a: Vec<[f64; 2]> = e.iter().map(|&v| [v, 1.0]).collect();
        let mut ata = vec![vec![0.0; 2]; 2];
        for row in &a {
            for i in 0..2 {
                for j in 0..2 {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
        let inv = invert(&ata)?;
        // A (AᵀA)⁻¹, n×2
        let a_inv: Vec<[f64; 2]> = a
            .iter()
            .map(|row| {
                [
                    row[0] * inv[0][0] + row[1] * inv[1][0],
                    row[0] * inv[0][1] + row[1] * inv[1][1],
                ]
            })
            .collect();
        let p = a_inv
            .iter()
            .map(|l| a.iter().map(|r| l[0] * r[0] + l[1] * r[1]).collect())
            .collect();
        Ok(Self { a, p })
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.p
            .iter()
            .map(|row| row.iter().zip(y).map(|(p, v)| p * v).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.p.len()).map(|i| self.p[i][i]).sum()
    }
}

pub fn dense_project(e: &[f64], y: &[f64]) -> Result<Vec<f64>, String> {
    Ok(DenseProjection::new(e)?.apply(y))
}

/// Central differences, one coordinate at a time.
pub fn numeric_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    assert!((1e-7..=1e-3).contains(&h));
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar-loop LSTM forward. `x[b][t][c]`; batch norm (if present) uses the
/// statistics of this batch when `train` is set, running statistics otherwise.
pub fn reference_lstm_forward(
    params: &ModelParameters,
    x: &[Vec<[f64; 4]>],
    train: bool,
) -> Vec<Vec<f64>> {
    let h = params.hidden;
    let w_ih = |row: usize, c: usize| params.w_ih.value[row * 4 + c];
    let w_hh = |row: usize, c: usize| params.w_hh.value[row * h + c];
    let bias = |row: usize| params.bias.value[row];

    let mut hidden_states: Vec<Vec<Vec<f64>>> = Vec::new();
    for seq in x {
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut per_step = Vec::new();
        for xt in seq {
            let mut new_h = vec![0.0; h];
            let mut new_c = vec![0.0; h];
            for unit in 0..h {
                let mut pre = [0.0; 4];
                for (gate, slot) in pre.iter_mut().enumerate() {
                    let row = gate * h + unit;
                    let mut acc = bias(row);
                    for c in 0..4 {
                        acc += w_ih(row, c) * xt[c];
                    }
                    for k in 0..h {
                        acc += w_hh(row, k) * hs[k];
                    }
                    *slot = acc;
                }
                let i = sigmoid(pre[0]);
                let f = sigmoid(pre[1]);
                let g = pre[2].tanh();
                let o = sigmoid(pre[3]);
                new_c[unit] = f * cs[unit] + i * g;
                new_h[unit] = o * new_c[unit].tanh();
            }
            hs = new_h;
            cs = new_c;
            per_step.push(hs.clone());
        }
        hidden_states.push(per_step);
    }

    let mut features = hidden_states.clone();
    if let Some(bn) = &params.batchnorm {
        for unit in 0..h {
            let (mean, var) = if train {
                let vals: Vec<f64> = hidden_states.iter().flatten().map(|v| v[unit]).collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let v = vals.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / vals.len() as f64;
                (m, v)
            } else {
                (bn.running_mean[unit], bn.running_var[unit])
            };
            for seq in features.iter_mut() {
                for step in seq.iter_mut() {
                    step[unit] = bn.gamma.value[unit] * (step[unit] - mean) / (var + bn.eps).sqrt()
                        + bn.beta.value[unit];
                }
            }
        }
    }

    features
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|v| {
                    let mut out = params.head_b.value[0];
                    for k in 0..h {
                        out += params.head_w.value[k] * v[k];
                    }
                    out
                })
                .collect()
        })
        .collect()
}
