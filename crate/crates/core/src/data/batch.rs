use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::model::{InputTensor, INPUT_CHANNELS};
use crate::physics::PhysicsConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub well: usize,
    pub start: usize,
}

/// Standardized inputs plus the raw dynamic moduli of the same samples,
/// both flattened in `b · seq + t` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: InputTensor,
    pub e: Vec<f64>,
    pub windows: Vec<Window>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
}

struct WellCache {
    inputs: Vec<f64>,
    e: Vec<f64>,
}

/// Endless stream of batches of windows drawn with replacement.
pub struct BatchStream {
    wells: Vec<WellCache>,
    batch_size: usize,
    seq_len: usize,
    rng: ChaCha8Rng,
}

pub fn make_batches(
    ds: &Dataset,
    batch_size: usize,
    seq_len: usize,
    seed: u64,
    k: &PhysicsConstants,
) -> Result<BatchStream> {
    if batch_size == 0 || seq_len == 0 {
        return Err(Error::Config(format!(
            "batch size ({batch_size}) and sequence length ({seq_len}) must be positive"
        )));
    }
    if ds.wells().is_empty() {
        return Err(Error::Config("no wells to sample from".into()));
    }
    let shortest = ds.shortest_well();
    if seq_len > shortest {
        return Err(Error::Window { seq_len, shortest });
    }
    let wells = ds
        .wells()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            Ok(WellCache {
                inputs: ds.standardized_inputs(i),
                e: w.dynamic_moduli(k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BatchStream {
        wells,
        batch_size,
        seq_len,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl BatchStream {
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn next_batch(&mut self) -> Batch {
        let (bs, seq) = (self.batch_size, self.seq_len);
        let mut x = Vec::with_capacity(bs * seq * INPUT_CHANNELS);
        let mut e = Vec::with_capacity(bs * seq);
        let mut windows = Vec::with_capacity(bs);
        for _ in 0..bs {
            let well = self.rng.random_range(0..self.wells.len());
            let w = &self.wells[well];
            let start = self.rng.random_range(0..=w.e.len() - seq);
            x.extend_from_slice(&w.inputs[start * INPUT_CHANNELS..(start + seq) * INPUT_CHANNELS]);
            e.extend_from_slice(&w.e[start..start + seq]);
            windows.push(Window { well, start });
        }
        Batch {
            x: InputTensor {
                batch: bs,
                seq,
                data: x,
            },
            e,
            windows,
        }
    }
}

impl Iterator for BatchStream {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        Some(self.next_batch())
    }
}
