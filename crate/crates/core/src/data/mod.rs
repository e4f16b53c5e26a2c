//! Well logs: records, datasets with input standardization, well-level
//! splitting, and random window batches.

mod batch;
mod synthetic;
mod table;

pub use batch::{make_batches, Batch, BatchStream, Window};
pub use synthetic::generate_synthetic_field;
pub use table::{load_table, write_table, LoadReport, RowRejection, TABLE_HEADER};

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::INPUT_CHANNELS;
use crate::physics::{dynamic_youngs_modulus, ucs_from_logs, PhysicsConstants, SonicSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellSample {
    pub depth: f64,
    pub density: f64,
    pub resistivity: f64,
    pub gamma: f64,
    pub dts: f64,
    pub dtp: f64,
}

impl WellSample {
    pub fn sonic(&self) -> SonicSample {
        SonicSample::new(self.density, self.dts, self.dtp)
    }

    /// Model inputs before standardization: depth, density, resistivity, gamma.
    pub fn inputs(&self) -> [f64; INPUT_CHANNELS] {
        [self.depth, self.density, self.resistivity, self.gamma]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellRecord {
    pub well_id: String,
    pub samples: Vec<WellSample>,
}

impl WellRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptyWell(self.well_id.clone()));
        }
        for pair in self.samples.windows(2) {
            if !(pair[1].depth > pair[0].depth) {
                return Err(Error::Config(format!(
                    "well {}: depth not strictly increasing at {}",
                    self.well_id, pair[1].depth
                )));
            }
        }
        for s in &self.samples {
            s.sonic().validate()?;
            if !s.inputs().iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!(
                    "well {}: non-finite input at depth {}",
                    self.well_id, s.depth
                )));
            }
        }
        Ok(())
    }

    pub fn dynamic_moduli(&self, k: &PhysicsConstants) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| dynamic_youngs_modulus(s.sonic(), k))
            .collect()
    }

    /// Physics-derived UCS at every depth.
    pub fn ucs(&self, k: &PhysicsConstants) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| ucs_from_logs(s.sonic(), k))
            .collect()
    }
}

/// Per-channel moments used to standardize model inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: [f64; INPUT_CHANNELS],
    pub std: [f64; INPUT_CHANNELS],
}

impl Standardization {
    pub fn fit(wells: &[WellRecord]) -> Self {
        let mut mean = [0.0; INPUT_CHANNELS];
        let mut count = 0usize;
        for s in wells.iter().flat_map(|w| &w.samples) {
            for (m, v) in mean.iter_mut().zip(s.inputs()) {
                *m += v;
            }
            count += 1;
        }
        let n = count.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; INPUT_CHANNELS];
        for s in wells.iter().flat_map(|w| &w.samples) {
            for ((acc, m), v) in var.iter_mut().zip(&mean).zip(s.inputs()) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        });
        Self { mean, std }
    }

    pub fn apply(&self, raw: [f64; INPUT_CHANNELS]) -> [f64; INPUT_CHANNELS] {
        let mut out = raw;
        for ((o, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *o = (*o - m) / s;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    wells: Vec<WellRecord>,
    standardization: Standardization,
}

impl Dataset {
    /// Validates the wells and fits the input standardization on them.
    pub fn new(wells: Vec<WellRecord>) -> Result<Self> {
        let standardization = Standardization::fit(&wells);
        Self::with_standardization(wells, standardization)
    }

    /// Validates the wells and adopts moments fitted elsewhere (the training set).
    pub fn with_standardization(
        wells: Vec<WellRecord>,
        standardization: Standardization,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for w in &wells {
            if !seen.insert(w.well_id.as_str()) {
                return Err(Error::Config(format!("duplicate well id {}", w.well_id)));
            }
            w.validate()?;
        }
        Ok(Self {
            wells,
            standardization,
        })
    }

    pub fn wells(&self) -> &[WellRecord] {
        &self.wells
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn n_samples(&self) -> usize {
        self.wells.iter().map(WellRecord::len).sum()
    }

    pub fn shortest_well(&self) -> usize {
        self.wells.iter().map(WellRecord::len).min().unwrap_or(0)
    }

    pub fn well_ids(&self) -> Vec<&str> {
        self.wells.iter().map(|w| w.well_id.as_str()).collect()
    }

    /// Standardized inputs of one well, flattened `[t · 4 + channel]`.
    pub fn standardized_inputs(&self, well: usize) -> Vec<f64> {
        self.wells[well]
            .samples
            .iter()
            .flat_map(|s| self.standardization.apply(s.inputs()))
            .collect()
    }

    /// Mean and population standard deviation of physics-derived UCS.
    pub fn ucs_moments(&self, k: &PhysicsConstants) -> Result<(f64, f64)> {
        let mut all = Vec::with_capacity(self.n_samples());
        for w in &self.wells {
            all.extend(w.ucs(k)?);
        }
        if all.is_empty() {
            return Err(Error::Degenerate("no samples for UCS moments".into()));
        }
        Ok(crate::projection::mean_and_pop_std(&all))
    }
}

/// Well-level train/test split; the training side gets `round(train_frac · n)`
/// wells and both sides share the training-set standardization.
pub fn split_wells(ds: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.wells.len();
    let n_train = (train_frac * n as f64).round() as usize;
    if !(train_frac > 0.0 && train_frac < 1.0) || n_train == 0 || n_train >= n {
        return Err(Error::InsufficientWells {
            wells: n,
            train_frac,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let pick = |idx: &[usize]| idx.iter().map(|&i| ds.wells[i].clone()).collect::<Vec<_>>();
    let train = Dataset::new(pick(&train_idx))?;
    let test = Dataset::with_standardization(pick(&test_idx), train.standardization)?;
    Ok((train, test))
}
