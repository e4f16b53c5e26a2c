//! Layered-strata well-log generator.
//!
//! Each well walks a Markov chain over four rock types with a mean layer
//! thickness of about 30 samples. Layers draw their density, gamma and
//! resistivity levels from facies ranges, and AR(1) noise wanders on top.
//! Compressional slowness follows density; shear slowness is a facies- and
//! gamma-dependent multiple `r ∈ [1.6, 1.9]` of it, which keeps every sample
//! inside the physical region (`r > 2/√3`).
//!
//! Units: depth m, density g/cm³, resistivity Ω·m, gamma API, slowness µs/mm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, WellRecord, WellSample};
use crate::error::{Error, Result};

struct Facies {
    density: (f64, f64),
    gamma: (f64, f64),
    log_resistivity: (f64, f64),
    slowness_ratio: f64,
}

const FACIES: [Facies; 4] = [
    // shale
    Facies {
        density: (2.38, 2.55),
        gamma: (85.0, 135.0),
        log_resistivity: (0.0, 0.6),
        slowness_ratio: 1.84,
    },
    // sandstone
    Facies {
        density: (2.15, 2.35),
        gamma: (20.0, 55.0),
        log_resistivity: (0.8, 1.5),
        slowness_ratio: 1.65,
    },
    // limestone
    Facies {
        density: (2.50, 2.68),
        gamma: (10.0, 30.0),
        log_resistivity: (1.4, 2.0),
        slowness_ratio: 1.80,
    },
    // dolomite
    Facies {
        density: (2.66, 2.82),
        gamma: (15.0, 40.0),
        log_resistivity: (1.6, 2.3),
        slowness_ratio: 1.72,
    },
];

const MEAN_LAYER_SAMPLES: f64 = 30.0;
const DEPTH_STEP: f64 = 0.5;
const COMPACTION_PER_M: f64 = 8e-5;
const AR_COEFF: f64 = 0.9;

/// AR(1) process with a given stationary standard deviation.
struct Ar1 {
    value: f64,
    innovation: Normal<f64>,
}

impl Ar1 {
    fn new(std: f64, rng: &mut ChaCha8Rng) -> Self {
        let innovation = Normal::new(0.0, std * (1.0 - AR_COEFF * AR_COEFF).sqrt()).unwrap();
        let value = Normal::new(0.0, std).unwrap().sample(rng);
        Self { value, innovation }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.value = AR_COEFF * self.value + self.innovation.sample(rng);
        self.value
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..range.1)
}

fn generate_well(well_id: String, n: usize, rng: &mut ChaCha8Rng) -> WellRecord {
    let start_depth = rng.random_range(1800.0..2600.0);
    let mut density_noise = Ar1::new(0.015, rng);
    let mut gamma_noise = Ar1::new(4.0, rng);
    let mut resistivity_noise = Ar1::new(0.05, rng);
    let mut slowness_noise = Ar1::new(0.01, rng);
    let tool_noise = Normal::new(0.0, 0.02).unwrap();

    let mut facies = rng.random_range(0..FACIES.len());
    let mut layer = (0.0, 0.0, 0.0);
    let mut new_layer = true;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.random::<f64>() < 1.0 / MEAN_LAYER_SAMPLES {
            facies = (facies + rng.random_range(1..FACIES.len())) % FACIES.len();
            new_layer = true;
        }
        let fc = &FACIES[facies];
        if new_layer {
            layer = (
                uniform(rng, fc.density),
                uniform(rng, fc.gamma),
                uniform(rng, fc.log_resistivity),
            );
            new_layer = false;
        }

        let depth = start_depth + i as f64 * DEPTH_STEP;
        let true_density = layer.0 + COMPACTION_PER_M * (depth - 2000.0) + density_noise.next(rng);
        let gamma = (layer.1 + gamma_noise.next(rng)).max(0.0);
        let resistivity = 10f64.powf(layer.2 + resistivity_noise.next(rng));

        // Faster rock is denser; slowness in µs/mm is 1 / (km/s).
        let vp = 1.8 + 3.0 * (true_density - 2.0);
        let dtp = (1.0 + slowness_noise.next(rng)) / vp;
        let ratio = (fc.slowness_ratio + 0.04 * ((gamma - 60.0) / 25.0).tanh()).clamp(1.6, 1.9);
        let dts = ratio * dtp;

        samples.push(WellSample {
            depth,
            density: true_density + tool_noise.sample(rng),
            resistivity,
            gamma,
            dts,
            dtp,
        });
    }
    WellRecord { well_id, samples }
}

pub fn generate_synthetic_field(
    seed: u64,
    n_wells: usize,
    samples_per_well: usize,
) -> Result<Dataset> {
    if n_wells < 2 {
        return Err(Error::Config(format!(
            "need at least 2 wells, got {n_wells}"
        )));
    }
    if samples_per_well < 200 {
        return Err(Error::Config(format!(
            "need at least 200 samples per well, got {samples_per_well}"
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let width = n_wells.to_string().len().max(2);
    let wells = (0..n_wells)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.random());
            generate_well(format!("W{:0width$}", i + 1), samples_per_well, &mut rng)
        })
        .collect();
    Dataset::new(wells)
}
