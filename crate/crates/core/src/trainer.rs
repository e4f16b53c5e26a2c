//! Training with the indirect loss, evaluation against physics-derived UCS,
//! and repeated experiments.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_batches, split_wells, Dataset};
use crate::error::{Error, Result};
use crate::loss::{indirect_loss, LossConfig};
use crate::model::{
    init_parameters, optimizer_step, AdamConfig, InputTensor, Mode, ModelParameters,
    OptimizerState, INPUT_CHANNELS,
};
use crate::physics::{expected_correlation_sign, PhysicsConstants};
use crate::projection::{mean_and_pop_std, ProjectionOperator, ProjectionOptions};
use crate::signfix::{covariance_sign, rescale_to_physical, resolve_orientation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub seq_len: usize,
    pub use_batchnorm: bool,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub iterations: usize,
    pub seed: u64,
    pub normalize_projection: bool,
    pub detach_projection_branch: bool,
    pub covariance_fix_enabled: bool,
    pub ridge_fallback: bool,
    pub train_frac: f64,
    pub physics: PhysicsConstants,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            batch_size: 128,
            seq_len: 150,
            use_batchnorm: true,
            hidden_size: 32,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            iterations: 2000,
            seed: 0,
            normalize_projection: true,
            detach_projection_branch: false,
            covariance_fix_enabled: true,
            ridge_fallback: false,
            train_frac: 0.7,
            physics: PhysicsConstants::default(),
        }
    }
}

impl TrainConfig {
    /// Small configuration used for quick experiments on a 12-well field.
    pub fn desk_scale() -> Self {
        Self {
            batch_size: 32,
            seq_len: 50,
            iterations: 500,
            ..Self::default()
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            normalize_projection: self.normalize_projection,
            detach_projection_branch: self.detach_projection_branch,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    /// Samples per batch, the row count of the projection design matrix.
    pub fn batch_n(&self) -> usize {
        self.batch_size * self.seq_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.seq_len == 0 || self.batch_n() < 3 {
            return Err(Error::Config(format!(
                "batch_size·seq_len must be at least 3 (got {}×{})",
                self.batch_size, self.seq_len
            )));
        }
        if self.hidden_size == 0 {
            return Err(Error::Config("hidden_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "bad learning rate {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam decay rates must lie in [0, 1)".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!(
                "train_frac {} outside (0, 1)",
                self.train_frac
            )));
        }
        Ok(())
    }

    /// Independent seeds for the split, the initial weights and the batch stream.
    fn sub_seeds(&self) -> (u64, u64, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (rng.random(), rng.random(), rng.random())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    /// Per-iteration loss divided by the batch sample count.
    pub loss_history: Vec<f64>,
}

pub fn train(cfg: &TrainConfig, train_ds: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (_, init_seed, batch_seed) = cfg.sub_seeds();
    let mut params = init_parameters(init_seed, cfg.hidden_size, cfg.use_batchnorm)?;
    let mut stream = make_batches(
        train_ds,
        cfg.batch_size,
        cfg.seq_len,
        batch_seed,
        &cfg.physics,
    )?;
    let mut opt = OptimizerState::new(cfg.adam());
    let opts = ProjectionOptions {
        ridge_fallback: cfg.ridge_fallback,
    };
    let loss_cfg = cfg.loss_config();

    let mut loss_history = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let batch = stream.next_batch();
        let (pred, cache) = params.forward(&batch.x, Mode::Train)?;
        let op = ProjectionOperator::with_options(&batch.e, opts)?;
        let loss = indirect_loss(&op, &pred, loss_cfg)?;
        if !loss.value.is_finite() {
            return Err(Error::Divergence {
                iteration,
                loss: loss.value,
            });
        }
        loss_history.push(loss.value / batch.len() as f64);
        params.backward(&cache, &loss.grad)?;
        optimizer_step(&mut params, &mut opt);
        if !params.is_finite() {
            return Err(Error::Divergence {
                iteration,
                loss: loss.value,
            });
        }
    }
    Ok(TrainOutcome {
        params,
        loss_history,
    })
}

/// Window starts that cover `len` samples with `seq_len` windows, the last
/// one shifted back to end exactly at the final sample.
pub fn tile_starts(len: usize, seq_len: usize) -> Vec<usize> {
    if seq_len == 0 || len < seq_len {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..=len - seq_len).step_by(seq_len).collect();
    if len % seq_len != 0 {
        starts.push(len - seq_len);
    }
    starts
}

/// Eval-mode predictions for every sample of one well. Where the final
/// window overlaps its predecessor, the later window wins.
pub fn predict_well(
    params: &mut ModelParameters,
    ds: &Dataset,
    well: usize,
    seq_len: usize,
) -> Result<Vec<f64>> {
    let len = ds.wells()[well].len();
    if seq_len == 0 || seq_len > len {
        return Err(Error::Window {
            seq_len,
            shortest: len,
        });
    }
    let inputs = ds.standardized_inputs(well);
    let starts = tile_starts(len, seq_len);
    let mut data = Vec::with_capacity(starts.len() * seq_len * INPUT_CHANNELS);
    for &s in &starts {
        data.extend_from_slice(&inputs[s * INPUT_CHANNELS..(s + seq_len) * INPUT_CHANNELS]);
    }
    let x = InputTensor::new(starts.len(), seq_len, data)?;
    let (pred, _) = params.forward(&x, Mode::Eval)?;
    let mut out = vec![0.0; len];
    for (w, &s) in starts.iter().enumerate() {
        out[s..s + seq_len].copy_from_slice(&pred[w * seq_len..(w + 1) * seq_len]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcsMoments {
    pub mean: f64,
    pub std: f64,
}

impl UcsMoments {
    pub fn from_dataset(ds: &Dataset, k: &PhysicsConstants) -> Result<Self> {
        let (mean, std) = ds.ucs_moments(k)?;
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellPrediction {
    pub well_id: String,
    pub depth: Vec<f64>,
    pub prediction_physical: Vec<f64>,
    pub ground_truth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub loss_history: Vec<f64>,
    pub test_mse_normalized: f64,
    pub test_mse_physical: f64,
    pub pearson_r: f64,
    /// Pearson r of the raw (unoriented) predictions against test E_dyn.
    pub raw_correlation: f64,
    /// Which mirror solution training landed on: +1 when the raw predictions
    /// already follow the physical trend, −1 otherwise. Unlike
    /// `resolved_sign` this does not default to +1 for weak correlations.
    pub orientation: f64,
    /// Sign chosen by covariance analysis of the raw predictions
    /// (+1 means they already agree with the physics).
    pub resolved_sign: f64,
    /// Whether `resolved_sign` was applied to the predictions.
    pub sign_applied: bool,
    pub confident: bool,
    pub wall_time_secs: f64,
    pub wells: Vec<WellPrediction>,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_and_pop_std(a);
    let (mb, sb) = mean_and_pop_std(b);
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    let n = a.len() as f64;
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / n;
    (cov / (sa * sb)).clamp(-1.0, 1.0)
}

/// Scores standardized predictions (one vector per test well) against
/// physics-derived UCS.
pub fn score_predictions(
    predictions: &[Vec<f64>],
    test_ds: &Dataset,
    moments: UcsMoments,
    k: &PhysicsConstants,
    covariance_fix: bool,
) -> Result<RunReport> {
    if predictions.len() != test_ds.wells().len() {
        return Err(Error::DimensionMismatch {
            expected: test_ds.wells().len(),
            got: predictions.len(),
        });
    }
    let mut f = Vec::with_capacity(test_ds.n_samples());
    let mut e = Vec::with_capacity(test_ds.n_samples());
    let mut u = Vec::with_capacity(test_ds.n_samples());
    for (w, p) in test_ds.wells().iter().zip(predictions) {
        if p.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: p.len(),
            });
        }
        f.extend_from_slice(p);
        e.extend(w.dynamic_moduli(k)?);
        u.extend(w.ucs(k)?);
    }

    let expected = expected_correlation_sign(k)?;
    let (resolved_sign, confident, raw_correlation) = match covariance_sign(&f, &e, expected) {
        Ok(r) => (r.resolved_sign, r.confident, r.correlation),
        Err(_) => (1.0, false, 0.0),
    };
    let orientation = if raw_correlation * expected < 0.0 {
        -1.0
    } else {
        1.0
    };
    let oriented = if covariance_fix {
        resolve_orientation(
            &f,
            &crate::signfix::OrientationReport {
                covariance: 0.0,
                correlation: 0.0,
                resolved_sign,
                confident,
            },
        )
    } else {
        f
    };

    let physical = rescale_to_physical(&oriented, moments.mean, moments.std)?;
    let n = u.len() as f64;
    let test_mse_normalized = oriented
        .iter()
        .zip(&u)
        .map(|(p, ui)| (p - (ui - moments.mean) / moments.std).powi(2))
        .sum::<f64>()
        / n;
    let test_mse_physical = physical
        .iter()
        .zip(&u)
        .map(|(p, ui)| (p - ui).powi(2))
        .sum::<f64>()
        / n;
    let pearson_r = pearson(&oriented, &u);

    let mut wells = Vec::with_capacity(test_ds.wells().len());
    let mut at = 0;
    for w in test_ds.wells() {
        let len = w.len();
        wells.push(WellPrediction {
            well_id: w.well_id.clone(),
            depth: w.samples.iter().map(|s| s.depth).collect(),
            prediction_physical: physical[at..at + len].to_vec(),
            ground_truth: u[at..at + len].to_vec(),
        });
        at += len;
    }

    Ok(RunReport {
        seed: 0,
        loss_history: Vec::new(),
        test_mse_normalized,
        test_mse_physical,
        pearson_r,
        raw_correlation,
        orientation,
        resolved_sign,
        sign_applied: covariance_fix,
        confident,
        wall_time_secs: 0.0,
        wells,
    })
}

pub fn evaluate(
    params: &mut ModelParameters,
    test_ds: &Dataset,
    moments: UcsMoments,
    cfg: &TrainConfig,
) -> Result<RunReport> {
    let predictions = (0..test_ds.wells().len())
        .map(|w| predict_well(params, test_ds, w, cfg.seq_len))
        .collect::<Result<Vec<_>>>()?;
    let mut report = score_predictions(
        &predictions,
        test_ds,
        moments,
        &cfg.physics,
        cfg.covariance_fix_enabled,
    )?;
    report.seed = cfg.seed;
    Ok(report)
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub params: ModelParameters,
    /// Held-out wells of this run's split.
    pub test: Dataset,
    /// Training-set UCS moments used for rescaling.
    pub moments: UcsMoments,
}

/// Split, train and evaluate once with `cfg.seed`.
pub fn run_once(cfg: &TrainConfig, dataset: &Dataset) -> Result<RunArtifacts> {
    cfg.validate()?;
    let started = Instant::now();
    let (split_seed, _, _) = cfg.sub_seeds();
    let (train_ds, test_ds) = split_wells(dataset, cfg.train_frac, split_seed)?;
    let outcome = train(cfg, &train_ds)?;
    let moments = UcsMoments::from_dataset(&train_ds, &cfg.physics)?;
    let mut params = outcome.params;
    let mut report = evaluate(&mut params, &test_ds, moments, cfg)?;
    report.loss_history = outcome.loss_history;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(RunArtifacts {
        report,
        params,
        test: test_ds,
        moments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation; zero for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub run: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug)]
pub struct RepeatedSummary {
    pub requested: usize,
    pub runs: Vec<RunArtifacts>,
    pub failures: Vec<RunFailure>,
    pub mse_normalized: MeanStd,
    pub mse_physical: MeanStd,
    pub pearson_r: MeanStd,
    pub positive_orientations: usize,
    pub negative_orientations: usize,
    pub confident_runs: usize,
}

impl RepeatedSummary {
    fn aggregate(requested: usize, outcomes: Vec<(usize, u64, Result<RunArtifacts>)>) -> Self {
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (run, seed, outcome) in outcomes {
            match outcome {
                Ok(a) => runs.push(a),
                Err(e) => failures.push(RunFailure {
                    run,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
        let collect =
            |f: fn(&RunReport) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r.report)).collect() };
        let mse_normalized = MeanStd::of(&collect(|r| r.test_mse_normalized));
        let mse_physical = MeanStd::of(&collect(|r| r.test_mse_physical));
        let pearson_r = MeanStd::of(&collect(|r| r.pearson_r));
        let positive_orientations = runs.iter().filter(|r| r.report.orientation > 0.0).count();
        let confident_runs = runs.iter().filter(|r| r.report.confident).count();
        Self {
            requested,
            negative_orientations: runs.len() - positive_orientations,
            positive_orientations,
            confident_runs,
            mse_normalized,
            mse_physical,
            pearson_r,
            runs,
            failures,
        }
    }

    pub fn reports(&self) -> impl Iterator<Item = &RunReport> {
        self.runs.iter().map(|r| &r.report)
    }
}

/// `k` independent runs with seeds `cfg.seed + i`. `jobs = 0` uses every
/// available core. Failed runs are recorded and the rest continue.
pub fn run_repeated(
    cfg: &TrainConfig,
    dataset: &Dataset,
    k: usize,
    jobs: usize,
) -> Result<RepeatedSummary> {
    if k == 0 {
        return Err(Error::Config("repetition count must be at least 1".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|i| {
                let run_cfg = TrainConfig {
                    seed: cfg.seed.wrapping_add(i as u64),
                    ..cfg.clone()
                };
                (i, run_cfg.seed, run_once(&run_cfg, dataset))
            })
            .collect::<Vec<_>>()
    });
    Ok(RepeatedSummary::aggregate(k, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_field;

    #[test]
    fn tiling_covers_every_sample_once() {
        assert_eq!(tile_starts(10, 5), vec![0, 5]);
        assert_eq!(tile_starts(12, 5), vec![0, 5, 7]);
        assert_eq!(tile_starts(3, 1), vec![0, 1, 2]);
        assert_eq!(tile_starts(4, 5), Vec::<usize>::new());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 1,
            seq_len: 2,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let ok = TrainConfig {
            batch_size: 3,
            seq_len: 1,
            ..TrainConfig::default()
        };
        assert!(ok.validate().is_ok());
        assert_eq!(TrainConfig::default().batch_n(), 19_200);
    }

    #[test]
    fn zero_iterations_returns_initial_parameters() {
        let ds = generate_synthetic_field(0, 4, 200).unwrap();
        let cfg = TrainConfig {
            iterations: 0,
            hidden_size: 4,
            batch_size: 2,
            seq_len: 5,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &ds).unwrap();
        let (_, init_seed, _) = cfg.sub_seeds();
        assert_eq!(out.params, init_parameters(init_seed, 4, true).unwrap());
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn short_training_is_deterministic() {
        let ds = generate_synthetic_field(1, 4, 200).unwrap();
        let cfg = TrainConfig {
            iterations: 5,
            hidden_size: 4,
            batch_size: 4,
            seq_len: 10,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &ds).unwrap();
        let b = train(&cfg, &ds).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert!(a.loss_history.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn mean_std_single_value() {
        assert_eq!(
            MeanStd::of(&[2.5]),
            MeanStd {
                mean: 2.5,
                std: 0.0
            }
        );
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 2f64.sqrt()).abs() < 1e-15);
    }
}
