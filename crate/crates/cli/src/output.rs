use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use indirect_phys::model::save_checkpoint;
use indirect_phys::trainer::{RunArtifacts, RunReport};
use indirect_phys::{RepeatedSummary, TrainConfig};
use serde::Serialize;

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Metric {
    metric: &'static str,
    value: String,
}

fn metric(metric: &'static str, value: impl ToString) -> Metric {
    Metric {
        metric,
        value: value.to_string(),
    }
}

#[derive(Serialize)]
struct LossRow {
    iteration: usize,
    loss: f64,
}

#[derive(Serialize)]
struct PredictionRow {
    depth: f64,
    prediction_physical: f64,
    ground_truth: f64,
}

#[derive(Serialize)]
struct OrientationRow {
    run: usize,
    seed: u64,
    orientation: i8,
    raw_correlation: f64,
    resolved_sign: i8,
    sign_applied: bool,
    confident: bool,
    pearson_r: f64,
}

#[derive(Serialize)]
pub struct SweepRow {
    pub param_name: &'static str,
    pub param_value: String,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub k: usize,
}

fn orientation(run: usize, r: &RunReport) -> OrientationRow {
    OrientationRow {
        run,
        seed: r.seed,
        orientation: r.orientation as i8,
        raw_correlation: r.raw_correlation,
        resolved_sign: r.resolved_sign as i8,
        sign_applied: r.sign_applied,
        confident: r.confident,
        pearson_r: r.pearson_r,
    }
}

/// Writes every artifact of one completed run into `dir`.
pub fn write_run(dir: &Path, run: &RunArtifacts, cfg: &TrainConfig) -> Result<()> {
    let r = &run.report;
    let final_loss = r.loss_history.last().copied().unwrap_or(f64::NAN);
    write_rows(
        &dir.join("run_report.csv"),
        [
            metric("seed", r.seed),
            metric("batch_n", cfg.batch_n()),
            metric("iterations", r.loss_history.len()),
            metric("final_loss", final_loss),
            metric("test_wells", r.wells.len()),
            metric("test_mse_normalized", r.test_mse_normalized),
            metric("test_mse_physical", r.test_mse_physical),
            metric("pearson_r", r.pearson_r),
            metric("raw_correlation", r.raw_correlation),
            metric("orientation", r.orientation),
            metric("resolved_sign", r.resolved_sign),
            metric("sign_applied", r.sign_applied),
            metric("confident", r.confident),
        ],
    )?;
    write_rows(
        &dir.join("loss_history.csv"),
        r.loss_history
            .iter()
            .enumerate()
            .map(|(iteration, &loss)| LossRow { iteration, loss }),
    )?;
    for well in &r.wells {
        write_rows(
            &dir.join(format!("predictions_{}.csv", well.well_id)),
            (0..well.depth.len()).map(|i| PredictionRow {
                depth: well.depth[i],
                prediction_physical: well.prediction_physical[i],
                ground_truth: well.ground_truth[i],
            }),
        )?;
    }
    save_checkpoint(&dir.join("checkpoint.json"), &run.params, cfg)
        .with_context(|| format!("writing checkpoint in {}", dir.display()))
}

/// Per-run orientation outcomes, one row per completed run.
pub fn write_orientations(dir: &Path, summary: &RepeatedSummary, base_seed: u64) -> Result<()> {
    write_rows(
        &dir.join("orientations.csv"),
        summary.reports().map(|r| {
            let index = r.seed.wrapping_sub(base_seed) as usize;
            orientation(index, r)
        }),
    )
}

/// Aggregate metrics over all repetitions.
pub fn write_aggregate(dir: &Path, summary: &RepeatedSummary, cfg: &TrainConfig) -> Result<()> {
    write_rows(
        &dir.join("run_report.csv"),
        [
            metric("seed", cfg.seed),
            metric("batch_n", cfg.batch_n()),
            metric("iterations", cfg.iterations),
            metric("runs_requested", summary.requested),
            metric("runs_completed", summary.runs.len()),
            metric("runs_failed", summary.failures.len()),
            metric("test_mse_normalized_mean", summary.mse_normalized.mean),
            metric("test_mse_normalized_std", summary.mse_normalized.std),
            metric("test_mse_physical_mean", summary.mse_physical.mean),
            metric("test_mse_physical_std", summary.mse_physical.std),
            metric("pearson_r_mean", summary.pearson_r.mean),
            metric("pearson_r_std", summary.pearson_r.std),
            metric("positive_orientations", summary.positive_orientations),
            metric("negative_orientations", summary.negative_orientations),
            metric("confident_runs", summary.confident_runs),
        ],
    )
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(&dir.join("sweep.csv"), rows)
}
