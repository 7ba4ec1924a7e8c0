//! Model JSON persistence and the threaded restart driver.

use radiomap_core::dataset::MeasurementSet;
use radiomap_core::gpr::{init_heuristics, optimize_from, restart_starts, FitOptions, GprModel, RestartLog, TrainingData};
use radiomap_core::kernels::{KernelKind, KernelSpec};
use radiomap_core::Point;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MODEL_FORMAT: &str = "radiomap-gpr/1";

/// Everything needed to rebuild a fitted model. The Cholesky factor is
/// recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub spec: KernelSpec,
    pub log_marginal_likelihood: f64,
    pub target_offset: f64,
    pub points: Vec<Point>,
    /// Targets with `target_offset` already subtracted.
    pub centered_targets: Vec<f64>,
    pub per_point_noise: Vec<f64>,
    pub fit_log: Vec<RestartLog>,
}

impl ModelFile {
    pub fn from_model(model: &GprModel) -> Self {
        let d = model.data();
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            spec: *model.spec(),
            log_marginal_likelihood: model.log_marginal_likelihood(),
            target_offset: d.offset,
            points: d.points.clone(),
            centered_targets: d.targets.clone(),
            per_point_noise: d.noise.clone(),
            fit_log: model.fit_log().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<GprModel> {
        if self.format != MODEL_FORMAT {
            return Err(CliError::format(format!("model: unsupported format {:?}, expected {MODEL_FORMAT:?}", self.format)));
        }
        let data = TrainingData {
            points: self.points,
            targets: self.centered_targets,
            offset: self.target_offset,
            noise: self.per_point_noise,
        };
        Ok(GprModel::condition(data, self.spec, self.fit_log)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Same result as [`GprModel::fit`], with each restart on its own thread.
pub fn fit_threaded(train: &MeasurementSet, kind: KernelKind, opts: &FitOptions) -> Result<GprModel> {
    if opts.n_restarts == 0 {
        return Err(CliError::Usage("n_restarts must be >= 1".into()));
    }
    let data = TrainingData::from_set(train)?;
    let init = init_heuristics(train, kind)?;
    let starts = restart_starts(&init, opts.n_restarts, opts.seed);
    let logs: Vec<RestartLog> = std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .iter()
            .enumerate()
            .map(|(r, theta0)| {
                let (data, init) = (&data, &init);
                s.spawn(move || optimize_from(data, init, theta0, r, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("restart thread panicked")).collect()
    });
    Ok(GprModel::from_restarts(data, logs)?)
}
