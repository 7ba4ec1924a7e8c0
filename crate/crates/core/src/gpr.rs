//! Gaussian-process regression with a constant mean, heteroscedastic
//! per-point noise and multi-restart marginal-likelihood fitting.
//!
//! Training targets are centered on their mean before fitting and the offset
//! is added back at prediction time. The training covariance diagonal carries
//! `σ_f² + s_i² + σ_n² + jitter`, where `s_i²` is the measured variance at
//! waypoint `i` and `σ_n²` is a global noise floor optimized with the other
//! hyperparameters.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::MeasurementSet;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{Grid, GridMap};
use crate::kernels::{self, KernelKind, KernelSpec};
use crate::linalg::{dot, Cholesky, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Extra jitter escalations (×10 each) tried after the base jitter fails.
pub const MAX_JITTER_ESCALATIONS: u32 = 3;

/// Neighbor rank used for the initial length scale.
const LENGTH_SCALE_NEIGHBOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub n_restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop when `|ΔLML| / max(|LML|, 1)` falls below this.
    pub rel_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { n_restarts: 5, seed: 0, max_iterations: 200, rel_tolerance: 1e-9 }
    }
}

impl FitOptions {
    pub fn with_seed(seed: u64) -> Self {
        FitOptions { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartLog {
    pub restart: usize,
    pub initial_spec: KernelSpec,
    pub initial_lml: Option<f64>,
    pub final_spec: Option<KernelSpec>,
    pub final_lml: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        libm::sqrt(self.variance)
    }
}

/// Training inputs in the form the likelihood consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub points: Vec<Point>,
    /// Targets with `offset` already subtracted.
    pub targets: Vec<f64>,
    pub offset: f64,
    /// Measured per-point variances, Mbps².
    pub noise: Vec<f64>,
}

impl TrainingData {
    pub fn from_set(set: &MeasurementSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Fit("training set is empty".into()));
        }
        let raw = set.targets();
        let offset = raw.iter().sum::<f64>() / raw.len() as f64;
        Ok(TrainingData {
            points: set.points(),
            targets: raw.iter().map(|t| t - offset).collect(),
            offset,
            noise: set.variances(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Diagonal noise vector `s_i² + σ_n²`.
fn total_noise(spec: &KernelSpec, noise: &[f64]) -> Vec<f64> {
    noise.iter().map(|v| v + spec.noise_variance).collect()
}

/// Factorizes `k`, escalating the diagonal jitter ×10 up to
/// [`MAX_JITTER_ESCALATIONS`] times. `k` already includes the base jitter.
pub fn factorize(k: &Matrix, base_jitter: f64) -> Result<Cholesky> {
    if let Some(c) = Cholesky::new(k) {
        return Ok(c);
    }
    let mut jitter = base_jitter;
    for _ in 0..MAX_JITTER_ESCALATIONS {
        let next = jitter * 10.0;
        let mut kj = k.clone();
        kj.add_to_diagonal(next - base_jitter);
        if let Some(c) = Cholesky::new(&kj) {
            return Ok(c);
        }
        jitter = next;
    }
    Err(Error::NotPositiveDefinite { jitter })
}

fn training_covariance(spec: &KernelSpec, points: &[Point], noise: &[f64]) -> Result<Matrix> {
    kernels::covariance_matrix(spec, points, Some(&total_noise(spec, noise)))
}

/// `−½ yᵀK⁻¹y − ½ log det K − (N/2) log 2π` through the Cholesky factor,
/// with `K` the training covariance for `spec` and per-point `noise`.
pub fn log_marginal_likelihood(points: &[Point], targets: &[f64], noise: &[f64], spec: &KernelSpec) -> Result<f64> {
    if targets.len() != points.len() || noise.len() != points.len() {
        return Err(Error::arg("points, targets and noise must have equal length"));
    }
    let k = training_covariance(spec, points, noise)?;
    let chol = factorize(&k, spec.jitter())?;
    Ok(lml_from_factor(&chol, targets))
}

fn lml_from_factor(chol: &Cholesky, targets: &[f64]) -> f64 {
    let z = chol.solve_lower(targets);
    -0.5 * dot(&z, &z) - 0.5 * chol.log_det() - 0.5 * targets.len() as f64 * LN_2PI
}

/// LML and its gradient with respect to the log-hyperparameters.
pub fn lml_and_gradient(data: &TrainingData, spec: &KernelSpec) -> Result<(f64, Vec<f64>)> {
    let chol = factor_for(data, spec)?;
    let lml = lml_from_factor(&chol, &data.targets);
    Ok((lml, gradient_from_factor(data, spec, &chol)?))
}

fn factor_for(data: &TrainingData, spec: &KernelSpec) -> Result<Cholesky> {
    let k = training_covariance(spec, &data.points, &data.noise)?;
    factorize(&k, spec.jitter())
}

/// `½ tr((ααᵀ − K⁻¹) ∂K/∂θ)` for each log-hyperparameter θ.
fn gradient_from_factor(data: &TrainingData, spec: &KernelSpec, chol: &Cholesky) -> Result<Vec<f64>> {
    let alpha = chol.solve(&data.targets);
    let kinv = chol.inverse();
    let n = data.len();
    let grads = kernels::covariance_gradients(spec, &data.points)?;
    Ok(grads
        .iter()
        .map(|(_, dk)| {
            let mut s = 0.0;
            for i in 0..n {
                let row = dk.row(i);
                let kinv_row = kinv.row(i);
                let ai = alpha[i];
                for j in 0..n {
                    s += (ai * alpha[j] - kinv_row[j]) * row[j];
                }
            }
            0.5 * s
        })
        .collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Data-driven initial hyperparameters:
///
/// * σ_f²: sample variance of the training targets,
/// * ℓ: median distance from each point to its 10th nearest neighbor
///   (median pairwise distance when fewer than 11 points exist),
/// * σ_n²: median per-point measurement variance,
/// * α = 1.
///
/// Degenerate data falls back to σ_f² = 1 (constant targets) and
/// σ_n² = 0.01·σ_f² (all per-point variances zero).
pub fn init_heuristics(train: &MeasurementSet, kind: KernelKind) -> Result<KernelSpec> {
    if train.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 training waypoints, got {}", train.len())));
    }
    let targets = train.targets();
    let sd = crate::dataset::sample_std(&targets);
    let mut signal_variance = sd * sd;
    if signal_variance.is_nan() || signal_variance <= 0.0 {
        signal_variance = 1.0;
    }
    let points = train.points();
    let n = points.len();
    let length_scale = if n > LENGTH_SCALE_NEIGHBOR {
        let mut kth: Vec<f64> = (0..n)
            .map(|i| {
                let mut d: Vec<f64> =
                    (0..n).filter(|&j| j != i).map(|j| points[i].distance(&points[j])).collect();
                d.select_nth_unstable_by(LENGTH_SCALE_NEIGHBOR - 1, f64::total_cmp);
                d[LENGTH_SCALE_NEIGHBOR - 1]
            })
            .collect();
        median(&mut kth)
    } else {
        let mut d = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in 0..i {
                d.push(points[i].distance(&points[j]));
            }
        }
        median(&mut d)
    };
    let mut noise_variance = median(&mut train.variances());
    if noise_variance.is_nan() || noise_variance <= 0.0 {
        noise_variance = 0.01 * signal_variance;
    }
    Ok(KernelSpec { kind, signal_variance, length_scale, alpha: 1.0, noise_variance })
}

/// Log-space starting points: restart 0 is `init`, the others add independent
/// uniform [−1, 1] offsets to each log-parameter.
pub fn restart_starts(init: &KernelSpec, n_restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = init.log_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_restarts.max(1))
        .map(|r| {
            if r == 0 {
                base.clone()
            } else {
                base.iter().map(|t| t + rng.gen_range(-1.0..=1.0)).collect()
            }
        })
        .collect()
}

/// Gradient ascent in log-parameter space with a backtracking (Armijo) line
/// search, started from `theta0`. The ascent direction is the gradient
/// preconditioned by a BFGS estimate of the inverse Hessian; whenever that
/// estimate stops producing an ascent direction it is reset to the identity.
pub fn optimize_from(data: &TrainingData, template: &KernelSpec, theta0: &[f64], restart: usize, opts: &FitOptions) -> RestartLog {
    const ARMIJO: f64 = 1e-4;
    /// Longest accepted move per iteration, natural-log units.
    const MAX_MOVE: f64 = 2.0;
    const MIN_STEP: f64 = 1e-10;
    const MAX_HALVINGS: usize = 40;

    let initial_spec = template.with_log_params(theta0);
    let mut log = RestartLog {
        restart,
        initial_spec,
        initial_lml: None,
        final_spec: None,
        final_lml: None,
        iterations: 0,
        error: None,
    };
    let (mut f, mut g) = match lml_and_gradient(data, &initial_spec) {
        Ok(v) => v,
        Err(e) => {
            log.error = Some(format!("{e}"));
            return log;
        }
    };
    log.initial_lml = Some(f);
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    let mut hinv: Option<Matrix> = None;
    for it in 0..opts.max_iterations {
        log.iterations = it + 1;
        let gnorm = libm::sqrt(dot(&g, &g));
        if !(gnorm > 0.0 && gnorm.is_finite()) {
            break;
        }
        let mut dir = match &hinv {
            Some(h) => h.matvec(&g),
            None => g.iter().map(|v| 0.5 * v / gnorm).collect(),
        };
        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope <= 0.0 {
            hinv = None;
            dir = g.iter().map(|v| 0.5 * v / gnorm).collect();
            slope = dot(&g, &dir);
        }
        let dnorm = libm::sqrt(dot(&dir, &dir));
        let mut step = if dnorm > MAX_MOVE { MAX_MOVE / dnorm } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let spec = template.with_log_params(&cand);
            if let Ok(chol) = factor_for(data, &spec) {
                let fc = lml_from_factor(&chol, &data.targets);
                if fc.is_finite() && fc >= f + ARMIJO * step * slope {
                    if let Ok(gc) = gradient_from_factor(data, &spec, &chol) {
                        accepted = Some((cand, fc, gc));
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
        let Some((cand, fc, gc)) = accepted else {
            if hinv.is_some() {
                // Retry from a plain gradient step before giving up.
                hinv = None;
                continue;
            }
            break;
        };
        let rel = libm::fabs(fc - f) / libm::fabs(f).max(1.0);
        // BFGS on the negated objective: s = Δθ, y = −Δg.
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&gc).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            let h = hinv.take().unwrap_or_else(|| {
                let mut h = Matrix::identity(p);
                for i in 0..p {
                    h[(i, i)] = sy / dot(&y, &y);
                }
                h
            });
            hinv = Some(bfgs_update(&h, &s, &y, sy));
        }
        theta = cand;
        f = fc;
        g = gc;
        if rel < opts.rel_tolerance {
            break;
        }
    }
    log.final_spec = Some(template.with_log_params(&theta));
    log.final_lml = Some(f);
    log
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, ρ = 1 / (yᵀs).
fn bfgs_update(h: &Matrix, s: &[f64], y: &[f64], sy: f64) -> Matrix {
    let p = s.len();
    let rho = 1.0 / sy;
    let hy = h.matvec(y);
    let yhy = dot(y, &hy);
    Matrix::from_fn(p, p, |i, j| {
        h[(i, j)] - rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j]
    })
}

/// Picks the restart with the highest final LML, lower index on ties.
pub fn best_restart(logs: &[RestartLog]) -> Option<&RestartLog> {
    logs.iter()
        .filter(|l| l.final_lml.is_some_and(f64::is_finite))
        .fold(None, |best: Option<&RestartLog>, l| match best {
            Some(b) if b.final_lml >= l.final_lml => Some(b),
            _ => Some(l),
        })
}

/// A conditioned GP: fixed hyperparameters plus the factorized training covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    data: TrainingData,
    spec: KernelSpec,
    chol: Cholesky,
    weights: Vec<f64>,
    fit_log: Vec<RestartLog>,
}

impl GprModel {
    /// Conditions on training data with fixed hyperparameters.
    pub fn condition(data: TrainingData, spec: KernelSpec, fit_log: Vec<RestartLog>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Fit("training set is empty".into()));
        }
        if data.targets.len() != data.len() || data.noise.len() != data.len() {
            return Err(Error::arg("points, targets and noise must have equal length"));
        }
        let k = training_covariance(&spec, &data.points, &data.noise)?;
        let chol = factorize(&k, spec.jitter())?;
        let weights = chol.solve(&data.targets);
        Ok(GprModel { data, spec, chol, weights, fit_log })
    }

    pub fn from_set(set: &MeasurementSet, spec: KernelSpec) -> Result<Self> {
        Self::condition(TrainingData::from_set(set)?, spec, Vec::new())
    }

    /// Fits hyperparameters by multi-restart LML ascent, then conditions.
    pub fn fit(train: &MeasurementSet, kind: KernelKind, opts: &FitOptions) -> Result<Self> {
        if opts.n_restarts == 0 {
            return Err(Error::arg("n_restarts must be >= 1"));
        }
        let data = TrainingData::from_set(train)?;
        let init = init_heuristics(train, kind)?;
        let logs: Vec<RestartLog> = restart_starts(&init, opts.n_restarts, opts.seed)
            .iter()
            .enumerate()
            .map(|(r, theta0)| optimize_from(&data, &init, theta0, r, opts))
            .collect();
        Self::from_restarts(data, logs)
    }

    /// Conditions on the winning restart of an already-run fit.
    pub fn from_restarts(data: TrainingData, logs: Vec<RestartLog>) -> Result<Self> {
        let Some(best) = best_restart(&logs) else {
            let reasons: Vec<String> = logs
                .iter()
                .map(|l| format!("restart {}: {}", l.restart, l.error.as_deref().unwrap_or("no finite LML")))
                .collect();
            return Err(Error::Fit(reasons.join("; ")));
        };
        let spec = best.final_spec.expect("finite final LML implies a final spec");
        Self::condition(data, spec, logs)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    pub fn train_points(&self) -> &[Point] {
        &self.data.points
    }

    pub fn target_offset(&self) -> f64 {
        self.data.offset
    }

    pub fn per_point_noise(&self) -> &[f64] {
        &self.data.noise
    }

    pub fn chol_factor(&self) -> &Matrix {
        self.chol.lower()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fit_log(&self) -> &[RestartLog] {
        &self.fit_log
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        lml_from_factor(&self.chol, &self.data.targets)
    }

    /// Training covariance the factor was built from (without escalated jitter).
    pub fn training_covariance(&self) -> Matrix {
        training_covariance(&self.spec, &self.data.points, &self.data.noise)
            .expect("spec validated at construction")
    }

    fn posterior(&self, query: Point) -> Result<(f64, f64)> {
        if !query.is_finite() {
            return Err(Error::arg("non-finite query point"));
        }
        let kstar = kernels::cross_covariance(&self.spec, query, &self.data.points);
        let mean = self.data.offset + dot(&kstar, &self.weights);
        let v = self.chol.solve_lower(&kstar);
        Ok((mean, dot(&v, &v)))
    }

    /// Posterior mean and observation-level variance (includes σ_n²).
    pub fn predict(&self, query: Point) -> Result<Prediction> {
        let (mean, explained) = self.posterior(query)?;
        let prior = self.spec.signal_variance + self.spec.noise_variance;
        Ok(Prediction { mean, variance: (prior - explained).max(0.0) })
    }

    /// Posterior of the latent function (excludes σ_n²).
    pub fn predict_latent(&self, query: Point) -> Result<Prediction> {
        let (mean, explained) = self.posterior(query)?;
        Ok(Prediction { mean, variance: (self.spec.signal_variance - explained).max(0.0) })
    }

    pub fn predict_grid(&self, grid: &Grid) -> Result<GridMap<Prediction>> {
        grid.try_map(|p| self.predict(p))
    }

    pub fn predict_grid_latent(&self, grid: &Grid) -> Result<GridMap<Prediction>> {
        grid.try_map(|p| self.predict_latent(p))
    }
}
