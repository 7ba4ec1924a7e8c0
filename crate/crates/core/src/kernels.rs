//! Stationary base kernels and the composite covariance
//! `k(x, x') = σ_f²·k_base(‖x − x'‖) + σ_n²·δ(x, x')`.
//!
//! The Kronecker delta fires on index identity during matrix assembly, never
//! on coordinate coincidence: a test point sitting exactly on a training point
//! does not pick up the noise term in the cross-covariance.
//!
//! All hyperparameter gradients are taken with respect to the natural log of
//! each parameter, the space the optimizer in [`crate::gpr`] works in.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::linalg::Matrix;

/// Relative diagonal jitter, applied as `JITTER_REL · σ_f²`.
pub const JITTER_REL: f64 = 1e-8;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    /// Matérn with fixed smoothness ν = 1.5.
    Matern15,
    /// Rational quadratic; the only kind that uses `alpha`.
    Rq,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Rbf, KernelKind::Matern15, KernelKind::Rq];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Matern15 => "matern15",
            KernelKind::Rq => "rq",
        }
    }

    /// Number of free log-hyperparameters: σ_f², ℓ, (α), σ_n².
    pub fn n_params(self) -> usize {
        match self {
            KernelKind::Rq => 4,
            _ => 3,
        }
    }

    pub fn params(self) -> &'static [Hyperparameter] {
        use Hyperparameter::*;
        match self {
            KernelKind::Rq => &[LogSignalVariance, LogLengthScale, LogAlpha, LogNoiseVariance],
            _ => &[LogSignalVariance, LogLengthScale, LogNoiseVariance],
        }
    }
}

impl core::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" => Ok(KernelKind::Rbf),
            "matern15" | "matern" | "m1" => Ok(KernelKind::Matern15),
            "rq" => Ok(KernelKind::Rq),
            other => Err(Error::arg(format!("unknown kernel kind {other:?}"))),
        }
    }
}

impl core::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hyperparameter {
    LogSignalVariance,
    LogLengthScale,
    LogAlpha,
    LogNoiseVariance,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// σ_f², Mbps².
    pub signal_variance: f64,
    /// ℓ, meters.
    pub length_scale: f64,
    /// α, ignored unless `kind` is [`KernelKind::Rq`].
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// σ_n², Mbps².
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, signal_variance: f64, length_scale: f64, noise_variance: f64) -> Self {
        KernelSpec { kind, signal_variance, length_scale, alpha: 1.0, noise_variance }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::arg(format!("signal variance must be > 0, got {}", self.signal_variance)));
        }
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(Error::arg(format!("length scale must be > 0, got {}", self.length_scale)));
        }
        if self.kind == KernelKind::Rq && !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::arg(format!("rq alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::arg(format!("noise variance must be >= 0, got {}", self.noise_variance)));
        }
        Ok(())
    }

    pub fn jitter(&self) -> f64 {
        JITTER_REL * self.signal_variance
    }

    /// Log-space parameter vector ordered as [`KernelKind::params`].
    pub fn log_params(&self) -> Vec<f64> {
        self.kind
            .params()
            .iter()
            .map(|p| libm::log(self.get(*p)))
            .collect()
    }

    pub fn with_log_params(&self, theta: &[f64]) -> KernelSpec {
        assert_eq!(theta.len(), self.kind.n_params(), "wrong number of log-parameters");
        let mut out = *self;
        for (p, &t) in self.kind.params().iter().zip(theta) {
            out.set(*p, libm::exp(t));
        }
        out
    }

    fn get(&self, p: Hyperparameter) -> f64 {
        match p {
            Hyperparameter::LogSignalVariance => self.signal_variance,
            Hyperparameter::LogLengthScale => self.length_scale,
            Hyperparameter::LogAlpha => self.alpha,
            Hyperparameter::LogNoiseVariance => self.noise_variance,
        }
    }

    fn set(&mut self, p: Hyperparameter, v: f64) {
        match p {
            Hyperparameter::LogSignalVariance => self.signal_variance = v,
            Hyperparameter::LogLengthScale => self.length_scale = v,
            Hyperparameter::LogAlpha => self.alpha = v,
            Hyperparameter::LogNoiseVariance => self.noise_variance = v,
        }
    }

    /// Noise-free part `σ_f²·k_base(r)`.
    pub fn signal(&self, r: f64) -> f64 {
        self.signal_variance * base_unchecked(self.kind, self.length_scale, self.alpha, r)
    }
}

fn base_unchecked(kind: KernelKind, length_scale: f64, alpha: f64, r: f64) -> f64 {
    match kind {
        KernelKind::Rbf => {
            let u = r / length_scale;
            libm::exp(-0.5 * u * u)
        }
        KernelKind::Matern15 => {
            let s = SQRT3 * r / length_scale;
            (1.0 + s) * libm::exp(-s)
        }
        KernelKind::Rq => {
            let u = r * r / (2.0 * alpha * length_scale * length_scale);
            // (1 + u)^(-α), through log1p for accuracy at large α.
            libm::exp(-alpha * libm::log1p(u))
        }
    }
}

/// Base correlation `k_base(r)` in (0, 1].
pub fn base_eval(kind: KernelKind, length_scale: f64, alpha: f64, r: f64) -> Result<f64> {
    if !(r.is_finite() && length_scale.is_finite() && alpha.is_finite()) {
        return Err(Error::arg("non-finite kernel input"));
    }
    if r < 0.0 {
        return Err(Error::arg("distance must be >= 0"));
    }
    if length_scale <= 0.0 {
        return Err(Error::arg("length scale must be > 0"));
    }
    if kind == KernelKind::Rq && alpha <= 0.0 {
        return Err(Error::arg("rq alpha must be > 0"));
    }
    Ok(base_unchecked(kind, length_scale, alpha, r))
}

/// Composite covariance between two points. `same_point` is the Kronecker
/// delta: true only when both arguments are the same indexed observation.
pub fn composite_eval(spec: &KernelSpec, a: Point, b: Point, same_point: bool) -> Result<f64> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::arg("non-finite point"));
    }
    let noise = if same_point { spec.noise_variance } else { 0.0 };
    Ok(spec.signal(a.distance(&b)) + noise)
}

/// Training covariance. Diagonal entries are `σ_f² + noise_i + jitter`, where
/// `noise_i` is `per_point_noise[i]` when given and `σ_n²` otherwise.
pub fn covariance_matrix(spec: &KernelSpec, points: &[Point], per_point_noise: Option<&[f64]>) -> Result<Matrix> {
    spec.validate()?;
    check_points(points)?;
    if let Some(noise) = per_point_noise {
        if noise.len() != points.len() {
            return Err(Error::arg(format!(
                "per-point noise has {} entries for {} points",
                noise.len(),
                points.len()
            )));
        }
        if noise.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg("per-point noise variances must be finite and >= 0"));
        }
    }
    let mut k = signal_matrix(spec, points);
    let jitter = spec.jitter();
    for i in 0..points.len() {
        let noise = per_point_noise.map_or(spec.noise_variance, |n| n[i]);
        k[(i, i)] += noise + jitter;
    }
    Ok(k)
}

/// Noise-free covariance `σ_f²·k_base(‖p_i − p_j‖)` for all pairs.
pub fn signal_matrix(spec: &KernelSpec, points: &[Point]) -> Matrix {
    let n = points.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.signal_variance;
        for j in 0..i {
            let v = spec.signal(points[i].distance(&points[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Signal covariance between one query and every training point.
pub fn cross_covariance(spec: &KernelSpec, query: Point, points: &[Point]) -> Vec<f64> {
    points.iter().map(|p| spec.signal(query.distance(p))).collect()
}

/// ∂K/∂θ for every free log-hyperparameter, in [`KernelKind::params`] order.
pub fn covariance_gradients(spec: &KernelSpec, points: &[Point]) -> Result<Vec<(Hyperparameter, Matrix)>> {
    spec.validate()?;
    check_points(points)?;
    let n = points.len();
    let sf2 = spec.signal_variance;
    let ell = spec.length_scale;
    let alpha = spec.alpha;
    let mut out = Vec::with_capacity(spec.kind.n_params());
    for &param in spec.kind.params() {
        let m = match param {
            Hyperparameter::LogSignalVariance => signal_matrix(spec, points),
            Hyperparameter::LogNoiseVariance => {
                let mut m = Matrix::zeros(n, n);
                m.add_to_diagonal(spec.noise_variance);
                m
            }
            Hyperparameter::LogLengthScale => symmetric_from(points, |r| {
                sf2 * match spec.kind {
                    KernelKind::Rbf => {
                        let u2 = (r / ell) * (r / ell);
                        libm::exp(-0.5 * u2) * u2
                    }
                    KernelKind::Matern15 => {
                        let s = SQRT3 * r / ell;
                        s * s * libm::exp(-s)
                    }
                    KernelKind::Rq => {
                        let u = r * r / (2.0 * alpha * ell * ell);
                        let k = libm::exp(-alpha * libm::log1p(u));
                        k * 2.0 * alpha * u / (1.0 + u)
                    }
                }
            }),
            Hyperparameter::LogAlpha => symmetric_from(points, |r| {
                let u = r * r / (2.0 * alpha * ell * ell);
                let k = libm::exp(-alpha * libm::log1p(u));
                sf2 * k * alpha * (u / (1.0 + u) - libm::log1p(u))
            }),
        };
        out.push((param, m));
    }
    Ok(out)
}

fn symmetric_from(points: &[Point], f: impl Fn(f64) -> f64) -> Matrix {
    let n = points.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = f(0.0);
        for j in 0..i {
            let v = f(points[i].distance(&points[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn check_points(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::arg("at least one point is required"));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::arg("non-finite point coordinate"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_at_zero_distance() {
        for kind in KernelKind::ALL {
            assert_eq!(base_eval(kind, 1.3, 0.7, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn closed_form_values() {
        // exp(-1/2), (1 + 1/2)^-1, (1 + √3)·exp(-√3)
        assert_abs_diff_eq!(base_eval(KernelKind::Rbf, 1.0, 1.0, 1.0).unwrap(), 0.606_530_659_712_633, epsilon = 1e-12);
        assert_abs_diff_eq!(base_eval(KernelKind::Rq, 1.0, 1.0, 1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(base_eval(KernelKind::Matern15, 1.0, 1.0, 1.0).unwrap(), 0.483_357_724_596_507_7, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(base_eval(KernelKind::Rbf, 1.0, 1.0, f64::NAN).is_err());
        assert!(base_eval(KernelKind::Rbf, 0.0, 1.0, 1.0).is_err());
        assert!(base_eval(KernelKind::Rq, 1.0, 0.0, 1.0).is_err());
        assert!(base_eval(KernelKind::Rbf, 1.0, 1.0, -1.0).is_err());
        // alpha is ignored outside RQ
        assert!(base_eval(KernelKind::Rbf, 1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn composite_values() {
        let spec = KernelSpec::new(KernelKind::Rbf, 4.0, 1.0, 1.0);
        let p = Point::new(0.3, -2.0);
        assert_eq!(composite_eval(&spec, p, p, true).unwrap(), 5.0);
        let far = Point::new(100.3, -2.0);
        assert!(composite_eval(&spec, p, far, false).unwrap() < 1e-300);
        let spec = KernelSpec::new(KernelKind::Rbf, 2.0, 1.0, 0.0);
        let v = composite_eval(&spec, Point::new(0.0, 0.0), Point::new(1.0, 0.0), false).unwrap();
        assert_abs_diff_eq!(v, 1.213_061_319_425_267, epsilon = 1e-12);
    }

    #[test]
    fn single_point_matrix_uses_per_point_noise() {
        let spec = KernelSpec::new(KernelKind::Matern15, 3.0, 1.0, 0.5);
        let k = covariance_matrix(&spec, &[Point::new(1.0, 1.0)], Some(&[2.0])).unwrap();
        assert_eq!(k[(0, 0)], 5.0 + spec.jitter());
        let k = covariance_matrix(&spec, &[Point::new(1.0, 1.0)], None).unwrap();
        assert_eq!(k[(0, 0)], 3.5 + spec.jitter());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let spec = KernelSpec::new(KernelKind::Rbf, 1.0, 1.0, 0.1);
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        assert!(covariance_matrix(&spec, &pts, Some(&[1.0])).is_err());
        assert!(covariance_matrix(&spec, &[], None).is_err());
    }

    #[test]
    fn swapped_points_transpose() {
        let spec = KernelSpec::new(KernelKind::Rq, 2.0, 0.8, 0.1).with_alpha(0.6);
        let a = [Point::new(0.0, 0.0), Point::new(1.0, 0.5), Point::new(-0.3, 2.0)];
        let b = [a[2], a[0], a[1]];
        let ka = covariance_matrix(&spec, &a, None).unwrap();
        let kb = covariance_matrix(&spec, &b, None).unwrap();
        let perm = [1usize, 2, 0]; // a[i] == b[perm[i]]
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ka[(i, j)], kb[(perm[i], perm[j])]);
                assert_eq!(ka[(i, j)], ka[(j, i)]);
            }
        }
    }

    #[test]
    fn log_param_round_trip() {
        let spec = KernelSpec::new(KernelKind::Rq, 2.5, 0.8, 0.1).with_alpha(3.0);
        let back = spec.with_log_params(&spec.log_params());
        assert_abs_diff_eq!(back.signal_variance, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(back.alpha, 3.0, epsilon = 1e-12);
        assert_eq!(KernelSpec::new(KernelKind::Rbf, 1.0, 1.0, 1.0).log_params().len(), 3);
    }

    #[test]
    fn gradient_identities() {
        let spec = KernelSpec::new(KernelKind::Rbf, 1.7, 0.9, 0.3);
        let pts = [Point::new(0.0, 0.0), Point::new(0.4, 0.2), Point::new(1.0, -1.0)];
        let grads = covariance_gradients(&spec, &pts).unwrap();
        assert_eq!(grads[0].0, Hyperparameter::LogSignalVariance);
        assert_eq!(grads[0].1, signal_matrix(&spec, &pts));
        let (p, noise) = &grads[2];
        assert_eq!(*p, Hyperparameter::LogNoiseVariance);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(noise[(i, j)], if i == j { 0.3 } else { 0.0 });
            }
        }
    }

    #[test]
    fn json_shape() {
        let spec = KernelSpec::new(KernelKind::Matern15, 1.0, 2.0, 0.5);
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"matern15","signal_variance":1.0,"length_scale":2.0,"alpha":1.0,"noise_variance":0.5}"#);
        let back: KernelSpec =
            serde_json::from_str(r#"{"kind":"rq","signal_variance":1,"length_scale":2,"noise_variance":0}"#).unwrap();
        assert_eq!(back.kind, KernelKind::Rq);
        assert_eq!(back.alpha, 1.0);
    }
}
