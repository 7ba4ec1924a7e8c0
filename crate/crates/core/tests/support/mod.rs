//! Independent reference implementations used only by tests. Nothing here
//! touches the Cholesky path or the scorecard code it checks.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radiomap_core::dataset::{MeasurementSet, Waypoint};
use radiomap_core::kernels::{covariance_matrix, KernelKind, KernelSpec};
use radiomap_core::linalg::{Cholesky, Matrix};
use radiomap_core::Point;

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for j in 0..n {
            m[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r][j] -= f * m[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| inv[i][j])
}

/// log |det A| through LU with partial pivoting.
pub fn log_abs_det(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        acc += d.abs().ln();
        for r in (col + 1)..n {
            let f = m[r][col] / d;
            for j in col..n {
                m[r][j] -= f * m[col][j];
            }
        }
    }
    acc
}

pub fn dense_lml(k: &Matrix, y: &[f64]) -> f64 {
    let inv = dense_inverse(k);
    let kinv_y = inv.matvec(y);
    let quad: f64 = y.iter().zip(&kinv_y).map(|(a, b)| a * b).sum();
    -0.5 * quad - 0.5 * log_abs_det(k) - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// The training covariance as the GP model assembles it: per-point measured
/// variance plus the global noise floor on the diagonal.
pub fn training_cov(spec: &KernelSpec, points: &[Point], noise: &[f64]) -> Matrix {
    let total: Vec<f64> = noise.iter().map(|v| v + spec.noise_variance).collect();
    covariance_matrix(spec, points, Some(&total)).unwrap()
}

/// Posterior mean `offset + k*ᵀ K⁻¹ y` by explicit inversion.
pub fn dense_posterior_mean(spec: &KernelSpec, points: &[Point], noise: &[f64], centered: &[f64], offset: f64, q: Point) -> f64 {
    let inv = dense_inverse(&training_cov(spec, points, noise));
    let w = inv.matvec(centered);
    let ks: Vec<f64> = points.iter().map(|p| spec.signal(p.distance(&q))).collect();
    offset + ks.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
}

pub fn dense_posterior_var(spec: &KernelSpec, points: &[Point], noise: &[f64], q: Point) -> f64 {
    let inv = dense_inverse(&training_cov(spec, points, noise));
    let ks: Vec<f64> = points.iter().map(|p| spec.signal(p.distance(&q))).collect();
    let kik = inv.matvec(&ks);
    spec.signal_variance + spec.noise_variance - ks.iter().zip(&kik).map(|(a, b)| a * b).sum::<f64>()
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_points(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent));
        if pts.iter().all(|q| q.distance(&p) > 1e-2) {
            pts.push(p);
        }
    }
    pts
}

pub fn random_spec(rng: &mut impl Rng) -> KernelSpec {
    let kind = KernelKind::ALL[rng.gen_range(0..3)];
    KernelSpec::new(kind, rng.gen_range(0.1..10.0), rng.gen_range(0.2..5.0), rng.gen_range(0.0..1.0))
        .with_alpha(rng.gen_range(0.1..10.0))
}

/// Draws `f ~ GP(0, σ_f²·k_rbf)` at `n` random points in a square of side
/// `extent`, adds N(0, σ_n²) noise and returns waypoints whose std equals the
/// true noise level.
pub fn synthetic_rbf_set(seed: u64, n: usize, extent: f64, sf2: f64, ell: f64, sn2: f64) -> MeasurementSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = random_points(&mut rng, n, extent);
    let spec = KernelSpec::new(KernelKind::Rbf, sf2, ell, 0.0);
    let k = covariance_matrix(&spec, &pts, Some(&vec![1e-10; n])).unwrap();
    let l = Cholesky::new(&k).unwrap();
    let z: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let f = l.lower().matvec(&z);
    let sn = sn2.sqrt();
    let wps = pts
        .iter()
        .zip(&f)
        .map(|(p, fi)| Waypoint::new(p.x, p.y, fi + sn * standard_normal(&mut rng), sn, 5))
        .collect();
    MeasurementSet::new(wps).unwrap()
}

/// Scorecard computed the slow, obvious way.
pub struct NaiveScorecard {
    pub median: f64,
    pub mean_over: f64,
    pub mean_under: f64,
    pub over_rate: f64,
    pub under_rate: f64,
    pub max_over: f64,
    pub max_under: f64,
    pub mae: f64,
    pub rmse: f64,
    pub sd_signed: f64,
    pub sd_abs: f64,
    pub mad: f64,
    pub p90: f64,
    pub p95: f64,
}

fn naive_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p * (v.len() as f64 - 1.0);
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (rank - lo as f64) * (v[hi] - v[lo])
}

fn naive_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn naive_scorecard(e: &[f64]) -> NaiveScorecard {
    let n = e.len() as f64;
    let over: Vec<f64> = e.iter().copied().filter(|x| *x > 0.0).collect();
    let under: Vec<f64> = e.iter().copied().filter(|x| *x < 0.0).map(|x| -x).collect();
    let abs: Vec<f64> = e.iter().map(|x| x.abs()).collect();
    let median = naive_percentile(e, 0.5);
    let dev: Vec<f64> = e.iter().map(|x| (x - median).abs()).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    NaiveScorecard {
        median,
        mean_over: mean(&over),
        mean_under: mean(&under),
        over_rate: 100.0 * over.len() as f64 / n,
        under_rate: 100.0 * under.len() as f64 / n,
        max_over: max(&over),
        max_under: max(&under),
        mae: mean(&abs),
        rmse: (e.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        sd_signed: naive_sd(e),
        sd_abs: naive_sd(&abs),
        mad: naive_percentile(&dev, 0.5),
        p90: naive_percentile(&abs, 0.9),
        p95: naive_percentile(&abs, 0.95),
    }
}

/// Largest relative deviation between the two scorecards, scaled by
/// `max(1, |reference|)`.
pub fn scorecard_deviation(s: &radiomap_core::scorecard::ErrorScorecard, o: &NaiveScorecard) -> f64 {
    let pairs = [
        (s.median_error, o.median),
        (s.mean_over_magnitude, o.mean_over),
        (s.mean_under_magnitude, o.mean_under),
        (s.over_rate, o.over_rate),
        (s.under_rate, o.under_rate),
        (s.max_over, o.max_over),
        (s.max_under, o.max_under),
        (s.mae, o.mae),
        (s.rmse, o.rmse),
        (s.sd_signed, o.sd_signed),
        (s.sd_absolute, o.sd_abs),
        (s.mad, o.mad),
        (s.p90_abs, o.p90),
        (s.p95_abs, o.p95),
    ];
    pairs.iter().map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max)
}

/// Central finite difference of the covariance matrix in log-parameter space.
pub fn fd_gradient(spec: &KernelSpec, points: &[Point], param: usize, h: f64) -> Matrix {
    let theta = spec.log_params();
    let mut up = theta.clone();
    up[param] += h;
    let mut dn = theta.clone();
    dn[param] -= h;
    let kp = covariance_matrix(&spec.with_log_params(&up), points, None).unwrap();
    let km = covariance_matrix(&spec.with_log_params(&dn), points, None).unwrap();
    let n = points.len();
    Matrix::from_fn(n, n, |i, j| (kp[(i, j)] - km[(i, j)]) / (2.0 * h))
}
