//! Summary statistics of signed prediction errors
//! (`predicted − measured`, positive meaning over-prediction), plus
//! PDF-normalized histograms.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::PairedPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScorecard {
    pub median_error: f64,
    pub mean_over_magnitude: f64,
    pub mean_under_magnitude: f64,
    pub over_rate: f64,
    pub under_rate: f64,
    pub max_over: f64,
    pub max_under: f64,
    pub mae: f64,
    pub rmse: f64,
    pub sd_signed: f64,
    pub sd_absolute: f64,
    pub mad: f64,
    pub p90_abs: f64,
    pub p95_abs: f64,
    pub n_pairs: usize,
    /// Errors exactly equal to zero; counted in neither rate.
    pub n_zero: usize,
    /// Set when `n_pairs == 1`; both standard deviations are then 0.
    pub degenerate: bool,
    /// No positive errors; over-prediction magnitudes are reported as 0.
    pub no_over_predictions: bool,
    /// No negative errors; under-prediction magnitudes are reported as 0.
    pub no_under_predictions: bool,
}

pub fn signed_errors(pairs: &[PairedPoint]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::arg("no paired points"));
    }
    Ok(pairs.iter().map(|p| p.predicted_value - p.measured.mean_throughput).collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelativeErrors {
    /// `100 · e_i / y_i`, in pair order, skipping zero measurements.
    pub percent: Vec<f64>,
    /// Pairs skipped because the measured throughput was 0.
    pub n_excluded: usize,
}

pub fn relative_errors(pairs: &[PairedPoint]) -> RelativeErrors {
    let mut out = RelativeErrors::default();
    for p in pairs {
        let y = p.measured.mean_throughput;
        if y == 0.0 {
            out.n_excluded += 1;
        } else {
            out.percent.push(100.0 * (p.predicted_value - y) / y);
        }
    }
    out
}

/// Linear interpolation between order statistics at 1-based rank `p·(N−1)+1`.
/// `sorted` must be ascending and non-empty.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(h) as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

fn sorted_copy(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt(ss / (values.len() - 1) as f64)
}

pub fn compute_scorecard(errors: &[f64]) -> Result<ErrorScorecard> {
    if errors.is_empty() {
        return Err(Error::arg("no errors to score"));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::arg("non-finite error value"));
    }
    let n = errors.len();
    let nf = n as f64;
    let signed = sorted_copy(errors.iter().copied());
    let abs = sorted_copy(errors.iter().map(|e| libm::fabs(*e)));
    let median_error = percentile_sorted(&signed, 0.5);

    let (mut n_over, mut sum_over, mut max_over) = (0usize, 0.0, 0.0f64);
    let (mut n_under, mut sum_under, mut max_under) = (0usize, 0.0, 0.0f64);
    for &e in errors {
        if e > 0.0 {
            n_over += 1;
            sum_over += e;
            max_over = max_over.max(e);
        } else if e < 0.0 {
            n_under += 1;
            sum_under += -e;
            max_under = max_under.max(-e);
        }
    }
    let cond_mean = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };

    let mean_signed = errors.iter().sum::<f64>() / nf;
    let mae = abs.iter().sum::<f64>() / nf;
    let rmse = libm::sqrt(errors.iter().map(|e| e * e).sum::<f64>() / nf);
    let deviations = sorted_copy(errors.iter().map(|e| libm::fabs(e - median_error)));

    Ok(ErrorScorecard {
        median_error,
        mean_over_magnitude: cond_mean(sum_over, n_over),
        mean_under_magnitude: cond_mean(sum_under, n_under),
        over_rate: 100.0 * n_over as f64 / nf,
        under_rate: 100.0 * n_under as f64 / nf,
        max_over,
        max_under,
        mae,
        rmse,
        sd_signed: sample_sd(errors, mean_signed),
        sd_absolute: sample_sd(&abs, mae),
        mad: percentile_sorted(&deviations, 0.5),
        p90_abs: percentile_sorted(&abs, 0.90),
        p95_abs: percentile_sorted(&abs, 0.95),
        n_pairs: n,
        n_zero: n - n_over - n_under,
        degenerate: n == 1,
        no_over_predictions: n_over == 0,
        no_under_predictions: n_under == 0,
    })
}

impl ErrorScorecard {
    /// Fixed-width table with one block per metric category.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, label: &str, value: f64, unit: &str| {
            let _ = writeln!(out, "  {label:<36}{value:>10.1}  {unit}");
        };
        let _ = writeln!(out, "{:<38}{:>10}  Unit", "Metric", "Value");
        out.push_str("Bias\n");
        row(&mut out, "Median error", self.median_error, "Mbps");
        row(&mut out, "Mean over-prediction magnitude", self.mean_over_magnitude, "Mbps");
        row(&mut out, "Mean under-prediction magnitude", self.mean_under_magnitude, "Mbps");
        row(&mut out, "Over-prediction rate", self.over_rate, "%");
        row(&mut out, "Under-prediction rate", self.under_rate, "%");
        row(&mut out, "Maximum over-prediction magnitude", self.max_over, "Mbps");
        row(&mut out, "Maximum under-prediction magnitude", self.max_under, "Mbps");
        out.push_str("Accuracy\n");
        row(&mut out, "MAE", self.mae, "Mbps");
        row(&mut out, "RMSE", self.rmse, "Mbps");
        out.push_str("Variability\n");
        row(&mut out, "SD of signed error", self.sd_signed, "Mbps");
        row(&mut out, "SD of absolute error", self.sd_absolute, "Mbps");
        row(&mut out, "MAD", self.mad, "Mbps");
        row(&mut out, "P90(|e|)", self.p90_abs, "Mbps");
        row(&mut out, "P95(|e|)", self.p95_abs, "Mbps");
        let _ = writeln!(out, "n = {} ({} zero errors)", self.n_pairs, self.n_zero);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bin_edges: Vec<f64>,
    /// Per-bin density, 1/Mbps.
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
    /// Values outside the edges that were folded into the end bins.
    pub n_clamped: usize,
}

impl HistogramSpec {
    pub fn area(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// Equal-width edges spanning `[lo, hi]`.
pub fn uniform_edges(lo: f64, hi: f64, n_bins: usize) -> Result<Vec<f64>> {
    if n_bins == 0 || !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::arg(format!("bad edge range [{lo}, {hi}] with {n_bins} bins")));
    }
    let w = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + i as f64 * w).collect();
    edges.push(hi);
    Ok(edges)
}

/// Bins are `[e_b, e_{b+1})`, with the last bin closed on the right.
/// Densities are `count_b / (N · width_b)`.
pub fn pdf_histogram(errors: &[f64], edges: &[f64]) -> Result<HistogramSpec> {
    if edges.len() < 2 {
        return Err(Error::arg("histogram needs at least two edges"));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("histogram edges must be finite and strictly ascending"));
    }
    if errors.is_empty() {
        return Err(Error::arg("no values to histogram"));
    }
    let n_bins = edges.len() - 1;
    let mut counts = vec![0usize; n_bins];
    let mut n_clamped = 0;
    for &e in errors {
        if !e.is_finite() {
            return Err(Error::arg("non-finite histogram value"));
        }
        let bin = if e < edges[0] {
            n_clamped += 1;
            0
        } else if e > edges[n_bins] {
            n_clamped += 1;
            n_bins - 1
        } else {
            edges.partition_point(|x| *x <= e).saturating_sub(1).min(n_bins - 1)
        };
        counts[bin] += 1;
    }
    let total = errors.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (total * (w[1] - w[0])))
        .collect();
    Ok(HistogramSpec { bin_edges: edges.to_vec(), densities, counts, n_clamped })
}
