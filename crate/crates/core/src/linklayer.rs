//! Channel-centric throughput baseline: path loss → SINR → MCS → spatial
//! layers → NR downlink data rate.
//!
//! The chain is interference-free (SINR equals SNR) and geometry-free: the
//! propagation model is a parametric path-loss law around one antenna.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{Grid, GridMap};

/// Peak downlink rate the default configuration is calibrated to, Mbps.
pub const PEAK_RATE_TARGET_MBPS: f64 = 740.0;

/// Fraction of Shannon capacity assumed reachable when deriving default MCS
/// switching thresholds.
pub const SHANNON_EFFICIENCY: f64 = 0.75;

const SUBCARRIERS_PER_PRB: f64 = 12.0;
const SYMBOLS_PER_SLOT: f64 = 14.0;

/// Maximum transmission bandwidth configuration N_RB for FR1, keyed by
/// (numerology, channel bandwidth in MHz).
const FR1_PRB_TABLE: &[(u8, u32, u32)] = &[
    (0, 5, 25), (0, 10, 52), (0, 15, 79), (0, 20, 106), (0, 25, 133), (0, 30, 160),
    (0, 40, 216), (0, 50, 270),
    (1, 5, 11), (1, 10, 24), (1, 15, 38), (1, 20, 51), (1, 25, 65), (1, 30, 78),
    (1, 40, 106), (1, 50, 133), (1, 60, 162), (1, 70, 189), (1, 80, 217), (1, 90, 245),
    (1, 100, 273),
    (2, 10, 11), (2, 15, 18), (2, 20, 24), (2, 25, 31), (2, 30, 38), (2, 40, 51),
    (2, 50, 65), (2, 60, 79), (2, 70, 93), (2, 80, 107), (2, 90, 121), (2, 100, 135),
];

pub fn fr1_prb_count(numerology: u8, bandwidth_mhz: f64) -> Option<u32> {
    FR1_PRB_TABLE
        .iter()
        .find(|(mu, bw, _)| *mu == numerology && f64::from(*bw) == bandwidth_mhz)
        .map(|(_, _, n)| *n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PathLossModel {
    /// `20·log₁₀(d) + 20·log₁₀(f_MHz) − 27.55`
    FreeSpace,
    /// `PL₀ + 10·n·log₁₀(d / d₀)`
    LogDistance { exponent: f64, pl0_db: f64, d0_m: f64 },
}

impl PathLossModel {
    /// Log-distance law anchored to free space at 1 m.
    pub fn log_distance_from_free_space(exponent: f64, carrier_freq_mhz: f64) -> Self {
        PathLossModel::LogDistance {
            exponent,
            pl0_db: free_space_db(1.0, carrier_freq_mhz),
            d0_m: 1.0,
        }
    }

    pub fn eval(&self, distance_m: f64, carrier_freq_mhz: f64) -> Result<f64> {
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::arg(format!("path-loss distance must be > 0, got {distance_m}")));
        }
        match *self {
            PathLossModel::FreeSpace => Ok(free_space_db(distance_m, carrier_freq_mhz)),
            PathLossModel::LogDistance { exponent, pl0_db, d0_m } => {
                if d0_m.is_nan() || d0_m <= 0.0 {
                    return Err(Error::Config(format!("reference distance must be > 0, got {d0_m}")));
                }
                Ok(pl0_db + 10.0 * exponent * libm::log10(distance_m / d0_m))
            }
        }
    }
}

fn free_space_db(distance_m: f64, carrier_freq_mhz: f64) -> f64 {
    20.0 * libm::log10(distance_m) + 20.0 * libm::log10(carrier_freq_mhz) - 27.55
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub carrier_freq_mhz: f64,
    pub bandwidth_mhz: f64,
    pub numerology: u8,
    pub n_prb: u32,
    pub max_layers: u8,
    pub tdd_dl_fraction: f64,
    pub overhead: f64,
    pub tx_power_dbm: f64,
    /// Antenna position (x, y, height), meters.
    pub antenna_pos: [f64; 3],
    pub noise_floor_dbm: f64,
    pub rx_height_m: f64,
    pub path_loss: PathLossModel,
    /// Multiplier applied to the standard data-rate formula. The default is
    /// solved so that MCS 27 with four layers gives [`PEAK_RATE_TARGET_MBPS`].
    pub calibration: f64,
}

/// D-D-D-S-U with a 10:2:2 special slot: (3·14 + 10) / (5·14).
pub const DDDSU_10_2_2_DL_FRACTION: f64 = 52.0 / 70.0;

impl Default for RadioConfig {
    fn default() -> Self {
        let carrier_freq_mhz = 3760.0;
        let mut cfg = RadioConfig {
            carrier_freq_mhz,
            bandwidth_mhz: 80.0,
            numerology: 1,
            n_prb: 217,
            max_layers: 4,
            tdd_dl_fraction: DDDSU_10_2_2_DL_FRACTION,
            overhead: 0.14,
            tx_power_dbm: 18.0,
            antenna_pos: [6.0, 4.0, 6.0],
            noise_floor_dbm: -88.0,
            rx_height_m: 0.2,
            path_loss: PathLossModel::log_distance_from_free_space(3.0, carrier_freq_mhz),
            calibration: 1.0,
        };
        let top = McsTable::nr_256qam().top();
        cfg.calibration = PEAK_RATE_TARGET_MBPS / cfg.uncalibrated_rate(&top, 4);
        cfg
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.max_layers) {
            return Err(Error::Config(format!("max_layers must be in 1..=4, got {}", self.max_layers)));
        }
        if let Some(expected) = fr1_prb_count(self.numerology, self.bandwidth_mhz) {
            if expected != self.n_prb {
                return Err(Error::Config(format!(
                    "n_prb {} inconsistent with {} MHz at numerology {} (expected {expected})",
                    self.n_prb, self.bandwidth_mhz, self.numerology
                )));
            }
        } else {
            return Err(Error::Config(format!(
                "no PRB entry for {} MHz at numerology {}",
                self.bandwidth_mhz, self.numerology
            )));
        }
        if !(self.tdd_dl_fraction > 0.0 && self.tdd_dl_fraction <= 1.0) {
            return Err(Error::Config(format!("tdd_dl_fraction must be in (0, 1], got {}", self.tdd_dl_fraction)));
        }
        if !(self.overhead >= 0.0 && self.overhead < 1.0) {
            return Err(Error::Config(format!("overhead must be in [0, 1), got {}", self.overhead)));
        }
        if !(self.calibration.is_finite() && self.calibration > 0.0) {
            return Err(Error::Config(format!("calibration must be > 0, got {}", self.calibration)));
        }
        let finite = [self.carrier_freq_mhz, self.tx_power_dbm, self.noise_floor_dbm, self.rx_height_m]
            .iter()
            .chain(&self.antenna_pos)
            .all(|v| v.is_finite());
        if !finite || self.carrier_freq_mhz <= 0.0 {
            return Err(Error::Config("non-finite or non-positive radio parameter".into()));
        }
        Ok(())
    }

    fn uncalibrated_rate(&self, mcs: &McsTableEntry, layers: u8) -> f64 {
        let re_per_symbol = f64::from(self.n_prb) * SUBCARRIERS_PER_PRB;
        let symbols_per_second = SYMBOLS_PER_SLOT * f64::from(1u32 << self.numerology) * 1000.0;
        1e-6 * f64::from(layers)
            * f64::from(mcs.modulation_order)
            * mcs.code_rate
            * re_per_symbol
            * symbols_per_second
            * (1.0 - self.overhead)
            * self.tdd_dl_fraction
    }

    /// 3D distance from the antenna to a receiver at `point`.
    pub fn distance_to(&self, point: Point) -> f64 {
        let [ax, ay, az] = self.antenna_pos;
        let (dx, dy, dz) = (point.x - ax, point.y - ay, self.rx_height_m - az);
        libm::sqrt(dx * dx + dy * dy + dz * dz)
    }
}

pub fn path_loss(config: &RadioConfig, point: Point, model: &PathLossModel) -> Result<f64> {
    if !point.is_finite() {
        return Err(Error::arg("non-finite point"));
    }
    model.eval(config.distance_to(point), config.carrier_freq_mhz)
}

/// `tx_power − path_loss − noise_floor`; there is no interference term.
pub fn sinr_at(config: &RadioConfig, point: Point, model: &PathLossModel) -> Result<f64> {
    Ok(config.tx_power_dbm - path_loss(config, point, model)? - config.noise_floor_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsTableEntry {
    pub index: u8,
    /// Bits per symbol: 2, 4, 6 or 8.
    pub modulation_order: u8,
    pub code_rate: f64,
    pub min_sinr: f64,
}

impl McsTableEntry {
    pub fn spectral_efficiency(&self) -> f64 {
        f64::from(self.modulation_order) * self.code_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsTable {
    entries: Vec<McsTableEntry>,
}

/// (Qm, 1024·R) for PDSCH MCS indices 0–27 of the 256QAM table.
const NR_256QAM: [(u8, f64); 28] = [
    (2, 120.0), (2, 193.0), (2, 308.0), (2, 449.0), (2, 602.0),
    (4, 378.0), (4, 434.0), (4, 490.0), (4, 553.0), (4, 616.0), (4, 658.0),
    (6, 466.0), (6, 517.0), (6, 567.0), (6, 616.0), (6, 666.0), (6, 719.0),
    (6, 772.0), (6, 822.0), (6, 873.0),
    (8, 682.5), (8, 711.0), (8, 754.0), (8, 797.0), (8, 841.0), (8, 885.0),
    (8, 916.5), (8, 948.0),
];

impl McsTable {
    pub fn new(entries: Vec<McsTableEntry>) -> Result<Self> {
        let t = McsTable { entries };
        t.validate()?;
        Ok(t)
    }

    /// 256QAM table with thresholds from an attenuated Shannon bound:
    /// `min_sinr = 10·log₁₀(2^(Qm·R / η) − 1)` with η = [`SHANNON_EFFICIENCY`].
    pub fn nr_256qam() -> Self {
        let entries = NR_256QAM
            .iter()
            .enumerate()
            .map(|(i, &(qm, r1024))| {
                let code_rate = r1024 / 1024.0;
                let se = f64::from(qm) * code_rate;
                let min_sinr = 10.0 * libm::log10(libm::exp2(se / SHANNON_EFFICIENCY) - 1.0);
                McsTableEntry { index: i as u8, modulation_order: qm, code_rate, min_sinr }
            })
            .collect();
        McsTable { entries }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("MCS table is empty".into()));
        }
        for (k, e) in self.entries.iter().enumerate() {
            if e.index > crate::dataset::MAX_MCS_INDEX {
                return Err(Error::Config(format!("MCS index {} outside 0..=27", e.index)));
            }
            if ![2, 4, 6, 8].contains(&e.modulation_order) {
                return Err(Error::Config(format!("MCS {}: modulation order {} not in {{2,4,6,8}}", e.index, e.modulation_order)));
            }
            if !(e.code_rate > 0.0 && e.code_rate < 1.0) {
                return Err(Error::Config(format!("MCS {}: code rate {} not in (0, 1)", e.index, e.code_rate)));
            }
            if !e.min_sinr.is_finite() {
                return Err(Error::Config(format!("MCS {}: non-finite threshold", e.index)));
            }
            if k > 0 {
                let p = &self.entries[k - 1];
                if e.index <= p.index {
                    return Err(Error::Config("MCS indices must be strictly increasing".into()));
                }
                if e.min_sinr <= p.min_sinr {
                    return Err(Error::Config(format!("MCS {}: min_sinr must increase with index", e.index)));
                }
                if e.spectral_efficiency() < p.spectral_efficiency() {
                    return Err(Error::Config(format!("MCS {}: Qm·R must not decrease with index", e.index)));
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[McsTableEntry] {
        &self.entries
    }

    pub fn get(&self, index: u8) -> Option<&McsTableEntry> {
        self.entries.iter().find(|e| e.index == index)
    }

    /// Highest-index entry. Panics on an empty table.
    pub fn top(&self) -> McsTableEntry {
        *self.entries.last().expect("non-empty MCS table")
    }
}

/// Highest entry whose `min_sinr ≤ sinr` (boundary inclusive); `None` is outage.
pub fn mcs_from_sinr(table: &McsTable, sinr: f64) -> Result<Option<McsTableEntry>> {
    if table.entries.is_empty() {
        return Err(Error::Config("MCS table is empty".into()));
    }
    if sinr.is_nan() {
        return Err(Error::arg("SINR is NaN"));
    }
    // Thresholds ascend, so the selectable entries form a prefix.
    let n = table.entries.partition_point(|e| e.min_sinr <= sinr);
    Ok(n.checked_sub(1).map(|i| table.entries[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRule {
    pub sinr_thresholds: [f64; 3],
}

impl Default for LayerRule {
    fn default() -> Self {
        LayerRule { sinr_thresholds: [10.0, 18.0, 26.0] }
    }
}

impl LayerRule {
    pub fn new(sinr_thresholds: [f64; 3]) -> Result<Self> {
        let r = LayerRule { sinr_thresholds };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.sinr_thresholds;
        if !t.iter().all(|v| v.is_finite()) || !(t[0] < t[1] && t[1] < t[2]) {
            return Err(Error::Config(format!("layer thresholds must be finite and strictly ascending, got {t:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerMode {
    /// Layers follow the SINR rule.
    Adaptive,
    /// Always four layers, regardless of channel quality.
    UniformRank4,
}

impl core::str::FromStr for LayerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(LayerMode::Adaptive),
            "rank4" | "uniform_rank4" | "uniform_rank_4" => Ok(LayerMode::UniformRank4),
            other => Err(Error::arg(format!("unknown layer mode {other:?}"))),
        }
    }
}

/// `1 + #{thresholds ≤ sinr}` in adaptive mode; 4 in uniform-rank-4 mode.
pub fn layers_from_sinr(rule: &LayerRule, sinr: f64, mode: LayerMode) -> u8 {
    match mode {
        LayerMode::UniformRank4 => 4,
        LayerMode::Adaptive => 1 + rule.sinr_thresholds.iter().filter(|t| **t <= sinr).count() as u8,
    }
}

/// Downlink rate in Mbps:
/// `1e-6 · L · Qm · R · 12·N_PRB · 14·2^μ·1000 · (1 − OH) · f_DL · calibration`.
pub fn throughput_from_link(config: &RadioConfig, mcs: &McsTableEntry, layers: u8) -> Result<f64> {
    if !(1..=4).contains(&layers) {
        return Err(Error::arg(format!("layers must be in 1..=4, got {layers}")));
    }
    Ok(config.uncalibrated_rate(mcs, layers) * config.calibration)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCell {
    pub sinr_db: f64,
    /// `None` when the SINR is below every MCS threshold.
    pub mcs: Option<u8>,
    pub layers: u8,
    pub throughput_mbps: f64,
}

/// Runs the full chain at one location. Layers are capped at `max_layers`.
pub fn predict_point(config: &RadioConfig, point: Point, table: &McsTable, rule: &LayerRule, mode: LayerMode) -> Result<LinkCell> {
    let sinr_db = sinr_at(config, point, &config.path_loss)?;
    let layers = layers_from_sinr(rule, sinr_db, mode).min(config.max_layers);
    let mcs = mcs_from_sinr(table, sinr_db)?;
    let throughput_mbps = match &mcs {
        Some(entry) => throughput_from_link(config, entry, layers)?,
        None => 0.0,
    };
    Ok(LinkCell { sinr_db, mcs: mcs.map(|e| e.index), layers, throughput_mbps })
}

pub fn predict_map(config: &RadioConfig, grid: &Grid, table: &McsTable, rule: &LayerRule, mode: LayerMode) -> Result<GridMap<LinkCell>> {
    config.validate()?;
    table.validate()?;
    rule.validate()?;
    grid.try_map(|p| predict_point(config, p, table, rule, mode))
}
