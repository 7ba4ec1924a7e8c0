//! Measurement samples, per-location aggregation, train/test splitting and
//! spatial pairing of measurements with prediction grids.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::GridMap;

pub const MAX_MCS_INDEX: u8 = 27;
pub const MAX_RANK: u8 = 4;

/// Minimum separation between waypoints of one [`MeasurementSet`], meters.
pub const MIN_WAYPOINT_SEPARATION: f64 = 1e-3;

/// Default aggregation radius: half the 0.5 m waypoint step.
pub const DEFAULT_AGGREGATION_RADIUS: f64 = 0.25;

pub const DEFAULT_PAIRING_THRESHOLD: f64 = 0.5;

/// Distances closer than this are treated as ties during pairing.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub x: f64,
    pub y: f64,
    pub timestamp: f64,
    /// Downlink throughput, Mbps.
    pub throughput: f64,
    pub rsrp: Option<f64>,
    pub sinr: Option<f64>,
    pub mcs: Option<u8>,
    pub ri: Option<u8>,
}

impl RawSample {
    pub fn new(x: f64, y: f64, timestamp: f64, throughput: f64) -> Self {
        RawSample { x, y, timestamp, throughput, rsrp: None, sinr: None, mcs: None, ri: None }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.timestamp.is_finite()) {
            return Err(Error::arg("non-finite coordinate or timestamp"));
        }
        if !(self.throughput.is_finite() && self.throughput >= 0.0) {
            return Err(Error::arg(format!("throughput must be >= 0, got {}", self.throughput)));
        }
        if let Some(m) = self.mcs {
            if m > MAX_MCS_INDEX {
                return Err(Error::arg(format!("mcs index {m} outside 0..=27")));
            }
        }
        if let Some(r) = self.ri {
            if !(1..=MAX_RANK).contains(&r) {
                return Err(Error::arg(format!("rank indicator {r} outside 1..=4")));
            }
        }
        for v in [self.rsrp, self.sinr].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::arg("non-finite rsrp/sinr"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub mean_throughput: f64,
    /// Sample standard deviation (n − 1 denominator); 0 when `n_samples == 1`.
    pub std_throughput: f64,
    pub n_samples: usize,
    pub mean_sinr: Option<f64>,
    pub mean_mcs: Option<f64>,
    pub mean_ri: Option<f64>,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, mean_throughput: f64, std_throughput: f64, n_samples: usize) -> Self {
        Waypoint {
            x,
            y,
            mean_throughput,
            std_throughput,
            n_samples,
            mean_sinr: None,
            mean_mcs: None,
            mean_ri: None,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Per-point measurement variance (std²), Mbps².
    pub fn variance(&self) -> f64 {
        self.std_throughput * self.std_throughput
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::arg("non-finite waypoint coordinate"));
        }
        if !self.mean_throughput.is_finite() {
            return Err(Error::arg("non-finite waypoint mean"));
        }
        if !(self.std_throughput.is_finite() && self.std_throughput >= 0.0) {
            return Err(Error::arg("waypoint std must be >= 0"));
        }
        if self.n_samples == 0 {
            return Err(Error::arg("waypoint must aggregate at least one sample"));
        }
        if self.n_samples == 1 && self.std_throughput != 0.0 {
            return Err(Error::arg("single-sample waypoint must have std 0"));
        }
        if let Some(ri) = self.mean_ri {
            if !(1.0..=4.0).contains(&ri) {
                return Err(Error::arg(format!("mean rank {ri} outside [1, 4]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementSet {
    waypoints: Vec<Waypoint>,
    pub metadata: BTreeMap<String, String>,
}

impl MeasurementSet {
    /// Validates every waypoint and the minimum-separation invariant.
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        for w in &waypoints {
            w.validate()?;
        }
        check_separation(&waypoints)?;
        Ok(MeasurementSet { waypoints, metadata: BTreeMap::new() })
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn points(&self) -> Vec<Point> {
        self.waypoints.iter().map(Waypoint::position).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.waypoints.iter().map(|w| w.mean_throughput).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.waypoints.iter().map(Waypoint::variance).collect()
    }

    fn subset(&self, idx: &[usize]) -> MeasurementSet {
        MeasurementSet {
            waypoints: idx.iter().map(|&i| self.waypoints[i].clone()).collect(),
            metadata: self.metadata.clone(),
        }
    }
}

fn check_separation(waypoints: &[Waypoint]) -> Result<()> {
    let mut order: Vec<usize> = (0..waypoints.len()).collect();
    order.sort_by(|&a, &b| waypoints[a].x.total_cmp(&waypoints[b].x));
    for (k, &i) in order.iter().enumerate() {
        let pi = waypoints[i].position();
        for &j in &order[k + 1..] {
            let pj = waypoints[j].position();
            if pj.x - pi.x >= MIN_WAYPOINT_SEPARATION {
                break;
            }
            if pi.distance(&pj) < MIN_WAYPOINT_SEPARATION {
                return Err(Error::arg(format!(
                    "waypoints {i} and {j} are closer than {MIN_WAYPOINT_SEPARATION} m"
                )));
            }
        }
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with the n − 1 denominator; 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    libm::sqrt(ss / (values.len() - 1) as f64)
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups samples into waypoints. Samples are visited in input order; each
/// joins the first existing cluster whose running centroid lies within
/// `radius`, otherwise it opens a new cluster.
pub fn aggregate_by_location(samples: &[RawSample], radius: f64) -> Result<MeasurementSet> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::arg(format!("aggregation radius must be > 0, got {radius}")));
    }
    struct Cluster {
        sx: f64,
        sy: f64,
        members: Vec<usize>,
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        s.validate().map_err(|e| Error::arg(format!("sample {i}: {e}")))?;
        let p = s.position();
        let hit = clusters.iter_mut().find(|c| {
            let n = c.members.len() as f64;
            Point::new(c.sx / n, c.sy / n).distance(&p) <= radius
        });
        match hit {
            Some(c) => {
                c.sx += s.x;
                c.sy += s.y;
                c.members.push(i);
            }
            None => clusters.push(Cluster { sx: s.x, sy: s.y, members: alloc::vec![i] }),
        }
    }
    let waypoints = clusters
        .into_iter()
        .map(|c| {
            let n = c.members.len();
            let members = || c.members.iter().map(|&i| &samples[i]);
            let tput: Vec<f64> = members().map(|s| s.throughput).collect();
            Waypoint {
                x: c.sx / n as f64,
                y: c.sy / n as f64,
                mean_throughput: mean(&tput),
                std_throughput: sample_std(&tput),
                n_samples: n,
                mean_sinr: mean_of(members().filter_map(|s| s.sinr)),
                mean_mcs: mean_of(members().filter_map(|s| s.mcs.map(f64::from))),
                mean_ri: mean_of(members().filter_map(|s| s.ri.map(f64::from))),
            }
        })
        .collect();
    MeasurementSet::new(waypoints)
}

/// Seeded random partition into (train, test). Train holds
/// `round(train_fraction · N)` waypoints; both halves keep input order.
pub fn split_train_test(set: &MeasurementSet, train_fraction: f64, seed: u64) -> Result<(MeasurementSet, MeasurementSet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    let n = set.len();
    let n_train = libm::round(train_fraction * n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((set.subset(train), set.subset(test)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedPoint {
    pub measured: Waypoint,
    pub predicted_value: f64,
    pub pairing_distance: f64,
    pub cell_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    pub pairs: Vec<PairedPoint>,
    /// Waypoints with no payload-carrying cell center within the threshold.
    pub unmatched: Vec<Waypoint>,
}

/// Pairs each waypoint with its nearest unmasked cell center within
/// `threshold`. Equidistant cells resolve to the lexicographically smallest
/// `(x, y)` center.
pub fn pair_nearest_neighbor(measurements: &MeasurementSet, grid: &GridMap<f64>, threshold: f64) -> Result<Pairing> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::arg(format!("pairing threshold must be > 0, got {threshold}")));
    }
    if grid.iter().next().is_none() {
        return Err(Error::Pairing("prediction grid has no unmasked cells".into()));
    }
    let g = &grid.grid;
    let cs = g.cell_size;
    let window = |v: f64, origin: f64, n: usize| {
        let lo = libm::floor((v - threshold - origin) / cs - 0.5) - 1.0;
        let hi = libm::ceil((v + threshold - origin) / cs - 0.5) + 1.0;
        let clamp = |t: f64| t.max(0.0).min((n - 1) as f64) as usize;
        (clamp(lo), clamp(hi))
    };
    let mut out = Pairing::default();
    for w in measurements.waypoints() {
        let p = w.position();
        let (c0, c1) = window(p.x, g.origin.x, g.n_cols);
        let (r0, r1) = window(p.y, g.origin.y, g.n_rows);
        let mut best: Option<(f64, Point, usize, f64)> = None;
        for row in r0..=r1 {
            for col in c0..=c1 {
                let idx = g.index(col, row);
                let Some(&value) = grid.get(idx) else { continue };
                let center = g.center(idx);
                let d = p.distance(&center);
                if d > threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bc, _, _)) => {
                        d < bd - TIE_EPS
                            || (libm::fabs(d - bd) <= TIE_EPS && (center.x, center.y) < (bc.x, bc.y))
                    }
                };
                if better {
                    best = Some((d, center, idx, value));
                }
            }
        }
        match best {
            Some((d, _, idx, value)) => out.pairs.push(PairedPoint {
                measured: w.clone(),
                predicted_value: value,
                pairing_distance: d,
                cell_index: idx,
            }),
            None => out.unmatched.push(w.clone()),
        }
    }
    Ok(out)
}
