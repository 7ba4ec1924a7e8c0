//! Readers and writers for the tabular file formats.

use std::io::{Read, Write};

use radiomap_core::dataset::{MeasurementSet, RawSample, Waypoint};
use radiomap_core::grid::{Grid, GridMap};
use radiomap_core::linklayer::LinkCell;
use radiomap_core::scorecard::HistogramSpec;
use radiomap_core::Point;
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Maps logical sample fields to column names in a raw log.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub x: String,
    pub y: String,
    pub throughput: String,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub rsrp: Option<String>,
    #[serde(default)]
    pub sinr: Option<String>,
    #[serde(default)]
    pub mcs: Option<String>,
    #[serde(default)]
    pub ri: Option<String>,
}

impl Schema {
    /// Accepts either a JSON object or `field=column` lines (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return serde_json::from_str(trimmed).map_err(|e| CliError::format(format!("schema: {e}")));
        }
        let mut map = serde_json::Map::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::format(format!("schema line {}: expected field=column", n + 1)));
            };
            map.insert(k.trim().to_string(), serde_json::Value::String(v.trim().to_string()));
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| CliError::format(format!("schema: {e}")))
    }
}

/// A rejected row in a raw log. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDiagnostic {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct RawParse {
    pub samples: Vec<RawSample>,
    pub diagnostics: Vec<RowDiagnostic>,
}

struct Columns {
    x: usize,
    y: usize,
    throughput: usize,
    timestamp: Option<usize>,
    rsrp: Option<usize>,
    sinr: Option<usize>,
    mcs: Option<usize>,
    ri: Option<usize>,
}

fn parse_num(field: &str, name: &str) -> std::result::Result<f64, String> {
    field.trim().parse::<f64>().map_err(|_| format!("{name}: cannot parse {field:?} as a number"))
}

fn parse_opt(record: &csv::StringRecord, col: Option<usize>, name: &str) -> std::result::Result<Option<f64>, String> {
    match col.and_then(|c| record.get(c)).map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => parse_num(s, name).map(Some),
    }
}

fn parse_small_int(v: Option<f64>, name: &str) -> std::result::Result<Option<u8>, String> {
    match v {
        None => Ok(None),
        Some(f) if f.fract() == 0.0 && (0.0..=255.0).contains(&f) => Ok(Some(f as u8)),
        Some(f) => Err(format!("{name}: {f} is not a small non-negative integer")),
    }
}

fn sample_from(record: &csv::StringRecord, cols: &Columns) -> std::result::Result<RawSample, String> {
    let req = |c: usize, name: &str| match record.get(c) {
        Some(s) => parse_num(s, name),
        None => Err(format!("{name}: missing field")),
    };
    let mut s = RawSample::new(
        req(cols.x, "x")?,
        req(cols.y, "y")?,
        parse_opt(record, cols.timestamp, "timestamp")?.unwrap_or(0.0),
        req(cols.throughput, "throughput")?,
    );
    s.rsrp = parse_opt(record, cols.rsrp, "rsrp")?;
    s.sinr = parse_opt(record, cols.sinr, "sinr")?;
    s.mcs = parse_small_int(parse_opt(record, cols.mcs, "mcs")?, "mcs")?;
    s.ri = parse_small_int(parse_opt(record, cols.ri, "ri")?, "ri")?;
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

/// Reads a raw measurement log. Bad rows become diagnostics; order is kept.
pub fn parse_raw_csv<R: Read>(source: R, schema: &Schema) -> Result<RawParse> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::Headers).from_reader(source);
    let headers = rdr.headers()?.clone();
    let find = |field: &str, column: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| CliError::format(format!("schema: column {column:?} for field {field} not found in header")))
    };
    let find_opt = |field: &str, column: &Option<String>| column.as_deref().map(|c| find(field, c)).transpose();
    let cols = Columns {
        x: find("x", &schema.x)?,
        y: find("y", &schema.y)?,
        throughput: find("throughput", &schema.throughput)?,
        timestamp: find_opt("timestamp", &schema.timestamp)?,
        rsrp: find_opt("rsrp", &schema.rsrp)?,
        sinr: find_opt("sinr", &schema.sinr)?,
        mcs: find_opt("mcs", &schema.mcs)?,
        ri: find_opt("ri", &schema.ri)?,
    };

    let mut out = RawParse::default();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                match sample_from(&record, &cols) {
                    Ok(s) => out.samples.push(s),
                    Err(message) => out.diagnostics.push(RowDiagnostic { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(e.into());
                }
                out.diagnostics.push(RowDiagnostic { line, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_waypoints<W: Write>(out: W, set: &MeasurementSet) -> Result<()> {
    let wps = set.waypoints();
    let extended = wps.iter().any(|w| w.mean_sinr.is_some() || w.mean_mcs.is_some() || w.mean_ri.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x", "y", "mean_mbps", "std_mbps", "n"];
    if extended {
        header.extend(["mean_sinr", "mean_mcs", "mean_ri"]);
    }
    w.write_record(&header)?;
    for p in wps {
        let mut row = vec![
            p.x.to_string(),
            p.y.to_string(),
            p.mean_throughput.to_string(),
            p.std_throughput.to_string(),
            p.n_samples.to_string(),
        ];
        if extended {
            row.extend([fmt_opt(p.mean_sinr), fmt_opt(p.mean_mcs), fmt_opt(p.mean_ri)]);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::format(e.to_string()))?;
    Ok(())
}

pub fn read_waypoints<R: Read>(source: R) -> Result<MeasurementSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| CliError::format(format!("waypoint csv: missing column {name:?}")));
    let (cx, cy, cm, cs, cn) = (need("x")?, need("y")?, need("mean_mbps")?, need("std_mbps")?, need("n")?);
    let (c_sinr, c_mcs, c_ri) = (col("mean_sinr"), col("mean_mcs"), col("mean_ri"));

    let mut wps = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| CliError::format(format!("waypoint csv line {line}: {m}"));
        let num = |c: usize, name: &str| parse_num(rec.get(c).unwrap_or(""), name).map_err(bad);
        let n: usize = rec[cn].parse().map_err(|_| bad(format!("n: cannot parse {:?} as a count", &rec[cn])))?;
        let mut w = Waypoint::new(num(cx, "x")?, num(cy, "y")?, num(cm, "mean_mbps")?, num(cs, "std_mbps")?, n);
        w.mean_sinr = parse_opt(&rec, c_sinr, "mean_sinr").map_err(bad)?;
        w.mean_mcs = parse_opt(&rec, c_mcs, "mean_mcs").map_err(bad)?;
        w.mean_ri = parse_opt(&rec, c_ri, "mean_ri").map_err(bad)?;
        wps.push(w);
    }
    Ok(MeasurementSet::new(wps)?)
}

/// A per-cell payload with a fixed set of grid CSV columns.
pub trait GridRecord: Sized {
    const COLUMNS: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> std::result::Result<Self, String>;
}

/// Predictive mean and standard deviation, as exported by `predict`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub mean_mbps: f64,
    pub std_mbps: f64,
}

impl From<radiomap_core::gpr::Prediction> for PredictionRecord {
    fn from(p: radiomap_core::gpr::Prediction) -> Self {
        PredictionRecord { mean_mbps: p.mean, std_mbps: p.std() }
    }
}

impl GridRecord for PredictionRecord {
    const COLUMNS: &'static [&'static str] = &["mean_mbps", "std_mbps"];

    fn to_fields(&self) -> Vec<String> {
        vec![self.mean_mbps.to_string(), self.std_mbps.to_string()]
    }

    fn from_fields(f: &[&str]) -> std::result::Result<Self, String> {
        Ok(PredictionRecord { mean_mbps: parse_num(f[0], "mean_mbps")?, std_mbps: parse_num(f[1], "std_mbps")? })
    }
}

impl GridRecord for LinkCell {
    const COLUMNS: &'static [&'static str] = &["sinr_db", "mcs", "layers", "throughput_mbps"];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.sinr_db.to_string(),
            self.mcs.map_or_else(|| "-1".to_string(), |m| m.to_string()),
            self.layers.to_string(),
            self.throughput_mbps.to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> std::result::Result<Self, String> {
        let mcs = match f[1].trim() {
            "-1" => None,
            s => Some(s.parse::<u8>().map_err(|_| format!("mcs: cannot parse {s:?}"))?),
        };
        let layers = f[2].trim().parse::<u8>().map_err(|_| format!("layers: cannot parse {:?}", f[2]))?;
        Ok(LinkCell { sinr_db: parse_num(f[0], "sinr_db")?, mcs, layers, throughput_mbps: parse_num(f[3], "throughput_mbps")? })
    }
}

/// Writes every cell in row-major order. Masked cells keep their
/// coordinates and leave the payload fields empty.
pub fn write_grid<W: Write, T: GridRecord>(out: W, map: &GridMap<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x", "y"];
    header.extend_from_slice(T::COLUMNS);
    w.write_record(&header)?;
    let blank = vec![String::new(); T::COLUMNS.len()];
    for (i, v) in map.values.iter().enumerate() {
        let c = map.grid.center(i);
        let mut row = vec![c.x.to_string(), c.y.to_string()];
        match v {
            Some(rec) => row.extend(rec.to_fields()),
            None => row.extend(blank.iter().cloned()),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::format(e.to_string()))?;
    Ok(())
}

/// Grid CSV contents before payloads are interpreted.
#[derive(Debug, Clone)]
pub struct GridTable {
    pub grid: Grid,
    pub columns: Vec<String>,
    pub cells: Vec<Option<Vec<String>>>,
}

impl GridTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn typed<T: GridRecord>(&self) -> Result<GridMap<T>> {
        let idx: Vec<usize> = T::COLUMNS
            .iter()
            .map(|c| self.column(c).ok_or_else(|| CliError::format(format!("grid csv: missing column {c:?}"))))
            .collect::<Result<_>>()?;
        let values = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                cell.as_ref()
                    .map(|f| {
                        let picked: Vec<&str> = idx.iter().map(|&k| f[k].as_str()).collect();
                        T::from_fields(&picked).map_err(|m| CliError::format(format!("grid csv cell {i}: {m}")))
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridMap::from_values(self.grid.clone(), values)?)
    }

    pub fn field(&self, name: &str) -> Result<GridMap<f64>> {
        let k = self.column(name).ok_or_else(|| {
            CliError::Usage(format!("grid has no field {name:?}; available: {}", self.columns.join(", ")))
        })?;
        let values = self
            .cells
            .iter()
            .map(|c| c.as_ref().map(|f| parse_num(&f[k], name).map_err(CliError::format)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(GridMap::from_values(self.grid.clone(), values)?)
    }
}

fn round_sig(v: f64, digits: usize) -> f64 {
    format!("{:.*e}", digits - 1, v).parse().unwrap_or(v)
}

/// Finds an origin for one axis whose centers reproduce `centers` exactly,
/// preferring the shortest decimal representation.
fn fit_axis(centers: &[f64], cell: f64) -> Option<f64> {
    let est = centers[0] - 0.5 * cell;
    let exact = |o: f64| centers.iter().enumerate().all(|(i, &c)| o + (i as f64 + 0.5) * cell == c);
    (1..=17).map(|d| round_sig(est, d)).chain([est]).find(|&o| exact(o))
}

fn infer_geometry(xs: &[f64], ys: &[f64], cell_hint: Option<f64>) -> Result<(Point, f64)> {
    let spacing = |v: &[f64]| (v.len() > 1).then(|| (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64);
    let est = match (spacing(xs), spacing(ys), cell_hint) {
        (_, _, Some(h)) => h,
        (Some(a), Some(b), None) => if xs.len() >= ys.len() { a } else { b },
        (Some(a), None, None) | (None, Some(a), None) => a,
        (None, None, None) => return Err(CliError::format("grid csv: a single-cell grid needs an explicit cell size")),
    };
    let candidates = (1..=17).map(|d| round_sig(est, d)).chain([est]);
    for cell in candidates {
        if let (Some(ox), Some(oy)) = (fit_axis(xs, cell), fit_axis(ys, cell)) {
            return Ok((Point::new(ox, oy), cell));
        }
    }
    // Not bit-exact: accept if every center lies on the lattice to rounding error.
    let (ox, oy) = (xs[0] - 0.5 * est, ys[0] - 0.5 * est);
    let off = |v: &[f64], o: f64| v.iter().enumerate().map(|(i, &c)| (o + (i as f64 + 0.5) * est - c).abs()).fold(0.0, f64::max);
    if off(xs, ox).max(off(ys, oy)) <= 1e-6 * est {
        Ok((Point::new(ox, oy), est))
    } else {
        Err(CliError::format("grid csv: cell centers do not lie on a regular square lattice"))
    }
}

/// Cell center and raw payload fields; `None` for a masked cell.
type Row = (f64, f64, Option<Vec<String>>);

/// Reads a grid CSV, inferring geometry from the cell centers.
pub fn read_grid_table<R: Read>(source: R, cell_hint: Option<f64>) -> Result<GridTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(CliError::format("grid csv: header must start with x,y and name at least one field"));
    }
    let columns: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();

    let mut rows: Vec<Row> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| CliError::format(format!("grid csv line {line}: {m}"));
        let x = parse_num(&rec[0], "x").map_err(bad)?;
        let y = parse_num(&rec[1], "y").map_err(bad)?;
        let fields: Vec<String> = rec.iter().skip(2).map(str::to_string).collect();
        let payload = if fields.iter().all(|f| f.is_empty()) {
            None
        } else if fields.iter().any(|f| f.is_empty()) {
            return Err(bad("partially empty cell".into()));
        } else {
            Some(fields)
        };
        rows.push((x, y, payload));
    }
    if rows.is_empty() {
        return Err(CliError::format("grid csv: no cells"));
    }

    let distinct = |sel: fn(&Row) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(sel).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = distinct(|r| r.0);
    let ys = distinct(|r| r.1);
    if xs.len() * ys.len() != rows.len() {
        return Err(CliError::format(format!(
            "grid csv: {} cells do not fill a {}x{} lattice",
            rows.len(),
            xs.len(),
            ys.len()
        )));
    }
    let (origin, cell) = infer_geometry(&xs, &ys, cell_hint)?;
    let mut grid = Grid::new(origin, cell, xs.len(), ys.len())?;

    let mut cells: Vec<Option<Option<Vec<String>>>> = vec![None; grid.len()];
    for (x, y, payload) in rows {
        let c = xs.binary_search_by(|v| v.total_cmp(&x)).expect("x from the same set");
        let r = ys.binary_search_by(|v| v.total_cmp(&y)).expect("y from the same set");
        let slot = &mut cells[grid.index(c, r)];
        if slot.is_some() {
            return Err(CliError::format(format!("grid csv: duplicate cell at ({x}, {y})")));
        }
        *slot = Some(payload);
    }
    let cells: Vec<Option<Vec<String>>> = cells.into_iter().map(|c| c.expect("lattice is full")).collect();
    if cells.iter().any(Option::is_none) {
        grid.mask = Some(cells.iter().map(Option::is_none).collect());
    }
    Ok(GridTable { grid, columns, cells })
}

pub fn read_grid<R: Read, T: GridRecord>(source: R, cell_hint: Option<f64>) -> Result<GridMap<T>> {
    read_grid_table(source, cell_hint)?.typed()
}

pub fn write_histogram<W: Write>(out: W, h: &HistogramSpec) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "density"])?;
    for (b, d) in h.densities.iter().enumerate() {
        w.write_record([h.bin_edges[b].to_string(), h.bin_edges[b + 1].to_string(), d.to_string()])?;
    }
    w.flush().map_err(|e| CliError::format(e.to_string()))?;
    Ok(())
}
