//! Command-line surface: one subcommand per pipeline stage.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use radiomap_core::dataset::{
    aggregate_by_location, pair_nearest_neighbor, split_train_test, DEFAULT_AGGREGATION_RADIUS, DEFAULT_PAIRING_THRESHOLD,
};
use radiomap_core::gpr::FitOptions;
use radiomap_core::grid::{build_grid, Grid};
use radiomap_core::kernels::KernelKind;
use radiomap_core::linklayer::{predict_map, LayerMode, LayerRule, McsTable, RadioConfig};
use radiomap_core::scorecard::{compute_scorecard, pdf_histogram, signed_errors, uniform_edges};
use radiomap_core::Point;

use crate::config::{self, to_json_pretty};
use crate::csvio::{self, PredictionRecord, Schema};
use crate::error::{CliError, Result};
use crate::heatmap::{export_heatmap, ColorScale};
use crate::model::{fit_threaded, ModelFile};

#[derive(Debug, Parser)]
#[command(name = "radiomap", version, about = "Indoor 5G throughput maps: GP regression, link-layer baseline and error scorecards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a raw measurement log into per-waypoint statistics
    Aggregate(AggregateArgs),
    /// Split waypoints, fit a GP model on the training part
    Fit(FitArgs),
    /// Evaluate a fitted model on a grid
    Predict(PredictArgs),
    /// Evaluate the link-layer baseline on a grid
    Baseline(BaselineArgs),
    /// Pair measurements with a predicted grid and compute the error scorecard
    Compare(CompareArgs),
    /// Render one grid field as a PPM heatmap
    Report(ReportArgs),
    /// Print a built-in default configuration as JSON
    Defaults(DefaultsArgs),
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Raw measurement CSV
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Column mapping: JSON object or field=column lines
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Clustering radius in meters
    #[arg(long, default_value_t = DEFAULT_AGGREGATION_RADIUS)]
    pub radius: f64,
    /// Write every rejected row as `line<TAB>message`
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Waypoint CSV
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value = "rbf")]
    pub kernel: KernelKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Training fraction; the remainder is held out
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Held-out waypoints, in the waypoint CSV format
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse {p:?} as a number")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_bounds(s: &str) -> std::result::Result<Bounds, String> {
    let v = parse_floats(s, 4)?;
    Ok(Bounds { min: Point::new(v[0], v[1]), max: Point::new(v[2], v[3]) })
}

fn parse_scale(s: &str) -> std::result::Result<ColorScale, String> {
    let v = parse_floats(s, 2)?;
    ColorScale::new(v[0], v[1]).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistEdges(pub Vec<f64>);

/// Either `lo:hi:width` or an explicit comma-separated edge list.
fn parse_edges(s: &str) -> std::result::Result<HistEdges, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse {p:?} as a number")))
            .collect::<std::result::Result<_, _>>()?;
        let (lo, hi, width) = (v[0], v[1], v[2]);
        if width.is_nan() || width <= 0.0 {
            return Err("bin width must be > 0".into());
        }
        let n = (hi - lo) / width;
        if !(n >= 0.5 && (n - n.round()).abs() < 1e-9 * n.max(1.0)) {
            return Err(format!("range {lo}..{hi} is not a whole number of {width}-wide bins"));
        }
        return uniform_edges(lo, hi, n.round() as usize).map(HistEdges).map_err(|e| e.to_string());
    }
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse {p:?} as a number")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() < 2 {
        return Err("need at least two edges".into());
    }
    Ok(HistEdges(v))
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// xmin,ymin,xmax,ymax in meters
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    pub bounds: Bounds,
    #[arg(long, default_value_t = 0.5)]
    pub cell: f64,
    /// JSON list of polygon rings; cells centered inside are masked
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

impl GridArgs {
    fn build(&self) -> Result<Grid> {
        let polygons = config::load_mask(self.mask.as_deref())?;
        build_grid(self.bounds.min, self.bounds.max, self.cell, &polygons).map_err(usage)
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Report the latent-function std, without the noise term
    #[arg(long)]
    pub latent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Adaptive,
    Rank4,
}

impl From<ModeArg> for LayerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Adaptive => LayerMode::Adaptive,
            ModeArg::Rank4 => LayerMode::UniformRank4,
        }
    }
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Radio config JSON (built-in defaults when omitted)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mcs_table: Option<PathBuf>,
    #[arg(long)]
    pub layer_rule: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Measured waypoints (waypoint CSV)
    #[arg(long)]
    pub measured: PathBuf,
    /// Predicted grid CSV
    #[arg(long)]
    pub predicted: PathBuf,
    /// Grid column to compare; defaults to mean_mbps, then throughput_mbps
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long, default_value_t = DEFAULT_PAIRING_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// `lo:hi:width` or a comma-separated edge list
    #[arg(long, value_parser = parse_edges, allow_hyphen_values = true, requires = "hist_out")]
    pub hist_edges: Option<HistEdges>,
    #[arg(long, requires = "hist_edges")]
    pub hist_out: Option<PathBuf>,
    /// Unmatched waypoints, one `x y nearest_distance` line each
    #[arg(long)]
    pub unmatched_out: Option<PathBuf>,
    /// Cell size for single-cell grids (otherwise inferred)
    #[arg(long)]
    pub cell: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value = "throughput_mbps")]
    pub field: String,
    #[arg(long)]
    pub out: PathBuf,
    /// min,max of the color ramp
    #[arg(long, value_parser = parse_scale, allow_hyphen_values = true)]
    pub scale: ColorScale,
    #[arg(long)]
    pub cell: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefaultKind {
    Radio,
    McsTable,
    LayerRule,
}

#[derive(Debug, Args)]
pub struct DefaultsArgs {
    #[arg(value_enum)]
    pub kind: DefaultKind,
    /// Write to a file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn usage(e: radiomap_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn aggregate(a: &AggregateArgs) -> Result<()> {
    if !(a.radius.is_finite() && a.radius > 0.0) {
        return Err(CliError::Usage(format!("--radius must be > 0, got {}", a.radius)));
    }
    let schema = Schema::parse(&config::read_text(&a.schema)?)?;
    let parsed = csvio::parse_raw_csv(open(&a.input)?, &schema)?;
    let set = aggregate_by_location(&parsed.samples, a.radius)?;
    write_file(&a.out, |w| csvio::write_waypoints(w, &set))?;
    if let Some(p) = &a.diagnostics {
        write_file(p, |w| {
            for d in &parsed.diagnostics {
                writeln!(w, "{}\t{}", d.line, d.message).map_err(|e| CliError::io(p, e))?;
            }
            Ok(())
        })?;
    } else {
        for d in parsed.diagnostics.iter().take(10) {
            eprintln!("line {}: {}", d.line, d.message);
        }
    }
    eprintln!(
        "{} samples, {} rejected rows, {} waypoints",
        parsed.samples.len(),
        parsed.diagnostics.len(),
        set.len()
    );
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    if !(a.split > 0.0 && a.split < 1.0) {
        return Err(CliError::Usage(format!("--split must be in (0, 1), got {}", a.split)));
    }
    if a.restarts == 0 {
        return Err(CliError::Usage("--restarts must be >= 1".into()));
    }
    let set = csvio::read_waypoints(open(&a.train)?)?;
    let (train, test) = split_train_test(&set, a.split, a.seed)?;
    let opts = FitOptions { n_restarts: a.restarts, seed: a.seed, max_iterations: a.max_iterations, ..FitOptions::default() };
    let model = fit_threaded(&train, a.kernel, &opts)?;
    let file = ModelFile::from_model(&model);
    write_bytes(&a.model_out, file.to_json()?.as_bytes())?;
    if let Some(p) = &a.test_out {
        write_file(p, |w| csvio::write_waypoints(w, &test))?;
    }
    let s = model.spec();
    eprintln!(
        "{} kernel on {} points ({} held out): signal_variance={} length_scale={} alpha={} noise_variance={} lml={}",
        s.kind,
        train.len(),
        test.len(),
        s.signal_variance,
        s.length_scale,
        s.alpha,
        s.noise_variance,
        model.log_marginal_likelihood()
    );
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let model = ModelFile::from_json(&config::read_text(&a.model)?)?.into_model()?;
    let grid = a.grid.build()?;
    let preds = if a.latent { model.predict_grid_latent(&grid)? } else { model.predict_grid(&grid)? };
    let map = preds.map(|p| Some(PredictionRecord::from(*p)));
    write_file(&a.out, |w| csvio::write_grid(w, &map))
}

fn baseline(a: &BaselineArgs) -> Result<()> {
    let cfg: RadioConfig = config::radio_config(a.config.as_deref())?;
    let table: McsTable = config::mcs_table(a.mcs_table.as_deref())?;
    let rule: LayerRule = config::layer_rule(a.layer_rule.as_deref())?;
    let grid = a.grid.build()?;
    let map = predict_map(&cfg, &grid, &table, &rule, a.mode.into())?;
    write_file(&a.out, |w| csvio::write_grid(w, &map))
}

fn compare(a: &CompareArgs) -> Result<()> {
    if !(a.threshold.is_finite() && a.threshold > 0.0) {
        return Err(CliError::Usage(format!("--threshold must be > 0, got {}", a.threshold)));
    }
    let measured = csvio::read_waypoints(open(&a.measured)?)?;
    let table = csvio::read_grid_table(open(&a.predicted)?, a.cell)?;
    let field = match &a.field {
        Some(f) => f.clone(),
        None => ["mean_mbps", "throughput_mbps"]
            .into_iter()
            .find(|f| table.column(f).is_some())
            .ok_or_else(|| CliError::Usage("grid has neither mean_mbps nor throughput_mbps; pass --field".into()))?
            .to_string(),
    };
    let predicted = table.field(&field)?;
    let pairing = pair_nearest_neighbor(&measured, &predicted, a.threshold)?;
    let errors = signed_errors(&pairing.pairs)?;
    let card = compute_scorecard(&errors)?;
    write_bytes(&a.out, to_json_pretty(&card)?.as_bytes())?;
    if let (Some(edges), Some(p)) = (&a.hist_edges, &a.hist_out) {
        let h = pdf_histogram(&errors, &edges.0).map_err(usage)?;
        write_file(p, |w| csvio::write_histogram(w, &h))?;
    }
    if let Some(p) = &a.unmatched_out {
        write_file(p, |w| {
            for u in &pairing.unmatched {
                let d = predicted.grid.centers().map(|c| c.distance(&u.position())).fold(f64::INFINITY, f64::min);
                writeln!(w, "{} {} {}", u.x, u.y, d).map_err(|e| CliError::io(p, e))?;
            }
            Ok(())
        })?;
    }
    print!("{}", card.render_table());
    eprintln!("{} paired, {} unmatched (threshold {} m)", pairing.pairs.len(), pairing.unmatched.len(), a.threshold);
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let table = csvio::read_grid_table(open(&a.grid)?, a.cell)?;
    let map = table.field(&a.field)?;
    write_bytes(&a.out, &export_heatmap(&map, a.scale))
}

fn defaults(a: &DefaultsArgs) -> Result<()> {
    let text = match a.kind {
        DefaultKind::Radio => to_json_pretty(&RadioConfig::default())?,
        DefaultKind::McsTable => to_json_pretty(&McsTable::nr_256qam())?,
        DefaultKind::LayerRule => to_json_pretty(&LayerRule::default())?,
    };
    match &a.out {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Aggregate(a) => aggregate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Baseline(a) => baseline(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
        Command::Defaults(a) => defaults(a),
    }
}

/// Parses `args`, runs the subcommand and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
