use proptest::prelude::*;
use radiomap::config::parse_mask;
use radiomap::csvio::{
    parse_raw_csv, read_grid, read_grid_table, read_waypoints, write_grid, write_waypoints, PredictionRecord, Schema,
};
use radiomap::heatmap::{export_heatmap, ramp, ColorScale, MASK_GRAY};
use radiomap::model::{fit_threaded, ModelFile};
use radiomap_core::dataset::{aggregate_by_location, MeasurementSet, Waypoint};
use radiomap_core::gpr::{FitOptions, GprModel};
use radiomap_core::grid::{build_grid, Grid, GridMap, Polygon};
use radiomap_core::kernels::{KernelKind, KernelSpec};
use radiomap_core::linklayer::LinkCell;
use radiomap_core::Point;

fn schema() -> Schema {
    Schema::parse(r#"{"x": "x", "y": "y", "timestamp": "t", "throughput": "dl_mbps"}"#).unwrap()
}

#[test]
fn raw_row_maps_fields() {
    let p = parse_raw_csv("x,y,t,dl_mbps\n1.0,2.0,0.0,350.5\n".as_bytes(), &schema()).unwrap();
    assert!(p.diagnostics.is_empty());
    let s = &p.samples[0];
    assert_eq!((s.x, s.y, s.timestamp, s.throughput), (1.0, 2.0, 0.0, 350.5));
}

#[test]
fn negative_throughput_is_rejected_with_line() {
    let p = parse_raw_csv("x,y,t,dl_mbps\n1,2,0,5\n1,2,0,-3\n".as_bytes(), &schema()).unwrap();
    assert_eq!(p.samples.len(), 1);
    assert_eq!(p.diagnostics.len(), 1);
    assert_eq!(p.diagnostics[0].line, 3);
    assert!(p.diagnostics[0].message.contains("throughput"), "{}", p.diagnostics[0].message);
}

#[test]
fn missing_column_names_it() {
    let err = parse_raw_csv("x,y,t,mbps\n".as_bytes(), &schema()).unwrap_err();
    assert!(err.to_string().contains("dl_mbps"), "{err}");
}

#[test]
fn malformed_rows_become_diagnostics() {
    let mut text = String::from("x,y,t,dl_mbps\n");
    for i in 0..9000 {
        match i % 9 {
            0 => text.push_str("1.0,oops,0,5\n"),
            1 if i % 2 == 1 => text.push_str("1.0,2.0,0,-1\n"),
            1 => text.push_str("1.0,2.0\n"),
            _ => text.push_str(&format!("{},{},{},{}\n", i % 30, i / 30, i, 100 + i % 7)),
        }
    }
    let p = parse_raw_csv(text.as_bytes(), &schema()).unwrap();
    assert_eq!(p.samples.len(), 7000);
    assert_eq!(p.diagnostics.len(), 2000);
    let lines: Vec<u64> = p.diagnostics.iter().map(|d| d.line).collect();
    assert!(lines.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(lines[0], 2);
    // Order is preserved.
    assert!(p.samples.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
}

#[test]
fn schema_accepts_key_value_lines() {
    let s = Schema::parse("# comment\nx = pos_x\ny=pos_y\nthroughput = dl\n").unwrap();
    assert_eq!((s.x.as_str(), s.y.as_str(), s.throughput.as_str()), ("pos_x", "pos_y", "dl"));
    assert_eq!(s.timestamp, None);
    assert!(Schema::parse("x = a\ny = b\n").is_err());
    assert!(Schema::parse("x = a\ny = b\nthroughput = c\ncolour = d\n").is_err());
}

#[test]
fn waypoint_csv_round_trip() {
    let p = parse_raw_csv("x,y,t,dl_mbps\n0,0,0,100\n0,0,1,110\n0,0,2,120\n5,5,3,7\n".as_bytes(), &schema()).unwrap();
    let mut set = aggregate_by_location(&p.samples, 0.25).unwrap();
    let mut buf = Vec::new();
    write_waypoints(&mut buf, &set).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("x,y,mean_mbps,std_mbps,n\n"), "{text}");
    assert!(text.contains("0,0,110,10,3\n"), "{text}");
    let back = read_waypoints(buf.as_slice()).unwrap();
    set.metadata.clear();
    assert_eq!(back.waypoints(), set.waypoints());

    let mut w = Waypoint::new(1.0, 2.0, 3.0, 0.5, 2);
    w.mean_sinr = Some(21.5);
    let ext = MeasurementSet::new(vec![w, Waypoint::new(4.0, 2.0, 3.0, 0.0, 1)]).unwrap();
    let mut buf = Vec::new();
    write_waypoints(&mut buf, &ext).unwrap();
    assert!(buf.starts_with(b"x,y,mean_mbps,std_mbps,n,mean_sinr,mean_mcs,mean_ri\n"));
    assert_eq!(read_waypoints(buf.as_slice()).unwrap().waypoints(), ext.waypoints());
}

fn masked_grid(origin: Point, cell: f64, cols: usize, rows: usize, mask_bits: &[bool]) -> Grid {
    let mut g = Grid::new(origin, cell, cols, rows).unwrap();
    let mask: Vec<bool> = (0..g.len()).map(|i| mask_bits[i % mask_bits.len()]).collect();
    if mask.iter().any(|m| *m) {
        g.mask = Some(mask);
    }
    g
}

fn decimal() -> impl Strategy<Value = f64> {
    (-200_000i64..200_000).prop_map(|v| v as f64 / 1000.0)
}

proptest! {
    #[test]
    fn prediction_grid_round_trip(
        ox in decimal(), oy in decimal(),
        cell_mm in 10u32..5000,
        cols in 1usize..12, rows in 1usize..12,
        mask_bits in prop::collection::vec(prop::bool::weighted(0.2), 1..7),
        vals in prop::collection::vec((-1e3f64..1e3, 0.0f64..100.0), 1..20),
    ) {
        prop_assume!(cols * rows > 1);
        let g = masked_grid(Point::new(ox, oy), cell_mm as f64 / 1000.0, cols, rows, &mask_bits);
        let values = (0..g.len())
            .map(|i| (!g.is_masked(i)).then(|| {
                let (m, s) = vals[i % vals.len()];
                PredictionRecord { mean_mbps: m, std_mbps: s }
            }))
            .collect();
        let map = GridMap::from_values(g, values).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &map).unwrap();
        let back: GridMap<PredictionRecord> = read_grid(buf.as_slice(), None).unwrap();
        prop_assert_eq!(back, map);
    }

    #[test]
    fn link_grid_round_trip(
        cols in 2usize..15, rows in 1usize..15,
        mask_bits in prop::collection::vec(prop::bool::weighted(0.1), 1..5),
        sinr in prop::collection::vec(-20.0f64..40.0, 1..10),
    ) {
        let g = masked_grid(Point::new(-3.5, 12.25), 0.5, cols, rows, &mask_bits);
        let values = (0..g.len())
            .map(|i| (!g.is_masked(i)).then(|| {
                let s = sinr[i % sinr.len()];
                let mcs = (s > -5.0).then(|| ((s + 5.0) as u8).min(27));
                LinkCell { sinr_db: s, mcs, layers: 1 + (i % 4) as u8, throughput_mbps: if mcs.is_some() { 10.0 * s.abs() } else { 0.0 } }
            }))
            .collect();
        let map = GridMap::from_values(g, values).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &map).unwrap();
        let back: GridMap<LinkCell> = read_grid(buf.as_slice(), None).unwrap();
        prop_assert_eq!(back, map);
    }
}

#[test]
fn built_grid_round_trips_through_csv() {
    let pit = Polygon::new(vec![Point::new(4.0, 7.0), Point::new(10.0, 7.0), Point::new(10.0, 11.0), Point::new(4.0, 11.0)]);
    let g = build_grid(Point::new(0.0, 0.0), Point::new(24.0, 16.0), 0.5, &[pit]).unwrap();
    let map = g.try_map(|p| Ok(PredictionRecord { mean_mbps: p.x * p.y, std_mbps: 1.0 })).unwrap();
    let mut buf = Vec::new();
    write_grid(&mut buf, &map).unwrap();
    let back: GridMap<PredictionRecord> = read_grid(buf.as_slice(), None).unwrap();
    assert_eq!(back, map);
    // Centers sit at quarter-meter offsets, so none lies on the pit edge.
    assert_eq!(back.grid.masked_count(), 12 * 8);
}

#[test]
fn grid_reader_rejects_bad_lattices() {
    assert!(read_grid_table("x,y,v\n0.25,0.25,1\n".as_bytes(), None).is_err());
    assert!(read_grid_table("x,y,v\n0.25,0.25,1\n".as_bytes(), Some(0.5)).is_ok());
    assert!(read_grid_table("x,y,v\n0,0,1\n1,0,1\n3,0,1\n".as_bytes(), None).is_err());
    assert!(read_grid_table("x,y,v\n0,0,1\n1,0,1\n0,1,1\n".as_bytes(), None).is_err());
    assert!(read_grid_table("x,y,v\n0,0,1\n1,0,1\n1,0,2\n0,0,2\n".as_bytes(), None).is_err());
    assert!(read_grid_table("x,y,a,b\n0,0,1,\n1,0,1,1\n".as_bytes(), None).is_err());
    let t = read_grid_table("x,y,a\n0,0,1\n1,0,2\n".as_bytes(), None).unwrap();
    assert!(t.field("b").unwrap_err().to_string().contains("no field"));
}

#[test]
fn mask_file_parses_rings() {
    let m = parse_mask("[[[0,0],[1,0],[1,1]], [[2,2],[3,2],[3,3],[2,3]]]").unwrap();
    assert_eq!(m.len(), 2);
    assert!(m[1].contains(Point::new(2.5, 2.5)));
    assert!(parse_mask("[[[0,0],[1,0]]]").is_err());
    assert!(parse_mask("{}").is_err());
}

fn one_cell(v: Option<f64>) -> GridMap<f64> {
    GridMap::from_values(Grid::new(Point::new(0.0, 0.0), 1.0, 1, 1).unwrap(), vec![v]).unwrap()
}

#[test]
fn heatmap_endpoints_and_mask() {
    let scale = ColorScale::new(0.0, 750.0).unwrap();
    let px = |v| export_heatmap(&one_cell(v), scale)[11..].to_vec();
    assert_eq!(export_heatmap(&one_cell(Some(0.0)), scale)[..11], *b"P6\n1 1\n255\n");
    assert_eq!(px(Some(0.0)), ramp()[0]);
    assert_eq!(px(Some(750.0)), ramp()[255]);
    assert_eq!(px(Some(-5.0)), ramp()[0]);
    assert_eq!(px(Some(1e9)), ramp()[255]);
    assert_eq!(px(None), MASK_GRAY);
    assert_eq!(px(Some(f64::NAN)), MASK_GRAY);
    assert!(ColorScale::new(1.0, 1.0).is_err());
}

#[test]
fn heatmap_rows_run_top_to_bottom() {
    let g = Grid::new(Point::new(0.0, 0.0), 1.0, 2, 2).unwrap();
    // Row 0 (low y) is dark, row 1 (high y) is bright.
    let map = GridMap::from_values(g, vec![Some(0.0), Some(0.0), Some(1.0), None]).unwrap();
    let img = export_heatmap(&map, ColorScale::new(0.0, 1.0).unwrap());
    assert_eq!(&img[..11], b"P6\n2 2\n255\n");
    let px: Vec<&[u8]> = img[11..].chunks(3).collect();
    assert_eq!(px, [&ramp()[255][..], &MASK_GRAY[..], &ramp()[0][..], &ramp()[0][..]]);
    assert_eq!(img, export_heatmap(&map, ColorScale::new(0.0, 1.0).unwrap()));
}

fn lightness(c: [u8; 3]) -> f64 {
    let lin = |v: u8| {
        let v = v as f64 / 255.0;
        if v <= 0.04045 { v / 12.92 } else { ((v + 0.055) / 1.055).powf(2.4) }
    };
    let y = 0.2126 * lin(c[0]) + 0.7152 * lin(c[1]) + 0.0722 * lin(c[2]);
    if y > 216.0 / 24389.0 { 116.0 * y.cbrt() - 16.0 } else { y * 24389.0 / 27.0 }
}

#[test]
fn ramp_is_perceptually_ordered() {
    let l: Vec<f64> = ramp().iter().map(|c| lightness(*c)).collect();
    // 8-bit quantization allows tiny single-step dips.
    assert!(l.windows(2).all(|w| w[1] - w[0] > -0.05));
    assert!(l.windows(3).all(|w| w[2] > w[0]));
    assert!(l[255] - l[0] > 70.0);
}

fn small_set() -> MeasurementSet {
    let wps = (0..40)
        .map(|i| {
            let (x, y) = ((i % 8) as f64 * 0.5, (i / 8) as f64 * 0.5);
            Waypoint::new(x, y, 300.0 + 80.0 * (x - y).sin(), 5.0 + (i % 3) as f64, 4)
        })
        .collect();
    MeasurementSet::new(wps).unwrap()
}

#[test]
fn model_json_round_trip_is_exact() {
    let opts = FitOptions { n_restarts: 3, seed: 11, ..FitOptions::default() };
    let model = fit_threaded(&small_set(), KernelKind::Rq, &opts).unwrap();
    let json = ModelFile::from_model(&model).to_json().unwrap();
    let loaded = ModelFile::from_json(&json).unwrap().into_model().unwrap();
    assert_eq!(loaded.spec(), model.spec());
    assert_eq!(loaded.weights(), model.weights());
    for q in [Point::new(0.3, 0.7), Point::new(10.0, -4.0)] {
        assert_eq!(loaded.predict(q).unwrap(), model.predict(q).unwrap());
    }
    assert_eq!(ModelFile::from_model(&loaded).to_json().unwrap(), json);

    let spec: KernelSpec = serde_json::from_value(serde_json::json!({
        "kind": "matern15", "signal_variance": 1.0, "length_scale": 2.0, "alpha": 1.0, "noise_variance": 0.5
    }))
    .unwrap();
    assert_eq!(spec.kind, KernelKind::Matern15);

    let mut bad: serde_json::Value = serde_json::from_str(&json).unwrap();
    bad["format"] = "other".into();
    assert!(ModelFile::from_json(&bad.to_string()).unwrap().into_model().is_err());
}

#[test]
fn threaded_fit_matches_serial_fit() {
    let opts = FitOptions { n_restarts: 4, seed: 3, ..FitOptions::default() };
    let a = fit_threaded(&small_set(), KernelKind::Matern15, &opts).unwrap();
    let b = GprModel::fit(&small_set(), KernelKind::Matern15, &opts).unwrap();
    assert_eq!(a.fit_log(), b.fit_log());
    assert_eq!(a.spec(), b.spec());
}
