//! JSON configuration files: radio parameters, MCS table, layer rule and masks.

use std::path::Path;

use radiomap_core::grid::Polygon;
use radiomap_core::linklayer::{LayerRule, McsTable, RadioConfig};
use radiomap_core::Point;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::format(format!("{}: {e}", path.display())))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Loads a radio config, or the built-in defaults when `path` is `None`.
pub fn radio_config(path: Option<&Path>) -> Result<RadioConfig> {
    let cfg = match path {
        Some(p) => load_json(p)?,
        None => RadioConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn mcs_table(path: Option<&Path>) -> Result<McsTable> {
    let t = match path {
        Some(p) => load_json(p)?,
        None => McsTable::nr_256qam(),
    };
    t.validate()?;
    Ok(t)
}

pub fn layer_rule(path: Option<&Path>) -> Result<LayerRule> {
    let r = match path {
        Some(p) => load_json(p)?,
        None => LayerRule::default(),
    };
    r.validate()?;
    Ok(r)
}

/// Parses a mask file: a JSON list of rings, each a list of `[x, y]` vertices.
pub fn parse_mask(text: &str) -> Result<Vec<Polygon>> {
    let rings: Vec<Vec<[f64; 2]>> = serde_json::from_str(text).map_err(|e| CliError::format(format!("mask: {e}")))?;
    rings
        .into_iter()
        .enumerate()
        .map(|(i, ring)| {
            if ring.len() < 3 {
                return Err(CliError::format(format!("mask ring {i}: need at least 3 vertices, got {}", ring.len())));
            }
            if ring.iter().flatten().any(|v| !v.is_finite()) {
                return Err(CliError::format(format!("mask ring {i}: non-finite vertex")));
            }
            Ok(Polygon::new(ring.into_iter().map(|[x, y]| Point::new(x, y)).collect()))
        })
        .collect()
}

pub fn load_mask(path: Option<&Path>) -> Result<Vec<Polygon>> {
    match path {
        Some(p) => parse_mask(&read_text(p)?),
        None => Ok(Vec::new()),
    }
}
