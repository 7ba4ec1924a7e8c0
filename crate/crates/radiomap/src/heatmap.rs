//! Binary PPM (P6) rendering of a scalar grid field.

use radiomap_core::grid::GridMap;
use radiomap_core::Error;

use crate::viridis::VIRIDIS;

/// Color for masked or non-finite cells.
pub const MASK_GRAY: [u8; 3] = [128, 128, 128];

/// Linear value range mapped onto the color ramp; values outside are clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScale {
    pub min: f64,
    pub max: f64,
}

impl ColorScale {
    pub fn new(min: f64, max: f64) -> Result<Self, Error> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidArgument(format!("color scale needs finite min < max, got {min},{max}")));
        }
        Ok(ColorScale { min, max })
    }

    pub fn color(&self, v: f64) -> [u8; 3] {
        if !v.is_finite() {
            return MASK_GRAY;
        }
        let t = ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        VIRIDIS[(t * 255.0).round() as usize]
    }
}

pub fn ramp() -> &'static [[u8; 3]; 256] {
    &VIRIDIS
}

/// One pixel per cell. The first image row is the grid row with the largest y.
pub fn export_heatmap(map: &GridMap<f64>, scale: ColorScale) -> Vec<u8> {
    let g = &map.grid;
    let mut out = format!("P6\n{} {}\n255\n", g.n_cols, g.n_rows).into_bytes();
    out.reserve(3 * g.len());
    for row in (0..g.n_rows).rev() {
        for col in 0..g.n_cols {
            let px = match map.values[g.index(col, row)] {
                Some(v) => scale.color(v),
                None => MASK_GRAY,
            };
            out.extend_from_slice(&px);
        }
    }
    out
}
