//! Regular prediction grids over the floor plane, with optional masks for
//! non-traversable areas.
//!
//! Cells are stored row-major with row 0 at the minimum y. Cell `(col, row)`
//! has its center at `origin + ((col + ½)·cell, (row + ½)·cell)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Boundary tolerance for point-in-polygon tests, in meters.
const EDGE_EPS: f64 = 1e-9;

/// A simple polygon given as a closed or open ring of vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub ring: Vec<Point>,
}

impl Polygon {
    pub fn new(ring: Vec<Point>) -> Self {
        Polygon { ring }
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.ring.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        for i in 0..n {
            let a = self.ring[i];
            let b = self.ring[(i + 1) % n];
            if on_segment(p, a, b) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(&a) <= EDGE_EPS;
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    if !(0.0..=1.0).contains(&t) {
        return false;
    }
    let proj = Point::new(a.x + t * dx, a.y + t * dy);
    p.distance(&proj) <= EDGE_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point,
    pub cell_size: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    /// Row-major; `true` marks a non-traversable cell.
    pub mask: Option<Vec<bool>>,
}

impl Grid {
    pub fn new(origin: Point, cell_size: f64, n_cols: usize, n_rows: usize) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::arg(format!("cell size must be > 0, got {cell_size}")));
        }
        if !origin.is_finite() {
            return Err(Error::arg("grid origin must be finite"));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::arg("grid must have at least one cell"));
        }
        Ok(Grid { origin, cell_size, n_cols, n_rows, mask: None })
    }

    pub fn len(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.n_cols, index / self.n_cols)
    }

    pub fn center(&self, index: usize) -> Point {
        let (c, r) = self.col_row(index);
        Point::new(
            self.origin.x + (c as f64 + 0.5) * self.cell_size,
            self.origin.y + (r as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.center(i))
    }

    pub fn is_masked(&self, index: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[index])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.as_ref().map_or(0, |m| m.iter().filter(|v| **v).count())
    }

    pub fn apply_mask(&mut self, polygons: &[Polygon]) {
        if polygons.is_empty() {
            return;
        }
        let mask: Vec<bool> = (0..self.len())
            .map(|i| {
                let c = self.center(i);
                self.is_masked(i) || polygons.iter().any(|p| p.contains(c))
            })
            .collect();
        self.mask = Some(mask);
    }

    /// Evaluates `f` at every unmasked cell center, in row-major order.
    pub fn try_map<T>(&self, mut f: impl FnMut(Point) -> Result<T>) -> Result<GridMap<T>> {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if self.is_masked(i) {
                values.push(None);
                continue;
            }
            let v = f(self.center(i)).map_err(|e| Error::Cell { index: i, source: Box::new(e) })?;
            values.push(Some(v));
        }
        Ok(GridMap { grid: self.clone(), values })
    }
}

/// Builds a grid covering `[min, max]` with square cells. Cells whose center
/// lies inside any mask polygon (edges inclusive) are masked.
pub fn build_grid(min: Point, max: Point, cell_size: f64, mask_polygons: &[Polygon]) -> Result<Grid> {
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::arg("grid bounds must be finite"));
    }
    if !(max.x > min.x && max.y > min.y) {
        return Err(Error::arg(format!(
            "degenerate bounds ({}, {})..({}, {})",
            min.x, min.y, max.x, max.y
        )));
    }
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(Error::arg(format!("cell size must be > 0, got {cell_size}")));
    }
    let span = |lo: f64, hi: f64| libm::ceil((hi - lo) / cell_size - 1e-9).max(1.0) as usize;
    let mut grid = Grid::new(min, cell_size, span(min.x, max.x), span(min.y, max.y))?;
    grid.apply_mask(mask_polygons);
    Ok(grid)
}

/// Per-cell payloads over a [`Grid`]; masked cells hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap<T> {
    pub grid: Grid,
    pub values: Vec<Option<T>>,
}

impl<T> GridMap<T> {
    pub fn from_values(grid: Grid, values: Vec<Option<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::arg(format!(
                "grid has {} cells but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridMap { grid, values })
    }

    pub fn filled(grid: Grid, value: T) -> Self
    where
        T: Clone,
    {
        let values = (0..grid.len()).map(|i| (!grid.is_masked(i)).then(|| value.clone())).collect();
        GridMap { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.values.get(index).and_then(Option::as_ref)
    }

    /// `(index, center, value)` for every cell carrying a payload.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Point, &T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|v| (i, self.grid.center(i), v)))
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> Option<U>) -> GridMap<U> {
        GridMap {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.as_ref().and_then(&mut f)).collect(),
        }
    }
}
