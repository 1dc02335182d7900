use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::score::DetectionRecord;
use crate::error::{Error, Result};

/// Colour for cells without a value (unscored pixels, pixels never flagged).
pub const NO_DATA: [u8; 3] = [160, 160, 160];

const RAMP_LOW: [f64; 3] = [255.0, 255.0, 204.0];
const RAMP_HIGH: [f64; 3] = [8.0, 29.0, 88.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapLayer {
    #[default]
    PdScore,
    FirstAnomaly,
}

/// Row-major raster covering the bounding box of the records; row 0 is the
/// smallest y.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Option<f64>>,
}

impl RasterGrid {
    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        self.cells[row * self.width + col]
    }
}

pub fn grid_from_records(records: &[DetectionRecord], layer: MapLayer) -> Result<RasterGrid> {
    let first = records.first().ok_or(Error::EmptyInput("map records"))?;
    let (mut x0, mut x1, mut y0, mut y1) = (first.pixel.x, first.pixel.x, first.pixel.y, first.pixel.y);
    for r in records {
        x0 = x0.min(r.pixel.x);
        x1 = x1.max(r.pixel.x);
        y0 = y0.min(r.pixel.y);
        y1 = y1.max(r.pixel.y);
    }
    let width = (x1 - x0 + 1) as usize;
    let height = (y1 - y0 + 1) as usize;
    let mut cells = vec![None; width * height];
    for r in records {
        let idx = (r.pixel.y - y0) as usize * width + (r.pixel.x - x0) as usize;
        cells[idx] = match layer {
            MapLayer::PdScore => r.pd_score,
            MapLayer::FirstAnomaly => r.first_anomaly_week.map(|w| w as f64),
        };
    }
    Ok(RasterGrid {
        x0,
        y0,
        width,
        height,
        cells,
    })
}

/// Diverging ramp: -1 red, 0 white, 1 green.
pub fn score_color(score: f64) -> [u8; 3] {
    let s = score.clamp(-1.0, 1.0);
    let fade = |v: f64| (255.0 * v).round() as u8;
    if s < 0.0 {
        [255, fade(1.0 + s), fade(1.0 + s)]
    } else {
        [fade(1.0 - s), 255, fade(1.0 - s)]
    }
}

/// Sequential ramp from pale yellow (`t = 0`) to dark blue (`t = 1`).
pub fn sequential_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    std::array::from_fn(|c| (RAMP_LOW[c] + (RAMP_HIGH[c] - RAMP_LOW[c]) * t).round() as u8)
}

/// Plain-text portable pixmap of the grid.
pub fn render_ppm(grid: &RasterGrid, layer: MapLayer) -> String {
    let present = grid.cells.iter().flatten();
    let lo = present.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = present.copied().fold(f64::NEG_INFINITY, f64::max);
    let color = |v: Option<f64>| match (v, layer) {
        (None, _) => NO_DATA,
        (Some(s), MapLayer::PdScore) => score_color(s),
        (Some(w), MapLayer::FirstAnomaly) => {
            sequential_color(if hi > lo { (w - lo) / (hi - lo) } else { 0.0 })
        }
    };
    let mut out = format!("P3\n{} {}\n255\n", grid.width, grid.height);
    for row in 0..grid.height {
        let line: Vec<String> = (0..grid.width)
            .map(|col| {
                let [r, g, b] = color(grid.get(col, row));
                format!("{r} {g} {b}")
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Comma-separated grid, one raster row per line; empty fields mark no data.
pub fn grid_csv(grid: &RasterGrid) -> String {
    let mut out = String::new();
    for row in 0..grid.height {
        for col in 0..grid.width {
            if col > 0 {
                out.push(',');
            }
            if let Some(v) = grid.get(col, row) {
                write!(out, "{v}").expect("writing to a string");
            }
        }
        out.push('\n');
    }
    out
}
