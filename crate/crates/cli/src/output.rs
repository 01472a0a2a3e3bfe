//! CSV tables and grayscale heatmaps.

use std::fmt::Write as _;
use std::path::Path;

use msbayes::grid_fem::FineGrid;
use msbayes::{Error, Result};

/// One line per grid node, `x,y,value`, nodes in row-major order from `y = 0`.
pub fn nodal_csv(fine: &FineGrid, dofs: &[f64]) -> String {
    let nodal = fine.expand(dofs);
    let n = fine.n();
    let mut s = String::with_capacity(nodal.len() * 32);
    for iy in 0..=n {
        for ix in 0..=n {
            let v = nodal[fine.node(ix, iy)];
            writeln!(s, "{:.6},{:.6},{:e}", ix as f64 / n as f64, iy as f64 / n as f64, v).unwrap();
        }
    }
    s
}

/// Reads the value column of a nodal CSV.
pub fn read_nodal_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.rsplit(',')
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("{}: line {} is not 'x,y,value'", path.display(), i + 1)))
        })
        .collect()
}

/// 8-bit grayscale PNG of a square nodal field, linear min-max scaling,
/// row 0 of the field at the bottom of the image.
pub fn heatmap_png(path: &Path, nodal: &[f64]) -> Result<()> {
    let side = (nodal.len() as f64).sqrt().round() as usize;
    if side * side != nodal.len() || side == 0 {
        return Err(Error::Format(format!("heatmap needs a square field, got {} values", nodal.len())));
    }
    let (lo, hi) = nodal.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(nodal.len());
    for row in 0..side {
        let iy = side - 1 - row;
        for ix in 0..side {
            let v = nodal[iy * side + ix];
            let g = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 0.0 };
            pixels.push(g.clamp(0.0, 255.0) as u8);
        }
    }
    let img = image::GrayImage::from_raw(side as u32, side as u32, pixels).expect("buffer size matches");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
}

/// Writes `dofs` as `<stem>.csv` and `<stem>.png` in `dir`.
pub fn write_field(dir: &Path, stem: &str, fine: &FineGrid, dofs: &[f64]) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.csv")), nodal_csv(fine, dofs))?;
    heatmap_png(&dir.join(format!("{stem}.png")), &fine.expand(dofs))
}

/// `key = value` lines.
pub fn key_values(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Table with `sigma_L` rows and `sigma_d` columns.
pub fn sigma_table(sigma_l: &[f64], sigma_d: &[f64], cell: impl Fn(usize, usize) -> String) -> String {
    let mut s = String::from("sigma_L\\sigma_d");
    for d in sigma_d {
        write!(s, ",{d:e}").unwrap();
    }
    s.push('\n');
    for (i, l) in sigma_l.iter().enumerate() {
        write!(s, "{l:e}").unwrap();
        for j in 0..sigma_d.len() {
            write!(s, ",{}", cell(i, j)).unwrap();
        }
        s.push('\n');
    }
    s
}
