//! Limit-set rasters written as binary PPM.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::Correspondence;
use crate::error::{Error, Result};
use crate::family::RegionSpec;
use crate::sphere::{chordal_distance, Chart, SpherePoint};

/// Default number of forward steps per pixel.
pub const DEFAULT_DEPTH: usize = 18;

/// Default cap on surviving orbit points per pixel and step.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 12;

const MARKED: [u8; 3] = [16, 16, 48];

/// Square window `center ± half_width` in one chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center: Complex64,
    pub half_width: f64,
    #[serde(default = "standard_chart")]
    pub chart: Chart,
}

fn standard_chart() -> Chart {
    Chart::Standard
}

impl Viewport {
    /// Chart coordinate of the center of pixel `(col, row)`; row 0 is the top.
    pub fn pixel_point(&self, col: usize, row: usize, width: usize, height: usize) -> SpherePoint {
        let h = self.half_width;
        let aspect = height as f64 / width as f64;
        let x = self.center.re - h + (2.0 * col as f64 + 1.0) * h / width as f64;
        let y = self.center.im + h * aspect - (2.0 * row as f64 + 1.0) * h * aspect / height as f64;
        SpherePoint::from_chart(Complex64::new(x, y), self.chart)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
    pub viewport: Viewport,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, viewport: Viewport) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("raster dimensions must be positive".into()));
        }
        Ok(RasterImage {
            width,
            height,
            pixels: vec![[255; 3]; width * height],
            viewport,
        })
    }

    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn is_marked(&self, col: usize, row: usize) -> bool {
        self.get(col, row) == MARKED
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    /// Inverse of [`RasterImage::to_ppm`]; the viewport is not stored in the file.
    pub fn from_ppm(bytes: &[u8], viewport: Viewport) -> Result<Self> {
        let bad = || Error::Invalid("malformed P6 header".into());
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad());
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
        }
        pos += 1;
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad());
        }
        let width: usize = fields[1].parse().map_err(|_| bad())?;
        let height: usize = fields[2].parse().map_err(|_| bad())?;
        let body = bytes.get(pos..).ok_or_else(bad)?;
        if body.len() != 3 * width * height {
            return Err(Error::Invalid("P6 body has the wrong length".into()));
        }
        let mut img = RasterImage::new(width, height, viewport)?;
        for (i, px) in body.chunks_exact(3).enumerate() {
            img.pixels[i] = [px[0], px[1], px[2]];
        }
        Ok(img)
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
        }
        fs::write(path, self.to_ppm()).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }

    /// Marked pixels with an unmarked 4-neighbour or on the image edge.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if !self.is_marked(col, row) {
                    continue;
                }
                let nb = [
                    (col.wrapping_sub(1), row),
                    (col + 1, row),
                    (col, row.wrapping_sub(1)),
                    (col, row + 1),
                ];
                if nb.iter().any(|&(c, r)| c < self.width && r < self.height && !self.is_marked(c, r)) {
                    out.push((col, row));
                }
            }
        }
        out
    }
}

/// Number of steps for which some forward orbit of `x` stays in `region`;
/// `None` when it survives `depth` steps.
pub fn escape_step(
    c: &Correspondence,
    region: &RegionSpec,
    x: SpherePoint,
    depth: usize,
    point_budget: usize,
) -> Result<Option<usize>> {
    if !region.contains(&x) {
        return Ok(Some(0));
    }
    let mut alive = vec![x];
    for step in 1..=depth {
        let mut next: Vec<SpherePoint> = Vec::new();
        for p in &alive {
            for q in c.forward(p)?.points {
                if region.contains(&q.point) && !next.iter().any(|r| chordal_distance(r, &q.point) < 1e-9) {
                    next.push(q.point);
                }
            }
        }
        if next.is_empty() {
            return Ok(Some(step));
        }
        next.sort_by(|a, b| a.canonical_cmp(b));
        next.truncate(point_budget);
        alive = next;
    }
    Ok(None)
}

fn shade(step: usize, depth: usize) -> [u8; 3] {
    let t = 255 - (200 * step.min(depth) / depth.max(1)) as u8;
    [t, t, 255 - (255 - t) / 2]
}

/// Marks pixels whose forward orbit stays in `region` for `depth` steps;
/// the others are shaded by escape step.
pub fn render_limit_set(
    c: &Correspondence,
    region: &RegionSpec,
    viewport: Viewport,
    width: usize,
    height: usize,
    depth: usize,
    point_budget: usize,
) -> Result<RasterImage> {
    region.validate()?;
    let mut img = RasterImage::new(width, height, viewport)?;
    let pixels: Vec<[u8; 3]> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let p = viewport.pixel_point(i % width, i / width, width, height);
            Ok(match escape_step(c, region, p, depth, point_budget)? {
                None => MARKED,
                Some(k) => shade(k, depth),
            })
        })
        .collect::<Result<_>>()?;
    img.pixels = pixels;
    Ok(img)
}
