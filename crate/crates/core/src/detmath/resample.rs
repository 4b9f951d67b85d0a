use super::{BoundingBox, DetError, Result};

/// Channel-major `channels × height × width` grid of activations. Pixel
/// `(row, col)` is centered at `(col + 0.5, row + 0.5)` in map coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(DetError::InvalidMap("empty map"));
        }
        if data.len() != channels * height * width {
            return Err(DetError::InvalidMap("data length does not match shape"));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for r in 0..height {
                for col in 0..width {
                    data.push(f(c, r, col));
                }
            }
        }
        Self { channels, height, width, data }
    }

    pub fn at(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    /// Bilinear sample at continuous map coordinates, clamped to the border
    /// pixel centers.
    pub fn sample(&self, c: usize, x: f64, y: f64) -> f64 {
        let u = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let v = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (c0, r0) = (u.floor() as usize, v.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
        let (fu, fv) = (u - c0 as f64, v - r0 as f64);
        let top = self.at(c, r0, c0) * (1.0 - fu) + self.at(c, r0, c1) * fu;
        let bottom = self.at(c, r1, c0) * (1.0 - fu) + self.at(c, r1, c1) * fu;
        top * (1.0 - fv) + bottom * fv
    }
}

/// Resamples the region `bbox` of every channel onto an `out_h × out_w` grid.
/// Output cell `(i, j)` takes the bilinear value at the cell's center mapped
/// into the box.
pub fn bilinear_resample(map: &FeatureMap, bbox: &BoundingBox, out_w: usize, out_h: usize) -> Result<FeatureMap> {
    if !(bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(DetError::InvalidBox("zero-area box"));
    }
    bbox.validate()?;
    if out_w == 0 || out_h == 0 {
        return Err(DetError::InvalidMap("output grid must be non-empty"));
    }
    let overlaps = bbox.x < map.width as f64 && bbox.x + bbox.w > 0.0 && bbox.y < map.height as f64 && bbox.y + bbox.h > 0.0;
    if !overlaps {
        return Err(DetError::NoOverlap);
    }
    let (sx, sy) = (bbox.w / out_w as f64, bbox.h / out_h as f64);
    Ok(FeatureMap::from_fn(map.channels, out_h, out_w, |c, i, j| {
        let x = bbox.x + (j as f64 + 0.5) * sx;
        let y = bbox.y + (i as f64 + 0.5) * sy;
        map.sample(c, x, y)
    }))
}
