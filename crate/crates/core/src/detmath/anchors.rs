use serde::{Deserialize, Serialize};

use super::{BoundingBox, DetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub image_w: u32,
    pub image_h: u32,
    pub stride: u32,
    /// Anchor side length for ratio 1:1, in pixels.
    pub scales: Vec<f64>,
    /// Width-to-height ratios.
    pub aspect_ratios: Vec<f64>,
    pub proposal_cap: usize,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            image_w: 400,
            image_h: 400,
            stride: 16,
            scales: vec![32.0, 64.0, 128.0],
            aspect_ratios: vec![1.0, 0.5, 2.0],
            proposal_cap: 200,
        }
    }
}

impl AnchorConfig {
    pub fn grid_size(&self) -> Result<(u32, u32)> {
        if self.stride == 0 {
            return Err(DetError::DegenerateGrid("stride must be positive"));
        }
        let (cols, rows) = (self.image_w / self.stride, self.image_h / self.stride);
        if cols == 0 || rows == 0 {
            return Err(DetError::DegenerateGrid("image smaller than one stride"));
        }
        if self.scales.is_empty() || self.aspect_ratios.is_empty() {
            return Err(DetError::DegenerateGrid("scales and aspect ratios must be non-empty"));
        }
        if self.scales.iter().chain(&self.aspect_ratios).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(DetError::DegenerateGrid("scales and aspect ratios must be positive"));
        }
        Ok((cols, rows))
    }
}

/// One anchor per grid cell, scale and aspect ratio, centered on the cell
/// center. Order is row-major over cells, then scale, then ratio. Anchors are
/// not clipped to the image.
pub fn anchor_grid(cfg: &AnchorConfig) -> Result<Vec<BoundingBox>> {
    let (cols, rows) = cfg.grid_size()?;
    let stride = f64::from(cfg.stride);
    let mut out = Vec::with_capacity((cols * rows) as usize * cfg.scales.len() * cfg.aspect_ratios.len());
    for r in 0..rows {
        let cy = (f64::from(r) + 0.5) * stride;
        for c in 0..cols {
            let cx = (f64::from(c) + 0.5) * stride;
            for &s in &cfg.scales {
                for &ratio in &cfg.aspect_ratios {
                    let root = ratio.sqrt();
                    out.push(BoundingBox::from_center(cx, cy, s * root, s / root)?);
                }
            }
        }
    }
    Ok(out)
}

/// Indices of the `cap` highest-scoring proposals, best first. Equal scores
/// keep their original order.
pub fn top_proposals(scores: &[f64], cap: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(cap);
    idx
}
