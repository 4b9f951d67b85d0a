use serde::{Deserialize, Serialize};

use super::{DetError, Result};

/// Axis-aligned box: top-left corner plus extent, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(DetError::InvalidBox("non-finite coordinate"));
        }
        if !(self.w > 0.0 && self.h > 0.0) {
            return Err(DetError::InvalidBox("width and height must be positive"));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Center offsets relative to the anchor size, and log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxTransform {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn encode_box_transform(anchor: &BoundingBox, gt: &BoundingBox) -> BoxTransform {
    let (ax, ay) = anchor.center();
    let (gx, gy) = gt.center();
    BoxTransform {
        tx: (gx - ax) / anchor.w,
        ty: (gy - ay) / anchor.h,
        tw: (gt.w / anchor.w).ln(),
        th: (gt.h / anchor.h).ln(),
    }
}

pub fn apply_box_transform(anchor: &BoundingBox, t: &BoxTransform) -> BoundingBox {
    let (ax, ay) = anchor.center();
    let w = anchor.w * t.tw.exp();
    let h = anchor.h * t.th.exp();
    let cx = ax + t.tx * anchor.w;
    let cy = ay + t.ty * anchor.h;
    BoundingBox { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
}
