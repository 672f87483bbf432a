//! Axis-aligned bounding boxes in frame pixel coordinates.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box stored as (center-x, center-y, width, height) in
/// continuous frame pixels. This is the tracker's per-frame prediction unit
/// and the ground-truth annotation unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cx.is_finite() && self.cy.is_finite() && self.w.is_finite() && self.h.is_finite())
        {
            return Err(Error::NonFinite("bounding box".into()));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::Invalid(format!(
                "bounding box must have positive dims, got {}x{}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    /// (left, top, right, bottom) corner coordinates.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection area with `other`, zero when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        let iw = ax1.min(bx1) - ax0.max(bx0);
        let ih = ay1.min(by1) - ay0.max(by0);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// True if the box lies entirely inside a `width` x `height` frame.
    pub fn inside_frame(&self, width: usize, height: usize) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        x0 >= 0.0 && y0 >= 0.0 && x1 <= width as f64 && y1 <= height as f64
    }

    /// Same center, dims scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> BoundingBox {
        BoundingBox {
            cx: self.cx,
            cy: self.cy,
            w: self.w * factor,
            h: self.h * factor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_dims() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 5.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 5.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 5.0, 5.0).is_err());
    }

    #[test]
    fn intersection_of_disjoint_is_zero() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let b = BoundingBox::new(100.0, 100.0, 10.0, 10.0).unwrap();
        assert_eq!(a.intersection_area(&b), 0.0);
    }

    #[test]
    fn corners_round_trip() {
        let b = BoundingBox::new(5.0, 7.0, 4.0, 6.0).unwrap();
        assert_eq!(b.corners(), (3.0, 4.0, 7.0, 10.0));
        assert_eq!(b.area(), 24.0);
    }
}
