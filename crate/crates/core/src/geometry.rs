//! Axis-aligned boxes, box expansion, IoU and expansion IoU.
//!
//! Boxes are stored in corner form `(x1, y1, x2, y2)` in continuous pixel
//! coordinates. Expanded boxes are never clipped to the image, so expansion
//! always preserves the box center and aspect ratio.

use crate::error::{Error, Result};

/// Smallest expansion scale for which the expanded box is still valid.
pub const MIN_EXPANSION: f64 = -0.5;

/// Axis-aligned bounding box with a detector confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub confidence: f64,
}

impl BBox {
    /// Builds a box from corners, checking that it has non-negative extent
    /// and a confidence in `[0, 1]`.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, confidence: f64) -> Result<Self> {
        let b = BBox {
            x1,
            y1,
            x2,
            y2,
            confidence,
        };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from MOT-style top-left corner plus size.
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64, confidence: f64) -> Result<Self> {
        BBox::new(x, y, x + w, y + h, confidence)
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinate in {self:?}"
            )));
        }
        if self.x2 < self.x1 || self.y2 < self.y1 {
            return Err(Error::InvalidBox(format!("negative extent in {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidBox(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    /// `(x, y, w, h)` with `(x, y)` the top-left corner.
    pub fn to_tlwh(&self) -> [f64; 4] {
        [self.x1, self.y1, self.width(), self.height()]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
            confidence: self.confidence,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> BBox {
        self.confidence = confidence;
        self
    }

    /// Grows the box by `(2E + 1)` times its width and height, split evenly
    /// on both sides. `E = -0.5` leaves the box unchanged.
    pub fn expand(&self, scale: f64) -> Result<BBox> {
        self.validate()?;
        check_scale(scale)?;
        let factor = 2.0 * scale + 1.0;
        let half_w = factor * self.width() * 0.5;
        let half_h = factor * self.height() * 0.5;
        Ok(BBox {
            x1: self.x1 - half_w,
            y1: self.y1 - half_h,
            x2: self.x2 + half_w,
            y2: self.y2 + half_h,
            confidence: self.confidence,
        })
    }
}

/// Rejects expansion scales that would give a negative box extent.
pub fn check_scale(scale: f64) -> Result<()> {
    if !scale.is_finite() || scale < MIN_EXPANSION {
        return Err(Error::Domain(format!(
            "expansion scale {scale} must be finite and >= {MIN_EXPANSION}"
        )));
    }
    Ok(())
}

/// Free-function form of [`BBox::expand`].
pub fn expand(bbox: &BBox, scale: f64) -> Result<BBox> {
    bbox.expand(scale)
}

/// Intersection over union. Disjoint and zero-area pairs score 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of both boxes after expanding each with the same scale.
pub fn eiou(a: &BBox, b: &BBox, scale: f64) -> Result<f64> {
    Ok(iou(&a.expand(scale)?, &b.expand(scale)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2, 1.0).unwrap()
    }

    #[test]
    fn expand_examples() {
        let e = bx(0.0, 0.0, 10.0, 10.0).expand(0.7).unwrap();
        assert_eq!((e.x1, e.y1, e.x2, e.y2), (-12.0, -12.0, 22.0, 22.0));

        let e = bx(2.0, 3.0, 4.0, 7.0).expand(0.5).unwrap();
        assert_eq!((e.x1, e.y1, e.x2, e.y2), (0.0, -1.0, 6.0, 11.0));

        let b = bx(1.5, -2.0, 8.25, 3.0);
        assert_eq!(b.expand(-0.5).unwrap(), b);
    }

    #[test]
    fn expand_rejects_bad_input() {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        assert!(b.expand(-0.51).is_err());
        assert!(b.expand(f64::NAN).is_err());
        let inverted = BBox {
            x1: 5.0,
            y1: 0.0,
            x2: 1.0,
            y2: 1.0,
            confidence: 0.5,
        };
        assert!(inverted.expand(0.7).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 30.0, 30.0)), 0.0);
        // inter 50, union 150
        assert!((iou(&a, &bx(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-12);
        // touching edges do not overlap
        assert_eq!(iou(&a, &bx(10.0, 0.0, 20.0, 10.0)), 0.0);
    }

    #[test]
    fn degenerate_boxes_score_zero() {
        let point = bx(5.0, 5.0, 5.0, 5.0);
        let line = bx(0.0, 5.0, 10.0, 5.0);
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&point, &point), 0.0);
        assert_eq!(iou(&point, &a), 0.0);
        assert_eq!(iou(&line, &a), 0.0);
        assert_eq!(eiou(&point, &point, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn eiou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(15.0, 0.0, 25.0, 10.0);
        // expanded (-12,-12,22,22) and (3,-12,37,22): inter 19*34, union 2*34*34 - inter
        let expected = 646.0 / 1666.0;
        assert!((eiou(&a, &b, 0.7).unwrap() - expected).abs() < 1e-12);
        assert_eq!(eiou(&a, &b, -0.5).unwrap(), iou(&a, &b));
        assert_eq!(eiou(&a, &a, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn tlwh_round_trip() {
        let b = BBox::from_tlwh(10.0, 20.0, 30.0, 40.0, 0.9).unwrap();
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (10.0, 20.0, 40.0, 60.0));
        assert_eq!(b.to_tlwh(), [10.0, 20.0, 30.0, 40.0]);
    }
}
