//! Pixel-space primitives shared by every other module.
//!
//! Image coordinates: origin at the top-left, `y` grows downward. Boxes are
//! closed, so a point on the boundary is inside.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("negative coordinate {0}")]
    Negative(f64),
    #[error("degenerate bbox: x_min {x_min} > x_max {x_max}")]
    InvertedX { x_min: f64, x_max: f64 },
    #[error("degenerate bbox: y_min {y_min} > y_max {y_max}")]
    InvertedY { y_min: f64, y_max: f64 },
}

/// A real-valued pixel position. Sub-pixel predictions are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned word box, serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        for v in [x_min, y_min, x_max, y_max] {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            if v < 0.0 {
                return Err(GeometryError::Negative(v));
            }
        }
        if x_min > x_max {
            return Err(GeometryError::InvertedX { x_min, x_max });
        }
        if y_min > y_max {
            return Err(GeometryError::InvertedY { y_min, y_max });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center_x(&self) -> f64 {
        (self.x_min + self.x_max) / 2.0
    }

    pub fn center_y(&self) -> f64 {
        (self.y_min + self.y_max) / 2.0
    }

    /// Closed-box containment.
    pub fn contains(&self, p: Point) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }

    /// Distance from `p.x` to the box's horizontal interval; zero when inside it.
    pub fn horizontal_distance(&self, p: Point) -> f64 {
        if p.x < self.x_min {
            self.x_min - p.x
        } else if p.x > self.x_max {
            p.x - self.x_max
        } else {
            0.0
        }
    }

    /// Length of the intersection of the two vertical intervals, negative when
    /// they are disjoint.
    pub fn vertical_overlap(&self, other: &BBox) -> f64 {
        self.y_max.min(other.y_max) - self.y_min.max(other.y_min)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Free-function form of [`BBox::contains`].
pub fn contains(bbox: &BBox, p: Point) -> bool {
    bbox.contains(p)
}

/// Free-function form of [`BBox::horizontal_distance`].
pub fn horizontal_distance(bbox: &BBox, p: Point) -> f64 {
    bbox.horizontal_distance(p)
}
