//! Small planar geometry helpers shared by the lattice and mesh code.

use serde::{Deserialize, Serialize};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Coordinate axis of a planar displacement component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect {
            min: Vec2::new(x0.min(x1), y0.min(y1)),
            max: Vec2::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn is_degenerate(&self, tol: f64) -> bool {
        self.width() <= tol || self.height() <= tol
    }

    /// Closed containment with tolerance `tol`.
    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    /// Strict containment: the point is inside the open rectangle by more than `tol`.
    pub fn contains_strictly(&self, p: &Vec2, tol: f64) -> bool {
        p.x > self.min.x + tol
            && p.x < self.max.x - tol
            && p.y > self.min.y + tol
            && p.y < self.max.y - tol
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    /// Whether the open segment `a`–`b` passes through the open interior of the
    /// rectangle shrunk by `tol` (Liang–Barsky clipping).
    pub fn segment_crosses_interior(&self, a: &Vec2, b: &Vec2, tol: f64) -> bool {
        let lo = self.min + Vec2::new(tol, tol);
        let hi = self.max - Vec2::new(tol, tol);
        if lo.x >= hi.x || lo.y >= hi.y {
            return false;
        }
        let d = b - a;
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        let checks = [
            (-d.x, a.x - lo.x),
            (d.x, hi.x - a.x),
            (-d.y, a.y - lo.y),
            (d.y, hi.y - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q <= 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        t0 < t1
    }
}
