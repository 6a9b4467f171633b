//! Oriented rectangles in the road plane and their overlap test.
//!
//! Cars are modelled as rectangles centered on their reference point and
//! aligned with their heading. Overlap is the separating-axis test, which is
//! exact for a pair of convex boxes.

use crate::math;

/// Oriented bounding rectangle: center, unit heading axis, half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub cx: f64,
    pub cy: f64,
    /// cos(heading)
    pub ux: f64,
    /// sin(heading)
    pub uy: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

impl Obb {
    pub fn new(cx: f64, cy: f64, heading: f64, length: f64, width: f64) -> Self {
        Obb {
            cx,
            cy,
            ux: math::cos(heading),
            uy: math::sin(heading),
            half_len: 0.5 * length,
            half_wid: 0.5 * width,
        }
    }

    /// Radius of the circumscribed circle.
    pub fn radius(&self) -> f64 {
        math::hypot(self.half_len, self.half_wid)
    }

    /// Projection radius of the box onto a unit axis.
    fn project(&self, ax: f64, ay: f64) -> f64 {
        self.half_len * math::abs(ax * self.ux + ay * self.uy)
            + self.half_wid * math::abs(ax * (-self.uy) + ay * self.ux)
    }
}

/// Separating-axis overlap test for two oriented rectangles.
///
/// Touching boundaries count as overlap; collision detection downstream
/// treats grazing contact as a collision.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let dx = b.cx - a.cx;
    let dy = b.cy - a.cy;
    // Cheap circle reject before the four axis projections.
    let r = a.radius() + b.radius();
    if dx * dx + dy * dy > r * r {
        return false;
    }
    let axes = [
        (a.ux, a.uy),
        (-a.uy, a.ux),
        (b.ux, b.uy),
        (-b.uy, b.ux),
    ];
    for (ax, ay) in axes {
        let dist = math::abs(dx * ax + dy * ay);
        if dist > a.project(ax, ay) + b.project(ax, ay) {
            return false;
        }
    }
    true
}
