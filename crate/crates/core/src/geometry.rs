//! Planar primitives: points, oriented rectangles and convex polygon clipping.
//!
//! Orientation convention: a yaw of `θ` faces the direction `(sin θ, cos θ)`,
//! so yaw 0 faces +y. An object's local frame has +y along its facing
//! direction and +x to its right.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_yaw(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_signed(theta: f64) -> f64 {
    let r = wrap_yaw(theta);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A rigid planar pose: translation plus yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub origin: Point2,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(origin: Point2, yaw: f64) -> Self {
        Self { origin, yaw }
    }

    /// Maps a point from the local frame to the world frame.
    pub fn to_world(&self, local: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        Point2::new(
            self.origin.x + local.x * c + local.y * s,
            self.origin.y - local.x * s + local.y * c,
        )
    }

    /// Maps a world point into the local frame.
    pub fn to_local(&self, world: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let d = world - self.origin;
        Point2::new(d.x * c - d.y * s, d.x * s + d.y * c)
    }
}

/// Rotates `p` about `pivot` by a yaw increment (same handedness as object yaw).
pub fn rotate_about(p: Point2, pivot: Point2, delta_yaw: f64) -> Point2 {
    Pose2::new(pivot, delta_yaw).to_world(p - pivot)
}

/// An oriented rectangle given by its center, half extents along the local
/// axes and yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    pub half_w: f64,
    pub half_l: f64,
    pub yaw: f64,
}

impl OrientedRect {
    pub fn new(center: Point2, width: f64, length: f64, yaw: f64) -> Self {
        Self {
            center,
            half_w: width / 2.0,
            half_l: length / 2.0,
            yaw,
        }
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.center, self.yaw)
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point2; 4] {
        let pose = self.pose();
        let (w, l) = (self.half_w, self.half_l);
        [
            pose.to_world(Point2::new(-w, -l)),
            pose.to_world(Point2::new(w, -l)),
            pose.to_world(Point2::new(w, l)),
            pose.to_world(Point2::new(-w, l)),
        ]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_w * self.half_l
    }

    pub fn inflated(&self, margin: f64) -> OrientedRect {
        OrientedRect {
            half_w: self.half_w + margin,
            half_l: self.half_l + margin,
            ..*self
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        let q = self.pose().to_local(p);
        q.x.abs() <= self.half_w && q.y.abs() <= self.half_l
    }

    /// Strict interior test; points on the boundary are outside.
    pub fn contains_strict(&self, p: Point2) -> bool {
        let q = self.pose().to_local(p);
        q.x.abs() < self.half_w && q.y.abs() < self.half_l
    }

    /// Whether the closed segment `a`–`b` passes through the open interior of
    /// the rectangle. Liang–Barsky clipping in the local frame.
    pub fn segment_intersects(&self, a: Point2, b: Point2) -> bool {
        let pose = self.pose();
        let p = pose.to_local(a);
        let q = pose.to_local(b);
        let d = q - p;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (num_lo, num_hi, den) in [
            (p.x + self.half_w, self.half_w - p.x, d.x),
            (p.y + self.half_l, self.half_l - p.y, d.y),
        ] {
            if den == 0.0 {
                if num_lo <= 0.0 || num_hi <= 0.0 {
                    return false;
                }
                continue;
            }
            // -den * t <= num_lo and den * t <= num_hi
            let ta = -num_lo / den;
            let tb = num_hi / den;
            let (enter, exit) = if den > 0.0 { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(enter);
            t1 = t1.min(exit);
            if t0 >= t1 {
                return false;
            }
        }
        t0 < t1
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    acc / 2.0
}

/// Sutherland–Hodgman clipping of `subject` by a convex counter-clockwise
/// `clip` polygon. Returns the intersection polygon (possibly empty).
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let edge = b - a;
        let side = |p: Point2| edge.cross(p - a);
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(prev.lerp(cur, sp / (sp - sc)));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(prev.lerp(cur, sp / (sp - sc)));
            }
        }
    }
    output
}

/// Area of the intersection of two convex counter-clockwise polygons.
pub fn convex_intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    signed_area(&clip_convex(a, b)).max(0.0)
}
