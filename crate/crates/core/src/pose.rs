//! Ground-plane poses: a 3D position with `z = 0` and a yaw-only unit quaternion.

use core::ops::{Add, Sub};

use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Add for Point2 {
    type Output = Point2;

    fn add(self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;

    fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product; positive when `other` lies to the left of `self`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    pub fn unit_from_angle(theta: f64) -> Point2 {
        Point2::new(math::cos(theta), math::sin(theta))
    }

    /// Bearing from `self` towards `other`.
    pub fn bearing_to(self, other: Point2) -> f64 {
        math::atan2(other.y - self.y, other.x - self.x)
    }
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn from_yaw(yaw: f64) -> Self {
        let half = 0.5 * yaw;
        Self {
            w: math::cos(half),
            x: 0.0,
            y: 0.0,
            z: math::sin(half),
        }
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
    }

    /// Rotation about +z, in `(-π, π]`.
    pub fn yaw(&self) -> f64 {
        math::wrap_angle(2.0 * math::atan2(self.z, self.w))
    }

    pub fn is_unit_yaw_only(&self) -> bool {
        math::abs(self.norm() - 1.0) <= 1e-9 && math::abs(self.x) <= 1e-9 && math::abs(self.y) <= 1e-9
    }
}

/// Position in meters (world frame, `z = 0`) plus orientation.
///
/// Yaw 0 faces +x (east); positive yaw turns counter-clockwise, so north is `π/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: [f64; 3],
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            position: [x, y, 0.0],
            orientation: Quaternion::from_yaw(math::wrap_angle(yaw)),
        }
    }

    pub fn xy(&self) -> Point2 {
        Point2::new(self.position[0], self.position[1])
    }

    pub fn yaw(&self) -> f64 {
        self.orientation.yaw()
    }

    pub fn heading(&self) -> Point2 {
        Point2::unit_from_angle(self.yaw())
    }
}
