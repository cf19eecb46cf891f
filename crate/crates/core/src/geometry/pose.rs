use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::Real;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::TAU();
    let mut r = a % two_pi;
    if r <= -T::PI() {
        r += two_pi;
    } else if r > T::PI() {
        r -= two_pi;
    }
    r
}

/// Planar rigid pose. `theta` is kept in `(-pi, pi]` by every constructor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_parts(position: Vec2<T>, theta: T) -> Self {
        Self::new(position.x, position.y, theta)
    }

    #[inline]
    pub fn position(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    /// Maps a body-frame point into the world frame.
    #[inline]
    pub fn transform(&self, p: Vec2<T>) -> Vec2<T> {
        p.rotate(self.theta) + self.position()
    }

    /// Maps a world point into the body frame.
    #[inline]
    pub fn inverse_transform(&self, p: Vec2<T>) -> Vec2<T> {
        (p - self.position()).rotate(-self.theta)
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let p = self.transform(other.position());
        Self::new(p.x, p.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Self {
        let p = (-self.position()).rotate(-self.theta);
        Self::new(p.x, p.y, -self.theta)
    }

    /// Euclidean distance between the two origins.
    pub fn distance(&self, other: &Self) -> T {
        (self.position() - other.position()).norm()
    }

    /// `|wrap(other.theta - self.theta)|`.
    pub fn angle_error(&self, other: &Self) -> T {
        wrap_angle(other.theta - self.theta).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn cast<U: Real>(&self) -> Pose2<U> {
        Pose2 {
            x: U::lit(self.x.to_f64().unwrap()),
            y: U::lit(self.y.to_f64().unwrap()),
            theta: U::lit(self.theta.to_f64().unwrap()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_keeps_pi_and_maps_minus_pi_to_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose2::new(0.3f64, -0.2, 2.5);
        let id = p.compose(&p.inverse());
        assert!(id.x.abs() < 1e-15 && id.y.abs() < 1e-15 && id.theta.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wrapped_angle_in_half_open_interval(a in -1e3f64..1e3) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((a - w) / (2.0 * PI) - ((a - w) / (2.0 * PI)).round()).abs() < 1e-9);
        }

        #[test]
        fn transform_roundtrip(x in -1.0f64..1.0, y in -1.0f64..1.0, t in -10.0f64..10.0,
                               px in -1.0f64..1.0, py in -1.0f64..1.0) {
            let pose = Pose2::new(x, y, t);
            prop_assert!(pose.theta > -PI && pose.theta <= PI);
            let p = Vec2::new(px, py);
            let back = pose.inverse_transform(pose.transform(p));
            prop_assert!((back - p).norm() < 1e-12);
        }
    }
}
