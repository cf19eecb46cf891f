use serde::{Deserialize, Serialize};

use super::{Pose2, Vec2};
use crate::error::GeometryError;
use crate::Real;

/// Finger identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    #[inline]
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Finger pad surface state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrictionMode {
    High,
    Low,
}

/// Geometry of the two-finger hand.
///
/// Frame: the palm lies on the x axis, +y points from the palm towards the
/// fingertips. At `q = 0` both fingers point along +y. Positive `q` rotates a
/// finger inward (towards the other finger): the left finger turns clockwise
/// about `base_left`, the right finger counter-clockwise about `base_right`.
/// Decreasing `q` opens the hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandParams<T> {
    pub base_left: Vec2<T>,
    pub base_right: Vec2<T>,
    pub finger_length: T,
    pub joint_low: T,
    pub joint_high: T,
    /// Pad thickness: the contact surface sits this far from the joint axis
    /// along the inner normal.
    pub default_push_clearance: T,
    /// Legal box for the object centroid.
    pub workspace_min: Vec2<T>,
    pub workspace_max: Vec2<T>,
    /// Largest finger increment per simulation substep.
    pub max_substep: T,
    /// Relative rotation of a sliding object about its sticking contact per
    /// radian of carrying-finger rotation (zero in the nominal simulator).
    pub slide_drift: T,
}

impl<T: Real> Default for HandParams<T> {
    fn default() -> Self {
        let deg = T::PI() / T::lit(180.0);
        Self {
            base_left: Vec2::new(T::lit(-0.05), T::zero()),
            base_right: Vec2::new(T::lit(0.05), T::zero()),
            finger_length: T::lit(0.12),
            joint_low: T::lit(-30.0) * deg,
            joint_high: T::lit(120.0) * deg,
            default_push_clearance: T::zero(),
            workspace_min: Vec2::new(T::lit(-0.05), T::lit(0.01)),
            workspace_max: Vec2::new(T::lit(0.05), T::lit(0.12)),
            max_substep: T::lit(0.5) * deg,
            slide_drift: T::zero(),
        }
    }
}

impl<T: Real> HandParams<T> {
    pub fn palm_width(&self) -> T {
        (self.base_right - self.base_left).norm()
    }

    pub fn base(&self, side: Side) -> Vec2<T> {
        match side {
            Side::Left => self.base_left,
            Side::Right => self.base_right,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |what: &str| Err(GeometryError::InvalidParams(what.into()));
        if !(self.palm_width() > T::zero()) {
            return bad("palm width must be positive");
        }
        if !(self.joint_low < self.joint_high) {
            return bad("joint_low must be below joint_high");
        }
        if !(self.finger_length > T::zero()) {
            return bad("finger length must be positive");
        }
        if !(self.max_substep > T::zero()) {
            return bad("max_substep must be positive");
        }
        if !(self.workspace_min.x < self.workspace_max.x && self.workspace_min.y < self.workspace_max.y) {
            return bad("empty workspace");
        }
        Ok(())
    }

    pub fn within_limits(&self, q: T) -> bool {
        q >= self.joint_low && q <= self.joint_high
    }

    /// Unit vector along the finger from its base.
    #[inline]
    pub fn finger_dir(side: Side, q: T) -> Vec2<T> {
        let (s, c) = q.sin_cos();
        match side {
            Side::Left => Vec2::new(s, c),
            Side::Right => Vec2::new(-s, c),
        }
    }

    /// Unit normal of the finger's inner (object-facing) surface.
    #[inline]
    pub fn inner_normal(side: Side, q: T) -> Vec2<T> {
        let (s, c) = q.sin_cos();
        match side {
            Side::Left => Vec2::new(c, -s),
            Side::Right => Vec2::new(-c, -s),
        }
    }

    /// Rigid frame attached to the finger: origin at the joint, x axis along
    /// the finger.
    pub fn finger_frame(&self, side: Side, q: T) -> Pose2<T> {
        let b = self.base(side);
        Pose2::new(b.x, b.y, Self::finger_dir(side, q).angle())
    }

    /// Inner surface of a finger without the joint-limit check.
    pub fn segment_unchecked(&self, side: Side, q: T) -> FingerSegment<T> {
        let dir = Self::finger_dir(side, q);
        let normal = Self::inner_normal(side, q);
        FingerSegment {
            side,
            start: self.base(side) + normal * self.default_push_clearance,
            dir,
            normal,
            length: self.finger_length,
        }
    }

    /// Point at arc length `s` along the finger surface.
    pub fn surface_point(&self, side: Side, q: T, s: T) -> Vec2<T> {
        self.segment_unchecked(side, q).point_at(s)
    }
}

/// Inner contact surface of one finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerSegment<T> {
    pub side: Side,
    pub start: Vec2<T>,
    pub dir: Vec2<T>,
    pub normal: Vec2<T>,
    pub length: T,
}

impl<T: Real> FingerSegment<T> {
    pub fn end(&self) -> Vec2<T> {
        self.start + self.dir * self.length
    }

    #[inline]
    pub fn point_at(&self, s: T) -> Vec2<T> {
        self.start + self.dir * s
    }

    /// (arc length, signed distance along the inner normal) of a world point.
    #[inline]
    pub fn local(&self, p: Vec2<T>) -> (T, T) {
        let d = p - self.start;
        (d.dot(self.dir), d.dot(self.normal))
    }
}

/// Inner surface segment of a finger at joint angle `q`.
pub fn finger_segment<T: Real>(params: &HandParams<T>, q: T, side: Side) -> Result<FingerSegment<T>, GeometryError> {
    if !params.within_limits(q) {
        return Err(GeometryError::JointLimit { side, q: q.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(params.segment_unchecked(side, q))
}
