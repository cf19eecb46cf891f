use serde::{Deserialize, Serialize};

use super::{FingerSegment, Pose2, Shape2, Side, Vec2};
use crate::Real;

/// Features closer than this (m) along the finger normal are merged.
pub const MERGE_TOL: f64 = 1e-5;
/// An object edge within this angle of the finger counts as a face contact.
pub const FACE_ALIGN_DEG: f64 = 0.5;

/// Part of the object boundary touching a finger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObjectFeature<T> {
    Vertex(usize),
    /// Point `t` in `[0, 1]` along edge `index`.
    Edge { index: usize, t: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactFeature<T> {
    pub finger: Side,
    /// Arc length along the finger surface from its base.
    pub s: T,
    pub object_feature: ObjectFeature<T>,
}

impl<T: Real> ContactFeature<T> {
    /// Contact point in the object body frame.
    pub fn body_point(&self, shape: &Shape2<T>) -> Vec2<T> {
        match self.object_feature {
            ObjectFeature::Vertex(i) => shape.vertices[i],
            ObjectFeature::Edge { index, t } => {
                let (a, b) = shape.edge(index);
                a.lerp(b, t)
            }
        }
    }

    pub fn is_edge(&self) -> bool {
        matches!(self.object_feature, ObjectFeature::Edge { .. })
    }
}

/// Signed clearance between a finger surface and a posed polygon.
///
/// Positive values are the Euclidean separation. When the part of the
/// polygon inside the finger's slab (`0 <= s <= length`) reaches the finger
/// line or crosses to its outer side, the result is minus the depth of the
/// deepest such point along the inner normal.
pub fn signed_clearance<T: Real>(seg: &FingerSegment<T>, shape: &Shape2<T>, pose: &Pose2<T>) -> T {
    let (sn, cs) = pose.theta.sin_cos();
    let off = pose.position() - seg.start;
    // body -> finger-local (a, n) is affine; fold the pose into it
    let ax = Vec2::new(seg.dir.x * cs + seg.dir.y * sn, -seg.dir.x * sn + seg.dir.y * cs);
    let nx = Vec2::new(seg.normal.x * cs + seg.normal.y * sn, -seg.normal.x * sn + seg.normal.y * cs);
    let a0 = off.dot(seg.dir);
    let n0 = off.dot(seg.normal);
    let len = seg.length;

    let verts = &shape.vertices;
    let last = verts[verts.len() - 1];
    let mut pa = a0 + ax.dot(last);
    let mut pn = n0 + nx.dot(last);
    let mut min_n = T::infinity();
    for &v in verts {
        let a = a0 + ax.dot(v);
        let n = n0 + nx.dot(v);
        if a >= T::zero() && a <= len && n < min_n {
            min_n = n;
        }
        for bound in [T::zero(), len] {
            if (pa - bound) * (a - bound) < T::zero() {
                let t = (bound - pa) / (a - pa);
                let cn = pn + (n - pn) * t;
                if cn < min_n {
                    min_n = cn;
                }
            }
        }
        pa = a;
        pn = n;
    }
    if min_n <= T::zero() {
        return min_n;
    }
    euclidean_distance(seg, shape, pose)
}

fn point_segment_distance<T: Real>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    let ab = b - a;
    let l2 = ab.norm_sq();
    let t = if l2 > T::zero() { ((p - a).dot(ab) / l2).max(T::zero()).min(T::one()) } else { T::zero() };
    (p - (a + ab * t)).norm()
}

/// Separation between the finger segment and the polygon boundary, assuming
/// they do not intersect.
fn euclidean_distance<T: Real>(seg: &FingerSegment<T>, shape: &Shape2<T>, pose: &Pose2<T>) -> T {
    let s0 = seg.start;
    let s1 = seg.end();
    let n = shape.len();
    let world: Vec<Vec2<T>> = shape.vertices.iter().map(|&v| pose.transform(v)).collect();
    let mut best = T::infinity();
    for i in 0..n {
        let a = world[i];
        let b = world[(i + 1) % n];
        best = best
            .min(point_segment_distance(a, s0, s1))
            .min(point_segment_distance(s0, a, b))
            .min(point_segment_distance(s1, a, b));
    }
    best
}

/// Result of a full contact query.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactQuery<T> {
    pub clearance: T,
    pub feature: ContactFeature<T>,
    /// World position of the deepest point.
    pub point: Vec2<T>,
    /// Body-frame points that may act as sticking pivots, with their arc
    /// lengths along the finger.
    pub pivots: Vec<(Vec2<T>, T)>,
}

/// Locates the deepest point of the object within the finger slab and
/// classifies it. Returns `None` when no part of the object lies within the
/// finger's extent.
pub fn detect_contact<T: Real>(seg: &FingerSegment<T>, shape: &Shape2<T>, pose: &Pose2<T>) -> Option<ContactQuery<T>> {
    let n = shape.len();
    let len = seg.length;
    let local: Vec<(T, T)> = shape.vertices.iter().map(|&v| seg.local(pose.transform(v))).collect();

    // deepest point: (normal depth, arc length, feature)
    let mut best: Option<(T, T, ObjectFeature<T>)> = None;
    let mut consider = |cand: (T, T, ObjectFeature<T>)| match best {
        Some((bn, _, _)) if bn <= cand.0 => {}
        _ => best = Some(cand),
    };
    for i in 0..n {
        let (a, nn) = local[i];
        if a >= T::zero() && a <= len {
            consider((nn, a, ObjectFeature::Vertex(i)));
        }
        let (pa, pn) = local[i];
        let (qa, qn) = local[(i + 1) % n];
        for bound in [T::zero(), len] {
            if (pa - bound) * (qa - bound) < T::zero() {
                let t = (bound - pa) / (qa - pa);
                consider((pn + (qn - pn) * t, bound, ObjectFeature::Edge { index: i, t }));
            }
        }
    }
    let (min_n, s, mut feature) = best?;

    let clearance = if min_n <= T::zero() { min_n } else { euclidean_distance(seg, shape, pose) };

    let merge = T::lit(MERGE_TOL);
    let align = T::lit(FACE_ALIGN_DEG.to_radians().sin());
    if let ObjectFeature::Vertex(i) = feature {
        // face contact if an adjacent edge lies along the finger
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        let mut best_edge: Option<(T, ObjectFeature<T>)> = None;
        for (other, edge, t) in [(prev, prev, T::one()), (next, i, T::zero())] {
            let e = pose.transform(shape.vertices[other]) - pose.transform(shape.vertices[i]);
            let sin = (e.cross(seg.dir) / e.norm()).abs();
            let close = local[other].1 - min_n < merge;
            if sin < align || close {
                if best_edge.is_none_or(|(bs, _)| sin < bs) {
                    best_edge = Some((sin, ObjectFeature::Edge { index: edge, t }));
                }
            }
        }
        if let Some((_, f)) = best_edge {
            feature = f;
        }
    }

    let contact = ContactFeature { finger: seg.side, s, object_feature: feature };
    let body = contact.body_point(shape);
    let mut pivots = vec![(body, s)];
    for i in 0..n {
        let (a, nn) = local[i];
        if a >= T::zero() && a <= len && nn - min_n < merge && (shape.vertices[i] - body).norm() > merge {
            pivots.push((shape.vertices[i], a));
        }
    }
    Some(ContactQuery { clearance, feature: contact, point: pose.transform(body), pivots })
}
