use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::error::GeometryError;
use crate::Real;

/// Arc segments used when polygonizing curved outlines.
pub const ARC_SEGMENTS: usize = 64;

/// Simple counter-clockwise polygon in the object body frame, centred on the
/// mean of its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape2<T> {
    pub name: String,
    pub vertices: Vec<Vec2<T>>,
    /// Order of the rotational symmetry group (1 = none).
    pub symmetry_order: u32,
    /// Whether goal angle errors are taken modulo the symmetry group.
    pub symmetric_goals: bool,
}

impl<T: Real> Shape2<T> {
    /// Builds a shape from an outline, recentering it on the vertex mean and
    /// reorienting it counter-clockwise.
    pub fn new(name: impl Into<String>, mut vertices: Vec<Vec2<T>>) -> Result<Self, GeometryError> {
        let name = name.into();
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidShape { name, reason: "fewer than 3 vertices".into() });
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidShape { name, reason: "non-finite vertex".into() });
        }
        if signed_area(&vertices) < T::zero() {
            vertices.reverse();
        }
        let n = T::from_usize(vertices.len()).unwrap();
        let mean = vertices.iter().fold(Vec2::zero(), |acc, &v| acc + v) * (T::one() / n);
        for v in &mut vertices {
            *v -= mean;
        }
        let shape = Self { name, vertices, symmetry_order: 1, symmetric_goals: false };
        shape.validate()?;
        Ok(shape)
    }

    pub fn with_symmetry(mut self, order: u32, symmetric_goals: bool) -> Self {
        self.symmetry_order = order.max(1);
        self.symmetric_goals = symmetric_goals;
        self
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1` (cyclic).
    #[inline]
    pub fn edge(&self, i: usize) -> (Vec2<T>, Vec2<T>) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn area(&self) -> T {
        signed_area(&self.vertices)
    }

    /// Largest distance from the body origin to a vertex.
    pub fn radius(&self) -> T {
        self.vertices.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Checks the polygon invariants: >= 3 vertices, counter-clockwise, no
    /// self intersections, vertex mean at the origin.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fail = |reason: &str| {
            Err(GeometryError::InvalidShape { name: self.name.clone(), reason: reason.into() })
        };
        let n = self.vertices.len();
        if n < 3 {
            return fail("fewer than 3 vertices");
        }
        if signed_area(&self.vertices) <= T::zero() {
            return fail("outline is not counter-clockwise");
        }
        let mean = self.vertices.iter().fold(Vec2::zero(), |acc, &v| acc + v)
            * (T::one() / T::from_usize(n).unwrap());
        if mean.norm() > T::lit(1e-9) {
            return fail("vertex mean is not at the body origin");
        }
        for i in 0..n {
            let (a, b) = self.edge(i);
            if (b - a).norm() <= T::zero() {
                return fail("duplicate consecutive vertices");
            }
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = self.edge(j);
                if segments_intersect(a, b, c, d) {
                    return fail("outline self-intersects");
                }
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Shape2<U> {
        Shape2 {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            symmetry_order: self.symmetry_order,
            symmetric_goals: self.symmetric_goals,
        }
    }
}

fn signed_area<T: Real>(v: &[Vec2<T>]) -> T {
    let n = v.len();
    let mut s = T::zero();
    for i in 0..n {
        s += v[i].cross(v[(i + 1) % n]);
    }
    s * T::lit(0.5)
}

fn segments_intersect<T: Real>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>, d: Vec2<T>) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    o1 * o2 < T::zero() && o3 * o4 < T::zero()
}

// ---------------------------------------------------------------------------
// Outline builders

/// Regular polygon with circumradius `r`, one vertex at angle `phase`.
pub fn regular_polygon(sides: usize, r: f64, phase: f64) -> Vec<Vec2<f64>> {
    (0..sides)
        .map(|i| Vec2::from_angle(phase + std::f64::consts::TAU * i as f64 / sides as f64) * r)
        .collect()
}

/// Star with alternating outer radii `outer[i]` and a common inner radius.
pub fn star(outer: &[f64], inner: f64) -> Vec<Vec2<f64>> {
    let n = outer.len();
    let step = std::f64::consts::PI / n as f64;
    let mut out = Vec::with_capacity(2 * n);
    for (i, &r) in outer.iter().enumerate() {
        let a = std::f64::consts::FRAC_PI_2 + 2.0 * step * i as f64;
        out.push(Vec2::from_angle(a) * r);
        out.push(Vec2::from_angle(a + step) * inner);
    }
    out
}

/// Arc from `a0` to `a1` (counter-clockwise) around `center`, `segments`
/// pieces, excluding the final endpoint.
fn arc(center: Vec2<f64>, r: f64, a0: f64, a1: f64, segments: usize) -> Vec<Vec2<f64>> {
    (0..segments)
        .map(|i| center + Vec2::from_angle(a0 + (a1 - a0) * i as f64 / segments as f64) * r)
        .collect()
}

/// Square of side `side` whose +x half is replaced by a half disc.
pub fn cube_cylinder(side: f64) -> Vec<Vec2<f64>> {
    use std::f64::consts::FRAC_PI_2;
    let h = side / 2.0;
    let mut out = arc(Vec2::new(0.0, 0.0), h, -FRAC_PI_2, FRAC_PI_2, ARC_SEGMENTS);
    out.push(Vec2::new(0.0, h));
    out.push(Vec2::new(-h, h));
    out.push(Vec2::new(-h, -h));
    out.push(Vec2::new(0.0, -h));
    // the arc starts at (0, -h); drop the duplicate
    out.pop();
    out
}

/// Outline of the union of three equal discs of radius `r` whose centres sit
/// at distance `c` from the origin, 120 degrees apart.
pub fn three_cylinder(r: f64, c: f64) -> Vec<Vec2<f64>> {
    use std::f64::consts::{FRAC_PI_2, TAU};
    assert!(r > c * 3f64.sqrt() / 2.0, "discs must overlap pairwise");
    let third = TAU / 3.0;
    let mut out = Vec::new();
    for i in 0..3 {
        let phi = FRAC_PI_2 + third * i as f64;
        let center = Vec2::from_angle(phi) * c;
        // outer intersections with the neighbours lie on the bisectors at
        // phi +- 60 degrees, distance t from the origin
        let cos60 = 0.5;
        let t = c * cos60 + (c * c * cos60 * cos60 - c * c + r * r).sqrt();
        let p_prev = Vec2::from_angle(phi - third / 2.0) * t;
        let p_next = Vec2::from_angle(phi + third / 2.0) * t;
        let a0 = (p_prev - center).angle();
        let mut a1 = (p_next - center).angle();
        while a1 <= a0 {
            a1 += TAU;
        }
        out.extend(arc(center, r, a0, a1, ARC_SEGMENTS));
    }
    out
}

// ---------------------------------------------------------------------------
// Catalog file: JSON Lines, one object per line.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub name: String,
    #[serde(default = "one")]
    pub symmetry_order: u32,
    #[serde(default)]
    pub symmetric_goals: bool,
    /// `[x, y]` pairs in meters, counter-clockwise.
    pub vertices: Vec<[f64; 2]>,
}

fn one() -> u32 {
    1
}

impl ShapeRecord {
    pub fn from_shape(shape: &Shape2<f64>) -> Self {
        Self {
            name: shape.name.clone(),
            symmetry_order: shape.symmetry_order,
            symmetric_goals: shape.symmetric_goals,
            vertices: shape.vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
    }

    pub fn to_shape<T: Real>(&self) -> Result<Shape2<T>, GeometryError> {
        let verts = self.vertices.iter().map(|&[x, y]| Vec2::new(T::lit(x), T::lit(y))).collect();
        Ok(Shape2::new(self.name.clone(), verts)?.with_symmetry(self.symmetry_order, self.symmetric_goals))
    }
}

/// Shape catalog shipped with the crate.
pub const BUILTIN_CATALOG: &str = include_str!("../../data/shapes.jsonl");

/// Names of the shipped shapes in catalog order.
pub const SHAPE_NAMES: [&str; 5] = ["cube", "hexagon", "star", "cube_cylinder", "three_cylinder"];

pub fn parse_catalog<T: Real>(text: &str) -> Result<Vec<Shape2<T>>, GeometryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            let rec: ShapeRecord = serde_json::from_str(l)
                .map_err(|e| GeometryError::Catalog(format!("line {}: {e}", i + 1)))?;
            rec.to_shape()
        })
        .collect()
}

pub fn load_catalog<T: Real>(path: &Path) -> Result<Vec<Shape2<T>>, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Catalog(e.to_string()))?;
    parse_catalog(&text)
}

pub fn write_catalog(shapes: &[Shape2<f64>]) -> String {
    let mut out = String::new();
    for s in shapes {
        out.push_str(&serde_json::to_string(&ShapeRecord::from_shape(s)).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Builtin shape by name.
pub fn builtin_shape<T: Real>(name: &str) -> Result<Shape2<T>, GeometryError> {
    parse_catalog::<T>(BUILTIN_CATALOG)?
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| GeometryError::UnknownShape(name.to_string()))
}

/// Regenerates the shipped catalog from the outline builders. Dimensions are
/// cross-sections of roughly 40 mm objects.
pub fn generate_builtin_catalog() -> Vec<Shape2<f64>> {
    let h = 0.02;
    let cube = vec![Vec2::new(h, -h), Vec2::new(h, h), Vec2::new(-h, h), Vec2::new(-h, -h)];
    vec![
        Shape2::new("cube", cube).unwrap().with_symmetry(4, false),
        Shape2::new("hexagon", regular_polygon(6, 0.022, 0.0)).unwrap().with_symmetry(6, false),
        Shape2::new("star", star(&[0.026, 0.024, 0.027, 0.023, 0.025], 0.012)).unwrap(),
        Shape2::new("cube_cylinder", cube_cylinder(0.04)).unwrap(),
        Shape2::new("three_cylinder", three_cylinder(0.012, 0.012)).unwrap().with_symmetry(3, false),
    ]
}
