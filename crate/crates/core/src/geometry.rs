//! Labeled triangles, angle coordinates on the moduli simplex, the
//! straight-line deformation path and per-edge frames.
//!
//! Edge `i` runs from vertex `i` to vertex `(i + 1) % 3`. Vertex and edge
//! indices are zero-based in the API; serialized outputs use labels 1..3.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Tolerance (radians) for the right-angle, isosceles and equilateral tests.
pub const ANGLE_CLASS_TOL: f64 = 1e-10;

const DEGENERACY_TOL: f64 = 1e-12;

/// A planar triangle with labeled vertices `(v1, v2, v3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTriangle {
    v: [Vec2; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Acute,
    Right,
    Obtuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeClass {
    pub kind: ShapeKind,
    pub is_isosceles: bool,
    pub is_equilateral: bool,
    /// Zero-based label of the obtuse vertex.
    pub obtuse_vertex: Option<usize>,
}

/// Unit tangent and outward normal of one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFrame {
    pub edge: usize,
    /// `tangent` rotated by +π/2 points into the triangle.
    pub tangent: Vec2,
    pub normal: Vec2,
    /// Arc-length origin; `start + length * tangent` is the other end.
    pub start: Vec2,
    pub length: f64,
}

impl EdgeFrame {
    pub fn point_at(&self, s: f64) -> Vec2 {
        self.start + self.tangent * s
    }

    /// Arc-length coordinate of the projection of `p` onto the edge line.
    pub fn arc_length_of(&self, p: &Vec2) -> f64 {
        (p - self.start).dot(&self.tangent)
    }

    /// Signed distance of `p` from the edge line, positive outside.
    pub fn offset_of(&self, p: &Vec2) -> f64 {
        (p - self.start).dot(&self.normal)
    }

    /// Vertex labels at the two ends, in arc-length order.
    pub fn end_vertices(&self, orientation: i8) -> (usize, usize) {
        let a = self.edge;
        let b = (self.edge + 1) % 3;
        if orientation > 0 {
            (a, b)
        } else {
            (b, a)
        }
    }
}

impl LabeledTriangle {
    pub fn new(v1: Vec2, v2: Vec2, v3: Vec2) -> Result<Self> {
        let t = LabeledTriangle { v: [v1, v2, v3] };
        t.validate()?;
        Ok(t)
    }

    pub fn from_coords(coords: [[f64; 2]; 3]) -> Result<Self> {
        Self::new(
            Vec2::new(coords[0][0], coords[0][1]),
            Vec2::new(coords[1][0], coords[1][1]),
            Vec2::new(coords[2][0], coords[2][1]),
        )
    }

    /// The right isosceles triangle `(0, 1, i)`.
    pub fn right_isosceles() -> Self {
        LabeledTriangle {
            v: [Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
        }
    }

    /// Equilateral triangle with unit side, `v1 = 0`, `v2 = 1`.
    pub fn equilateral() -> Self {
        LabeledTriangle {
            v: [
                Vec2::zeros(),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.5, 0.5 * 3f64.sqrt()),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.v.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateTriangle("non-finite vertex".into()));
        }
        let area2 = self.signed_area2().abs();
        let d = self.diameter();
        if !(area2 > DEGENERACY_TOL * d * d) || d == 0.0 {
            return Err(Error::DegenerateTriangle(format!(
                "twice-area {area2:e} vs diameter {d:e}"
            )));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec2; 3] {
        &self.v
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.v[i]
    }

    pub fn coords(&self) -> [[f64; 2]; 3] {
        [
            [self.v[0].x, self.v[0].y],
            [self.v[1].x, self.v[1].y],
            [self.v[2].x, self.v[2].y],
        ]
    }

    pub fn signed_area2(&self) -> f64 {
        let a = self.v[1] - self.v[0];
        let b = self.v[2] - self.v[0];
        a.x * b.y - a.y * b.x
    }

    pub fn area(&self) -> f64 {
        0.5 * self.signed_area2().abs()
    }

    /// +1 when `(v1, v2, v3)` is counterclockwise.
    pub fn orientation(&self) -> i8 {
        if self.signed_area2() > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn diameter(&self) -> f64 {
        (0..3).map(|i| self.edge_length(i)).fold(0.0_f64, f64::max)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        (self.v[(e + 1) % 3] - self.v[e]).norm()
    }

    pub fn centroid(&self) -> Vec2 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    /// Interior angles `(β1, β2, β3)` in radians.
    pub fn angles(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, b) in out.iter_mut().enumerate() {
            let p = self.v[(i + 1) % 3] - self.v[i];
            let q = self.v[(i + 2) % 3] - self.v[i];
            let cross = (p.x * q.y - p.y * q.x).abs();
            *b = cross.atan2(p.dot(&q));
        }
        out
    }

    pub fn classify(&self) -> ShapeClass {
        let b = self.angles();
        let (imax, bmax) =
            b.iter().copied().enumerate().fold(
                (0, f64::MIN),
                |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
            );
        let kind = if (bmax - FRAC_PI_2).abs() <= ANGLE_CLASS_TOL {
            ShapeKind::Right
        } else if bmax > FRAC_PI_2 {
            ShapeKind::Obtuse
        } else {
            ShapeKind::Acute
        };
        let close = |x: f64, y: f64| (x - y).abs() <= ANGLE_CLASS_TOL;
        let is_isosceles = close(b[0], b[1]) || close(b[1], b[2]) || close(b[0], b[2]);
        let is_equilateral = b.iter().all(|&x| close(x, FRAC_PI_3));
        ShapeClass {
            kind,
            is_isosceles: is_isosceles || is_equilateral,
            is_equilateral,
            obtuse_vertex: (kind == ShapeKind::Obtuse).then_some(imax),
        }
    }

    pub fn edge_frame(&self, e: usize) -> Result<EdgeFrame> {
        if e > 2 {
            return Err(Error::InvalidInput(format!("edge index {e} out of range")));
        }
        let a = self.v[e];
        let b = self.v[(e + 1) % 3];
        let length = (b - a).norm();
        let (start, tangent) = if self.orientation() > 0 {
            (a, (b - a) / length)
        } else {
            (b, (a - b) / length)
        };
        Ok(EdgeFrame {
            edge: e,
            tangent,
            normal: Vec2::new(tangent.y, -tangent.x),
            start,
            length,
        })
    }

    /// Edges incident to vertex `i`.
    pub fn edges_at_vertex(i: usize) -> [usize; 2] {
        [i, (i + 2) % 3]
    }

    pub fn barycentric(&self, p: &Vec2) -> [f64; 3] {
        let d = self.signed_area2();
        let cross = |a: Vec2, b: Vec2, c: &Vec2| {
            let u = b - a;
            let w = c - a;
            u.x * w.y - u.y * w.x
        };
        let l0 = cross(self.v[1], self.v[2], p) / d;
        let l1 = cross(self.v[2], self.v[0], p) / d;
        [l0, l1, 1.0 - l0 - l1]
    }

    pub fn from_barycentric(&self, l: [f64; 3]) -> Vec2 {
        self.v[0] * l[0] + self.v[1] * l[1] + self.v[2] * l[2]
    }

    /// Smallest barycentric coordinate scaled to a length; negative outside.
    pub fn inset_distance(&self, p: &Vec2) -> f64 {
        (0..3)
            .map(|e| {
                let f = self.edge_frame(e).expect("edge index in range");
                -f.offset_of(p)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &Vec2, margin: f64) -> bool {
        self.inset_distance(p) >= -margin
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.v[0] * s, self.v[1] * s, self.v[2] * s)
    }

    /// Rigid motion `p ↦ R(angle) p + shift`.
    pub fn moved(&self, angle: f64, shift: Vec2) -> Result<Self> {
        let r = Matrix2::new(angle.cos(), -angle.sin(), angle.sin(), angle.cos());
        Self::new(
            r * self.v[0] + shift,
            r * self.v[1] + shift,
            r * self.v[2] + shift,
        )
    }

    /// Same triangle with labels permuted: new vertex `i` is old `perm[i]`.
    pub fn relabeled(&self, perm: [usize; 3]) -> Result<Self> {
        Self::new(self.v[perm[0]], self.v[perm[1]], self.v[perm[2]])
    }

    /// `(1 − t)(v1, v2, v3) + t (0, 1, i)`.
    pub fn straight_line_path(&self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "path parameter {t} outside [0, 1]"
            )));
        }
        let target = Self::right_isosceles();
        let v = |i: usize| self.v[i] * (1.0 - t) + target.v[i] * t;
        Self::new(v(0), v(1), v(2)).map_err(|e| {
            Error::DegenerateTriangle(format!("straight-line path degenerates at t = {t}: {e}"))
        })
    }

    /// The affine map sending `(0, 1, i)` to this triangle's vertices.
    pub fn affine_from_reference(&self, p: &Vec2) -> Vec2 {
        self.v[0] + (self.v[1] - self.v[0]) * p.x + (self.v[2] - self.v[0]) * p.y
    }

    /// Normalized placement `v1 = 0`, `v2 = 1`, `v3` in the upper half-plane
    /// with angles `β1` at `v1` and `β2` at `v2`.
    pub fn from_angles(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 > 0.0 && beta2 > 0.0 && beta1 + beta2 < PI) {
            return Err(Error::InvalidInput(format!(
                "angles ({beta1}, {beta2}) outside the open simplex"
            )));
        }
        let side13 = beta2.sin() / (beta1 + beta2).sin();
        let v3 = Vec2::new(beta1.cos(), beta1.sin()) * side13;
        Self::new(Vec2::zeros(), Vec2::new(1.0, 0.0), v3)
    }

    /// Isosceles triangle with apex angle `apex` at `v3` over the base `[0, 1]`.
    pub fn isosceles_with_apex(apex: f64) -> Result<Self> {
        let base = 0.5 * (PI - apex);
        Self::from_angles(base, base)
    }
}

/// Serialized triangle record `{"v": [[x1, y1], [x2, y2], [x3, y3]]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TriangleRecord {
    pub v: [[f64; 2]; 3],
}

impl From<&LabeledTriangle> for TriangleRecord {
    fn from(t: &LabeledTriangle) -> Self {
        TriangleRecord { v: t.coords() }
    }
}

impl TryFrom<&TriangleRecord> for LabeledTriangle {
    type Error = Error;
    fn try_from(r: &TriangleRecord) -> Result<Self> {
        LabeledTriangle::from_coords(r.v)
    }
}

impl Serialize for LabeledTriangle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TriangleRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledTriangle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TriangleRecord::deserialize(d)?;
        LabeledTriangle::try_from(&r).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn tri(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> LabeledTriangle {
        LabeledTriangle::new(
            Vec2::new(a.0, a.1),
            Vec2::new(b.0, b.1),
            Vec2::new(c.0, c.1),
        )
        .unwrap()
    }

    #[test]
    fn right_isosceles_angles() {
        let b = LabeledTriangle::right_isosceles().angles();
        assert_abs_diff_eq!(b[0], FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn equilateral_angles() {
        for b in LabeledTriangle::equilateral().angles() {
            assert_abs_diff_eq!(b, FRAC_PI_3, epsilon = 1e-15);
        }
    }

    #[test]
    fn obtuse_angles_match_law_of_cosines() {
        let t = tri((0.0, 0.0), (1.0, 0.0), (0.2, 0.1));
        let b = t.angles();
        assert_abs_diff_eq!(b.iter().sum::<f64>(), PI, epsilon = 1e-12);
        assert!(b[2] > FRAC_PI_2);
        let (a, bb, c) = (t.edge_length(1), t.edge_length(2), t.edge_length(0));
        // angle at v3 is opposite edge 0
        let cos3 = (a * a + bb * bb - c * c) / (2.0 * a * bb);
        assert_abs_diff_eq!(b[2], cos3.acos(), epsilon = 1e-12);
    }

    #[test]
    fn classification_examples() {
        let r = LabeledTriangle::right_isosceles().classify();
        assert_eq!(r.kind, ShapeKind::Right);
        assert!(r.is_isosceles && !r.is_equilateral);
        let e = LabeledTriangle::equilateral().classify();
        assert_eq!(e.kind, ShapeKind::Acute);
        assert!(e.is_equilateral && e.is_isosceles);
        let o = tri((0.0, 0.0), (1.0, 0.0), (0.2, 0.1)).classify();
        assert_eq!(o.kind, ShapeKind::Obtuse);
        assert_eq!(o.obtuse_vertex, Some(2));
        assert!(!o.is_isosceles);
    }

    #[test]
    fn degenerate_rejected() {
        let r = LabeledTriangle::new(Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0));
        assert!(matches!(r, Err(Error::DegenerateTriangle(_))));
        assert!(
            LabeledTriangle::new(Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(0.5, f64::NAN))
                .is_err()
        );
    }

    #[test]
    fn path_endpoints_and_midpoint() {
        let t0 = tri((0.0, 0.0), (2.0, 0.0), (0.0, 2.0));
        assert_eq!(t0.straight_line_path(0.0).unwrap(), t0);
        assert_eq!(
            t0.straight_line_path(1.0).unwrap(),
            LabeledTriangle::right_isosceles()
        );
        let mid = t0.straight_line_path(0.5).unwrap();
        assert_abs_diff_eq!(mid.vertex(1).x, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mid.vertex(2).x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mid.vertex(2).y, 1.5, epsilon = 1e-15);
        assert!(t0.straight_line_path(1.5).is_err());
    }

    #[test]
    fn path_midpoint_spec_example() {
        // T0 = (0, 2, 2i) at t = 0.5 gives (0, 1.5, 1.5i)
        let t0 = tri((0.0, 0.0), (2.0, 0.0), (0.0, 2.0));
        let m = t0.straight_line_path(0.5).unwrap();
        assert_eq!(m.coords(), [[0.0, 0.0], [1.5, 0.0], [0.0, 1.5]]);
    }

    #[test]
    fn path_degeneracy_detected() {
        // mirror image of the target collapses at t = 1/2
        let t0 = tri((0.0, 0.0), (0.0, 1.0), (1.0, 0.0));
        assert!(matches!(
            t0.straight_line_path(0.5),
            Err(Error::DegenerateTriangle(_))
        ));
    }

    #[test]
    fn from_angles_examples() {
        let t = LabeledTriangle::from_angles(FRAC_PI_2, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(t.vertex(2).x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.vertex(2).y, 1.0, epsilon = 1e-15);
        let e = LabeledTriangle::from_angles(FRAC_PI_3, FRAC_PI_3).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(e.edge_length(i), 1.0, epsilon = 1e-15);
        }
        let q = LabeledTriangle::from_angles(FRAC_PI_4, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(q.vertex(2).x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.vertex(2).y, 0.5, epsilon = 1e-15);
        assert!(LabeledTriangle::from_angles(2.0, 2.0).is_err());
        assert!(LabeledTriangle::from_angles(-0.1, 1.0).is_err());
    }

    #[test]
    fn edge_frames_of_right_isosceles() {
        let t = LabeledTriangle::right_isosceles();
        let f0 = t.edge_frame(0).unwrap();
        assert_abs_diff_eq!(f0.tangent, Vec2::new(1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(f0.normal, Vec2::new(0.0, -1.0), epsilon = 1e-15);
        let f1 = t.edge_frame(1).unwrap();
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(f1.normal, Vec2::new(s, s), epsilon = 1e-15);
        assert!(t.edge_frame(3).is_err());
    }

    #[test]
    fn reversed_orientation_frames_flip() {
        let t = LabeledTriangle::right_isosceles();
        let r = t.relabeled([0, 2, 1]).unwrap();
        assert_eq!(r.orientation(), -1);
        // edge 2 of r joins v3=(1,0) and v1=0: the same side as edge 0 of t
        let f = r.edge_frame(2).unwrap();
        assert_abs_diff_eq!(f.normal, Vec2::new(0.0, -1.0), epsilon = 1e-15);
        let inward = Vec2::new(-f.tangent.y, f.tangent.x);
        assert!(inward.y > 0.0);
    }

    #[test]
    fn triangle_json_roundtrip() {
        let t = LabeledTriangle::right_isosceles();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"v":[[0.0,0.0],[1.0,0.0],[0.0,1.0]]}"#);
        let back: LabeledTriangle = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<LabeledTriangle>(r#"{"v":[[0,0],[1,0],[2,0]]}"#).is_err());
    }

    fn arb_triangle() -> impl Strategy<Value = LabeledTriangle> {
        prop::array::uniform6(-3.0f64..3.0).prop_filter_map("degenerate", |c| {
            LabeledTriangle::from_coords([[c[0], c[1]], [c[2], c[3]], [c[4], c[5]]])
                .ok()
                .filter(|t| t.angles().iter().all(|&b| b > 1e-3))
        })
    }

    proptest! {
        #[test]
        fn angle_sum_is_pi(t in arb_triangle()) {
            prop_assert!((t.angles().iter().sum::<f64>() - PI).abs() < 1e-12);
        }

        #[test]
        fn path_is_affine(t in arb_triangle()) {
            if let (Ok(a), Ok(m), Ok(b)) = (
                t.straight_line_path(0.0),
                t.straight_line_path(0.5),
                t.straight_line_path(1.0),
            ) {
                for i in 0..3 {
                    prop_assert_eq!(m.vertex(i), (a.vertex(i) + b.vertex(i)) * 0.5);
                }
            }
        }

        #[test]
        fn from_angles_inverts_angles(b1 in 0.05f64..1.5, b2 in 0.05f64..1.5) {
            prop_assume!(b1 + b2 < PI - 0.05);
            let t = LabeledTriangle::from_angles(b1, b2).unwrap();
            let a = t.angles();
            prop_assert!((a[0] - b1).abs() < 1e-10);
            prop_assert!((a[1] - b2).abs() < 1e-10);
        }

        #[test]
        fn frames_point_inward(t in arb_triangle()) {
            let c = t.centroid();
            for e in 0..3 {
                let f = t.edge_frame(e).unwrap();
                let inward = Vec2::new(-f.tangent.y, f.tangent.x);
                let mid = f.point_at(0.5 * f.length);
                prop_assert!(inward.dot(&(c - mid)) > 0.0);
                prop_assert!(f.tangent.dot(&f.normal).abs() < 1e-15);
            }
        }
    }
}
