//! Pointwise evaluation of an eigenfunction and its derivatives.

use std::io::Write;

use nalgebra::Matrix2;

use crate::eigensolver::basis::{Jet, TermJet};
use crate::eigensolver::Eigenpair;
use crate::error::{Error, Result};
use crate::geometry::{LabeledTriangle, Vec2};

/// Points farther than this (relative to the diameter) outside the
/// triangle are rejected.
pub const DOMAIN_SLACK: f64 = 1e-9;
/// Hessians are not reported within this distance (relative to the
/// diameter) of a vertex.
pub const HESSIAN_EXCLUSION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub point: Vec2,
    pub u: f64,
    pub grad: Vec2,
    pub hessian: Option<Matrix2<f64>>,
}

/// A smooth function on a triangle solving `Δu + μu = 0`.
pub trait ScalarField: Sync {
    fn triangle(&self) -> &LabeledTriangle;
    fn mu(&self) -> f64;
    /// Value, gradient and optionally Hessian, with no domain check.
    fn eval_unchecked(&self, p: &Vec2, hessian: bool) -> FieldSample;

    fn value_unchecked(&self, p: &Vec2) -> f64 {
        self.eval_unchecked(p, false).u
    }

    fn eval(&self, p: &Vec2) -> Result<FieldSample> {
        let t = self.triangle();
        if !t.contains(p, DOMAIN_SLACK * t.diameter()) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.eval_unchecked(p, true))
    }

    fn value(&self, p: &Vec2) -> Result<f64> {
        let t = self.triangle();
        if !t.contains(p, DOMAIN_SLACK * t.diameter()) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.value_unchecked(p))
    }

    fn hessian(&self, p: &Vec2) -> Result<Matrix2<f64>> {
        self.eval(p)?.hessian.ok_or(Error::HessianUnavailable)
    }

    /// Largest vertex magnitude, the reference for relative margins.
    fn scale(&self) -> f64 {
        self.triangle()
            .vertices()
            .iter()
            .map(|v| self.value_unchecked(v).abs())
            .fold(0.0, f64::max)
    }
}

/// `R_{p0} u (p) = −(y − y0) ∂x u + (x − x0) ∂y u`.
pub fn rotational_derivative<F: ScalarField + ?Sized>(
    f: &F,
    anchor: &Vec2,
    p: &Vec2,
) -> Result<f64> {
    let g = f.eval(p)?.grad;
    Ok(-(p.y - anchor.y) * g.x + (p.x - anchor.x) * g.y)
}

pub fn directional_derivative<F: ScalarField + ?Sized>(
    f: &F,
    direction: &Vec2,
    p: &Vec2,
) -> Result<f64> {
    Ok(f.eval(p)?.grad.dot(direction))
}

/// Eigenfunction given by an [`Eigenpair`].
#[derive(Debug, Clone, Copy)]
pub struct Field<'a> {
    ep: &'a Eigenpair,
    k: f64,
    hessian_radius: f64,
}

impl<'a> Field<'a> {
    pub fn new(ep: &'a Eigenpair) -> Self {
        Field {
            ep,
            k: ep.mu.sqrt(),
            hessian_radius: HESSIAN_EXCLUSION * ep.triangle.diameter(),
        }
    }

    pub fn eigenpair(&self) -> &Eigenpair {
        self.ep
    }

    fn combine(&self, p: &Vec2, jet: Jet) -> (f64, Vec2, Matrix2<f64>) {
        let mut jets: Vec<TermJet> = Vec::with_capacity(self.ep.coeffs.len());
        self.ep.basis.eval_all(p, self.k, jet, &mut jets);
        let mut u = 0.0;
        let mut g = Vec2::zeros();
        let mut h = Matrix2::zeros();
        for (j, c) in jets.iter().zip(&self.ep.coeffs) {
            u += c * j.value;
            if jet != Jet::Value {
                g += j.grad * *c;
            }
            if jet == Jet::Hessian {
                h += j.hess * *c;
            }
        }
        (u, g, h)
    }
}

impl ScalarField for Field<'_> {
    fn triangle(&self) -> &LabeledTriangle {
        &self.ep.triangle
    }

    fn mu(&self) -> f64 {
        self.ep.mu
    }

    fn eval_unchecked(&self, p: &Vec2, hessian: bool) -> FieldSample {
        let near_vertex = self
            .ep
            .triangle
            .vertices()
            .iter()
            .any(|v| (p - v).norm() < self.hessian_radius);
        let want = hessian && !near_vertex;
        let (u, grad, h) = self.combine(p, if want { Jet::Hessian } else { Jet::Gradient });
        FieldSample {
            point: *p,
            u,
            grad,
            hessian: want.then_some(h),
        }
    }

    fn value_unchecked(&self, p: &Vec2) -> f64 {
        self.combine(p, Jet::Value).0
    }
}

/// Jet of a closed-form function: value, gradient, Hessian.
pub type ClosedFormJet = fn(&Vec2) -> (f64, Vec2, Matrix2<f64>);

/// An explicit Helmholtz solution restricted to a triangle.
#[derive(Debug, Clone, Copy)]
pub struct ClosedForm {
    pub triangle: LabeledTriangle,
    pub mu: f64,
    pub scale: f64,
    pub jet: ClosedFormJet,
}

fn cosine_difference(p: &Vec2) -> (f64, Vec2, Matrix2<f64>) {
    use std::f64::consts::PI;
    let (sx, cx) = (PI * p.x).sin_cos();
    let (sy, cy) = (PI * p.y).sin_cos();
    (
        cx - cy,
        Vec2::new(-PI * sx, PI * sy),
        Matrix2::new(-PI * PI * cx, 0.0, 0.0, PI * PI * cy),
    )
}

impl ClosedForm {
    /// `s (cos πx − cos πy)` on `t`, with `μ = π²`.
    pub fn cosine_difference(t: LabeledTriangle, scale: f64) -> Self {
        ClosedForm {
            triangle: t,
            mu: std::f64::consts::PI.powi(2),
            scale,
            jet: cosine_difference,
        }
    }
}

impl ScalarField for ClosedForm {
    fn triangle(&self) -> &LabeledTriangle {
        &self.triangle
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn eval_unchecked(&self, p: &Vec2, hessian: bool) -> FieldSample {
        let (u, g, h) = (self.jet)(p);
        FieldSample {
            point: *p,
            u: self.scale * u,
            grad: g * self.scale,
            hessian: hessian.then_some(h * self.scale),
        }
    }
}

/// Samples on an `n × n` barycentric lattice covering the closed triangle.
pub fn lattice_points(t: &LabeledTriangle, n: usize) -> Vec<Vec2> {
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let a = i as f64 / n as f64;
            let b = j as f64 / n as f64;
            out.push(t.from_barycentric([1.0 - a - b, a, b]));
        }
    }
    out
}

/// Samples of `f` at the nodes of an axis-aligned `n × n` grid over the
/// bounding box that fall inside the triangle.
pub fn grid_samples<F: ScalarField + ?Sized>(f: &F, n: usize) -> Vec<FieldSample> {
    let t = f.triangle();
    let (lo, hi) = bounding_box(t);
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let p = Vec2::new(
                lo.x + (hi.x - lo.x) * j as f64 / n as f64,
                lo.y + (hi.y - lo.y) * i as f64 / n as f64,
            );
            if t.contains(&p, 1e-12 * t.diameter()) {
                out.push(f.eval_unchecked(&p, false));
            }
        }
    }
    out
}

pub fn bounding_box(t: &LabeledTriangle) -> (Vec2, Vec2) {
    let v = t.vertices();
    let lo = Vec2::new(
        v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
    );
    let hi = Vec2::new(
        v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    );
    (lo, hi)
}

/// Writes `x,y,u,ux,uy` rows.
pub fn write_grid_csv<W: Write>(w: &mut W, samples: &[FieldSample]) -> Result<()> {
    writeln!(w, "x,y,u,ux,uy")?;
    for s in samples {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.point.x, s.point.y, s.u, s.grad.x, s.grad.y
        )?;
    }
    Ok(())
}

/// Normalized inner product of two fields over the lattice points.
pub fn correlation<F: ScalarField + ?Sized, G: ScalarField + ?Sized>(
    f: &F,
    g: &G,
    points: &[Vec2],
) -> f64 {
    let (mut fg, mut ff, mut gg) = (0.0, 0.0, 0.0);
    for p in points {
        let a = f.value_unchecked(p);
        let b = g.value_unchecked(p);
        fg += a * b;
        ff += a * a;
        gg += b * b;
    }
    fg / (ff * gg).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverConfig;
    use crate::eigensolver::find_mu2;
    use crate::quadrature::halton_points;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn right_isosceles() -> &'static Eigenpair {
        static EP: OnceLock<Eigenpair> = OnceLock::new();
        EP.get_or_init(|| {
            find_mu2(
                &LabeledTriangle::right_isosceles(),
                &SolverConfig::default(),
            )
            .unwrap()
        })
    }

    fn scalene() -> &'static Eigenpair {
        static EP: OnceLock<Eigenpair> = OnceLock::new();
        EP.get_or_init(|| {
            find_mu2(
                &LabeledTriangle::from_angles(1.1, 0.75).unwrap(),
                &SolverConfig::default(),
            )
            .unwrap()
        })
    }

    /// `s` such that `u ≈ s (cos πx − cos πy)`.
    fn exact_scale(f: &Field) -> f64 {
        f.value_unchecked(&Vec2::new(0.0, 1.0)) / 2.0
    }

    #[test]
    fn right_isosceles_vertex_values() {
        let f = right_isosceles().field();
        let s = exact_scale(&f);
        assert!(s > 0.0, "sign gauge puts the maximum at v3");
        assert!(f.value(&Vec2::zeros()).unwrap().abs() < 1e-8 * s);
        let ratio = f.value(&Vec2::new(1.0, 0.0)).unwrap() / f.value(&Vec2::new(0.0, 1.0)).unwrap();
        assert!((ratio + 1.0).abs() < 1e-8, "{ratio}");
    }

    #[test]
    fn right_isosceles_matches_closed_form() {
        let f = right_isosceles().field();
        let s = exact_scale(&f);
        let exact = ClosedForm::cosine_difference(LabeledTriangle::right_isosceles(), s);
        let t = LabeledTriangle::right_isosceles();
        let mut pts = Vec::new();
        for i in 0..50 {
            for j in 0..50 {
                let p = Vec2::new((i as f64 + 0.5) / 50.0, (j as f64 + 0.5) / 50.0);
                if t.contains(&p, 0.0) {
                    pts.push(p);
                }
            }
        }
        assert!(correlation(&f, &exact, &pts) >= 1.0 - 1e-8);
        let p = Vec2::new(0.5, 0.25);
        let g = f.eval(&p).unwrap().grad;
        let want = Vec2::new(-PI, PI * 2f64.sqrt() / 2.0) * s;
        assert!((g - want).norm() < 1e-6 * want.norm(), "{g:?} vs {want:?}");
        let d = directional_derivative(&f, &Vec2::new(1.0, 0.0), &p).unwrap();
        assert!((d + PI * s).abs() < 1e-6 * PI * s);
        let r = rotational_derivative(&f, &Vec2::zeros(), &Vec2::new(0.5, 0.5)).unwrap();
        assert!((r - PI * s).abs() < 1e-6 * PI * s, "{r} vs {}", PI * s);
    }

    #[test]
    fn derivative_fields_vanish_where_expected() {
        let ep = scalene();
        let f = ep.field();
        let t = &ep.triangle;
        let scale = f.scale();
        let q = Vec2::new(0.3, 0.2);
        assert_eq!(rotational_derivative(&f, &q, &q).unwrap(), 0.0);
        let g = f.eval(&q).unwrap().grad;
        let perp = Vec2::new(-g.y, g.x).normalize();
        assert!(directional_derivative(&f, &perp, &q).unwrap().abs() < 1e-12 * g.norm());
        for e in 0..3 {
            let fr = t.edge_frame(e).unwrap();
            for s in [0.2, 0.5, 0.8] {
                let p = fr.point_at(s * fr.length);
                let dn = directional_derivative(&f, &fr.normal, &p).unwrap();
                assert!(dn.abs() < 1e-6 * scale, "edge {e}: {dn:e}");
            }
            for v in LabeledTriangle::edges_at_vertex(e).map(|ed| (ed, e)) {
                let fr = t.edge_frame(v.0).unwrap();
                let p = fr.point_at(0.4 * fr.length);
                let r = rotational_derivative(&f, &t.vertex(v.1), &p).unwrap();
                assert!(r.abs() < 1e-6 * scale, "vertex {} edge {}: {r:e}", v.1, v.0);
            }
        }
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let ep = scalene();
        let f = ep.field();
        let t = &ep.triangle;
        let h = 1e-5 * t.diameter();
        let scale = f.scale();
        for p in halton_points(t, 50, 3) {
            let s = f.eval(&p).unwrap();
            let fd = Vec2::new(
                (f.value_unchecked(&(p + Vec2::new(h, 0.0)))
                    - f.value_unchecked(&(p - Vec2::new(h, 0.0))))
                    / (2.0 * h),
                (f.value_unchecked(&(p + Vec2::new(0.0, h)))
                    - f.value_unchecked(&(p - Vec2::new(0.0, h))))
                    / (2.0 * h),
            );
            let rel = (s.grad - fd).norm() / s.grad.norm().max(1e-3 * scale);
            assert!(rel < 1e-6, "gradient at {p:?}: {rel:e}");
            let hx = (f.eval_unchecked(&(p + Vec2::new(h, 0.0)), false).grad
                - f.eval_unchecked(&(p - Vec2::new(h, 0.0)), false).grad)
                / (2.0 * h);
            let hy = (f.eval_unchecked(&(p + Vec2::new(0.0, h)), false).grad
                - f.eval_unchecked(&(p - Vec2::new(0.0, h)), false).grad)
                / (2.0 * h);
            let fd_h = Matrix2::new(hx.x, hy.x, hx.y, hy.y);
            let an = s.hessian.unwrap();
            let rel = (an - fd_h).abs().max() / an.abs().max().max(1e-3 * scale);
            assert!(rel < 1e-5, "hessian at {p:?}: {rel:e}");
        }
    }

    #[test]
    fn helmholtz_identity() {
        for ep in [right_isosceles(), scalene()] {
            let f = ep.field();
            for p in halton_points(&ep.triangle, 100, 9) {
                let s = f.eval(&p).unwrap();
                let h = s.hessian.unwrap();
                let bound = 1e-6 * ((ep.mu * s.u).abs() + h.abs().max() + 1.0);
                assert!((h.trace() + ep.mu * s.u).abs() <= bound);
            }
        }
    }

    #[test]
    fn outside_points_and_vertex_hessians() {
        let f = scalene().field();
        let t = scalene().triangle;
        assert!(matches!(
            f.eval(&Vec2::new(0.5, -0.01)),
            Err(Error::OutsideDomain { .. })
        ));
        let at_vertex = f.eval(&t.vertex(2)).unwrap();
        assert!(at_vertex.hessian.is_none());
        assert!(at_vertex.grad.norm().is_finite());
        assert!(matches!(
            f.hessian(&t.vertex(0)),
            Err(Error::HessianUnavailable)
        ));
    }

    #[test]
    fn grid_csv_rows() {
        let f = right_isosceles().field();
        let samples = grid_samples(&f, 10);
        assert_eq!(samples.len(), 66);
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 67);
        assert!(text.starts_with("x,y,u,ux,uy\n"));
    }

    #[test]
    fn closed_form_saddle() {
        let t = LabeledTriangle::from_coords([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]).unwrap();
        let f = ClosedForm::cosine_difference(t, 1.0);
        let s = f.eval(&Vec2::zeros()).unwrap();
        assert_eq!(s.grad, Vec2::zeros());
        let h = s.hessian.unwrap();
        assert!((h[(0, 0)] + PI * PI).abs() < 1e-12 && (h[(1, 1)] - PI * PI).abs() < 1e-12);
    }
}
