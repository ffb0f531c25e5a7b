//! Vertex-anchored Fourier–Bessel blocks.
//!
//! Term `n` of the block at vertex `v` (opening angle `β`, `ν = π/β`) is
//!
//! ```text
//! φₙ(z) = Re((z/R)^{nν}) · Λ_{nν}(k|z|),    z = Q(p − v)
//! ```
//!
//! which is `J_{nν}(k r) cos(nνθ)` up to a constant factor. `Q` is the
//! orthogonal map taking the edge toward the next labeled vertex to the
//! positive real axis with the triangle in the upper half plane, and `R`
//! is the longer adjacent side. Writing `G(s) = Λ_{nν}(k √s)` gives the
//! exact derivative identities `G' = −(k²/4)/(nν+1) · Λ_{nν+1}` and
//! `G'' = (k²/4)²/((nν+1)(nν+2)) · Λ_{nν+2}`, so values, gradients and
//! Hessians come out analytically with no division by `r`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LabeledTriangle, Vec2};
use crate::specfun::{lambda_run, MAX_ORDER};

/// Expansion block anchored at one vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisBlock {
    /// Zero-based vertex label.
    pub vertex: usize,
    pub position: [f64; 2],
    /// `π / β` at this vertex.
    pub nu: f64,
    /// Orders `n = 0..terms`.
    pub terms: usize,
    /// Direction (radians) of the edge toward the next labeled vertex;
    /// `θ = 0` lies along it.
    pub reference_direction: f64,
    /// +1 when `θ` increases counterclockwise, −1 otherwise.
    pub orientation: i8,
    pub scale_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub blocks: Vec<BasisBlock>,
    pub smooth: Vec<SmoothBlock>,
    #[serde(default)]
    pub sources: Vec<SourceBlock>,
}

/// What a term evaluation must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Jet {
    Value,
    Gradient,
    Hessian,
}

/// Value, gradient and Hessian of one basis function in global coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TermJet {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Matrix2<f64>,
}

impl BasisBlock {
    fn frame(&self) -> Matrix2<f64> {
        let (s, c) = self.reference_direction.sin_cos();
        let o = self.orientation as f64;
        Matrix2::new(c, s, -o * s, o * c)
    }

    pub fn vertex_point(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }

    /// Local polar coordinates `(r, θ)` of `p`.
    pub fn polar(&self, p: &Vec2) -> (f64, f64) {
        let z = self.frame() * (p - self.vertex_point());
        (z.norm(), z.y.atan2(z.x))
    }

    /// Opening angle `β = π/ν`.
    pub fn opening(&self) -> f64 {
        PI / self.nu
    }

    /// Evaluates every term of the block at `p`, pushing one jet per term.
    pub fn eval_terms(&self, p: &Vec2, k: f64, jet: Jet, out: &mut Vec<TermJet>) {
        let q = self.frame();
        let qt = q.transpose();
        let z = q * (p - self.vertex_point());
        let kr = k * z.norm();
        let mut lam = [0.0; 3];
        let count = jet_width(jet);
        for n in 0..self.terms {
            let m = n as f64 * self.nu;
            lambda_run(m, kr, &mut lam[..count]);
            let (value, grad, hess) = power_jet(z, m, self.scale_radius, k, jet, Part::Re, &lam);
            out.push(TermJet {
                value,
                grad: qt * grad,
                hess: qt * hess * q,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Re,
    Im,
}

/// Number of consecutive `Λ` orders a jet needs.
fn jet_width(jet: Jet) -> usize {
    match jet {
        Jet::Value => 1,
        Jet::Gradient => 2,
        Jet::Hessian => 3,
    }
}

/// Jet of `Part((z/R)^m) · Λ_m(k|z|)` in the frame of `z`, given
/// `lam = [Λ_m, Λ_{m+1}, Λ_{m+2}](k|z|)` as far as the jet needs.
fn power_jet(
    z: Vec2,
    m: f64,
    big_r: f64,
    k: f64,
    jet: Jet,
    part: Part,
    lam: &[f64],
) -> (f64, Vec2, Matrix2<f64>) {
    let (x, y) = (z.x, z.y);
    let r = (x * x + y * y).sqrt();
    let theta = y.atan2(x);
    let rho = r / big_r;
    let k2 = 0.25 * k * k;
    let pick = |c: (f64, f64), rotated: bool| match (part, rotated) {
        (Part::Re, false) => c.0,
        (Part::Im, false) => c.1,
        // Re(i c) and Im(i c)
        (Part::Re, true) => -c.1,
        (Part::Im, true) => c.0,
    };
    let h0 = lam[0];
    let pw = polar_power(rho, m, theta);
    let p0 = pick(pw, false);
    let value = p0 * h0;
    if jet == Jet::Value {
        return (value, Vec2::zeros(), Matrix2::zeros());
    }
    let g0 = h0;
    let g1 = -k2 / (m + 1.0) * lam[1];
    // P_x = (m/R)(z/R)^{m−1}, P_y = i P_x
    let px = if m == 0.0 {
        (0.0, 0.0)
    } else {
        let b = polar_power(rho, m - 1.0, theta);
        (m / big_r * b.0, m / big_r * b.1)
    };
    let (px_, py_) = (pick(px, false), pick(px, true));
    let grad = Vector2::new(px_ * g0 + p0 * 2.0 * x * g1, py_ * g0 + p0 * 2.0 * y * g1);
    if jet == Jet::Gradient {
        return (value, grad, Matrix2::zeros());
    }
    let g2 = k2 * k2 / ((m + 1.0) * (m + 2.0)) * lam[2];
    let pxx = if m == 0.0 || m == 1.0 {
        (0.0, 0.0)
    } else {
        let b = polar_power(rho, m - 2.0, theta);
        let c = m * (m - 1.0) / (big_r * big_r);
        (c * b.0, c * b.1)
    };
    // P_xx, P_xy = i P_xx, P_yy = −P_xx
    let (pxx_, pxy_) = (pick(pxx, false), pick(pxx, true));
    let pyy_ = -pxx_;
    let hxx = pxx_ * g0 + 4.0 * px_ * x * g1 + p0 * (2.0 * g1 + 4.0 * x * x * g2);
    let hyy = pyy_ * g0 + 4.0 * py_ * y * g1 + p0 * (2.0 * g1 + 4.0 * y * y * g2);
    let hxy = pxy_ * g0 + 2.0 * (px_ * y + py_ * x) * g1 + p0 * 4.0 * x * y * g2;
    (value, grad, Matrix2::new(hxx, hxy, hxy, hyy))
}

/// Largest order count of a smooth block.
pub const MAX_SMOOTH_ORDERS: usize = 60;

/// Integer-order Fourier–Bessel terms of both parities about an interior
/// point. They carry the smooth part of the eigenfunction that the
/// Neumann-exact vertex blocks cannot exchange between edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothBlock {
    pub center: [f64; 2],
    /// Orders `n = 0..orders`; every order above zero has two terms.
    pub orders: usize,
    pub scale_radius: f64,
}

impl SmoothBlock {
    pub fn len(&self) -> usize {
        if self.orders == 0 {
            0
        } else {
            2 * self.orders - 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.orders == 0
    }

    pub fn eval_terms(&self, p: &Vec2, k: f64, jet: Jet, out: &mut Vec<TermJet>) {
        let z = p - Vec2::new(self.center[0], self.center[1]);
        let width = jet_width(jet);
        let mut lam = [0.0; MAX_SMOOTH_ORDERS + 2];
        let lam = &mut lam[..self.orders + width - 1];
        lambda_run(0.0, k * z.norm(), lam);
        for n in 0..self.orders {
            let parts: &[Part] = if n == 0 {
                &[Part::Re]
            } else {
                &[Part::Re, Part::Im]
            };
            for &part in parts {
                let (value, grad, hess) = power_jet(
                    z,
                    n as f64,
                    self.scale_radius,
                    k,
                    jet,
                    part,
                    &lam[n..n + width],
                );
                out.push(TermJet { value, grad, hess });
            }
        }
    }
}

/// Triangles whose smallest angle is below this get exterior sources.
pub const SOURCE_ANGLE: f64 = 0.25;

/// Source spacing along an edge, as a fraction of the diameter.
pub const SOURCE_SPACING: f64 = 0.2;

/// Distance of the sources from their edge, as a fraction of the diameter.
pub const SOURCE_OFFSET: f64 = 0.1;

/// Below this smallest angle the spacing and offset shrink in proportion,
/// down to half their size.
pub const SOURCE_DENSE_ANGLE: f64 = 0.1;

/// Orders carried by each exterior source.
pub const SOURCE_ORDERS: usize = 4;

/// Singular solutions `Y_n(kρ) e^{inφ}` about a point outside the triangle,
/// in polar coordinates `(ρ, φ)` about that point. Vertex and centroid
/// expansions are global on the triangle; on long flat slivers they cannot
/// resolve the field along the long sides, which these local terms can.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBlock {
    pub center: [f64; 2],
    /// Orders `n = 0..orders`; every order above zero has two terms.
    pub orders: usize,
}

impl SourceBlock {
    pub fn len(&self) -> usize {
        if self.orders == 0 {
            0
        } else {
            2 * self.orders - 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.orders == 0
    }

    /// Uses `∂_x F_n = (k/2)(F_{n−1} − F_{n+1})` and
    /// `∂_y F_n = (ik/2)(F_{n−1} + F_{n+1})` for `F_n = Y_n e^{inφ}`.
    pub fn eval_terms(&self, p: &Vec2, k: f64, jet: Jet, out: &mut Vec<TermJet>) {
        let d = p - Vec2::new(self.center[0], self.center[1]);
        let rho = d.norm();
        let phi = d.y.atan2(d.x);
        let reach = self.orders + 2;
        let mut y = [0.0; SOURCE_MAX_ORDERS + 3];
        crate::specfun::bessel_y_run(k * rho, &mut y[..reach + 1]);
        let f = |n: i64| -> (f64, f64) {
            let m = n.unsigned_abs() as usize;
            let mut a = y[m];
            if n < 0 && m % 2 == 1 {
                a = -a;
            }
            let (sn, cs) = (n as f64 * phi).sin_cos();
            (a * cs, a * sn)
        };
        let width = jet_width(jet);
        let h = 0.5 * k;
        let q = 0.25 * k * k;
        for n in 0..self.orders as i64 {
            let f0 = f(n);
            let (mut gx, mut gy) = ((0.0, 0.0), (0.0, 0.0));
            let (mut hxx, mut hxy, mut hyy) = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0));
            if width > 1 {
                let (fm, fp) = (f(n - 1), f(n + 1));
                gx = (h * (fm.0 - fp.0), h * (fm.1 - fp.1));
                // i·(a + ib) = −b + ia
                gy = (-h * (fm.1 + fp.1), h * (fm.0 + fp.0));
            }
            if width > 2 {
                let (fmm, fpp) = (f(n - 2), f(n + 2));
                hxx = (
                    q * (fmm.0 - 2.0 * f0.0 + fpp.0),
                    q * (fmm.1 - 2.0 * f0.1 + fpp.1),
                );
                hxy = (-q * (fmm.1 - fpp.1), q * (fmm.0 - fpp.0));
                hyy = (-k * k * f0.0 - hxx.0, -k * k * f0.1 - hxx.1);
            }
            let parts: &[Part] = if n == 0 {
                &[Part::Re]
            } else {
                &[Part::Re, Part::Im]
            };
            for &part in parts {
                let pick = |c: (f64, f64)| if part == Part::Re { c.0 } else { c.1 };
                out.push(TermJet {
                    value: pick(f0),
                    grad: Vec2::new(pick(gx), pick(gy)),
                    hess: Matrix2::new(pick(hxx), pick(hxy), pick(hxy), pick(hyy)),
                });
            }
        }
    }
}

/// Largest order count of an exterior source.
pub const SOURCE_MAX_ORDERS: usize = 20;

/// Source positions for `t`: none unless the triangle has a small angle,
/// otherwise evenly spaced just outside every edge.
pub fn source_centers(t: &LabeledTriangle) -> Vec<Vec2> {
    let min_angle = t.angles().iter().copied().fold(f64::INFINITY, f64::min);
    if min_angle >= SOURCE_ANGLE {
        return Vec::new();
    }
    let diam = t.diameter() * (min_angle / SOURCE_DENSE_ANGLE).clamp(0.5, 1.0);
    let mut out = Vec::new();
    for e in 0..3 {
        let a = t.vertex(e);
        let b = t.vertex((e + 1) % 3);
        let len = (b - a).norm();
        let tangent = (b - a) / len;
        let mut normal = Vec2::new(tangent.y, -tangent.x);
        if normal.dot(&(t.centroid() - a)) > 0.0 {
            normal = -normal;
        }
        let count = (len / (SOURCE_SPACING * diam)).ceil().max(1.0) as usize;
        for q in 0..count {
            let s = (q as f64 + 0.5) / count as f64;
            out.push(a + (b - a) * s + normal * (SOURCE_OFFSET * diam));
        }
    }
    out
}

/// Terms at a vertex of opening `beta`: `terms` at 60° and below, growing
/// in proportion to the angle above that so every block reaches roughly
/// the same Bessel order.
pub fn terms_for_angle(terms: usize, beta: f64) -> usize {
    terms.max((terms as f64 * beta * 3.0 / PI).ceil() as usize)
}

/// `ρ^a e^{i a θ}` as `(re, im)`, with `0^a = 0` for `a > 0`.
fn polar_power(rho: f64, a: f64, theta: f64) -> (f64, f64) {
    if a == 0.0 {
        return (1.0, 0.0);
    }
    if rho == 0.0 {
        return if a > 0.0 {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
    }
    let mag = rho.powf(a);
    let (s, c) = (a * theta).sin_cos();
    (mag * c, mag * s)
}

impl BasisSpec {
    /// Blocks at all three vertices with `terms` orders each. Orders
    /// `nν` are capped at the special-function envelope, so very sharp
    /// vertices may carry fewer terms.
    pub fn for_triangle(t: &LabeledTriangle, terms: usize, smooth_orders: usize) -> Result<Self> {
        if terms < 4 {
            return Err(Error::InvalidInput(format!(
                "at least 4 terms per vertex required, got {terms}"
            )));
        }
        if smooth_orders > MAX_SMOOTH_ORDERS {
            return Err(Error::InvalidInput(format!(
                "at most {MAX_SMOOTH_ORDERS} smooth orders supported, got {smooth_orders}"
            )));
        }
        let angles = t.angles();
        let orientation = t.orientation();
        let blocks = (0..3)
            .map(|i| {
                let v = t.vertex(i);
                let next = t.vertex((i + 1) % 3);
                let prev = t.vertex((i + 2) % 3);
                let dir = next - v;
                let nu = PI / angles[i];
                let cap = (MAX_ORDER / nu).floor() as usize + 1;
                BasisBlock {
                    vertex: i,
                    position: [v.x, v.y],
                    nu,
                    terms: terms_for_angle(terms, angles[i]).min(cap).max(4.min(cap)),
                    reference_direction: dir.y.atan2(dir.x),
                    orientation,
                    scale_radius: (next - v).norm().max((prev - v).norm()),
                }
            })
            .collect();
        let smooth = if smooth_orders == 0 {
            Vec::new()
        } else {
            let c = t.centroid();
            vec![SmoothBlock {
                center: [c.x, c.y],
                orders: smooth_orders,
                scale_radius: t
                    .vertices()
                    .iter()
                    .map(|v| (v - c).norm())
                    .fold(0.0, f64::max),
            }]
        };
        let sources = source_centers(t)
            .into_iter()
            .map(|c| SourceBlock {
                center: [c.x, c.y],
                orders: SOURCE_ORDERS,
            })
            .collect();
        Ok(BasisSpec {
            blocks,
            smooth,
            sources,
        })
    }

    pub fn total_terms(&self) -> usize {
        self.blocks.iter().map(|b| b.terms).sum::<usize>()
            + self.smooth.iter().map(SmoothBlock::len).sum::<usize>()
            + self.sources.iter().map(SourceBlock::len).sum::<usize>()
    }

    /// Evaluates all basis functions at `p` in block order.
    pub fn eval_all(&self, p: &Vec2, k: f64, jet: Jet, out: &mut Vec<TermJet>) {
        out.clear();
        for b in &self.blocks {
            b.eval_terms(p, k, jet, out);
        }
        for s in &self.smooth {
            s.eval_terms(p, k, jet, out);
        }
        for s in &self.sources {
            s.eval_terms(p, k, jet, out);
        }
    }

    /// Checks that the stored blocks still describe `t`.
    pub fn check_against(&self, t: &LabeledTriangle, tol: f64) -> Result<()> {
        if self.blocks.len() != 3 {
            return Err(Error::StaleBasis(format!(
                "{} blocks, expected 3",
                self.blocks.len()
            )));
        }
        let angles = t.angles();
        for (i, b) in self.blocks.iter().enumerate() {
            let v = t.vertex(i);
            if b.vertex != i
                || (b.position[0] - v.x).abs() > tol
                || (b.position[1] - v.y).abs() > tol
            {
                return Err(Error::StaleBasis(format!(
                    "block {i} anchored away from vertex {}",
                    i + 1
                )));
            }
            if (b.nu - PI / angles[i]).abs() > tol * b.nu {
                return Err(Error::StaleBasis(format!(
                    "block {i} order {} does not match angle {}",
                    b.nu, angles[i]
                )));
            }
            if b.orientation != t.orientation() {
                return Err(Error::StaleBasis(format!("block {i} orientation flipped")));
            }
        }
        let c = t.centroid();
        if self.smooth.len() > 1 {
            return Err(Error::StaleBasis(format!(
                "{} smooth blocks, expected at most 1",
                self.smooth.len()
            )));
        }
        for s in &self.smooth {
            if (s.center[0] - c.x).abs() > tol || (s.center[1] - c.y).abs() > tol {
                return Err(Error::StaleBasis(
                    "smooth block centre is not the centroid".into(),
                ));
            }
        }
        let centers = source_centers(t);
        if self.sources.len() != centers.len() {
            return Err(Error::StaleBasis(format!(
                "{} exterior sources where the triangle calls for {}",
                self.sources.len(),
                centers.len()
            )));
        }
        for (s, c) in self.sources.iter().zip(&centers) {
            if (s.center[0] - c.x).abs() > tol
                || (s.center[1] - c.y).abs() > tol
                || t.contains(c, 0.0)
            {
                return Err(Error::StaleBasis(
                    "exterior source does not match the triangle".into(),
                ));
            }
            if s.orders > SOURCE_MAX_ORDERS {
                return Err(Error::StaleBasis(format!(
                    "exterior source with {} orders",
                    s.orders
                )));
            }
        }
        Ok(())
    }
}
