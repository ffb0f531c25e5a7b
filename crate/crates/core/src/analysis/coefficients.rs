//! Bessel coefficients of an eigenfunction at a vertex.
//!
//! On the arc of radius `r` about a vertex of opening `β`,
//! `cₙ J_{nν}(kr) = (2 − δ_{n0})/β ∫₀^β u(r, θ) cos(nνθ) dθ`
//! with `θ` measured from the edge toward the next labeled vertex.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{LabeledTriangle, Vec2};
use crate::quadrature::GaussLegendre;
use crate::specfun::bessel_j;

/// Smallest Bessel factor accepted when dividing out `J_{nν}(kr)`.
pub const MIN_BESSEL_FACTOR: f64 = 1e-12;

/// Polar frame at a vertex matching the basis orientation convention.
#[derive(Debug, Clone, Copy)]
pub struct VertexFrame {
    pub vertex: usize,
    pub origin: Vec2,
    pub beta: f64,
    pub nu: f64,
    e0: Vec2,
    e1: Vec2,
}

impl VertexFrame {
    pub fn new(t: &LabeledTriangle, vertex: usize) -> Self {
        let origin = t.vertex(vertex);
        let e0 = (t.vertex((vertex + 1) % 3) - origin).normalize();
        let o = t.orientation() as f64;
        let e1 = Vec2::new(-e0.y, e0.x) * o;
        let beta = t.angles()[vertex];
        VertexFrame {
            vertex,
            origin,
            beta,
            nu: PI / beta,
            e0,
            e1,
        }
    }

    pub fn point(&self, r: f64, theta: f64) -> Vec2 {
        self.origin + (self.e0 * theta.cos() + self.e1 * theta.sin()) * r
    }

    /// Shorter of the two adjacent sides.
    pub fn short_side(t: &LabeledTriangle, vertex: usize) -> f64 {
        let v = t.vertex(vertex);
        (t.vertex((vertex + 1) % 3) - v)
            .norm()
            .min((t.vertex((vertex + 2) % 3) - v).norm())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexCoefficients {
    pub vertex: usize,
    /// `c0, c1, …`; `None` where the Bessel factor was too small.
    pub c: Vec<Option<f64>>,
    /// `u(v)` evaluated directly.
    pub value: f64,
    pub r_probe: f64,
    pub nodes: usize,
}

impl VertexCoefficients {
    pub fn c0(&self) -> f64 {
        self.c[0].unwrap_or(self.value)
    }

    pub fn c1(&self) -> Option<f64> {
        self.c.get(1).copied().flatten()
    }

    /// `max(|c0|, |c1|)`, with `|c1|` omitted when unavailable.
    pub fn leading_magnitude(&self) -> f64 {
        self.c0().abs().max(self.c1().map_or(0.0, f64::abs))
    }
}

/// Coefficients `c0..=c_{n_max}` at `vertex` from the arc of radius `r_probe`.
pub fn bessel_coefficients<F: ScalarField + ?Sized>(
    f: &F,
    vertex: usize,
    n_max: usize,
    r_probe: f64,
    nodes: usize,
) -> Result<VertexCoefficients> {
    let t = f.triangle();
    let frame = VertexFrame::new(t, vertex);
    let short = VertexFrame::short_side(t, vertex);
    if !(r_probe >= 1e-3 * short * (1.0 - 1e-12) && r_probe <= 0.2 * short * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "probe radius {r_probe} outside [1e-3, 0.2] × shortest adjacent side {short}"
        )));
    }
    let k = f.mu().sqrt();
    let gl = GaussLegendre::new(nodes);
    let samples: Vec<(f64, f64)> = gl
        .nodes
        .iter()
        .zip(&gl.weights)
        .map(|(x, w)| {
            let theta = 0.5 * frame.beta * (x + 1.0);
            (
                theta,
                0.5 * frame.beta * w * f.value_unchecked(&frame.point(r_probe, theta)),
            )
        })
        .collect();
    let mut c = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let order = n as f64 * frame.nu;
        let factor = bessel_j(order, k * r_probe)?.value;
        if factor.abs() < MIN_BESSEL_FACTOR {
            if n == 0 {
                return Err(Error::BesselFactorTooSmall {
                    factor,
                    radius: r_probe,
                });
            }
            c.push(None);
            continue;
        }
        let integral: f64 = samples.iter().map(|(th, wu)| wu * (order * th).cos()).sum();
        let weight = if n == 0 { 1.0 } else { 2.0 };
        c.push(Some(weight / frame.beta * integral / factor));
    }
    Ok(VertexCoefficients {
        vertex,
        c,
        value: f.value_unchecked(&frame.origin),
        r_probe,
        nodes,
    })
}

/// Extraction at the configured probe and at twice it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub primary: VertexCoefficients,
    pub doubled: VertexCoefficients,
    /// `max |cₙ − cₙ'| / max(|c0|, |c1|)` over `n = 0, 1`.
    pub agreement: f64,
    /// The same for `c0` alone.
    pub agreement_c0: f64,
    /// `|c0 − u(v)| / max(|c0|, |c1|)`.
    pub c0_vs_value: f64,
}

/// `c0`, `c1` with the two-radius consistency check. When `J_ν(kr)` is too
/// small or the radii disagree, the probe grows up to its allowed maximum.
pub fn checked_coefficients<F: ScalarField + ?Sized>(
    f: &F,
    vertex: usize,
    cfg: &AnalysisConfig,
) -> Result<CoefficientCheck> {
    let short = VertexFrame::short_side(f.triangle(), vertex);
    let mut r = cfg.probe_fraction * short;
    let mut best: Option<CoefficientCheck> = None;
    loop {
        let primary = bessel_coefficients(f, vertex, 1, r, cfg.quadrature_nodes)?;
        let doubled = bessel_coefficients(f, vertex, 1, 2.0 * r, cfg.quadrature_nodes)?;
        let mag = primary.leading_magnitude().max(1e-300);
        let d0 = (primary.c0() - doubled.c0()).abs();
        let d1 = match (primary.c1(), doubled.c1()) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        };
        let chk = CoefficientCheck {
            agreement: d0.max(d1) / mag,
            agreement_c0: d0 / mag,
            c0_vs_value: (primary.c0() - primary.value).abs() / mag,
            primary,
            doubled,
        };
        let complete = chk.primary.c1().is_some();
        let better = match &best {
            None => true,
            Some(b) => {
                (complete && b.primary.c1().is_none()) || (complete && chk.agreement < b.agreement)
            }
        };
        if better {
            best = Some(chk);
        }
        let b = best.as_ref().unwrap();
        let done = b.primary.c1().is_some() && b.agreement <= cfg.coefficient_agreement;
        if done || 4.0 * r > 0.2 * short * (1.0 + 1e-12) {
            return Ok(best.unwrap());
        }
        r *= 2.0;
    }
}

impl CoefficientCheck {
    /// `c1` when both radii give it consistently.
    pub fn resolved_c1(&self, tol: f64) -> Option<f64> {
        self.primary
            .c1()
            .filter(|_| self.doubled.c1().is_some() && self.agreement <= tol)
    }
}
